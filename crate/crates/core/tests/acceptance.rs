//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use sta_selftest::array::SparsityMode;
use sta_selftest::campaign::{enumerate_faults, run_campaign, synthetic_tiles, CampaignOptions};
use sta_selftest::driver::{self, synthetic_workload, tile_baseline_cycles, LayerShape};
use sta_selftest::selftest::EXPECTED;
use sta_selftest::{
    compute_golden, locate_activation, overhead_report, run_session, tiled_matmul, ArrayConfig, FaultSite,
    Layer, Matrix, RegClass, SparseWeightTile, SystolicArray, TestReport, Verdict, Word, Workload,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn session(config: &ArrayConfig, tile: &SparseWeightTile, fault: Option<FaultSite>) -> TestReport {
    let mut array = SystolicArray::new(*config).unwrap();
    if let Some(f) = fault {
        array.inject(f).unwrap();
    }
    array.load_weights(tile).unwrap();
    let golden = compute_golden(tile, config).unwrap();
    run_session(&mut array, &golden, 0).unwrap()
}

fn only_column(report: &TestReport, col: usize, expect: Verdict) -> bool {
    report
        .verdicts
        .iter()
        .enumerate()
        .all(|(j, v)| if j == col { *v == expect } else { *v == Verdict::Ok })
}

fn faults_of(config: &ArrayConfig, class: RegClass) -> Vec<FaultSite> {
    enumerate_faults(config).into_iter().filter(|f| f.class == class).collect()
}

// 1. Tiled matmul with testing on equals A × prune(W) bit-exactly on 20
// random workloads and no session reports a detection.
fn ac1_correctness() -> Outcome {
    let mut rng = common::rng(101);
    let mut tiles = 0;
    for case in 0..20 {
        let n = if case % 2 == 0 { 2 } else { 1 };
        let config = if n == 2 {
            ArrayConfig::default()
        } else {
            ArrayConfig::default().with_mode(SparsityMode::Single)
        };
        let (x, k, c) = (rng.gen_range(1..=64), rng.gen_range(1..=64), rng.gen_range(1..=32));
        let a = common::random_matrix(&mut rng, x, k, 16);
        let w = common::random_matrix(&mut rng, k, c, 16);
        let expect = common::matmul(&a.padded(x, w.rows().div_ceil(4) * 4), &common::prune(&w, 4, n), 32);
        let wl = Workload {
            layers: vec![Layer { a, w }],
        };
        let out = tiled_matmul(&wl, &config, true, &[]).map_err(|e| e.to_string())?;
        check(out.results[0] == expect, || format!("case {case} ({x}x{k}x{c}, N={n}) differs from oracle"))?;
        check(out.reports.iter().all(|r| !r.detected), || format!("case {case}: false detection"))?;
        tiles += out.stats.tiles_executed;
    }
    Ok(format!("20 workloads, {tiles} tiles, exact and clean"))
}

// 2. Fault-free compared outputs are (0, -1, 0, 0) on 100 random tiles.
fn ac2_fault_free_sessions() -> Outcome {
    let config = ArrayConfig::default();
    let mut rng = common::rng(202);
    for t in 0..100 {
        let tile = common::random_tile(&mut rng, &config);
        let r = session(&config, &tile, None);
        for (test, (got, want)) in r.compared.iter().zip(EXPECTED).enumerate() {
            check(got.iter().all(|&v| v == want), || format!("tile {t} test {}: {got:?}", test + 1))?;
        }
        check(!r.detected, || format!("tile {t} flagged"))?;
    }
    Ok("100 tiles, compared = (0, -1, 0, 0) in every column".into())
}

// 3. Every output-register and edge-accumulator fault is caught by tests
// 1-2 and classified by the complementarity table.
fn ac3_output_guarantee() -> Outcome {
    let config = ArrayConfig::default();
    let mut rng = common::rng(303);
    let mut faults = faults_of(&config, RegClass::Output);
    faults.extend(faults_of(&config, RegClass::EdgeAccumulator));
    let mut checked = 0;
    for t in 0..3 {
        let tile = common::random_tile(&mut rng, &config);
        for &f in &faults {
            let r = session(&config, &tile, Some(f));
            let tests = r.failing_tests();
            check(tests[0] || tests[1], || format!("tile {t}: {f} missed by tests 1-2"))?;
            let expect = if f.class == RegClass::Output {
                Verdict::OutputRegister
            } else {
                Verdict::ComparisonAdder
            };
            check(only_column(&r, f.col, expect), || format!("tile {t}: {f} -> {:?}", r.verdicts))?;
            checked += 1;
        }
    }
    Ok(format!("{checked}/{checked} output/edge injections detected and classified"))
}

// 4. Value-changing weight faults are detected and classified; the rest
// are undetected and bit-identical on 10 random A.
fn ac4_weight_dichotomy() -> Outcome {
    let config = ArrayConfig::default();
    let mut rng = common::rng(404);
    let faults = faults_of(&config, RegClass::Weight);
    let (mut changing, mut silent) = (0, 0);
    for t in 0..3 {
        let tile = common::random_tile(&mut rng, &config);
        let probes: Vec<Matrix> = (0..10).map(|_| common::random_matrix(&mut rng, 8, 32, 16)).collect();
        let mut clean = SystolicArray::new(config).unwrap();
        clean.load_weights(&tile).unwrap();
        let expect: Vec<Matrix> = probes.iter().map(|a| clean.run_compute(a).unwrap().0).collect();
        for &f in &faults {
            let stored = tile.block(f.row, f.col).values[f.element];
            let forced = Word::new(stored, 16).force_bit(f.bit, f.stuck).unwrap().value();
            let r = session(&config, &tile, Some(f));
            if forced != stored {
                changing += 1;
                check(r.detected, || format!("tile {t}: value-changing {f} undetected"))?;
                check(only_column(&r, f.col, Verdict::WeightRegister), || {
                    format!("tile {t}: {f} -> {:?}", r.verdicts)
                })?;
            } else {
                silent += 1;
                check(!r.detected, || format!("tile {t}: no-op {f} flagged"))?;
                let mut array = SystolicArray::new(config).unwrap();
                array.inject(f).unwrap();
                array.load_weights(&tile).unwrap();
                for (a, e) in probes.iter().zip(&expect) {
                    check(array.run_compute(a).unwrap().0 == *e, || format!("tile {t}: no-op {f} not harmless"))?;
                }
            }
        }
    }
    Ok(format!("{changing} value-changing detected+classified, {silent} no-op undetected+harmless"))
}

// 5. Index faults: detected whenever the weight is non-zero and the
// selection changes; test-3-only detections are classified as index
// faults.
fn ac5_index_localization() -> Outcome {
    let config = ArrayConfig::default();
    let mut rng = common::rng(505);
    let faults = faults_of(&config, RegClass::WeightIndex);
    let (mut qualifying, mut exclusive) = (0, 0);
    for t in 0..3 {
        let tile = common::random_tile(&mut rng, &config);
        for &f in &faults {
            let block = tile.block(f.row, f.col);
            let (w, idx) = (block.values[f.element], block.indexes[f.element] as u64);
            let new_idx = if f.stuck { idx | 1 << f.bit } else { idx & !(1 << f.bit) };
            let r = session(&config, &tile, Some(f));
            if w != 0 && new_idx % 4 != idx % 4 {
                qualifying += 1;
                check(r.detected, || format!("tile {t}: qualifying {f} undetected"))?;
            }
            if r.failing_tests() == [false, false, true, false] {
                exclusive += 1;
                check(only_column(&r, f.col, Verdict::WeightIndexRegister), || {
                    format!("tile {t}: {f} -> {:?}", r.verdicts)
                })?;
            }
        }
    }
    Ok(format!("{qualifying}/{qualifying} qualifying detected, {exclusive} test-3-only classified"))
}

// 6. Activation faults: test-4 failures are m-periodic and the injected
// column lies in the reported window.
fn ac6_activation_periodicity() -> Outcome {
    let config = ArrayConfig::default();
    let mut rng = common::rng(606);
    let faults = faults_of(&config, RegClass::Activation);
    let (mut detected, mut with_test4, mut test4_only) = (0, 0, 0);
    for t in 0..3 {
        let tile = common::random_tile(&mut rng, &config);
        for &f in &faults {
            let r = session(&config, &tile, Some(f));
            if !r.detected {
                continue;
            }
            detected += 1;
            let fails = r.failing_columns(3);
            if fails.is_empty() {
                continue;
            }
            with_test4 += 1;
            let window = locate_activation(&fails, config.m, config.cols)
                .ok_or_else(|| format!("tile {t}: {f} test-4 failures {fails:?} not periodic"))?;
            check(window.contains(f.col), || format!("tile {t}: {f} outside window {window:?}"))?;
            if r.failing_tests() == [false, false, false, true] {
                test4_only += 1;
                let ok = r.verdicts.iter().all(|v| match *v {
                    Verdict::Ok => true,
                    Verdict::ActivationWindow { start, end, .. } => (start..=end).contains(&f.col),
                    _ => false,
                });
                check(ok, || format!("tile {t}: {f} -> {:?}", r.verdicts))?;
            }
        }
    }
    Ok(format!(
        "{detected} detected, {with_test4} with test-4 failures all periodic and localized ({test4_only} test-4 only)"
    ))
}

// 7. Four test cycles per tile; overhead inside 0.5%-2% and equal to the
// closed form.
fn ac7_latency() -> Outcome {
    let config = ArrayConfig::default();
    // representative workload: 256 streamed rows per tile, 2 x 2 tiles
    let rows = 256;
    let wl = synthetic_workload(&[LayerShape::new(rows, 64, 16)], 16, 707);
    let on = tiled_matmul(&wl, &config, true, &[]).map_err(|e| e.to_string())?;
    let off = tiled_matmul(&wl, &config, false, &[]).map_err(|e| e.to_string())?;
    let tiles = on.stats.tiles_executed;
    check(on.stats.test_cycles == 4 * tiles, || format!("test cycles {} for {tiles} tiles", on.stats.test_cycles))?;
    check(off.stats.test_cycles == 0, || "testing off spent test cycles".into())?;
    check(on.results == off.results, || "testing changed the results".into())?;
    let ratio = overhead_report(&on.stats, &off.stats);
    let closed = 4.0 / tile_baseline_cycles(&config, rows) as f64;
    check(ratio == closed, || format!("measured {ratio} != closed form {closed}"))?;
    check(off.stats.total_cycles == tiles * tile_baseline_cycles(&config, rows), || "baseline mismatch".into())?;
    check((0.005..=0.02).contains(&ratio), || format!("overhead {:.3}% out of band", ratio * 100.0))?;

    // CNN-like multi-layer workload for context
    let shapes = driver::cnn_like_shapes(3, 7);
    let wl = synthetic_workload(&shapes, 16, 708);
    let on2 = tiled_matmul(&wl, &config, true, &[]).map_err(|e| e.to_string())?;
    let off2 = tiled_matmul(&wl, &config, false, &[]).map_err(|e| e.to_string())?;
    check(on2.stats.test_cycles == 4 * on2.stats.tiles_executed, || "multi-layer test cycles".into())?;
    let ratio2 = overhead_report(&on2.stats, &off2.stats);
    Ok(format!(
        "{rows} rows/tile: overhead {:.3}% (= 4/{}), cnn-like {} tiles: {:.3}%",
        ratio * 100.0,
        tile_baseline_cycles(&config, rows),
        on2.stats.tiles_executed,
        ratio2 * 100.0
    ))
}

// 8. Cumulative coverage over 10 varied tiles is non-decreasing and
// reaches 95% of its final value within the first 30% of tiles.
fn ac8_curve_shape() -> Outcome {
    let config = ArrayConfig::default();
    let tiles = synthetic_tiles(&config, 10, 808);
    let faults = enumerate_faults(&config);
    let options = CampaignOptions {
        harmless_trials: 0,
        ..CampaignOptions::default()
    };
    let report = run_campaign(&tiles, &config, &faults, &options).map_err(|e| e.to_string())?;
    let curve = &report.cumulative_curve;
    check(curve.windows(2).all(|w| w[0] <= w[1]), || format!("curve decreases: {curve:?}"))?;
    check(report.false_positive_tiles == 0, || "fault-free session flagged".into())?;
    let knee = (curve.len() * 3) / 10;
    let final_cov = *curve.last().unwrap();
    check(curve[knee - 1] >= 0.95 * final_cov, || {
        format!("after {knee} tiles {:.4} < 95% of final {final_cov:.4}", curve[knee - 1])
    })?;
    let pretty: Vec<String> = curve.iter().map(|c| format!("{:.3}", c)).collect();
    Ok(format!("{} faults, curve [{}]", report.total_faults, pretty.join(", ")))
}

// 9. x + !x == -1 and symmetric complementarity: exhaustive at 8 bits,
// 10^5 random cases at 16 and 32 bits.
fn ac9_arithmetic() -> Outcome {
    for a in -128i64..=127 {
        let x = Word::new(a, 8);
        check(x.wrap_add(x.bit_not()).unwrap().value() == -1, || format!("x = {a}"))?;
        for b in -128i64..=127 {
            let y = Word::new(b, 8);
            check(x.is_bitwise_complement(y) == y.is_bitwise_complement(x), || format!("({a}, {b})"))?;
            check(x.is_bitwise_complement(y) == (a + b == -1), || format!("({a}, {b}) predicate"))?;
        }
    }
    let mut rng = common::rng(909);
    for width in [16u32, 32] {
        for _ in 0..100_000 {
            let (a, b): (i64, i64) = (rng.gen(), rng.gen());
            let (x, y) = (Word::new(a, width), Word::new(b, width));
            check(x.wrap_add(x.bit_not()).unwrap().value() == -1, || format!("w{width} x = {a}"))?;
            check(x.is_bitwise_complement(y) == y.is_bitwise_complement(x), || format!("w{width} ({a}, {b})"))?;
            check(x.is_bitwise_complement(x.bit_not()), || format!("w{width} {a} vs !{a}"))?;
        }
    }
    Ok("exhaustive width 8, 2 x 10^5 random at widths 16/32".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("AC1 correctness oracle", ac1_correctness),
        ("AC2 fault-free session outputs", ac2_fault_free_sessions),
        ("AC3 output-register guarantee", ac3_output_guarantee),
        ("AC4 weight-register dichotomy", ac4_weight_dichotomy),
        ("AC5 weight-index localization", ac5_index_localization),
        ("AC6 activation periodicity", ac6_activation_periodicity),
        ("AC7 latency overhead", ac7_latency),
        ("AC8 coverage curve shape", ac8_curve_shape),
        ("AC9 arithmetic identities", ac9_arithmetic),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
