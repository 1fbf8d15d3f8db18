//! Exhaustive single stuck-at fault campaigns.
//!
//! Every fault of the register universe is injected on its own into a
//! fresh array. The workload's weight tiles are then loaded one after the
//! other, with a self-test session after each load. A fault counts as
//! covered from the first tile whose session flags it. Faults that stay
//! undetected can be checked for harmlessness: the tiles are multiplied
//! with random activations on the faulty and on a fault-free array, and the
//! outputs must match bit for bit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayConfig, FaultSite, RegClass, SystolicArray};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::selftest::{compute_golden, run_session, GoldenReference, TestReport, Verdict};
use crate::sparsity::{pack_tile, SparseWeightTile};

/// Every single stuck-at fault of `config`: each bit of each register of
/// each TPE, then each bit of each edge accumulator, stuck-at-0 and
/// stuck-at-1.
pub fn enumerate_faults(config: &ArrayConfig) -> Vec<FaultSite> {
    let mut out = Vec::new();
    let mut push = |class, row, col, element, width: u32| {
        for bit in 0..width {
            for stuck in [false, true] {
                out.push(FaultSite::new(class, row, col, element, bit, stuck));
            }
        }
    };
    for row in 0..config.rows {
        for col in 0..config.cols {
            for class in [
                RegClass::Activation,
                RegClass::Weight,
                RegClass::WeightIndex,
                RegClass::Output,
            ] {
                for e in 0..config.elements(class) {
                    push(class, row, col, e, config.register_width(class));
                }
            }
        }
    }
    for col in 0..config.cols {
        push(RegClass::EdgeAccumulator, 0, col, 0, config.acc_width);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignOptions {
    /// Random activation matrices per tile for the harmlessness check of
    /// undetected faults; 0 skips the check.
    pub harmless_trials: usize,
    /// Rows of each random activation matrix.
    pub harmless_rows: usize,
    pub seed: u64,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        CampaignOptions {
            harmless_trials: 10,
            harmless_rows: 8,
            seed: 0,
        }
    }
}

/// Whether the diagnosis of a detected fault named the injected register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassCheck {
    Correct,
    Wrong,
    /// No localization claim applies (e.g. an activation fault that also
    /// trips tests 1 to 3).
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultOutcome {
    pub fault: FaultSite,
    /// Index of the first tile whose session flagged the fault.
    pub first_detection: Option<usize>,
    pub classification: ClassCheck,
    /// For undetected faults: whether every tile multiplied identically
    /// with and without the fault. `None` if not checked.
    pub harmless: Option<bool>,
    /// Report of the detecting session.
    pub report: Option<TestReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub total: usize,
    pub detected: usize,
    pub undetected: usize,
    pub harmless_verified: usize,
    pub not_harmless: usize,
    pub classification_checked: usize,
    pub classification_correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: ArrayConfig,
    pub tiles: usize,
    pub total_faults: usize,
    pub detected: usize,
    pub coverage: f64,
    pub per_class: BTreeMap<RegClass, ClassStats>,
    /// Coverage after each tile's session.
    pub cumulative_curve: Vec<f64>,
    /// Tiles whose fault-free session reported a detection (expected 0).
    pub false_positive_tiles: usize,
    pub classification_checked: usize,
    pub classification_correct: usize,
    #[serde(skip)]
    pub outcomes: Vec<FaultOutcome>,
}

impl CoverageReport {
    /// `tile_index,coverage` rows, one per tile, 1-based tile index.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("tile_index,coverage\n");
        for (i, c) in self.cumulative_curve.iter().enumerate() {
            s.push_str(&format!("{},{:.6}\n", i + 1, c));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Checks the column verdicts of a detecting session against the
/// injected fault.
pub fn check_classification(fault: &FaultSite, report: &TestReport) -> ClassCheck {
    let only = |expect: Verdict| {
        let ok = report
            .verdicts
            .iter()
            .enumerate()
            .all(|(j, v)| if j == fault.col { *v == expect } else { *v == Verdict::Ok });
        if ok {
            ClassCheck::Correct
        } else {
            ClassCheck::Wrong
        }
    };
    let tests = report.failing_tests();
    match fault.class {
        RegClass::Weight => only(Verdict::WeightRegister),
        RegClass::Output => only(Verdict::OutputRegister),
        RegClass::EdgeAccumulator => only(Verdict::ComparisonAdder),
        RegClass::WeightIndex if tests == [false, false, true, false] => only(Verdict::WeightIndexRegister),
        RegClass::Activation if tests == [false, false, false, true] => {
            let ok = report.verdicts.iter().all(|v| match *v {
                Verdict::Ok => true,
                Verdict::ActivationWindow { start, end, .. } => (start..=end).contains(&fault.col),
                _ => false,
            });
            if ok {
                ClassCheck::Correct
            } else {
                ClassCheck::Wrong
            }
        }
        _ => ClassCheck::NotApplicable,
    }
}

struct Prepared<'a> {
    config: ArrayConfig,
    tiles: &'a [SparseWeightTile],
    goldens: Vec<GoldenReference>,
    /// Per tile: (random activations, fault-free products).
    probes: Vec<Vec<(Matrix, Matrix)>>,
}

impl<'a> Prepared<'a> {
    fn new(tiles: &'a [SparseWeightTile], config: &ArrayConfig, options: &CampaignOptions) -> Result<Self> {
        let goldens = tiles
            .iter()
            .map(|t| compute_golden(t, config))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let hi = (1i64 << (config.data_width - 1)) - 1;
        let mut clean = SystolicArray::new(*config)?;
        let mut probes = Vec::with_capacity(tiles.len());
        for tile in tiles {
            clean.load_weights(tile)?;
            let mut per_tile = Vec::with_capacity(options.harmless_trials);
            for _ in 0..options.harmless_trials {
                let a = Matrix::from_fn(options.harmless_rows, config.rows * config.m, |_, _| {
                    rng.gen_range(-hi - 1..=hi)
                });
                let (out, _) = clean.run_compute(&a)?;
                per_tile.push((a, out));
            }
            probes.push(per_tile);
        }
        Ok(Prepared {
            config: *config,
            tiles,
            goldens,
            probes,
        })
    }

    fn false_positive_tiles(&self) -> Result<usize> {
        let mut clean = SystolicArray::new(self.config)?;
        let mut count = 0;
        for (t, tile) in self.tiles.iter().enumerate() {
            clean.load_weights(tile)?;
            if run_session(&mut clean, &self.goldens[t], t)?.detected {
                count += 1;
            }
        }
        Ok(count)
    }

    fn run_fault(&self, fault: FaultSite, check_harmless: bool) -> Result<FaultOutcome> {
        let mut array = SystolicArray::new(self.config)?;
        array.inject(fault)?;
        for (t, tile) in self.tiles.iter().enumerate() {
            array.load_weights(tile)?;
            let report = run_session(&mut array, &self.goldens[t], t)?;
            if report.detected {
                return Ok(FaultOutcome {
                    fault,
                    first_detection: Some(t),
                    classification: check_classification(&fault, &report),
                    harmless: None,
                    report: Some(report),
                });
            }
        }
        let harmless = if check_harmless {
            Some(self.harmless(&mut array)?)
        } else {
            None
        };
        Ok(FaultOutcome {
            fault,
            first_detection: None,
            classification: ClassCheck::NotApplicable,
            harmless,
            report: None,
        })
    }

    fn harmless(&self, array: &mut SystolicArray) -> Result<bool> {
        for (tile, probes) in self.tiles.iter().zip(&self.probes) {
            array.load_weights(tile)?;
            for (a, expect) in probes {
                if array.run_compute(a)?.0 != *expect {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Runs `faults` (see [`enumerate_faults`]) against the workload `tiles`.
///
/// Faults are evaluated independently and in parallel; results are
/// aggregated in fault order so the report is deterministic.
pub fn run_campaign(
    tiles: &[SparseWeightTile],
    config: &ArrayConfig,
    faults: &[FaultSite],
    options: &CampaignOptions,
) -> Result<CoverageReport> {
    config.validate()?;
    if tiles.is_empty() {
        return Err(Error::Shape("a campaign needs at least one tile".into()));
    }
    for f in faults {
        f.validate(config)?;
    }
    let prepared = Prepared::new(tiles, config, options)?;
    let false_positive_tiles = prepared.false_positive_tiles()?;
    let check_harmless = options.harmless_trials > 0;
    let outcomes = faults
        .par_iter()
        .map(|&f| prepared.run_fault(f, check_harmless))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, tiles.len(), false_positive_tiles, outcomes))
}

fn aggregate(
    config: &ArrayConfig,
    tiles: usize,
    false_positive_tiles: usize,
    outcomes: Vec<FaultOutcome>,
) -> CoverageReport {
    let total = outcomes.len();
    let mut per_class: BTreeMap<RegClass, ClassStats> = BTreeMap::new();
    let mut first_hits = vec![0usize; tiles];
    for o in &outcomes {
        let s = per_class.entry(o.fault.class).or_default();
        s.total += 1;
        match o.first_detection {
            Some(t) => {
                s.detected += 1;
                first_hits[t] += 1;
                if o.classification != ClassCheck::NotApplicable {
                    s.classification_checked += 1;
                    if o.classification == ClassCheck::Correct {
                        s.classification_correct += 1;
                    }
                }
            }
            None => {
                s.undetected += 1;
                match o.harmless {
                    Some(true) => s.harmless_verified += 1,
                    Some(false) => s.not_harmless += 1,
                    None => {}
                }
            }
        }
    }
    let mut running = 0;
    let cumulative_curve = first_hits
        .iter()
        .map(|&h| {
            running += h;
            if total == 0 {
                0.0
            } else {
                running as f64 / total as f64
            }
        })
        .collect();
    let detected: usize = first_hits.iter().sum();
    CoverageReport {
        config: *config,
        tiles,
        total_faults: total,
        detected,
        coverage: if total == 0 { 0.0 } else { detected as f64 / total as f64 },
        classification_checked: per_class.values().map(|s| s.classification_checked).sum(),
        classification_correct: per_class.values().map(|s| s.classification_correct).sum(),
        per_class,
        cumulative_curve,
        false_positive_tiles,
        outcomes,
    }
}

/// Random weight tiles with varied value ranges and densities, for
/// campaigns without a real model.
pub fn synthetic_tiles(config: &ArrayConfig, count: usize, seed: u64) -> Vec<SparseWeightTile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = (1i64 << (config.data_width - 1)) - 1;
    (0..count)
        .map(|t| {
            let range = match t % 3 {
                0 => full,
                1 => full.min(255),
                _ => full.min(31),
            };
            let zero_prob = [0.0, 0.25, 0.5][rng.gen_range(0..3)];
            let dense = Matrix::from_fn(config.rows * config.m, config.cols, |_, _| {
                if rng.gen_bool(zero_prob) {
                    0
                } else {
                    rng.gen_range(-range - 1..=range)
                }
            });
            pack_tile(&dense, config.m, config.active_slots()).expect("tile dimensions follow the config")
        })
        .collect()
}
