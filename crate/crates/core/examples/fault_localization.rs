//! Inject one stuck-at fault of each register class and print the
//! per-column diagnosis.

use sta_selftest::{compute_golden, run_session, ArrayConfig, FaultSite, Matrix, SystolicArray};

fn main() -> sta_selftest::Result<()> {
    let config = ArrayConfig::new(4, 8, 4, 2);
    // position 3 of every block is zero, so the pruned indexes never select it
    let dense = Matrix::from_fn(16, 8, |r, c| if r % 4 == 3 { 0 } else { (r * 3 + c) as i64 % 17 + 1 });
    let tile = sta_selftest::pack_tile(&dense, 4, 2)?;
    let golden = compute_golden(&tile, &config)?;

    let faults = [
        "weight:1:2:0:9:1",
        "output:3:5:0:4:1",
        "edge:0:6:0:0:0",
        "index:2:1:0:1:1",
        "activation:2:2:3:0:1",
    ];
    for spec in faults {
        let fault: FaultSite = spec.parse()?;
        let mut array = SystolicArray::new(config)?;
        array.inject(fault)?;
        array.load_weights(&tile)?;
        let report = run_session(&mut array, &golden, 0)?;
        println!("{fault}: failing tests {:?}", report.failing_tests());
        for (col, v) in report.verdicts.iter().enumerate() {
            if *v != sta_selftest::Verdict::Ok {
                println!("  column {col}: {v:?}");
            }
        }
    }
    Ok(())
}
