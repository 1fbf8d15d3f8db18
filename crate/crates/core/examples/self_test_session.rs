//! One self-test session on a loaded tile: golden values, raw and compared
//! outputs of the four tests.

use sta_selftest::{compute_golden, pack_tile, run_session, ArrayConfig, Matrix, SystolicArray};

fn main() -> sta_selftest::Result<()> {
    let config = ArrayConfig::new(2, 3, 4, 2);
    let dense = Matrix::from_fn(8, 3, |r, c| (r as i64 - 3) * (c as i64 + 1) + 1);
    let tile = pack_tile(&dense, 4, 2)?;

    let mut array = SystolicArray::new(config)?;
    let load = array.load_weights(&tile)?;
    println!("loaded in {load} cycles");

    let golden = compute_golden(&tile, &config)?;
    let report = run_session(&mut array, &golden, 0)?;
    for t in 0..4 {
        println!(
            "test {}: golden {:?} raw {:?} compared {:?}",
            t + 1,
            golden.gv[t],
            report.raw[t],
            report.compared[t]
        );
    }
    println!("detected: {}", report.detected);
    println!("{}", report.to_json()?);
    Ok(())
}
