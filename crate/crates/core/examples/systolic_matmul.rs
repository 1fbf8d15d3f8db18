//! Tiled A x W on a 4x4 array, with and without the per-tile self-test.

use sta_selftest::driver::{synthetic_workload, LayerShape};
use sta_selftest::{overhead_report, tiled_matmul, ArrayConfig};

fn main() -> sta_selftest::Result<()> {
    let config = ArrayConfig::new(4, 4, 4, 2);
    let workload = synthetic_workload(&[LayerShape::new(12, 24, 10)], config.data_width, 3);

    let on = tiled_matmul(&workload, &config, true, &[])?;
    let off = tiled_matmul(&workload, &config, false, &[])?;
    assert_eq!(on.results, off.results);

    let c = &on.results[0];
    println!("C is {}x{}; first row {:?}", c.rows(), c.cols(), c.row(0));
    for (label, s) in [("testing on ", &on.stats), ("testing off", &off.stats)] {
        println!(
            "{label}: {} tiles, load {} + compute {} + test {} = {} cycles",
            s.tiles_executed, s.load_cycles, s.compute_cycles, s.test_cycles, s.total_cycles
        );
    }
    println!("overhead {:.2}%", overhead_report(&on.stats, &off.stats) * 100.0);
    println!("sessions flagged: {}", on.reports.iter().filter(|r| r.detected).count());
    Ok(())
}
