//! Cycle overhead of the per-tile self-test against streamed rows per tile
//! and on a CNN-like layer mix.

use sta_selftest::driver::{cnn_like_shapes, synthetic_workload, tile_baseline_cycles, LayerShape};
use sta_selftest::{overhead_report, tiled_matmul, ArrayConfig};

fn main() -> sta_selftest::Result<()> {
    let config = ArrayConfig::default();
    println!("rows/tile  baseline  overhead");
    for rows in [32, 64, 128, 256, 512, 1024] {
        let wl = synthetic_workload(&[LayerShape::new(rows, 32, 8)], config.data_width, 0);
        let on = tiled_matmul(&wl, &config, true, &[])?;
        let off = tiled_matmul(&wl, &config, false, &[])?;
        println!(
            "{rows:>9}  {:>8}  {:>7.3}%",
            tile_baseline_cycles(&config, rows),
            overhead_report(&on.stats, &off.stats) * 100.0
        );
    }

    let shapes = cnn_like_shapes(4, 42);
    let wl = synthetic_workload(&shapes, config.data_width, 42);
    let on = tiled_matmul(&wl, &config, true, &[])?;
    let off = tiled_matmul(&wl, &config, false, &[])?;
    println!(
        "cnn-like mix {:?}: {} tiles, overhead {:.3}%",
        shapes.iter().map(|s| (s.rows, s.depth, s.cols)).collect::<Vec<_>>(),
        on.stats.tiles_executed,
        overhead_report(&on.stats, &off.stats) * 100.0
    );
    Ok(())
}
