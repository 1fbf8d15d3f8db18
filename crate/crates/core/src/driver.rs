//! Tiled matrix multiplication on one array instance.
//!
//! A layer `A (X×K) · W (K×C_total)` is cut into weight tiles of
//! `(R·m) × C` elements. For every tile the driver loads the weights, runs
//! a self-test session when testing is enabled, then streams all X rows of
//! the matching activation slice. Partial products of the K-direction tiles
//! are accumulated on the host at the accumulator width.
//!
//! Cycle accounting per tile is `R` (load) + `4` (session, if enabled) +
//! `X + R + C − 1` (stream and drain).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::array::{self, ArrayConfig, FaultSite, SystolicArray};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::selftest::{self, TestReport, SESSION_CYCLES};
use crate::sparsity::{pack_tile, SparseWeightTile};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub a: Matrix,
    pub w: Matrix,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub layers: Vec<Layer>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStats {
    pub load_cycles: u64,
    pub compute_cycles: u64,
    pub test_cycles: u64,
    pub total_cycles: u64,
    pub tiles_executed: u64,
}

impl CycleStats {
    fn add_tile(&mut self, load: u64, test: u64, compute: u64) {
        self.load_cycles += load;
        self.test_cycles += test;
        self.compute_cycles += compute;
        self.total_cycles += load + test + compute;
        self.tiles_executed += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatmulOutcome {
    /// One X × C_total result per layer, wrapped at the accumulator width.
    pub results: Vec<Matrix>,
    pub stats: CycleStats,
    pub reports: Vec<TestReport>,
}

/// Tile grid of one layer: `k_tiles` along the reduction dimension times
/// `col_tiles` along the output columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileGrid {
    pub k_tiles: usize,
    pub col_tiles: usize,
}

impl TileGrid {
    pub fn of(depth: usize, cols: usize, config: &ArrayConfig) -> Self {
        TileGrid {
            k_tiles: depth.div_ceil(config.rows * config.m),
            col_tiles: cols.div_ceil(config.cols),
        }
    }

    pub fn len(&self) -> usize {
        self.k_tiles * self.col_tiles
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Packs `w` into weight tiles in execution order (column tile major,
/// reduction tile minor), zero-padding the edges.
pub fn weight_tiles(w: &Matrix, config: &ArrayConfig) -> Result<Vec<SparseWeightTile>> {
    config.validate()?;
    if w.is_empty() {
        return Err(Error::Shape("empty weight matrix".into()));
    }
    let depth = config.rows * config.m;
    let grid = TileGrid::of(w.rows(), w.cols(), config);
    let mut tiles = Vec::with_capacity(grid.len());
    for ct in 0..grid.col_tiles {
        for kt in 0..grid.k_tiles {
            let window = w.window(kt * depth, ct * config.cols, depth, config.cols);
            tiles.push(pack_tile(&window, config.m, config.active_slots())?);
        }
    }
    Ok(tiles)
}

/// Runs every layer of `workload` through a single array carrying
/// `faults`, with or without a self-test session after each weight load.
pub fn tiled_matmul(
    workload: &Workload,
    config: &ArrayConfig,
    testing: bool,
    faults: &[FaultSite],
) -> Result<MatmulOutcome> {
    config.validate()?;
    let mut array = SystolicArray::new(*config)?;
    for &f in faults {
        array.inject(f)?;
    }
    let depth = config.rows * config.m;
    let mut stats = CycleStats::default();
    let mut reports = Vec::new();
    let mut results = Vec::with_capacity(workload.layers.len());

    for (li, layer) in workload.layers.iter().enumerate() {
        let (a, w) = (&layer.a, &layer.w);
        if a.is_empty() || w.is_empty() {
            return Err(Error::Shape(format!("layer {li} has an empty operand")));
        }
        if a.cols() != w.rows() {
            return Err(Error::Shape(format!(
                "layer {li}: A is {}x{} but W is {}x{}",
                a.rows(),
                a.cols(),
                w.rows(),
                w.cols()
            )));
        }
        let grid = TileGrid::of(w.rows(), w.cols(), config);
        let tiles = weight_tiles(w, config)?;
        let mut acc = Matrix::zeros(a.rows(), w.cols());
        for (t, tile) in tiles.iter().enumerate() {
            let (ct, kt) = (t / grid.k_tiles, t % grid.k_tiles);
            let load = array.load_weights(tile)?;
            let mut test = 0;
            if testing {
                let golden = selftest::compute_golden(tile, config)?;
                reports.push(selftest::run_session(&mut array, &golden, reports.len())?);
                test = SESSION_CYCLES;
            }
            let slice = a.window(0, kt * depth, a.rows(), depth);
            let (partial, compute) = array.run_compute(&slice)?;
            for x in 0..a.rows() {
                for j in 0..config.cols {
                    let col = ct * config.cols + j;
                    if col < w.cols() {
                        let sum = acc.get(x, col) as i128 + partial.get(x, j) as i128;
                        acc.set(x, col, arith::wrap_to_width(sum, config.acc_width));
                    }
                }
            }
            stats.add_tile(load, test, compute);
        }
        results.push(acc);
    }
    Ok(MatmulOutcome {
        results,
        stats,
        reports,
    })
}

/// Relative runtime added by testing: `(total_on − total_off) / total_off`.
pub fn overhead_report(stats_on: &CycleStats, stats_off: &CycleStats) -> f64 {
    if stats_off.total_cycles == 0 {
        return 0.0;
    }
    (stats_on.total_cycles as f64 - stats_off.total_cycles as f64) / stats_off.total_cycles as f64
}

/// Closed-form cycles of one tile without testing.
pub fn tile_baseline_cycles(config: &ArrayConfig, streamed_rows: usize) -> u64 {
    array::load_cycles(config) + array::compute_cycles(config, streamed_rows)
}

/// Dimensions of one synthetic layer: `rows` activations of length `depth`
/// against `cols` output channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub rows: usize,
    pub depth: usize,
    pub cols: usize,
}

impl LayerShape {
    pub fn new(rows: usize, depth: usize, cols: usize) -> Self {
        LayerShape { rows, depth, cols }
    }
}

/// Layer shapes loosely following a downscaled CNN: many output pixels,
/// moderate reduction depth and channel counts.
pub fn cnn_like_shapes(count: usize, seed: u64) -> Vec<LayerShape> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            LayerShape::new(
                rng.gen_range(200..=800),
                [32, 64, 96, 128][rng.gen_range(0..4)],
                [8, 16, 24, 32][rng.gen_range(0..4)],
            )
        })
        .collect()
}

/// Random dense layers of the given shapes with values spanning the full
/// `data_width` range.
pub fn synthetic_workload(shapes: &[LayerShape], data_width: u32, seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = (1i64 << (data_width - 1)) - 1;
    let lo = -hi - 1;
    let layers = shapes
        .iter()
        .map(|s| Layer {
            a: Matrix::from_fn(s.rows, s.depth, |_, _| rng.gen_range(lo..=hi)),
            w: Matrix::from_fn(s.depth, s.cols, |_, _| rng.gen_range(lo..=hi)),
        })
        .collect();
    Workload { layers }
}
