//! Four-vector online self-test.
//!
//! After each weight load the array is driven with three unique test
//! vectors in four tests, reusing the stationary weights as the stimulus:
//!
//! | test | west vector      | north sum | fault-free edge result |
//! |------|------------------|-----------|------------------------|
//! | 1    | `[1, 1, ..., 1]` | 0         | 0                      |
//! | 2    | `[-1, ..., -1]`  | -1        | -1                     |
//! | 3    | `[1, 2, ..., m]` | 0         | 0                      |
//! | 4    | `[1, 2, ..., m]` | 0         | 0 (index mux masked)   |
//!
//! Each column's south output is added to a precomputed golden value in the
//! edge accumulator. A non-zero (or non-all-ones, for test 2) result flags a
//! fault. Comparing tests 1 and 2 before and after the golden addition for
//! bitwise complementarity tells weight, output and comparison-adder faults
//! apart. Test 3 exposes index faults. Test 4 forces column `j` to select
//! element `j mod m`, which makes an activation fault repeat every `m`
//! columns.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::arith::{self, Word};
use crate::array::{ArrayConfig, SystolicArray};
use crate::error::{Error, Result};
use crate::sparsity::SparseWeightTile;

/// Array cycles one session adds per tile (one initiation per test vector).
pub const SESSION_CYCLES: u64 = 4;

/// Edge-accumulator results of a fault-free array, tests 1 to 4.
pub const EXPECTED: [i64; 4] = [0, -1, 0, 0];

/// West vectors and north sums of the four tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestVectors {
    pub vectors: [Vec<i64>; 4],
    pub top_sums: [i64; 4],
}

impl TestVectors {
    pub fn new(m: usize) -> Self {
        let ramp: Vec<i64> = (1..=m as i64).collect();
        TestVectors {
            vectors: [vec![1; m], vec![-1; m], ramp.clone(), ramp],
            top_sums: [0, -1, 0, 0],
        }
    }
}

/// Per-column golden values for the four tests, computed from the software
/// copy of the tile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenReference {
    pub m: usize,
    pub acc_width: u32,
    pub gv: [Vec<i64>; 4],
}

impl GoldenReference {
    pub fn cols(&self) -> usize {
        self.gv[0].len()
    }

    pub fn word(&self, test: usize, col: usize) -> Word {
        Word::new(self.gv[test][col], self.acc_width)
    }
}

/// Golden references of `tile`:
///
/// - test 1: `-Σ w`
/// - test 2: `+Σ w`
/// - test 3: `-Σ (idx + 1)·w`
/// - test 4: `-((j mod m) + 1)·Σ w`
///
/// Sums run over every active weight slot in the column and wrap at the
/// accumulator width.
pub fn compute_golden(tile: &SparseWeightTile, config: &ArrayConfig) -> Result<GoldenReference> {
    if tile.rows() != config.rows
        || tile.cols() != config.cols
        || tile.m() != config.m
        || tile.n() != config.active_slots()
    {
        return Err(Error::Shape(format!(
            "{}x{} {}:{} tile does not fit a {}x{} {} array",
            tile.rows(),
            tile.cols(),
            tile.n(),
            tile.m(),
            config.rows,
            config.cols,
            config.sparsity_label()
        )));
    }
    let aw = config.acc_width;
    let mut gv: [Vec<i64>; 4] = Default::default();
    for j in 0..config.cols {
        let mut sum = 0i128;
        let mut weighted = 0i128;
        for i in 0..config.rows {
            let b = tile.block(i, j);
            for (&w, &p) in b.values.iter().zip(&b.indexes) {
                sum += w as i128;
                weighted += (p as i128 + 1) * w as i128;
            }
        }
        let lane = (j % config.m) as i128 + 1;
        gv[0].push(arith::wrap_to_width(-sum, aw));
        gv[1].push(arith::wrap_to_width(sum, aw));
        gv[2].push(arith::wrap_to_width(-weighted, aw));
        gv[3].push(arith::wrap_to_width(-lane * sum, aw));
    }
    Ok(GoldenReference {
        m: config.m,
        acc_width: aw,
        gv,
    })
}

/// Column-level diagnosis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Ok,
    WeightRegister,
    OutputRegister,
    ComparisonAdder,
    WeightIndexRegister,
    /// Activation fault somewhere in columns `start..=end` of some row.
    ActivationWindow { first_col: usize, start: usize, end: usize },
    /// A failure pattern no single-fault case explains.
    Unclassified,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub tile_id: usize,
    /// South outputs before the golden addition, tests 1 to 4.
    pub raw: [Vec<i64>; 4],
    /// Edge-accumulator outputs after the golden addition.
    pub compared: [Vec<i64>; 4],
    pub detected: bool,
    pub verdicts: Vec<Verdict>,
}

impl TestReport {
    /// Columns whose test `test` (0-based) result differs from fault-free.
    pub fn failing_columns(&self, test: usize) -> Vec<usize> {
        self.compared[test]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != EXPECTED[test])
            .map(|(j, _)| j)
            .collect()
    }

    /// Which of the four tests flagged at least one column.
    pub fn failing_tests(&self) -> [bool; 4] {
        std::array::from_fn(|t| self.compared[t].iter().any(|&v| v != EXPECTED[t]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs the four tests on the loaded array and classifies the outcome.
///
/// Each test holds its vector on every west port and its north sum on
/// every column until the pipeline settles; test 4 asserts the index
/// mask. The simulation clocks used here are not what the hardware spends:
/// the tests pipeline back to back, so the accounted cost is
/// [`SESSION_CYCLES`].
pub fn run_session(array: &mut SystolicArray, golden: &GoldenReference, tile_id: usize) -> Result<TestReport> {
    let config = *array.config();
    if !array.is_loaded() {
        return Err(Error::NotLoaded);
    }
    if golden.cols() != config.cols || golden.m != config.m || golden.acc_width != config.acc_width {
        return Err(Error::Shape("golden reference does not match the array".into()));
    }
    let vectors = TestVectors::new(config.m);
    let mut raw: [Vec<i64>; 4] = Default::default();
    let mut compared: [Vec<i64>; 4] = Default::default();
    for t in 0..4 {
        let south = array.settle_broadcast(&vectors.vectors[t], vectors.top_sums[t], t == 3);
        for (j, s) in south.into_iter().enumerate() {
            let c = array.edge_accumulate(j, s, golden.word(t, j))?;
            raw[t].push(s.value());
            compared[t].push(c.value());
        }
    }
    let verdicts = classify(&raw, &compared, golden);
    let detected = (0..4).any(|t| compared[t].iter().any(|&v| v != EXPECTED[t]));
    Ok(TestReport {
        tile_id,
        raw,
        compared,
        detected,
        verdicts,
    })
}

fn complementary(a: i64, b: i64, width: u32) -> bool {
    Word::new(a, width).is_bitwise_complement(Word::new(b, width))
}

/// Per-column verdicts from the raw and compared outputs.
///
/// A column failing test 1 or 2 is diagnosed from the complementarity of
/// its (test 1, test 2) pairs:
///
/// | raw pair      | compared pair | verdict          |
/// |---------------|---------------|------------------|
/// | complementary | complementary | weight register  |
/// | not           | not           | output register  |
/// | complementary | not           | comparison adder |
/// | not           | complementary | unclassified     |
///
/// Otherwise a test-3 failure names the index registers, and a test-4-only
/// failure is localized with [`locate_activation`] over all test-4 failing
/// columns.
pub fn classify(raw: &[Vec<i64>; 4], compared: &[Vec<i64>; 4], golden: &GoldenReference) -> Vec<Verdict> {
    let width = golden.acc_width;
    let cols = compared[0].len();
    let fails = |t: usize, j: usize| compared[t][j] != EXPECTED[t];
    let test4: Vec<usize> = (0..cols).filter(|&j| fails(3, j)).collect();
    let window = if test4.is_empty() {
        None
    } else {
        locate_activation(&test4, golden.m, cols)
    };
    (0..cols)
        .map(|j| {
            if fails(0, j) || fails(1, j) {
                let raw_pair = complementary(raw[0][j], raw[1][j], width);
                let cmp_pair = complementary(compared[0][j], compared[1][j], width);
                match (raw_pair, cmp_pair) {
                    (true, true) => Verdict::WeightRegister,
                    (false, false) => Verdict::OutputRegister,
                    (true, false) => Verdict::ComparisonAdder,
                    (false, true) => Verdict::Unclassified,
                }
            } else if fails(2, j) {
                Verdict::WeightIndexRegister
            } else if fails(3, j) {
                match window {
                    Some(w) => Verdict::ActivationWindow {
                        first_col: w.first_col,
                        start: w.start,
                        end: w.end,
                    },
                    None => Verdict::Unclassified,
                }
            } else {
                Verdict::Ok
            }
        })
        .collect()
}

/// Columns that may hold a faulty activation register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationWindow {
    /// Leftmost failing column.
    pub first_col: usize,
    pub start: usize,
    pub end: usize,
}

impl ActivationWindow {
    pub fn contains(&self, col: usize) -> bool {
        (self.start..=self.end).contains(&col)
    }
}

/// Localizes an activation fault from the test-4 failing columns.
///
/// The failures must lie on `first, first + m, first + 2m, ...`; the fault
/// then sits in one of the `m` columns ending at the first failure. Returns
/// `None` when the set is empty or not `m`-periodic.
pub fn locate_activation(failures: &[usize], m: usize, cols: usize) -> Option<ActivationWindow> {
    let set: BTreeSet<usize> = failures.iter().copied().collect();
    let &first = set.iter().next()?;
    if m == 0 || set.iter().any(|&c| (c - first) % m != 0) {
        return None;
    }
    Some(ActivationWindow {
        first_col: first,
        start: first.saturating_sub(m - 1),
        end: first.min(cols.saturating_sub(1)),
    })
}
