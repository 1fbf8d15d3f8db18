//! N:M structured pruning and the packed block format.
//!
//! A dense weight matrix is cut column-wise into blocks of `m` consecutive
//! rows. Each block keeps at most `n` non-zero values, stored as `n`
//! (value, position) pairs. The positions drive the TPE input multiplexers
//! directly; the per-block bit masks are derived from them on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Up to `n` kept values of one `m`-element column block and their
/// positions inside the block.
///
/// Entries are ordered by position. Unused slots hold value 0 at position 0
/// and sort first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseBlock {
    pub values: Vec<i64>,
    pub indexes: Vec<usize>,
}

impl SparseBlock {
    /// Validates the packed-block invariants against block length `m`.
    pub fn new(values: Vec<i64>, indexes: Vec<usize>, m: usize) -> Result<Self> {
        let block = SparseBlock { values, indexes };
        block.check(m)?;
        Ok(block)
    }

    pub fn zero(n: usize) -> Self {
        SparseBlock {
            values: vec![0; n],
            indexes: vec![0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    fn check(&self, m: usize) -> Result<()> {
        if self.values.len() != self.indexes.len() {
            return Err(Error::Shape("block values/indexes length differ".into()));
        }
        if let Some(&bad) = self.indexes.iter().find(|&&i| i >= m) {
            return Err(Error::Shape(format!("block index {bad} outside 0..{m}")));
        }
        if self.indexes.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::Shape("block indexes must be non-decreasing".into()));
        }
        let mut seen = 0u64;
        for (&v, &i) in self.values.iter().zip(&self.indexes) {
            if v != 0 {
                if seen & (1 << i) != 0 {
                    return Err(Error::Shape(format!("duplicate block index {i}")));
                }
                seen |= 1 << i;
            }
        }
        Ok(())
    }

    /// Bit mask of occupied positions (bit p set iff position p is kept and
    /// non-zero).
    pub fn mask(&self) -> u64 {
        self.values
            .iter()
            .zip(&self.indexes)
            .filter(|(v, _)| **v != 0)
            .fold(0, |acc, (_, &i)| acc | (1 << i))
    }

    /// Expands back to `m` dense values.
    pub fn to_dense(&self, m: usize) -> Vec<i64> {
        let mut out = vec![0; m];
        for (&v, &i) in self.values.iter().zip(&self.indexes) {
            if v != 0 {
                out[i] = v;
            }
        }
        out
    }
}

/// Keeps the `n` largest-magnitude entries of `block`, ties going to the
/// lower position. Missing non-zeros are padded with (0, position 0).
pub fn prune_to_nm(block: &[i64], n: usize) -> SparseBlock {
    let mut order: Vec<usize> = (0..block.len()).filter(|&i| block[i] != 0).collect();
    // stable sort keeps lower positions first among equal magnitudes
    order.sort_by_key(|&i| std::cmp::Reverse(block[i].unsigned_abs()));
    order.truncate(n);
    order.sort_unstable();

    let pad = n - order.len();
    let mut values = vec![0; pad];
    let mut indexes = vec![0; pad];
    for i in order {
        values.push(block[i]);
        indexes.push(i);
    }
    SparseBlock { values, indexes }
}

/// An R×C grid of packed blocks covering an (R·m)×C dense weight tile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseWeightTile {
    rows: usize,
    cols: usize,
    m: usize,
    n: usize,
    blocks: Vec<SparseBlock>,
}

impl SparseWeightTile {
    /// Assembles a tile from row-major blocks, validating every block.
    pub fn from_blocks(
        rows: usize,
        cols: usize,
        m: usize,
        n: usize,
        blocks: Vec<SparseBlock>,
    ) -> Result<Self> {
        if blocks.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} blocks for a {rows}x{cols} grid",
                blocks.len()
            )));
        }
        if n > m {
            return Err(Error::Config(format!("n = {n} exceeds m = {m}")));
        }
        for b in &blocks {
            if b.n() != n {
                return Err(Error::Shape(format!("block holds {} slots, expected {n}", b.n())));
            }
            b.check(m)?;
        }
        Ok(SparseWeightTile {
            rows,
            cols,
            m,
            n,
            blocks,
        })
    }

    /// Grid rows (array rows R).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Grid columns (array columns C).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Shape of the dense matrix this tile represents.
    pub fn source_dims(&self) -> (usize, usize) {
        (self.rows * self.m, self.cols)
    }

    pub fn block(&self, row: usize, col: usize) -> &SparseBlock {
        &self.blocks[row * self.cols + col]
    }

    pub fn blocks(&self) -> &[SparseBlock] {
        &self.blocks
    }

    /// Fraction of non-zero weights in the represented dense matrix.
    pub fn nonzero_ratio(&self) -> f64 {
        let (r, c) = self.source_dims();
        if r * c == 0 {
            return 0.0;
        }
        let nz: u32 = self.blocks.iter().map(|b| b.mask().count_ones()).sum();
        nz as f64 / (r * c) as f64
    }
}

/// Packs a dense (R·m)×C matrix column-wise: block (i, j) covers dense rows
/// `i*m .. i*m + m` of column j.
pub fn pack_tile(dense: &Matrix, m: usize, n: usize) -> Result<SparseWeightTile> {
    if m == 0 || n > m {
        return Err(Error::Config(format!("invalid sparsity {n}:{m}")));
    }
    if dense.is_empty() {
        return Err(Error::Shape("cannot pack an empty matrix".into()));
    }
    if !dense.rows().is_multiple_of(m) {
        return Err(Error::Shape(format!(
            "{} rows is not a multiple of block size {m}",
            dense.rows()
        )));
    }
    let rows = dense.rows() / m;
    let cols = dense.cols();
    let mut blocks = Vec::with_capacity(rows * cols);
    let mut column = vec![0; m];
    for i in 0..rows {
        for j in 0..cols {
            for (p, slot) in column.iter_mut().enumerate() {
                *slot = dense.get(i * m + p, j);
            }
            blocks.push(prune_to_nm(&column, n));
        }
    }
    Ok(SparseWeightTile {
        rows,
        cols,
        m,
        n,
        blocks,
    })
}

/// Reconstructs the pruned dense matrix a tile represents.
pub fn densify(tile: &SparseWeightTile) -> Matrix {
    let (r, c) = tile.source_dims();
    let mut out = Matrix::zeros(r, c);
    for i in 0..tile.rows {
        for j in 0..tile.cols {
            for (p, v) in tile.block(i, j).to_dense(tile.m).into_iter().enumerate() {
                out.set(i * tile.m + p, j, v);
            }
        }
    }
    out
}

/// True iff every `m`-row block of every column holds at most `n` non-zeros.
/// A trailing partial block is checked as if zero-padded.
pub fn validate_nm(dense: &Matrix, m: usize, n: usize) -> bool {
    if m == 0 {
        return false;
    }
    (0..dense.cols()).all(|j| {
        (0..dense.rows()).step_by(m).all(|r0| {
            let end = (r0 + m).min(dense.rows());
            (r0..end).filter(|&r| dense.get(r, j) != 0).count() <= n
        })
    })
}

/// Prunes a whole dense matrix to N:M along its columns; rows are
/// zero-padded up to a multiple of `m` first.
pub fn prune_matrix(dense: &Matrix, m: usize, n: usize) -> Result<Matrix> {
    let rows = dense.rows().div_ceil(m.max(1)) * m;
    Ok(densify(&pack_tile(&dense.padded(rows, dense.cols()), m, n)?))
}
