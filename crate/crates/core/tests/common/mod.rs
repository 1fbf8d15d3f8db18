//! Independent oracles shared by the integration suites. Nothing here calls
//! into the simulator's pruning or datapath code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sta_selftest::{ArrayConfig, Matrix, SparseWeightTile};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reduce modulo 2^width, read back signed.
pub fn wrap(v: i128, width: u32) -> i64 {
    let m = 1i128 << width;
    let r = v.rem_euclid(m);
    (if r >= m / 2 { r - m } else { r }) as i64
}

/// Positions kept by brute-force N:M selection of one block: the n-subset
/// of non-zero positions with the largest descending magnitude profile,
/// lowest positions on ties.
pub fn keep_positions(block: &[i64], n: usize) -> Vec<usize> {
    let nz: Vec<usize> = (0..block.len()).filter(|&i| block[i] != 0).collect();
    if nz.len() <= n {
        return nz;
    }
    let mut best: Option<(Vec<u64>, Vec<usize>)> = None;
    for mask in 0u64..(1 << nz.len()) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let set: Vec<usize> = (0..nz.len()).filter(|b| mask >> b & 1 == 1).map(|b| nz[b]).collect();
        let mut prof: Vec<u64> = set.iter().map(|&i| block[i].unsigned_abs()).collect();
        prof.sort_unstable_by(|a, b| b.cmp(a));
        let better = match &best {
            None => true,
            Some((bp, bs)) => prof > *bp || (prof == *bp && set < *bs),
        };
        if better {
            best = Some((prof, set));
        }
    }
    best.unwrap().1
}

/// Column-wise N:M pruning of a dense matrix, rows zero-padded to a
/// multiple of m.
pub fn prune(w: &Matrix, m: usize, n: usize) -> Matrix {
    let rows = w.rows().div_ceil(m) * m;
    let mut out = Matrix::zeros(rows, w.cols());
    for c in 0..w.cols() {
        for r0 in (0..rows).step_by(m) {
            let block: Vec<i64> = (0..m)
                .map(|p| if r0 + p < w.rows() { w.get(r0 + p, c) } else { 0 })
                .collect();
            for p in keep_positions(&block, n) {
                out.set(r0 + p, c, block[p]);
            }
        }
    }
    out
}

/// A × W at the accumulator width; W may have extra zero rows.
pub fn matmul(a: &Matrix, w: &Matrix, acc_width: u32) -> Matrix {
    Matrix::from_fn(a.rows(), w.cols(), |r, c| {
        let s: i128 = (0..a.cols()).map(|k| a.get(r, k) as i128 * w.get(k, c) as i128).sum();
        wrap(s, acc_width)
    })
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, width: u32) -> Matrix {
    let hi = (1i64 << (width - 1)) - 1;
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-hi - 1..=hi))
}

/// Random tile pruned from dense values that are never zero, so every
/// weight slot holds a non-zero weight.
pub fn random_tile(rng: &mut ChaCha8Rng, config: &ArrayConfig) -> SparseWeightTile {
    let hi = (1i64 << (config.data_width - 1)) - 1;
    let dense = Matrix::from_fn(config.rows * config.m, config.cols, |_, _| loop {
        let v = rng.gen_range(-hi - 1..=hi);
        if v != 0 {
            break v;
        }
    });
    sta_selftest::pack_tile(&dense, config.m, config.active_slots()).unwrap()
}
