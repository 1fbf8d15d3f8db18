//! Cycle-level simulator of an N:M structured-sparse, weight-stationary
//! systolic tensor array, together with a four-vector periodic online
//! self-test, register-level stuck-at fault injection, column-level fault
//! localization and fault-campaign tooling.
//!
//! The crate is organised bottom-up:
//!
//! - [`arith`]: fixed-width two's-complement words, the only numeric carrier.
//! - [`sparsity`]: N:M pruning and the packed (value, index) block format.
//! - [`array`]: the R×C grid of tensor PEs, stepped one clock at a time,
//!   with stuck-at forcing on every register read.
//! - [`selftest`]: test vectors, golden references, session execution and
//!   fault localization.
//! - [`driver`]: tiled matrix multiplication with per-tile test sessions and
//!   cycle accounting.
//! - [`campaign`]: exhaustive single-fault injection and coverage reporting.
//! - [`cli`]: the command-line front end used by the `sta-selftest` binary.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod arith;
pub mod array;
pub mod campaign;
pub mod cli;
pub mod driver;
pub mod error;
pub mod io;
pub mod matrix;
pub mod selftest;
pub mod sparsity;

pub use arith::Word;
pub use array::{ArrayConfig, FaultSite, RegClass, SouthOutputs, SparsityMode, SystolicArray, TpeState};
pub use campaign::{enumerate_faults, run_campaign, CampaignOptions, CoverageReport};
pub use driver::{overhead_report, tiled_matmul, CycleStats, Layer, MatmulOutcome, Workload};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use selftest::{classify, compute_golden, locate_activation, run_session, GoldenReference, TestReport, Verdict};
pub use sparsity::{densify, pack_tile, prune_to_nm, validate_nm, SparseBlock, SparseWeightTile};
