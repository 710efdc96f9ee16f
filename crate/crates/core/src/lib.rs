//! Low-rank matrix completion from a handful of fully observed columns and
//! a few uniformly sampled entries in every other column.
//!
//! The pipeline is:
//!
//! 1. draw `d` columns from a distribution `p` and observe them completely
//!    ([`sampling`]);
//! 2. take the top left singular vectors of the rescaled sample as the
//!    column space ([`completion::column_space`]);
//! 3. recover every other column from `s` observed entries by least squares
//!    inside that space ([`completion::recover_column`]).
//!
//! [`incoherence`] computes the coherence measures that govern how large
//! `d` and `s` must be, [`synthetic`] builds test instances, [`baseline`]
//! holds a Nystrom/CUR comparison method and [`harness`] runs the
//! sample-complexity and comparison experiments.

pub mod baseline;
pub mod completion;
pub mod error;
pub mod harness;
pub mod incoherence;
mod linalg;
pub mod matrix;
pub mod observation;
pub mod rng;
pub mod sampling;
pub mod synthetic;

pub use completion::{
    best_rank_r, column_space, complete, recover_column, ColumnRecovery, ColumnSpaceBasis,
    CompletionConfig, CompletionReport,
};
pub use error::{Error, Result};
pub use matrix::{DenseMatrix, MatrixOracle};
pub use observation::{ObservationMode, ObservationSet, PartialColumn};
pub use sampling::{sample_full_columns, ColumnSamplingDistribution};
