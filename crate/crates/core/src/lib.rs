//! CholeskyQR2 on a simulated `c x d x c` processor grid.
//!
//! Every rank of the virtual grid owns a local block; collectives move real
//! data between those blocks and charge butterfly-model costs to a
//! [`CostLedger`] in exact rational arithmetic. The numerical core is
//! generic over [`Scalar`] (`f32`, `f64`); the aliases below fix `f64`.
//!
//! Rank ids are linear in `x + c * (y + d * z)`.

// `!(x <= tol)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collectives;
pub mod cost;
pub mod error;
pub mod grid;
pub mod layout;
pub mod linalg;
pub mod qr;
mod scalar;

pub use cost::{CostLedger, CostTriple, CostVector};
pub use error::{Error, Result};
pub use grid::{build_grid, subcomm, CommKind, Communicator, GridShape, RankCoord};
pub use layout::{gather, scatter_cyclic, DistMatrix, SliceShape};
pub use scalar::Scalar;

/// Exact cost quantities.
pub type Rational = num_rational::Ratio<i64>;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type Matrix32 = linalg::DenseMatrix<f32>;
pub type DistMatrixF64 = layout::DistMatrix<f64>;
pub type DistMatrixF32 = layout::DistMatrix<f32>;
