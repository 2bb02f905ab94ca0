//! The distributed CholeskyQR family, the grid tuner and closed-form costs.

mod analytic;
mod cfr3d;
mod dist;
mod driver;
mod mm3d;
mod seq;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::CostLedger;
use crate::error::Error;
use crate::layout::DistMatrix;

pub use analytic::{analytic_cost, cfr3d_cost, mm3d_cost, tune_grid, valid_shapes};
pub use cfr3d::cfr3d;
pub use dist::{cacqr, cacqr2, cqr2_1d, cqr2_3d, cqr_1d, cqr_3d};
pub use driver::{default_n_o, factor, pad_for_grid, resolve_n_o, Factorization, PaddedShape};
pub use mm3d::{mm3d, mm3d_structured};
pub use seq::{cqr, cqr2};

/// How the triangular inverse feeds `Q = A R^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QrVariant {
    /// Invert at every recursive level; `Q` is one product with `R^{-1}`.
    #[default]
    InvertAll,
    /// Skip the off-diagonal inverse block at the top level; `Q` is built
    /// column-half by column-half from the two diagonal inverses.
    InvertSplit,
}

impl fmt::Display for QrVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QrVariant::InvertAll => "invert-all",
            QrVariant::InvertSplit => "invert-split",
        })
    }
}

impl FromStr for QrVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "invert-all" => Ok(QrVariant::InvertAll),
            "invert-split" => Ok(QrVariant::InvertSplit),
            _ => Err(Error::InvalidArgument(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Cqr1d,
    Cqr2_1d,
    Cqr3d,
    Cqr2_3d,
    Cacqr,
    Cacqr2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Cqr1d,
        Algorithm::Cqr2_1d,
        Algorithm::Cqr3d,
        Algorithm::Cqr2_3d,
        Algorithm::Cacqr,
        Algorithm::Cacqr2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cqr1d => "cqr-1d",
            Algorithm::Cqr2_1d => "cqr2-1d",
            Algorithm::Cqr3d => "cqr-3d",
            Algorithm::Cqr2_3d => "cqr2-3d",
            Algorithm::Cacqr => "cacqr",
            Algorithm::Cacqr2 => "cacqr2",
        }
    }

    /// Whether the algorithm runs two passes.
    pub fn is_two_pass(self) -> bool {
        matches!(self, Algorithm::Cqr2_1d | Algorithm::Cqr2_3d | Algorithm::Cacqr2)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QrOptions {
    pub variant: QrVariant,
    /// CFR3D base-case size; `None` picks [`default_n_o`].
    pub n_o: Option<usize>,
}

/// Accuracy measures of a factorization, computed on gathered matrices.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// `||Q^T Q - I||_F`.
    pub orthogonality: f64,
    /// `||A - QR||_F / ||A||_F`.
    pub residual: f64,
    /// Orthogonality of the first pass `Q`, for two-pass algorithms.
    pub first_pass_orthogonality: Option<f64>,
}

/// Output of a distributed factorization. `Q` is distributed like `A`; `R`
/// lives on the `c x c` subcube slice (replicated on every rank when `c = 1`).
#[derive(Debug, Clone)]
pub struct QrResult<T> {
    pub q: DistMatrix<T>,
    pub r: DistMatrix<T>,
    pub ledger: CostLedger,
    pub diagnostics: Diagnostics,
}
