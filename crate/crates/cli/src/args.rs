use std::path::PathBuf;

use cacqr::qr::{Algorithm, QrVariant};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cacqr", version, about = "CholeskyQR2 on a simulated c x d x c processor grid")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factor a generated or loaded matrix and report accuracy and costs.
    Run(RunArgs),
    /// Tabulate closed-form costs for every valid grid of P ranks.
    Costscan(CostscanArgs),
    /// Write a test matrix with a prescribed condition number.
    Gen(GenArgs),
    /// Compare a factorization against Householder QR.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgChoice {
    #[value(name = "cqr-1d")]
    Cqr1d,
    #[value(name = "cqr2-1d")]
    Cqr2_1d,
    #[value(name = "cqr-3d")]
    Cqr3d,
    #[value(name = "cqr2-3d")]
    Cqr2_3d,
    Cacqr,
    Cacqr2,
    /// CA-CQR2, which covers every grid shape.
    Auto,
}

impl AlgChoice {
    pub fn resolve(self) -> Algorithm {
        match self {
            AlgChoice::Cqr1d => Algorithm::Cqr1d,
            AlgChoice::Cqr2_1d => Algorithm::Cqr2_1d,
            AlgChoice::Cqr3d => Algorithm::Cqr3d,
            AlgChoice::Cqr2_3d => Algorithm::Cqr2_3d,
            AlgChoice::Cacqr => Algorithm::Cacqr,
            AlgChoice::Cacqr2 | AlgChoice::Auto => Algorithm::Cacqr2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum VariantChoice {
    #[default]
    InvertAll,
    InvertSplit,
}

impl From<VariantChoice> for QrVariant {
    fn from(v: VariantChoice) -> Self {
        match v {
            VariantChoice::InvertAll => QrVariant::InvertAll,
            VariantChoice::InvertSplit => QrVariant::InvertSplit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum TableFormat {
    #[default]
    Table,
    Csv,
    Json,
}

/// Grid selection shared by `run` and `validate`.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, requires = "d", conflicts_with = "auto_grid")]
    pub c: Option<usize>,
    #[arg(long, requires = "c", conflicts_with = "auto_grid")]
    pub d: Option<usize>,
    /// Pick (c, d) with the grid tuner; needs --P.
    #[arg(long, requires = "procs")]
    pub auto_grid: bool,
    /// Rank count for --auto-grid.
    #[arg(long = "P", visible_alias = "procs", id = "procs", requires = "auto_grid")]
    pub procs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value = "cacqr2")]
    pub algorithm: AlgChoice,
    /// Rows of the generated matrix (checked against --input if both given).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantChoice,
    /// Target 2-norm condition number of the generated matrix.
    #[arg(long, conflicts_with = "input")]
    pub cond: Option<f64>,
    #[arg(long, conflicts_with = "input")]
    pub seed: Option<u64>,
    /// Matrix file (GQR1, or CSV by extension).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CFR3D base-case size.
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub report: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CostscanArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long = "P", visible_alias = "procs")]
    pub procs: usize,
    #[arg(long, value_enum, default_value = "cacqr2")]
    pub alg: AlgChoice,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantChoice,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: TableFormat,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub cond: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "cacqr2")]
    pub algorithm: AlgChoice,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantChoice,
    #[arg(long)]
    pub n0: Option<usize>,
}
