//! Library half of the `cacqr` binary. Every number in a report comes from
//! the `cacqr` crate; this layer only parses flags, moves files and formats
//! output.

// `!(x <= tol)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use cacqr::layout::io::{read_matrix, write_matrix};
use cacqr::linalg::{gen_test_matrix, householder_qr, sign_normalize, DenseMatrix};
use cacqr::qr::{analytic_cost, factor, tune_grid, valid_shapes, Algorithm, QrOptions, QrVariant};
use cacqr::{CostTriple, CostVector, GridShape};
use serde::Serialize;

pub mod args;

pub use args::{
    AlgChoice, Cli, Command, CostscanArgs, GenArgs, GridArgs, ReportFormat, RunArgs, TableFormat, ValidateArgs,
    VariantChoice,
};

/// `validate` calls a factorization degraded above these.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-13;
pub const R_ERROR_TOL: f64 = 1e-10;
/// A first CholeskyQR pass this far from orthogonal means `cond(A)^2 eps` is
/// no longer small, so the second pass is outside its repair regime even if
/// its output looks fine.
pub const FIRST_PASS_TOL: f64 = 2e-2;

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, grids or dimensions. Exit 1.
    Usage(String),
    /// Nonpositive Cholesky pivot or singular factor. Exit 2.
    Breakdown(String),
    /// I/O, file format and anything else. Exit 1.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Breakdown(_) => 2,
            CliError::Usage(_) | CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Breakdown(s) | CliError::Other(s) => f.write_str(s),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cacqr::Error> for CliError {
    fn from(e: cacqr::Error) -> Self {
        use cacqr::Error as E;
        let msg = e.to_string();
        match e {
            E::Breakdown { .. } | E::Singular(_) => CliError::Breakdown(msg),
            E::GridShape(_) | E::Dimension(_) | E::InvalidArgument(_) => CliError::Usage(msg),
            _ => CliError::Other(msg),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Output of `run`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub algorithm: String,
    pub m: usize,
    pub n: usize,
    pub c: usize,
    pub d: usize,
    pub n_o: usize,
    pub variant: String,
    pub seed: Option<u64>,
    pub cond: Option<f64>,
    pub orthogonality_error: f64,
    pub residual: f64,
    pub ledger: CostTriple,
    pub analytic: CostTriple,
    /// Measured α and β equal the closed form, compared as exact rationals.
    #[serde(rename = "match")]
    pub matches: bool,
    pub wall_time_ms: f64,
}

/// Column order of the CSV report.
pub const RUN_CSV_COLUMNS: [&str; 20] = [
    "algorithm",
    "m",
    "n",
    "c",
    "d",
    "p",
    "n_o",
    "variant",
    "seed",
    "cond",
    "orthogonality_error",
    "residual",
    "ledger_alpha",
    "ledger_beta",
    "ledger_gamma",
    "analytic_alpha",
    "analytic_beta",
    "analytic_gamma",
    "match",
    "wall_time_ms",
];

impl RunReport {
    fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            self.algorithm.clone(),
            self.m.to_string(),
            self.n.to_string(),
            self.c.to_string(),
            self.d.to_string(),
            (self.c * self.c * self.d).to_string(),
            self.n_o.to_string(),
            self.variant.clone(),
            opt(self.seed.map(|s| s.to_string())),
            opt(self.cond.map(|s| s.to_string())),
            self.orthogonality_error.to_string(),
            self.residual.to_string(),
            self.ledger.alpha.to_string(),
            self.ledger.beta.to_string(),
            self.ledger.gamma.to_string(),
            self.analytic.alpha.to_string(),
            self.analytic.beta.to_string(),
            self.analytic.gamma.to_string(),
            self.matches.to_string(),
            self.wall_time_ms.to_string(),
        ]
    }

    /// Header line plus one record.
    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RUN_CSV_COLUMNS)?;
        w.write_record(self.csv_record())?;
        let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One row of `costscan`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub c: usize,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Exact rationals, as `num/den` when not integral.
    pub alpha_exact: String,
    pub beta_exact: String,
    pub gamma_exact: String,
    /// Fewest words among the rows.
    pub min_beta: bool,
    /// The shape `tune_grid` picks (CA algorithms only).
    pub tuned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Ok,
    Degraded,
    Breakdown,
}

impl Verdict {
    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Ok => 0,
            Verdict::Degraded | Verdict::Breakdown => 2,
        }
    }
}

/// Output of `validate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub algorithm: String,
    pub m: usize,
    pub n: usize,
    pub c: usize,
    pub d: usize,
    pub variant: String,
    pub n_o: Option<usize>,
    /// `||R - R_oracle||_F / ||R_oracle||_F` after sign normalization.
    pub r_error: Option<f64>,
    pub q_error: Option<f64>,
    pub orthogonality_error: Option<f64>,
    pub residual: Option<f64>,
    pub first_pass_orthogonality: Option<f64>,
    pub rank_deficient: bool,
    pub verdict: Verdict,
    pub message: Option<String>,
}

/// Chooses the grid from `--c/--d` or `--auto-grid --P`. With the tuner,
/// 1D algorithms take `(1, P)` and 3D ones the cube.
pub fn resolve_grid(g: &GridArgs, alg: Algorithm, m: usize, n: usize) -> CliResult<GridShape> {
    if let (Some(c), Some(d)) = (g.c, g.d) {
        let grid = GridShape::new(c, d)?;
        grid.require_power_of_two()?;
        return Ok(grid);
    }
    if !g.auto_grid {
        return Err(CliError::Usage("give --c and --d, or --auto-grid with --P".into()));
    }
    let p = g.procs.ok_or_else(|| CliError::Usage("--auto-grid needs --P".into()))?;
    if p == 0 || !p.is_power_of_two() {
        return Err(CliError::Usage(format!("P = {p} must be a power of two")));
    }
    let grid = match alg {
        Algorithm::Cqr1d | Algorithm::Cqr2_1d => GridShape::linear(p)?,
        Algorithm::Cqr3d | Algorithm::Cqr2_3d => valid_shapes(p)
            .into_iter()
            .find(GridShape::is_cubic)
            .ok_or_else(|| CliError::Usage(format!("P = {p} is not a cube")))?,
        _ => tune_grid(m, n, p)?,
    };
    Ok(grid)
}

fn exact(r: cacqr::Rational) -> String {
    r.to_string()
}

fn options(variant: VariantChoice, n0: Option<usize>) -> QrOptions {
    QrOptions {
        variant: variant.into(),
        n_o: n0,
    }
}

fn ab_equal(x: CostVector, y: CostVector) -> bool {
    x.alpha == y.alpha && x.beta == y.beta
}

/// Executes `run`.
pub fn cmd_run(args: &RunArgs) -> CliResult<RunReport> {
    let alg = args.algorithm.resolve();
    let (a, seed, cond) = match &args.input {
        Some(path) => {
            let a = read_matrix(path)?;
            if args.m.is_some_and(|m| m != a.rows()) || args.n.is_some_and(|n| n != a.cols()) {
                return Err(CliError::Usage(format!(
                    "--m/--n disagree with the {}x{} matrix in {}",
                    a.rows(),
                    a.cols(),
                    path.display()
                )));
            }
            (a, None, None)
        }
        None => {
            let (Some(m), Some(n)) = (args.m, args.n) else {
                return Err(CliError::Usage("--m and --n are required without --input".into()));
            };
            let cond = args.cond.unwrap_or(1.0);
            let seed = args.seed.unwrap_or(0);
            (gen_test_matrix::<f64>(m, n, cond, seed)?, Some(seed), Some(cond))
        }
    };
    let (m, n) = a.shape();
    let grid = resolve_grid(&args.grid, alg, m, n)?;
    let opts = options(args.variant, args.n0);

    let start = Instant::now();
    let f = factor(alg, &a, grid, opts)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let analytic = analytic_cost(alg, m, n, grid.c(), grid.d(), args.n0, opts.variant)?;
    let measured = f.ledger.total();
    Ok(RunReport {
        algorithm: alg.name().to_string(),
        m,
        n,
        c: grid.c(),
        d: grid.d(),
        n_o: f.n_o,
        variant: opts.variant.to_string(),
        seed,
        cond,
        orthogonality_error: f.diagnostics.orthogonality,
        residual: f.diagnostics.residual,
        ledger: measured.as_f64(),
        analytic: analytic.as_f64(),
        matches: ab_equal(measured, analytic),
        wall_time_ms,
    })
}

/// Executes `costscan`: one row per valid grid shape the algorithm accepts.
pub fn cmd_costscan(args: &CostscanArgs) -> CliResult<Vec<CostRow>> {
    let p = args.procs;
    if p == 0 || !p.is_power_of_two() {
        return Err(CliError::Usage(format!("P = {p} must be a power of two")));
    }
    let alg = args.alg.resolve();
    let variant: QrVariant = args.variant.into();
    let shapes: Vec<GridShape> = valid_shapes(p)
        .into_iter()
        .filter(|g| match alg {
            Algorithm::Cqr1d | Algorithm::Cqr2_1d => g.c() == 1,
            Algorithm::Cqr3d | Algorithm::Cqr2_3d => g.is_cubic(),
            _ => true,
        })
        .collect();
    if shapes.is_empty() {
        return Err(CliError::Usage(format!("no grid of {p} ranks suits {alg}")));
    }
    let tuned = match alg {
        Algorithm::Cacqr | Algorithm::Cacqr2 => Some(tune_grid(args.m, args.n, p)?),
        _ => None,
    };
    let costs = shapes
        .iter()
        .map(|g| analytic_cost(alg, args.m, args.n, g.c(), g.d(), args.n0, variant))
        .collect::<cacqr::Result<Vec<_>>>()?;
    let best = costs.iter().map(|v| v.beta).min().expect("nonempty");
    Ok(shapes
        .iter()
        .zip(&costs)
        .map(|(g, v)| {
            let t = v.as_f64();
            CostRow {
                c: g.c(),
                d: g.d(),
                alpha: t.alpha,
                beta: t.beta,
                gamma: t.gamma,
                alpha_exact: exact(v.alpha),
                beta_exact: exact(v.beta),
                gamma_exact: exact(v.gamma),
                min_beta: v.beta == best,
                tuned: tuned == Some(*g),
            }
        })
        .collect())
}

/// Renders costscan rows.
pub fn render_costscan(rows: &[CostRow], format: TableFormat) -> CliResult<String> {
    match format {
        TableFormat::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Table => {
            let mut s = format!(
                "{:>4} {:>6} {:>14} {:>16} {:>20}  flags\n",
                "c", "d", "alpha", "beta", "gamma"
            );
            for r in rows {
                let mut flags = Vec::new();
                if r.min_beta {
                    flags.push("min-beta");
                }
                if r.tuned {
                    flags.push("tuned");
                }
                s += &format!(
                    "{:>4} {:>6} {:>14} {:>16} {:>20}  {}\n",
                    r.c,
                    r.d,
                    r.alpha_exact,
                    r.beta_exact,
                    r.gamma_exact,
                    flags.join(",")
                );
            }
            Ok(s)
        }
    }
}

/// Executes `gen`.
pub fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let a = gen_test_matrix::<f64>(args.m, args.n, args.cond, args.seed)?;
    write_matrix(&args.out, &a)?;
    Ok(())
}

fn rel_diff(x: &DenseMatrix<f64>, y: &DenseMatrix<f64>) -> f64 {
    let num = x.sub(y).expect("same shape").frobenius_norm();
    let den = y.frobenius_norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Executes `validate`. A breakdown is reported, not raised.
pub fn cmd_validate(args: &ValidateArgs) -> CliResult<ValidateReport> {
    let a = read_matrix(&args.input)?;
    let (m, n) = a.shape();
    if m < n || n == 0 {
        return Err(CliError::Usage(format!("need m >= n >= 1, got {m}x{n}")));
    }
    let alg = args.algorithm.resolve();
    let grid = resolve_grid(&args.grid, alg, m, n)?;
    let opts = options(args.variant, args.n0);

    let (mut qo, mut ro) = householder_qr(&a)?;
    sign_normalize(&mut qo, &mut ro);
    let diag: Vec<f64> = (0..n).map(|i| ro[(i, i)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let rank_deficient = dmin <= n as f64 * f64::EPSILON * dmax;

    let mut report = ValidateReport {
        algorithm: alg.name().to_string(),
        m,
        n,
        c: grid.c(),
        d: grid.d(),
        variant: opts.variant.to_string(),
        n_o: None,
        r_error: None,
        q_error: None,
        orthogonality_error: None,
        residual: None,
        first_pass_orthogonality: None,
        rank_deficient,
        verdict: Verdict::Ok,
        message: None,
    };
    let f = match factor(alg, &a, grid, opts) {
        Ok(f) => f,
        Err(e @ (cacqr::Error::Breakdown { .. } | cacqr::Error::Singular(_))) => {
            report.verdict = Verdict::Breakdown;
            report.message = Some(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let (mut q, mut r) = (f.q, f.r);
    sign_normalize(&mut q, &mut r);
    let r_error = rel_diff(&r, &ro);
    let d = f.diagnostics;
    report.n_o = Some(f.n_o);
    report.r_error = Some(r_error);
    report.q_error = Some(rel_diff(&q, &qo));
    report.orthogonality_error = Some(d.orthogonality);
    report.residual = Some(d.residual);
    report.first_pass_orthogonality = d.first_pass_orthogonality;

    let mut problems = Vec::new();
    if !(d.orthogonality <= ORTHOGONALITY_TOL) {
        problems.push(format!("orthogonality error {:e} > {ORTHOGONALITY_TOL:e}", d.orthogonality));
    }
    if !(d.residual <= RESIDUAL_TOL) {
        problems.push(format!("residual {:e} > {RESIDUAL_TOL:e}", d.residual));
    }
    if let Some(fp) = d.first_pass_orthogonality {
        if !(fp <= FIRST_PASS_TOL) {
            problems.push(format!("first-pass orthogonality error {fp:e} > {FIRST_PASS_TOL:e}"));
        }
    }
    if !rank_deficient && !(r_error <= R_ERROR_TOL) {
        problems.push(format!("R error {r_error:e} > {R_ERROR_TOL:e}"));
    }
    if !problems.is_empty() {
        report.verdict = Verdict::Degraded;
        report.message = Some(problems.join("; "));
    }
    Ok(report)
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => File::create(path)?.write_all(text.as_bytes())?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs one parsed command, writing its report to `stdout` (warnings go to
/// `stderr`). Returns the exit status on success.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<u8> {
    match &cli.command {
        Command::Run(args) => {
            let report = cmd_run(args)?;
            let text = match args.report {
                ReportFormat::Json => report.to_json()? + "\n",
                ReportFormat::Csv => report.to_csv()?,
            };
            emit(&text, args.out.as_deref(), stdout)?;
            Ok(0)
        }
        Command::Costscan(args) => {
            let rows = cmd_costscan(args)?;
            emit(&render_costscan(&rows, args.format)?, None, stdout)?;
            Ok(0)
        }
        Command::Gen(args) => {
            cmd_gen(args)?;
            Ok(0)
        }
        Command::Validate(args) => {
            let report = cmd_validate(args)?;
            if report.rank_deficient {
                writeln!(stderr, "warning: the oracle R has a tiny diagonal entry; A is numerically rank deficient")?;
            }
            if let Some(msg) = &report.message {
                writeln!(stderr, "{}: {msg}", serde_json::to_value(report.verdict)?.as_str().unwrap_or(""))?;
            }
            emit(&(serde_json::to_string_pretty(&report)? + "\n"), None, stdout)?;
            Ok(report.verdict.exit_code())
        }
    }
}
