use std::path::Path;
use std::process::{Command, Output};

use cacqr::layout::io::read_matrix;
use cacqr::qr::{factor, valid_shapes, Algorithm, QrOptions};
use cacqr::{build_grid, CostTriple};
use cacqr_cli::{cmd_costscan, CostscanArgs, TableFormat, RUN_CSV_COLUMNS};
use serde_json::Value;

fn cacqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cacqr")).args(args).output().expect("spawn cacqr")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_report_schema_and_example() {
    let out = cacqr(&["run", "--algorithm", "cacqr2", "--m", "64", "--n", "16", "--c", "2", "--d", "8", "--cond", "1e3", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for k in [
        "algorithm", "m", "n", "c", "d", "n_o", "variant", "seed", "cond", "orthogonality_error", "residual", "ledger",
        "analytic", "match", "wall_time_ms",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert!(v["orthogonality_error"].as_f64().unwrap() <= 1e-13);
    assert_eq!(v["match"], Value::Bool(true));
    assert_eq!(v["ledger"], v["analytic"]);
}

#[test]
fn report_matches_library_and_is_deterministic() {
    let args = ["run", "--algorithm", "cacqr2", "--m", "48", "--n", "12", "--c", "2", "--d", "4", "--cond", "50", "--seed", "7", "--variant", "invert-split"];
    let (mut a, mut b) = (json(&cacqr(&args)), json(&cacqr(&args)));
    a.as_object_mut().unwrap().remove("wall_time_ms");
    b.as_object_mut().unwrap().remove("wall_time_ms");
    assert_eq!(a, b);

    let m = cacqr::linalg::gen_test_matrix::<f64>(48, 12, 50.0, 7).unwrap();
    let opts = QrOptions { variant: cacqr::qr::QrVariant::InvertSplit, n_o: None };
    let f = factor(Algorithm::Cacqr2, &m, build_grid(2, 4).unwrap(), opts).unwrap();
    assert_eq!(a["orthogonality_error"].as_f64().unwrap(), f.diagnostics.orthogonality);
    assert_eq!(a["residual"].as_f64().unwrap(), f.diagnostics.residual);
    let ledger: CostTriple = serde_json::from_value(a["ledger"].clone()).unwrap();
    assert_eq!(ledger, f.ledger.total().as_f64());
    assert_eq!(a["n_o"].as_u64().unwrap() as usize, f.n_o);
}

#[test]
fn single_rank_charges_no_communication() {
    let v = json(&cacqr(&["run", "--algorithm", "cacqr2", "--m", "64", "--n", "64", "--c", "1", "--d", "1"]));
    assert_eq!(v["ledger"]["alpha"].as_f64(), Some(0.0));
    assert_eq!(v["ledger"]["beta"].as_f64(), Some(0.0));
}

#[test]
fn auto_grid_uses_tuner() {
    let v = json(&cacqr(&["run", "--algorithm", "auto", "--m", "1024", "--n", "16", "--auto-grid", "--P", "64"]));
    assert_eq!((v["c"].as_u64(), v["d"].as_u64()), (Some(1), Some(64)));
    let v = json(&cacqr(&["run", "--algorithm", "cqr2-3d", "--m", "64", "--n", "16", "--auto-grid", "--procs", "8"]));
    assert_eq!((v["c"].as_u64(), v["d"].as_u64()), (Some(2), Some(2)));
}

#[test]
fn csv_report_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let st = cacqr(&["run", "--algorithm", "cqr2-1d", "--m", "32", "--n", "8", "--c", "1", "--d", "4", "--report", "csv", "--out", p(&out)]);
    assert_eq!(st.status.code(), Some(0));
    assert!(st.stdout.is_empty());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, RUN_CSV_COLUMNS);
    let rows: Vec<_> = rdr.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "cqr2-1d");
    assert_eq!(&rows[0][5], "4");
    assert_eq!(&rows[0][18], "true");
}

#[test]
fn exit_codes() {
    assert_eq!(cacqr(&["--help"]).status.code(), Some(0));
    assert_eq!(cacqr(&["run", "--bogus"]).status.code(), Some(1));
    // Neither an explicit nor a tuned grid.
    assert_eq!(cacqr(&["run", "--m", "64", "--n", "16"]).status.code(), Some(1));
    // d < c, c not dividing d, non-power-of-two P.
    assert_eq!(cacqr(&["run", "--m", "64", "--n", "16", "--c", "4", "--d", "2"]).status.code(), Some(1));
    assert_eq!(cacqr(&["run", "--m", "64", "--n", "16", "--c", "2", "--d", "3"]).status.code(), Some(1));
    assert_eq!(cacqr(&["costscan", "--m", "64", "--n", "16", "--P", "12"]).status.code(), Some(1));
    // 1D algorithm on a grid with c > 1.
    assert_eq!(cacqr(&["run", "--algorithm", "cqr2-1d", "--m", "64", "--n", "16", "--c", "2", "--d", "2"]).status.code(), Some(1));
    let bad = cacqr(&["run", "--m", "64", "--n", "16", "--c", "2", "--d", "8", "--cond", "1e9", "--seed", "0"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("breakdown"));
}

#[test]
fn missing_or_corrupt_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.gqr1");
    assert_eq!(cacqr(&["run", "--input", p(&f), "--c", "1", "--d", "1"]).status.code(), Some(1));
    std::fs::write(&f, b"GQR2 not a matrix").unwrap();
    assert_eq!(cacqr(&["validate", "--input", p(&f), "--c", "1", "--d", "1"]).status.code(), Some(1));
}

#[test]
fn gen_is_reproducible_and_hits_condition_number() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.gqr1"), dir.path().join("b.gqr1"));
    for f in [&a, &b] {
        assert!(cacqr(&["gen", "--m", "40", "--n", "10", "--cond", "1e4", "--seed", "3", "--out", p(f)]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let m = read_matrix(&a).unwrap();
    let na = nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)]);
    let sv = na.singular_values();
    let kappa = sv.max() / sv.min();
    assert!((kappa / 1e4 - 1.0).abs() < 0.01, "kappa {kappa}");

    let c = dir.path().join("a.csv");
    assert!(cacqr(&["gen", "--m", "40", "--n", "10", "--cond", "1e4", "--seed", "3", "--out", p(&c)]).status.success());
    assert_eq!(read_matrix(&c).unwrap(), m);
}

#[test]
fn run_from_file_matches_generated_run() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("a.gqr1");
    assert!(cacqr(&["gen", "--m", "64", "--n", "16", "--cond", "100", "--seed", "2", "--out", p(&f)]).status.success());
    let mut from_file = json(&cacqr(&["run", "--input", p(&f), "--c", "2", "--d", "8"]));
    let mut generated = json(&cacqr(&["run", "--m", "64", "--n", "16", "--cond", "100", "--seed", "2", "--c", "2", "--d", "8"]));
    for v in [&mut from_file, &mut generated] {
        let o = v.as_object_mut().unwrap();
        for k in ["wall_time_ms", "seed", "cond"] {
            o.remove(k);
        }
    }
    assert_eq!(from_file, generated);
    // --m/--n must agree with the file.
    assert_eq!(cacqr(&["run", "--input", p(&f), "--m", "32", "--c", "2", "--d", "8"]).status.code(), Some(1));
}

#[test]
fn validate_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let id = dir.path().join("id.csv");
    std::fs::write(&id, "1,0\n0,1\n0,0\n0,0\n").unwrap();
    let out = cacqr(&["validate", "--input", p(&id), "--algorithm", "cqr2-1d", "--c", "1", "--d", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for k in ["r_error", "q_error", "orthogonality_error", "residual"] {
        assert_eq!(v[k].as_f64(), Some(0.0), "{k}");
    }

    let f = dir.path().join("k3.gqr1");
    assert!(cacqr(&["gen", "--m", "128", "--n", "32", "--cond", "1e3", "--seed", "1", "--out", p(&f)]).status.success());
    let v = json(&cacqr(&["validate", "--input", p(&f), "--c", "2", "--d", "8", "--variant", "invert-split"]));
    assert_eq!(v["verdict"], "ok");
    assert!(v["r_error"].as_f64().unwrap() <= 1e-10);

    for (cond, verdict) in [("1e8", "degraded"), ("1e9", "breakdown")] {
        let f = dir.path().join(format!("k{cond}.gqr1"));
        assert!(cacqr(&["gen", "--m", "64", "--n", "16", "--cond", cond, "--seed", "0", "--out", p(&f)]).status.success());
        let out = cacqr(&["validate", "--input", p(&f), "--c", "2", "--d", "8"]);
        assert_eq!(out.status.code(), Some(2), "cond {cond}");
        assert_eq!(json(&out)["verdict"], verdict);
    }
}

#[test]
fn validate_warns_on_rank_deficiency() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("rd.csv");
    std::fs::write(&f, "1,1\n1,1\n1,1\n1,1\n").unwrap();
    let out = cacqr(&["validate", "--input", p(&f), "--algorithm", "cqr2-1d", "--c", "1", "--d", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank deficient"));
}

fn scan(m: usize, n: usize, procs: usize) -> Vec<cacqr_cli::CostRow> {
    cmd_costscan(&CostscanArgs {
        m,
        n,
        procs,
        alg: cacqr_cli::AlgChoice::Cacqr2,
        variant: Default::default(),
        n0: None,
        format: TableFormat::Table,
    })
    .unwrap()
}

#[test]
fn costscan_rows_and_flags() {
    for procs in [1, 8, 32, 64, 512] {
        assert_eq!(scan(64, 64, procs).len(), valid_shapes(procs).len());
    }
    // Tall and skinny: 1D wins on words.
    let rows = scan(4096, 16, 64);
    let best: Vec<_> = rows.iter().filter(|r| r.min_beta).collect();
    assert_eq!((best.len(), best[0].c), (1, 1));

    // Square on 8 ranks: the tuner's bracket lands on the cube, the
    // exact word minimum is the 1D grid.
    let rows = scan(64, 64, 8);
    let tuned: Vec<_> = rows.iter().filter(|r| r.tuned).map(|r| (r.c, r.d)).collect();
    let best: Vec<_> = rows.iter().filter(|r| r.min_beta).map(|r| (r.c, r.d)).collect();
    assert_eq!(tuned, [(2, 2)]);
    assert_eq!(best, [(1, 8)]);
    let out = cacqr(&["costscan", "--m", "64", "--n", "64", "--P", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("min-beta") && text.contains("tuned"));
}

#[test]
fn costscan_formats_agree() {
    let j = json(&cacqr(&["costscan", "--m", "256", "--n", "32", "--P", "64", "--format", "json"]));
    let out = cacqr(&["costscan", "--m", "256", "--n", "32", "--P", "64", "--format", "csv"]);
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let recs: Vec<_> = rdr.records().collect::<Result<_, _>>().unwrap();
    let arr = j.as_array().unwrap();
    assert_eq!(recs.len(), arr.len());
    for (rec, row) in recs.iter().zip(arr) {
        assert_eq!(rec[1].parse::<u64>().unwrap(), row["d"].as_u64().unwrap());
        assert_eq!(&rec[6], row["beta_exact"].as_str().unwrap());
    }
}
