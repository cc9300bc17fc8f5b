use std::path::PathBuf;
use std::process::{Command, Output};

use gaussify::gaussian::tmss_cov;
use gaussify_cli::commands::wigner_grids;
use gaussify_cli::ProtocolConfig;
use serde_json::Value;

fn gaussify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_sets(cmd: &str, sets: &[&str], extra: &[&str]) -> Output {
    let mut args = vec![cmd];
    for s in sets {
        args.push("--set");
        args.push(s);
    }
    args.extend_from_slice(extra);
    gaussify(&args)
}

fn json(cmd: &str, sets: &[&str]) -> Value {
    let out = with_sets(cmd, sets, &["--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn rows(v: &Value) -> &Vec<Value> {
    v["rows"].as_array().unwrap()
}

fn f(row: &Value, col: &str) -> f64 {
    row[col]
        .as_f64()
        .unwrap_or_else(|| panic!("column {col} missing or null in {row}"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gaussify-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn headers_match_golden_files() {
    let cases: [(&str, &[&str], &str); 4] = [
        ("run", &["cutoff=2", "steps=0"], include_str!("golden/run.header")),
        (
            "sweep",
            &["cutoff=2", "steps=0", "sweep.axis=epsilon", "sweep.count=1"],
            include_str!("golden/sweep.header"),
        ),
        (
            "wigner",
            &["cutoff=2", "wigner.steps=0", "wigner.points=3"],
            include_str!("golden/wigner.header"),
        ),
        ("predict", &["cutoff=2"], include_str!("golden/predict.header")),
    ];
    for (cmd, sets, golden) in cases {
        let out = with_sets(cmd, sets, &[]);
        assert!(out.status.success(), "{cmd}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().next().unwrap(), golden.trim_end(), "{cmd}");
    }
}

#[test]
fn example1_run_approaches_its_predicted_limit() {
    let v = json(
        "run",
        &["state=example1", "epsilon=0.5", "eta=1", "steps=8", "cutoff=12"],
    );
    let r = rows(&v);
    assert_eq!(r.len(), 9);
    let last = r.last().unwrap();
    let limit = f(last, "limit_E_N[bits]");
    assert!((limit - 3f64.log2()).abs() < 1e-6);
    assert!((f(last, "E_N[bits]") - limit).abs() <= 0.02);
    for row in r {
        assert!((f(row, "limit_E_N[bits]") - limit).abs() < 1e-9);
    }
}

#[test]
fn tmss_rows_are_constant() {
    let v = json("run", &["state=tmss", "lambda=0.4", "steps=3"]);
    let r = rows(&v);
    for col in ["E_N[bits]", "S_vN[bits]", "E_S[nats]", "E_TS[nats]", "limit_E_N[bits]"] {
        let first = f(&r[0], col);
        for row in r {
            assert!((f(row, col) - first).abs() <= 1e-6, "{col}");
        }
    }
}

#[test]
fn zero_steps_gives_one_row() {
    let v = json("run", &["steps=0", "cutoff=4"]);
    assert_eq!(rows(&v).len(), 1);
    assert_eq!(rows(&v)[0]["step"], 0);
}

#[test]
fn csv_output_is_deterministic() {
    let sets = ["state=example3", "epsilon=0.6", "steps=3", "cutoff=8"];
    let (a, b) = (with_sets("run", &sets, &[]), with_sets("run", &sets, &[]));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_and_overrides_combine() {
    let cfg_path = tmp("proto.cfg");
    let mut cfg = ProtocolConfig::default();
    cfg.set_pair("steps=1").unwrap();
    cfg.set_pair("cutoff=4").unwrap();
    cfg.set_pair("epsilon=0.3").unwrap();
    std::fs::write(&cfg_path, cfg.to_text()).unwrap();
    let out_path = tmp("run.json");
    let out = gaussify(&[
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--set",
        "epsilon=0.4",
        "--out",
        out_path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["config"]["epsilon"], 0.4);
    assert_eq!(v["config"]["cutoff"], 4);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rows(&v).len(), 2);
}

#[test]
fn example1_limit_curve_matches_closed_form() {
    let v = json(
        "sweep",
        &[
            "state=example1",
            "sweep.axis=epsilon",
            "sweep.min=0.05",
            "sweep.max=0.95",
            "sweep.count=19",
            "steps=1",
            "cutoff=6",
        ],
    );
    let r = rows(&v);
    assert_eq!(r.len(), 38);
    let mut last_eps = f64::NEG_INFINITY;
    for row in r {
        let eps = f(row, "epsilon");
        assert!(eps >= last_eps);
        last_eps = eps;
        let expect = ((1.0 + eps) / (1.0 - eps)).log2();
        assert!((f(row, "limit_E_N[bits]") - expect).abs() <= 1e-6, "eps {eps}");
    }
}

#[test]
fn any_detector_efficiency_gains_entanglement() {
    let v = json(
        "sweep",
        &[
            "state=example1",
            "epsilon=0.7",
            "sweep.axis=eta",
            "sweep.min=0.1",
            "sweep.max=1",
            "sweep.count=10",
            "steps=2",
            "cutoff=10",
        ],
    );
    for row in rows(&v) {
        if row["step"] == 1 {
            assert!(f(row, "E_N[bits]") >= f(row, "E_N_initial[bits]"), "{row}");
        }
    }
}

#[test]
fn empty_sweep_range_is_a_config_error() {
    let out_path = tmp("empty.csv");
    let out = with_sets(
        "sweep",
        &["sweep.axis=epsilon", "sweep.min=0.9", "sweep.max=0.1"],
        &["--out", out_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
}

#[test]
fn exit_codes() {
    assert_eq!(with_sets("run", &["colour=red"], &[]).status.code(), Some(2));
    assert_eq!(with_sets("run", &["epsilon=1.5"], &[]).status.code(), Some(2));
    // Step 1 succeeds with probability 0.81 for eps = 0.5.
    let abort = with_sets("run", &["p_min=0.9", "cutoff=4"], &[]);
    assert_eq!(abort.status.code(), Some(3));
    assert!(abort.stdout.is_empty());
}

#[test]
fn vacuum_wigner_peak() {
    let out = with_sets("wigner", &["state=vacuum", "cutoff=4", "wigner.steps=0"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let origin = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|v| v[1] == 0.0 && v[2] == 0.0)
        .expect("grid contains the origin");
    assert!((origin[3] - std::f64::consts::FRAC_1_PI).abs() <= 1e-6);
}

#[test]
fn example1_reduced_wigner_is_positive_but_not_gaussian() {
    let mut cfg = ProtocolConfig::default();
    for pair in ["state=example1", "epsilon=0.6", "cutoff=6", "wigner.steps=0,1,2"] {
        cfg.set_pair(pair).unwrap();
    }
    let grids = wigner_grids(&cfg).unwrap();
    assert_eq!(grids.iter().map(|g| g.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    let (_, g0) = &grids[0];
    assert!(!g0.has_negative_region());
    assert!(g0.kurtosis_flag());
}

#[test]
fn coarse_wigner_grid_warns() {
    let out = with_sets("wigner", &["cutoff=2", "wigner.steps=0", "wigner.points=3"], &[]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("normalization"), "{err}");
}

#[test]
fn example3_predicts_a_pure_tmss_limit() {
    let v = json("predict", &["state=example3", "epsilon=0.8", "cutoff=4"]);
    let row = &rows(&v)[0];
    assert_eq!(row["verdict"], "pure-convergent");
    let g = tmss_cov(0.4f64.atanh()).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((f(row, &format!("gamma_{i}{j}")) - g.get(i, j)).abs() <= 1e-10);
        }
    }
}

#[test]
fn vacuum_predicts_the_vacuum() {
    let v = json("predict", &["state=vacuum", "cutoff=3"]);
    let row = &rows(&v)[0];
    assert_eq!(row["convergent"], true);
    assert_eq!(f(row, "limit_E_N[bits]"), 0.0);
    for i in 0..4 {
        for j in 0..4 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((f(row, &format!("gamma_{i}{j}")) - expect).abs() <= 1e-12);
        }
    }
}

#[test]
fn example2_limit_is_diagnosed_unphysical() {
    // The once-iterated seeds of this family admit no Gaussian covariance.
    for eps in ["0.05", "0.5", "2"] {
        let out = with_sets(
            "predict",
            &["state=example2", &format!("epsilon={eps}"), "cutoff=3"],
            &["--format", "json"],
        );
        assert_eq!(out.status.code(), Some(4));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(rows(&v)[0]["verdict"], "unphysical");
        assert_eq!(rows(&v)[0]["pure_norm"], 1.0);
    }
}

#[test]
fn singular_b_is_a_verdict_not_an_error() {
    let out = with_sets(
        "predict",
        &["state=example2", "epsilon=0", "cutoff=3"],
        &["--format", "json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows(&v)[0]["verdict"], "non-convergent");
}
