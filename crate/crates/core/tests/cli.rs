use std::path::Path;
use std::process::Command;

use wishart_lab::cli::{main_with_args, parse_config_text, THREADS_ENV};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wishart-lab"))
}

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["wishart-lab".to_string()];
    for a in args {
        full.push(a.replace("{dir}", dir.to_str().unwrap()));
    }
    main_with_args(full)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn density_curves_integrate_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(
        dir.path(),
        &[
            "density",
            "--out",
            "{dir}/d.csv",
            "a=1",
            "taus=0.4,1,2",
            "points=50",
        ],
    );
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&dir.path().join("d.csv"));
    assert_eq!(header, ["tau", "lambda", "rho"]);
    assert_eq!(rows.len(), 150);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("d.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    for tau in ["0.4", "1", "2"] {
        let defect = manifest["summary"][format!("normalization_defect_tau={tau}")]
            .as_f64()
            .unwrap();
        assert!(defect <= 1e-6);
    }
    assert!(manifest["wall_time"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn edges_cross_zero_at_critical_time() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(
        dir.path(),
        &[
            "edges",
            "--out",
            "{dir}/e.json",
            "--format",
            "json",
            "taus=linspace(0.1,2,20)",
        ],
    );
    assert_eq!(code, 0);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.json")).unwrap()).unwrap();
    assert_eq!(doc["columns"][1], "lower");
    assert!(doc["manifest"].get("wall_time").is_none());
    let crossing = doc["manifest"]["summary"]["crossing_tau"].as_f64().unwrap();
    assert!((crossing - 1.0).abs() <= 1e-6);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    for row in rows {
        let (tau, lower) = (row[0].as_f64().unwrap(), row[1].as_f64().unwrap());
        assert_eq!(lower > 0.0, tau < 1.0, "tau={tau} lower={lower}");
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# edges for a = 2\na = 2\ntaus = linspace(1,7,13)\n").unwrap();
    let code = run_in(
        dir.path(),
        &[
            "edges",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "{dir}/e.csv",
        ],
    );
    assert_eq!(code, 0);
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("e.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert!((m["summary"]["crossing_tau"].as_f64().unwrap() - 4.0).abs() <= 1e-6);
    assert_eq!(m["config_echo"]["a"], "2");
    assert_eq!(
        parse_config_text(&std::fs::read_to_string(&cfg).unwrap()).unwrap()["a"],
        "2"
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(
            dir.path(),
            &["density", "--out", "{dir}/x.csv", "nonsense=1"]
        ),
        2
    );
    assert_eq!(
        run_in(dir.path(), &["density", "--out", "{dir}/x.csv", "taus=a,b"]),
        2
    );
    assert_eq!(
        run_in(dir.path(), &["density", "--out", "{dir}/missing/x.csv"]),
        2
    );
    assert_eq!(run_in(dir.path(), &["no-such-command"]), 2);
    assert_eq!(
        run_in(dir.path(), &["edges", "--out", "{dir}/x.csv", "n=5", "m=3"]),
        2
    );
    assert_eq!(
        run_in(dir.path(), &["edges", "--config", "{dir}/absent.cfg"]),
        2
    );
}

#[test]
fn contract_violation_exits_with_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["pde-check", "--out", "p.csv", "pde_tol=1e-30"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pde_tol"), "{err}");
    assert!(dir.path().join("p.csv").exists());
    assert!(dir.path().join("p.csv.manifest.json").exists());
}

#[test]
fn same_seed_gives_identical_files_whatever_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a.json", "1"), ("b.json", "1"), ("c.json", "3")] {
        let st = bin()
            .current_dir(dir.path())
            .env(THREADS_ENV, threads)
            .args([
                "mc-density",
                "--seed",
                "17",
                "--format",
                "json",
                "--out",
                name,
                "n=20",
                "m=25",
                "trials=40",
                "l1_tol=1",
            ])
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(std::fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let st = bin()
        .current_dir(dir.path())
        .args([
            "mc-density",
            "--seed",
            "18",
            "--format",
            "json",
            "--out",
            "d.json",
            "n=20",
            "m=25",
            "trials=40",
            "l1_tol=1",
        ])
        .status()
        .unwrap();
    assert!(st.success());
    assert_ne!(
        outputs[0],
        std::fs::read(dir.path().join("d.json")).unwrap()
    );
}

#[test]
fn remaining_commands_emit_their_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], &[&str]); 5] = [
        (
            "acp-compare",
            &["trials=2000"],
            &[
                "z_re",
                "z_im",
                "q_mc_re",
                "q_mc_im",
                "stderr_re",
                "stderr_im",
                "q_integral_re",
                "q_integral_im",
            ],
        ),
        ("pde-check", &[], &["max_residual"]),
        (
            "bessoid-map",
            &["s_re=-1,1", "s_im=0.5,1", "ts=0,1"],
            &["re_s", "im_s", "t", "abs_b", "arg_b"],
        ),
        (
            "scaling-fit",
            &["ns=10,20,40", "trials=30", "exponent_tol=10"],
            &["n", "mean_smallest", "stderr"],
        ),
        (
            "characteristics",
            &["taus=0,1"],
            &["start_re", "start_im", "tau", "lambda", "eta"],
        ),
    ];
    for (cmd, extra, cols) in cases {
        let out = format!("{{dir}}/{cmd}.csv");
        let mut args = vec![cmd, "--out", out.as_str()];
        args.extend_from_slice(extra);
        assert_eq!(run_in(dir.path(), &args), 0, "{cmd}");
        let (header, rows) = read_csv(&dir.path().join(format!("{cmd}.csv")));
        assert_eq!(header, cols, "{cmd}");
        assert!(!rows.is_empty());
        assert!(dir.path().join(format!("{cmd}.csv.manifest.json")).exists());
    }
    let (_, rows) = read_csv(&dir.path().join("characteristics.csv"));
    // At τ = 0 every characteristic starts at z₀ + a².
    for r in rows.iter().filter(|r| r[2] == 0.0) {
        assert!((r[3] - (r[0] + 1.0)).abs() < 1e-12 && (r[4] - r[1]).abs() < 1e-12);
    }
}
