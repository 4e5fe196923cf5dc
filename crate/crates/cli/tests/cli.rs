use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fractal-energy")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// CSV rows of an output file with the `#` header dropped.
fn body(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn validate_reports_and_rejects() {
    let o = run(&["validate", "--fractal", "gasket"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("chain constant n = 2"));
    assert_eq!(run(&["validate", "--fractal", "interval"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "boundary_size = 3\nmaps = [[\"P2\", \"a\", \"b\"], [\"a\", \"P2\", \"c\"], [\"b\", \"c\", \"P3\"]]\n").unwrap();
    let o = run(&["validate", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fixed point"));

    assert_eq!(run(&["validate", "--fractal", "carpet"]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn gasket_extension_keeps_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["extend", "--fractal", "gasket", "--u", "1,0,0", "--depth", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("E(u) = 2"));
    let levels = body(&out.join("trace_levels.csv"));
    assert_eq!(levels.len(), 5);
    for row in &levels {
        let e: f64 = row[2].parse().unwrap();
        assert!((e - 2.0).abs() <= 1e-12);
    }
    for name in ["trace_cells.csv", "values.csv", "summary.txt", "run.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let cells = fs::read_to_string(out.join("trace_cells.csv")).unwrap();
    assert!(cells.starts_with("# fractal-energy extend\n"));
    assert!(cells.contains("# depth = 4"));
}

#[test]
fn interval_extension_is_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["extend", "--fractal", "interval", "--u", "0,1", "--depth", "6", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let mut values: Vec<f64> = body(&dir.path().join("values.csv")).iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(values.len(), 65);
    values.sort_by(f64::total_cmp);
    for (i, v) in values.iter().enumerate() {
        assert!((v - i as f64 / 64.0).abs() <= 1e-9);
    }
}

#[test]
fn sigma_above_one_is_rejected_without_override() {
    let o = run(&["extend", "--fractal", "gasket", "--sigma", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hypothesis"));
    let o = run(&["extend", "--fractal", "gasket", "--sigma", "1.5", "--depth", "2", "--unsafe-sigma"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(run(&["extend", "--sigma=-1"]).status.code(), Some(3));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "extend".to_string(),
            "--fractal".into(),
            "gasket".into(),
            "--energy".into(),
            "p_edge p=4".into(),
            "--u".into(),
            "0.2,-1,0.7".into(),
            "--depth".into(),
            "3".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out.into(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let args = args(out.to_str().unwrap());
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run(&refs).status.code(), Some(0));
    }
    for name in ["trace_levels.csv", "trace_cells.csv", "values.csv", "summary.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 7);
    assert!(meta["started_unix"].is_u64());
}

#[test]
fn theta_tables() {
    let o = run(&["theta", "--fractal", "interval", "--sigma", "2", "--u", "0,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l.starts_with("1,2,")));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["theta", "--fractal", "gasket", "--scales", "1,1e-2,1e-4", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let rows = body(&dir.path().join("theta.csv"));
    assert_eq!(rows.len(), 3);
    for r in rows {
        let theta: f64 = r[1].parse().unwrap();
        assert!((theta - (5.0f64 / 3.0).sqrt()).abs() <= 1e-12);
    }
}

#[test]
fn eigen_axioms_and_diagnostics() {
    let o = run(&["eigen", "--fractal", "gasket"]);
    assert_eq!(o.status.code(), Some(0));
    let rho: f64 = stdout(&o).lines().next().unwrap().trim_start_matches("rho = ").parse().unwrap();
    assert!((rho - 0.6).abs() <= 1e-12);
    assert_eq!(run(&["eigen", "--energy", "p_edge p=4"]).status.code(), Some(1));

    let o = run(&["axioms", "--energy", "p_edge p=4", "--budget", "100"]);
    assert_eq!(o.status.code(), Some(0));
    for check in ["Q1", "Q2", "Q3", "Q4"] {
        assert!(stdout(&o).lines().any(|l| l.starts_with(check) && l.contains(",true,")), "{check}");
    }
    assert_eq!(run(&["axioms", "--energy", "dirichlet coeffs=1,1,-0.2"]).status.code(), Some(1));
    assert_eq!(run(&["axioms", "--energy", "cubic"]).status.code(), Some(1));

    let o = run(&["diagnose", "--fractal", "interval", "--u", "0,1", "--depth", "5", "--budget", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let rate: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("rate "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((rate - 0.5).abs() <= 1e-9);
}

#[test]
fn config_files_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "fractal = \"interval\"\nsigma = 2.0\nu = [0.0, 1.0]\n\n[energy]\nfamily = \"dirichlet\"\n").unwrap();
    let path = cfg.to_str().unwrap();
    let o = run(&["theta", "--config", path]);
    assert!(stdout(&o).lines().any(|l| l.starts_with("1,2,")));
    let o = run(&["theta", "--config", path, "--sigma", "0.5"]);
    assert!(stdout(&o).lines().any(|l| l.starts_with("1,1,")));

    fs::write(&cfg, "fractal = \"interval\"\nsigma = 2.0\ncolour = 3\n").unwrap();
    assert_eq!(run(&["theta", "--config", path]).status.code(), Some(1));
}
