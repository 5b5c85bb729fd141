use std::path::Path;
use std::process::Command;

use monoscale::cache_io;
use monoscale::{run_experiment, ExperimentConfig, ExperimentKind};
use monoscale_core::{HomogenizedMap, XKey};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_monoscale"));
    c.env_remove("MONOSCALE_THREADS");
    c
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn small_convergence(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("conv.json");
    std::fs::write(
        &p,
        r#"{"kind":"convergence","dim":1,
            "operator":{"family":{"kind":"linear_tensor","tensor":[[1,0],[0,1]]},
                        "profile":{"kind":"layered","axis":0,"values":[1,3]}},
            "mesh":{"cell_n":32,"macro_n":256},
            "epsilons":[0.125,0.0625,0.03125]}"#,
    )
    .unwrap();
    p
}

#[test]
fn convergence_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_convergence(dir.path());
    let out = dir.path().join("out");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let csv = read(&out.join("table.csv"));
    let lines: Vec<&str> = csv.split('\n').collect();
    assert_eq!(lines[0], "epsilon,e_plain,e_corr,e_outside,verdict");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4], "");
    assert!(!csv.contains('\r'));
    for l in &lines[1..4] {
        assert!(l.ends_with(",PASS"), "{l}");
        assert_eq!(l.split(',').count(), 5);
    }
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["config"]["solver"]["max_outer"], 20000);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_convergence(dir.path());
    let mut tables = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let st = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("MONOSCALE_THREADS", threads)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
        tables.push(std::fs::read(out.join("table.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn effective_subcommand_reproduces_the_harmonic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eff");
    let st = bin()
        .arg("effective")
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let csv = read(&out.join("table.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x_key,xi_0,b_0,oracle_b_0,rel_error,verdict"
    );
    let expected = [(-2.0, -3.0), (0.0, 0.0), (1.0, 1.5), (5.0, 7.5)];
    for (line, (xi, b)) in lines.zip(expected) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], "global");
        assert_eq!(f[1].parse::<f64>().unwrap(), xi);
        assert!((f[2].parse::<f64>().unwrap() - b).abs() <= 1e-6, "{line}");
        assert_eq!(f[5], "PASS");
    }
}

#[test]
fn overrides_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_convergence(dir.path());
    let out = dir.path().join("o");
    let st = bin()
        .args(["convergence", "--config"])
        .arg(&cfg)
        .args([
            "--epsilon",
            "0.125",
            "--epsilon",
            "0.0625",
            "--seed",
            "7",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    // two values halve e_corr only once, above the ratio limit
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stdout).contains("e_corr_ratio: FAIL"));
    assert_eq!(read(&out.join("table.csv")).lines().count(), 3);
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert_eq!(report["config"]["seed"], 7);

    let o = bin()
        .args(["convergence", "--config"])
        .arg(&cfg)
        .args(["--epsilon", "0.3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilons"));

    let o = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cache_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.csv");
    let run = |out: &str| {
        bin()
            .arg("effective")
            .arg("--cache")
            .arg(&cache)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap()
    };
    assert_eq!(run("a").code(), Some(0));
    let text = read(&cache);
    assert!(text.starts_with("x_key,xi_0,b_0\n"));
    assert_eq!(text.lines().count(), 5);
    assert_eq!(run("b").code(), Some(0));
    assert_eq!(read(&cache), text);
    assert_eq!(
        read(&dir.path().join("a/table.csv")),
        read(&dir.path().join("b/table.csv"))
    );

    std::fs::write(&cache, &text[..text.len() - 3]).unwrap();
    let o = bin()
        .arg("effective")
        .arg("--cache")
        .arg(&cache)
        .arg("--out")
        .arg(dir.path().join("c"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn imported_cache_evaluates_bitwise() {
    let mut cfg = ExperimentConfig::builtin(ExperimentKind::Effective);
    cfg.operator.family = monoscale_core::Family::NonlinearIsotropic;
    cfg.operator.alpha = None;
    cfg.effective.xi = vec![vec![-1.3], vec![0.7], vec![2.0 / 3.0]];
    let out = run_experiment(&cfg, &[]).unwrap();
    let text = cache_io::to_csv(&out.cache, 1);
    let rows = cache_io::from_csv(&text, 1).unwrap();
    assert_eq!(rows, out.cache);

    let fresh = HomogenizedMap::new(
        cfg.spec().unwrap(),
        cfg.cell_mesh().unwrap(),
        cfg.solver.options(),
    )
    .unwrap();
    fresh.import_cache(&rows).unwrap();
    let direct = HomogenizedMap::new(
        cfg.spec().unwrap(),
        cfg.cell_mesh().unwrap(),
        cfg.solver.options(),
    )
    .unwrap();
    for xi in [-1.3, 0.7, 2.0 / 3.0] {
        let a = fresh.eval_key(XKey::Global, [xi, 0.0]).unwrap();
        let b = direct.eval_key(XKey::Global, [xi, 0.0]).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }
    assert_eq!(fresh.cache_len(), 3);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
