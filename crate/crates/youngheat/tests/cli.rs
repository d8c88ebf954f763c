use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use youngheat::formats::{read_manifest, PathContainer};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_youngheat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("YOUNGHEAT_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn energy(dir: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("minimizer.json")).unwrap()).unwrap();
    v["energy"].as_f64().unwrap()
}

const SAMPLE: &[&str] = &["sample", "--H", "0.75", "--N", "256", "--M", "100", "--seed", "7"];

#[test]
fn sample_is_byte_identical_and_manifest_echoes_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(SAMPLE, &a).status.code(), Some(0));
    assert_eq!(run(SAMPLE, &b).status.code(), Some(0));
    for f in ["ensemble.csv", "ensemble.bin", "manifest.json", "config.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let m = read_manifest(&a.join("manifest.json")).unwrap();
    assert_eq!(m.command, "sample");
    for line in ["H = 0.75", "N = 256", "M = 100", "seed = 7"] {
        assert!(m.config.lines().any(|l| l == line), "missing `{line}` in\n{}", m.config);
    }
    assert_eq!(m.config_hash.len(), 64);
    let c = PathContainer::read_binary(fs::File::open(a.join("ensemble.bin")).unwrap()).unwrap();
    assert_eq!((c.paths.len(), c.steps(), c.dims(), c.seed), (100, 256, 1, 7));
    let bin = m.outputs.iter().find(|f| f.name == "ensemble.bin").unwrap();
    assert_eq!(bin.sha256, youngheat::config::sha256_hex(&fs::read(a.join("ensemble.bin")).unwrap()));
}

#[test]
fn stored_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["sample", "--M", "20", "--N", "64", "--seed", "3", "--dims", "2"], &a).status.code(), Some(0));
    let cfg = a.join("config.txt");
    assert_eq!(run(&["sample", "--config", cfg.to_str().unwrap()], &b).status.code(), Some(0));
    assert_eq!(fs::read(a.join("ensemble.bin")).unwrap(), fs::read(b.join("ensemble.bin")).unwrap());
}

#[test]
fn hurst_outside_range_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["sample", "--H", "0.4"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(1/2, 1)"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify", "bogus"], tmp.path()).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(run(&["sample", "--N", "many"], tmp.path()).status.code(), Some(1));
    assert_eq!(run(&["report", "sideways"], tmp.path()).status.code(), Some(1));
    let cfg = tmp.path().join("bad.txt");
    fs::write(&cfg, "H = 0.7\nnot_a_key = 1\n").unwrap();
    assert_eq!(run(&["sample", "--config", cfg.to_str().unwrap()], tmp.path()).status.code(), Some(1));
}

#[test]
fn io_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["sample", "--M", "2", "--N", "8"], &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(run(&["sample", "--config", "/nonexistent/cfg.txt"], tmp.path()).status.code(), Some(2));
}

#[test]
fn help_lists_every_subcommand() {
    let o = Command::new(env!("CARGO_BIN_EXE_youngheat")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["sample", "solve", "expand", "lattice", "density", "minimize", "verify", "report"] {
        assert!(text.lines().any(|l| l.trim_start().starts_with(cmd)), "{cmd} missing from help");
    }
}

#[test]
fn minimize_affine_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("one");
    let o = run(&["minimize", "--model", "affine", "--a", "0", "--a-prime", "1"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!((energy(&d) - 1.0).abs() < 1e-8, "energy {}", energy(&d));

    let d = tmp.path().join("zero");
    let o = run(&["minimize", "--model", "affine", "--a", "0.3", "--a-prime", "0.3", "--starts", "3"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(energy(&d).abs() < 1e-12);
    assert!(d.join("multi_start.json").exists());
}

#[test]
fn degenerate_diffusion_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // sigma(y) = y vanishes at the start point.
    let table = tmp.path().join("degenerate.txt");
    fs::write(&table, "dims 1 1\n1 0 1.0 1\n").unwrap();
    let model = format!("table:{}", table.display());
    let o = run(&["minimize", "--model", &model, "--a", "0", "--a-prime", "1"], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).to_lowercase().contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["density", "--model", "1d-sin", "--M", "400", "--N", "32", "--t", "0.3", "--points", "0.2;0.5"];
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(threads);
        let mut full = vec!["--threads", threads];
        full.extend_from_slice(&args);
        assert_eq!(run(&full, &dir).status.code(), Some(0));
        outs.push(fs::read(dir.join("density.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_youngheat"))
        .args(["lattice", "--kind", "L1", "--cutoff", "2"])
        .env("YOUNGHEAT_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(dir.join("lattice.csv")).unwrap();
    assert_eq!(table, String::from_utf8_lossy(&o.stdout));
    assert!(table.starts_with("kind,p,q,value\nL1,0,0,0\n"));
}

#[test]
fn solve_and_expand_write_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("solve");
    let o = run(&["solve", "--model", "2d-elliptic", "--M", "3", "--N", "64", "--a", "0.1,-0.2"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["solution.csv", "state.bin", "jacobian.bin", "jacobian_inv.bin", "manifest.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let j = PathContainer::read_binary(fs::File::open(d.join("jacobian.bin")).unwrap()).unwrap();
    assert_eq!(j.dims(), 4);

    let d = tmp.path().join("expand");
    let o = run(&["expand", "--model", "1d-sin", "--M", "2", "--N", "32", "--kappa-max", "2"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let chaos = fs::read_to_string(d.join("chaos.csv")).unwrap();
    assert!(chaos.starts_with("index,p,q,weight,coeff0\n"));
    assert!(d.join("phi1_0.bin").exists() && d.join("hierarchy.csv").exists());
}

#[test]
fn report_density_and_verify_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("report");
    let o = run(&["report", "on-diag", "--M", "2000", "--N", "32", "--t-grid", "geometric:0.1:0.8:5"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(csv.starts_with("t,raw_estimate,std_error,model_prediction\n"));
    assert_eq!(csv.lines().count(), 6);
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(d.join("report.json")).unwrap()).unwrap();
    assert!(rep["fit"]["coefficients"].as_array().is_some_and(|c| !c.is_empty()));

    let d = tmp.path().join("density");
    let o = run(
        &["density", "--model", "2d-elliptic", "--M", "300", "--N", "32", "--points", "0,0;0.1,0.1", "--profile"],
        &d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(d.join("density.csv")).unwrap().starts_with("x0,x1,value,std_error,"));
    assert_eq!(fs::read_to_string(d.join("profile.csv")).unwrap().lines().count(), 9);

    let d = tmp.path().join("verify");
    let o = run(&["verify", "properties"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(d.join("verify-properties.json")).unwrap()).unwrap();
    assert_eq!(rep["pass"], serde_json::Value::Bool(true));
    assert_eq!(read_manifest(&d.join("manifest.json")).unwrap().arguments, vec!["properties".to_string()]);
}
