use std::path::Path;
use std::process::{Command, Output};

fn regperc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regperc"))
        .args(args)
        .current_dir(dir)
        .env_remove("REGPERC_WORKERS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn model_phi_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = regperc(&["model-phi", "--d", "3", "--lambda", "0", "--kmax", "6", "--out", "phi.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("phi.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,phi");
    assert_eq!(lines.len(), 8);
    assert_eq!(lines[1], "0,1");
    let phi2: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!((phi2 + 0.5).abs() < 1e-12);
}

#[test]
fn odd_product_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = regperc(&["generate", "--n", "5", "--d", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n*d must be even"));
}

#[test]
fn unknown_command_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = regperc(&["transmogrify"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown command"));
    let o = regperc(&["model-phi", "--d", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--lambda"));
    let o = regperc(&["critical-curve", "--d", "3", "--lambda-bins", "0", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--lambda-bins"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn rejection_limit_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = regperc(&["generate", "--n", "60", "--d", "12", "--max-restarts", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn generate_then_spectrum_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = regperc(&["generate", "--n", "60", "--d", "3", "--seed", "4", "--out", "g.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = regperc(
        &["spectrum", "--graph", "g.json", "--out", "eig.csv", "--vectors", "0,59", "--vector-dir", "vecs"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let eig = std::fs::read_to_string(dir.path().join("eig.csv")).unwrap();
    assert_eq!(eig.lines().next(), Some("index,lambda,residual"));
    assert_eq!(eig.lines().count(), 61);
    let top: f64 = eig.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((top - 3.0).abs() < 1e-9);
    let v = std::fs::read_to_string(dir.path().join("vecs/vector_59.csv")).unwrap();
    assert_eq!(v.lines().next(), Some("vertex,value"));
    let norm: f64 = v.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap().powi(2)).sum();
    assert!((norm - 60.0).abs() < 1e-9);

    let o =
        regperc(&["sweep", "--graph", "g.json", "--lambda", "0", "--negate", "true", "--out", "curve.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("alpha_c="));
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("alpha,induced,max_component,ratio"));
    let o = regperc(
        &["plot", "--input", "curve.csv", "--x", "alpha", "--y", "ratio", "--staircase", "true", "--out", "curve.svg"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("curve.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn plot_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "alpha,ratio\n").unwrap();
    let o = regperc(&["plot", "--input", "empty.csv", "--x", "alpha", "--y", "ratio", "--out", "e.svg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no plottable rows"));
    let o = regperc(&["plot", "--input", "empty.csv", "--x", "alpha", "--y", "beta", "--out", "e.svg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("'beta'"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# model run\nd=3\nlambda=-1\nkmax=4\nout=from_config.csv\n").unwrap();
    let o = regperc(&["--config", "run.cfg", "model-phi", "--kmax", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("from_config.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    let phi1: f64 = text.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((phi1 + 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn sample_wave_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = regperc(
        &["sample-wave", "--d", "3", "--lambda", "1", "--radius", "2", "--count", "5", "--seed", "9", "--out", "s.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# d=3 lambda=1 radius=2 seed=9"));
    assert_eq!(lines.next().unwrap().split(',').count(), 10);
    assert_eq!(lines.count(), 5);
}

#[test]
fn model_critical_and_fig5() {
    let dir = tempfile::tempdir().unwrap();
    let o = regperc(&["model-critical", "--d", "3", "--lambdas", "-0.5,0,0.5", "--out", "m.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(m.lines().next(), Some("d,lambda,alpha_c,r_residual,quad_nodes,truncation"));
    assert_eq!(m.lines().count(), 4);

    let o = regperc(
        &[
            "fig5",
            "--d",
            "3",
            "--n",
            "120",
            "--realizations",
            "2",
            "--lambda-bins",
            "4",
            "--seed",
            "7",
            "--out-dir",
            "f5",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["fig5_graph_d3.csv", "fig5_model_d3.csv", "fig5_d3.svg"] {
        assert!(dir.path().join("f5").join(name).exists(), "{name}");
    }
    let svg = std::fs::read_to_string(dir.path().join("f5/fig5_d3.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn outputs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample-wave", "--d", "4", "--lambda", "0.5", "--radius", "2", "--count", "50", "--seed", "3", "--out"];
    let mut a = args.to_vec();
    a.push("a.csv");
    let mut b = args.to_vec();
    b.push("b.csv");
    assert!(regperc(&a, dir.path()).status.success());
    assert!(regperc(&b, dir.path()).status.success());
    assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), std::fs::read(dir.path().join("b.csv")).unwrap());
}
