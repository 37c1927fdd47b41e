use std::path::Path;
use std::process::{Command, Output};

fn bpdn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpdn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

fn write_problem(dir: &Path) -> String {
    let path = dir.join("problem.txt");
    std::fs::write(&path, "2 2 0.5\n1 -0.3\n0.3 1\n2 0.3\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_reports_partition_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path());
    let out = bpdn(&["solve", "--problem", &problem]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# certified_unique=yes"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "index,x_star,xi,class");
    assert!(lines[1].ends_with(",S"));
    assert!(lines[2].ends_with(",I0"));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("certified unique: yes"));
}

#[test]
fn boundary_coordinate_is_labelled() {
    let out = bpdn(&["solve", "--y", "1", "--t", "1"]);
    assert!(stdout(&out).contains(",dI0"));
}

#[test]
fn negative_data_value_is_accepted() {
    let out = bpdn(&["solve", "--y", "-3", "--t", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("-2.0000000000000000e0"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(bpdn(&["nonsense"]).status.code(), Some(1));
    assert_eq!(bpdn(&["table", "7"]).status.code(), Some(1));
    assert_eq!(bpdn(&["sample", "--y", "0.5", "--t", "1"]).status.code(), Some(1));
    let both = bpdn(&[
        "sample",
        "--y",
        "0.5",
        "--t",
        "1",
        "--temperature",
        "0.1",
        "--mse",
        "0.01",
    ]);
    assert_eq!(both.status.code(), Some(1));
    assert_eq!(bpdn(&["solve", "--y", "1", "--t", "-1"]).status.code(), Some(1));
    assert_eq!(bpdn(&["--help"]).status.code(), Some(0));
}

#[test]
fn inconsistent_targets_exit_with_two() {
    let out = bpdn(&[
        "temperature",
        "--y",
        "0.5",
        "--t",
        "1",
        "--bias",
        "0.5",
        "--mse",
        "3.5e-4",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn temperature_from_targets() {
    let out = bpdn(&[
        "temperature",
        "--y",
        "0.5",
        "--t",
        "1",
        "--bias",
        "0.01",
        "--mse",
        "3.5e-4",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = data_lines(&text)[1];
    let temp: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((temp - 0.0075).abs() < 1e-12);
}

#[test]
fn temperature_curves() {
    let out = bpdn(&["temperature", "--bias", "0.001", "--mse", "0.01", "--emit-curves"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines = data_lines(&text);
    assert_eq!(lines[0], "u,T_bias,T_mse,constraint");
    assert_eq!(lines.len(), 513);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = bpdn(&[
            "table",
            "1",
            "--n",
            "200",
            "--m",
            "20",
            "--seed",
            "5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = bpdn(&["table", "1", "--n", "200", "--m", "20", "--seed", "6"]);
    assert_ne!(std::fs::read(&a).unwrap(), other.stdout);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# settings\nn = 150\nm = 10\nseed = 3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = bpdn(&["--config", cfg, "table", "1"]);
    let explicit = bpdn(&["table", "1", "--n", "150", "--m", "10", "--seed", "3"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, explicit.stdout);
    let overridden = bpdn(&["--config", cfg, "table", "1", "--seed", "4"]);
    assert!(stdout(&overridden).contains("# seed=4"));

    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    let bad = bpdn(&["--config", dir.path().join("bad.cfg").to_str().unwrap(), "table", "2"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn table4_and_compare_outputs() {
    let out = bpdn(&["table", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines = data_lines(&text);
    assert_eq!(lines[0], "N,b_N,MSE_N");
    assert_eq!(lines.len(), 4);

    let out = bpdn(&["compare", "--replicates", "4", "--threads", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# n_budget=4896"));
    let header = data_lines(&text)[0];
    assert!(header.contains("final_state") && header.contains("running_mean"));
}

#[test]
fn figures_emit_csv() {
    for id in 1..=5 {
        let out = bpdn(&["figure", &id.to_string()]);
        assert!(out.status.success(), "figure {id}");
        assert!(data_lines(&stdout(&out)).len() > 2, "figure {id}");
    }
}

#[test]
fn sampling_commands() {
    let out = bpdn(&[
        "sample", "--y", "0.5", "--t", "1", "--bias", "0.01", "--mse", "3.5e-4", "--n", "50",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(data_lines(&text).len(), 51);
    assert!(text.contains("# temperature=7.5000000000000006e-3"));

    let out = bpdn(&["anneal", "--y", "0.5", "--t", "1", "--temperature", "0.0075"]);
    assert!(out.status.success());
    assert_eq!(data_lines(&stdout(&out)).len(), 4897);
}

#[test]
fn verify_and_limit_density() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path());
    let out = bpdn(&["verify", "--kind", "chi2", "--problem", &problem]);
    assert!(out.status.success());
    assert!(data_lines(&stdout(&out))[1].contains(",yes,"));

    let out = bpdn(&[
        "verify",
        "--y",
        "1",
        "--t",
        "1",
        "--temperatures",
        "0.1,0.01",
        "--n",
        "2000",
    ]);
    assert!(out.status.success());
    assert_eq!(data_lines(&stdout(&out)).len(), 3);

    let out = bpdn(&["limit-density", "--problem", &problem, "--fast=-1", "--slow", "0.3"]);
    assert!(out.status.success());
    let density: f64 = data_lines(&stdout(&out))[1].parse().unwrap();
    assert!(density > 0.0);

    let out = bpdn(&["limit-density", "--problem", &problem, "--fast", "1,2", "--slow", "0.3"]);
    assert_eq!(out.status.code(), Some(1));
}
