//! End-to-end runs of the `strayfield` binary.

use std::path::Path;
use std::process::{Command, Output};

use strayfield::quadrature::{build_box_rule, SampleDomain};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strayfield")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bench_example_two_at_degree_ten() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex2.csv");
    let o = run(&["bench", "--example", "2", "--n", "10", "--check", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["status"], "pass");
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# config: {"));
    let row = text.lines().find(|l| l.starts_with("10,")).unwrap();
    let e: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((e - 0.07845252).abs() < 2e-5);
    let digits = row.split(',').nth(1).unwrap().split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(digits.len(), 17);
}

#[test]
fn bench_example_one_full_table_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex1.json");
    let o = run(&["bench", "--example", "1", "--n", "10,20,30,40,50,60", "--check", "--format", "json", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    assert_eq!(v["config"]["n_max"], 60);
    assert_eq!(v["config"]["mu0"], 1.0);
    assert!(v["config"]["quadrature"]["radial"].as_u64().unwrap() >= 122);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert!((v["slopes"]["energy"].as_f64().unwrap() + 2.90).abs() < 0.15);
}

#[test]
fn bench_reports_tolerance_failures() {
    let o = run(&["bench", "--example", "2", "--n", "10", "--check", "--quad-radial", "3", "--quad-theta", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["status"], "fail");
    assert_eq!(report["failures"][0]["quantity"], "E_10");
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["bench", "--example", "9"]).status.code(), Some(2));
    assert_eq!(run(&["bench"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "--example", "1", "--n", "10", "--quad-phi", "8"]).status.code(), Some(2));
    assert_eq!(run(&["energy", "--ball", "0,0,0", "--magnetization", "0,0,1"]).status.code(), Some(2));
    assert_eq!(run(&["energy", "--ball", "0,0,0,0.5", "--box", "0,0,0,1,1,1", "--magnetization", "0,0,1"]).status.code(), Some(2));
    assert_eq!(run(&["energy", "--ball", "0,0,0,-1", "--magnetization", "0,0,1"]).status.code(), Some(2));
    assert_eq!(run(&["energy", "--example", "2", "--mu0", "0"]).status.code(), Some(2));
    assert_eq!(run(&["--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn energy_of_uniform_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ball.json");
    let o = run(&["energy", "--ball", "0,0,0,0.5", "--magnetization", "0,0,1", "--nmax", "10", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&out);
    let cumulative = v["breakdown"]["cumulative"].as_array().unwrap();
    assert_eq!(cumulative.len(), 11);
    assert!((cumulative[10].as_f64().unwrap() - 0.07845252).abs() < 2e-5);
    assert_eq!(v["coefficients"]["n_max"], 10);
    assert_eq!(v["coefficients"]["coeffs"].as_array().unwrap().len(), 506);
    assert_eq!(v["config"]["field"]["kind"], "constant");
    assert_eq!(v["config"]["domain"]["radius"], 0.5);
}

#[test]
fn energy_of_zero_field_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero.csv");
    let coeffs = dir.path().join("zero.coefficients.json");
    let o = run(&["energy", "--box", "-1,-1,-1,1,1,1", "--magnetization", "0,0,0", "--nmax", "4", "--format", "csv", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let e: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(e, 0.0);
    }
    assert!(json(&coeffs)["coefficients"]["coeffs"].as_array().unwrap().iter().all(|c| c["c"] == 0.0));
}

#[test]
fn energy_from_cloud_matches_box_rule() {
    let dir = tempfile::tempdir().unwrap();
    let domain = SampleDomain::cuboid([-0.5; 3], [0.5; 3]).unwrap();
    let rule = build_box_rule(&domain, 24).unwrap();
    let mut csv = String::from("x,y,z,weight,Mx,My,Mz\n");
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        csv.push_str(&format!("{:e},{:e},{:e},{:e},0,1,0\n", x[0], x[1], x[2], w));
    }
    let cloud = dir.path().join("cube.csv");
    std::fs::write(&cloud, csv).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let o = run(&["energy", "--cloud", path_str(&cloud), "--nmax", "8", "--out", path_str(&a)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["energy", "--box", "-0.5,-0.5,-0.5,0.5,0.5,0.5", "--magnetization", "0,1,0", "--nmax", "8", "--quad-axis", "24", "--out", path_str(&b)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (ea, eb) = (json(&a)["breakdown"]["cumulative"][8].as_f64().unwrap(), json(&b)["breakdown"]["cumulative"][8].as_f64().unwrap());
    assert!((ea - eb).abs() < 1e-13 * eb, "{ea} vs {eb}");
    assert_eq!(json(&a)["config"]["domain"]["nodes"], 24 * 24 * 24);
}

#[test]
fn bad_clouds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("neg.csv");
    std::fs::write(&cloud, "x,y,z,weight,Mx,My,Mz\n0,0,0,0.1,0,0,1\n0.1,0,0,-0.2,0,0,1\n").unwrap();
    let o = run(&["energy", "--cloud", path_str(&cloud)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    std::fs::write(&cloud, "x,y,z,weight,Mx,My,Mz\n0,0,0,0.1,0,0\n").unwrap();
    let o = run(&["energy", "--cloud", path_str(&cloud)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["energy", "--cloud", path_str(&missing)]).status.code(), Some(3));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("no/such/dir/out.json");
    let o = run(&["energy", "--example", "2", "--nmax", "2", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"ball": [0, 0, 0, 0.5], "magnetization": [0, 0, 1], "nmax": 3, "mu0": 2.0}"#).unwrap();
    let out = dir.path().join("out.json");
    let o = run(&["energy", "--config", path_str(&config), "--nmax", "5", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&out);
    assert_eq!(v["config"]["n_max"], 5);
    assert_eq!(v["config"]["mu0"], 2.0);
    std::fs::write(&config, r#"{"nmax": "three"}"#).unwrap();
    assert_eq!(run(&["energy", "--config", path_str(&config)]).status.code(), Some(2));
    assert_eq!(run(&["energy", "--config", path_str(&dir.path().join("none.json"))]).status.code(), Some(3));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&["bench", "--example", "3", "--n", "4,8,12", "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        texts.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let mut rows = Vec::new();
    for exec in ["sequential", "parallel"] {
        let out = dir.path().join(format!("{exec}.csv"));
        let o = run(&["bench", "--example", "1", "--n", "5,10,15", "--execution", exec, "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = std::fs::read_to_string(&out).unwrap();
        rows.push(text.lines().filter(|l| !l.starts_with("# config")).map(String::from).collect::<Vec<_>>());
    }
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn basis_check_command() {
    let o = run(&["basis-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["status"], "pass");
    assert_eq!(v["report"]["k_max"], 4);
    assert_eq!(v["report"]["closed_forms"].as_array().unwrap().len(), 14);
    let o = run(&["basis-check", "--kmax", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["report"]["k_max"], 6);
    assert!(stderr(&o).contains("S3 orthonormality (k <= 6)"));
}

#[test]
fn closed_forms_command() {
    let o = run(&["closed-forms", "--point", "0.1,-0.2,0.3,0,0,0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("x = ")).count(), 2);
    assert_eq!(text.lines().filter(|l| l.starts_with("  (")).count(), 28);
    assert_eq!(run(&["closed-forms", "--point", "0.1,0.2"]).status.code(), Some(2));
}
