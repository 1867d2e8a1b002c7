use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rcrjoint::io::ResultFile;

fn rcrjoint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcrjoint")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn simulate_then_fit_parametric() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.txt");
    let out = rcrjoint(&["simulate", &config("special_case.conf"), "--n", "300", "--seed", "3", "--out", &data]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = path(dir.path(), "r.json");
    let out = rcrjoint(&["fit", &data, "--mode", "parametric", "--out", &res]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = ResultFile::read(Path::new(&res)).unwrap();
    let l = r.estimate("lambda_1").unwrap();
    assert!((l.value - 1.0).abs() < 4.0 * l.se.unwrap());
    assert_eq!(r.n_units, 300);
    assert!(!r.scenario_fingerprint.is_empty());

    let out = rcrjoint(&["survivor", &res, "--times", "0.5,1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("risk,t,cumulative,survivor"));
}

#[test]
fn semiparametric_fit_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.txt");
    assert!(rcrjoint(&["simulate", &config("illustration.conf"), "--n", "60", "--out", &data]).status.success());
    let out = rcrjoint(&["fit", &data, "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("alpha_1,")));
    assert!(text.lines().any(|l| l.starts_with("\"eta(1,2)\",")));
    let out = rcrjoint(&["summarize", &data]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["units"], 60);
}

#[test]
fn unknown_recurrent_type_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.txt");
    assert!(rcrjoint(&["simulate", &config("special_case.conf"), "--n", "20", "--out", &data]).status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    let bad: String = text
        .lines()
        .map(|l| if l.starts_with("rcr ") { format!("{} 2\n", &l[..l.len() - 2]) } else { format!("{l}\n") })
        .collect();
    let bad_path = path(dir.path(), "bad.txt");
    std::fs::write(&bad_path, bad).unwrap();
    let out = rcrjoint(&["fit", &bad_path, "--mode", "parametric"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line "));
}

#[test]
fn usage_and_missing_files_exit_with_one() {
    assert_eq!(rcrjoint(&["fit"]).status.code(), Some(1));
    assert_eq!(rcrjoint(&["fit", "/nonexistent/data.txt"]).status.code(), Some(1));
    assert_eq!(rcrjoint(&["--help"]).status.code(), Some(0));
}

#[test]
fn replicate_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let conf = path(dir.path(), "study.conf");
    std::fs::write(&conf, "preset = special-case\nn = 40\nmreps = 8\nmode = parametric\ngenerator = exact\n").unwrap();
    let one = rcrjoint(&["replicate", &conf, "--threads", "1", "--seed", "9"]);
    let three = rcrjoint(&["replicate", &conf, "--threads", "3", "--seed", "9"]);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, three.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    assert!(text.starts_with("name,true,mean,sd,ase,pl,pu,ase_alt,coverage,count"));
}
