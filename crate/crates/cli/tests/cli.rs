use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgo_cli::run::{RecoverReport, UniquenessFile};
use cgo_cli::scenario::Scenario;
use cgo_cli::CliError;

const BASE: &str = r#"
name = "t"
seed = 5
lambda = 1.0
gamma0 = 3.0

[grid]
half_width = 6.0
points_per_axis = 16
"#;

const POTENTIAL: &str = r#"
[potential]
kind = "gaussian"
amplitude = 0.1
sigma = 1.0
"#;

const RECOVER: &str = r#"
[recover]
schedule = [2.0, 4.0]
zeta = [[3.0, 0.0, 0.0]]

[recover.shell]
directions = 4
radii = [2.5, 3.2]

[recover.completion]
ball_radius = 2.0
"#;

fn write(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.in.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn cgo(args: &[&str], path: &Path, env_root: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cgo"));
    c.args(args).arg("--scenario").arg(path).env_remove(cgo_cli::OUT_ROOT_VAR);
    if let Some(r) = env_root {
        c.env(cgo_cli::OUT_ROOT_VAR, r);
    }
    c.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_in(cmd: &str, text: &str, workers: &str) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), text);
    let out = tmp.path().join("out");
    let o = cgo(&[cmd, "--out", out.to_str().unwrap(), "--workers", workers], &scenario, None);
    assert!(o.status.success(), "{}", stderr(&o));
    (tmp, out)
}

#[test]
fn missing_potential_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), &format!("{BASE}{RECOVER}"));
    let o = cgo(&["recover"], &p, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("potential"), "{}", stderr(&o));
}

#[test]
fn momentum_on_the_shell_bound_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{BASE}{POTENTIAL}\n[recover]\nschedule = [2.0]\nzeta = [[2.0, 0.0, 0.0]]\n");
    let o = cgo(&["recover"], &write(tmp.path(), &text), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("shell bound"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_keys_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{BASE}{POTENTIAL}{RECOVER}\n[solver]\ntolerance = 1e-8\n");
    let o = cgo(&["recover"], &write(tmp.path(), &text), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tolerance"), "{}", stderr(&o));
}

#[test]
fn missing_block_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cgo(&["forward"], &write(tmp.path(), &format!("{BASE}{POTENTIAL}")), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scattering"), "{}", stderr(&o));
}

#[test]
fn solver_breakdown_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}{POTENTIAL}\n[solver]\ntol = 1e-14\nmax_iter = 1\nrestart = 1\n\n[cgo.family]\nzeta = [3.0, 0.0, 0.0]\nt = [2.0]\n"
    );
    let o = cgo(&["cgo", "--out", tmp.path().join("o").to_str().unwrap()], &write(tmp.path(), &text), None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    assert_eq!(CliError::Verification("x".into()).exit_code(), 1);
    assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    assert_eq!(CliError::Output("x".into()).exit_code(), 2);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let text = format!("{BASE}{POTENTIAL}{RECOVER}");
    let (_a, one) = run_in("recover", &text, "1");
    let (_b, three) = run_in("recover", &text, "3");
    let (fa, fb) = (files(&one), files(&three));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
}

#[test]
fn scenario_echo_is_a_fixed_point() {
    let text = format!("{BASE}{POTENTIAL}{RECOVER}");
    let (_t, out) = run_in("recover", &text, "2");
    let echo = std::fs::read_to_string(out.join("scenario.toml")).unwrap();
    let again = Scenario::parse(&echo).unwrap();
    assert_eq!(again, Scenario::parse(&text).unwrap());
    assert_eq!(again.normalized(), echo);
    assert!(echo.contains("max_iter = 300"));
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), &format!("{BASE}{POTENTIAL}{RECOVER}"));
    let out = tmp.path().join("o");
    let o = cgo(&["recover", "--out", out.to_str().unwrap(), "--seed", "99"], &p, None);
    assert!(o.status.success());
    let echo = Scenario::parse(&std::fs::read_to_string(out.join("scenario.toml")).unwrap()).unwrap();
    assert_eq!(echo.seed, 99);
}

#[test]
fn tables_have_fixed_headers() {
    let (_t, out) = run_in("recover", &format!("{BASE}{POTENTIAL}{RECOVER}"), "2");
    let head = |f: &str| std::fs::read_to_string(out.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head("shell.csv"), "zeta1,zeta2,zeta3,abs_zeta,t,re,im,err");
    let rows = std::fs::read_to_string(out.join("shell.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 1 + 8);
    assert!(head("convergence.csv").starts_with("zeta1,zeta2,zeta3,t,"), "{}", head("convergence.csv"));
    assert_eq!(head("completion.csv"), "abs_zeta,re,im");
}

#[test]
fn empty_scan_writes_header_only() {
    let text = format!("{BASE}{POTENTIAL}\n[scan]\nz = []\nrho_perp = []\n");
    let (_t, out) = run_in("scan-exceptional", &text, "1");
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    assert_eq!(csv, "re_z,im_z,rho_perp_1,rho_perp_2,indicator,flagged\n");
}

#[test]
fn json_reports_round_trip() {
    let (_t, out) = run_in("recover", &format!("{BASE}{POTENTIAL}{RECOVER}"), "2");
    let text = std::fs::read_to_string(out.join("recover.json")).unwrap();
    let report: RecoverReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap(), text.trim_end());
    assert_eq!(report.seed, 5);
    assert_eq!(report.shell.points.len(), 9);
    assert!(report.completion.is_some());

    let uniq = format!(
        "{BASE}{POTENTIAL}\n[potential_prime]\nkind = \"gaussian\"\namplitude = 0.09\nsigma = 1.0\n\n\
         [scattering]\nk_max = 1\n\n[uniqueness]\nschedule = [4.0, 8.0]\n\n[uniqueness.shell]\ndirections = 2\nradii = [3.0]\n"
    );
    let (_u, out) = run_in("uniqueness", &uniq, "2");
    let file: UniquenessFile = serde_json::from_str(&std::fs::read_to_string(out.join("uniqueness.json")).unwrap()).unwrap();
    assert!(!file.at_baseline);
    assert!(file.report.smatrix_discrepancy > 0.0);
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), &format!("{BASE}{POTENTIAL}\n[scan]\nz = [[0.0, 1.0]]\nrho_perp = [[0.0, 0.0]]\nprobes = 2\n"));
    let root = tmp.path().join("root");
    let o = cgo(&["scan-exceptional"], &p, Some(&root));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("t").join("scan.csv").exists());
    assert!(root.join("t").join("scenario.toml").exists());
}
