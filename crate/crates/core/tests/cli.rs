mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::cassette;

fn gca(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gca"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GCA_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scene_file(dir: &Path) -> String {
    let p = dir.join("scene.json");
    std::fs::write(&p, cassette::scene().to_json()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_prints_the_answer_letter() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_file(dir.path());
    let options = cassette::OPTIONS.join(",");
    let o = gca(&["solve", "--scene", &scene, "--query", cassette::QUERY, "--options", &options, "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let letter = ["A", "B", "C", "D"][cassette::OPTIONS.iter().position(|x| *x == cassette::expected_option()).unwrap()];
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == format!("answer: {letter}")), "{out}");
    assert!(dir.path().join("run/trace.jsonl").is_file());

    let show = gca(&["trace", "show", "run/trace.jsonl"], dir.path());
    assert_eq!(show.status.code(), Some(0));
    assert!(stdout(&show).contains(&format!("answer: {letter}. {}", cassette::expected_option())));
}

#[test]
fn missing_scene_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gca(&["solve", "--scene", "nope.json", "--query", cassette::QUERY], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = gca(&["solve", "--query", cassette::QUERY], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(gca(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(gca(&["solve", "--scene", "x", "--query", "q", "--budget", "0"], dir.path()).status.code(), Some(1));
}

#[test]
fn injected_fault_exits_two_with_attribution() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_file(dir.path());
    let options = cassette::OPTIONS.join(",");
    for (fault, stage) in [
        ("corrupt_reconstruction", "Reconstruction"),
        ("corrupt_pose", "Orientation"),
        ("drop_detections", "Detection"),
        ("break_formalizer", "Formalize"),
        ("break_coder", "Computation"),
    ] {
        let o = gca(&["solve", "--scene", &scene, "--query", cassette::QUERY, "--options", &options, "--fault", fault], dir.path());
        assert_eq!(o.status.code(), Some(2), "{fault}: {}", stdout(&o));
        let out = stdout(&o);
        assert!(out.lines().any(|l| l.starts_with(&format!("attribution: {stage}"))), "{fault}: {out}");
    }
    let o = gca(&["solve", "--scene", &scene, "--query", cassette::QUERY, "--fault", "melt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

fn category_rows(md: &str) -> Vec<String> {
    md.lines()
        .take_while(|l| !l.is_empty())
        .skip(2)
        .filter(|l| !l.contains("**overall**"))
        .map(str::to_string)
        .collect()
}

#[test]
fn bench_reports_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = gca(&["bench", "--per-category", "2", "--seed", "5", "--out", "a"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(category_rows(&stdout(&a)).len(), 7);
    for f in ["suite.json", "report.json", "report.md", "timing.json"] {
        assert!(dir.path().join("a").join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_dir(dir.path().join("a/traces")).unwrap().count(), 14);
    let b = gca(&["bench", "--per-category", "2", "--seed", "5", "--out", "b"], dir.path());
    assert_eq!(b.status.code(), Some(0));
    for f in ["suite.json", "report.json", "report.md"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between equal runs");
    }

    let c = gca(
        &["bench", "--per-category", "1", "--counts", "relative_position=2,camera_rotation=0", "--seed", "5", "--out", "c"],
        dir.path(),
    );
    assert_eq!(c.status.code(), Some(0), "{}", String::from_utf8_lossy(&c.stderr));
    let rows = category_rows(&stdout(&c));
    assert_eq!(rows.len(), 6, "{rows:?}");
    assert!(rows[0].starts_with("| relative_position | 2 | 2 |"), "{rows:?}");
    assert!(rows.iter().all(|r| !r.contains("camera_rotation")));

    let bad = gca(&["bench", "--per-category", "1", "--margin", "0", "--out", "d"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_file(dir.path());
    let ok = gca(&["validate", "+Z_ref = -Z_toaster", "--scene", &scene], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let out = stdout(&ok);
    assert!(out.contains("variant: object_based"), "{out}");
    assert!(out.lines().any(|l| l == "valid"));

    let latex = gca(&["validate", "$+Z_\\text{ref} = -Z_\\text{toaster}$", "--scene", &scene], dir.path());
    assert_eq!(latex.status.code(), Some(0));

    let abstract_anchor = gca(&["validate", "+Z_ref = -Z_kitchen", "--scene", &scene], dir.path());
    assert_eq!(abstract_anchor.status.code(), Some(3));
    assert!(stdout(&abstract_anchor).contains("flag:"));

    let syntax = gca(&["validate", "+Z_ref = -Q_toaster"], dir.path());
    assert_eq!(syntax.status.code(), Some(3));
    let out = stdout(&syntax);
    assert!(out.starts_with("invalid: at byte "), "{out}");
    assert!(out.contains('^'));
}

#[test]
fn logs_stay_off_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_file(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_gca"))
        .args(["-vv", "solve", "--scene", &scene, "--query", cassette::QUERY, "--out", "run"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().all(|l| ["trace: ", "answer: ", "text: "].iter().any(|p| l.starts_with(p))), "{out}");
}
