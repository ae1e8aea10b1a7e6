use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn pcgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcgraph")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn check_k2_both_modes_agree() {
    let o = pcgraph(&["check", &data("k2.txt"), "--mode", "both"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("exact verdict: perfect"));
    assert!(out.contains("numeric verdict: perfect"));
    assert!(out.contains("0.0000, 2.0000"));
    assert!(out.contains("tol_gap=") && out.contains("tol_zero="));
}

#[test]
fn check_p3_reports_witness() {
    for mode in ["exact", "numeric", "both"] {
        let o = pcgraph(&["check", &data("p3.txt"), "--mode", mode]);
        assert_eq!(code(&o), 1, "mode {mode}");
        assert!(stdout(&o).contains("eigenvalue 1, node 2"), "mode {mode}");
    }
}

#[test]
fn check_input_errors() {
    assert_eq!(code(&pcgraph(&["check", &data("missing.txt")])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = write_temp(&dir, "bad.txt", "n=3\n1 1\n");
    let o = pcgraph(&["check", &bad]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"));
    assert_eq!(code(&pcgraph(&["check", &data("k2.txt"), "--tol-zero", "-1"])), 2);
}

#[test]
fn check_numeric_indeterminate_band() {
    // P4's smallest relative eigenvector entry is tan(π/8) ≈ 0.414
    let o = pcgraph(&["check", &data("p4.txt"), "--mode", "numeric", "--tol-zero", "0.5"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("indeterminate-numeric"));
}

#[test]
fn check_both_flags_disagreement() {
    // an absurdly small zero tolerance makes the numeric test miss P3's zero entry
    let o = pcgraph(&["check", &data("p3.txt"), "--mode", "both", "--tol-zero", "1e-300"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("DISAGREEMENT"));
}

#[test]
fn check_reads_json() {
    let o = pcgraph(&["check", &data("paw.json"), "--mode", "exact"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("eigenvalue 1, node 3"));
}

#[test]
fn leaders_all_on_p3() {
    let o = pcgraph(&["leaders", &data("p3.txt"), "--all"]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().filter(|l| l.ends_with("controllable")).collect();
    assert_eq!(lines.len(), 7);
    let bad: Vec<&str> = lines.iter().copied().filter(|l| l.ends_with(" uncontrollable")).collect();
    assert_eq!(bad, vec!["2 uncontrollable"]);
}

#[test]
fn leaders_single_sets() {
    let o = pcgraph(&["leaders", &data("p3.txt"), "--set", "2"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("2 uncontrollable"));
    let o = pcgraph(&["leaders", &data("p3.txt"), "--set", "1,3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&pcgraph(&["leaders", &data("p3.txt"), "--set", ""])), 2);
    assert_eq!(code(&pcgraph(&["leaders", &data("p3.txt"), "--set", "4"])), 2);
    assert_eq!(code(&pcgraph(&["leaders", &data("p3.txt")])), 2);
}

#[test]
fn leaders_singletons_conclude() {
    let o = pcgraph(&["leaders", &data("p4.txt"), "--singletons"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("perfect: yes"));
    let o = pcgraph(&["leaders", &data("p3.txt"), "--singletons"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("perfect: no"));
}

#[test]
fn construct_steps_1_to_3() {
    let o = pcgraph(&["construct", &data("steps1-3.script"), &data("base.txt")]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("# 1 ok\n# 2 ok\n# 3 ok\n"));
    let graph_text: String = out.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    assert!(graph_text.starts_with("n=8\n"));
    for e in ["1 5", "2 6", "4 8", "4 7"] {
        assert!(graph_text.lines().any(|l| l == e), "missing {e}");
    }
    assert_eq!(graph_text.lines().count(), 1 + 8 + 4);
}

#[test]
fn construct_enumerate_step3() {
    let o = pcgraph(&["construct", &data("steps1-2.script"), &data("base.txt"), "--enumerate", "step3"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("# stage step3: 4 variants"));
    assert_eq!(out.lines().filter(|l| l.starts_with("n=")).count(), 4);
    for e in ["cross 2 7", "cross 4 7", "cross 3 6", "cross 3 8"] {
        assert!(out.contains(e), "missing {e}");
    }
}

#[test]
fn construct_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_temp(&dir, "s.txt", "pairs k=4\nintra 1 2\nbogus 3\n");
    let o = pcgraph(&["construct", &script, &data("base.txt")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"));
    let dup = write_temp(&dir, "d.txt", "pairs k=4\nintra 1\nintra 1\n");
    let o = pcgraph(&["construct", &dup, &data("base.txt")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("op 3 (line 3)"));
    assert_eq!(code(&pcgraph(&["construct", &data("steps1-3.script"), &data("base.txt"), "--enumerate", "step9"])), 2);
}

#[test]
fn census_rows() {
    let o = pcgraph(&["census", "--n", "3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("n,total,connected,perfect\n3,8,4,0\n"));
    let o = pcgraph(&["census", "--n", "2"]);
    assert!(stdout(&o).contains("\n2,2,1,1\n"));
    assert_eq!(code(&pcgraph(&["census", "--n", "9"])), 2);
    assert_eq!(code(&pcgraph(&["census", "--random", "5,2.0,10,1"])), 2);
    assert_eq!(code(&pcgraph(&["census", "--random", "5,0.5"])), 2);
}

#[test]
fn census_random_is_deterministic() {
    let a = pcgraph(&["census", "--random", "9,0.35,60,42"]);
    let b = pcgraph(&["census", "--random", "9,0.35,60,42"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("fraction_perfect="));
}

#[test]
fn reconstruct_k2_and_inconsistency() {
    let dir = tempfile::tempdir().unwrap();
    let target = write_temp(&dir, "t.txt", "0 2\n");
    let overlay = write_temp(&dir, "o.txt", "n=2\n");
    let o = pcgraph(&["reconstruct", "--target-spectrum", &target, "--overlay", &overlay, "--base-nodes", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("candidates: 1\n"));
    assert!(stdout(&o).contains("n=2\n1 2\n"));

    let odd = write_temp(&dir, "odd.txt", "0 1 1 1 1 1 1 1 2\n");
    let overlay9 = write_temp(&dir, "o9.txt", "n=9\n");
    let o = pcgraph(&["reconstruct", "--target-spectrum", &odd, "--overlay", &overlay9]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("inconsistent"));
}

#[test]
fn reconstruct_shipped_target() {
    let args = ["reconstruct", "--target-spectrum", &data("target_spectrum.txt"), "--overlay", &data("overlay.txt")];
    let o = pcgraph(&args);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("candidates: 120\n"));
    assert!(out.contains("candidate 1: base 1-2 1-3 2-4 3-4 5-6 5-7 6-8 7-8 |"));
    assert_eq!(pcgraph(&args).stdout, o.stdout);
}

#[test]
fn steer_p4_and_p3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let o = pcgraph(&[
        "steer",
        &data("p4.txt"),
        "--leaders",
        "1",
        "--target",
        "1,2,3",
        "--T",
        "5",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let residual: f64 = out.lines().find_map(|l| l.strip_prefix("residual: ")).expect("residual line").parse().unwrap();
    assert!(residual <= 4e-6);
    let traj = fs::read_to_string(&csv).unwrap();
    assert!(traj.starts_with("t,x_2,x_3,x_4\n"));

    let o = pcgraph(&["steer", &data("p3.txt"), "--leaders", "2", "--target", "1,0", "--T", "5"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("uncontrollable-detected"));
}

#[test]
fn steer_input_errors() {
    let base = ["steer", &data("p4.txt"), "--leaders", "1", "--T", "5"];
    let o = pcgraph(&[&base[..], &["--target", "1,2"]].concat());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("3 followers"));
    assert_eq!(code(&pcgraph(&[&base[..], &["--target", "1,x,3"]].concat())), 2);
    assert_eq!(code(&pcgraph(&["steer", &data("p4.txt"), "--leaders", "1", "--target", "1,2,3", "--T", "0"])), 2);
}

#[test]
fn export_dot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k2.dot");
    let o = pcgraph(&["export", &data("k2.txt"), "--dot", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let dot = fs::read_to_string(&out).unwrap();
    assert!(dot.starts_with("graph G {"));
    assert!(dot.contains("1 -- 2;"));

    let out = dir.path().join("p3.dot");
    pcgraph(&["export", &data("p3.txt"), "--dot", out.to_str().unwrap(), "--leaders", "1"]);
    let dot = fs::read_to_string(&out).unwrap();
    let node1 = dot.lines().find(|l| l.trim_start().starts_with("1 [")).unwrap();
    assert!(node1.contains("leader=true"));
    assert!(!dot.lines().find(|l| l.trim_start().starts_with("2 [")).unwrap().contains("leader"));

    let bad = dir.path().join("no/such/dir/x.dot");
    assert_eq!(code(&pcgraph(&["export", &data("k2.txt"), "--dot", bad.to_str().unwrap()])), 2);
}
