//! Black-box tests of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alphatheta"))
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> (String, String, bool) {
    let mut cmd = bin();
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.success(),
    )
}

#[test]
fn grow_single_tree_and_histogram() {
    let (stdout, _, ok) = run(
        &[
            "grow", "--alpha", "1/2", "--theta", "1/2", "--n", "5", "--seed", "11",
        ],
        &[],
    );
    assert!(ok);
    assert!(stdout.starts_with("# {"));
    assert!(stdout.trim_end().ends_with(";"));
    let (hist, _, ok) = run(&["grow", "--n", "5", "--reps", "1000", "--seed", "11"], &[]);
    assert!(ok);
    assert!(hist.contains("shape,count"));
    let total: u64 = hist
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 1000);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let args = ["grow", "--n", "7", "--reps", "2000", "--seed", "5"];
    let (a, _, ok_a) = run(&args, &[("ALPHATHETA_WORKERS", "1")]);
    let (b, _, ok_b) = run(&args, &[("ALPHATHETA_WORKERS", "4")]);
    assert!(ok_a && ok_b);
    assert_eq!(a, b);
    let crp_args = ["crp", "--n", "30", "--reps", "50", "--seed", "9"];
    let (a, _, _) = run(&crp_args, &[("ALPHATHETA_WORKERS", "1")]);
    let (b, _, _) = run(&crp_args, &[("ALPHATHETA_WORKERS", "3")]);
    assert_eq!(a, b);
}

#[test]
fn invalid_parameters_are_rejected() {
    let (_, stderr, ok) = run(&["grow", "--alpha", "2", "--theta", "1", "--n", "4"], &[]);
    assert!(!ok);
    assert!(stderr.contains("alpha"));
    let (_, stderr, ok) = run(&["crp", "--alpha", "x/y", "--n", "4"], &[]);
    assert!(!ok);
    assert!(stderr.contains("parse"));
}

#[test]
fn exact_reports_are_json_with_passes() {
    let (stdout, _, ok) = run(&["exact", "--check", "lemma12"], &[]);
    assert!(ok);
    let doc: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 5);
    assert!(reports.iter().all(|r| r["pass"].as_bool().unwrap()));
}

#[test]
fn beads_json_round_trips_and_masses_sum() {
    let (stdout, _, ok) = run(
        &[
            "beads", "--k", "4", "--budget", "300", "--seed", "3", "--format", "json",
        ],
        &[],
    );
    assert!(ok);
    let doc: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let edges = doc["bead_tree"]["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 7);
    let mass: f64 = edges
        .iter()
        .map(|e| {
            e["beads"]
                .as_array()
                .unwrap()
                .iter()
                .map(|a| a[1].as_f64().unwrap())
                .sum::<f64>()
                + e["leftover"].as_f64().unwrap()
        })
        .sum();
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn limits_tables_have_headers() {
    let (stdout, _, ok) = run(&["limits", "--emit", "phi-table"], &[]);
    assert!(ok);
    assert!(stdout
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("alpha,theta,s,phi"));
    let (stdout, _, ok) = run(
        &[
            "limits",
            "--emit",
            "partition-recursive",
            "--reps",
            "3",
            "--eps",
            "0.01",
        ],
        &[],
    );
    assert!(ok);
    assert!(stdout.contains("replicate,g,d,mass"));
}

#[test]
fn verify_quick_suite_passes() {
    let (stdout, _, ok) = run(&["verify", "--suite", "quick"], &[]);
    assert!(ok, "quick suite failed:\n{stdout}");
    let pass_lines = stdout
        .lines()
        .filter(|l| l.starts_with("criterion") && l.contains(" PASS "))
        .count();
    assert_eq!(pass_lines, 12, "expected 12 criterion lines:\n{stdout}");
    assert!(stdout.contains("ALL PASS"));
}
