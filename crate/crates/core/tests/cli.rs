use std::path::Path;
use std::process::{Command, Output};

use chordal_rank::io::{self, CompletionOutput, SolutionJson};
use serde_json::Value;

const MAXCUT_4: &str = r#"{
  "n": 4,
  "cost": [[1, 1, -0.5], [2, 2, -0.75], [3, 3, -0.5], [4, 4, -0.25],
           [1, 2, 0.25], [2, 3, 0.25], [1, 3, 0.25], [2, 4, 0.25]],
  "constraints": [
    {"a": [[1, 1, 1.0]], "b": 1.0, "sense": "eq"},
    {"a": [[2, 2, 1.0]], "b": 1.0, "sense": "eq"},
    {"a": [[3, 3, 1.0]], "b": 1.0, "sense": "eq"},
    {"a": [[4, 4, 1.0]], "b": 1.0, "sense": "eq"}
  ],
  "target_rank": 1
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chordal-rank"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run binary")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_solution_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.json"), MAXCUT_4).unwrap();
    let out = run(
        dir.path(),
        &["solve", "--problem", "p.json", "--out", "s.json", "--log", "it.csv", "--rounds-log", "rd.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let it = std::fs::read_to_string(dir.path().join("it.csv")).unwrap();
    assert!(it.starts_with("iter,objective,primal_res,dual_res,rho,max_clique_rank\n"));
    let rd = std::fs::read_to_string(dir.path().join("rd.csv")).unwrap();
    assert!(rd.starts_with("round,objective,max_clique_rank,min_rank_ratio,solver_iters\n"));
    assert!(rd.lines().count() >= 2);

    // The objective reported in the file is reproduced from its own x.
    let sol: SolutionJson = io::read_json(&dir.path().join("s.json")).unwrap();
    let p = io::load_problem(&dir.path().join("p.json")).unwrap();
    assert!((sol.objective_for(&p).unwrap() - sol.objective).abs() <= 1e-12 * (1.0 + sol.objective.abs()));
    assert_eq!(sol.status, "converged");
    // Triangle plus pendant edge: max cut 3, relaxation bound 2.25 + 1.
    assert!(sol.objective <= -3.0 + 1e-3);
}

#[test]
fn no_reweight_runs_one_round() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.json"), MAXCUT_4).unwrap();
    let out = run(dir.path(), &["solve", "--problem", "p.json", "--rounds-log", "rd.csv", "--no-reweight"]);
    assert_eq!(out.status.code(), Some(0));
    let rd = std::fs::read_to_string(dir.path().join("rd.csv")).unwrap();
    assert_eq!(rd.lines().count(), 2);
}

#[test]
fn malformed_problem_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = MAXCUT_4.replace(r#""b": 1.0, "sense": "eq"}"#, r#""b": "one", "sense": "eq"}"#);
    std::fs::write(dir.path().join("p.json"), bad).unwrap();
    let out = run(dir.path(), &["solve", "--problem", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("constraints[0].b"), "{err}");

    let lower = MAXCUT_4.replace("[1, 2, 0.25]", "[2, 1, 0.25]");
    std::fs::write(dir.path().join("p.json"), lower).unwrap();
    let out = run(dir.path(), &["solve", "--problem", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cost[4]"));

    let out = run(dir.path(), &["solve", "--problem", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn maxcut_triangle_bound_and_cut() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["maxcut", "--n", "3", "--density", "1.0", "--seed", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_json(&dir.path().join("maxcut_summary.json"));
    assert!((s["sdp_bound"].as_f64().unwrap() - 2.25).abs() <= 1e-3);
    assert_eq!(s["cut_value"].as_f64().unwrap(), 2.0);
    let rounds = std::fs::read_to_string(dir.path().join("maxcut_rounds.csv")).unwrap();
    assert!(rounds.starts_with("round,max_clique_rank,objective\n"));
    let g = read_json(&dir.path().join("maxcut_graph.json"));
    assert_eq!(g["edges"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_sizes_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["ssc", "--ns", "3", "--np", "2", "--d", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["maxcut", "--n", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ssc_writes_instance_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["ssc", "--ns", "2", "--np", "10", "--d", "2", "--seed", "3", "--out-prefix", "t"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_json(&dir.path().join("t_summary.json"));
    assert!(s["accuracy"].as_f64().unwrap() > 0.0);
    let inst = read_json(&dir.path().join("t_instance.json"));
    assert_eq!(inst["points"].as_array().unwrap().len(), 10);
    let rounds = std::fs::read_to_string(dir.path().join("t_rounds.csv")).unwrap();
    assert!(rounds.starts_with("round,min_rank_ratio,objective\n"));
}

fn gram_entries(f: &[[f64; 2]], pattern: &[(usize, usize)]) -> String {
    let cells: Vec<String> = pattern
        .iter()
        .map(|&(i, j)| {
            let v = f[i - 1][0] * f[j - 1][0] + f[i - 1][1] * f[j - 1][1];
            format!("[{i}, {j}, {v:?}]")
        })
        .collect();
    cells.join(", ")
}

#[test]
fn complete_recovers_rank_two_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let f = [[1.0, 0.0], [0.5, 1.0], [-1.0, 2.0], [0.3, -0.7]];
    // Cliques {1,2,3} and {2,3,4}; entry (1,4) is unspecified.
    let pattern = [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (2, 4), (3, 3), (3, 4), (4, 4)];
    let input = format!(r#"{{"n": 4, "entries": [{}]}}"#, gram_entries(&f, &pattern));
    std::fs::write(dir.path().join("in.json"), input).unwrap();
    let out = run(dir.path(), &["complete", "--in", "in.json", "--out", "out.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let c: CompletionOutput = io::read_json(&dir.path().join("out.json")).unwrap();
    assert_eq!(c.rank, 2);
    assert_eq!(c.max_clique_rank, 2);
    for &(i, j) in &pattern {
        let v = f[i - 1][0] * f[j - 1][0] + f[i - 1][1] * f[j - 1][1];
        assert!((c.matrix[i - 1][j - 1] - v).abs() < 1e-10);
        assert!((c.matrix[j - 1][i - 1] - v).abs() < 1e-10);
    }
}

#[test]
fn complete_pattern_is_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let f = [[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]];
    let pattern = [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];
    let input = format!(r#"{{"n": 3, "entries": [{}]}}"#, gram_entries(&f, &pattern));
    std::fs::write(dir.path().join("in.json"), input).unwrap();
    let out = run(dir.path(), &["complete", "--in", "in.json", "--out", "out.json"]);
    assert_eq!(out.status.code(), Some(0));
    let c: CompletionOutput = io::read_json(&dir.path().join("out.json")).unwrap();
    for &(i, j) in &pattern {
        let v = f[i - 1][0] * f[j - 1][0] + f[i - 1][1] * f[j - 1][1];
        assert!((c.matrix[i - 1][j - 1] - v).abs() < 1e-12);
    }
}

#[test]
fn complete_reports_failing_clique() {
    let dir = tempfile::tempdir().unwrap();
    let input = r#"{"n": 3, "entries": [[1, 1, 1.0], [1, 2, 0.5], [2, 2, 1.0],
                                        [2, 3, 2.0], [3, 3, 1.0]]}"#;
    std::fs::write(dir.path().join("in.json"), input).unwrap();
    let out = run(dir.path(), &["complete", "--in", "in.json", "--out", "out.json"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("{2,3}") && err.contains("FAIL"), "{err}");
    assert!(!dir.path().join("out.json").exists());

    let cycle = r#"{"n": 4, "entries": [[1, 2, 0.1], [2, 3, 0.1], [3, 4, 0.1], [1, 4, 0.1],
                                        [1, 1, 1], [2, 2, 1], [3, 3, 1], [4, 4, 1]]}"#;
    std::fs::write(dir.path().join("in.json"), cycle).unwrap();
    let out = run(dir.path(), &["complete", "--in", "in.json", "--out", "out.json"]);
    assert_eq!(out.status.code(), Some(1));
}
