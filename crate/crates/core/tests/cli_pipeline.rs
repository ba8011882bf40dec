use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvpdp::graph_core::SolutionFile;
use tempfile::TempDir;

fn mvpdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvpdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn gen(&self, name: &str, n: &str, k: &str, q: &str, seed: &str) -> String {
        let p = self.path(name);
        let out = mvpdp(&[
            "gen", "--n", n, "--k", k, "--q", q, "--seed", seed, "--out", &p,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        p
    }
}

#[test]
fn gen_solve_validate_plot_round_trip() {
    let w = Work::new();
    let inst = w.gen("inst.json", "5", "2", "2", "4");
    let (sol, svg, trace) = (w.path("sol.json"), w.path("sol.svg"), w.path("trace.jsonl"));
    let out = mvpdp(&[
        "solve", &inst, "--out", &sol, "--plot", &svg, "--trace", &trace,
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("status=success"));
    assert_eq!(stdout(&out).matches("vehicle ").count(), 2);

    let file = SolutionFile::load(&sol).unwrap();
    assert_eq!(file.status.as_deref(), Some("success"));
    assert!(file.gap <= 0.035);
    assert!(!std::fs::read_to_string(&trace).unwrap().is_empty());

    let out = mvpdp(&["validate", &inst, &sol]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("valid"));

    let replot = w.path("replot.svg");
    assert_eq!(code(&mvpdp(&["plot", &inst, &sol, "--out", &replot])), 0);
    assert_eq!(
        std::fs::read(&svg).unwrap(),
        std::fs::read(&replot).unwrap()
    );
}

#[test]
fn exact_solve_agrees_with_oracle() {
    let w = Work::new();
    let inst = w.gen("inst.json", "4", "2", "1", "8");
    let (sol, opt) = (w.path("sol.json"), w.path("opt.json"));
    assert_eq!(
        code(&mvpdp(&["solve", &inst, "--gap", "0", "--out", &sol])),
        0
    );
    assert_eq!(code(&mvpdp(&["oracle", &inst, "--out", &opt])), 0);
    let (a, b) = (
        SolutionFile::load(&sol).unwrap(),
        SolutionFile::load(&opt).unwrap(),
    );
    assert!((a.objective - b.objective).abs() < 1e-6);
}

#[test]
fn time_limit_with_incumbent_exits_partial() {
    let w = Work::new();
    let inst = w.gen("inst.json", "10", "3", "2", "2");
    let guess = w.path("guess.json");
    assert_eq!(
        code(&mvpdp(&["solve", &inst, "--gap", "0.9", "--out", &guess])),
        0
    );
    let sol = w.path("sol.json");
    let out = mvpdp(&[
        "solve",
        &inst,
        "--gap",
        "0",
        "--time-limit",
        "0.001",
        "--guess",
        &guess,
        "--out",
        &sol,
    ]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("termination=time_limit"));
    assert_eq!(
        SolutionFile::load(&sol).unwrap().status.as_deref(),
        Some("partial")
    );
    assert_eq!(code(&mvpdp(&["validate", &inst, &sol])), 0);
}

#[test]
fn oversized_group_is_reported_infeasible() {
    let w = Work::new();
    let inst = w.gen("inst.json", "2", "1", "2", "0");
    let mut json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&inst).unwrap()).unwrap();
    json["demands"][1]["group"] = 3.into();
    std::fs::write(&inst, json.to_string()).unwrap();
    let out = mvpdp(&["solve", &inst]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("infeasible"));
}

#[test]
fn tampered_solution_fails_validation() {
    let w = Work::new();
    let inst = w.gen("inst.json", "3", "1", "1", "5");
    let sol = w.path("sol.json");
    assert_eq!(code(&mvpdp(&["solve", &inst, "--out", &sol])), 0);
    let mut file = SolutionFile::load(&sol).unwrap();

    let mut swapped = file.clone();
    // the delivery of customer 1 (label 8) before its pickup (label 5)
    let route = &mut swapped.routes[0];
    let (p, d) = (
        route.iter().position(|&x| x == 5).unwrap(),
        route.iter().position(|&x| x == 8).unwrap(),
    );
    route.swap(p, d);
    swapped.sigma.clear();
    let bad = w.path("bad.json");
    swapped.save(&bad).unwrap();
    let out = mvpdp(&["validate", &inst, &bad]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).starts_with("infeasible"));

    file.objective += 1.0;
    file.save(&bad).unwrap();
    assert_eq!(code(&mvpdp(&["validate", &inst, &bad])), 3);
}

#[test]
fn invalid_arguments_exit_with_error() {
    let w = Work::new();
    let inst = w.gen("inst.json", "2", "1", "1", "0");
    assert_eq!(code(&mvpdp(&["solve", &inst, "--gap", "1.5"])), 1);
    assert_eq!(code(&mvpdp(&["solve", &w.path("missing.json")])), 1);
}

fn write_graph(dir: &Path) -> PathBuf {
    let path = dir.join("roads.csv");
    let mut text = String::from("from,to,weight\n");
    for i in 0..12 {
        text.push_str(&format!("n{i},n{},{}\n", (i + 1) % 12, 1 + i % 3));
    }
    text.push_str("n0,n6,2\nn3,n9,2\n");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn road_graph_pipeline() {
    let w = Work::new();
    let graph = write_graph(w.dir.path());
    let (inst, sol, svg) = (w.path("inst.json"), w.path("sol.json"), w.path("sol.svg"));
    let g = graph.to_string_lossy();
    let out = mvpdp(&[
        "gen", "--graph", &g, "--n", "3", "--k", "2", "--q", "2", "--seed", "1", "--out", &inst,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = mvpdp(&["solve", &inst, "--out", &sol, "--plot", &svg]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(code(&mvpdp(&["validate", &inst, &sol])), 0);
    assert!(std::fs::read_to_string(&svg)
        .unwrap()
        .contains(r#"class="route""#));
}

#[test]
fn bench_report_rows_are_reproducible() {
    let w = Work::new();
    let (a, b) = (w.path("a.json"), w.path("b.json"));
    for p in [&a, &b] {
        let out = mvpdp(&[
            "bench", "--sizes", "3,4", "--trials", "2", "--seed", "7", "--out", p,
        ]);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).contains("| 4 | 2 |"));
    }
    let rows = |p: &str| {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v["rows"].clone()
    };
    assert_eq!(rows(&a), rows(&b));
}

#[test]
fn certify_reports_pass_and_writes_lp() {
    let w = Work::new();
    let inst = w.gen("inst.json", "2", "1", "1", "3");
    let lp = w.path("model.lp");
    let out = mvpdp(&["certify", &inst, "--lp", &lp]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("pass"));
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Subject To") && text.contains("Binar"));

    let out = mvpdp(&["certify", "--beta", "1.01", "--steps", "1000"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["margin_positive"], true);
}
