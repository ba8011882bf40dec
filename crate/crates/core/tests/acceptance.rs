//! Acceptance harness: one PASS/FAIL line per criterion. Exits nonzero if
//! any criterion fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mvpdp::bnb::{mip_gap, solve, SolveOptions, Termination, TraceEvent};
use mvpdp::convexify::{
    beta_iterate, build_q, certify_psd, certify_schur_recursion, shift_for_gamma_zero, GammaPolicy,
    ShiftVariant, PSD_TOL,
};
use mvpdp::graph_core::{tour_adjacency, tour_cost, Permutation, SolutionFile};
use mvpdp::instance::{graph_costs, random_instance, Demand, Edge, Instance, Location, Vehicle};
use mvpdp::model::assemble;
use mvpdp::oracle::{enumerate_optimum, routes_cost, validate_tour};
use mvpdp::plot::render_svg;
use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn artifacts() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("artifact dir");
    dir
}

fn random_perm(v: usize, rng: &mut ChaCha8Rng) -> Permutation {
    let mut o: Vec<usize> = (0..v).collect();
    o.shuffle(rng);
    Permutation::from_order(o).unwrap()
}

fn oracle_exactness() -> Outcome {
    let start = Instant::now();
    let mut matched = 0;
    let mut total = 0;
    for t in 0..50u64 {
        let n = 2 + (t % 4) as usize;
        let k = 1 + ((t / 4) % 2) as usize;
        let q = 1 + ((t / 8) % 3) as u32;
        let inst = random_instance(n, k, q, 1000 + t).map_err(|e| e.to_string())?;
        let opt = enumerate_optimum(&inst).map_err(|e| e.to_string())?;
        let model = assemble(&inst, GammaPolicy::Auto).map_err(|e| e.to_string())?;
        let out = solve(
            &model,
            &SolveOptions {
                gap_target: 0.0,
                seed: t,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        total += 1;
        match out.stats.incumbent {
            Some(c) if (c - opt.cost).abs() <= 1e-6 => matched += 1,
            other => eprintln!(
                "  mismatch n={n} k={k} q={q} seed={}: solver {other:?} oracle {}",
                1000 + t,
                opt.cost
            ),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(matched == total && secs < 900.0, || {
        format!("{matched}/{total} matched in {secs:.1} s")
    })?;
    Ok(format!("{matched}/{total} matched in {secs:.1} s"))
}

fn multi_vehicle_classes() -> Outcome {
    let dir = artifacts();
    let mut lines = Vec::new();
    for (idx, (n, k, q)) in [(4, 2, 3), (5, 2, 2), (5, 2, 5), (6, 4, 2)]
        .into_iter()
        .enumerate()
    {
        let inst = random_instance(n, k, q, 500 + idx as u64).map_err(|e| e.to_string())?;
        let model = assemble(&inst, GammaPolicy::Auto).map_err(|e| e.to_string())?;
        let opts = SolveOptions {
            time_limit: Duration::from_secs(600),
            ..Default::default()
        };
        let out = solve(&model, &opts).map_err(|e| e.to_string())?;
        let sol = out
            .solution
            .as_ref()
            .ok_or(format!("({n},{k},{q}): no solution"))?;
        ensure(
            matches!(
                out.stats.termination,
                Termination::GapReached | Termination::Optimal
            ) && out.stats.gap <= 0.035,
            || {
                format!(
                    "({n},{k},{q}): {:?} gap {}",
                    out.stats.termination, out.stats.gap
                )
            },
        )?;
        validate_tour(&inst, &sol.routes)
            .map_err(|v| format!("({n},{k},{q}): {} violations", v.len()))?;
        let svg = render_svg(&inst, &sol.routes).map_err(|e| e.to_string())?;
        ensure(
            svg.matches(r#"class="route""#).count() == k && svg.matches("<line ").count() == n,
            || format!("({n},{k},{q}): plot has wrong route/chord count"),
        )?;
        let path = dir.join(format!("class_n{n}_k{k}_q{q}.svg"));
        std::fs::write(&path, svg).map_err(|e| e.to_string())?;
        lines.push(format!(
            "({n},{k},{q}) gap {:.4} in {:.2} s",
            out.stats.gap, out.stats.wall_time_s
        ));
    }
    Ok(format!("{}; plots in {}", lines.join(", "), dir.display()))
}

fn convexity_certificates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut psd_pass, mut shift_pass, mut agree) = (0, 0, 0);
    for _ in 0..100 {
        let v = rng.gen_range(3..=20);
        let b = DMatrix::from_fn(v, v, |_, _| rng.gen_range(-1.0..1.0));
        let c = b.transpose() * &b;
        let c = (&c + c.transpose()) * 0.5;
        let q = build_q(&c, 1.01).map_err(|e| e.to_string())?;
        let psd = certify_psd(&q.to_dense().map_err(|e| e.to_string())?, PSD_TOL)
            .map_err(|e| e.to_string())?;
        if psd.passed() {
            psd_pass += 1;
        }
        let schur = certify_schur_recursion(&c, 1.01, v, PSD_TOL).map_err(|e| e.to_string())?;
        if schur.passed == psd.passed() {
            agree += 1;
        }
    }
    for _ in 0..100 {
        let v = rng.gen_range(2..=20);
        let c = DMatrix::from_fn(v, v, |_, _| rng.gen_range(-5.0..5.0));
        let q = build_q(&c, 0.0)
            .and_then(|q| q.with_shift(shift_for_gamma_zero(&c, ShiftVariant::Averaged)))
            .map_err(|e| e.to_string())?;
        let cert = certify_psd(&q.to_dense().map_err(|e| e.to_string())?, PSD_TOL)
            .map_err(|e| e.to_string())?;
        if cert.passed() {
            shift_pass += 1;
        }
    }
    let summary = format!("(a) {psd_pass}/100 (b) {shift_pass}/100 (c) {agree}/100");
    ensure(psd_pass == 100 && shift_pass == 100 && agree == 100, || {
        summary.clone()
    })?;
    Ok(summary)
}

fn objective_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = 0;
    for t in 0..200 {
        let v = rng.gen_range(2..=10);
        let c = DMatrix::from_fn(v, v, |_, _| rng.gen_range(-3.0..3.0));
        let gamma = if t % 2 == 0 {
            0.0
        } else {
            rng.gen_range(0.0..3.0)
        };
        let mut q = build_q(&c, gamma).map_err(|e| e.to_string())?;
        if t % 3 == 0 {
            q = q
                .with_shift(shift_for_gamma_zero(&c, ShiftVariant::Averaged))
                .map_err(|e| e.to_string())?;
        }
        let perm = random_perm(v, &mut rng);
        let x = perm.vectorize();
        let xm = perm.matrix();
        let a0 = DMatrix::from_fn(v, v, |i, j| if (i + 1) % v == j { 1.0 } else { 0.0 });
        let target = (c.transpose() * xm.transpose() * a0 * &xm).trace();
        let dx: f64 = q.d().iter().zip(&x).map(|(a, b)| a * b).sum();
        let value = q.quad_form(&x) - dx - gamma * c.trace();
        if (value - target).abs() <= 1e-9 * (1.0 + value.abs()) {
            ok += 1;
        }
    }
    ensure(ok == 200, || format!("{ok}/200"))?;
    Ok(format!("{ok}/200"))
}

fn diagonal_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut exact, mut float) = (0, 0);
    for _ in 0..100 {
        let v = rng.gen_range(2..=12);
        let mut r = || {
            Ratio::new(
                rng.gen_range(-1000i64..=1000),
                *[1i64, 2, 3, 4, 6, 8, 12].choose(&mut rng).unwrap(),
            )
        };
        let c: Vec<Vec<Ratio<i64>>> = (0..v).map(|_| (0..v).map(|_| r()).collect()).collect();
        let d: Vec<Ratio<i64>> = (0..v).map(|_| r()).collect();
        let perm = random_perm(v, &mut rng);
        let succ = perm.successors();
        let zero = Ratio::from_integer(0);
        let one = Ratio::from_integer(1);
        let a: Vec<Vec<Ratio<i64>>> = (0..v)
            .map(|i| {
                (0..v)
                    .map(|j| if succ[i] == j { one } else { zero })
                    .collect()
            })
            .collect();
        let trace = |m: &dyn Fn(usize, usize) -> Ratio<i64>| -> Ratio<i64> {
            (0..v)
                .flat_map(|i| (0..v).map(move |j| (i, j)))
                .map(|(i, j)| m(i, j) * a[i][j])
                .sum()
        };
        let plain = trace(&|i, j| c[i][j]);
        let shifted = trace(&|i, j| c[i][j] + if i == j { d[i] } else { zero });
        if plain == shifted {
            exact += 1;
        }
        let to_f = |x: &Ratio<i64>| *x.numer() as f64 / *x.denom() as f64;
        let cf = DMatrix::from_fn(v, v, |i, j| to_f(&c[i][j]));
        let df = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v, d.iter().map(to_f)));
        let a = tour_adjacency(&perm);
        let lhs = tour_cost(&(&cf + df), &a).map_err(|e| e.to_string())?;
        let rhs = tour_cost(&cf, &a).map_err(|e| e.to_string())?;
        if (lhs - rhs).abs() <= 1e-12 {
            float += 1;
        }
    }
    ensure(exact == 100 && float == 100, || {
        format!("rational {exact}/100, float {float}/100")
    })?;
    Ok(format!("rational {exact}/100, float {float}/100"))
}

fn beta_sequence() -> Outcome {
    let mut parts = Vec::new();
    for b0 in [1.001, 1.01, 1.1, 2.0] {
        let s = beta_iterate(b0, 100_000).map_err(|e| e.to_string())?;
        ensure(
            s.bound_holds && s.margin_positive && s.min_margin > 0.0,
            || {
                format!(
                    "beta0={b0}: bound {} margin {}",
                    s.bound_holds, s.min_margin
                )
            },
        )?;
        ensure(s.values.iter().all(|&b| b >= s.lower_bound), || {
            format!("beta0={b0}: iterate below bound")
        })?;
        parts.push(format!("{b0}: min margin {:.3e}", s.min_margin));
    }
    let s = beta_iterate(1.0, 1_000_000).map_err(|e| e.to_string())?;
    ensure(
        s.margin_positive && s.values.iter().all(|&b| b > 0.0),
        || format!("beta0=1: margin {}", s.min_margin),
    )?;
    parts.push(format!("1 (10^6 steps): min margin {:.3e}", s.min_margin));
    Ok(parts.join(", "))
}

fn constraint_scaling() -> Outcome {
    let count = |n: usize| -> Result<usize, String> {
        let inst = random_instance(n, 2, 2, 7).map_err(|e| e.to_string())?;
        Ok(assemble(&inst, GammaPolicy::Auto)
            .map_err(|e| e.to_string())?
            .counts()
            .generalized_order())
    };
    let (c10, c20) = (count(10)?, count(20)?);
    let ratio = c20 as f64 / c10 as f64;
    let summary = format!("count(10) = {c10}, count(20) = {c20}, ratio {ratio:.3}");
    ensure(ratio <= 2.2, || summary.clone())?;
    Ok(summary)
}

fn run_bin(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mvpdp"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    ))
}

fn check_trace(path: &Path, reported: Option<f64>) -> Result<usize, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let events: Vec<TraceEvent> = text
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(!events.is_empty(), || "empty trace".into())?;
    for w in events.windows(2) {
        ensure(w[1].bound >= w[0].bound, || {
            format!("bound decreased: {} -> {}", w[0].bound, w[1].bound)
        })?;
        if let (Some(a), Some(b)) = (w[0].incumbent, w[1].incumbent) {
            ensure(b <= a, || format!("incumbent increased: {a} -> {b}"))?;
        }
        ensure(w[0].incumbent.is_none() || w[1].incumbent.is_some(), || {
            "incumbent disappeared".into()
        })?;
    }
    for e in &events {
        if let Some(inc) = e.incumbent {
            let gap = (inc - e.bound) / e.bound.abs().max(1e-9);
            ensure(e.gap.map(f64::to_bits) == Some(gap.to_bits()), || {
                format!("trace gap {:?} vs {gap}", e.gap)
            })?;
        }
    }
    if let Some(reported) = reported {
        let last = events.last().unwrap();
        let gap = mip_gap(last.incumbent, last.bound);
        ensure(gap.to_bits() == reported.to_bits(), || {
            format!("reported gap {reported} vs trace {gap}")
        })?;
    }
    Ok(events.len())
}

fn gap_accounting() -> Outcome {
    let dir = artifacts();
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (inst, guess, sol, trace) = (
        p("timeout.json"),
        p("timeout_guess.json"),
        p("timeout_sol.json"),
        p("timeout.jsonl"),
    );
    let (code, _) = run_bin(&[
        "gen", "--n", "10", "--k", "3", "--q", "2", "--seed", "11", "--out", &inst,
    ])?;
    ensure(code == 0, || format!("gen exit {code}"))?;
    let (code, _) = run_bin(&["solve", &inst, "--gap", "0.9", "--out", &guess])?;
    ensure(code == 0, || format!("guess run exit {code}"))?;

    let mut summary = Vec::new();
    for (limit, use_guess) in [("0.001", true), ("0.5", false)] {
        let mut args = vec![
            "solve",
            &inst,
            "--gap",
            "0",
            "--time-limit",
            limit,
            "--out",
            &sol,
            "--trace",
            &trace,
        ];
        if use_guess {
            args.extend(["--guess", &guess]);
        }
        let (code, stdout) = run_bin(&args)?;
        ensure(code == 2, || {
            format!("time limit {limit}: exit {code}, stdout {stdout}")
        })?;
        let file = SolutionFile::load(&sol).map_err(|e| e.to_string())?;
        ensure(
            file.status.as_deref() == Some("partial") && !file.routes.is_empty(),
            || format!("time limit {limit}: solution file lacks incumbent"),
        )?;
        let (code, _) = run_bin(&["validate", &inst, &sol])?;
        ensure(code == 0, || {
            format!("time limit {limit}: incumbent does not validate")
        })?;
        let events = check_trace(Path::new(&trace), Some(file.gap))?;
        summary.push(format!(
            "limit {limit} s: exit 2, {events} trace events, gap {:.4}",
            file.gap
        ));
    }
    Ok(summary.join("; "))
}

fn floyd_warshall(v: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; v]; v];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, w) in edges {
        d[a][b] = d[a][b].min(w);
        d[b][a] = d[b][a].min(w);
    }
    for m in 0..v {
        for i in 0..v {
            for j in 0..v {
                if d[i][m] + d[m][j] < d[i][j] {
                    d[i][j] = d[i][m] + d[m][j];
                }
            }
        }
    }
    d
}

fn graph_cost_path() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = 20;
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    for b in 1..g {
        let a = rng.gen_range(0..b);
        raw.push((a, b, rng.gen_range(1..100) as f64 / 8.0));
        seen.insert((a, b));
    }
    while raw.len() < 45 {
        let (a, b) = (rng.gen_range(0..g), rng.gen_range(0..g));
        if a < b && seen.insert((a, b)) {
            raw.push((a, b, rng.gen_range(1..100) as f64 / 8.0));
        }
    }
    let name = |i: usize| format!("g{i}");
    let edges: Vec<Edge> = raw
        .iter()
        .map(|&(a, b, w)| Edge {
            from: name(a),
            to: name(b),
            weight: w,
        })
        .collect();
    let fw = floyd_warshall(g, &raw);

    let names: Vec<String> = (0..g).map(name).collect();
    let mut map: Vec<Option<&str>> = vec![None];
    map.extend(names.iter().map(|s| Some(s.as_str())));
    let costs = graph_costs(&edges, &map).map_err(|e| e.to_string())?;
    for i in 0..g {
        for j in 0..g {
            ensure(costs.get(i + 1, j + 1) == fw[i][j], || {
                format!(
                    "cost({i},{j}) = {} vs {}",
                    costs.get(i + 1, j + 1),
                    fw[i][j]
                )
            })?;
        }
    }

    let mut node = || Location::Node(name(rng.gen_range(0..g)));
    let vehicles = (0..2)
        .map(|_| Vehicle {
            origin: node(),
            destination: node(),
        })
        .collect();
    let demands = (0..4)
        .map(|_| Demand {
            pickup: node(),
            delivery: node(),
            group: 1,
        })
        .collect();
    let inst = Instance::on_graph(2, vehicles, demands, &edges).map_err(|e| e.to_string())?;
    let model = assemble(&inst, GammaPolicy::Auto).map_err(|e| e.to_string())?;
    let out = solve(&model, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let sol = out.solution.ok_or("no solution on the graph instance")?;
    validate_tour(&inst, &sol.routes).map_err(|v| format!("{} violations", v.len()))?;
    let cost = routes_cost(&inst, &sol.routes);
    ensure((cost - sol.objective).abs() <= 1e-9 * (1.0 + cost), || {
        format!("objective {} vs routes {cost}", sol.objective)
    })?;
    let opt = enumerate_optimum(&inst).map_err(|e| e.to_string())?;
    ensure(sol.objective <= opt.cost * 1.035 + 1e-9, || {
        format!("objective {} vs optimum {}", sol.objective, opt.cost)
    })?;
    Ok(format!(
        "{}x{} matrix matches; instance solved at {:.3} (optimum {:.3})",
        g, g, sol.objective, opt.cost
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 oracle exactness", oracle_exactness),
        ("2 multi-vehicle classes", multi_vehicle_classes),
        ("3 convexity certificates", convexity_certificates),
        ("4 objective identity", objective_identity),
        ("5 diagonal invariance", diagonal_invariance),
        ("6 beta sequence", beta_sequence),
        ("7 constraint-count scaling", constraint_scaling),
        ("8 gap accounting", gap_accounting),
        ("9 graph-cost path", graph_cost_path),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
