//! Solves a seeded random instance and prints the routes.
//!
//! cargo run --release --example solve_random -- [n] [k] [q] [seed] [gap]

use std::time::Duration;

use mvpdp::bnb::{solve, SolveOptions};
use mvpdp::convexify::GammaPolicy;
use mvpdp::graph_core::describe_route;
use mvpdp::instance::random_instance;
use mvpdp::model::assemble;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let n: usize = arg(0, "5").parse()?;
    let k: usize = arg(1, "2").parse()?;
    let q: u32 = arg(2, "2").parse()?;
    let seed: u64 = arg(3, "1").parse()?;
    let gap: f64 = arg(4, "0.035").parse()?;

    let instance = random_instance(n, k, q, seed)?;
    let model = assemble(&instance, GammaPolicy::Auto)?;
    let opts = SolveOptions {
        gap_target: gap,
        time_limit: Duration::from_secs(600),
        seed,
        ..Default::default()
    };
    let out = solve(&model, &opts)?;

    println!("n={n} k={k} q={q} seed={seed}");
    println!(
        "termination={:?} objective={:?} bound={:.6} gap={:.4} nodes={} time={:.2}s",
        out.stats.termination,
        out.stats.incumbent,
        out.stats.bound,
        out.stats.gap,
        out.stats.nodes,
        out.stats.wall_time_s
    );
    if let Some(sol) = &out.solution {
        for (j, r) in sol.routes.iter().enumerate() {
            println!(
                "vehicle {}: {}",
                j + 1,
                describe_route(instance.layout(), r)
            );
        }
    }
    Ok(())
}
