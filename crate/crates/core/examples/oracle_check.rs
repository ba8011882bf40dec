//! Cross-checks the branch-and-bound optimum against exhaustive enumeration
//! on a batch of small seeded instances.
//!
//! cargo run --release --example oracle_check -- [count]

use mvpdp::bnb::{solve, SolveOptions};
use mvpdp::convexify::GammaPolicy;
use mvpdp::instance::random_instance;
use mvpdp::model::assemble;
use mvpdp::oracle::enumerate_optimum;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: u64 = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let mut worst: f64 = 0.0;
    for seed in 0..count {
        let n = 2 + (seed % 4) as usize;
        let k = 1 + (seed % 2) as usize;
        let q = 1 + (seed % 3) as u32;
        let inst = random_instance(n, k, q, seed)?;
        let opt = enumerate_optimum(&inst)?;
        let model = assemble(&inst, GammaPolicy::Auto)?;
        let out = solve(
            &model,
            &SolveOptions {
                gap_target: 0.0,
                ..Default::default()
            },
        )?;
        let found = out.stats.incumbent.unwrap_or(f64::NAN);
        let diff = (found - opt.cost).abs();
        worst = worst.max(diff);
        println!(
            "seed {seed:>3} n={n} k={k} q={q}: solver {found:.9} oracle {:.9} ({} feasible tours, {} nodes)",
            opt.cost, opt.feasible_tours, out.stats.nodes
        );
    }
    println!("largest difference: {worst:.3e}");
    Ok(())
}
