//! Solves a seeded instance and writes its route plot as SVG.
//!
//! cargo run --release --example plot_solution -- [out.svg] [n] [k] [q] [seed]

use mvpdp::bnb::{solve, SolveOptions};
use mvpdp::convexify::GammaPolicy;
use mvpdp::instance::random_instance;
use mvpdp::model::assemble;
use mvpdp::plot::render_svg;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let out_path = arg(0, "solution.svg");
    let instance = random_instance(
        arg(1, "6").parse()?,
        arg(2, "2").parse()?,
        arg(3, "2").parse()?,
        arg(4, "3").parse()?,
    )?;
    let model = assemble(&instance, GammaPolicy::Auto)?;
    let out = solve(&model, &SolveOptions::default())?;
    let sol = out.solution.ok_or("no feasible tour")?;
    std::fs::write(&out_path, render_svg(&instance, &sol.routes)?)?;
    println!(
        "cost {:.6} (gap {:.4}) plotted to {out_path}",
        sol.objective, out.stats.gap
    );
    Ok(())
}
