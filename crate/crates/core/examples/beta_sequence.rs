//! Runs the beta recursion for a few starting values and prints the lower
//! bound, the closest iterate and the series margin.
//!
//! cargo run --release --example beta_sequence -- [steps]

use mvpdp::convexify::beta_iterate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map_or(Ok(100_000), |s| s.parse())?;
    println!("| beta0 | lower bound | last iterate | bound holds | min margin |");
    println!("|---|---|---|---|---|");
    for b0 in [1.0, 1.001, 1.01, 1.1, 2.0] {
        let s = beta_iterate(b0, steps)?;
        println!(
            "| {b0} | {:.12} | {:.12} | {} | {:.6e} |",
            s.lower_bound,
            s.values.last().copied().unwrap_or(b0),
            s.bound_holds,
            s.min_margin
        );
    }
    Ok(())
}
