//! Prints a success/partial/failure table over seeded random instances.
//!
//! cargo run --release --example bench_table -- [trials] [time limit s]

use std::time::Duration;

use mvpdp::bench::{run_bench, BenchConfig};
use mvpdp::bnb::SolveOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let trials: usize = args.first().map_or(Ok(5), |s| s.parse())?;
    let limit: f64 = args.get(1).map_or(Ok(10.0), |s| s.parse())?;
    let cfg = BenchConfig {
        sizes: vec![4, 5, 6, 7],
        trials,
        solve: SolveOptions {
            time_limit: Duration::from_secs_f64(limit),
            ..Default::default()
        },
        ..Default::default()
    };
    print!("{}", run_bench(&cfg)?.markdown());
    Ok(())
}
