//! Assembles the quadratic program for a tiny instance, prints its row
//! families and writes it in LP format to stdout.
//!
//! cargo run --release --example model_dump -- [n] [k] [q] > model.lp

use mvpdp::convexify::GammaPolicy;
use mvpdp::graph_core::tour_from_routes;
use mvpdp::instance::random_instance;
use mvpdp::model::assemble;
use mvpdp::oracle::enumerate_optimum;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let instance = random_instance(
        arg(0, "2").parse()?,
        arg(1, "1").parse()?,
        arg(2, "1").parse()?,
        0,
    )?;
    let model = assemble(&instance, GammaPolicy::Auto)?;
    eprintln!("{} variables; rows: {}", model.num_vars(), model.counts());
    eprintln!(
        "route {:?}, gamma {}, big-M {}",
        model.route(),
        model.gamma(),
        model.big_m()
    );

    // the enumerated optimum, lifted into the model's variables, satisfies every row
    let opt = enumerate_optimum(&instance)?;
    let tour = tour_from_routes(instance.layout(), &opt.routes)?;
    let x = model.lift(&tour, &opt.routes);
    eprintln!(
        "optimum {:.6}: model objective {:.6}, violated rows {}",
        opt.cost,
        model.objective(&x),
        model.violated_rows(&x, 1e-9).len()
    );
    model.write_lp(std::io::stdout().lock())?;
    Ok(())
}
