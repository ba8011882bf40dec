//! Subcommand implementations behind the `mvpdp` binary. Each returns the
//! process exit code; errors map to [`EXIT_ERROR`] in the binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{run_bench, BenchConfig};
use crate::bnb::{solve, Branching, RelaxationPolicy, RunClass, SolveOptions};
use crate::convexify::{beta_iterate, GammaPolicy, Route};
use crate::error::{Error, Result};
use crate::graph_core::{
    decode_routes, describe_route, order_cost, tour_from_routes, SolutionFile,
};
use crate::instance::{
    ingest_demands, random_instance, read_edge_list, Demand, Instance, Location, Vehicle,
};
use crate::model::assemble;
use crate::oracle::enumerate_optimum;
use crate::plot::render_svg;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

pub fn exit_code(class: RunClass) -> i32 {
    match class {
        RunClass::Success => EXIT_SUCCESS,
        RunClass::Partial => EXIT_PARTIAL,
        RunClass::Failure => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Subcommand {
    Gen(GenArgs),
    Solve,
    /// Check a solution file against the instance.
    Validate {
        solution: PathBuf,
    },
    Oracle,
    Certify(CertifyArgs),
    Bench(BenchArgs),
    Plot {
        solution: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenArgs {
    pub n: usize,
    pub k: usize,
    pub q: u32,
    /// Demand CSV; overrides `n`.
    pub demands: Option<PathBuf>,
    /// Edge list; depots and demands are placed on random graph nodes.
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertifyArgs {
    /// Also write the model in LP format.
    pub lp: Option<PathBuf>,
    /// Run the β recursion from this start instead of certifying a model.
    pub beta0: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchArgs {
    pub sizes: Vec<usize>,
    pub k: usize,
    pub q: u32,
    pub trials: usize,
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub instance: Option<PathBuf>,
    pub gap_target: f64,
    pub time_limit_s: f64,
    pub gamma: GammaPolicy,
    pub seed: u64,
    pub threads: usize,
    /// Solution JSON, generated instance, or bench report.
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Solution file whose tour seeds the incumbent.
    pub guess: Option<PathBuf>,
    pub relaxation: RelaxationPolicy,
    pub branching: Branching,
    /// Seconds between progress log lines.
    pub log_interval_s: f64,
}

impl RunConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        Self {
            subcommand,
            instance: None,
            gap_target: 0.035,
            time_limit_s: 7200.0,
            gamma: GammaPolicy::Auto,
            seed: 0,
            threads: 1,
            out: None,
            plot: None,
            trace: None,
            guess: None,
            relaxation: RelaxationPolicy::Off,
            branching: Branching::Placement,
            log_interval_s: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gap_target) {
            return Err(Error::invalid(format!(
                "--gap must lie in [0, 1], got {}",
                self.gap_target
            )));
        }
        if !(self.time_limit_s > 0.0) || !self.time_limit_s.is_finite() {
            return Err(Error::invalid(format!(
                "--time-limit must be positive, got {}",
                self.time_limit_s
            )));
        }
        if self.threads == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        Ok(())
    }

    fn instance_path(&self) -> Result<&Path> {
        self.instance
            .as_deref()
            .ok_or_else(|| Error::invalid("an instance file is required"))
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            gap_target: self.gap_target,
            time_limit: Duration::from_secs_f64(self.time_limit_s),
            seed: self.seed,
            threads: self.threads,
            relaxation: self.relaxation,
            branching: self.branching,
            log_interval: Duration::from_secs_f64(self.log_interval_s.max(0.0)),
            ..Default::default()
        }
    }
}

/// Dispatches to the subcommand.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    match &cfg.subcommand {
        Subcommand::Gen(args) => cmd_gen(cfg, args),
        Subcommand::Solve => cmd_solve(cfg),
        Subcommand::Validate { solution } => cmd_validate(cfg, solution),
        Subcommand::Oracle => cmd_oracle(cfg),
        Subcommand::Certify(args) => cmd_certify(cfg, args),
        Subcommand::Bench(args) => cmd_bench(cfg, args),
        Subcommand::Plot { solution } => cmd_plot(cfg, solution),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads an instance; an instance that cannot have a feasible tour is
/// reported as `Ok(Err(reason))`.
fn load_instance(path: &Path) -> Result<std::result::Result<Instance, String>> {
    match Instance::load(path) {
        Ok(inst) => Ok(Ok(inst)),
        Err(Error::InfeasibleInstance(msg)) => Ok(Err(msg)),
        Err(e) => Err(e),
    }
}

pub fn cmd_gen(cfg: &RunConfig, args: &GenArgs) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let instance = match (&args.demands, &args.graph) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid("--demands and --graph cannot be combined"))
        }
        (Some(csv), None) => {
            let file = File::open(csv).map_err(|e| Error::io(csv, e))?;
            let demands = ingest_demands(file)?;
            let mut pt = || Location::Point([rng.gen::<f64>(), rng.gen::<f64>()]);
            let vehicles = (0..args.k)
                .map(|_| Vehicle {
                    origin: pt(),
                    destination: pt(),
                })
                .collect();
            Instance::euclidean(args.q, vehicles, demands)?
        }
        (None, Some(graph)) => {
            let file = File::open(graph).map_err(|e| Error::io(graph, e))?;
            let edges = read_edge_list(file)?;
            let mut ids: Vec<String> = Vec::new();
            for e in &edges {
                for id in [&e.from, &e.to] {
                    if !ids.contains(id) {
                        ids.push(id.clone());
                    }
                }
            }
            if ids.is_empty() {
                return Err(Error::invalid("edge list has no nodes"));
            }
            let mut node = || Location::Node(ids.choose(&mut rng).expect("non-empty").clone());
            let vehicles = (0..args.k)
                .map(|_| Vehicle {
                    origin: node(),
                    destination: node(),
                })
                .collect();
            let demands = (0..args.n)
                .map(|_| Demand {
                    pickup: node(),
                    delivery: node(),
                    group: 1,
                })
                .collect();
            let path = std::fs::canonicalize(graph).map_err(|e| Error::io(graph, e))?;
            Instance::on_graph(args.q, vehicles, demands, &edges)?.with_graph_file(path)
        }
        (None, None) => random_instance(args.n, args.k, args.q, cfg.seed)?,
    };
    match &cfg.out {
        Some(path) => instance.save(path)?,
        None => println!("{}", instance.to_json()?),
    }
    Ok(EXIT_SUCCESS)
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let instance = match load_instance(cfg.instance_path()?)? {
        Ok(inst) => inst,
        Err(reason) => {
            println!("status=failure reason=infeasible: {reason}");
            return Ok(EXIT_FAILURE);
        }
    };
    let model = assemble(&instance, cfg.gamma)?;
    log::info!(
        "model: {} variables, {} rows ({}), gamma = {}",
        model.num_vars(),
        model.constraints().len(),
        model.counts(),
        model.gamma()
    );
    let mut opts = cfg.solve_options();
    if let Some(path) = &cfg.guess {
        let file = SolutionFile::load(path)?;
        let routes = file.node_routes()?;
        opts.initial_guess = Some(
            tour_from_routes(instance.layout(), &routes)?
                .order()
                .to_vec(),
        );
    }
    let out = solve(&model, &opts)?;

    if let Some(path) = &cfg.trace {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        out.write_trace(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
    }
    let class = out.class();
    let stats = &out.stats;
    println!(
        "status={} termination={} objective={} bound={:.9} gap={} nodes={} time={:.3}s",
        serde_json::to_value(class)?.as_str().unwrap_or("?"),
        serde_json::to_value(stats.termination)?
            .as_str()
            .unwrap_or("?"),
        stats.incumbent.map_or("none".into(), |v| format!("{v:.9}")),
        stats.bound,
        if stats.gap.is_finite() {
            format!("{:.6}", stats.gap)
        } else {
            "inf".into()
        },
        stats.nodes,
        stats.wall_time_s
    );
    if let Some(sol) = &out.solution {
        for (j, r) in sol.routes.iter().enumerate() {
            println!(
                "vehicle {}: {}",
                j + 1,
                describe_route(instance.layout(), r)
            );
        }
        if let (Some(path), Some(file)) = (&cfg.out, out.solution_file()) {
            file.save(path)?;
        }
        if let Some(path) = &cfg.plot {
            write_text(path, &render_svg(&instance, &sol.routes)?)?;
        }
    } else if stats.termination == crate::bnb::Termination::Infeasible {
        println!("reason=infeasible");
    }
    Ok(exit_code(class))
}

pub fn cmd_validate(cfg: &RunConfig, solution: &Path) -> Result<i32> {
    let instance = Instance::load(cfg.instance_path()?)?;
    let file = SolutionFile::load(solution)?;
    let routes = file.node_routes()?;
    let checked = tour_from_routes(instance.layout(), &routes).and_then(|tour| {
        let decoded = decode_routes(&instance, &tour)?;
        Ok((tour, decoded))
    });
    let (tour, _) = match checked {
        Ok(x) => x,
        Err(Error::Infeasible(violations)) => {
            println!("infeasible: {} violation(s)", violations.len());
            for v in violations {
                println!("  {}: {v}", v.family());
            }
            return Ok(EXIT_FAILURE);
        }
        Err(e) => {
            println!("infeasible: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let sigma: Vec<usize> = tour.order().iter().map(|&a| a + 1).collect();
    if !file.sigma.is_empty() && file.sigma != sigma {
        println!("infeasible: sigma does not match the routes");
        return Ok(EXIT_FAILURE);
    }
    let cost = order_cost(&instance.routing_costs(), &tour);
    if (cost - file.objective).abs() > 1e-6 * cost.abs().max(1.0) {
        println!(
            "infeasible: stated objective {} differs from route cost {cost}",
            file.objective
        );
        return Ok(EXIT_FAILURE);
    }
    println!("valid: objective {cost:.9}");
    Ok(EXIT_SUCCESS)
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<i32> {
    let instance = match load_instance(cfg.instance_path()?)? {
        Ok(inst) => inst,
        Err(reason) => {
            println!("infeasible: {reason}");
            return Ok(EXIT_FAILURE);
        }
    };
    let start = std::time::Instant::now();
    let opt = enumerate_optimum(&instance)?;
    println!(
        "optimum={:.9} feasible_tours={}",
        opt.cost, opt.feasible_tours
    );
    for (j, r) in opt.routes.iter().enumerate() {
        println!(
            "vehicle {}: {}",
            j + 1,
            describe_route(instance.layout(), r)
        );
    }
    if let Some(path) = &cfg.out {
        let tour = tour_from_routes(instance.layout(), &opt.routes)?;
        let mut file = SolutionFile::new(
            &opt.routes,
            &tour,
            opt.cost,
            0.0,
            start.elapsed().as_secs_f64(),
        );
        file.bound = Some(opt.cost);
        file.status = Some("success".into());
        file.save(path)?;
    }
    Ok(EXIT_SUCCESS)
}

pub fn cmd_certify(cfg: &RunConfig, args: &CertifyArgs) -> Result<i32> {
    if let Some(beta0) = args.beta0 {
        let seq = beta_iterate(beta0, args.steps.max(1))?;
        println!("{}", serde_json::to_string_pretty(&seq)?);
        let ok = seq.margin_positive && (seq.bound_holds || seq.lower_bound.is_nan());
        return Ok(if ok { EXIT_SUCCESS } else { EXIT_FAILURE });
    }
    let instance = Instance::load(cfg.instance_path()?)?;
    let model = match assemble(&instance, cfg.gamma) {
        Ok(m) => m,
        Err(Error::Certification(msg)) => {
            println!("not certified: {msg}");
            return Ok(EXIT_FAILURE);
        }
        Err(e) => return Err(e),
    };
    // the beta series only applies to the gamma route
    let beta = match model.route() {
        Route::Gamma => Some(beta_iterate(model.gamma(), args.steps.max(1))?),
        Route::Shift => None,
    };
    let report = serde_json::json!({
        "route": model.route(),
        "gamma": model.gamma(),
        "constant": model.constant(),
        "certificate": model.certificate(),
        "beta_margin": beta.as_ref().map(|b| b.min_margin),
        "beta_margin_positive": beta.as_ref().map(|b| b.margin_positive),
        "variables": model.num_vars(),
        "rows": model.constraints().len(),
        "row_families": model.counts().to_string(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(path) = &args.lp {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        model
            .write_lp(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(EXIT_SUCCESS)
}

pub fn cmd_bench(cfg: &RunConfig, args: &BenchArgs) -> Result<i32> {
    let bench = BenchConfig {
        sizes: args.sizes.clone(),
        k: args.k,
        q: args.q,
        trials: args.trials,
        seed: cfg.seed,
        gamma: cfg.gamma,
        solve: cfg.solve_options(),
        check_oracle: true,
    };
    let report = run_bench(&bench)?;
    print!("{}", report.markdown());
    if let Some(path) = &cfg.out {
        write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(EXIT_SUCCESS)
}

pub fn cmd_plot(cfg: &RunConfig, solution: &Path) -> Result<i32> {
    let instance = Instance::load(cfg.instance_path()?)?;
    let routes = SolutionFile::load(solution)?.node_routes()?;
    let svg = render_svg(&instance, &routes)?;
    match cfg.out.as_ref().or(cfg.plot.as_ref()) {
        Some(path) => write_text(path, &svg)?,
        None => print!("{svg}"),
    }
    Ok(EXIT_SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants() {
        let mut cfg = RunConfig::new(Subcommand::Solve);
        assert!(cfg.validate().is_ok());
        cfg.gap_target = 1.5;
        assert!(cfg.validate().is_err());
        cfg.gap_target = 0.0;
        cfg.time_limit_s = 0.0;
        assert!(cfg.validate().is_err());
        cfg.time_limit_s = 1.0;
        cfg.threads = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exit_codes_follow_the_taxonomy() {
        assert_eq!(exit_code(RunClass::Success), 0);
        assert_eq!(exit_code(RunClass::Partial), 2);
        assert_eq!(exit_code(RunClass::Failure), 3);
    }
}
