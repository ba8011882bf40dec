//! Seeded success/partial/failure tables over random instances.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::bnb::{solve, RunClass, SolveOptions};
use crate::convexify::GammaPolicy;
use crate::error::Result;
use crate::instance::random_instance;
use crate::model::assemble;
use crate::oracle::{enumerate_optimum_with, OracleLimits};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub k: usize,
    pub q: u32,
    pub trials: usize,
    pub seed: u64,
    pub gamma: GammaPolicy,
    pub solve: SolveOptions,
    /// Compare against the enumeration oracle where it applies.
    pub check_oracle: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![4, 5],
            k: 2,
            q: 2,
            trials: 5,
            seed: 0,
            gamma: GammaPolicy::Auto,
            solve: SolveOptions::default(),
            check_oracle: true,
        }
    }
}

/// Deterministic per-size counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub q: u32,
    pub trials: usize,
    pub success: usize,
    pub partial: usize,
    pub failure: usize,
    /// Trials compared with the oracle and how many agreed to 1e-6.
    pub oracle_checked: usize,
    pub oracle_matched: usize,
    pub median_nodes: u64,
    pub max_nodes: u64,
}

impl BenchRow {
    pub fn success_rate(&self) -> f64 {
        rate(self.success, self.trials)
    }
}

fn rate(x: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        x as f64 / total as f64
    }
}

/// Wall-clock quantiles; the only part of a report that varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub n: usize,
    pub median_s: f64,
    pub p90_s: f64,
    pub max_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub gap_target: f64,
    pub time_limit_s: f64,
    pub rows: Vec<BenchRow>,
    pub timing: Vec<Timing>,
}

/// Seed of trial `t` at size `n`.
pub fn trial_seed(base: u64, n: usize, t: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add((n as u64) << 20)
        .wrapping_add(t as u64)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let ix = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[ix]
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    if cfg.trials > 0 {
        for &n in &cfg.sizes {
            let mut row = BenchRow {
                n,
                k: cfg.k,
                q: cfg.q,
                trials: cfg.trials,
                success: 0,
                partial: 0,
                failure: 0,
                oracle_checked: 0,
                oracle_matched: 0,
                median_nodes: 0,
                max_nodes: 0,
            };
            let mut times = Vec::new();
            let mut nodes = Vec::new();
            for t in 0..cfg.trials {
                let seed = trial_seed(cfg.seed, n, t);
                let inst = random_instance(n, cfg.k, cfg.q, seed)?;
                let model = assemble(&inst, cfg.gamma)?;
                let opts = SolveOptions {
                    seed,
                    ..cfg.solve.clone()
                };
                let out = solve(&model, &opts)?;
                match out.class() {
                    RunClass::Success => row.success += 1,
                    RunClass::Partial => row.partial += 1,
                    RunClass::Failure => row.failure += 1,
                }
                times.push(out.stats.wall_time_s);
                nodes.push(out.stats.nodes);
                if cfg.check_oracle {
                    if let Ok(opt) = enumerate_optimum_with(&inst, OracleLimits::default()) {
                        row.oracle_checked += 1;
                        let found = out.stats.incumbent.unwrap_or(f64::INFINITY);
                        // with a positive gap target the incumbent only has to
                        // sit inside the certified gap
                        let allowed = 1e-6 + cfg.solve.gap_target * opt.cost.abs();
                        if (found - opt.cost).abs() <= allowed {
                            row.oracle_matched += 1;
                        }
                    }
                }
            }
            nodes.sort_unstable();
            row.median_nodes = nodes[(nodes.len() - 1) / 2];
            row.max_nodes = *nodes.last().unwrap();
            times.sort_by(f64::total_cmp);
            timing.push(Timing {
                n,
                median_s: quantile(&times, 0.5),
                p90_s: quantile(&times, 0.9),
                max_s: *times.last().unwrap(),
            });
            rows.push(row);
        }
    }
    Ok(BenchReport {
        seed: cfg.seed,
        gap_target: cfg.solve.gap_target,
        time_limit_s: cfg.solve.time_limit.as_secs_f64(),
        rows,
        timing,
    })
}

impl BenchReport {
    /// Markdown table with one row per size.
    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "gap target {:.3}, time limit {} s, seed {} (timings are local wall-clock)\n",
            self.gap_target, self.time_limit_s, self.seed
        );
        let _ = writeln!(s, "| n | k | q | trials | success | partial | failure | oracle | median nodes | median s | p90 s | max s |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|");
        for (r, t) in self.rows.iter().zip(&self.timing) {
            let oracle = if r.oracle_checked == 0 {
                "-".to_string()
            } else {
                format!("{}/{}", r.oracle_matched, r.oracle_checked)
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:.0}% | {:.0}% | {:.0}% | {} | {} | {:.3} | {:.3} | {:.3} |",
                r.n,
                r.k,
                r.q,
                r.trials,
                100.0 * r.success_rate(),
                100.0 * rate(r.partial, r.trials),
                100.0 * rate(r.failure, r.trials),
                oracle,
                r.median_nodes,
                t.median_s,
                t.p90_s,
                t.max_s
            );
        }
        s
    }
}
