//! Branch-and-bound over the permutation and assignment binaries.
//!
//! Nodes are bounded by propagating the position domains and solving a
//! min-cost successor assignment over the remaining compatible arcs; the
//! convex relaxation can be added on top (see [`RelaxationPolicy`]). Node
//! selection is best-bound-first, diving depth-first after every incumbent
//! improvement.

mod assignment;
mod heuristic;
mod node;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_core::{Permutation, SolutionFile};
use crate::model::QpModel;
use crate::oracle::Routes;
use crate::qp_relax::{solve_relaxation, RelaxSettings, RelaxStatus, RelaxationProblem};

pub use assignment::min_cost_assignment;
pub use heuristic::{
    branch_select, incumbent_from_guess, insertion_heuristic, rounding_heuristic, INTEGRALITY_TOL,
};
pub use node::{Evaluation, SearchContext, SearchNode, MAX_NODES, MAX_VEHICLES};

/// A feasible tour with its routes and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub tour: Permutation,
    pub routes: Routes,
    pub objective: f64,
}

impl Solution {
    /// Full decision vector `(vec X, z)`.
    pub fn decision_vector(&self, model: &QpModel) -> Vec<f64> {
        model.lift(&self.tour, &self.routes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GapReached,
    TimeLimit,
    Optimal,
    Infeasible,
}

/// Three-way outcome of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunClass {
    /// Gap target met.
    Success,
    /// Feasible tour found, gap target not met.
    Partial,
    /// No feasible tour.
    Failure,
}

/// When the convex relaxation is solved in addition to the assignment bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelaxationPolicy {
    #[default]
    Off,
    Root,
    /// Nodes with at most this many free binaries.
    Nodes {
        max_free: usize,
    },
    Every,
}

impl FromStr for RelaxationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Self::Off),
            "root" => Ok(Self::Root),
            "every" => Ok(Self::Every),
            _ => s
                .strip_prefix("nodes:")
                .and_then(|m| m.parse().ok())
                .map(|max_free| Self::Nodes { max_free })
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "unknown relaxation policy '{s}' (off|root|every|nodes:<n>)"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    /// Fill the lowest open position, one child per candidate node.
    #[default]
    Placement,
    /// Split on the most fractional binary of the node's relaxation point;
    /// falls back to placement where no point is available.
    MostFractional,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub gap_target: f64,
    pub time_limit: Duration,
    pub seed: u64,
    /// Node sequence offered as the first incumbent.
    pub initial_guess: Option<Vec<usize>>,
    pub threads: usize,
    pub branching: Branching,
    pub relaxation: RelaxationPolicy,
    pub relax_settings: RelaxSettings,
    /// Restarts of the insertion heuristic before the search.
    pub heuristic_rounds: usize,
    pub log_interval: Duration,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap_target: 0.035,
            time_limit: Duration::from_secs(7200),
            seed: 0,
            initial_guess: None,
            threads: 1,
            branching: Branching::Placement,
            relaxation: RelaxationPolicy::Off,
            relax_settings: RelaxSettings::default(),
            heuristic_rounds: 16,
            log_interval: Duration::from_secs(5),
        }
    }
}

/// `(incumbent − bound) / max(|bound|, 1e−9)`; infinite without an
/// incumbent.
pub fn mip_gap(incumbent: Option<f64>, bound: f64) -> f64 {
    match incumbent {
        Some(inc) => (inc - bound) / bound.abs().max(1e-9),
        None => f64::INFINITY,
    }
}

/// One line of the machine-readable trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub nodes: u64,
    pub incumbent: Option<f64>,
    pub bound: f64,
    /// `None` while there is no incumbent.
    pub gap: Option<f64>,
}

impl TraceEvent {
    /// Gap recomputed from the logged incumbent and bound.
    pub fn recomputed_gap(&self) -> f64 {
        mip_gap(self.incumbent, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub incumbent: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub nodes: u64,
    pub relaxations: u64,
    pub wall_time_s: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Option<Solution>,
    pub stats: SolveStats,
    pub trace: Vec<TraceEvent>,
}

impl SolveOutcome {
    pub fn class(&self) -> RunClass {
        match (self.stats.termination, &self.solution) {
            (Termination::Optimal | Termination::GapReached, Some(_)) => RunClass::Success,
            (_, Some(_)) => RunClass::Partial,
            (_, None) => RunClass::Failure,
        }
    }

    /// Solution file for the incumbent, if any.
    pub fn solution_file(&self) -> Option<SolutionFile> {
        let sol = self.solution.as_ref()?;
        let mut file = SolutionFile::new(
            &sol.routes,
            &sol.tour,
            sol.objective,
            self.stats.gap,
            self.stats.wall_time_s,
        );
        file.bound = Some(self.stats.bound);
        file.status = Some(self.class_name().to_string());
        Some(file)
    }

    fn class_name(&self) -> &'static str {
        match self.class() {
            RunClass::Success => "success",
            RunClass::Partial => "partial",
            RunClass::Failure => "failure",
        }
    }

    /// Writes the trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.trace {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

struct Open {
    node: SearchNode,
    point: Option<Vec<f64>>,
    seq: u64,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // max-heap: lowest bound, then deepest, then oldest comes out first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .node
            .bound
            .total_cmp(&self.node.bound)
            .then(self.node.depth.cmp(&other.node.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Pool {
    heap: BinaryHeap<Open>,
    /// Bound of the node each worker currently holds.
    active: Vec<Option<f64>>,
    incumbent: Option<Solution>,
    bound: f64,
    nodes: u64,
    relaxations: u64,
    seq: u64,
    trace: Vec<TraceEvent>,
    last_log: Instant,
    finished: Option<Termination>,
}

struct Search<'a> {
    ctx: SearchContext<'a>,
    opts: &'a SolveOptions,
    start: Instant,
    pool: Mutex<Pool>,
    wake: Condvar,
}

fn prune_tol(value: f64) -> f64 {
    1e-9 * value.abs().max(1.0)
}

impl Pool {
    fn incumbent_value(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|s| s.objective)
    }

    fn gap(&self) -> f64 {
        mip_gap(self.incumbent_value(), self.bound)
    }

    fn record(&mut self, start: Instant) {
        let inc = self.incumbent_value();
        let gap = self.gap();
        self.trace.push(TraceEvent {
            t: start.elapsed().as_secs_f64(),
            nodes: self.nodes,
            incumbent: inc,
            bound: self.bound,
            gap: inc.map(|_| gap),
        });
    }

    /// Installs a strictly better incumbent. Returns whether it was taken.
    fn offer(&mut self, sol: Solution, start: Instant) -> bool {
        if self.incumbent_value().is_some_and(|v| sol.objective >= v) {
            return false;
        }
        log::debug!("incumbent {:.6} after {} nodes", sol.objective, self.nodes);
        self.incumbent = Some(sol);
        self.clamp_bound();
        self.record(start);
        true
    }

    fn clamp_bound(&mut self) {
        if let Some(v) = self.incumbent_value() {
            self.bound = self.bound.min(v);
        }
    }

    /// Smallest bound over queued and in-process nodes, or `None` if the
    /// tree is exhausted.
    fn open_bound(&self) -> Option<f64> {
        let heap = self.heap.peek().map(|o| o.node.bound);
        self.active
            .iter()
            .flatten()
            .copied()
            .chain(heap)
            .reduce(f64::min)
    }

    fn raise_bound(&mut self, candidate: f64, start: Instant) {
        let capped = match self.incumbent_value() {
            Some(v) => candidate.min(v),
            None => candidate,
        };
        if capped > self.bound {
            self.bound = capped;
            self.record(start);
        }
    }
}

impl<'a> Search<'a> {
    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    fn relax_here(&self, node: &SearchNode) -> bool {
        match self.opts.relaxation {
            RelaxationPolicy::Off => false,
            RelaxationPolicy::Root => node.depth == 0,
            RelaxationPolicy::Every => true,
            RelaxationPolicy::Nodes { max_free } => {
                node.depth == 0 || self.ctx.free_variables(node) <= max_free
            }
        }
    }

    /// Bounds a freshly created node. Feasible tours met on the way are
    /// returned alongside; `None` means the node is closed.
    fn evaluate(
        &self,
        mut node: SearchNode,
        found: &mut Vec<Solution>,
        relaxations: &mut u64,
    ) -> Option<Open> {
        match self.ctx.evaluate(&mut node) {
            Evaluation::Infeasible => return None,
            Evaluation::Leaf { tour, routes, cost } => {
                found.push(Solution {
                    tour,
                    routes,
                    objective: cost,
                });
                return None;
            }
            Evaluation::Open { tour, .. } => {
                if let Some((tour, routes, cost)) = tour {
                    // the assignment optimum is itself a tour: nothing below
                    // this node can beat it
                    found.push(Solution {
                        tour,
                        routes,
                        objective: cost,
                    });
                    return None;
                }
            }
        }
        let mut point = None;
        if self.relax_here(&node) {
            *relaxations += 1;
            let (lo, hi) = self.ctx.variable_box(&node);
            let model = self.ctx.model;
            let problem = RelaxationProblem {
                quad: Some(model.quadratic()),
                num_vars: model.num_vars(),
                rows: model.constraints(),
                lo,
                hi,
                warm_start: None,
            };
            let r = solve_relaxation(&problem, &self.opts.relax_settings);
            match r.status {
                RelaxStatus::Infeasible => {
                    let proven = r
                        .certificate
                        .as_ref()
                        .is_some_and(|c| c.verify(problem.rows, &problem.lo, &problem.hi) > 0.0);
                    if proven {
                        return None;
                    }
                }
                RelaxStatus::Optimal => {
                    node.bound = node.bound.max(r.lower_bound);
                    if let Some(sol) = rounding_heuristic(&r.x, model) {
                        found.push(sol);
                    }
                    point = Some(r.x);
                }
                // never used for pruning
                RelaxStatus::IterationLimit => {}
            }
        }
        Some(Open {
            node,
            point,
            seq: 0,
        })
    }

    fn children(&self, open: &Open) -> Vec<SearchNode> {
        if self.opts.branching == Branching::MostFractional {
            if let Some(var) = open
                .point
                .as_deref()
                .and_then(|x| branch_select(x, self.ctx.model.vars()))
            {
                return self.ctx.binary_children(&open.node, var);
            }
        }
        self.ctx.placement_children(&open.node)
    }

    fn maybe_log(&self, pool: &mut Pool) {
        if pool.last_log.elapsed() >= self.opts.log_interval {
            pool.last_log = Instant::now();
            log::info!(
                "t={:.2} nodes={} incumbent={} bound={:.6} gap={}",
                self.elapsed().as_secs_f64(),
                pool.nodes,
                pool.incumbent_value()
                    .map_or("none".to_string(), |v| format!("{v:.6}")),
                pool.bound,
                pool.incumbent_value()
                    .map_or("inf".to_string(), |_| format!("{:.6}", pool.gap())),
            );
        }
    }

    fn worker(&self, id: usize) {
        let mut current: Option<Open> = None;
        loop {
            let open = {
                let mut pool = self.pool.lock().unwrap();
                pool.active[id] = current.as_ref().map(|o| o.node.bound);
                loop {
                    if pool.finished.is_some() {
                        return;
                    }
                    match pool.open_bound() {
                        None => {
                            pool.finished = Some(if pool.incumbent.is_some() {
                                Termination::Optimal
                            } else {
                                Termination::Infeasible
                            });
                            if let Some(v) = pool.incumbent_value() {
                                pool.raise_bound(v, self.start);
                            }
                            self.wake.notify_all();
                            return;
                        }
                        Some(b) => pool.raise_bound(b, self.start),
                    }
                    if pool.incumbent.is_some() && pool.gap() <= self.opts.gap_target {
                        pool.finished = Some(if pool.gap() <= 0.0 {
                            Termination::Optimal
                        } else {
                            Termination::GapReached
                        });
                        self.wake.notify_all();
                        return;
                    }
                    if self.elapsed() >= self.opts.time_limit {
                        pool.finished = Some(Termination::TimeLimit);
                        self.wake.notify_all();
                        return;
                    }
                    self.maybe_log(&mut pool);
                    if let Some(o) = current.take() {
                        break o;
                    }
                    if let Some(o) = pool.heap.pop() {
                        pool.active[id] = Some(o.node.bound);
                        break o;
                    }
                    // other workers still hold nodes that may produce children
                    pool = self
                        .wake
                        .wait_timeout(pool, Duration::from_millis(20))
                        .unwrap()
                        .0;
                }
            };

            let incumbent = self.pool.lock().unwrap().incumbent_value();
            if incumbent.is_some_and(|v| open.node.bound >= v - prune_tol(v)) {
                continue;
            }
            let mut found = Vec::new();
            let mut relaxations = 0;
            let mut kids: Vec<Open> = Vec::new();
            let raw = self.children(&open);
            let evaluated = raw.len() as u64;
            for mut child in raw {
                child.bound = child.bound.max(open.node.bound);
                if let Some(o) = self.evaluate(child, &mut found, &mut relaxations) {
                    kids.push(o);
                }
            }

            let mut pool = self.pool.lock().unwrap();
            pool.nodes += evaluated;
            pool.relaxations += relaxations;
            let mut improved = false;
            for sol in found {
                improved |= pool.offer(sol, self.start);
            }
            let cutoff = pool.incumbent_value();
            kids.retain(|o| !cutoff.is_some_and(|v| o.node.bound >= v - prune_tol(v)));
            // dive into the best child after an improvement, or while no
            // incumbent exists yet
            let dive = improved || pool.incumbent.is_none() || open.seq == u64::MAX;
            let mut best_ix = None;
            if dive && !kids.is_empty() {
                let ix = (0..kids.len())
                    .min_by(|&a, &b| {
                        kids[a]
                            .node
                            .bound
                            .total_cmp(&kids[b].node.bound)
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                best_ix = Some(ix);
            }
            for (ix, mut o) in kids.into_iter().enumerate() {
                if Some(ix) == best_ix {
                    // a dive continues until it runs out of children
                    o.seq = u64::MAX;
                    current = Some(o);
                } else {
                    pool.seq += 1;
                    o.seq = pool.seq;
                    pool.heap.push(o);
                }
            }
            pool.active[id] = current.as_ref().map(|o| o.node.bound);
            drop(pool);
            self.wake.notify_all();
        }
    }
}

/// Solves the model to the requested gap or until the time limit.
pub fn solve(model: &QpModel, opts: &SolveOptions) -> Result<SolveOutcome> {
    let start = Instant::now();
    if !(0.0..=1.0).contains(&opts.gap_target) {
        return Err(Error::invalid(format!(
            "gap target {} outside [0, 1]",
            opts.gap_target
        )));
    }
    if opts.threads == 0 {
        return Err(Error::invalid("thread count must be at least 1"));
    }
    let layout = model.layout();
    if layout.v() > MAX_NODES || layout.k() > MAX_VEHICLES {
        return Err(Error::TooLarge(format!(
            "search supports at most {MAX_NODES} nodes and {MAX_VEHICLES} vehicles, got v = {} and k = {}",
            layout.v(),
            layout.k()
        )));
    }

    let search = Search {
        ctx: SearchContext::new(model),
        opts,
        start,
        pool: Mutex::new(Pool {
            heap: BinaryHeap::new(),
            active: vec![None; opts.threads],
            incumbent: None,
            // every travel cost is nonnegative
            bound: 0.0,
            nodes: 0,
            relaxations: 0,
            seq: 0,
            trace: Vec::new(),
            last_log: start,
            finished: None,
        }),
        wake: Condvar::new(),
    };

    {
        let mut pool = search.pool.lock().unwrap();
        pool.record(start);
        if let Some(guess) = &opts.initial_guess {
            match incumbent_from_guess(model, guess) {
                Some(sol) => {
                    pool.offer(sol, start);
                }
                None => log::warn!("initial guess is not a feasible tour; ignored"),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.heuristic_rounds {
            if start.elapsed() >= opts.time_limit {
                break;
            }
            if let Some(sol) = insertion_heuristic(model, &mut rng) {
                pool.offer(sol, start);
            }
        }
    }

    let mut found = Vec::new();
    let mut relaxations = 0;
    let root = search.evaluate(search.ctx.root(), &mut found, &mut relaxations);
    {
        let mut pool = search.pool.lock().unwrap();
        pool.nodes += 1;
        pool.relaxations += relaxations;
        for sol in found {
            pool.offer(sol, start);
        }
        if let Some(o) = root {
            pool.heap.push(o);
        }
    }

    if opts.threads == 1 {
        search.worker(0);
    } else {
        std::thread::scope(|s| {
            for id in 0..opts.threads {
                let search = &search;
                s.spawn(move || search.worker(id));
            }
        });
    }

    let mut pool = search.pool.into_inner().unwrap();
    let termination = pool.finished.expect("search ends with a reason");
    pool.record(start);
    let stats = SolveStats {
        incumbent: pool.incumbent_value(),
        bound: pool.bound,
        gap: pool.gap(),
        nodes: pool.nodes,
        relaxations: pool.relaxations,
        wall_time_s: start.elapsed().as_secs_f64(),
        termination,
    };
    log::info!(
        "finished: {:?} nodes={} incumbent={:?} bound={:.6} gap={:.6}",
        termination,
        stats.nodes,
        stats.incumbent,
        stats.bound,
        stats.gap
    );
    Ok(SolveOutcome {
        solution: pool.incumbent,
        stats,
        trace: pool.trace,
    })
}
