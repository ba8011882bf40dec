//! Primal heuristics: guesses, rounding of relaxation points and randomized
//! insertion with relocation.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph_core::{decode_routes, order_cost, tour_from_routes, Permutation};
use crate::model::{QpModel, VarLayout};
use crate::oracle::Routes;

use super::Solution;

/// Distance of a value from the nearest integer below which it counts as
/// integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

fn solution_from_tour(model: &QpModel, tour: Permutation) -> Option<Solution> {
    let routes = decode_routes(model.instance(), &tour).ok()?;
    let objective = order_cost(model.routing_cost(), &tour);
    Some(Solution {
        tour,
        routes,
        objective,
    })
}

/// Most fractional permutation bit (lowest index on ties); assignment bits
/// only once every permutation bit is integral. `None` if the point is
/// integral.
pub fn branch_select(point: &[f64], vars: &VarLayout) -> Option<usize> {
    let pick = |range: std::ops::Range<usize>| {
        let mut best: Option<(usize, f64)> = None;
        for j in range {
            let frac = (point[j] - point[j].round()).abs();
            if frac <= INTEGRALITY_TOL {
                continue;
            }
            let score = point[j].min(1.0 - point[j]);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    };
    pick(0..vars.num_x()).or_else(|| pick(vars.num_x()..vars.num_vars()))
}

/// Greedy projection of the permutation block onto a permutation matrix,
/// largest entries first. Returned only if the resulting tour validates.
pub fn rounding_heuristic(point: &[f64], model: &QpModel) -> Option<Solution> {
    let vars = model.vars();
    let v = model.layout().v();
    if point.len() < vars.num_x() {
        return None;
    }
    let mut cells: Vec<(usize, usize)> = (0..v).flat_map(|p| (0..v).map(move |a| (p, a))).collect();
    cells.sort_by(|&(p, a), &(pp, aa)| {
        point[vars.x(pp, aa)]
            .total_cmp(&point[vars.x(p, a)])
            .then((p, a).cmp(&(pp, aa)))
    });
    let mut node_at = vec![usize::MAX; v];
    let mut placed = vec![false; v];
    for (p, a) in cells {
        if node_at[p] == usize::MAX && !placed[a] {
            node_at[p] = a;
            placed[a] = true;
        }
    }
    let tour = Permutation::from_order(node_at).ok()?;
    solution_from_tour(model, tour)
}

/// Installs a node sequence as a solution if it is a feasible tour.
pub fn incumbent_from_guess(model: &QpModel, guess: &[usize]) -> Option<Solution> {
    let tour = Permutation::from_order(guess.to_vec()).ok()?;
    solution_from_tour(model, tour)
}

struct Insertion<'a> {
    model: &'a QpModel,
    delta: Vec<i64>,
    q: i64,
}

impl Insertion<'_> {
    fn c(&self, a: usize, b: usize) -> f64 {
        self.model.routing_cost()[(a, b)]
    }

    fn load_ok(&self, route: &[usize]) -> bool {
        let mut load = 0;
        for &a in route {
            load += self.delta[a];
            if load > self.q {
                return false;
            }
        }
        true
    }

    /// Cheapest insertion of customer `i` over all routes:
    /// `(extra cost, vehicle, pickup slot, delivery slot)`.
    fn best(&self, routes: &Routes, i: usize) -> Option<(f64, usize, usize, usize)> {
        let l = self.model.layout();
        let (pn, dn) = (l.pickup(i), l.delivery(i));
        let mut best: Option<(f64, usize, usize, usize)> = None;
        let mut trial = Vec::new();
        for (j, r) in routes.iter().enumerate() {
            for a in 1..r.len() {
                for b in a..r.len() {
                    let extra = if a == b {
                        self.c(r[a - 1], pn) + self.c(pn, dn) + self.c(dn, r[a])
                            - self.c(r[a - 1], r[a])
                    } else {
                        self.c(r[a - 1], pn) + self.c(pn, r[a]) - self.c(r[a - 1], r[a])
                            + self.c(r[b - 1], dn)
                            + self.c(dn, r[b])
                            - self.c(r[b - 1], r[b])
                    };
                    if best.is_some_and(|(e, ..)| extra >= e) {
                        continue;
                    }
                    trial.clear();
                    trial.extend_from_slice(&r[..a]);
                    trial.push(pn);
                    trial.extend_from_slice(&r[a..b]);
                    trial.push(dn);
                    trial.extend_from_slice(&r[b..]);
                    if self.load_ok(&trial) {
                        best = Some((extra, j, a, b));
                    }
                }
            }
        }
        best
    }

    fn insert(routes: &mut Routes, pickup: usize, delivery: usize, j: usize, a: usize, b: usize) {
        let r = &mut routes[j];
        r.insert(b, delivery);
        r.insert(a, pickup);
    }
}

/// Randomized cheapest insertion in a shuffled customer order, followed by
/// relocation of single customers until no move improves the cost.
pub fn insertion_heuristic<R: Rng>(model: &QpModel, rng: &mut R) -> Option<Solution> {
    let l = *model.layout();
    let inst = model.instance();
    let ins = Insertion {
        model,
        delta: (0..l.v()).map(|a| inst.load_delta(a)).collect(),
        q: inst.q() as i64,
    };
    let mut routes: Routes = (0..l.k())
        .map(|j| vec![l.origin(j), l.destination(j)])
        .collect();
    let mut order: Vec<usize> = (0..l.n()).collect();
    order.shuffle(rng);
    for &i in &order {
        let (_, j, a, b) = ins.best(&routes, i)?;
        Insertion::insert(&mut routes, l.pickup(i), l.delivery(i), j, a, b);
    }
    loop {
        let mut improved = false;
        order.shuffle(rng);
        for &i in &order {
            let (pn, dn) = (l.pickup(i), l.delivery(i));
            let before = routes_cost(&ins, &routes);
            let mut trial = routes.clone();
            for r in trial.iter_mut() {
                r.retain(|&a| a != pn && a != dn);
            }
            let Some((_, j, a, b)) = ins.best(&trial, i) else {
                continue;
            };
            Insertion::insert(&mut trial, pn, dn, j, a, b);
            if routes_cost(&ins, &trial) < before - 1e-12 {
                routes = trial;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    let tour = tour_from_routes(&l, &routes).ok()?;
    solution_from_tour(model, tour)
}

fn routes_cost(ins: &Insertion, routes: &Routes) -> f64 {
    routes
        .iter()
        .map(|r| r.windows(2).map(|w| ins.c(w[0], w[1])).sum::<f64>())
        .sum()
}
