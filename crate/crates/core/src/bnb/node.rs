//! Search nodes as position domains plus vehicle masks, with propagation and
//! the successor-assignment bound.

use crate::graph_core::{decode_routes, order_cost, Permutation};
use crate::instance::{NodeKind, NodeLayout};
use crate::model::QpModel;
use crate::oracle::Routes;

use super::assignment::min_cost_assignment;

/// Partial assignment of the binaries. `positions[a]` holds the positions
/// node `a` may still take (bit `p` set means `x[p,a]` is not fixed to 0);
/// a single bit fixes `x[p,a] = 1`. `vehicles[i]` does the same for the
/// assignment bits of customer `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub positions: Vec<u128>,
    pub vehicles: Vec<u64>,
    /// Lower bound inherited from the parent, raised by this node's own
    /// bounding.
    pub bound: f64,
    pub depth: usize,
}

/// Largest vertex count the bitset domains support.
pub const MAX_NODES: usize = 127;
/// Largest fleet the vehicle masks support.
pub const MAX_VEHICLES: usize = 64;

fn bits(mut m: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let b = m.trailing_zeros() as usize;
        m &= m - 1;
        Some(b)
    })
}

fn bits64(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let b = m.trailing_zeros() as usize;
        m &= m - 1;
        Some(b)
    })
}

#[inline]
fn lowest(m: u128) -> usize {
    m.trailing_zeros() as usize
}

#[inline]
fn highest(m: u128) -> usize {
    127 - m.leading_zeros() as usize
}

/// Positions strictly above `p`.
#[inline]
fn above(p: usize) -> u128 {
    if p >= 127 {
        0
    } else {
        !((1u128 << (p + 1)) - 1)
    }
}

/// Positions strictly below `p`.
#[inline]
fn below(p: usize) -> u128 {
    (1u128 << p) - 1
}

/// Per-instance data shared by every node.
#[derive(Debug, Clone)]
pub struct SearchContext<'a> {
    pub model: &'a QpModel,
    layout: NodeLayout,
    v: usize,
    full: u128,
    cost: Vec<f64>,
    delta: Vec<i64>,
    q: i64,
    /// Successor pairs allowed by node kinds and group sizes alone.
    kind_ok: Vec<bool>,
}

/// Outcome of bounding one node.
#[derive(Debug, Clone)]
pub enum Evaluation {
    /// Propagation or the bound proved the node empty.
    Infeasible,
    /// All positions fixed; the tour is feasible.
    Leaf {
        tour: Permutation,
        routes: Routes,
        cost: f64,
    },
    Open {
        bound: f64,
        /// A feasible tour read off the bounding assignment, if it formed one.
        tour: Option<(Permutation, Routes, f64)>,
    },
}

impl<'a> SearchContext<'a> {
    pub fn new(model: &'a QpModel) -> Self {
        let layout = *model.layout();
        let v = layout.v();
        assert!(v <= MAX_NODES && layout.k() <= MAX_VEHICLES);
        let inst = model.instance();
        let c = model.routing_cost();
        let cost = (0..v * v).map(|ix| c[(ix / v, ix % v)]).collect();
        let delta: Vec<i64> = (0..v).map(|a| inst.load_delta(a)).collect();
        let groups = inst.group_sizes();
        let q = inst.q() as i64;
        let k = layout.k();
        let mut kind_ok = vec![false; v * v];
        for a in 0..v {
            for b in 0..v {
                if a == b {
                    continue;
                }
                use NodeKind::*;
                let ok = match (layout.kind(a), layout.kind(b)) {
                    (Virtual, Origin(0)) => true,
                    (Origin(j), Destination(jj)) => j == jj,
                    (Origin(_), Pickup(_)) => true,
                    (Destination(j), Origin(jj)) => jj == j + 1,
                    (Destination(j), Virtual) => j + 1 == k,
                    (Pickup(i), Pickup(l)) | (Pickup(i), Delivery(l)) => {
                        l == i || (groups[i] + groups[l]) as i64 <= q
                    }
                    (Delivery(i), Pickup(l)) => l != i,
                    (Delivery(_), Delivery(_)) => true,
                    (Delivery(_), Destination(_)) => true,
                    _ => false,
                };
                kind_ok[a * v + b] = ok;
            }
        }
        let full = if v == 128 {
            u128::MAX
        } else {
            (1u128 << v) - 1
        };
        Self {
            model,
            layout,
            v,
            full,
            cost,
            delta,
            q,
            kind_ok,
        }
    }

    pub fn layout(&self) -> &NodeLayout {
        &self.layout
    }

    #[inline]
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        self.cost[a * self.v + b]
    }

    /// Unrestricted node with the trivial implied fixings applied.
    pub fn root(&self) -> SearchNode {
        let n = self.layout.n();
        let k = self.layout.k();
        SearchNode {
            positions: vec![self.full; self.v],
            vehicles: vec![if k == 64 { u64::MAX } else { (1u64 << k) - 1 }; n],
            bound: f64::NEG_INFINITY,
            depth: 0,
        }
    }

    /// Rotates a position set one step forward around the cycle.
    #[inline]
    fn rotate(&self, m: u128) -> u128 {
        ((m << 1) | (m >> (self.v - 1))) & self.full
    }

    /// Narrows domains to a fixpoint. Returns `false` once some domain is
    /// empty; every removal is implied by the constraints, so no feasible
    /// tour is lost.
    pub fn propagate(&self, node: &mut SearchNode) -> bool {
        let l = self.layout;
        let (n, k, v) = (l.n(), l.k(), self.v);
        // virtual node last, first vehicle's origin first
        node.positions[l.virtual_node()] &= 1u128 << (v - 1);
        node.positions[l.origin(0)] &= 1;
        node.positions[l.destination(k - 1)] &= 1u128 << (v - 2);
        for _ in 0..4 * v {
            let snapshot = (node.positions.clone(), node.vehicles.clone());
            let dom = &mut node.positions;
            if dom.iter().any(|&d| d == 0) {
                return false;
            }
            for j in 0..k {
                if !precede(dom, l.origin(j), l.destination(j)) {
                    return false;
                }
                if j + 1 < k {
                    let (d, o) = (l.destination(j), l.origin(j + 1));
                    dom[o] &= dom[d] << 1;
                    dom[d] &= dom[o] >> 1;
                    if dom[o] == 0 || dom[d] == 0 {
                        return false;
                    }
                }
            }
            for i in 0..n {
                let (p, d) = (l.pickup(i), l.delivery(i));
                if !precede(dom, p, d) {
                    return false;
                }
                let mut keep = 0u64;
                let mut p_window = 0u128;
                let mut d_window = 0u128;
                for j in bits64(node.vehicles[i]) {
                    let lo = lowest(dom[l.origin(j)]);
                    let hi = highest(dom[l.destination(j)]);
                    let window = above(lo) & below(hi);
                    let pp = dom[p] & window;
                    if pp == 0 {
                        continue;
                    }
                    let dd = dom[d] & window & above(lowest(pp));
                    if dd == 0 {
                        continue;
                    }
                    keep |= 1 << j;
                    p_window |= pp;
                    d_window |= dd;
                }
                node.vehicles[i] = keep;
                if keep == 0 {
                    return false;
                }
                dom[p] &= p_window;
                dom[d] &= d_window;
            }

            // all-different on positions
            let mut taken = 0u128;
            for &d in dom.iter() {
                if d.count_ones() == 1 {
                    if taken & d != 0 {
                        return false;
                    }
                    taken |= d;
                }
            }
            for d in dom.iter_mut() {
                if d.count_ones() > 1 {
                    *d &= !taken;
                    if *d == 0 {
                        return false;
                    }
                }
            }
            let (mut once, mut twice) = (0u128, 0u128);
            for &d in dom.iter() {
                twice |= once & d;
                once |= d;
            }
            if once != self.full {
                return false;
            }
            let single = once & !twice;
            for p in bits(single & !taken) {
                let bit = 1u128 << p;
                if let Some(a) = dom.iter().position(|&d| d & bit != 0) {
                    dom[a] = bit;
                }
            }

            if !self.prefix_load_ok(node) {
                return false;
            }
            if (node.positions.as_slice(), node.vehicles.as_slice())
                == (snapshot.0.as_slice(), snapshot.1.as_slice())
            {
                break;
            }
        }
        true
    }

    /// Node occupying each position, where fixed.
    pub fn fixed_order(&self, node: &SearchNode) -> Vec<Option<usize>> {
        let mut at = vec![None; self.v];
        for (a, &d) in node.positions.iter().enumerate() {
            if d.count_ones() == 1 {
                at[lowest(d)] = Some(a);
            }
        }
        at
    }

    /// Load along the fixed prefix of positions never exceeds capacity.
    fn prefix_load_ok(&self, node: &SearchNode) -> bool {
        let mut load = 0i64;
        for a in self.fixed_order(node).into_iter().map_while(|x| x) {
            load += self.delta[a];
            if load > self.q {
                return false;
            }
        }
        true
    }

    /// Whether the successor `a -> b` is compatible with the node.
    #[inline]
    fn successor_allowed(&self, node: &SearchNode, a: usize, b: usize) -> bool {
        if !self.kind_ok[a * self.v + b] {
            return false;
        }
        if self.rotate(node.positions[a]) & node.positions[b] == 0 {
            return false;
        }
        use NodeKind::*;
        let l = &self.layout;
        match (l.kind(a), l.kind(b)) {
            (Origin(j), Pickup(i)) | (Delivery(i), Destination(j)) => {
                node.vehicles[i] & (1 << j) != 0
            }
            (Pickup(i), Pickup(m))
            | (Pickup(i), Delivery(m))
            | (Delivery(i), Pickup(m))
            | (Delivery(i), Delivery(m)) => node.vehicles[i] & node.vehicles[m] != 0,
            _ => true,
        }
    }

    /// Propagates and bounds a node.
    pub fn evaluate(&self, node: &mut SearchNode) -> Evaluation {
        if !self.propagate(node) {
            return Evaluation::Infeasible;
        }
        if node.positions.iter().all(|d| d.count_ones() == 1) {
            let order: Vec<usize> = self
                .fixed_order(node)
                .into_iter()
                .map(|a| a.expect("complete"))
                .collect();
            let Ok(tour) = Permutation::from_order(order) else {
                return Evaluation::Infeasible;
            };
            return match decode_routes(self.model.instance(), &tour) {
                Ok(routes) => {
                    let cost = order_cost(self.model.routing_cost(), &tour);
                    node.bound = node.bound.max(cost);
                    Evaluation::Leaf { tour, routes, cost }
                }
                Err(_) => Evaluation::Infeasible,
            };
        }
        let v = self.v;
        let mut cells = vec![None; v * v];
        for a in 0..v {
            for b in 0..v {
                if self.successor_allowed(node, a, b) {
                    cells[a * v + b] = Some(self.cost(a, b));
                }
            }
        }
        let Some((value, succ)) = min_cost_assignment(&cells, v) else {
            return Evaluation::Infeasible;
        };
        node.bound = node.bound.max(value);
        let tour = self.tour_from_successors(&succ);
        Evaluation::Open {
            bound: node.bound,
            tour,
        }
    }

    /// A feasible tour if the successor map is one cycle that validates.
    fn tour_from_successors(&self, succ: &[usize]) -> Option<(Permutation, Routes, f64)> {
        let start = self.layout.virtual_node();
        let mut order = Vec::with_capacity(self.v);
        let mut a = succ[start];
        while a != start {
            order.push(a);
            if order.len() > self.v {
                return None;
            }
            a = succ[a];
        }
        order.push(start);
        if order.len() != self.v {
            return None;
        }
        let tour = Permutation::from_order(order).ok()?;
        let routes = decode_routes(self.model.instance(), &tour).ok()?;
        let cost = order_cost(self.model.routing_cost(), &tour);
        Some((tour, routes, cost))
    }

    /// Lowest position whose occupant is not yet fixed.
    pub fn open_position(&self, node: &SearchNode) -> Option<usize> {
        self.fixed_order(node).iter().position(|a| a.is_none())
    }

    /// Children fixing each candidate into the lowest open position,
    /// cheapest step from the previous position first.
    pub fn placement_children(&self, node: &SearchNode) -> Vec<SearchNode> {
        let Some(p) = self.open_position(node) else {
            return Vec::new();
        };
        let at = self.fixed_order(node);
        let prev = if p == 0 { at[self.v - 1] } else { at[p - 1] };
        let bit = 1u128 << p;
        let mut cands: Vec<usize> = (0..self.v)
            .filter(|&a| node.positions[a] & bit != 0)
            .collect();
        if let Some(pr) = prev {
            cands.sort_by(|&a, &b| {
                self.cost(pr, a)
                    .total_cmp(&self.cost(pr, b))
                    .then(a.cmp(&b))
            });
        }
        cands
            .into_iter()
            .map(|a| {
                let mut child = node.clone();
                child.positions[a] = bit;
                child.depth += 1;
                child
            })
            .collect()
    }

    /// The two children of a single binary: fixed to 0, then fixed to 1.
    pub fn binary_children(&self, node: &SearchNode, var: usize) -> Vec<SearchNode> {
        let nx = self.v * self.v;
        let mut zero = node.clone();
        let mut one = node.clone();
        if var < nx {
            let (p, a) = (var / self.v, var % self.v);
            zero.positions[a] &= !(1u128 << p);
            one.positions[a] = 1u128 << p;
        } else {
            let k = self.layout.k();
            let (i, j) = ((var - nx) / k, (var - nx) % k);
            zero.vehicles[i] &= !(1u64 << j);
            one.vehicles[i] = 1u64 << j;
        }
        zero.depth += 1;
        one.depth += 1;
        vec![zero, one]
    }

    /// Lower/upper box of every model variable implied by the node.
    pub fn variable_box(&self, node: &SearchNode) -> (Vec<f64>, Vec<f64>) {
        let vars = self.model.vars();
        let nv = vars.num_vars();
        let mut lo = vec![0.0; nv];
        let mut hi = vec![1.0; nv];
        for (a, &d) in node.positions.iter().enumerate() {
            for p in 0..self.v {
                let var = vars.x(p, a);
                if d & (1u128 << p) == 0 {
                    hi[var] = 0.0;
                } else if d.count_ones() == 1 {
                    lo[var] = 1.0;
                }
            }
        }
        for (i, &m) in node.vehicles.iter().enumerate() {
            for j in 0..self.layout.k() {
                let var = vars.z(i, j);
                if m & (1u64 << j) == 0 {
                    hi[var] = 0.0;
                } else if m.count_ones() == 1 {
                    lo[var] = 1.0;
                }
            }
        }
        (lo, hi)
    }

    /// Number of unfixed model variables.
    pub fn free_variables(&self, node: &SearchNode) -> usize {
        let x: usize = node
            .positions
            .iter()
            .filter(|d| d.count_ones() > 1)
            .map(|d| d.count_ones() as usize)
            .sum();
        let z: usize = node
            .vehicles
            .iter()
            .filter(|m| m.count_ones() > 1)
            .map(|m| m.count_ones() as usize)
            .sum();
        x + z
    }
}

/// Enforces `pos(a) < pos(b)` on the bounds of both domains.
fn precede(dom: &mut [u128], a: usize, b: usize) -> bool {
    if dom[a] == 0 || dom[b] == 0 {
        return false;
    }
    dom[b] &= above(lowest(dom[a]));
    if dom[b] == 0 {
        return false;
    }
    dom[a] &= below(highest(dom[b]));
    dom[a] != 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexify::GammaPolicy;
    use crate::graph_core::tour_from_routes;
    use crate::instance::random_instance;
    use crate::model::assemble;
    use crate::oracle::enumerate_optimum;

    #[test]
    fn root_bound_below_optimum() {
        for seed in 0..8 {
            let inst = random_instance(4, 2, 2, seed).unwrap();
            let model = assemble(&inst, GammaPolicy::Auto).unwrap();
            let ctx = SearchContext::new(&model);
            let mut root = ctx.root();
            let opt = enumerate_optimum(&inst).unwrap().cost;
            match ctx.evaluate(&mut root) {
                Evaluation::Open { bound, .. } => assert!(bound <= opt + 1e-9, "{bound} > {opt}"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn propagation_keeps_the_optimum() {
        // fixing the optimal tour's first few positions must stay feasible
        let inst = random_instance(4, 2, 2, 3).unwrap();
        let model = assemble(&inst, GammaPolicy::Auto).unwrap();
        let ctx = SearchContext::new(&model);
        let opt = enumerate_optimum(&inst).unwrap();
        let tour = tour_from_routes(inst.layout(), &opt.routes).unwrap();
        let mut node = ctx.root();
        for p in 0..tour.len() {
            node.positions[tour.node_at(p)] = 1u128 << p;
            let mut probe = node.clone();
            assert!(
                ctx.propagate(&mut probe),
                "lost optimum after fixing {p} positions"
            );
            let b = match ctx.evaluate(&mut probe) {
                Evaluation::Open { bound, .. } => bound,
                Evaluation::Leaf { cost, .. } => cost,
                Evaluation::Infeasible => panic!("bound lost the optimum"),
            };
            assert!(b <= opt.cost + 1e-9);
        }
    }

    #[test]
    fn fully_fixed_reference_is_infeasible() {
        let inst = random_instance(2, 1, 1, 0).unwrap();
        let model = assemble(&inst, GammaPolicy::Auto).unwrap();
        let ctx = SearchContext::new(&model);
        let mut node = ctx.root();
        // the reference order visits both pickups before both deliveries
        let order = [1, 3, 4, 5, 6, 2, 0];
        for (p, &a) in order.iter().enumerate() {
            node.positions[a] = 1u128 << p;
        }
        assert!(matches!(ctx.evaluate(&mut node), Evaluation::Infeasible));
    }

    #[test]
    fn binary_children_partition() {
        let inst = random_instance(2, 2, 1, 0).unwrap();
        let model = assemble(&inst, GammaPolicy::Auto).unwrap();
        let ctx = SearchContext::new(&model);
        let root = ctx.root();
        let var = model.vars().x(3, 5);
        let kids = ctx.binary_children(&root, var);
        assert_eq!(kids[0].positions[5] & (1 << 3), 0);
        assert_eq!(kids[1].positions[5], 1 << 3);
        let zvar = model.vars().z(1, 0);
        let kids = ctx.binary_children(&root, zvar);
        assert_eq!(kids[0].vehicles[1], 0b10);
        assert_eq!(kids[1].vehicles[1], 0b01);
        let (lo, hi) = ctx.variable_box(&kids[1]);
        assert_eq!((lo[zvar], hi[zvar]), (1.0, 1.0));
        assert_eq!(hi[model.vars().z(1, 1)], 0.0);
    }
}
