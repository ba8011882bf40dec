//! Tours as permutations of a fixed reference cycle.
//!
//! A tour is stored as the node visited at each position. The matching
//! permutation matrix `X` has `X[pos, node] = 1`, so the position of a node
//! is `nᵀ X e_node` with `n = (1, ..., v)`, and the tour adjacency is
//! `Xᵀ A⁰ X` where `A⁰` is the cyclic one-step shift.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, NodeKind, NodeLayout};
use crate::oracle::{validate_tour, Routes, Violation};

/// The canonical node order (origins, destinations, pickups, deliveries,
/// virtual node) and its cycle adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTour {
    sigma0: Vec<usize>,
}

pub fn build_reference(layout: &NodeLayout) -> ReferenceTour {
    let v = layout.v();
    let mut sigma0: Vec<usize> = (1..v).collect();
    sigma0.push(layout.virtual_node());
    ReferenceTour { sigma0 }
}

impl ReferenceTour {
    pub fn sigma0(&self) -> &[usize] {
        &self.sigma0
    }

    pub fn v(&self) -> usize {
        self.sigma0.len()
    }

    pub fn a0(&self) -> DMatrix<f64> {
        shift_matrix(self.v())
    }

    /// The reference order as a tour; it satisfies the virtual-node pin but
    /// no routing constraint.
    pub fn permutation(&self) -> Permutation {
        Permutation {
            node_at: self.sigma0.clone(),
        }
    }
}

/// `v × v` matrix with ones at `(i, i+1)` and `(v-1, 0)`.
pub fn shift_matrix(v: usize) -> DMatrix<f64> {
    DMatrix::from_fn(v, v, |i, j| if (i + 1) % v == j { 1.0 } else { 0.0 })
}

/// A tour on all `v` nodes, held as the node at each position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    node_at: Vec<usize>,
}

impl Permutation {
    pub fn identity(v: usize) -> Self {
        Self {
            node_at: (0..v).collect(),
        }
    }

    /// Builds from a node order; fails unless it lists each of `0..len` once.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let v = order.len();
        let mut seen = vec![false; v];
        for &node in &order {
            if node >= v || seen[node] {
                return Err(Error::invalid(format!(
                    "order is not a permutation of 0..{v}"
                )));
            }
            seen[node] = true;
        }
        Ok(Self { node_at: order })
    }

    /// Reads a 0/1 matrix with unit row and column sums.
    pub fn from_matrix(x: &DMatrix<f64>) -> Result<Self> {
        if !x.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                actual: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        let v = x.nrows();
        let mut order = Vec::with_capacity(v);
        for pos in 0..v {
            let mut hit = None;
            for node in 0..v {
                let e = x[(pos, node)];
                if (e - 1.0).abs() <= 1e-9 {
                    if hit.is_some() {
                        return Err(Error::invalid(format!(
                            "row {} has more than one entry",
                            pos + 1
                        )));
                    }
                    hit = Some(node);
                } else if e.abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "entry ({}, {}) = {e} is not binary",
                        pos + 1,
                        node + 1
                    )));
                }
            }
            order.push(hit.ok_or_else(|| Error::invalid(format!("row {} is empty", pos + 1)))?);
        }
        Self::from_order(order).map_err(|_| Error::invalid("some column does not sum to 1"))
    }

    pub fn len(&self) -> usize {
        self.node_at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_at.is_empty()
    }

    /// Nodes in tour order.
    pub fn order(&self) -> &[usize] {
        &self.node_at
    }

    pub fn node_at(&self, pos: usize) -> usize {
        self.node_at[pos]
    }

    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.len()];
        for (p, &node) in self.node_at.iter().enumerate() {
            pos[node] = p;
        }
        pos
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let v = self.len();
        let mut x = DMatrix::zeros(v, v);
        for (p, &node) in self.node_at.iter().enumerate() {
            x[(p, node)] = 1.0;
        }
        x
    }

    /// Row-major flattening of `X`: entry `pos * v + node`.
    pub fn vectorize(&self) -> Vec<f64> {
        let v = self.len();
        let mut x = vec![0.0; v * v];
        for (p, &node) in self.node_at.iter().enumerate() {
            x[p * v + node] = 1.0;
        }
        x
    }

    /// Cyclic shift so that `node` sits in the last position.
    pub fn rotated_to_end(&self, node: usize) -> Self {
        let at = self
            .node_at
            .iter()
            .position(|&x| x == node)
            .expect("node in tour");
        let v = self.len();
        let node_at = (0..v).map(|p| self.node_at[(at + 1 + p) % v]).collect();
        Self { node_at }
    }

    /// Successor of every node along the cycle.
    pub fn successors(&self) -> Vec<usize> {
        let v = self.len();
        let mut next = vec![0; v];
        for p in 0..v {
            next[self.node_at[p]] = self.node_at[(p + 1) % v];
        }
        next
    }
}

/// `Xᵀ A⁰ X` for a permutation matrix `X`.
pub fn conjugate_adjacency(x: &DMatrix<f64>, a0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Permutation::from_matrix(x)?;
    if a0.shape() != x.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", x.nrows()),
            actual: format!("{}x{}", a0.nrows(), a0.ncols()),
        });
    }
    Ok(x.transpose() * a0 * x)
}

/// Adjacency of the cycle through `order`.
pub fn tour_adjacency(perm: &Permutation) -> DMatrix<f64> {
    let v = perm.len();
    let mut a = DMatrix::zeros(v, v);
    for (from, to) in perm.successors().into_iter().enumerate() {
        a[(from, to)] = 1.0;
    }
    a
}

/// True if `a` is 0/1 with unit row and column sums and its successor map
/// is one cycle through every node.
pub fn is_single_cycle(a: &DMatrix<f64>) -> bool {
    let v = a.nrows();
    if v == 0 || !a.is_square() {
        return false;
    }
    let Ok(succ) = Permutation::from_matrix(a) else {
        return false;
    };
    let mut node = 0;
    for step in 1..=v {
        node = succ.node_at(node);
        if node == 0 {
            return step == v;
        }
    }
    false
}

fn check_shapes(c: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<()> {
    if c.shape() != a.shape() || !c.is_square() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", c.nrows(), c.ncols()),
            actual: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    Ok(())
}

/// `trace(Cᵀ A)`.
pub fn tour_cost(c: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    check_shapes(c, a)?;
    Ok((c.transpose() * a).trace())
}

/// `1ᵀ (C ∘ A) 1`.
pub fn tour_cost_hadamard(c: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    check_shapes(c, a)?;
    Ok(c.component_mul(a).sum())
}

/// Edge sum along the cycle of `perm`.
pub fn order_cost(c: &DMatrix<f64>, perm: &Permutation) -> f64 {
    let v = perm.len();
    (0..v)
        .map(|p| c[(perm.node_at(p), perm.node_at((p + 1) % v))])
        .sum()
}

/// Splits a tour into per-vehicle routes after checking the virtual-node
/// pin and depot order, then runs the full route validator.
pub fn decode_routes(instance: &Instance, perm: &Permutation) -> Result<Routes> {
    let layout = instance.layout();
    let v = layout.v();
    if perm.len() != v {
        return Err(Error::ShapeMismatch {
            expected: format!("tour on {v} nodes"),
            actual: perm.len().to_string(),
        });
    }
    let pos = perm.positions();
    let mut bad = Vec::new();
    if pos[layout.virtual_node()] != v - 1 {
        bad.push(Violation::Symmetry {
            position: pos[layout.virtual_node()] + 1,
        });
    }
    for j in 0..layout.k() {
        let o = pos[layout.origin(j)];
        let d = pos[layout.destination(j)];
        let linked = j + 1 == layout.k() || pos[layout.origin(j + 1)] == d + 1;
        if o >= d || !linked {
            bad.push(Violation::VehiclePrecedence { vehicle: j });
        }
    }
    if !bad.is_empty() {
        return Err(Error::Infeasible(bad));
    }
    let routes: Routes = (0..layout.k())
        .map(|j| perm.order()[pos[layout.origin(j)]..=pos[layout.destination(j)]].to_vec())
        .collect();
    validate_tour(instance, &routes).map_err(Error::Infeasible)?;
    Ok(routes)
}

/// Reads a 0/1 matrix and decodes it; a non-permutation is reported as a
/// degree violation.
pub fn decode_matrix(instance: &Instance, x: &DMatrix<f64>) -> Result<Routes> {
    let perm = Permutation::from_matrix(x).map_err(|e| {
        Error::Infeasible(vec![Violation::Degree {
            detail: e.to_string(),
        }])
    })?;
    decode_routes(instance, &perm)
}

/// Concatenates routes in vehicle order and closes the cycle with the
/// virtual node.
pub fn tour_from_routes(layout: &NodeLayout, routes: &[Vec<usize>]) -> Result<Permutation> {
    let mut order: Vec<usize> = routes.iter().flatten().copied().collect();
    order.push(layout.virtual_node());
    if order.len() != layout.v() {
        return Err(Error::invalid(format!(
            "routes visit {} nodes, expected {}",
            order.len(),
            layout.v()
        )));
    }
    Permutation::from_order(order)
}

/// Solution file with 1-based node labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub objective: f64,
    pub gap: f64,
    pub routes: Vec<Vec<usize>>,
    pub sigma: Vec<usize>,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

impl SolutionFile {
    pub fn new(
        routes: &[Vec<usize>],
        tour: &Permutation,
        objective: f64,
        gap: f64,
        wall_time_s: f64,
    ) -> Self {
        Self {
            objective,
            gap,
            routes: routes
                .iter()
                .map(|r| r.iter().map(|&x| x + 1).collect())
                .collect(),
            sigma: tour.order().iter().map(|&x| x + 1).collect(),
            wall_time_s,
            bound: None,
            status: None,
        }
    }

    /// Routes as 0-based node ids.
    pub fn node_routes(&self) -> Result<Routes> {
        self.routes
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&x| {
                        x.checked_sub(1)
                            .ok_or_else(|| Error::invalid("node labels start at 1"))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Human-readable route, e.g. `VO1 P2 D2 VD1`.
pub fn describe_route(layout: &NodeLayout, route: &[usize]) -> String {
    route
        .iter()
        .map(|&x| layout.name(x))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Vehicle serving each customer, read off validated routes.
pub fn route_assignment(layout: &NodeLayout, routes: &[Vec<usize>]) -> Vec<usize> {
    let mut owner = vec![usize::MAX; layout.n()];
    for (j, r) in routes.iter().enumerate() {
        for &node in r {
            if let NodeKind::Pickup(i) = layout.kind(node) {
                owner[i] = j;
            }
        }
    }
    owner
}
