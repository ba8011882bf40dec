//! Problem instances: node layout, travel costs, capacity data, generators
//! and file formats.

mod cost;
mod io;
mod layout;

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cost::{euclidean_costs, graph_costs, read_edge_list, CostMatrix, Edge};
pub use io::{ingest_demands, InstanceFile, VehicleSpec};
pub use layout::{build_layout, NodeKind, NodeLayout};

use crate::error::{Error, Result};

/// A planar point or the id of a road-graph node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Location {
    Point([f64; 2]),
    Node(String),
}

impl Location {
    pub fn point(&self) -> Option<[f64; 2]> {
        match self {
            Location::Point(p) => Some(*p),
            Location::Node(_) => None,
        }
    }

    pub fn node_id(&self) -> Option<&str> {
        match self {
            Location::Node(id) => Some(id),
            Location::Point(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub origin: Location,
    pub destination: Location,
}

/// A pickup/delivery pair serving `group` customers travelling together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub pickup: Location,
    pub delivery: Location,
    #[serde(default = "one")]
    pub group: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    #[default]
    Euclidean,
    Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    layout: NodeLayout,
    q: u32,
    vehicles: Vec<Vehicle>,
    demands: Vec<Demand>,
    cost: CostMatrix,
    cost_mode: CostMode,
    graph_file: Option<PathBuf>,
}

impl Instance {
    /// Builds an instance from explicit travel costs.
    ///
    /// Fails if a group exceeds the vehicle capacity, the cost matrix has
    /// the wrong size, edges at the virtual node are not free, or the
    /// triangle inequality fails away from the virtual node.
    pub fn new(
        q: u32,
        vehicles: Vec<Vehicle>,
        demands: Vec<Demand>,
        cost: CostMatrix,
    ) -> Result<Self> {
        let layout = build_layout(demands.len(), vehicles.len())?;
        if q == 0 {
            return Err(Error::invalid("vehicle capacity must be at least 1"));
        }
        if let Some((i, d)) = demands.iter().enumerate().find(|(_, d)| d.group == 0) {
            return Err(Error::invalid(format!(
                "demand {} has group size {}",
                i + 1,
                d.group
            )));
        }
        if let Some((i, d)) = demands.iter().enumerate().find(|(_, d)| d.group > q) {
            return Err(Error::InfeasibleInstance(format!(
                "demand {} has group size {} above capacity {q}",
                i + 1,
                d.group
            )));
        }
        if cost.dim() != layout.v() {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} cost matrix", layout.v()),
                actual: format!("{0}x{0}", cost.dim()),
            });
        }
        let v = layout.v();
        if (1..v).any(|j| cost.get(0, j) != 0.0 || cost.get(j, 0) != 0.0) {
            return Err(Error::invalid("edges at the virtual node must cost 0"));
        }
        cost.check_triangle(&[0], 1e-9)?;
        Ok(Self {
            layout,
            q,
            vehicles,
            demands,
            cost,
            cost_mode: CostMode::Euclidean,
            graph_file: None,
        })
    }

    /// Instance on planar points with Euclidean travel costs.
    pub fn euclidean(q: u32, vehicles: Vec<Vehicle>, demands: Vec<Demand>) -> Result<Self> {
        let points = node_locations(&vehicles, &demands)
            .into_iter()
            .map(|l| match l {
                None => Ok(None),
                Some(Location::Point(p)) => Ok(Some(*p)),
                Some(Location::Node(id)) => Err(Error::invalid(format!(
                    "location {id:?} is a graph node; euclidean costs need points"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let cost = euclidean_costs(&points)?;
        Self::new(q, vehicles, demands, cost)
    }

    /// Instance whose locations are road-graph node ids; costs are
    /// shortest-path distances over `edges`.
    pub fn on_graph(
        q: u32,
        vehicles: Vec<Vehicle>,
        demands: Vec<Demand>,
        edges: &[Edge],
    ) -> Result<Self> {
        let ids = node_locations(&vehicles, &demands)
            .into_iter()
            .map(|l| match l {
                None => Ok(None),
                Some(Location::Node(id)) => Ok(Some(id.as_str())),
                Some(Location::Point(p)) => Err(Error::invalid(format!(
                    "location {p:?} is a point; graph costs need node ids"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let cost = graph_costs(edges, &ids)?;
        let mut inst = Self::new(q, vehicles, demands, cost)?;
        inst.cost_mode = CostMode::Graph;
        Ok(inst)
    }

    pub fn with_graph_file(mut self, path: impl Into<PathBuf>) -> Self {
        self.graph_file = Some(path.into());
        self
    }

    pub fn layout(&self) -> &NodeLayout {
        &self.layout
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn k(&self) -> usize {
        self.layout.k()
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn v(&self) -> usize {
        self.layout.v()
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn cost_mode(&self) -> CostMode {
        self.cost_mode
    }

    pub fn graph_file(&self) -> Option<&std::path::Path> {
        self.graph_file.as_deref()
    }

    pub fn group_sizes(&self) -> Vec<u32> {
        self.demands.iter().map(|d| d.group).collect()
    }

    /// Location of every node in id order; `None` for the virtual node.
    pub fn locations(&self) -> Vec<Option<&Location>> {
        node_locations(&self.vehicles, &self.demands)
    }

    /// Signed load change when visiting a node (`+p_i` at pickups, `-p_i`
    /// at deliveries, zero elsewhere).
    pub fn load_delta(&self, node: usize) -> i64 {
        match self.layout.kind(node) {
            NodeKind::Pickup(i) => self.demands[i].group as i64,
            NodeKind::Delivery(i) => -(self.demands[i].group as i64),
            _ => 0,
        }
    }

    pub fn capacity_vectors(&self) -> CapacityVectors {
        CapacityVectors::new(self)
    }

    /// Travel costs as seen by the tour objective: the legs joining one
    /// vehicle's destination to the next vehicle's origin are made free in
    /// both directions. Every feasible tour uses exactly these legs, so the
    /// optimum is unchanged and the tour cost equals the summed route cost.
    pub fn routing_costs(&self) -> DMatrix<f64> {
        let mut c = self.cost.entries().clone();
        for j in 0..self.k().saturating_sub(1) {
            let (a, b) = (self.layout.destination(j), self.layout.origin(j + 1));
            c[(a, b)] = 0.0;
            c[(b, a)] = 0.0;
        }
        c
    }
}

fn node_locations<'a>(vehicles: &'a [Vehicle], demands: &'a [Demand]) -> Vec<Option<&'a Location>> {
    let mut out = Vec::with_capacity(1 + 2 * (vehicles.len() + demands.len()));
    out.push(None);
    out.extend(vehicles.iter().map(|v| Some(&v.origin)));
    out.extend(vehicles.iter().map(|v| Some(&v.destination)));
    out.extend(demands.iter().map(|d| Some(&d.pickup)));
    out.extend(demands.iter().map(|d| Some(&d.delivery)));
    out
}

/// The load vector `p`, the triangular all-ones matrix `T` and the position
/// vector `(1, 2, ..., v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityVectors {
    p: Vec<i64>,
    nvec: Vec<f64>,
}

impl CapacityVectors {
    pub fn new(instance: &Instance) -> Self {
        let v = instance.v();
        Self {
            p: (0..v).map(|x| instance.load_delta(x)).collect(),
            nvec: (1..=v).map(|x| x as f64).collect(),
        }
    }

    pub fn p(&self) -> &[i64] {
        &self.p
    }

    pub fn nvec(&self) -> &[f64] {
        &self.nvec
    }

    /// Upper-triangular matrix whose row `i` is zero before column `i` and
    /// one from there on.
    pub fn t(&self) -> DMatrix<f64> {
        let v = self.p.len();
        DMatrix::from_fn(v, v, |i, j| if j >= i { 1.0 } else { 0.0 })
    }

    /// Lower-triangular all-ones matrix `Tᵀ`; applied to a load vector
    /// laid out in tour order it yields the on-board count after each stop.
    pub fn prefix(&self) -> DMatrix<f64> {
        self.t().transpose()
    }

    /// Standard basis vector `e_node`.
    pub fn e(&self, node: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.p.len()];
        e[node] = 1.0;
        e
    }

    /// On-board count after each position of a tour given as a node order.
    pub fn occupancy(&self, order: &[usize]) -> Vec<i64> {
        order
            .iter()
            .scan(0i64, |acc, &node| {
                *acc += self.p[node];
                Some(*acc)
            })
            .collect()
    }
}

/// Uniform random instance on the unit square with unit group sizes.
///
/// Coordinates are drawn in the order: vehicle origins, vehicle
/// destinations, pickups, deliveries.
pub fn random_instance(n: usize, k: usize, q: u32, seed: u64) -> Result<Instance> {
    build_layout(n, k)?;
    if q == 0 {
        return Err(Error::invalid("vehicle capacity must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pt = || Location::Point([rng.gen::<f64>(), rng.gen::<f64>()]);
    let origins: Vec<Location> = (0..k).map(|_| pt()).collect();
    let dests: Vec<Location> = (0..k).map(|_| pt()).collect();
    let pickups: Vec<Location> = (0..n).map(|_| pt()).collect();
    let deliveries: Vec<Location> = (0..n).map(|_| pt()).collect();
    let vehicles = origins
        .into_iter()
        .zip(dests)
        .map(|(origin, destination)| Vehicle {
            origin,
            destination,
        })
        .collect();
    let demands = pickups
        .into_iter()
        .zip(deliveries)
        .map(|(pickup, delivery)| Demand {
            pickup,
            delivery,
            group: 1,
        })
        .collect();
    Instance::euclidean(q, vehicles, demands)
}
