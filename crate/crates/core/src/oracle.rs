//! Brute-force ground truth for small instances and the route validator
//! every solver output is checked against.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Instance, NodeKind};

/// Per-vehicle routes, each `[origin, stops..., destination]` as node ids.
pub type Routes = Vec<Vec<usize>>;

/// One broken feasibility rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Violation {
    /// The permutation matrix is not a permutation.
    Degree { detail: String },
    /// The virtual node is not the last tour position.
    Symmetry { position: usize },
    /// Depot order broken: origin after destination, or a destination not
    /// immediately followed by the next vehicle's origin.
    VehiclePrecedence { vehicle: usize },
    /// A route does not start at its origin or end at its destination.
    Depot { vehicle: usize },
    /// A pickup or delivery is visited other than exactly once.
    Coverage { customer: usize, visits: usize },
    /// A delivery comes before its pickup.
    CustomerPrecedence { customer: usize },
    /// Pickup and delivery are served by different vehicles.
    Association { customer: usize },
    /// On-board count exceeds capacity.
    Capacity {
        vehicle: usize,
        stop: usize,
        load: i64,
    },
    /// Anything else that makes the routes unreadable.
    Structure { detail: String },
}

impl Violation {
    pub fn family(&self) -> &'static str {
        match self {
            Violation::Degree { .. } => "degree",
            Violation::Symmetry { .. } => "symmetry",
            Violation::VehiclePrecedence { .. } => "vehicle precedence",
            Violation::Depot { .. } => "depot",
            Violation::Coverage { .. } => "coverage",
            Violation::CustomerPrecedence { .. } => "customer precedence",
            Violation::Association { .. } => "association",
            Violation::Capacity { .. } => "capacity",
            Violation::Structure { .. } => "structure",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Degree { detail } => write!(f, "degree: {detail}"),
            Violation::Symmetry { position } => {
                write!(
                    f,
                    "symmetry: virtual node at position {position}, expected last"
                )
            }
            Violation::VehiclePrecedence { vehicle } => {
                write!(
                    f,
                    "vehicle precedence: depots of vehicle {} out of order",
                    vehicle + 1
                )
            }
            Violation::Depot { vehicle } => {
                write!(f, "depot: route {} has wrong endpoints", vehicle + 1)
            }
            Violation::Coverage { customer, visits } => {
                write!(
                    f,
                    "coverage: customer {} visited {visits} times",
                    customer + 1
                )
            }
            Violation::CustomerPrecedence { customer } => {
                write!(
                    f,
                    "customer precedence: delivery {0} before pickup {0}",
                    customer + 1
                )
            }
            Violation::Association { customer } => {
                write!(
                    f,
                    "association: customer {} split across vehicles",
                    customer + 1
                )
            }
            Violation::Capacity {
                vehicle,
                stop,
                load,
            } => {
                write!(
                    f,
                    "capacity: vehicle {} carries {load} after stop {stop}",
                    vehicle + 1
                )
            }
            Violation::Structure { detail } => write!(f, "structure: {detail}"),
        }
    }
}

/// Checks routes against every rule of the problem, directly on the route
/// lists and independent of any matrix encoding.
pub fn validate_tour(
    instance: &Instance,
    routes: &[Vec<usize>],
) -> std::result::Result<(), Vec<Violation>> {
    let layout = instance.layout();
    let (n, k) = (layout.n(), layout.k());
    let mut out = Vec::new();
    if routes.len() != k {
        out.push(Violation::Structure {
            detail: format!("{} routes for {k} vehicles", routes.len()),
        });
        return Err(out);
    }
    // (vehicle, index in route) for each pickup and delivery
    let mut pick: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut drop: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (j, route) in routes.iter().enumerate() {
        if route.len() < 2
            || route[0] != layout.origin(j)
            || route[route.len() - 1] != layout.destination(j)
        {
            out.push(Violation::Depot { vehicle: j });
        }
        let inner = if route.len() >= 2 {
            &route[1..route.len() - 1]
        } else {
            &route[..0]
        };
        for (s, &node) in inner.iter().enumerate() {
            if node >= layout.v() {
                out.push(Violation::Structure {
                    detail: format!("node id {node} out of range"),
                });
                continue;
            }
            match layout.kind(node) {
                NodeKind::Pickup(i) => pick[i].push((j, s)),
                NodeKind::Delivery(i) => drop[i].push((j, s)),
                _ => out.push(Violation::Structure {
                    detail: format!("{} inside route {}", layout.name(node), j + 1),
                }),
            }
        }
    }
    for i in 0..n {
        let visits = pick[i].len().max(drop[i].len());
        if pick[i].len() != 1 || drop[i].len() != 1 {
            out.push(Violation::Coverage {
                customer: i,
                visits,
            });
            continue;
        }
        let (pj, ps) = pick[i][0];
        let (dj, ds) = drop[i][0];
        if pj != dj {
            out.push(Violation::Association { customer: i });
        } else if ds < ps {
            out.push(Violation::CustomerPrecedence { customer: i });
        }
    }
    let q = instance.q() as i64;
    for (j, route) in routes.iter().enumerate() {
        let mut load = 0i64;
        for (s, &node) in route.iter().enumerate() {
            if node < layout.v() {
                load += instance.load_delta(node);
            }
            if load > q {
                out.push(Violation::Capacity {
                    vehicle: j,
                    stop: s,
                    load,
                });
                break;
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Sum of per-vehicle route costs (depot legs included).
pub fn routes_cost(instance: &Instance, routes: &[Vec<usize>]) -> f64 {
    let c = instance.cost();
    routes
        .iter()
        .map(|r| r.windows(2).map(|w| c.get(w[0], w[1])).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_n: usize,
    pub max_k: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_n: 6, max_k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub cost: f64,
    pub routes: Routes,
    /// Number of distinct feasible tours.
    pub feasible_tours: u128,
}

pub fn enumerate_optimum(instance: &Instance) -> Result<OracleResult> {
    enumerate_optimum_with(instance, OracleLimits::default())
}

/// Exhaustive optimum: every assignment of customers to vehicles, every
/// pickup-before-delivery ordering within a vehicle, capacity checked on
/// every prefix. Refuses instances above `limits`.
pub fn enumerate_optimum_with(instance: &Instance, limits: OracleLimits) -> Result<OracleResult> {
    let (n, k) = (instance.n(), instance.k());
    if n > limits.max_n || k > limits.max_k {
        return Err(Error::TooLarge(format!(
            "n = {n}, k = {k} exceeds the enumeration cap (n <= {}, k <= {})",
            limits.max_n, limits.max_k
        )));
    }
    // best route, cost and count for every (vehicle, customer subset)
    let subsets = 1usize << n;
    let mut table: Vec<Vec<Option<VehicleBest>>> = Vec::with_capacity(k);
    for j in 0..k {
        let row = (0..subsets)
            .map(|mask| best_route(instance, j, mask))
            .collect();
        table.push(row);
    }

    let mut best: Option<(f64, Routes)> = None;
    let mut total: u128 = 0;
    let mut assign = vec![0usize; n];
    loop {
        let mut masks = vec![0usize; k];
        for (i, &j) in assign.iter().enumerate() {
            masks[j] |= 1 << i;
        }
        let mut cost = 0.0;
        let mut count: u128 = 1;
        let mut ok = true;
        for j in 0..k {
            match &table[j][masks[j]] {
                Some(b) => {
                    cost += b.cost;
                    count *= b.count;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            total += count;
            let routes: Routes = (0..k)
                .map(|j| table[j][masks[j]].as_ref().unwrap().route.clone())
                .collect();
            let better = match &best {
                None => true,
                Some((c, r)) => cost < *c || (cost == *c && routes < *r),
            };
            if better {
                best = Some((cost, routes));
            }
        }
        // next assignment in base k
        let mut pos = 0;
        loop {
            if pos == n {
                let (cost, routes) = best
                    .ok_or_else(|| Error::InfeasibleInstance("no feasible tour exists".into()))?;
                return Ok(OracleResult {
                    cost,
                    routes,
                    feasible_tours: total,
                });
            }
            assign[pos] += 1;
            if assign[pos] < k {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Debug, Clone)]
struct VehicleBest {
    cost: f64,
    route: Vec<usize>,
    count: u128,
}

fn best_route(instance: &Instance, vehicle: usize, mask: usize) -> Option<VehicleBest> {
    let layout = instance.layout();
    let customers: Vec<usize> = (0..layout.n()).filter(|i| mask >> i & 1 == 1).collect();
    let mut search = RouteSearch {
        instance,
        customers: &customers,
        dest: layout.destination(vehicle),
        path: vec![layout.origin(vehicle)],
        best: None,
        count: 0,
    };
    search.walk(0, 0, 0, 0.0);
    let (cost, route) = search.best?;
    Some(VehicleBest {
        cost,
        route,
        count: search.count,
    })
}

struct RouteSearch<'a> {
    instance: &'a Instance,
    customers: &'a [usize],
    dest: usize,
    path: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    count: u128,
}

impl RouteSearch<'_> {
    /// `picked` / `dropped` are bitmasks over `customers`.
    fn walk(&mut self, picked: usize, dropped: usize, load: i64, cost: f64) {
        let m = self.customers.len();
        let layout = *self.instance.layout();
        let c = self.instance.cost();
        let last = *self.path.last().unwrap();
        if dropped == (1 << m) - 1 {
            let total = cost + c.get(last, self.dest);
            self.count += 1;
            let mut route = self.path.clone();
            route.push(self.dest);
            let better = match &self.best {
                None => true,
                Some((bc, br)) => total < *bc || (total == *bc && route < *br),
            };
            if better {
                self.best = Some((total, route));
            }
            return;
        }
        let q = self.instance.q() as i64;
        for (b, &i) in self.customers.iter().enumerate() {
            let bit = 1 << b;
            let group = self.instance.demands()[i].group as i64;
            if picked & bit == 0 {
                if load + group > q {
                    continue;
                }
                let node = layout.pickup(i);
                self.path.push(node);
                self.walk(
                    picked | bit,
                    dropped,
                    load + group,
                    cost + c.get(last, node),
                );
                self.path.pop();
            } else if dropped & bit == 0 {
                let node = layout.delivery(i);
                self.path.push(node);
                self.walk(
                    picked,
                    dropped | bit,
                    load - group,
                    cost + c.get(last, node),
                );
                self.path.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{random_instance, Demand, Location, Vehicle};

    fn line_instance(n: usize, q: u32) -> Instance {
        let vehicles = vec![Vehicle {
            origin: Location::Point([0.0, 0.0]),
            destination: Location::Point([0.0, 0.0]),
        }];
        let demands = (0..n)
            .map(|i| Demand {
                pickup: Location::Point([1.0 + i as f64, 0.0]),
                delivery: Location::Point([1.5 + i as f64, 0.3]),
                group: 1,
            })
            .collect();
        Instance::euclidean(q, vehicles, demands).unwrap()
    }

    #[test]
    fn single_customer_single_tour() {
        let inst = random_instance(1, 1, 1, 5).unwrap();
        let r = enumerate_optimum(&inst).unwrap();
        let l = inst.layout();
        let c = inst.cost();
        assert_eq!(r.feasible_tours, 1);
        assert_eq!(
            r.routes,
            vec![vec![
                l.origin(0),
                l.pickup(0),
                l.delivery(0),
                l.destination(0)
            ]]
        );
        let expect = c.get(l.origin(0), l.pickup(0))
            + c.get(l.pickup(0), l.delivery(0))
            + c.get(l.delivery(0), l.destination(0));
        assert_eq!(r.cost, expect);
    }

    #[test]
    fn unit_capacity_serialises_customers() {
        let inst = random_instance(2, 1, 1, 8).unwrap();
        let r = enumerate_optimum(&inst).unwrap();
        assert_eq!(r.feasible_tours, 2);
        let l = inst.layout();
        let a = vec![vec![
            l.origin(0),
            l.pickup(0),
            l.delivery(0),
            l.pickup(1),
            l.delivery(1),
            l.destination(0),
        ]];
        let b = vec![vec![
            l.origin(0),
            l.pickup(1),
            l.delivery(1),
            l.pickup(0),
            l.delivery(0),
            l.destination(0),
        ]];
        let expect = routes_cost(&inst, &a).min(routes_cost(&inst, &b));
        assert_eq!(r.cost, expect);
    }

    #[test]
    fn two_customers_capacity_two_has_six_interleavings() {
        let inst = random_instance(2, 1, 2, 8).unwrap();
        assert_eq!(enumerate_optimum(&inst).unwrap().feasible_tours, 6);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = random_instance(7, 1, 2, 1).unwrap();
        assert!(matches!(enumerate_optimum(&inst), Err(Error::TooLarge(_))));
        let inst = random_instance(2, 4, 2, 1).unwrap();
        assert!(matches!(enumerate_optimum(&inst), Err(Error::TooLarge(_))));
    }

    #[test]
    fn optimum_routes_validate() {
        for seed in 0..10 {
            let inst = random_instance(3, 2, 2, seed).unwrap();
            let r = enumerate_optimum(&inst).unwrap();
            assert_eq!(validate_tour(&inst, &r.routes), Ok(()));
            assert!((routes_cost(&inst, &r.routes) - r.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn delivery_before_pickup_flagged() {
        let inst = line_instance(1, 1);
        let l = inst.layout();
        let routes = vec![vec![
            l.origin(0),
            l.delivery(0),
            l.pickup(0),
            l.destination(0),
        ]];
        let v = validate_tour(&inst, &routes).unwrap_err();
        assert_eq!(v, vec![Violation::CustomerPrecedence { customer: 0 }]);
        assert_eq!(v[0].family(), "customer precedence");
    }

    #[test]
    fn split_customer_flagged() {
        let inst = random_instance(1, 2, 1, 4).unwrap();
        let l = inst.layout();
        let routes = vec![
            vec![l.origin(0), l.pickup(0), l.destination(0)],
            vec![l.origin(1), l.delivery(0), l.destination(1)],
        ];
        let v = validate_tour(&inst, &routes).unwrap_err();
        assert_eq!(v, vec![Violation::Association { customer: 0 }]);
    }

    #[test]
    fn capacity_and_coverage_flagged() {
        let inst = line_instance(2, 1);
        let l = inst.layout();
        let routes = vec![vec![
            l.origin(0),
            l.pickup(0),
            l.pickup(1),
            l.delivery(0),
            l.delivery(1),
            l.destination(0),
        ]];
        let v = validate_tour(&inst, &routes).unwrap_err();
        assert!(matches!(v[0], Violation::Capacity { load: 2, .. }));
        let routes = vec![vec![
            l.origin(0),
            l.pickup(0),
            l.delivery(0),
            l.destination(0),
        ]];
        let v = validate_tour(&inst, &routes).unwrap_err();
        assert_eq!(
            v,
            vec![Violation::Coverage {
                customer: 1,
                visits: 0
            }]
        );
    }

    #[test]
    fn relabeling_vehicles_with_shared_depots_keeps_cost() {
        // both vehicles share origin and destination points
        for seed in 0..5 {
            let base = random_instance(3, 2, 2, seed).unwrap();
            let mut vehicles = base.vehicles().to_vec();
            vehicles[1] = vehicles[0].clone();
            let a = Instance::euclidean(2, vehicles.clone(), base.demands().to_vec()).unwrap();
            vehicles.swap(0, 1);
            let b = Instance::euclidean(2, vehicles, base.demands().to_vec()).unwrap();
            let ra = enumerate_optimum(&a).unwrap();
            let rb = enumerate_optimum(&b).unwrap();
            assert!((ra.cost - rb.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_routes_fail_or_cost_the_same() {
        for seed in 0..10 {
            let inst = random_instance(3, 1, 3, seed).unwrap();
            let r = enumerate_optimum(&inst).unwrap();
            let l = inst.layout();
            // reverse the interior, keep depots in place
            let mut rev = r.routes[0].clone();
            let len = rev.len();
            rev[1..len - 1].reverse();
            match validate_tour(&inst, &[rev.clone()]) {
                Err(_) => {}
                Ok(()) => {
                    let fwd = routes_cost(&inst, &r.routes);
                    let back = routes_cost(&inst, &[rev]);
                    assert!(back >= fwd - 1e-12);
                }
            }
            assert_eq!(r.routes[0][0], l.origin(0));
        }
    }
}
