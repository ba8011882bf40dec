//! The full integer program: permutation bits, vehicle-assignment bits,
//! linear rows for every routing rule, and the convexified objective.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::convexify::{convexified_objective, GammaPolicy, PsdCertificate, QuadraticCost, Route};
use crate::error::{Error, Result};
use crate::graph_core::{route_assignment, Permutation};
use crate::instance::{CapacityVectors, Instance, NodeLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Degree,
    VehiclePrecedence,
    Assignment,
    CustomerPrecedence,
    Capacity,
    BigMLink,
    Symmetry,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Degree,
        Family::VehiclePrecedence,
        Family::Assignment,
        Family::CustomerPrecedence,
        Family::Capacity,
        Family::BigMLink,
        Family::Symmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Degree => "degree",
            Family::VehiclePrecedence => "vehicle precedence",
            Family::Assignment => "assignment",
            Family::CustomerPrecedence => "customer precedence",
            Family::Capacity => "capacity",
            Family::BigMLink => "big-M link",
            Family::Symmetry => "symmetry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub family: Family,
}

impl LinearConstraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` breaks the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let r = self.activity(x) - self.rhs;
        match self.relation {
            Relation::Le => r.max(0.0),
            Relation::Eq => r.abs(),
        }
    }
}

/// Index map of the decision vector: `v²` permutation bits followed by
/// `n·k` assignment bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    layout: NodeLayout,
}

impl VarLayout {
    pub fn new(layout: NodeLayout) -> Self {
        Self { layout }
    }

    pub fn layout(&self) -> &NodeLayout {
        &self.layout
    }

    pub fn num_x(&self) -> usize {
        self.layout.v() * self.layout.v()
    }

    pub fn num_vars(&self) -> usize {
        self.num_x() + self.layout.n() * self.layout.k()
    }

    /// Bit "node sits at position `pos`".
    pub fn x(&self, pos: usize, node: usize) -> usize {
        pos * self.layout.v() + node
    }

    /// Bit "customer `i` rides vehicle `j`".
    pub fn z(&self, customer: usize, vehicle: usize) -> usize {
        self.num_x() + customer * self.layout.k() + vehicle
    }

    /// Inverse of [`x`](Self::x) and [`z`](Self::z).
    pub fn describe(&self, var: usize) -> VarRef {
        let v = self.layout.v();
        if var < self.num_x() {
            VarRef::X {
                pos: var / v,
                node: var % v,
            }
        } else {
            let r = var - self.num_x();
            VarRef::Z {
                customer: r / self.layout.k(),
                vehicle: r % self.layout.k(),
            }
        }
    }

    pub fn name(&self, var: usize) -> String {
        match self.describe(var) {
            VarRef::X { pos, node } => format!("x_{}_{}", pos + 1, node + 1),
            VarRef::Z { customer, vehicle } => format!("z_{}_{}", customer + 1, vehicle + 1),
        }
    }

    /// Terms of `pos(node) = Σ_p (p+1) x[p, node]`.
    pub fn position_terms(
        &self,
        node: usize,
        scale: f64,
    ) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.layout.v()).map(move |p| (self.x(p, node), scale * (p + 1) as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    X { pos: usize, node: usize },
    Z { customer: usize, vehicle: usize },
}

fn row(
    name: String,
    terms: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
    family: Family,
) -> LinearConstraint {
    LinearConstraint {
        name,
        terms,
        relation,
        rhs,
        family,
    }
}

/// Every position holds one node and every node one position.
pub fn degree_constraints(layout: &NodeLayout) -> Vec<LinearConstraint> {
    let vars = VarLayout::new(*layout);
    let v = layout.v();
    let mut out = Vec::with_capacity(2 * v);
    for p in 0..v {
        let terms = (0..v).map(|node| (vars.x(p, node), 1.0)).collect();
        out.push(row(
            format!("pos_{}", p + 1),
            terms,
            Relation::Eq,
            1.0,
            Family::Degree,
        ));
    }
    for node in 0..v {
        let terms = (0..v).map(|p| (vars.x(p, node), 1.0)).collect();
        out.push(row(
            format!("node_{}", node + 1),
            terms,
            Relation::Eq,
            1.0,
            Family::Degree,
        ));
    }
    out
}

/// Origin before destination for each vehicle; destination `j` directly
/// before origin `j+1`.
pub fn vehicle_precedence_constraints(layout: &NodeLayout) -> Vec<LinearConstraint> {
    let vars = VarLayout::new(*layout);
    let k = layout.k();
    let mut out = Vec::with_capacity(2 * k - 1);
    for j in 0..k {
        let terms = vars
            .position_terms(layout.origin(j), 1.0)
            .chain(vars.position_terms(layout.destination(j), -1.0))
            .collect();
        out.push(row(
            format!("depots_{}", j + 1),
            terms,
            Relation::Le,
            -1.0,
            Family::VehiclePrecedence,
        ));
    }
    for j in 0..k - 1 {
        let terms = vars
            .position_terms(layout.destination(j), 1.0)
            .chain(vars.position_terms(layout.origin(j + 1), -1.0))
            .collect();
        out.push(row(
            format!("handover_{}", j + 1),
            terms,
            Relation::Eq,
            -1.0,
            Family::VehiclePrecedence,
        ));
    }
    out
}

/// `Σ_j z_ij = 1` per customer, and for each `(i, j)` four rows that force,
/// when `z_ij = 1`: origin_j < pickup_i < delivery_i < destination_j.
pub fn assignment_and_customer_precedence(
    layout: &NodeLayout,
    big_m: f64,
) -> Result<Vec<LinearConstraint>> {
    let v = layout.v() as f64;
    if !(big_m >= v) {
        return Err(Error::invalid(format!("big-M {big_m} is below v = {v}")));
    }
    let vars = VarLayout::new(*layout);
    let (n, k) = (layout.n(), layout.k());
    let mut out = Vec::with_capacity(n + 4 * n * k);
    for i in 0..n {
        let terms = (0..k).map(|j| (vars.z(i, j), 1.0)).collect();
        out.push(row(
            format!("assign_{}", i + 1),
            terms,
            Relation::Eq,
            1.0,
            Family::Assignment,
        ));
    }
    for i in 0..n {
        for j in 0..k {
            let pairs = [
                ('a', layout.origin(j), layout.pickup(i)),
                ('b', layout.pickup(i), layout.destination(j)),
                ('c', layout.pickup(i), layout.delivery(i)),
                ('d', layout.delivery(i), layout.destination(j)),
            ];
            for (tag, before, after) in pairs {
                // pos(before) − pos(after) + M z ≤ M − 1
                let mut terms: Vec<(usize, f64)> = vars
                    .position_terms(before, 1.0)
                    .chain(vars.position_terms(after, -1.0))
                    .collect();
                terms.push((vars.z(i, j), big_m));
                out.push(row(
                    format!("link_{tag}_{}_{}", i + 1, j + 1),
                    terms,
                    Relation::Le,
                    big_m - 1.0,
                    Family::BigMLink,
                ));
            }
        }
    }
    Ok(out)
}

/// Row `r`: load on board after the stop at position `r` is at most `q`.
pub fn capacity_constraints(
    layout: &NodeLayout,
    cap: &CapacityVectors,
    q: u32,
) -> Vec<LinearConstraint> {
    let vars = VarLayout::new(*layout);
    let v = layout.v();
    let p = cap.p();
    let loaded: Vec<usize> = (0..v).filter(|&node| p[node] != 0).collect();
    (0..v)
        .map(|r| {
            let terms = (0..=r)
                .flat_map(|pos| loaded.iter().map(move |&node| (pos, node)))
                .map(|(pos, node)| (vars.x(pos, node), p[node] as f64))
                .collect();
            row(
                format!("load_{}", r + 1),
                terms,
                Relation::Le,
                q as f64,
                Family::Capacity,
            )
        })
        .collect()
}

/// Pins the virtual node to the last position.
pub fn symmetry_break(layout: &NodeLayout) -> Vec<LinearConstraint> {
    let vars = VarLayout::new(*layout);
    let terms = vars.position_terms(layout.virtual_node(), 1.0).collect();
    vec![row(
        "pin_virtual".into(),
        terms,
        Relation::Eq,
        layout.v() as f64,
        Family::Symmetry,
    )]
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FamilyCounts {
    pub degree: usize,
    pub vehicle_precedence: usize,
    pub assignment: usize,
    pub customer_precedence: usize,
    pub capacity: usize,
    pub big_m_link: usize,
    pub symmetry: usize,
}

impl FamilyCounts {
    pub fn of(rows: &[LinearConstraint]) -> Self {
        let mut c = Self::default();
        for r in rows {
            *c.slot(r.family) += 1;
        }
        c
    }

    fn slot(&mut self, f: Family) -> &mut usize {
        match f {
            Family::Degree => &mut self.degree,
            Family::VehiclePrecedence => &mut self.vehicle_precedence,
            Family::Assignment => &mut self.assignment,
            Family::CustomerPrecedence => &mut self.customer_precedence,
            Family::Capacity => &mut self.capacity,
            Family::BigMLink => &mut self.big_m_link,
            Family::Symmetry => &mut self.symmetry,
        }
    }

    pub fn total(&self) -> usize {
        self.degree
            + self.vehicle_precedence
            + self.assignment
            + self.customer_precedence
            + self.capacity
            + self.big_m_link
            + self.symmetry
    }

    /// Rows that order nodes along the tour: depot order and the linked
    /// pickup/delivery rows.
    pub fn generalized_order(&self) -> usize {
        self.vehicle_precedence + self.customer_precedence + self.big_m_link
    }
}

/// The assembled program `min xᵀQ̃x − dᵀx + constant` over binaries.
#[derive(Debug, Clone)]
pub struct QpModel {
    vars: VarLayout,
    objective: QuadraticCost,
    route: Route,
    certificate: PsdCertificate,
    constraints: Vec<LinearConstraint>,
    counts: FamilyCounts,
    big_m: f64,
    routing_cost: DMatrix<f64>,
    q: u32,
    instance: Instance,
}

pub fn assemble(instance: &Instance, policy: GammaPolicy) -> Result<QpModel> {
    assemble_with(instance, policy, instance.v() as f64 + 1.0)
}

pub fn assemble_with(instance: &Instance, policy: GammaPolicy, big_m: f64) -> Result<QpModel> {
    let layout = *instance.layout();
    let routing_cost = instance.routing_costs();
    let conv = convexified_objective(&routing_cost, policy)?;
    let mut constraints = degree_constraints(&layout);
    constraints.extend(vehicle_precedence_constraints(&layout));
    constraints.extend(assignment_and_customer_precedence(&layout, big_m)?);
    constraints.extend(capacity_constraints(
        &layout,
        &instance.capacity_vectors(),
        instance.q(),
    ));
    constraints.extend(symmetry_break(&layout));
    let counts = FamilyCounts::of(&constraints);
    Ok(QpModel {
        vars: VarLayout::new(layout),
        objective: conv.cost,
        route: conv.route,
        certificate: conv.certificate,
        constraints,
        counts,
        big_m,
        routing_cost,
        q: instance.q(),
        instance: instance.clone(),
    })
}

impl QpModel {
    pub fn vars(&self) -> &VarLayout {
        &self.vars
    }

    pub fn layout(&self) -> &NodeLayout {
        self.vars.layout()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.num_vars()
    }

    pub fn quadratic(&self) -> &QuadraticCost {
        &self.objective
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn certificate(&self) -> &PsdCertificate {
        &self.certificate
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn counts(&self) -> &FamilyCounts {
        &self.counts
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn gamma(&self) -> f64 {
        self.objective.gamma()
    }

    pub fn constant(&self) -> f64 {
        self.objective.constant()
    }

    pub fn capacity(&self) -> u32 {
        self.q
    }

    /// The instance this model was assembled from.
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// Cost matrix the objective is built from.
    pub fn routing_cost(&self) -> &DMatrix<f64> {
        &self.routing_cost
    }

    /// Objective at a full decision vector (assignment bits carry no cost).
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objective.objective(&x[..self.vars.num_x()])
    }

    pub fn violated_rows(&self, x: &[f64], tol: f64) -> Vec<&LinearConstraint> {
        self.constraints
            .iter()
            .filter(|r| r.violation(x) > tol)
            .collect()
    }

    /// Decision vector for a tour with the vehicle assignment read off its
    /// routes.
    pub fn lift(&self, tour: &Permutation, routes: &[Vec<usize>]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars()];
        for (pos, &node) in tour.order().iter().enumerate() {
            x[self.vars.x(pos, node)] = 1.0;
        }
        for (i, j) in route_assignment(self.layout(), routes)
            .into_iter()
            .enumerate()
        {
            if j < self.layout().k() {
                x[self.vars.z(i, j)] = 1.0;
            }
        }
        x
    }

    /// Writes the model in CPLEX LP format. The quadratic bracket holds
    /// `2Q̃` so that the `/ 2` convention gives `xᵀQ̃x`; the constant is in
    /// a comment.
    pub fn write_lp<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let q = &self.objective;
        let v = self.layout().v();
        let name = |j: usize| self.vars.name(j);
        writeln!(
            w,
            "\\ n = {} k = {} q = {}",
            self.layout().n(),
            self.layout().k(),
            self.q
        )?;
        writeln!(
            w,
            "\\ route = {:?} gamma = {} big_m = {}",
            self.route,
            q.gamma(),
            self.big_m
        )?;
        writeln!(w, "\\ constant = {:e}", self.constant())?;
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        let mut col = 0;
        for (j, &dj) in q.d().iter().enumerate() {
            if dj != 0.0 {
                write!(w, " {} {} {}", sign(-dj), (-dj).abs(), name(j))?;
                col = wrap(&mut w, col)?;
            }
        }
        write!(w, " + [")?;
        for (p, r) in q.nonzero_blocks() {
            let blk = q.block(p, r);
            for a in 0..v {
                for b in 0..v {
                    let (i, j) = (p * v + a, r * v + b);
                    if i > j {
                        continue;
                    }
                    let mut coef = blk[(a, b)];
                    if i == j {
                        coef += q.d()[i];
                    }
                    if coef == 0.0 {
                        continue;
                    }
                    if i == j {
                        write!(w, " {} {} {} ^ 2", sign(coef), (2.0 * coef).abs(), name(i))?;
                    } else {
                        write!(
                            w,
                            " {} {} {} * {}",
                            sign(coef),
                            (4.0 * coef).abs(),
                            name(i),
                            name(j)
                        )?;
                    }
                    col = wrap(&mut w, col)?;
                }
            }
        }
        writeln!(w, " ] / 2")?;
        writeln!(w, "Subject To")?;
        for r in &self.constraints {
            write!(w, " {}:", r.name)?;
            let mut col = 0;
            for &(j, a) in &r.terms {
                write!(w, " {} {} {}", sign(a), a.abs(), name(j))?;
                col = wrap(&mut w, col)?;
            }
            let rel = match r.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            writeln!(w, " {rel} {}", r.rhs)?;
        }
        writeln!(w, "Binaries")?;
        for j in 0..self.num_vars() {
            write!(w, " {}", name(j))?;
            if (j + 1) % 10 == 0 || j + 1 == self.num_vars() {
                writeln!(w)?;
            }
        }
        writeln!(w, "End")
    }
}

fn sign(x: f64) -> char {
    if x < 0.0 {
        '-'
    } else {
        '+'
    }
}

fn wrap<W: Write>(w: &mut W, col: usize) -> std::io::Result<usize> {
    if col % 8 == 7 {
        writeln!(w)?;
        write!(w, "   ")?;
    }
    Ok(col + 1)
}

impl fmt::Display for FamilyCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "degree {} | vehicle precedence {} | assignment {} | big-M links {} | capacity {} | symmetry {}",
            self.degree, self.vehicle_precedence, self.assignment, self.big_m_link, self.capacity, self.symmetry
        )
    }
}
