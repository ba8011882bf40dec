use std::collections::HashMap;
use std::io::Read;

use nalgebra::DMatrix;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Dense travel-cost matrix. Off-diagonal entries are finite and nonnegative;
/// the diagonal never contributes to a tour cost and may hold any finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: DMatrix<f64>,
    symmetric: bool,
}

impl CostMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::ShapeMismatch {
                expected: "square cost matrix".into(),
                actual: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        let v = entries.nrows();
        for i in 0..v {
            for j in 0..v {
                let c = entries[(i, j)];
                if !c.is_finite() {
                    return Err(Error::invalid(format!("cost[{i},{j}] is not finite")));
                }
                if i != j && c < 0.0 {
                    return Err(Error::invalid(format!("cost[{i},{j}] = {c} is negative")));
                }
            }
        }
        let symmetric = (0..v).all(|i| (0..i).all(|j| entries[(i, j)] == entries[(j, i)]));
        Ok(Self { entries, symmetric })
    }

    pub fn zeros(v: usize) -> Self {
        Self {
            entries: DMatrix::zeros(v, v),
            symmetric: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Copy of this matrix with its diagonal replaced.
    pub fn with_diagonal(&self, diagonal: &[f64]) -> Result<Self> {
        if diagonal.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("diagonal of length {}", self.dim()),
                actual: diagonal.len().to_string(),
            });
        }
        let mut m = self.entries.clone();
        for (i, &d) in diagonal.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self::new(m)
    }

    /// Checks `c[i][j] + c[j][l] >= c[i][l]` over distinct indices, skipping
    /// any index listed in `skip`.
    pub fn check_triangle(&self, skip: &[usize], tol: f64) -> Result<()> {
        let v = self.dim();
        let keep: Vec<usize> = (0..v).filter(|x| !skip.contains(x)).collect();
        for &i in &keep {
            for &j in &keep {
                if i == j {
                    continue;
                }
                for &l in &keep {
                    if l == i || l == j {
                        continue;
                    }
                    let direct = self.get(i, l);
                    let detour = self.get(i, j) + self.get(j, l);
                    if detour < direct - tol * direct.max(1.0) {
                        return Err(Error::invalid(format!(
                            "triangle inequality fails: c[{i},{j}] + c[{j},{l}] = {detour} < c[{i},{l}] = {direct}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Pairwise Euclidean distances. `None` marks the virtual node, whose
/// incident costs are all zero.
pub fn euclidean_costs(points: &[Option<[f64; 2]>]) -> Result<CostMatrix> {
    for (i, p) in points.iter().enumerate() {
        if let Some([x, y]) = p {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::invalid(format!(
                    "coordinates of node {i} are not finite"
                )));
            }
        }
    }
    let v = points.len();
    let m = DMatrix::from_fn(v, v, |i, j| match (points[i], points[j]) {
        (Some(a), Some(b)) if i != j => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
        _ => 0.0,
    });
    CostMatrix::new(m)
}

/// One undirected road segment.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

/// Reads a `from,to,weight` edge list.
pub fn read_edge_list<R: Read>(reader: R) -> Result<Vec<Edge>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut edges = Vec::new();
    for (idx, rec) in rdr.deserialize::<Edge>().enumerate() {
        let edge = rec.map_err(|e| Error::Parse {
            line: idx + 2,
            message: e.to_string(),
        })?;
        if !edge.weight.is_finite() || edge.weight < 0.0 {
            return Err(Error::Parse {
                line: idx + 2,
                message: format!("edge weight {} must be finite and nonnegative", edge.weight),
            });
        }
        edges.push(edge);
    }
    Ok(edges)
}

/// Shortest-path travel costs over an undirected road graph.
///
/// `node_map[i]` names the graph node instance node `i` sits on; `None`
/// marks the virtual node.
pub fn graph_costs(edges: &[Edge], node_map: &[Option<&str>]) -> Result<CostMatrix> {
    let mut graph: UnGraph<(), f64> = UnGraph::default();
    let mut ids: HashMap<String, NodeIndex> = HashMap::new();
    for e in edges {
        if !e.weight.is_finite() || e.weight < 0.0 {
            return Err(Error::invalid(format!(
                "edge {}-{} has invalid weight {}",
                e.from, e.to, e.weight
            )));
        }
        let a = intern(&mut graph, &mut ids, &e.from);
        let b = intern(&mut graph, &mut ids, &e.to);
        graph.add_edge(a, b, e.weight);
    }
    // isolated nodes named only by the instance (e.g. a one-node map)
    for id in node_map.iter().flatten() {
        intern(&mut graph, &mut ids, id);
    }

    let mut dist_cache: HashMap<NodeIndex, _> = HashMap::new();
    let v = node_map.len();
    let mut m = DMatrix::zeros(v, v);
    for i in 0..v {
        let Some(src_id) = node_map[i] else { continue };
        let src = ids[src_id];
        let dist = dist_cache
            .entry(src)
            .or_insert_with(|| dijkstra(&graph, src, None, |e| *e.weight()));
        for j in 0..v {
            let Some(dst_id) = node_map[j] else { continue };
            if i == j {
                continue;
            }
            let dst = ids[dst_id];
            match dist.get(&dst) {
                Some(&d) => m[(i, j)] = d,
                None => {
                    return Err(Error::InfeasibleInstance(format!(
                        "graph node {dst_id} (instance node {}) is unreachable from {src_id} (instance node {})",
                        j + 1,
                        i + 1
                    )))
                }
            }
        }
    }
    CostMatrix::new(m)
}

fn intern(
    graph: &mut UnGraph<(), f64>,
    ids: &mut HashMap<String, NodeIndex>,
    id: &str,
) -> NodeIndex {
    if let Some(&ix) = ids.get(id) {
        return ix;
    }
    let ix = graph.add_node(());
    ids.insert(id.to_string(), ix);
    ix
}
