use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of the vertex set into the virtual node, vehicle origins,
/// vehicle destinations, pickups and deliveries.
///
/// Node ids are zero-based: the virtual node is `0`, origins occupy
/// `1..=k`, destinations `k+1..=2k`, pickups `2k+1..2k+1+n` and deliveries
/// the final `n` ids. Adding one to an id gives the conventional one-based
/// numbering used in the JSON outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeLayout {
    n: usize,
    k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Virtual,
    Origin(usize),
    Destination(usize),
    Pickup(usize),
    Delivery(usize),
}

impl NodeKind {
    /// Index of the customer a pickup/delivery node belongs to.
    pub fn customer(self) -> Option<usize> {
        match self {
            NodeKind::Pickup(i) | NodeKind::Delivery(i) => Some(i),
            _ => None,
        }
    }
}

pub fn build_layout(n: usize, k: usize) -> Result<NodeLayout> {
    if n == 0 {
        return Err(Error::invalid(
            "number of customer demands must be at least 1",
        ));
    }
    if k == 0 {
        return Err(Error::invalid("number of vehicles must be at least 1"));
    }
    Ok(NodeLayout { n, k })
}

impl NodeLayout {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total vertex count `2(n+k)+1`.
    pub fn v(&self) -> usize {
        2 * (self.n + self.k) + 1
    }

    pub fn virtual_node(&self) -> usize {
        0
    }

    pub fn origin(&self, vehicle: usize) -> usize {
        debug_assert!(vehicle < self.k);
        1 + vehicle
    }

    pub fn destination(&self, vehicle: usize) -> usize {
        debug_assert!(vehicle < self.k);
        1 + self.k + vehicle
    }

    pub fn pickup(&self, customer: usize) -> usize {
        debug_assert!(customer < self.n);
        1 + 2 * self.k + customer
    }

    pub fn delivery(&self, customer: usize) -> usize {
        debug_assert!(customer < self.n);
        1 + 2 * self.k + self.n + customer
    }

    pub fn origins(&self) -> Range<usize> {
        1..1 + self.k
    }

    pub fn destinations(&self) -> Range<usize> {
        1 + self.k..1 + 2 * self.k
    }

    pub fn pickups(&self) -> Range<usize> {
        1 + 2 * self.k..1 + 2 * self.k + self.n
    }

    pub fn deliveries(&self) -> Range<usize> {
        1 + 2 * self.k + self.n..self.v()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        let k = self.k;
        let n = self.n;
        match node {
            0 => NodeKind::Virtual,
            x if x <= k => NodeKind::Origin(x - 1),
            x if x <= 2 * k => NodeKind::Destination(x - 1 - k),
            x if x <= 2 * k + n => NodeKind::Pickup(x - 1 - 2 * k),
            x if x < self.v() => NodeKind::Delivery(x - 1 - 2 * k - n),
            _ => panic!("node {node} out of range for v = {}", self.v()),
        }
    }

    /// One-based label of a node.
    pub fn label(&self, node: usize) -> usize {
        node + 1
    }

    /// Short display name such as `VO1`, `VD2`, `P3`, `D3` or `O`.
    pub fn name(&self, node: usize) -> String {
        match self.kind(node) {
            NodeKind::Virtual => "O".to_string(),
            NodeKind::Origin(j) => format!("VO{}", j + 1),
            NodeKind::Destination(j) => format!("VD{}", j + 1),
            NodeKind::Pickup(i) => format!("P{}", i + 1),
            NodeKind::Delivery(i) => format!("D{}", i + 1),
        }
    }
}
