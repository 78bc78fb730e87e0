//! Dual supply/return tree structure.
//!
//! The supply network is stored explicitly as a tree rooted at the reference
//! node `alpha`, with every edge directed away from it. The return network is
//! the structural mirror of the supply network (same node and edge indices,
//! rooted at `beta`), and each boundary valve connects a supply node to its
//! mirrored return node.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Index of a node within its sub-network. The return network reuses the
/// supply indices through the mirror map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    SupplyPipe,
    ReturnPipe,
    BoundaryValve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

impl Edge {
    pub fn new(from: usize, to: usize) -> Self {
        Self {
            from: NodeId(from),
            to: NodeId(to),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    alpha: NodeId,
    supply_edges: Vec<Edge>,
    boundary_valves: Vec<NodeId>,
    return_edges: Vec<Edge>,
    node_order: Vec<NodeId>,
}

impl NetworkTopology {
    /// Builds the supply half of a network. Structural problems are not
    /// rejected here; call [`validate_topology`] for a full report.
    pub fn new(alpha: usize, supply_edges: Vec<Edge>, boundary_valves: Vec<usize>) -> Self {
        let alpha = NodeId(alpha);
        let boundary_valves: Vec<NodeId> = boundary_valves.into_iter().map(NodeId).collect();
        let node_order = default_node_order(alpha, &supply_edges, &boundary_valves);
        Self {
            alpha,
            supply_edges,
            boundary_valves,
            return_edges: Vec::new(),
            node_order,
        }
    }

    /// Replaces the derived node ordering. Intended for importing externally
    /// ordered incidence data; the validator checks the result.
    pub fn with_node_order(mut self, order: Vec<usize>) -> Self {
        self.node_order = order.into_iter().map(NodeId).collect();
        self
    }

    pub fn alpha(&self) -> NodeId {
        self.alpha
    }

    pub fn supply_edges(&self) -> &[Edge] {
        &self.supply_edges
    }

    pub fn boundary_valves(&self) -> &[NodeId] {
        &self.boundary_valves
    }

    /// Empty until [`mirror_return`] has been applied.
    pub fn return_edges(&self) -> &[Edge] {
        &self.return_edges
    }

    pub fn node_order(&self) -> &[NodeId] {
        &self.node_order
    }

    pub fn n_pipes(&self) -> usize {
        self.supply_edges.len()
    }

    pub fn n_valves(&self) -> usize {
        self.boundary_valves.len()
    }

    /// Number of parameters in the symmetric estimation model.
    pub fn n_params(&self) -> usize {
        self.n_pipes() + self.n_valves()
    }

    pub fn n_nodes(&self) -> usize {
        self.supply_edges.len() + 1
    }

    pub fn is_mirrored(&self) -> bool {
        !self.return_edges.is_empty() || self.supply_edges.is_empty()
    }

    /// Every edge of the full network in conventional numbering: valves
    /// first, then supply pipes, then return pipes (when mirrored).
    pub fn edges(&self) -> Vec<(EdgeKind, Edge)> {
        let valves = self.boundary_valves.iter().map(|&n| {
            (
                EdgeKind::BoundaryValve,
                Edge {
                    from: n,
                    to: n,
                },
            )
        });
        let supply = self.supply_edges.iter().map(|&e| (EdgeKind::SupplyPipe, e));
        let ret = self.return_edges.iter().map(|&e| (EdgeKind::ReturnPipe, e));
        valves.chain(supply).chain(ret).collect()
    }

    /// Parent edge of each node, `None` for alpha or when the supply edges do
    /// not form a tree.
    fn parent_edges(&self) -> Option<Vec<Option<usize>>> {
        let n = self.n_nodes();
        let mut parent = vec![None; n];
        for (j, e) in self.supply_edges.iter().enumerate() {
            if e.to.0 >= n || e.from.0 >= n || e.to == self.alpha {
                return None;
            }
            if parent[e.to.0].replace(j).is_some() {
                return None;
            }
        }
        Some(parent)
    }

    fn ensure_valid(&self) -> Result<()> {
        let report = validate_topology(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidTopology(report))
        }
    }

    /// Paths for every valve, in valve order.
    pub fn boundary_paths(&self) -> Result<Vec<BoundaryPath>> {
        self.ensure_valid()?;
        let parent = self.parent_edges().ok_or(Error::InvalidTopology(validate_topology(self)))?;
        Ok((0..self.n_valves())
            .map(|v| trace_path(self, &parent, v))
            .collect())
    }
}

fn default_node_order(alpha: NodeId, edges: &[Edge], valves: &[NodeId]) -> Vec<NodeId> {
    let n = edges.len() + 1;
    let mut seen = vec![false; n];
    if alpha.0 < n {
        seen[alpha.0] = true;
    }
    let mut order = Vec::with_capacity(n.saturating_sub(1));
    for &v in valves {
        if v.0 < n && !seen[v.0] {
            seen[v.0] = true;
            order.push(v);
        }
    }
    order.extend((0..n).filter(|&i| !seen[i]).map(NodeId));
    order
}

fn trace_path(net: &NetworkTopology, parent: &[Option<usize>], valve: usize) -> BoundaryPath {
    let mut edges = Vec::new();
    let mut node = net.boundary_valves[valve];
    while let Some(j) = parent[node.0] {
        edges.push(j);
        node = net.supply_edges[j].from;
    }
    edges.reverse();
    BoundaryPath {
        valve,
        supply_edges: edges,
    }
}

/// One structural defect found by [`validate_topology`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoSupplyEdges,
    NoValves,
    AlphaNotZero(NodeId),
    NodeOutOfRange { edge: usize, node: NodeId },
    SelfLoop { edge: usize },
    EdgeIntoAlpha { edge: usize },
    MultipleParents { node: NodeId },
    Unreachable { node: NodeId },
    InternalDegree { node: NodeId, degree: usize },
    LeafWithoutValve { node: NodeId },
    ValveAtReference { valve: usize },
    ValveNodeOutOfRange { valve: usize, node: NodeId },
    DuplicateValve { node: NodeId },
    BadNodeOrder,
    ReturnNotMirrored,
}

impl Violation {
    /// True for defects that mean the supply graph is not a tree rooted at
    /// alpha.
    pub fn breaks_tree(&self) -> bool {
        matches!(
            self,
            Violation::NodeOutOfRange { .. }
                | Violation::SelfLoop { .. }
                | Violation::EdgeIntoAlpha { .. }
                | Violation::MultipleParents { .. }
                | Violation::Unreachable { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSupplyEdges => write!(f, "network has no supply edges"),
            Violation::NoValves => write!(f, "network has no boundary valves"),
            Violation::AlphaNotZero(a) => write!(f, "reference node alpha must be node 0, got {a}"),
            Violation::NodeOutOfRange { edge, node } => write!(
                f,
                "not a tree: supply edge {edge} references node {node}, outside the dense node range"
            ),
            Violation::SelfLoop { edge } => write!(f, "not a tree: supply edge {edge} is a self-loop"),
            Violation::EdgeIntoAlpha { edge } => write!(
                f,
                "not a tree: supply edge {edge} is directed into the reference node"
            ),
            Violation::MultipleParents { node } => write!(
                f,
                "not a tree: node {node} has more than one incoming supply edge"
            ),
            Violation::Unreachable { node } => write!(
                f,
                "not a tree: node {node} is not reachable from the reference node (orphan or cycle)"
            ),
            Violation::InternalDegree { node, degree } => write!(
                f,
                "internal node {node} has degree {degree}; internal nodes need degree >= 3"
            ),
            Violation::LeafWithoutValve { node } => {
                write!(f, "leaf node {node} has no boundary valve")
            }
            Violation::ValveAtReference { valve } => {
                write!(f, "boundary valve {valve} is attached to the reference node")
            }
            Violation::ValveNodeOutOfRange { valve, node } => write!(
                f,
                "boundary valve {valve} references node {node}, outside the dense node range"
            ),
            Violation::DuplicateValve { node } => {
                write!(f, "node {node} carries more than one boundary valve")
            }
            Violation::BadNodeOrder => write!(
                f,
                "node order must list valve nodes in valve order, then internal nodes"
            ),
            Violation::ReturnNotMirrored => {
                write!(f, "return edges are not the structural mirror of the supply edges")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn is_tree(&self) -> bool {
        !self.violations.iter().any(Violation::breaks_tree)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Checks every structural assumption on the network and reports all
/// violations found.
pub fn validate_topology(net: &NetworkTopology) -> ValidationReport {
    let mut out = Vec::new();
    let n = net.n_nodes();
    let alpha = net.alpha;

    if net.supply_edges.is_empty() {
        out.push(Violation::NoSupplyEdges);
    }
    if net.boundary_valves.is_empty() {
        out.push(Violation::NoValves);
    }
    if alpha.0 != 0 {
        out.push(Violation::AlphaNotZero(alpha));
    }

    let mut degree = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parents = vec![0usize; n];
    for (j, e) in net.supply_edges.iter().enumerate() {
        let mut in_range = true;
        for node in [e.from, e.to] {
            if node.0 >= n {
                out.push(Violation::NodeOutOfRange { edge: j, node });
                in_range = false;
            }
        }
        if !in_range {
            continue;
        }
        if e.from == e.to {
            out.push(Violation::SelfLoop { edge: j });
            continue;
        }
        if e.to == alpha {
            out.push(Violation::EdgeIntoAlpha { edge: j });
        }
        degree[e.from.0] += 1;
        degree[e.to.0] += 1;
        parents[e.to.0] += 1;
        children[e.from.0].push(e.to.0);
    }
    for (i, &p) in parents.iter().enumerate() {
        if p > 1 {
            out.push(Violation::MultipleParents { node: NodeId(i) });
        }
    }

    // Reachability from alpha following edge directions.
    let mut reached = vec![false; n];
    if alpha.0 < n {
        let mut queue = VecDeque::from([alpha.0]);
        reached[alpha.0] = true;
        while let Some(u) = queue.pop_front() {
            for &c in &children[u] {
                if !reached[c] {
                    reached[c] = true;
                    queue.push_back(c);
                }
            }
        }
    }
    for (i, &r) in reached.iter().enumerate() {
        if !r {
            out.push(Violation::Unreachable { node: NodeId(i) });
        }
    }

    let mut valve_count = vec![0usize; n];
    for (v, &node) in net.boundary_valves.iter().enumerate() {
        if node.0 >= n {
            out.push(Violation::ValveNodeOutOfRange { valve: v, node });
        } else if node == alpha {
            out.push(Violation::ValveAtReference { valve: v });
        } else {
            valve_count[node.0] += 1;
        }
    }
    for i in 0..n {
        if NodeId(i) == alpha {
            continue;
        }
        match valve_count[i] {
            0 => {
                if children[i].is_empty() {
                    out.push(Violation::LeafWithoutValve { node: NodeId(i) });
                }
                if degree[i] < 3 {
                    out.push(Violation::InternalDegree {
                        node: NodeId(i),
                        degree: degree[i],
                    });
                }
            }
            1 => {}
            _ => out.push(Violation::DuplicateValve { node: NodeId(i) }),
        }
    }

    if !node_order_ok(net) {
        out.push(Violation::BadNodeOrder);
    }
    if !net.return_edges.is_empty() && net.return_edges != net.supply_edges {
        out.push(Violation::ReturnNotMirrored);
    }

    ValidationReport { violations: out }
}

fn node_order_ok(net: &NetworkTopology) -> bool {
    let n = net.n_nodes();
    let order = &net.node_order;
    if order.len() != n - 1 {
        return false;
    }
    let mut seen = vec![false; n];
    for &node in order {
        if node.0 >= n || node == net.alpha || seen[node.0] {
            return false;
        }
        seen[node.0] = true;
    }
    order.iter().zip(&net.boundary_valves).all(|(a, b)| a == b)
}

/// Fills the return network with the structural mirror of the supply
/// network. Applying it twice has no further effect.
pub fn mirror_return(net: &NetworkTopology) -> NetworkTopology {
    let mut out = net.clone();
    out.return_edges = net.supply_edges.clone();
    out
}

/// Signed node-edge incidence matrix with the alpha row removed. Rows follow
/// the network's node order, columns follow supply edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    pub entries: DMatrix<i8>,
}

impl IncidenceMatrix {
    pub fn to_real<T: Real>(&self) -> DMatrix<T> {
        self.entries.map(|x| match x {
            1 => T::one(),
            -1 => -T::one(),
            _ => T::zero(),
        })
    }
}

pub fn incidence_matrix(net: &NetworkTopology) -> Result<IncidenceMatrix> {
    net.ensure_valid()?;
    let n = net.n_pipes();
    let mut row_of = vec![usize::MAX; net.n_nodes()];
    for (r, node) in net.node_order.iter().enumerate() {
        row_of[node.0] = r;
    }
    let mut entries = DMatrix::<i8>::zeros(n, n);
    for (j, e) in net.supply_edges.iter().enumerate() {
        if e.to != net.alpha {
            entries[(row_of[e.to.0], j)] = 1;
        }
        if e.from != net.alpha {
            entries[(row_of[e.from.0], j)] = -1;
        }
    }
    Ok(IncidenceMatrix { entries })
}

/// Supply-side part of the alpha-to-beta path through one valve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPath {
    pub valve: usize,
    /// Supply edge indices ordered from alpha to the valve's supply node.
    pub supply_edges: Vec<usize>,
}

pub fn boundary_path(net: &NetworkTopology, valve: usize) -> Result<BoundaryPath> {
    if valve >= net.n_valves() {
        return Err(Error::ValveOutOfRange {
            index: valve,
            count: net.n_valves(),
        });
    }
    net.ensure_valid()?;
    let parent = net
        .parent_edges()
        .ok_or_else(|| Error::InvalidTopology(validate_topology(net)))?;
    Ok(trace_path(net, &parent, valve))
}

/// On-disk network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub alpha: usize,
    pub supply_edges: Vec<[usize; 2]>,
    pub boundary_valves: Vec<usize>,
}

impl From<&NetworkFile> for NetworkTopology {
    fn from(file: &NetworkFile) -> Self {
        NetworkTopology::new(
            file.alpha,
            file.supply_edges.iter().map(|&[a, b]| Edge::new(a, b)).collect(),
            file.boundary_valves.clone(),
        )
    }
}

impl From<&NetworkTopology> for NetworkFile {
    fn from(net: &NetworkTopology) -> Self {
        NetworkFile {
            description: None,
            alpha: net.alpha.0,
            supply_edges: net.supply_edges.iter().map(|e| [e.from.0, e.to.0]).collect(),
            boundary_valves: net.boundary_valves.iter().map(|n| n.0).collect(),
        }
    }
}

impl NetworkTopology {
    /// Parses a network JSON document. The result is mirrored but not
    /// validated.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        Ok(mirror_return(&NetworkTopology::from(&file)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from(self))?)
    }
}

/// Draws a random valid network with at most `max_pipes` supply pipes
/// (at least one). Internal nodes get at least two children, every leaf gets
/// a valve, and non-leaf nodes carry a valve with probability
/// `internal_valve_prob`.
pub fn random_network<R: Rng + ?Sized>(
    rng: &mut R,
    max_pipes: usize,
    internal_valve_prob: f64,
) -> NetworkTopology {
    let max_pipes = max_pipes.max(1);
    let mut edges = vec![Edge::new(0, 1)];
    let mut children: Vec<usize> = vec![1, 0];
    let target = rng.gen_range(1..=max_pipes);
    while edges.len() < target {
        let remaining = target - edges.len();
        let n = children.len();
        // Split a leaf into an internal node with two children, or attach a
        // new child to a node that already has children (alpha included).
        let leaves: Vec<usize> = (1..n).filter(|&i| children[i] == 0).collect();
        let parents: Vec<usize> = (0..n).filter(|&i| children[i] >= 2 || i == 0).collect();
        let split = remaining >= 2 && (rng.gen_bool(0.6) || parents.is_empty());
        if split {
            let leaf = leaves[rng.gen_range(0..leaves.len())];
            for _ in 0..2 {
                edges.push(Edge::new(leaf, children.len()));
                children.push(0);
            }
            children[leaf] = 2;
        } else {
            let p = parents[rng.gen_range(0..parents.len())];
            edges.push(Edge::new(p, children.len()));
            children.push(0);
            children[p] += 1;
        }
    }
    let n = children.len();
    let mut valves: Vec<usize> = (1..n)
        .filter(|&i| children[i] == 0 || rng.gen_bool(internal_valve_prob))
        .collect();
    // Shuffle valve order so that valve numbering is not tied to node ids.
    for i in (1..valves.len()).rev() {
        let j = rng.gen_range(0..=i);
        valves.swap(i, j);
    }
    mirror_return(&NetworkTopology::new(0, edges, valves))
}
