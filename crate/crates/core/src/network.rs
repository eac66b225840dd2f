//! Directed communication graphs, connectivity analysis and time-varying
//! schedules with a Bernoulli packet-drop overlay.
//!
//! Nodes are numbered `0..M`. An edge `(i, j)` means `i` sends to `j`, so `i`
//! is an in-neighbor of `j`.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DigraphRepr", into = "DigraphRepr")]
pub struct Digraph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DigraphRepr {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<DigraphRepr> for Digraph {
    type Error = Error;

    fn try_from(r: DigraphRepr) -> Result<Self> {
        Digraph::new(r.node_count, r.edges)
    }
}

impl From<Digraph> for DigraphRepr {
    fn from(g: Digraph) -> Self {
        DigraphRepr {
            node_count: g.node_count,
            edges: g.edges.into_iter().collect(),
        }
    }
}

impl Digraph {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) outside 0..{node_count}"
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at node {i}")));
            }
            set.insert((i, j));
        }
        Ok(Self { node_count, edges: set })
    }

    pub fn empty(node_count: usize) -> Self {
        Self {
            node_count,
            edges: BTreeSet::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Ascending list of nodes sending to `j`.
    pub fn in_neighbors(&self, j: usize) -> Vec<usize> {
        self.edges.iter().filter(|(_, t)| *t == j).map(|(s, _)| *s).collect()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.edges.range((i, 0)..(i + 1, 0)).count()
    }

    fn out_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count];
        for &(i, j) in &self.edges {
            out[i].push(j);
        }
        out
    }

    /// Shortest directed path lengths from `src`; `None` when unreachable.
    pub fn distances_from(&self, src: usize) -> Vec<Option<usize>> {
        let out = self.out_lists();
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &out[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// All-pairs distances, `table[j][i] = dist(j, i)`.
    pub fn distance_table(&self) -> Vec<Vec<Option<usize>>> {
        (0..self.node_count).map(|s| self.distances_from(s)).collect()
    }

    /// Edge set `{(i, j) : (i, k) in self, (k, j) in next}`. The result is a
    /// relation, so it may contain loops `(i, i)`.
    pub fn compose(&self, next: &Digraph) -> Result<Digraph> {
        if self.node_count != next.node_count {
            return Err(Error::InvalidInput("composing digraphs of different sizes".into()));
        }
        let out = next.out_lists();
        let mut edges = BTreeSet::new();
        for &(i, k) in &self.edges {
            for &j in &out[k] {
                edges.insert((i, j));
            }
        }
        Ok(Digraph {
            node_count: self.node_count,
            edges,
        })
    }
}

/// Edges `(i, i + 1 mod M)`.
pub fn ring_digraph(m: usize) -> Result<Digraph> {
    if m < 2 {
        return Err(Error::InvalidInput("ring needs at least 2 nodes".into()));
    }
    Digraph::new(m, (0..m).map(|i| (i, (i + 1) % m)))
}

pub fn complete_digraph(m: usize) -> Result<Digraph> {
    if m == 0 {
        return Err(Error::InvalidInput("graph needs at least 1 node".into()));
    }
    Digraph::new(m, (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))))
}

/// Edges `(i, i + 1)` for `i < M - 1`; the last node is the only globally
/// reachable one.
pub fn path_digraph(m: usize) -> Result<Digraph> {
    if m == 0 {
        return Err(Error::InvalidInput("graph needs at least 1 node".into()));
    }
    Digraph::new(m, (1..m).map(|i| (i - 1, i)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub strongly_connected: bool,
    /// Largest pairwise distance; `None` unless strongly connected.
    pub diameter: Option<usize>,
    /// Nodes reachable from every other node.
    pub globally_reachable: Vec<usize>,
    /// `max_j dist(j, i)` for every node, `None` when some `j` cannot reach `i`.
    pub max_in_distance: Vec<Option<usize>>,
}

pub fn analyze(g: &Digraph) -> ConnectivityReport {
    let table = g.distance_table();
    let n = g.node_count;
    let max_in_distance: Vec<Option<usize>> = (0..n)
        .map(|i| {
            (0..n).try_fold(0usize, |acc, j| table[j][i].map(|d| acc.max(d)))
        })
        .collect();
    let globally_reachable: Vec<usize> = (0..n).filter(|&i| max_in_distance[i].is_some()).collect();
    let strongly_connected = n > 0 && globally_reachable.len() == n;
    let diameter = if strongly_connected {
        max_in_distance.iter().flatten().copied().max()
    } else {
        None
    };
    ConnectivityReport {
        strongly_connected,
        diameter,
        globally_reachable,
        max_in_distance,
    }
}

/// Strong connectivity of `G_k ∘ ... ∘ G_1` for `graphs = [G_1, ..., G_k]`.
pub fn is_jointly_strongly_connected(graphs: &[Digraph]) -> Result<bool> {
    let (first, rest) = graphs
        .split_first()
        .ok_or_else(|| Error::InvalidInput("empty graph list".into()))?;
    let mut acc = first.clone();
    for g in rest {
        acc = acc.compose(g)?;
    }
    Ok(analyze(&acc).strongly_connected)
}

/// Communication graph per round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DigraphSchedule {
    Static { graph: Digraph },
    /// Round `k` uses `graphs[(k - 1) mod len]`.
    Sequence { graphs: Vec<Digraph> },
    /// Every edge of `graph` is dropped independently with probability `p`
    /// in every round.
    Dropped { graph: Digraph, p: f64, seed: RngSeed },
}

impl DigraphSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            DigraphSchedule::Static { .. } => Ok(()),
            DigraphSchedule::Sequence { graphs } => {
                let first = graphs
                    .first()
                    .ok_or_else(|| Error::InvalidInput("empty graph sequence".into()))?;
                if graphs.iter().any(|g| g.node_count != first.node_count) {
                    return Err(Error::InvalidInput("graph sequence mixes node counts".into()));
                }
                Ok(())
            }
            DigraphSchedule::Dropped { p, .. } => {
                if (0.0..1.0).contains(p) {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("drop probability must lie in [0, 1), got {p}")))
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            DigraphSchedule::Static { graph } | DigraphSchedule::Dropped { graph, .. } => graph.node_count,
            DigraphSchedule::Sequence { graphs } => graphs.first().map_or(0, |g| g.node_count),
        }
    }

    pub fn is_time_varying(&self) -> bool {
        match self {
            DigraphSchedule::Static { .. } => false,
            DigraphSchedule::Sequence { graphs } => graphs.len() > 1,
            DigraphSchedule::Dropped { p, .. } => *p > 0.0,
        }
    }

    /// Graph of round `k >= 1`; pure in `(self, k)`.
    pub fn edges_at(&self, k: usize) -> Digraph {
        match self {
            DigraphSchedule::Static { graph } => graph.clone(),
            DigraphSchedule::Sequence { graphs } => graphs[(k.max(1) - 1) % graphs.len()].clone(),
            DigraphSchedule::Dropped { graph, p, seed } => {
                if *p <= 0.0 {
                    return graph.clone();
                }
                let mut rng = seed.indexed(k as u64).rng();
                let edges = graph
                    .edges
                    .iter()
                    .filter(|_| rng.random::<f64>() >= *p)
                    .copied()
                    .collect();
                Digraph {
                    node_count: graph.node_count,
                    edges,
                }
            }
        }
    }
}
