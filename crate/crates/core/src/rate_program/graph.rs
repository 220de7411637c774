use std::collections::HashMap;

use serde::Serialize;

use super::RateError;
use crate::instance::{Instance, JobId, Topology};

/// One reachability pair `(left, right)` of the snapshot graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RateEdge {
    /// Index into [`BipartiteRateGraph::left`].
    pub left: usize,
    /// Index into [`BipartiteRateGraph::right`].
    pub right: usize,
    /// Edge `(left, p)` where `p` precedes `right` on the canonical path.
    /// `None` for the reflexive edge.
    #[serde(skip)]
    pub parent: Option<usize>,
}

/// Minimal waiting jobs on the left, all waiting jobs on the right, and an
/// edge whenever the right job is reachable from the left one through
/// waiting jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteRateGraph {
    /// Sorted by id.
    pub left: Vec<JobId>,
    /// Sorted by id.
    pub right: Vec<JobId>,
    /// Sorted by `(left id, right id)`.
    pub edges: Vec<RateEdge>,
    pub machines: u32,
    /// Right index of each left vertex.
    pub left_as_right: Vec<usize>,
    /// Edge indices incident to each left vertex.
    pub left_edges: Vec<Vec<usize>>,
    /// Edge indices incident to each right vertex.
    pub right_edges: Vec<Vec<usize>>,
    right_index: HashMap<JobId, usize>,
    left_index: HashMap<JobId, usize>,
}

impl BipartiteRateGraph {
    /// Assembles a graph from explicit edges, for solving the program on
    /// hand-built inputs. No DAG paths are recorded.
    pub fn from_parts(
        left: Vec<JobId>,
        right: Vec<JobId>,
        mut pairs: Vec<(JobId, JobId)>,
        machines: u32,
    ) -> Result<Self, RateError> {
        pairs.sort();
        pairs.dedup();
        let mut g = Self::empty(left, right, machines)?;
        for (l, r) in pairs {
            let (Some(&li), Some(&ri)) = (g.left_index.get(&l), g.right_index.get(&r)) else {
                return Err(RateError::Malformed(format!("edge ({l}, {r}) has an unknown endpoint")));
            };
            g.edges.push(RateEdge {
                left: li,
                right: ri,
                parent: None,
            });
        }
        g.finish()?;
        Ok(g)
    }

    fn empty(mut left: Vec<JobId>, mut right: Vec<JobId>, machines: u32) -> Result<Self, RateError> {
        left.sort();
        right.sort();
        left.dedup();
        right.dedup();
        if right.is_empty() {
            return Err(RateError::EmptyWaiting);
        }
        if machines == 0 {
            return Err(RateError::Malformed("machine count must be positive".into()));
        }
        let right_index: HashMap<JobId, usize> = right.iter().enumerate().map(|(i, &j)| (j, i)).collect();
        let left_index: HashMap<JobId, usize> = left.iter().enumerate().map(|(i, &j)| (j, i)).collect();
        let mut left_as_right = Vec::with_capacity(left.len());
        for l in &left {
            let Some(&ri) = right_index.get(l) else {
                return Err(RateError::Malformed(format!("left job {l} is not waiting")));
            };
            left_as_right.push(ri);
        }
        Ok(Self {
            left,
            right,
            edges: Vec::new(),
            machines,
            left_as_right,
            left_edges: Vec::new(),
            right_edges: Vec::new(),
            right_index,
            left_index,
        })
    }

    fn finish(&mut self) -> Result<(), RateError> {
        self.left_edges = vec![Vec::new(); self.left.len()];
        self.right_edges = vec![Vec::new(); self.right.len()];
        for (k, e) in self.edges.iter().enumerate() {
            self.left_edges[e.left].push(k);
            self.right_edges[e.right].push(k);
        }
        if let Some(r) = self.right_edges.iter().position(|v| v.is_empty()) {
            return Err(RateError::Malformed(format!(
                "waiting job {} has no minimal ancestor",
                self.right[r]
            )));
        }
        for (li, &ri) in self.left_as_right.iter().enumerate() {
            if !self.left_edges[li].iter().any(|&k| self.edges[k].right == ri) {
                return Err(RateError::Malformed(format!(
                    "missing reflexive edge for {}",
                    self.left[li]
                )));
            }
        }
        Ok(())
    }

    pub fn right_idx(&self, id: JobId) -> Option<usize> {
        self.right_index.get(&id).copied()
    }

    pub fn left_idx(&self, id: JobId) -> Option<usize> {
        self.left_index.get(&id).copied()
    }

    pub fn edge_ids(&self, k: usize) -> (JobId, JobId) {
        let e = &self.edges[k];
        (self.left[e.left], self.right[e.right])
    }

    pub fn find_edge(&self, l: JobId, r: JobId) -> Option<usize> {
        let li = self.left_idx(l)?;
        let ri = self.right_idx(r)?;
        self.left_edges[li].iter().copied().find(|&k| self.edges[k].right == ri)
    }

    /// DAG edges along the fixed path of edge `k`, from its left end to its
    /// right end. Empty for reflexive edges.
    pub fn canonical_path(&self, k: usize) -> Vec<(JobId, JobId)> {
        let mut out = Vec::new();
        let mut cur = k;
        while let Some(p) = self.edges[cur].parent {
            out.push((self.right[self.edges[p].right], self.right[self.edges[cur].right]));
            cur = p;
        }
        out.reverse();
        out
    }
}

/// Builds the snapshot graph for `waiting` over a precomputed topology.
///
/// Paths are breadth-first from each minimal job, exploring successors in
/// increasing id order, so each is a shortest path with smallest-id ties.
pub fn build_rate_graph_with(
    waiting: &[JobId],
    topo: &Topology,
    machines: u32,
) -> Result<BipartiteRateGraph, RateError> {
    let n = topo.len();
    let mut is_waiting = vec![false; n];
    let mut right = Vec::with_capacity(waiting.len());
    for &j in waiting {
        let Some(i) = topo.index_of(j) else {
            return Err(RateError::Malformed(format!("unknown job {j}")));
        };
        if !is_waiting[i] {
            is_waiting[i] = true;
            right.push(j);
        }
    }
    let left: Vec<JobId> = right
        .iter()
        .copied()
        .filter(|&j| !topo.pred[topo.idx(j)].iter().any(|&p| is_waiting[p]))
        .collect();
    let mut g = BipartiteRateGraph::empty(left, right, machines)?;

    // Per-root BFS; `slot[node]` holds the edge index created for `node`
    // in the current root's tree, valid while `stamp[node] == root + 1`.
    let mut stamp = vec![0usize; n];
    let mut slot = vec![0usize; n];
    let mut queue = std::collections::VecDeque::new();
    let mut tree: Vec<(JobId, usize, Option<usize>)> = Vec::new();
    for li in 0..g.left.len() {
        let root = topo.idx(g.left[li]);
        tree.clear();
        stamp[root] = li + 1;
        slot[root] = 0;
        tree.push((g.left[li], root, None));
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let v_slot = slot[v];
            for &s in &topo.succ[v] {
                if is_waiting[s] && stamp[s] != li + 1 {
                    stamp[s] = li + 1;
                    slot[s] = tree.len();
                    tree.push((topo.ids[s], s, Some(v_slot)));
                    queue.push_back(s);
                }
            }
        }
        // Re-index the tree by right id so edges come out sorted.
        let base = g.edges.len();
        let mut order: Vec<usize> = (0..tree.len()).collect();
        order.sort_by_key(|&t| tree[t].0);
        let mut pos = vec![0usize; tree.len()];
        for (p, &t) in order.iter().enumerate() {
            pos[t] = p;
        }
        for &t in &order {
            let (id, _, parent) = tree[t];
            g.edges.push(RateEdge {
                left: li,
                right: g.right_index[&id],
                parent: parent.map(|p| base + pos[p]),
            });
        }
    }
    g.finish()?;
    Ok(g)
}

pub fn build_rate_graph(waiting: &[JobId], inst: &Instance) -> Result<BipartiteRateGraph, RateError> {
    let topo = inst
        .topology()
        .map_err(|e| RateError::Malformed(e.to_string()))?;
    build_rate_graph_with(waiting, &topo, inst.machines)
}
