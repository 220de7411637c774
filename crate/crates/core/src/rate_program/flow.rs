//! Dinic max-flow over exact rationals. `None` capacity means unbounded.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};

use crate::exact::Rational;

pub(crate) type Cap = Option<Rational>;

fn positive(c: &Cap) -> bool {
    match c {
        None => true,
        Some(q) => q.is_positive(),
    }
}

fn cap_min(a: &Cap, b: &Cap) -> Cap {
    match (a, b) {
        (None, x) | (x, None) => x.clone(),
        (Some(x), Some(y)) => Some(if x <= y { x.clone() } else { y.clone() }),
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNet {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    /// Residual capacity; arc `a ^ 1` is the reverse of arc `a`.
    res: Vec<Cap>,
    level: Vec<usize>,
    iter: Vec<usize>,
}

impl FlowNet {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            res: Vec::new(),
            level: Vec::new(),
            iter: Vec::new(),
        }
    }

    /// Returns the index of the forward arc.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: Cap) -> usize {
        let a = self.to.len();
        self.to.push(v);
        self.res.push(cap);
        self.adj[u].push(a);
        self.to.push(u);
        self.res.push(Some(Rational::zero()));
        self.adj[v].push(a + 1);
        a
    }

    /// Flow currently routed on forward arc `a`.
    pub fn flow_on(&self, a: usize) -> Rational {
        self.res[a ^ 1].clone().expect("reverse arcs are finite")
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> Rational {
        let mut total = Rational::zero();
        while self.bfs_levels(s, t) {
            self.iter = vec![0; self.adj.len()];
            loop {
                let pushed = self.dfs(s, t, None);
                if pushed.is_zero() {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    fn bfs_levels(&mut self, s: usize, t: usize) -> bool {
        self.level = vec![usize::MAX; self.adj.len()];
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if self.level[v] == usize::MAX && positive(&self.res[a]) {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        self.level[t] != usize::MAX
    }

    fn dfs(&mut self, u: usize, t: usize, limit: Cap) -> Rational {
        if u == t {
            return limit.expect("source arcs are finite");
        }
        while self.iter[u] < self.adj[u].len() {
            let a = self.adj[u][self.iter[u]];
            let v = self.to[a];
            if self.level[v] == self.level[u] + 1 && positive(&self.res[a]) {
                let got = self.dfs(v, t, cap_min(&limit, &self.res[a]));
                if got.is_positive() {
                    if let Some(r) = &mut self.res[a] {
                        *r -= &got;
                    }
                    if let Some(r) = &mut self.res[a ^ 1] {
                        *r += &got;
                    }
                    return got;
                }
            }
            self.iter[u] += 1;
        }
        Rational::zero()
    }

    /// Nodes reachable from `s` through arcs with positive residual.
    pub fn reachable_from(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if !seen[v] && positive(&self.res[a]) {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }

    /// Nodes that can reach `t` through arcs with positive residual.
    pub fn reaching(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[t] = true;
        let mut q = VecDeque::from([t]);
        while let Some(v) = q.pop_front() {
            // Arc `a ^ 1` runs u -> v whenever `a` runs v -> u.
            for &a in &self.adj[v] {
                let u = self.to[a];
                if !seen[u] && positive(&self.res[a ^ 1]) {
                    seen[u] = true;
                    q.push_back(u);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    #[test]
    fn small_network() {
        // s=0, t=3; two paths with a cross arc.
        let mut f = FlowNet::new(4);
        f.add_edge(0, 1, Some(rat(3, 2)));
        f.add_edge(0, 2, Some(int(1)));
        f.add_edge(1, 2, None);
        f.add_edge(1, 3, Some(rat(1, 2)));
        f.add_edge(2, 3, Some(int(2)));
        assert_eq!(f.max_flow(0, 3), rat(5, 2));
        let from_s = f.reachable_from(0);
        assert!(!from_s[3]);
    }

    #[test]
    fn cut_sides() {
        let mut f = FlowNet::new(3);
        let a = f.add_edge(0, 1, Some(int(1)));
        f.add_edge(1, 2, Some(int(5)));
        assert_eq!(f.max_flow(0, 2), int(1));
        assert_eq!(f.flow_on(a), int(1));
        assert_eq!(f.reaching(2), vec![false, true, true]);
        assert_eq!(f.reachable_from(0), vec![true, false, false]);
    }
}
