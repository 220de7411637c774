//! Floating-point reference solver for the rate program.
//!
//! Shares nothing with water-filling beyond the graph: it starts from an even
//! split and repeatedly applies exact line searches on pairs of edges
//! (shifting assignment from one edge to another) and on single edges
//! (spending unused capacity), until no feasible move improves the
//! objective by more than the threshold.

use serde::Serialize;

use super::graph::BipartiteRateGraph;
use crate::exact::{self, Rational};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePrimal {
    pub z: Vec<f64>,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// First-order violation measure at exit.
    pub violation: f64,
}

impl OraclePrimal {
    pub fn objective(&self, weights: &[f64]) -> f64 {
        self.r.iter().zip(weights).map(|(r, w)| w * r.ln()).sum()
    }
}

pub const ORACLE_THRESHOLD: f64 = 1e-12;

pub fn brute_oracle_rates(g: &BipartiteRateGraph, weights: &[Rational], sweeps: usize) -> OraclePrimal {
    let w: Vec<f64> = weights.iter().map(exact::to_f64).collect();
    let m = f64::from(g.machines);
    let ne = g.edges.len();
    let mut z = vec![0.0; ne];
    let mut l = vec![0.0; g.left.len()];
    let mut r = vec![0.0; g.right.len()];

    let share = (m / g.left.len() as f64).min(1.0);
    for (i, edges) in g.left_edges.iter().enumerate() {
        let each = share / edges.len() as f64;
        for &k in edges {
            z[k] = each;
            r[g.edges[k].right] += each;
        }
        l[i] = share;
    }

    let mut converged = false;
    let mut violation = f64::INFINITY;
    let mut done = 0;
    for sweep in 0..sweeps {
        done = sweep + 1;
        // Single-edge raises while capacity is left.
        for k in 0..ne {
            let e = &g.edges[k];
            let total: f64 = l.iter().sum();
            let slack = (1.0 - l[e.left]).min(m - total);
            if slack > 0.0 {
                z[k] += slack;
                l[e.left] += slack;
                r[e.right] += slack;
            }
        }
        // Pairwise shifts from edge a to edge b.
        for a in 0..ne {
            for b in 0..ne {
                let (ea, eb) = (&g.edges[a], &g.edges[b]);
                if a == b || ea.right == eb.right {
                    continue;
                }
                let (wa, wb) = (w[ea.right], w[eb.right]);
                let (ra, rb) = (r[ea.right], r[eb.right]);
                let mut delta = (wb * ra - wa * rb) / (wa + wb);
                // Positive delta moves assignment from a to b.
                let (mut hi, mut lo) = (z[a], -z[b]);
                if ea.left != eb.left {
                    hi = hi.min(1.0 - l[eb.left]);
                    lo = lo.max(-(1.0 - l[ea.left]));
                }
                delta = delta.clamp(lo.min(0.0), hi.max(0.0));
                if delta != 0.0 {
                    z[a] -= delta;
                    z[b] += delta;
                    r[ea.right] -= delta;
                    r[eb.right] += delta;
                    l[ea.left] -= delta;
                    l[eb.left] += delta;
                }
            }
        }
        violation = first_order_violation(g, &w, &z, &l, &r, m);
        if violation < ORACLE_THRESHOLD {
            converged = true;
            break;
        }
    }
    OraclePrimal {
        z,
        l,
        r,
        converged,
        sweeps: done,
        violation,
    }
}

/// Largest first-order gain available from one feasible move.
fn first_order_violation(
    g: &BipartiteRateGraph,
    w: &[f64],
    z: &[f64],
    l: &[f64],
    r: &[f64],
    m: f64,
) -> f64 {
    let grad: Vec<f64> = g.edges.iter().map(|e| w[e.right] / r[e.right]).collect();
    let total: f64 = l.iter().sum();
    let mut worst: f64 = 0.0;
    for (k, e) in g.edges.iter().enumerate() {
        let slack = (1.0 - l[e.left]).min(m - total).max(0.0);
        worst = worst.max(grad[k] * slack);
    }
    for (a, ea) in g.edges.iter().enumerate() {
        if z[a] <= 0.0 {
            continue;
        }
        for (b, eb) in g.edges.iter().enumerate() {
            let room = if ea.left == eb.left {
                z[a]
            } else {
                z[a].min((1.0 - l[eb.left]).max(0.0))
            };
            worst = worst.max((grad[b] - grad[a]) * room);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::int;
    use crate::instance::JobId;

    fn graph(left: &[u32], right: &[u32], edges: &[(u32, u32)], m: u32) -> BipartiteRateGraph {
        BipartiteRateGraph::from_parts(
            left.iter().map(|&i| JobId(i)).collect(),
            right.iter().map(|&i| JobId(i)).collect(),
            edges.iter().map(|&(a, b)| (JobId(a), JobId(b))).collect(),
            m,
        )
        .unwrap()
    }

    #[test]
    fn chain_converges_to_thirds() {
        let g = graph(&[0], &[0, 1, 2], &[(0, 0), (0, 1), (0, 2)], 1);
        let o = brute_oracle_rates(&g, &[int(1), int(1), int(1)], 10_000);
        assert!(o.converged);
        for r in &o.r {
            assert!((r - 1.0 / 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn weighted_pair_converges() {
        let g = graph(&[0, 1], &[0, 1], &[(0, 0), (1, 1)], 1);
        let o = brute_oracle_rates(&g, &[int(3), int(1)], 10_000);
        assert!(o.converged);
        assert!((o.r[0] - 0.75).abs() < 1e-5);
        assert!((o.r[1] - 0.25).abs() < 1e-5);
    }

    #[test]
    fn single_job_gets_full_rate() {
        let g = graph(&[0], &[0], &[(0, 0)], 1);
        let o = brute_oracle_rates(&g, &[int(2)], 10);
        assert_eq!(o.r, vec![1.0]);
        assert!(o.converged);
    }

    #[test]
    fn exhausted_budget_is_flagged() {
        let g = graph(&[0], &[0, 1, 2], &[(0, 0), (0, 1), (0, 2)], 1);
        let o = brute_oracle_rates(&g, &[int(1), int(2), int(5)], 0);
        assert!(!o.converged);
        assert_eq!(o.r.len(), 3);
    }
}
