use num_traits::Signed;
use serde::Serialize;

use super::flow::FlowNet;
use super::graph::BipartiteRateGraph;
use super::RateError;
use crate::exact::{self, Rational};
use crate::instance::JobId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    TightSet,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Phase {
    #[serde(with = "exact::serde_rational")]
    pub end_time: Rational,
    pub kind: PhaseKind,
    pub removed_right: Vec<JobId>,
    pub removed_left: Vec<JobId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PhaseLog {
    pub phases: Vec<Phase>,
}

/// Primal and dual solution of the rate program; vectors are aligned with
/// the graph's `edges`, `left` and `right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateSolution {
    pub z: Vec<Rational>,
    pub l: Vec<Rational>,
    pub r: Vec<Rational>,
    pub theta: Vec<Rational>,
    pub eta: Rational,
    pub nu: Vec<Rational>,
    pub phases: PhaseLog,
}

impl RateSolution {
    pub fn total_left(&self) -> Rational {
        self.l.iter().sum()
    }

    /// Right vertices with a left neighbour whose load is below 1.
    pub fn active(&self, g: &BipartiteRateGraph) -> Vec<bool> {
        let one = exact::one();
        let mut act = vec![false; g.right.len()];
        for e in &g.edges {
            if self.l[e.left] < one {
                act[e.right] = true;
            }
        }
        act
    }
}

pub(crate) fn check_weights(g: &BipartiteRateGraph, w: &[Rational]) -> Result<(), RateError> {
    if w.len() != g.right.len() {
        return Err(RateError::Malformed(format!(
            "{} weights for {} waiting jobs",
            w.len(),
            g.right.len()
        )));
    }
    if let Some(i) = w.iter().position(|x| !x.is_positive()) {
        return Err(RateError::Malformed(format!(
            "weight of job {} is not positive",
            g.right[i]
        )));
    }
    Ok(())
}

/// Flow network restricted to the live part of the graph, with source arcs
/// of capacity `t * w_j`.
struct Network {
    net: FlowNet,
    source: usize,
    sink: usize,
    /// Forward arc per graph edge (only for live edges).
    arc: Vec<Option<usize>>,
}

impl Network {
    fn right_node(j: usize) -> usize {
        2 + j
    }

    fn left_node(g: &BipartiteRateGraph, i: usize) -> usize {
        2 + g.right.len() + i
    }

    fn build(
        g: &BipartiteRateGraph,
        w: &[Rational],
        t: &Rational,
        right_live: &[bool],
        left_live: &[bool],
    ) -> Self {
        let mut net = FlowNet::new(2 + g.right.len() + g.left.len());
        let (source, sink) = (0, 1);
        for j in 0..g.right.len() {
            if right_live[j] {
                net.add_edge(source, Self::right_node(j), Some(t * &w[j]));
            }
        }
        let mut arc = vec![None; g.edges.len()];
        for (k, e) in g.edges.iter().enumerate() {
            if right_live[e.right] && left_live[e.left] {
                arc[k] = Some(net.add_edge(Self::right_node(e.right), Self::left_node(g, e.left), None));
            }
        }
        for i in 0..g.left.len() {
            if left_live[i] {
                net.add_edge(Self::left_node(g, i), sink, Some(exact::one()));
            }
        }
        Self {
            net,
            source,
            sink,
            arc,
        }
    }
}

enum Probe {
    /// Demands cannot all be met; the minimal violating right set.
    Deficient(Vec<usize>),
    /// Demands met; the union of all tight right sets (possibly empty).
    Feasible(Vec<usize>, Network),
}

fn probe(
    g: &BipartiteRateGraph,
    w: &[Rational],
    t: &Rational,
    right_live: &[bool],
    left_live: &[bool],
) -> Probe {
    let mut nw = Network::build(g, w, t, right_live, left_live);
    let flow = nw.net.max_flow(nw.source, nw.sink);
    let demand: Rational = (0..g.right.len())
        .filter(|&j| right_live[j])
        .map(|j| t * &w[j])
        .sum();
    if flow < demand {
        let seen = nw.net.reachable_from(nw.source);
        let set = (0..g.right.len())
            .filter(|&j| right_live[j] && seen[Network::right_node(j)])
            .collect();
        Probe::Deficient(set)
    } else {
        let reach = nw.net.reaching(nw.sink);
        let set = (0..g.right.len())
            .filter(|&j| right_live[j] && !reach[Network::right_node(j)])
            .collect();
        Probe::Feasible(set, nw)
    }
}

fn neighbourhood(g: &BipartiteRateGraph, set: &[usize], left_live: &[bool]) -> Vec<usize> {
    let mut mark = vec![false; g.left.len()];
    for &j in set {
        for &k in &g.right_edges[j] {
            let i = g.edges[k].left;
            if left_live[i] {
                mark[i] = true;
            }
        }
    }
    (0..g.left.len()).filter(|&i| mark[i]).collect()
}

/// Right-side set `J'` with `|Γ(J')| <= w(J') * t`, if any.
///
/// When some set is strictly deficient the minimal one cut off by a minimum
/// cut is returned; otherwise the union of all sets that are exactly tight.
pub fn find_tight_set(
    g: &BipartiteRateGraph,
    weights: &[Rational],
    t: &Rational,
) -> Result<Option<Vec<JobId>>, RateError> {
    check_weights(g, weights)?;
    if !t.is_positive() {
        return Err(RateError::Malformed("time must be positive".into()));
    }
    let right_live = vec![true; g.right.len()];
    let left_live = vec![true; g.left.len()];
    let set = match probe(g, weights, t, &right_live, &left_live) {
        Probe::Deficient(s) => s,
        Probe::Feasible(s, _) => s,
    };
    Ok((!set.is_empty()).then(|| set.into_iter().map(|j| g.right[j]).collect()))
}

/// Exact optimum of the rate program by water-filling.
///
/// Every live right job is raised at rate `w_j * T`. A phase ends either when
/// a set of right jobs saturates its neighbourhood (those jobs and their
/// neighbours freeze) or when the machine budget is exhausted. The next
/// tight time is found by parametric iteration: at a candidate `T`, a
/// deficient max-flow exposes a set whose ratio `|Γ(J')| / w(J')` is a
/// strictly smaller candidate; a feasible one means `T` is the event time.
pub fn solve_rates(g: &BipartiteRateGraph, weights: &[Rational]) -> Result<RateSolution, RateError> {
    check_weights(g, weights)?;
    let m = Rational::from_integer(g.machines.into());
    let mut right_live = vec![true; g.right.len()];
    let mut left_live = vec![true; g.left.len()];
    let mut z = vec![exact::zero(); g.edges.len()];
    let mut right_time: Vec<Option<Rational>> = vec![None; g.right.len()];
    let mut left_phase: Vec<usize> = vec![usize::MAX; g.left.len()];
    let mut removed_left = 0usize;
    let mut phases = Vec::new();

    while right_live.iter().any(|&b| b) {
        let w_live: Rational = (0..g.right.len())
            .filter(|&j| right_live[j])
            .map(|j| weights[j].clone())
            .sum();
        let n_left = left_live.iter().filter(|&&b| b).count();
        let budget_time = (&m - Rational::from_integer(removed_left.into())) / &w_live;
        let whole_time = Rational::from_integer(n_left.into()) / &w_live;
        let mut t = exact::min(&budget_time, &whole_time);

        let (tight, nw) = loop {
            match probe(g, weights, &t, &right_live, &left_live) {
                Probe::Deficient(set) => {
                    let gamma = neighbourhood(g, &set, &left_live).len();
                    let w_set: Rational = set.iter().map(|&j| weights[j].clone()).sum();
                    let next = Rational::from_integer(gamma.into()) / w_set;
                    debug_assert!(next < t);
                    t = next;
                }
                Probe::Feasible(set, nw) => break (set, nw),
            }
        };

        let (kind, right_set, left_set) = if tight.is_empty() {
            debug_assert_eq!(t, budget_time);
            let r: Vec<usize> = (0..g.right.len()).filter(|&j| right_live[j]).collect();
            let l: Vec<usize> = (0..g.left.len()).filter(|&i| left_live[i]).collect();
            (PhaseKind::Budget, r, l)
        } else {
            let l = neighbourhood(g, &tight, &left_live);
            (PhaseKind::TightSet, tight, l)
        };

        let phase_no = phases.len();
        let mut in_right = vec![false; g.right.len()];
        for &j in &right_set {
            in_right[j] = true;
        }
        let mut in_left = vec![false; g.left.len()];
        for &i in &left_set {
            in_left[i] = true;
        }
        // Within a phase the max-flow already routes exactly `t * w_j` from
        // each frozen right job into the frozen left jobs.
        for (k, e) in g.edges.iter().enumerate() {
            if in_right[e.right] && in_left[e.left] {
                if let Some(a) = nw.arc[k] {
                    z[k] = nw.net.flow_on(a);
                }
            }
        }
        for &j in &right_set {
            right_live[j] = false;
            right_time[j] = Some(t.clone());
        }
        for &i in &left_set {
            left_live[i] = false;
            left_phase[i] = phase_no;
        }
        removed_left += left_set.len();
        phases.push(Phase {
            end_time: t,
            kind,
            removed_right: right_set.iter().map(|&j| g.right[j]).collect(),
            removed_left: left_set.iter().map(|&i| g.left[i]).collect(),
        });
        if kind == PhaseKind::Budget {
            break;
        }
    }

    let mut l = vec![exact::zero(); g.left.len()];
    let mut r = vec![exact::zero(); g.right.len()];
    for (k, e) in g.edges.iter().enumerate() {
        l[e.left] += &z[k];
        r[e.right] += &z[k];
    }
    let last = phases.last().expect("at least one phase");
    let eta = if last.kind == PhaseKind::Budget {
        exact::one() / &last.end_time
    } else {
        exact::zero()
    };
    let theta: Vec<Rational> = left_phase
        .iter()
        .map(|&p| match phases[p].kind {
            PhaseKind::TightSet => exact::one() / &phases[p].end_time - &eta,
            PhaseKind::Budget => exact::zero(),
        })
        .collect();
    let nu = g
        .edges
        .iter()
        .map(|e| {
            let price = &weights[e.right] / &r[e.right];
            &theta[e.left] + &eta - price
        })
        .collect();
    debug_assert!(r
        .iter()
        .zip(&right_time)
        .zip(weights)
        .all(|((rj, tj), wj)| Some(rj / wj) == *tj));
    Ok(RateSolution {
        z,
        l,
        r,
        theta,
        eta,
        nu,
        phases: PhaseLog { phases },
    })
}

/// `Σ w_j ln R_j` in floating point.
pub fn cp_objective(r: &[Rational], weights: &[Rational]) -> Result<f64, RateError> {
    let mut total = 0.0;
    for (rj, wj) in r.iter().zip(weights) {
        if !rj.is_positive() {
            return Err(RateError::ZeroRate);
        }
        total += exact::to_f64(wj) * exact::to_f64(rj).ln();
    }
    Ok(total)
}
