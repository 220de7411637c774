use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::public::PublicInstance;
use crate::exact::{self, Rational};
use crate::instance::JobId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMode {
    /// Each component in a static topological order, smallest id first.
    #[default]
    FixedTopological,
    /// Completed jobs of a component by completion time, then the waiting
    /// ones in the static order.
    DynamicCompletion,
}

/// Priority weights of the waiting jobs, listed in priority order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LapsWeights {
    pub order: Vec<JobId>,
    #[serde(serialize_with = "ser_rationals")]
    pub hatw: Vec<Rational>,
    /// Whether `hatw` was evaluated in exact arithmetic.
    pub exact: bool,
}

fn ser_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(exact::format_rational))
}

impl LapsWeights {
    pub fn get(&self, id: JobId) -> Option<&Rational> {
        self.order.iter().position(|&j| j == id).map(|p| &self.hatw[p])
    }

    pub fn as_map(&self) -> BTreeMap<JobId, Rational> {
        self.order.iter().copied().zip(self.hatw.iter().cloned()).collect()
    }
}

/// Total order over `completed` and `waiting` jobs: components by
/// `(release, smallest id)`, then within a component per `mode`.
pub fn laps_order(
    public: &PublicInstance,
    waiting: &[JobId],
    completed: &[(JobId, Rational)],
    mode: OrderMode,
) -> Vec<JobId> {
    let topo = &public.topology;
    let mut rank = vec![0usize; topo.len()];
    for (pos, &v) in topo.topo.iter().enumerate() {
        rank[v] = pos;
    }
    let comp_key = |id: JobId| {
        let c = topo.component[topo.idx(id)];
        (public.job(c).release.clone(), c)
    };
    // (component key, group, secondary key, id); group 0 = completed.
    let mut keyed: Vec<((Rational, JobId), u8, (Rational, usize), JobId)> = Vec::new();
    match mode {
        OrderMode::FixedTopological => {
            for &id in completed.iter().map(|(id, _)| id).chain(waiting) {
                keyed.push((comp_key(id), 0, (exact::zero(), rank[topo.idx(id)]), id));
            }
        }
        OrderMode::DynamicCompletion => {
            for (id, c) in completed {
                keyed.push((comp_key(*id), 0, (c.clone(), rank[topo.idx(*id)]), *id));
            }
            for &id in waiting {
                keyed.push((comp_key(id), 1, (exact::zero(), rank[topo.idx(id)]), id));
            }
        }
    }
    keyed.sort();
    keyed.into_iter().map(|k| k.3).collect()
}

/// `ŵ_j = (w(J_{≤j})^k − w(J_{<j})^k) / w(J)^k` over `jobs` given in priority
/// order. Exact when `k` is an integer, otherwise evaluated in `f64`.
pub fn laps_weights(jobs: &[(JobId, Rational)], k: &Rational) -> LapsWeights {
    assert!(!jobs.is_empty(), "no waiting jobs");
    let order: Vec<JobId> = jobs.iter().map(|(id, _)| *id).collect();
    let total: Rational = jobs.iter().map(|(_, w)| w.clone()).sum();
    if let Some(ki) = k.is_integer().then(|| k.to_integer().to_u32()).flatten() {
        let denom = exact::pow(&total, ki);
        let mut prefix = exact::zero();
        let mut prev_pow = exact::zero();
        let mut hatw = Vec::with_capacity(jobs.len());
        for (_, w) in jobs {
            prefix += w;
            let cur_pow = exact::pow(&prefix, ki);
            hatw.push((&cur_pow - &prev_pow) / &denom);
            prev_pow = cur_pow;
        }
        return LapsWeights {
            order,
            hatw,
            exact: true,
        };
    }
    let kf = exact::to_f64(k);
    let totalf = exact::to_f64(&total);
    let mut prefix = exact::zero();
    let mut prev = 0.0f64;
    let mut hatw = Vec::with_capacity(jobs.len());
    for (_, w) in jobs {
        prefix += w;
        let cur = (exact::to_f64(&prefix) / totalf).powf(kf);
        // Floor at the smallest normal float so every weight stays positive.
        let v = (cur - prev).max(f64::MIN_POSITIVE);
        hatw.push(exact::from_f64(v).expect("finite"));
        prev = cur;
    }
    LapsWeights {
        order,
        hatw,
        exact: false,
    }
}

/// Largest violation of `Σ ŵ = 1` and of the per-job bounds
/// `k w_j w(J_{<j})^{k−1} / w(J)^k ≤ ŵ_j ≤ k w_j w(J_{≤j})^{k−1} / w(J)^k`.
pub fn laps_sandwich_violation(jobs: &[(JobId, Rational)], lw: &LapsWeights, k: &Rational) -> f64 {
    let kf = exact::to_f64(k);
    let total: f64 = jobs.iter().map(|(_, w)| exact::to_f64(w)).sum();
    let sum: Rational = lw.hatw.iter().sum();
    let mut worst = (exact::to_f64(&sum) - 1.0).abs();
    let mut prefix = 0.0f64;
    for ((_, w), h) in jobs.iter().zip(&lw.hatw) {
        let wf = exact::to_f64(w);
        let h = exact::to_f64(h);
        let lo = kf * wf * (prefix / total).powf(kf - 1.0) / total;
        prefix += wf;
        let hi = kf * wf * (prefix / total).powf(kf - 1.0) / total;
        worst = worst.max(lo - h).max(h - hi);
    }
    if lw.hatw.iter().any(|h| !h.is_positive()) {
        worst = worst.max(1.0);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    fn jobs(ws: &[Rational]) -> Vec<(JobId, Rational)> {
        ws.iter().enumerate().map(|(i, w)| (JobId(i as u32), w.clone())).collect()
    }

    #[test]
    fn single_job_gets_everything() {
        let lw = laps_weights(&jobs(&[rat(3, 2)]), &int(3));
        assert_eq!(lw.hatw, vec![int(1)]);
    }

    #[test]
    fn unit_pair_with_k_two() {
        let lw = laps_weights(&jobs(&[int(1), int(1)]), &int(2));
        assert_eq!(lw.hatw, vec![rat(1, 4), rat(3, 4)]);
        assert!(lw.exact);
    }

    #[test]
    fn weighted_pair_with_k_two() {
        let j = jobs(&[int(2), int(1)]);
        let lw = laps_weights(&j, &int(2));
        assert_eq!(lw.hatw, vec![rat(4, 9), rat(5, 9)]);
        assert!(laps_sandwich_violation(&j, &lw, &int(2)) <= 0.0);
    }

    #[test]
    fn fractional_exponent_uses_floats() {
        let j = jobs(&[int(1), int(2), int(3)]);
        let k = rat(5, 2);
        let lw = laps_weights(&j, &k);
        assert!(!lw.exact);
        assert!(laps_sandwich_violation(&j, &lw, &k) < 1e-12);
    }
}
