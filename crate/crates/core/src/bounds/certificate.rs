use std::collections::BTreeMap;

use num_traits::Zero;

use super::{BoundsError, CertMode, CertSegment, DualCertificate};
use crate::exact::{self, Rational};
use crate::instance::{Instance, JobId};
use crate::rate_program::BipartiteRateGraph;
use crate::schedulers::{PolicyKind, RateSnapshot, SimulationRun};

fn require_kind(run: &SimulationRun, allowed: &[PolicyKind], expected: &str) -> Result<(), BoundsError> {
    if allowed.contains(&run.policy.kind) {
        Ok(())
    } else {
        Err(BoundsError::PolicyMismatch {
            expected: expected.into(),
            found: run.policy.kind,
        })
    }
}

fn require_complete(run: &SimulationRun, inst: &Instance) -> Result<(), BoundsError> {
    if inst.jobs.iter().all(|j| run.trace.completions.contains_key(&j.id)) {
        Ok(())
    } else {
        Err(BoundsError::Incomplete)
    }
}

/// Snapshot behind a segment, `None` for idle segments.
fn snapshot(run: &SimulationRun, k: usize) -> Result<Option<&RateSnapshot>, BoundsError> {
    if run.trace.segments[k].rates.is_empty() {
        return Ok(None);
    }
    run.snapshot_for(k).map(Some).ok_or(BoundsError::MissingHistory(k))
}

fn empty_segment(run: &SimulationRun, k: usize, beta: Rational) -> CertSegment {
    let seg = &run.trace.segments[k];
    CertSegment {
        start: seg.start.clone(),
        end: seg.end.clone(),
        alpha: BTreeMap::new(),
        beta,
        gamma: BTreeMap::new(),
        net: BTreeMap::new(),
        eta: exact::zero(),
        eta_by_job: BTreeMap::new(),
        active: Vec::new(),
        nice: true,
    }
}

/// Spreads `multiplier(e) · z_e` over the canonical path of every edge with
/// positive flow that `include` admits.
fn path_gamma(
    g: &BipartiteRateGraph,
    z: &[Rational],
    include: impl Fn(usize) -> bool,
    multiplier: impl Fn(usize) -> Rational,
) -> BTreeMap<(JobId, JobId), Rational> {
    let mut gamma: BTreeMap<(JobId, JobId), Rational> = BTreeMap::new();
    for (k, zk) in z.iter().enumerate() {
        if zk.is_zero() || !include(k) {
            continue;
        }
        let amount = multiplier(k) * zk;
        if amount.is_zero() {
            continue;
        }
        for de in g.canonical_path(k) {
            *gamma.entry(de).or_insert_with(exact::zero) += &amount;
        }
    }
    gamma
}

fn net_flow(gamma: &BTreeMap<(JobId, JobId), Rational>) -> BTreeMap<JobId, Rational> {
    let mut net: BTreeMap<JobId, Rational> = BTreeMap::new();
    for ((a, b), v) in gamma {
        *net.entry(*a).or_insert_with(exact::zero) += v;
        *net.entry(*b).or_insert_with(exact::zero) -= v;
    }
    net.retain(|_, v| !v.is_zero());
    net
}

fn weight_map(inst: &Instance) -> BTreeMap<JobId, Rational> {
    inst.jobs.iter().map(|j| (j.id, j.weight.clone())).collect()
}

/// Certificate for a completion-time run: `α_{j,t} = w_j` on active jobs,
/// `β_t = w(U_t)/(2m)` over unfinished jobs, and `γ` carried by active edges
/// with multiplier `η^t`.
pub fn build_ct_duals(run: &SimulationRun, inst: &Instance) -> Result<DualCertificate, BoundsError> {
    require_kind(run, &[PolicyKind::Ct], "CT")?;
    require_complete(run, inst)?;
    let m = Rational::from_integer(run.trace.machines.into());
    let two_m = exact::int(2) * &m;
    let weights = weight_map(inst);

    let mut by_completion: Vec<(&Rational, &Rational)> =
        inst.jobs.iter().map(|j| (&run.trace.completions[&j.id], &j.weight)).collect();
    by_completion.sort();
    let mut unfinished = inst.total_weight();
    let mut done = 0;

    let mut segments = Vec::with_capacity(run.trace.segments.len());
    for (k, seg) in run.trace.segments.iter().enumerate() {
        while done < by_completion.len() && *by_completion[done].0 <= seg.start {
            unfinished -= by_completion[done].1;
            done += 1;
        }
        let mut cs = empty_segment(run, k, &unfinished / &two_m);
        if let Some(snap) = snapshot(run, k)? {
            let g = &snap.graph;
            let sol = &snap.solution;
            let act = sol.active(g);
            for (r, id) in g.right.iter().enumerate() {
                if act[r] {
                    cs.active.push(*id);
                    cs.alpha.insert(*id, weights[id].clone());
                }
            }
            cs.gamma = path_gamma(g, &sol.z, |e| act[g.edges[e].right], |_| sol.eta.clone());
            cs.net = net_flow(&cs.gamma);
            cs.eta = sol.eta.clone();
        }
        segments.push(cs);
    }
    Ok(DualCertificate {
        mode: CertMode::Ct,
        machines: run.trace.machines,
        epsilon: None,
        segments,
    })
}

/// Certificate for a flow-time run.
///
/// Jobs are ordered by component release, then by completion time in the
/// run (FT) or by the policy's priority order (FT-LAPS). With `R` the
/// virtual rates,
/// `α_{j,t} = (w_j·[j active]·Σ_{j'⪯j} R_{j'} + R_j·Σ_{j'≺j active} w_{j'}) / m`,
/// zeroed off nice segments for FT-LAPS; `β_t = w(J_t)/((1+ε)m)`; every edge
/// with flow carries `γ` with the multiplier `η^t_j = Σ_{j'⪯j} w_{j'} / m` of
/// its waiting endpoint `j`.
pub fn build_flow_duals(run: &SimulationRun, inst: &Instance) -> Result<DualCertificate, BoundsError> {
    require_kind(run, &[PolicyKind::Ft, PolicyKind::FtLaps], "FT or FT-LAPS")?;
    require_complete(run, inst)?;
    if !inst.no_surprises {
        return Err(BoundsError::SurprisesPresent);
    }
    let laps = run.policy.kind == PolicyKind::FtLaps;
    let eps = run.policy.epsilon.clone().expect("flow-time policies carry epsilon");
    let one = exact::one();
    let m = Rational::from_integer(run.trace.machines.into());
    let weights = weight_map(inst);
    let topo = inst.topology()?;
    let mut rank = vec![0usize; topo.len()];
    for (pos, &v) in topo.topo.iter().enumerate() {
        rank[v] = pos;
    }
    let release: BTreeMap<JobId, &Rational> = inst.jobs.iter().map(|j| (j.id, &j.release)).collect();
    let order_key = |id: JobId| {
        let v = topo.idx(id);
        (release[&id], topo.component[v], &run.trace.completions[&id], rank[v])
    };

    let mut segments = Vec::with_capacity(run.trace.segments.len());
    for k in 0..run.trace.segments.len() {
        let Some(snap) = snapshot(run, k)? else {
            segments.push(empty_segment(run, k, exact::zero()));
            continue;
        };
        let g = &snap.graph;
        let sol = &snap.solution;
        let act = sol.active(g);
        let order: Vec<JobId> = match (&snap.laps, laps) {
            (Some(lw), true) => lw.order.clone(),
            _ => {
                let mut o = g.right.clone();
                o.sort_by_key(|&id| order_key(id));
                o
            }
        };

        let waiting_weight: Rational = g.right.iter().map(|id| &weights[id]).sum();
        let active_weight: Rational = g.right.iter().zip(&act).filter(|(_, a)| **a).map(|(id, _)| &weights[id]).sum();
        let nice = active_weight >= (&one - &eps) * &waiting_weight;

        let mut cs = empty_segment(run, k, &waiting_weight / ((&one + &eps) * &m));
        cs.nice = nice;
        cs.eta = sol.eta.clone();
        let mut prefix_rate = exact::zero();
        let mut prefix_weight = exact::zero();
        let mut active_before = exact::zero();
        for id in &order {
            let r = g.right_idx(*id).expect("order lists waiting jobs");
            let w = &weights[id];
            prefix_rate += &sol.r[r];
            prefix_weight += w;
            cs.eta_by_job.insert(*id, &prefix_weight / &m);
            if act[r] {
                cs.active.push(*id);
            }
            if nice || !laps {
                let mut a = &sol.r[r] * &active_before;
                if act[r] {
                    a += w * &prefix_rate;
                }
                if !a.is_zero() {
                    cs.alpha.insert(*id, a / &m);
                }
            }
            if act[r] {
                active_before += w;
            }
        }
        cs.active.sort();
        let eta_j = &cs.eta_by_job;
        cs.gamma = path_gamma(g, &sol.z, |_| true, |e| eta_j[&g.right[g.edges[e].right]].clone());
        cs.net = net_flow(&cs.gamma);
        segments.push(cs);
    }
    Ok(DualCertificate {
        mode: if laps { CertMode::FtLaps } else { CertMode::Ft },
        machines: run.trace.machines,
        epsilon: Some(eps),
        segments,
    })
}

/// `Σ_j α_j − m ∫ β_t dt`. A lower bound on the optimum only when the
/// certificate is feasible.
pub fn dual_objective(cert: &DualCertificate) -> Rational {
    cert.alpha_sum() - Rational::from_integer(cert.machines.into()) * cert.beta_integral()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};
    use crate::instance::{JobSpec, PrecedenceDag};
    use crate::schedulers::{simulate, OrderMode, PolicyConfig};

    fn inst(sizes: &[i64], edges: &[(u32, u32)], m: u32) -> Instance {
        Instance {
            jobs: sizes
                .iter()
                .enumerate()
                .map(|(i, &p)| JobSpec::new(i as u32, int(p), int(1), int(0)))
                .collect(),
            dag: PrecedenceDag::new(edges.iter().copied()),
            machines: m,
            no_surprises: true,
            allow_zero_size: false,
        }
    }

    #[test]
    fn single_job_has_no_alpha() {
        let i = inst(&[1], &[], 1);
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &i).unwrap();
        assert!(cert.alpha_totals().is_empty());
        assert_eq!(cert.beta_integral(), rat(1, 4));
        assert_eq!(dual_objective(&cert), rat(-1, 4));
    }

    #[test]
    fn independent_pair_is_active_throughout() {
        let i = inst(&[1, 1], &[], 1);
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &i).unwrap();
        assert_eq!(cert.segments.len(), 1);
        assert_eq!(cert.segments[0].active, vec![JobId(0), JobId(1)]);
        assert_eq!(cert.alpha_totals()[&JobId(0)], int(1));
        assert_eq!(cert.beta_integral(), int(1));
        assert_eq!(dual_objective(&cert), int(1));
    }

    #[test]
    fn full_rate_segments_carry_no_gamma() {
        let i = inst(&[1, 1, 1], &[(0, 1), (0, 2)], 2);
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &i).unwrap();
        for (seg, cs) in run.trace.segments.iter().zip(&cert.segments) {
            if seg.rates.iter().all(|(_, r)| *r == int(1)) {
                assert!(cs.gamma.is_empty() && cs.active.is_empty());
            }
        }
    }

    #[test]
    fn chain_gamma_follows_paths() {
        let i = inst(&[1, 1, 1, 1], &[(0, 1), (1, 2)], 1);
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &i).unwrap();
        let first = &cert.segments[0];
        assert_eq!(first.active.len(), 4);
        assert!(first.gamma.contains_key(&(JobId(1), JobId(2))));
        let total: Rational = first.net.values().sum();
        assert_eq!(total, int(0));
    }

    #[test]
    fn wrong_policy_is_refused() {
        let i = inst(&[1], &[], 1);
        let run = simulate(&i, &PolicyConfig::ft(rat(1, 2))).unwrap();
        assert!(matches!(build_ct_duals(&run, &i), Err(BoundsError::PolicyMismatch { .. })));
        let ct = simulate(&i, &PolicyConfig::ct()).unwrap();
        assert!(matches!(build_flow_duals(&ct, &i), Err(BoundsError::PolicyMismatch { .. })));
    }

    #[test]
    fn flow_alpha_sums_to_active_weight() {
        let i = inst(&[2, 1, 3, 1], &[(0, 1), (0, 2), (2, 3)], 2);
        for cfg in [PolicyConfig::ft(rat(1, 2)), PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological)] {
            let run = simulate(&i, &cfg).unwrap();
            let cert = build_flow_duals(&run, &i).unwrap();
            for cs in &cert.segments {
                let total: Rational = cs.alpha.values().sum();
                let act: Rational = cs.active.iter().map(|_| int(1)).sum();
                let expect = if cs.nice || cert.mode == CertMode::Ft { act } else { int(0) };
                assert_eq!(total, expect);
            }
        }
    }

    #[test]
    fn flow_gamma_telescopes_to_endpoints() {
        let i = inst(&[1, 1, 1, 1], &[(0, 1), (1, 2), (0, 3)], 1);
        let run = simulate(&i, &PolicyConfig::ft(rat(1, 2))).unwrap();
        let cert = build_flow_duals(&run, &i).unwrap();
        for (k, cs) in cert.segments.iter().enumerate() {
            let Some(snap) = run.snapshot_for(k) else { continue };
            let g = &snap.graph;
            let mut expect: BTreeMap<JobId, Rational> = BTreeMap::new();
            for e in 0..g.edges.len() {
                let (a, b) = g.edge_ids(e);
                if a == b {
                    continue;
                }
                let amount = &cs.eta_by_job[&b] * &snap.solution.z[e];
                *expect.entry(a).or_insert_with(exact::zero) += &amount;
                *expect.entry(b).or_insert_with(exact::zero) -= &amount;
            }
            expect.retain(|_, v| !v.is_zero());
            assert_eq!(cs.net, expect);
        }
    }
}
