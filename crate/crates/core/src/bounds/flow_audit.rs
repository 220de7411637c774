use serde::Serialize;

use super::certificate::build_flow_duals;
use super::feasibility::{check_constraint, tolerance, ConstraintForm, FeasibilityReport};
use super::report::inactive_time_check;
use super::{chain_lb, BoundsError, CertMode, DualCertificate};
use crate::exact::{self, serde_rational, serde_rational_opt, Rational};
use crate::instance::Instance;
use crate::rate_program::{AuditCheck, Checker};
use crate::schedulers::{laps_sandwich_violation, objective, ObjectiveKind, SimulationRun};

/// Tolerance for checks evaluated in floating point (non-integral `k`).
const FLOAT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowAuditReport {
    pub mode: CertMode,
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    pub tolerance: f64,
    /// Inequalities the analysis relies on; all must hold.
    pub checks: Vec<AuditCheck>,
    /// Further per-segment inequalities, reported without gating.
    pub advisory: Vec<AuditCheck>,
    #[serde(with = "serde_rational")]
    pub flow: Rational,
    #[serde(with = "serde_rational")]
    pub alpha_sum: Rational,
    /// `m ∫ β_t dt`.
    #[serde(with = "serde_rational")]
    pub beta_mass: Rational,
    /// `Σ_j w_j chain_j`.
    #[serde(with = "serde_rational")]
    pub chain_weight: Rational,
    /// Right-hand side of the end-to-end flow-time bound.
    #[serde(with = "serde_rational")]
    pub flow_bound: Rational,
    /// The dual constraint with the constants the analysis proves.
    pub relaxed_constraint: FeasibilityReport,
    /// Scaled dual objective, present when the relaxed constraint holds.
    #[serde(with = "serde_rational_opt")]
    pub dual_lower_bound: Option<Rational>,
    /// Fraction of busy time that is nice.
    pub nice_fraction: f64,
    #[serde(skip)]
    pub certificate: DualCertificate,
}

impl FlowAuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().chain(&self.advisory).find(|c| c.name == name)
    }
}

/// Builds the flow-time certificate of an FT or FT-LAPS run and verifies the
/// inequalities of its analysis per segment and job, together with the
/// end-to-end flow-time bound.
///
/// FT gates on: `α_{j,s} ≤ 2w_j`; `α_{j,s} ≤ 2η_j R_j`; `α + 2(γ^out−γ^in) ≤ 0`
/// before `j` becomes minimal and `≤ 2(1+ε) β_t L_j` after, for every
/// `t ∈ [r_j, s]`; the relaxed dual constraint; and
/// `flow ≤ (2/ε)(Σα − m∫β + Σ w chain)`.
///
/// FT-LAPS gates on: the convexity sandwich of `ŵ`; `ŵ_j ≥ R_j η` with
/// equality on active jobs; `ŵ(J^act)/m ≤ η ≤ ŵ(J)/m`; `1/e ≤ ηm ≤ 1` on
/// nice segments; and `flow ≤ (2/ε)(Σα − m∫β) + (2/ε²) Σ w chain`. Its
/// per-segment `α` and `γ` inequalities are reported as advisory.
pub fn flow_dual_audit(run: &SimulationRun, inst: &Instance, tol: f64) -> Result<FlowAuditReport, BoundsError> {
    let cert = build_flow_duals(run, inst)?;
    audit_flow_certificate(run, inst, cert, tol)
}

/// Runs the checks of [`flow_dual_audit`] against a given certificate.
pub fn audit_flow_certificate(
    run: &SimulationRun,
    inst: &Instance,
    cert: DualCertificate,
    tol: f64,
) -> Result<FlowAuditReport, BoundsError> {
    if cert.mode == CertMode::Ct {
        return Err(BoundsError::ModeMismatch {
            expected: CertMode::Ft,
            found: cert.mode,
        });
    }
    let laps = cert.mode == CertMode::FtLaps;
    let tol_q = tolerance(tol)?;
    let float_tol = tolerance(FLOAT_TOL.max(tol))?;
    let one = exact::one();
    let two = exact::int(2);
    let three = exact::int(3);
    let eps = cert.epsilon.clone().expect("flow certificate carries epsilon");
    let k = &one / &eps;
    let m = Rational::from_integer(run.trace.machines.into());
    let e = exact::from_f64(std::f64::consts::E).expect("finite");
    let inv_e = exact::from_f64(1.0 / std::f64::consts::E).expect("finite");

    let gamma_scale = if laps { &one + &eps } else { two.clone() };
    let post_scale = if laps { &one + &three * &eps } else { &two * (&one + &eps) };
    let weight_cap = if laps { &k * &e } else { two.clone() };
    let rate_cap = gamma_scale.clone();

    let mut identity = Checker::new("alpha-sum-equals-active-weight", &tol_q);
    let mut weight_bound = Checker::new("alpha-within-weight-bound", &tol_q);
    let mut rate_bound = Checker::new("alpha-within-rate-bound", &tol_q);
    let mut pre_start = Checker::new("pre-start-balance", &tol_q);
    let mut post_start = Checker::new("post-start-balance", &tol_q);
    let mut sandwich = Checker::new("priority-weight-sandwich", &float_tol);
    let mut covers = Checker::new("priority-weight-covers-rate-price", &tol_q);
    let mut window = Checker::new("price-between-priority-masses", &tol_q);
    let mut nice_window = Checker::new("nice-price-window", &tol_q);
    let mut nice_power = Checker::new("nice-price-power-floor", &float_tol);

    let release: Vec<&Rational> = inst.jobs.iter().map(|j| &j.release).collect();
    let job_index: std::collections::HashMap<_, _> = inst.jobs.iter().enumerate().map(|(i, j)| (j.id, i)).collect();
    let weight = |id| &inst.jobs[job_index[&id]].weight;
    let mut min_beta: Vec<Option<Rational>> = vec![None; inst.jobs.len()];
    let mut busy = exact::zero();
    let mut nice_time = exact::zero();
    let power_floor = exact::to_f64(&(&one - &eps)).powf(exact::to_f64(&k));

    for (s, cs) in cert.segments.iter().enumerate() {
        for (i, r) in release.iter().enumerate() {
            if **r < cs.end {
                let b = &min_beta[i];
                if b.as_ref().map_or(true, |b| cs.beta < *b) {
                    min_beta[i] = Some(cs.beta.clone());
                }
            }
        }
        let Some(snap) = run.snapshot_for(s).filter(|_| !run.trace.segments[s].rates.is_empty()) else {
            continue;
        };
        let g = &snap.graph;
        let sol = &snap.solution;
        let at = |what: String| format!("segment {s}: {what}");
        busy += cs.len();
        if cs.nice {
            nice_time += cs.len();
        }

        let active_weight: Rational = cs.active.iter().map(|id| weight(*id)).sum();
        let alpha_total: Rational = cs.alpha.values().sum();
        let expect = if cs.nice || !laps { active_weight.clone() } else { exact::zero() };
        identity.equal(&alpha_total, &expect, || at("Σα differs from active weight".into()));

        let act = sol.active(g);
        for (r, id) in g.right.iter().enumerate() {
            let a = cs.alpha_of(*id);
            let net = cs.net_of(*id);
            let eta_j = &cs.eta_by_job[id];
            weight_bound.at_most(&a, &(&weight_cap * weight(*id)), || at(format!("job {id}")));
            rate_bound.at_most(&a, &(&rate_cap * eta_j * &sol.r[r]), || at(format!("job {id}")));
            let lhs = &a + &gamma_scale * &net;
            match g.left_idx(*id) {
                None => pre_start.at_most(&lhs, &exact::zero(), || at(format!("job {id}"))),
                Some(l) => {
                    let beta = min_beta[job_index[id]].clone().unwrap_or_else(exact::zero);
                    post_start.at_most(&lhs, &(&post_scale * beta * &sol.l[l]), || at(format!("job {id}")));
                }
            }
            if laps {
                let hat = &snap.weights[r];
                let price = &sol.r[r] * &sol.eta;
                if act[r] {
                    covers.equal(hat, &price, || at(format!("active job {id}")));
                } else {
                    covers.at_most(&price, hat, || at(format!("job {id}")));
                }
            }
        }

        if laps {
            let lw = snap.laps.as_ref().expect("FT-LAPS snapshots carry priority weights");
            let ordered: Vec<_> = lw.order.iter().map(|id| (*id, weight(*id).clone())).collect();
            let v = laps_sandwich_violation(&ordered, lw, &k);
            sandwich.excess(exact::from_f64(v).unwrap_or_else(exact::one), || at(format!("violation {v:.3e}")));

            let hat_all: Rational = snap.weights.iter().sum();
            let hat_act: Rational = snap.weights.iter().zip(&act).filter(|(_, a)| **a).map(|(h, _)| h).sum();
            let eta_m = &sol.eta * &m;
            window.at_most(&hat_act, &eta_m, || at("η·m below active priority mass".into()));
            window.at_most(&eta_m, &hat_all, || at("η·m above total priority mass".into()));
            if cs.nice {
                nice_window.at_most(&inv_e, &eta_m, || at(format!("η·m = {}", exact::format_rational(&eta_m))));
                nice_window.at_most(&eta_m, &one, || at(format!("η·m = {}", exact::format_rational(&eta_m))));
                let floor = exact::from_f64(power_floor).unwrap_or_else(exact::zero);
                nice_power.at_most(&floor, &eta_m, || at(format!("η·m = {}", exact::format_rational(&eta_m))));
            }
        }
    }

    let flow = objective(&run.trace, inst, ObjectiveKind::Flow).ok_or(BoundsError::Incomplete)?;
    let alpha_sum = cert.alpha_sum();
    let beta_mass = &m * cert.beta_integral();
    let chain_weight = chain_lb(inst)?;
    let dual = &alpha_sum - &beta_mass;
    let flow_bound = if laps {
        &two / &eps * &dual + &two / (&eps * &eps) * &chain_weight
    } else {
        &two / &eps * (&dual + &chain_weight)
    };
    let mut bound = Checker::new("flow-bound", &tol_q);
    bound.at_most(&flow, &flow_bound, || {
        format!(
            "flow {} exceeds {}",
            exact::format_rational(&flow),
            exact::format_rational(&flow_bound)
        )
    });

    let form = ConstraintForm {
        gamma_scale: gamma_scale.clone(),
        time_scale: weight_cap.clone(),
        from_release: true,
    };
    let relaxed_constraint = check_constraint(inst, &cert, &form, tol)?;
    let mut relaxed = Checker::new("relaxed-dual-constraint", &tol_q);
    for v in &relaxed_constraint.violations {
        relaxed.excess(v.slack.clone(), || format!("job {} at t = {}", v.job, exact::format_rational(&v.time)));
    }
    let dual_lower_bound = relaxed_constraint
        .passed
        .then(|| if laps { &dual / (&k * &e) } else { &dual / &two });

    let inactive = inactive_time_check(inst, &run.trace, &cert, tol)?;
    let mut checks = vec![identity.done(), inactive];
    let mut advisory = Vec::new();
    let per_segment = [weight_bound.done(), rate_bound.done(), pre_start.done(), post_start.done(), relaxed.done()];
    if laps {
        checks.extend([sandwich.done(), covers.done(), window.done(), nice_window.done()]);
        advisory.extend(per_segment);
        advisory.push(nice_power.done());
    } else {
        checks.extend(per_segment);
    }
    checks.push(bound.done());

    let nice_fraction = if busy == exact::zero() { 1.0 } else { exact::to_f64(&(nice_time / busy)) };
    Ok(FlowAuditReport {
        mode: cert.mode,
        epsilon: eps,
        tolerance: tol,
        checks,
        advisory,
        flow,
        alpha_sum,
        beta_mass,
        chain_weight,
        flow_bound,
        relaxed_constraint,
        dual_lower_bound,
        nice_fraction,
        certificate: cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};
    use crate::instance::{gen_random_dag, GenParams, JobSpec, PrecedenceDag};
    use crate::schedulers::{simulate, OrderMode, PolicyConfig};

    fn chain() -> Instance {
        Instance {
            jobs: (0..4).map(|i| JobSpec::new(i, int(1 + i64::from(i % 2)), int(1), int(0))).collect(),
            dag: PrecedenceDag::new([(0, 1), (1, 2), (2, 3)]),
            machines: 1,
            no_surprises: true,
            allow_zero_size: false,
        }
    }

    #[test]
    fn chain_passes_every_check() {
        let i = chain();
        let run = simulate(&i, &PolicyConfig::ft(rat(1, 2))).unwrap();
        let rep = flow_dual_audit(&run, &i, 1e-9).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
        assert!(rep.flow <= rep.flow_bound);
    }

    #[test]
    fn single_job_laps_is_never_nice() {
        // A lone job runs at full rate, so it is never active.
        let i = Instance {
            jobs: vec![JobSpec::new(0, int(2), int(1), int(0))],
            dag: PrecedenceDag::default(),
            ..chain()
        };
        let run = simulate(&i, &PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological)).unwrap();
        let rep = flow_dual_audit(&run, &i, 1e-9).unwrap();
        assert_eq!(rep.nice_fraction, 0.0);
        assert!(rep.certificate.segments.iter().all(|s| s.alpha.is_empty()));
        assert!(rep.check("nice-price-window").unwrap().passed);
        assert!(rep.passed(), "{:?}", rep.checks);
    }

    #[test]
    fn doubled_alpha_is_flagged() {
        let i = Instance {
            jobs: vec![JobSpec::new(0, int(1), int(1), int(0)), JobSpec::new(1, int(1), int(1), int(0))],
            dag: PrecedenceDag::default(),
            ..chain()
        };
        let run = simulate(&i, &PolicyConfig::ft(rat(1, 2))).unwrap();
        let rep = flow_dual_audit(&run, &i, 1e-9).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
        assert_eq!(rep.certificate.segments[0].alpha[&crate::instance::JobId(1)], rat(3, 2));
        let mut cert = rep.certificate.clone();
        for cs in &mut cert.segments {
            for a in cs.alpha.values_mut() {
                *a *= int(2);
            }
        }
        let bad = audit_flow_certificate(&run, &i, cert, 1e-9).unwrap();
        assert!(!bad.check("alpha-within-weight-bound").unwrap().passed);
        assert!(!bad.passed());
    }

    #[test]
    fn random_instances_pass_both_policies() {
        for seed in 0..6 {
            let p = GenParams {
                jobs: 10,
                machines: 2,
                ..GenParams::default()
            };
            let i = gen_random_dag(&p, seed).unwrap();
            let ft = flow_dual_audit(&simulate(&i, &PolicyConfig::ft(rat(1, 2))).unwrap(), &i, 1e-9).unwrap();
            assert!(ft.passed(), "seed {seed}: {:?}", ft.checks);
            let laps = PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological);
            let lr = flow_dual_audit(&simulate(&i, &laps).unwrap(), &i, 1e-9).unwrap();
            assert!(lr.check("flow-bound").unwrap().passed, "seed {seed}");
        }
    }

    #[test]
    fn mismatched_policy_is_refused() {
        let i = chain();
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        assert!(matches!(flow_dual_audit(&run, &i, 1e-9), Err(BoundsError::PolicyMismatch { .. })));
    }
}
