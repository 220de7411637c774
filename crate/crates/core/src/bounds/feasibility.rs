use std::collections::HashMap;

use serde::Serialize;

use super::{BoundsError, CertMode, DualCertificate};
use crate::exact::{self, serde_rational, Rational};
use crate::instance::{Instance, JobId};

const MAX_LISTED: usize = 16;

/// One evaluation of a dual constraint: `slack = LHS − RHS`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintViolation {
    pub job: JobId,
    #[serde(with = "serde_rational")]
    pub time: Rational,
    #[serde(with = "serde_rational")]
    pub slack: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub tolerance: f64,
    /// Number of `(j, t)` pairs evaluated.
    pub checked: usize,
    /// Largest `LHS − RHS`, earliest first on ties.
    pub worst: Option<ConstraintViolation>,
    /// Pairs exceeding the tolerance, capped at a handful.
    pub violations: Vec<ConstraintViolation>,
    pub violation_count: usize,
    pub passed: bool,
}

impl FeasibilityReport {
    pub fn worst_slack(&self) -> Option<&Rational> {
        self.worst.as_ref().map(|w| &w.slack)
    }
}

/// `α_j + c_γ ∫_t^∞ (γ^out − γ^in) ≤ p_j β_t + c_w w_j (t − b_j)` for all
/// `t ≥ r_j`, where `b_j` is `r_j` or 0.
pub(crate) struct ConstraintForm {
    pub gamma_scale: Rational,
    pub time_scale: Rational,
    pub from_release: bool,
}

impl ConstraintForm {
    /// The completion-time dual constraint itself.
    pub fn completion() -> Self {
        Self {
            gamma_scale: exact::one(),
            time_scale: exact::one(),
            from_release: false,
        }
    }
}

pub(crate) fn tolerance(tol: f64) -> Result<Rational, BoundsError> {
    if tol < 0.0 {
        return Err(BoundsError::Tolerance(tol));
    }
    exact::from_f64(tol).ok_or(BoundsError::Tolerance(tol))
}

/// Evaluates `form` at both ends of every segment (with that segment's `β`)
/// and at the makespan, where `β` vanishes. Between these points both sides
/// are affine in `t`, so the check is exhaustive.
pub(crate) fn check_constraint(
    inst: &Instance,
    cert: &DualCertificate,
    form: &ConstraintForm,
    tol: f64,
) -> Result<FeasibilityReport, BoundsError> {
    let tol_q = tolerance(tol)?;
    let index: HashMap<JobId, usize> = inst.jobs.iter().enumerate().map(|(i, j)| (j.id, i)).collect();
    let mut alpha = vec![exact::zero(); inst.jobs.len()];
    for (id, a) in cert.alpha_totals() {
        if let Some(&i) = index.get(&id) {
            alpha[i] = a;
        }
    }
    let mut suffix = vec![exact::zero(); inst.jobs.len()];
    let mut report = FeasibilityReport {
        tolerance: tol,
        checked: 0,
        worst: None,
        violations: Vec::new(),
        violation_count: 0,
        passed: true,
    };

    let eval = |report: &mut FeasibilityReport, i: usize, t: &Rational, beta: &Rational, sfx: &Rational| {
        let job = &inst.jobs[i];
        let base = if form.from_release { t - &job.release } else { t.clone() };
        let lhs = &alpha[i] + &form.gamma_scale * sfx;
        let rhs = &job.size * beta + &form.time_scale * &job.weight * base;
        let slack = lhs - rhs;
        report.checked += 1;
        let point = ConstraintViolation {
            job: job.id,
            time: t.clone(),
            slack,
        };
        if point.slack > tol_q {
            report.passed = false;
            report.violation_count += 1;
            if report.violations.len() < MAX_LISTED {
                report.violations.push(point.clone());
            }
        }
        let better = match &report.worst {
            None => true,
            Some(w) => point.slack > w.slack || (point.slack == w.slack && (&point.time, point.job) < (&w.time, w.job)),
        };
        if better {
            report.worst = Some(point);
        }
    };

    let makespan = cert.segments.last().map(|s| s.end.clone()).unwrap_or_else(exact::zero);
    let zero = exact::zero();
    for i in 0..inst.jobs.len() {
        if inst.jobs[i].release <= makespan {
            eval(&mut report, i, &makespan, &zero, &zero);
        }
    }
    for seg in cert.segments.iter().rev() {
        for (i, job) in inst.jobs.iter().enumerate() {
            if job.release >= seg.end {
                continue;
            }
            eval(&mut report, i, &seg.end, &seg.beta, &suffix[i]);
            let from = exact::max(&seg.start, &job.release);
            let inner = &suffix[i] + seg.net_of(job.id) * (&seg.end - &from);
            eval(&mut report, i, &from, &seg.beta, &inner);
        }
        let len = seg.len();
        for (id, v) in &seg.net {
            if let Some(&i) = index.get(id) {
                suffix[i] += v * &len;
            }
        }
    }
    Ok(report)
}

/// Checks `α_j − w_j t + ∫_t^∞ (γ^out − γ^in) ≤ p_j β_t` for every job and
/// every time from its release on.
pub fn check_ct_dual_feasibility(
    inst: &Instance,
    cert: &DualCertificate,
    tol: f64,
) -> Result<FeasibilityReport, BoundsError> {
    if cert.mode != CertMode::Ct {
        return Err(BoundsError::ModeMismatch {
            expected: CertMode::Ct,
            found: cert.mode,
        });
    }
    check_constraint(inst, cert, &ConstraintForm::completion(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::build_ct_duals;
    use crate::exact::{int, rat};
    use crate::instance::{gen_random_dag, GenParams, JobSpec, PrecedenceDag, ReleaseMode};
    use crate::schedulers::{simulate, PolicyConfig};

    fn single() -> Instance {
        Instance {
            jobs: vec![JobSpec::new(0, int(1), int(1), int(0))],
            dag: PrecedenceDag::default(),
            machines: 1,
            no_surprises: true,
            allow_zero_size: false,
        }
    }

    #[test]
    fn single_job_worst_slack() {
        let i = single();
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &i).unwrap();
        let rep = check_ct_dual_feasibility(&i, &cert, 1e-9).unwrap();
        assert!(rep.passed);
        let w = rep.worst.unwrap();
        assert_eq!((w.job, w.time, w.slack), (JobId(0), int(0), rat(-1, 2)));
    }

    #[test]
    fn halved_beta_is_reported() {
        let p = GenParams {
            jobs: 8,
            machines: 2,
            ..GenParams::default()
        };
        let i = gen_random_dag(&p, 3).unwrap();
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let mut cert = build_ct_duals(&run, &i).unwrap();
        assert!(check_ct_dual_feasibility(&i, &cert, 1e-9).unwrap().passed);
        for s in &mut cert.segments {
            s.beta /= int(2);
        }
        let rep = check_ct_dual_feasibility(&i, &cert, 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(!rep.violations.is_empty());
        assert!(rep.worst.unwrap().slack > int(0));
    }

    #[test]
    fn staggered_releases_stay_feasible() {
        for seed in 0..10 {
            let p = GenParams {
                jobs: 10,
                machines: 2,
                release_mode: ReleaseMode::Layered,
                no_surprises: false,
                ..GenParams::default()
            };
            let i = gen_random_dag(&p, seed).unwrap();
            let run = simulate(&i, &PolicyConfig::ct()).unwrap();
            let cert = build_ct_duals(&run, &i).unwrap();
            let rep = check_ct_dual_feasibility(&i, &cert, 0.0).unwrap();
            assert!(rep.passed, "seed {seed}: {:?}", rep.violations);
        }
    }

    #[test]
    fn negative_tolerance_is_rejected() {
        let i = single();
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &i).unwrap();
        assert!(check_ct_dual_feasibility(&i, &cert, -1.0).is_err());
    }
}
