use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use super::certificate::{build_ct_duals, dual_objective};
use super::exhaustive::{exhaustive_opt, DEFAULT_JOB_LIMIT};
use super::feasibility::{check_ct_dual_feasibility, tolerance, FeasibilityReport};
use super::flow_audit::{flow_dual_audit, FlowAuditReport};
use super::{chain_lb, release_lb, BoundsError, DualCertificate};
use crate::exact::{self, serde_rational, serde_rational_opt, Rational};
use crate::instance::{compute_chains, Instance};
use crate::rate_program::{AuditCheck, Checker};
use crate::schedulers::{objective, ObjectiveKind, PolicyKind, ScheduleTrace, SimulationRun};

/// Every waiting job is inactive for at most `chain_j / speed` time.
///
/// While `j` is inactive all of its minimal ancestors run at full rate, so the
/// largest remaining volume over chains from a minimal job to `j` drops at
/// rate `speed`; it starts at most at `chain_j` and never goes negative.
pub fn inactive_time_check(
    inst: &Instance,
    trace: &ScheduleTrace,
    cert: &DualCertificate,
    tol: f64,
) -> Result<AuditCheck, BoundsError> {
    let tol_q = tolerance(tol)?;
    let chains = compute_chains(inst)?;
    let mut active: BTreeMap<_, Rational> = BTreeMap::new();
    for cs in &cert.segments {
        let len = cs.len();
        for id in &cs.active {
            *active.entry(*id).or_insert_with(exact::zero) += &len;
        }
    }
    let mut c = Checker::new("inactive-time-within-chain", &tol_q);
    for job in &inst.jobs {
        let done = trace.completions.get(&job.id).ok_or(BoundsError::Incomplete)?;
        let waited = done - &job.release;
        let inactive = waited - active.get(&job.id).cloned().unwrap_or_else(exact::zero);
        let budget = chains.get(job.id) / &trace.speed;
        c.at_most(&inactive, &budget, || format!("job {}", job.id));
    }
    Ok(c.done())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub tolerance: f64,
    /// Largest instance handed to [`exhaustive_opt`].
    pub job_limit: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            job_limit: DEFAULT_JOB_LIMIT,
        }
    }
}

/// Objective and certified ratio of one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyBounds {
    pub policy: String,
    pub kind: ObjectiveKind,
    #[serde(with = "serde_rational")]
    pub objective: Rational,
    /// Largest certified lower bound on the optimum for `kind`.
    #[serde(with = "serde_rational")]
    pub lower_bound: Rational,
    pub ratio: f64,
    pub ratio_vs_opt: Option<f64>,
    /// Guaranteed ratio against `lower_bound`, when the certificate backs one.
    pub constant: Option<f64>,
    pub within_constant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    /// `Σ α − m ∫ β` of the completion-time certificate.
    #[serde(with = "serde_rational_opt")]
    pub dual_objective: Option<Rational>,
    pub dual_feasibility: Option<FeasibilityReport>,
    #[serde(with = "serde_rational")]
    pub chain_lb: Rational,
    /// Completion-time release bound `Σ w_j r_j`.
    #[serde(with = "serde_rational")]
    pub release_lb: Rational,
    /// Integral-preemption optimum of `Σ w_j C_j`.
    #[serde(with = "serde_rational_opt")]
    pub exhaustive_opt: Option<Rational>,
    pub ratios: BTreeMap<String, f64>,
    pub policies: Vec<PolicyBounds>,
    pub flow_audits: BTreeMap<String, FlowAuditReport>,
    pub checks: Vec<AuditCheck>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn policy(&self, name: &str) -> Option<&PolicyBounds> {
        self.policies.iter().find(|p| p.policy == name)
    }
}

fn ratio(num: &Rational, den: &Rational) -> f64 {
    if den.is_zero() {
        if num.is_zero() {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        exact::to_f64(&(num / den))
    }
}

fn unique_label(base: &str, used: &BTreeMap<String, f64>) -> String {
    if !used.contains_key(base) {
        return base.to_string();
    }
    (2..).map(|i| format!("{base}#{i}")).find(|l| !used.contains_key(l)).expect("unbounded")
}

/// Lower bounds, certificates and ratios for each run on `inst`.
///
/// A completion-time run is reported twice: as run (`CT-A`) and with every
/// completion time doubled (`CT-B`). For `CT-B` the report checks
/// `cost ≤ 2(2·dual + chain + 2·release)` and a ratio of at most 10 against
/// the best of those bounds and, when available, the exhaustive optimum.
pub fn competitive_report(
    inst: &Instance,
    runs: &[SimulationRun],
    opts: &ReportOptions,
) -> Result<BoundsReport, BoundsError> {
    let tol_q = tolerance(opts.tolerance)?;
    let chain = chain_lb(inst)?;
    let release = release_lb(inst, ObjectiveKind::Completion);
    let opt_ct = exhaustive_opt(inst, ObjectiveKind::Completion, opts.job_limit);
    let opt_flow = opt_ct.as_ref().map(|o| o - &release);
    let two = exact::int(2);

    let mut report = BoundsReport {
        dual_objective: None,
        dual_feasibility: None,
        chain_lb: chain.clone(),
        release_lb: release.clone(),
        exhaustive_opt: opt_ct.clone(),
        ratios: BTreeMap::new(),
        policies: Vec::new(),
        flow_audits: BTreeMap::new(),
        checks: Vec::new(),
    };
    let mut ordering = Checker::new("lower-bounds-below-optimum", &tol_q);
    let mut order_check = |lb: &Rational, opt: &Option<Rational>, what: &str| {
        if let Some(o) = opt {
            ordering.at_most(lb, o, || format!("{what} {} above optimum {}", exact::format_rational(lb), exact::format_rational(o)));
        }
    };
    order_check(&chain, &opt_ct, "chain bound");
    order_check(&release, &opt_ct, "release bound");

    for run in runs {
        let trace = &run.trace;
        match run.policy.kind {
            PolicyKind::Ct => {
                let cert = build_ct_duals(run, inst)?;
                let feas = check_ct_dual_feasibility(inst, &cert, opts.tolerance)?;
                let dual = dual_objective(&cert);
                let cost_a = objective(trace, inst, ObjectiveKind::Completion).ok_or(BoundsError::Incomplete)?;
                let cost_b = &two * &cost_a;
                let mut lb = exact::max(&chain, &release);
                if feas.passed {
                    lb = exact::max(&lb, &dual);
                    order_check(&dual, &opt_ct, "dual objective");
                }

                let mut c = Checker::new("ct-dual-feasibility", &tol_q);
                if let Some(w) = feas.violations.first() {
                    c.fail(format!("job {} at t = {}", w.job, exact::format_rational(&w.time)));
                }
                report.checks.push(c.done());
                report.checks.push(inactive_time_check(inst, trace, &cert, opts.tolerance)?);

                let chain_bound = &two * &dual + &chain + &two * &release;
                let mut c = Checker::new("completion-cost-chain", &tol_q);
                c.at_most(&cost_a, &chain_bound, || "algorithm cost exceeds 2·dual + chain + 2·release".into());
                report.checks.push(c.done());
                let mut c = Checker::new("doubled-cost-chain", &tol_q);
                c.at_most(&cost_b, &(&two * &chain_bound), || "doubled cost exceeds 2(2·dual + chain + 2·release)".into());
                report.checks.push(c.done());

                for (label, cost, constant) in [("CT-A", &cost_a, 5.0), ("CT-B", &cost_b, 10.0)] {
                    let label = unique_label(label, &report.ratios);
                    let r = ratio(cost, &lb);
                    let vs_opt = opt_ct.as_ref().map(|o| ratio(cost, o));
                    let mut c = Checker::new(if constant == 10.0 { "ratio-within-ten" } else { "ratio-within-five" }, &tol_q);
                    if r > constant || vs_opt.is_some_and(|v| v > constant) {
                        c.fail(format!("{label}: ratio {r:.6} (vs optimum {vs_opt:?})"));
                    }
                    report.checks.push(c.done());
                    report.ratios.insert(label.clone(), r);
                    report.policies.push(PolicyBounds {
                        policy: label,
                        kind: ObjectiveKind::Completion,
                        objective: cost.clone(),
                        lower_bound: lb.clone(),
                        ratio: r,
                        ratio_vs_opt: vs_opt,
                        constant: Some(constant),
                        within_constant: Some(r <= constant),
                    });
                }
                report.dual_objective = Some(dual);
                report.dual_feasibility = Some(feas);
            }
            PolicyKind::Ft | PolicyKind::FtLaps => {
                let flow = objective(trace, inst, ObjectiveKind::Flow).ok_or(BoundsError::Incomplete)?;
                let label = unique_label(&run.policy.kind.to_string(), &report.ratios);
                let mut lb = chain.clone();
                let mut constant = None;
                if inst.no_surprises {
                    let audit = flow_dual_audit(run, inst, opts.tolerance)?;
                    if let Some(d) = &audit.dual_lower_bound {
                        order_check(d, &opt_flow, "flow dual objective");
                        lb = exact::max(&lb, d);
                        let eps = exact::to_f64(&audit.epsilon);
                        constant = Some(match run.policy.kind {
                            PolicyKind::Ft => 6.0 / eps,
                            _ => 2.0 * std::f64::consts::E / (eps * eps) + 2.0 / (eps * eps),
                        });
                    }
                    let mut c = Checker::new("flow-audit", &tol_q);
                    for f in audit.checks.iter().filter(|c| !c.passed) {
                        c.fail(format!("{label}: {}", f.name));
                    }
                    report.checks.push(c.done());
                    report.flow_audits.insert(label.clone(), audit);
                }
                let r = ratio(&flow, &lb);
                report.ratios.insert(label.clone(), r);
                report.policies.push(PolicyBounds {
                    policy: label,
                    kind: ObjectiveKind::Flow,
                    objective: flow.clone(),
                    lower_bound: lb,
                    ratio: r,
                    ratio_vs_opt: opt_flow.as_ref().map(|o| ratio(&flow, o)),
                    constant,
                    within_constant: constant.map(|c| r <= c),
                });
            }
        }
    }
    report.checks.push(ordering.done());
    Ok(report)
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
    fn independent_pair_ratio() {
        let i = inst(&[1, 1], &[], 1);
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let rep = competitive_report(&i, &[run], &ReportOptions::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
        assert_eq!(rep.dual_objective, Some(int(1)));
        assert_eq!(rep.exhaustive_opt, Some(int(3)));
        let b = rep.policy("CT-B").unwrap();
        assert_eq!(b.objective, int(4));
        assert_eq!(b.lower_bound, int(2));
        assert_eq!(b.ratio, 2.0);
        assert_eq!(b.ratio_vs_opt, Some(4.0 / 3.0));
    }

    #[test]
    fn chain_instance_within_ten() {
        let i = inst(&[2, 1, 3, 1], &[(0, 1), (1, 2), (2, 3)], 2);
        let runs = vec![
            simulate(&i, &PolicyConfig::ct()).unwrap(),
            simulate(&i, &PolicyConfig::ft(rat(1, 2))).unwrap(),
            simulate(&i, &PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological)).unwrap(),
        ];
        let rep = competitive_report(&i, &runs, &ReportOptions::default()).unwrap();
        assert!(rep.check("ratio-within-ten").unwrap().passed);
        assert!(rep.check("lower-bounds-below-optimum").unwrap().passed);
        assert_eq!(rep.policies.len(), 4);
        assert!(rep.ratios.contains_key("FT-LAPS"));
    }

    #[test]
    fn inactive_time_detects_tampering() {
        let i = inst(&[1, 1, 1], &[(0, 1), (1, 2)], 1);
        let run = simulate(&i, &PolicyConfig::ct()).unwrap();
        let mut cert = build_ct_duals(&run, &i).unwrap();
        assert!(inactive_time_check(&i, &run.trace, &cert, 0.0).unwrap().passed);
        for cs in &mut cert.segments {
            cs.active.clear();
        }
        let mut slow = run.trace.clone();
        slow.speed = int(4);
        assert!(!inactive_time_check(&i, &slow, &cert, 0.0).unwrap().passed);
    }
}
