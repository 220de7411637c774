use num_traits::Signed;
use serde::Serialize;

use super::graph::BipartiteRateGraph;
use super::solver::RateSolution;
use super::RateError;
use crate::exact::{self, Rational};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Largest violation observed (0 when passed exactly).
    pub max_residual: f64,
    /// Offending items, capped at a handful.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub tolerance: f64,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

const MAX_LISTED: usize = 8;

pub(crate) struct Checker<'a> {
    name: &'static str,
    tol: &'a Rational,
    worst: Rational,
    failures: Vec<String>,
    failed: bool,
}

impl<'a> Checker<'a> {
    pub(crate) fn new(name: &'static str, tol: &'a Rational) -> Self {
        Self {
            name,
            tol,
            worst: exact::zero(),
            failures: Vec::new(),
            failed: false,
        }
    }

    /// Records a non-negative violation amount.
    pub(crate) fn excess(&mut self, amount: Rational, what: impl FnOnce() -> String) {
        if amount.is_positive() {
            if amount > self.worst {
                self.worst = amount.clone();
            }
            if &amount > self.tol {
                self.failed = true;
                if self.failures.len() < MAX_LISTED {
                    self.failures.push(what());
                }
            }
        }
    }

    pub(crate) fn equal(&mut self, a: &Rational, b: &Rational, what: impl FnOnce() -> String) {
        self.excess((a - b).abs(), what);
    }

    pub(crate) fn at_most(&mut self, a: &Rational, b: &Rational, what: impl FnOnce() -> String) {
        self.excess(a - b, what);
    }

    pub(crate) fn fail(&mut self, what: String) {
        self.failed = true;
        if self.failures.len() < MAX_LISTED {
            self.failures.push(what);
        }
    }

    pub(crate) fn done(self) -> AuditCheck {
        AuditCheck {
            name: self.name,
            passed: !self.failed,
            max_residual: exact::to_f64(&self.worst),
            failures: self.failures,
        }
    }
}

/// Checks primal feasibility, stationarity, complementary slackness and the
/// derived price properties of a rate solution. With `tol == 0` every
/// residual must vanish exactly.
pub fn kkt_audit(
    g: &BipartiteRateGraph,
    sol: &RateSolution,
    weights: &[Rational],
    tol: f64,
) -> Result<AuditReport, RateError> {
    if sol.z.len() != g.edges.len()
        || sol.nu.len() != g.edges.len()
        || sol.l.len() != g.left.len()
        || sol.theta.len() != g.left.len()
        || sol.r.len() != g.right.len()
        || weights.len() != g.right.len()
    {
        return Err(RateError::Malformed("solution does not match graph".into()));
    }
    let tol_q = exact::from_f64(tol.max(0.0))
        .ok_or_else(|| RateError::Malformed(format!("tolerance {tol} is not finite")))?;
    let tol_r = &tol_q;
    let one = exact::one();
    let m = Rational::from_integer(g.machines.into());
    let edge = |k: usize| {
        let (a, b) = g.edge_ids(k);
        format!("edge ({a}, {b})")
    };
    let mut checks = Vec::new();

    let mut c = Checker::new("flow-balance", tol_r);
    let mut l_sum = vec![exact::zero(); g.left.len()];
    let mut r_sum = vec![exact::zero(); g.right.len()];
    for (k, e) in g.edges.iter().enumerate() {
        l_sum[e.left] += &sol.z[k];
        r_sum[e.right] += &sol.z[k];
    }
    for i in 0..g.left.len() {
        c.equal(&sol.l[i], &l_sum[i], || format!("left load of {}", g.left[i]));
    }
    for j in 0..g.right.len() {
        c.equal(&sol.r[j], &r_sum[j], || format!("rate of {}", g.right[j]));
    }
    checks.push(c.done());

    let mut c = Checker::new("left-capacity", tol_r);
    for i in 0..g.left.len() {
        c.at_most(&sol.l[i], &one, || format!("load of {} exceeds 1", g.left[i]));
        c.excess(-sol.l[i].clone(), || format!("load of {} negative", g.left[i]));
    }
    checks.push(c.done());

    let total = sol.total_left();
    let mut c = Checker::new("machine-budget", tol_r);
    c.at_most(&total, &m, || "total load exceeds machine count".into());
    checks.push(c.done());

    let mut c = Checker::new("nonnegative-assignment", tol_r);
    for k in 0..g.edges.len() {
        c.excess(-sol.z[k].clone(), || edge(k));
    }
    checks.push(c.done());

    let mut c = Checker::new("positive-rates", tol_r);
    for j in 0..g.right.len() {
        if !sol.r[j].is_positive() {
            c.fail(format!("rate of {} is not positive", g.right[j]));
        }
    }
    checks.push(c.done());

    let mut c = Checker::new("dual-signs", tol_r);
    for i in 0..g.left.len() {
        c.excess(-sol.theta[i].clone(), || format!("theta of {}", g.left[i]));
    }
    c.excess(-sol.eta.clone(), || "eta".into());
    for k in 0..g.edges.len() {
        c.excess(-sol.nu[k].clone(), || format!("nu on {}", edge(k)));
    }
    checks.push(c.done());

    let mut c = Checker::new("stationarity", tol_r);
    for (k, e) in g.edges.iter().enumerate() {
        if !sol.r[e.right].is_positive() {
            c.fail(format!("{} has no rate", edge(k)));
            continue;
        }
        let price = &weights[e.right] / &sol.r[e.right];
        let dual = &sol.theta[e.left] + &sol.eta - &sol.nu[k];
        c.equal(&price, &dual, || edge(k));
    }
    checks.push(c.done());

    let mut c = Checker::new("capacity-slackness", tol_r);
    for i in 0..g.left.len() {
        let v = &sol.theta[i] * (&sol.l[i] - &one);
        c.excess(v.abs(), || format!("left job {}", g.left[i]));
    }
    checks.push(c.done());

    let mut c = Checker::new("budget-slackness", tol_r);
    c.excess((&sol.eta * (&total - &m)).abs(), || "eta with slack budget".into());
    checks.push(c.done());

    let mut c = Checker::new("edge-slackness", tol_r);
    for k in 0..g.edges.len() {
        c.excess((&sol.nu[k] * &sol.z[k]).abs(), || edge(k));
    }
    checks.push(c.done());

    let mut c = Checker::new("full-rate-when-underloaded", tol_r);
    if &m - &total > *tol_r {
        for i in 0..g.left.len() {
            c.at_most(&one, &sol.l[i], || format!("left job {} below rate 1", g.left[i]));
        }
    }
    checks.push(c.done());

    let mut c = Checker::new("weight-covers-rate-price", tol_r);
    for j in 0..g.right.len() {
        let v = &sol.r[j] * &sol.eta;
        c.at_most(&v, &weights[j], || format!("job {}", g.right[j]));
    }
    checks.push(c.done());

    let active = sol.active(g);
    let mut c = Checker::new("active-price-equality", tol_r);
    for j in 0..g.right.len() {
        if active[j] {
            let v = &sol.r[j] * &sol.eta;
            c.equal(&weights[j], &v, || format!("active job {}", g.right[j]));
        }
    }
    checks.push(c.done());

    let mut c = Checker::new("price-bounds", tol_r);
    let w_act: Rational = (0..g.right.len())
        .filter(|&j| active[j])
        .map(|j| weights[j].clone())
        .sum();
    let w_all: Rational = weights.iter().sum();
    c.at_most(&(w_act / &m), &sol.eta, || "eta below active weight / m".into());
    c.at_most(&sol.eta, &(w_all / &m), || "eta above total weight / m".into());
    checks.push(c.done());

    Ok(AuditReport {
        tolerance: tol,
        checks,
    })
}
