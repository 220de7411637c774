//! Dual-fitting certificates, certified lower bounds and competitive ratios.
//!
//! Time sums of the slotted dual are realized as integrals of functions that
//! are piecewise constant on trace segments.

mod certificate;
mod exhaustive;
mod feasibility;
mod flow_audit;
mod report;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::exact::{self, serde_rational, Rational};
use crate::instance::{compute_chains, Instance, InstanceError, JobId};
use crate::schedulers::{ObjectiveKind, PolicyKind};

pub use certificate::{build_ct_duals, build_flow_duals, dual_objective};
pub use exhaustive::{exhaustive_opt, DEFAULT_JOB_LIMIT};
pub use feasibility::{check_ct_dual_feasibility, ConstraintViolation, FeasibilityReport};
pub use flow_audit::{audit_flow_certificate, flow_dual_audit, FlowAuditReport};
pub use report::{competitive_report, inactive_time_check, BoundsReport, PolicyBounds, ReportOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("no rate history for segment {0}")]
    MissingHistory(usize),
    #[error("expected a {expected} run, got {found}")]
    PolicyMismatch { expected: String, found: PolicyKind },
    #[error("certificate mode {found:?} where {expected:?} is required")]
    ModeMismatch { expected: CertMode, found: CertMode },
    #[error("flow-time certificates need every component to share one release date")]
    SurprisesPresent,
    #[error("trace does not complete every job")]
    Incomplete,
    #[error("invalid tolerance {0}")]
    Tolerance(f64),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertMode {
    #[serde(rename = "CT")]
    Ct,
    #[serde(rename = "FT")]
    Ft,
    #[serde(rename = "FT-LAPS")]
    FtLaps,
}

/// Dual values on one trace segment `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertSegment {
    #[serde(with = "serde_rational")]
    pub start: Rational,
    #[serde(with = "serde_rational")]
    pub end: Rational,
    /// Nonzero `α_{j,t}` densities.
    #[serde(serialize_with = "ser_map")]
    pub alpha: BTreeMap<JobId, Rational>,
    #[serde(with = "serde_rational")]
    pub beta: Rational,
    /// Nonzero `γ_{t, j'→j}` keyed by precedence edge.
    #[serde(serialize_with = "ser_edge_map")]
    pub gamma: BTreeMap<(JobId, JobId), Rational>,
    /// `γ^out − γ^in` per job, nonzero entries only.
    #[serde(skip)]
    pub net: BTreeMap<JobId, Rational>,
    /// Budget price `η^t` of the rate program; 0 on idle segments.
    #[serde(with = "serde_rational")]
    pub eta: Rational,
    /// Prefix multipliers `η^t_j` (flow-time modes only).
    #[serde(serialize_with = "ser_map")]
    pub eta_by_job: BTreeMap<JobId, Rational>,
    /// Waiting jobs with a minimal neighbour below full rate.
    pub active: Vec<JobId>,
    /// Active weight is at least `(1−ε)` of the waiting weight.
    pub nice: bool,
}

impl CertSegment {
    pub fn len(&self) -> Rational {
        &self.end - &self.start
    }

    pub fn alpha_of(&self, id: JobId) -> Rational {
        self.alpha.get(&id).cloned().unwrap_or_else(exact::zero)
    }

    pub fn net_of(&self, id: JobId) -> Rational {
        self.net.get(&id).cloned().unwrap_or_else(exact::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub mode: CertMode,
    pub machines: u32,
    /// Present in flow-time modes.
    #[serde(with = "crate::exact::serde_rational_opt")]
    pub epsilon: Option<Rational>,
    pub segments: Vec<CertSegment>,
}

impl DualCertificate {
    /// `α_j = ∫ α_{j,t} dt` for every job with a nonzero density.
    pub fn alpha_totals(&self) -> BTreeMap<JobId, Rational> {
        let mut out: BTreeMap<JobId, Rational> = BTreeMap::new();
        for s in &self.segments {
            let len = s.len();
            for (id, a) in &s.alpha {
                *out.entry(*id).or_insert_with(exact::zero) += a * &len;
            }
        }
        out
    }

    pub fn alpha_sum(&self) -> Rational {
        self.alpha_totals().values().sum()
    }

    /// `∫ β_t dt`.
    pub fn beta_integral(&self) -> Rational {
        self.segments.iter().map(|s| &s.beta * s.len()).sum()
    }
}

fn ser_map<S: serde::Serializer>(m: &BTreeMap<JobId, Rational>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k.0.to_string(), exact::format_rational(v))))
}

fn ser_edge_map<S: serde::Serializer>(m: &BTreeMap<(JobId, JobId), Rational>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|((a, b), v)| (format!("{a}->{b}"), exact::format_rational(v))))
}

/// `Σ_j w_j chain_j`.
pub fn chain_lb(inst: &Instance) -> Result<Rational, BoundsError> {
    let chains = compute_chains(inst)?;
    Ok(inst.jobs.iter().map(|j| &j.weight * chains.get(j.id)).sum())
}

/// `Σ_j w_j r_j` for weighted completion time; flow time has no release term.
pub fn release_lb(inst: &Instance, kind: ObjectiveKind) -> Rational {
    match kind {
        ObjectiveKind::Completion => inst.jobs.iter().map(|j| &j.weight * &j.release).sum(),
        ObjectiveKind::Flow => exact::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::int;
    use crate::instance::{JobSpec, PrecedenceDag};

    fn unit_jobs(n: u32) -> Instance {
        Instance {
            jobs: (0..n).map(|i| JobSpec::new(i, int(1), int(1), int(0))).collect(),
            dag: PrecedenceDag::default(),
            machines: 1,
            no_surprises: true,
            allow_zero_size: false,
        }
    }

    #[test]
    fn chain_bound_of_weighted_pair() {
        let inst = Instance {
            jobs: vec![JobSpec::new(0, int(2), int(1), int(0)), JobSpec::new(1, int(3), int(2), int(0))],
            dag: PrecedenceDag::new([(0, 1)]),
            ..unit_jobs(0)
        };
        assert_eq!(chain_lb(&inst).unwrap(), int(12));
    }

    #[test]
    fn independent_unit_jobs() {
        let inst = unit_jobs(3);
        assert_eq!(chain_lb(&inst).unwrap(), int(3));
        assert_eq!(release_lb(&inst, ObjectiveKind::Completion), int(0));
    }

    #[test]
    fn flow_mode_drops_releases() {
        let mut inst = unit_jobs(2);
        inst.jobs[1].release = int(4);
        assert_eq!(release_lb(&inst, ObjectiveKind::Completion), int(4));
        assert_eq!(release_lb(&inst, ObjectiveKind::Flow), int(0));
    }
}
