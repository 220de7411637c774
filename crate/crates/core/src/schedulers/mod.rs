//! Event-driven simulation of the rate-based policies.

mod engine;
mod laps;
mod policy;
mod public;
mod trace;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::exact::{self, Rational};
use crate::instance::{InstanceError, JobId, ValidationReport};
use crate::rate_program::{BipartiteRateGraph, RateError, RateSolution};

pub use engine::simulate;
pub use laps::{laps_order, laps_sandwich_violation, laps_weights, LapsWeights, OrderMode};
pub use public::{PublicInstance, PublicJob, PublicView};
pub use trace::{
    completions_csv, objective, pieces_overlap, realize_slots, segments_csv, slow_down, validate_trace,
    ObjectiveKind, SlotError, SlotPiece, TraceReport, TraceViolation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Weighted completion time; rates from job weights.
    #[serde(rename = "CT")]
    Ct,
    /// Weighted flow time; rates from job weights.
    #[serde(rename = "FT")]
    Ft,
    /// Weighted flow time; rates from order-dependent priority weights.
    #[serde(rename = "FT-LAPS")]
    FtLaps,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Ct => "CT",
            PolicyKind::Ft => "FT",
            PolicyKind::FtLaps => "FT-LAPS",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ct" => Ok(PolicyKind::Ct),
            "ft" => Ok(PolicyKind::Ft),
            "laps" | "ft-laps" => Ok(PolicyKind::FtLaps),
            _ => Err(format!("unknown policy {s:?} (expected ct, ft or laps)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub epsilon: Option<Rational>,
    /// Overrides the default speed of the policy.
    pub speed: Option<Rational>,
    pub order_mode: OrderMode,
    /// Lets the flow-time policies run on instances whose components mix
    /// release dates (used by the lower-bound experiment).
    pub allow_surprises: bool,
}

impl PolicyConfig {
    pub fn ct() -> Self {
        Self {
            kind: PolicyKind::Ct,
            epsilon: None,
            speed: None,
            order_mode: OrderMode::default(),
            allow_surprises: false,
        }
    }

    pub fn ft(epsilon: Rational) -> Self {
        Self {
            kind: PolicyKind::Ft,
            epsilon: Some(epsilon),
            ..Self::ct()
        }
    }

    pub fn laps(epsilon: Rational, order_mode: OrderMode) -> Self {
        Self {
            kind: PolicyKind::FtLaps,
            epsilon: Some(epsilon),
            order_mode,
            ..Self::ct()
        }
    }

    pub fn with_speed(mut self, speed: Rational) -> Self {
        self.speed = Some(speed);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match (&self.kind, &self.epsilon) {
            (PolicyKind::Ct, Some(_)) => {
                return Err(SimError::Config("epsilon applies only to flow-time policies".into()))
            }
            (PolicyKind::Ft | PolicyKind::FtLaps, None) => {
                return Err(SimError::Config(format!("policy {} requires epsilon", self.kind)))
            }
            (_, Some(e)) if !e.is_positive() => {
                return Err(SimError::Config("epsilon must be positive".into()))
            }
            (PolicyKind::FtLaps, Some(e)) if *e > exact::one() => {
                return Err(SimError::Config("epsilon must be at most 1 so that k = 1/epsilon >= 1".into()))
            }
            _ => {}
        }
        if let Some(s) = &self.speed {
            if !s.is_positive() {
                return Err(SimError::Config("speed must be positive".into()));
            }
        }
        Ok(())
    }

    /// Overridden speed, else 2 for CT, `2(1+ε)` for FT and `1+3ε` for FT-LAPS.
    pub fn effective_speed(&self) -> Rational {
        if let Some(s) = &self.speed {
            return s.clone();
        }
        let one = exact::one();
        let eps = self.epsilon.clone().unwrap_or_else(exact::zero);
        match self.kind {
            PolicyKind::Ct => exact::int(2),
            PolicyKind::Ft => exact::int(2) * (one + eps),
            PolicyKind::FtLaps => one + exact::int(3) * eps,
        }
    }

    /// `k = 1/ε` for the flow-time policies.
    pub fn k(&self) -> Option<Rational> {
        self.epsilon.as_ref().map(|e| exact::one() / e)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid instance: {0}")]
    InvalidInstance(ValidationReport),
    #[error("flow-time policies require every component to share one release date")]
    SurprisesNotAllowed,
    #[error("invalid policy configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("zero-size completion cascade did not settle")]
    WaveLimit,
}

/// Interval `[start, end)` with constant rates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start: Rational,
    pub end: Rational,
    /// Rate of each running job, sorted by id; empty when idle.
    pub rates: Vec<(JobId, Rational)>,
}

impl Segment {
    pub fn len(&self) -> Rational {
        &self.end - &self.start
    }

    pub fn rate_of(&self, id: JobId) -> Option<&Rational> {
        self.rates
            .binary_search_by_key(&id, |(j, _)| *j)
            .ok()
            .map(|p| &self.rates[p].1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleTrace {
    pub segments: Vec<Segment>,
    pub speed: Rational,
    pub machines: u32,
    pub completions: BTreeMap<JobId, Rational>,
    /// First time each job is minimal among the waiting jobs.
    pub start_times: BTreeMap<JobId, Rational>,
}

impl ScheduleTrace {
    pub fn makespan(&self) -> Rational {
        self.segments
            .last()
            .map(|s| s.end.clone())
            .into_iter()
            .chain(self.completions.values().cloned())
            .max()
            .unwrap_or_else(exact::zero)
    }
}

/// Everything the policy computed at one decision point.
#[derive(Debug, Clone)]
pub struct RateSnapshot {
    /// Index of the segment these rates apply to.
    pub segment: usize,
    pub graph: BipartiteRateGraph,
    /// Weights fed to the rate program, aligned with `graph.right`.
    pub weights: Vec<Rational>,
    pub solution: RateSolution,
    pub laps: Option<LapsWeights>,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub trace: ScheduleTrace,
    pub history: Vec<RateSnapshot>,
    pub policy: PolicyConfig,
}

impl SimulationRun {
    pub fn snapshot_for(&self, segment: usize) -> Option<&RateSnapshot> {
        self.history
            .binary_search_by_key(&segment, |s| s.segment)
            .ok()
            .map(|i| &self.history[i])
    }
}
