//! The part of an instance a non-clairvoyant policy may observe.
//!
//! Nothing here carries a processing size; policies are written against
//! these types only, so they cannot condition on sizes.

use crate::exact::Rational;
use crate::instance::{Instance, InstanceError, JobId, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicJob {
    pub id: JobId,
    pub weight: Rational,
    pub release: Rational,
}

#[derive(Debug, Clone)]
pub struct PublicInstance {
    /// Indexed like `topology.ids`.
    pub jobs: Vec<PublicJob>,
    pub topology: Topology,
    pub machines: u32,
}

impl PublicInstance {
    pub fn new(inst: &Instance) -> Result<Self, InstanceError> {
        let topology = inst.topology()?;
        let mut jobs: Vec<PublicJob> = inst
            .jobs
            .iter()
            .map(|j| PublicJob {
                id: j.id,
                weight: j.weight.clone(),
                release: j.release.clone(),
            })
            .collect();
        jobs.sort_by_key(|j| j.id);
        Ok(Self {
            jobs,
            topology,
            machines: inst.machines,
        })
    }

    pub fn job(&self, id: JobId) -> &PublicJob {
        &self.jobs[self.topology.idx(id)]
    }
}

/// Public state at a decision point.
#[derive(Debug, Clone)]
pub struct PublicView<'a> {
    pub public: &'a PublicInstance,
    pub now: &'a Rational,
    /// Released, unfinished jobs, sorted by id.
    pub waiting: &'a [JobId],
    /// Finished jobs in completion order.
    pub completed: &'a [(JobId, Rational)],
}
