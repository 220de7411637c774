//! Jobs, precedence DAGs and machine counts.

mod generate;
mod io;

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{self, Rational};

pub use generate::{gen_random_dag, gen_star_adversary, AdversarialScenario, GenError, GenParams, ReleaseMode};
pub use io::{parse_instance, serialize_instance, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobSpec {
    pub id: JobId,
    /// Processing volume.
    pub size: Rational,
    pub weight: Rational,
    pub release: Rational,
}

impl JobSpec {
    pub fn new(id: u32, size: Rational, weight: Rational, release: Rational) -> Self {
        Self {
            id: JobId(id),
            size,
            weight,
            release,
        }
    }
}

/// Precedence edges `(pred, succ)`.
///
/// Kept as a list so that parsed input with duplicate edges can be reported
/// rather than silently merged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrecedenceDag {
    pub edges: Vec<(JobId, JobId)>,
}

impl PrecedenceDag {
    pub fn new(edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        Self {
            edges: edges.into_iter().map(|(a, b)| (JobId(a), JobId(b))).collect(),
        }
    }

    pub fn canonicalize(&mut self) {
        self.edges.sort();
        self.edges.dedup();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub jobs: Vec<JobSpec>,
    pub dag: PrecedenceDag,
    pub machines: u32,
    pub no_surprises: bool,
    pub allow_zero_size: bool,
}

impl Instance {
    pub fn job(&self, id: JobId) -> Option<&JobSpec> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn total_weight(&self) -> Rational {
        self.jobs.iter().map(|j| j.weight.clone()).sum()
    }

    /// Jobs sorted by id and edges sorted lexicographically.
    pub fn canonicalize(&mut self) {
        self.jobs.sort_by_key(|j| j.id);
        self.dag.canonicalize();
    }

    pub fn validate(&self) -> ValidationReport {
        validate_instance(self)
    }

    pub fn topology(&self) -> Result<Topology, InstanceError> {
        Topology::new(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("edge ({0}, {1}) references an unknown job")]
    UnknownJob(JobId, JobId),
    #[error("duplicate job id {0}")]
    DuplicateJob(JobId),
    #[error("precedence graph has a cycle through job {0}")]
    Cycle(JobId),
    #[error("instance is invalid: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateJobId { job: JobId },
    UnknownJob { pred: JobId, succ: JobId },
    SelfLoop { job: JobId },
    DuplicateEdge { pred: JobId, succ: JobId },
    Cycle { job: JobId },
    NegativeSize { job: JobId },
    ZeroSizeNotAllowed { job: JobId },
    NonPositiveWeight { job: JobId },
    NegativeRelease { job: JobId },
    ReleaseOrder { pred: JobId, succ: JobId },
    MixedComponentRelease { component: JobId },
    NoMachines,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateJobId { job } => write!(f, "duplicate job id {job}"),
            Violation::UnknownJob { pred, succ } => {
                write!(f, "unknown job: edge ({pred}, {succ}) references a missing id")
            }
            Violation::SelfLoop { job } => write!(f, "self loop on job {job}"),
            Violation::DuplicateEdge { pred, succ } => write!(f, "duplicate edge ({pred}, {succ})"),
            Violation::Cycle { job } => write!(f, "cycle through job {job}"),
            Violation::NegativeSize { job } => write!(f, "negative size on job {job}"),
            Violation::ZeroSizeNotAllowed { job } => {
                write!(f, "zero size on job {job} without allow_zero_size")
            }
            Violation::NonPositiveWeight { job } => write!(f, "non-positive weight on job {job}"),
            Violation::NegativeRelease { job } => write!(f, "negative release on job {job}"),
            Violation::ReleaseOrder { pred, succ } => {
                write!(f, "release order: job {pred} is released after its successor {succ}")
            }
            Violation::MixedComponentRelease { component } => write!(
                f,
                "no_surprises: component containing job {component} has several release dates"
            ),
            Violation::NoMachines => write!(f, "machine count must be at least 1"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    if inst.machines == 0 {
        violations.push(Violation::NoMachines);
    }

    let mut by_id: HashMap<JobId, &JobSpec> = HashMap::new();
    for job in &inst.jobs {
        if by_id.insert(job.id, job).is_some() {
            violations.push(Violation::DuplicateJobId { job: job.id });
        }
        if job.size.is_negative() {
            violations.push(Violation::NegativeSize { job: job.id });
        } else if job.size.is_zero() && !inst.allow_zero_size {
            violations.push(Violation::ZeroSizeNotAllowed { job: job.id });
        }
        if !job.weight.is_positive() {
            violations.push(Violation::NonPositiveWeight { job: job.id });
        }
        if job.release.is_negative() {
            violations.push(Violation::NegativeRelease { job: job.id });
        }
    }

    let mut seen = BTreeSet::new();
    let mut known_edges = Vec::new();
    for &(pred, succ) in &inst.dag.edges {
        if !by_id.contains_key(&pred) || !by_id.contains_key(&succ) {
            violations.push(Violation::UnknownJob { pred, succ });
            continue;
        }
        if pred == succ {
            violations.push(Violation::SelfLoop { job: pred });
            continue;
        }
        if !seen.insert((pred, succ)) {
            violations.push(Violation::DuplicateEdge { pred, succ });
            continue;
        }
        if by_id[&pred].release > by_id[&succ].release {
            violations.push(Violation::ReleaseOrder { pred, succ });
        }
        known_edges.push((pred, succ));
    }

    // Cycle detection on the well-formed part of the graph.
    let ids: Vec<JobId> = by_id.keys().copied().collect();
    if let Err(job) = topological_order(&ids, &known_edges) {
        violations.push(Violation::Cycle { job });
    }

    if inst.no_surprises {
        for comp in weak_components(&ids, &known_edges) {
            let first = &by_id[&comp[0]].release;
            if comp.iter().any(|id| &by_id[id].release != first) {
                violations.push(Violation::MixedComponentRelease { component: comp[0] });
            }
        }
    }

    ValidationReport { violations }
}

/// Kahn's algorithm, smallest id first. Returns a job on a cycle on failure.
fn topological_order(ids: &[JobId], edges: &[(JobId, JobId)]) -> Result<Vec<JobId>, JobId> {
    let mut indeg: BTreeMap<JobId, usize> = ids.iter().map(|&id| (id, 0)).collect();
    let mut succ: HashMap<JobId, Vec<JobId>> = HashMap::new();
    for &(a, b) in edges {
        *indeg.get_mut(&b).expect("edge endpoints are known") += 1;
        succ.entry(a).or_default().push(b);
    }
    let mut heap: BinaryHeap<Reverse<JobId>> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| Reverse(id))
        .collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(Reverse(id)) = heap.pop() {
        order.push(id);
        if let Some(next) = succ.get(&id) {
            for &s in next {
                let d = indeg.get_mut(&s).expect("known");
                *d -= 1;
                if *d == 0 {
                    heap.push(Reverse(s));
                }
            }
        }
    }
    if order.len() == ids.len() {
        Ok(order)
    } else {
        let stuck = indeg
            .iter()
            .find(|(_, &d)| d > 0)
            .map(|(&id, _)| id)
            .expect("some job remains on a cycle");
        Err(stuck)
    }
}

/// Weakly connected components, each sorted by id, ordered by smallest member.
fn weak_components(ids: &[JobId], edges: &[(JobId, JobId)]) -> Vec<Vec<JobId>> {
    let index: HashMap<JobId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let ra = find(&mut parent, index[&a]);
        let rb = find(&mut parent, index[&b]);
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut groups: HashMap<usize, Vec<JobId>> = HashMap::new();
    for (i, &id) in ids.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(id);
    }
    let mut comps: Vec<Vec<JobId>> = groups
        .into_values()
        .map(|mut c| {
            c.sort();
            c
        })
        .collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Index-based adjacency for a validated instance.
///
/// Jobs are addressed by their position in `ids` (sorted by id).
#[derive(Debug, Clone)]
pub struct Topology {
    pub ids: Vec<JobId>,
    index: HashMap<JobId, usize>,
    /// Successor indices, sorted by id.
    pub succ: Vec<Vec<usize>>,
    /// Predecessor indices, sorted by id.
    pub pred: Vec<Vec<usize>>,
    /// Topological order (smallest id first among ready jobs).
    pub topo: Vec<usize>,
    /// Component label per job: the smallest job id in its weak component.
    pub component: Vec<JobId>,
}

impl Topology {
    pub fn new(inst: &Instance) -> Result<Self, InstanceError> {
        let mut ids: Vec<JobId> = inst.jobs.iter().map(|j| j.id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(InstanceError::DuplicateJob(w[0]));
        }
        let index: HashMap<JobId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let n = ids.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(inst.dag.edges.len());
        for &(a, b) in &inst.dag.edges {
            let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) else {
                return Err(InstanceError::UnknownJob(a, b));
            };
            if ia == ib {
                return Err(InstanceError::Cycle(a));
            }
            succ[ia].push(ib);
            pred[ib].push(ia);
            edges.push((a, b));
        }
        for list in succ.iter_mut().chain(pred.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let topo_ids = topological_order(&ids, &edges).map_err(InstanceError::Cycle)?;
        let topo = topo_ids.iter().map(|id| index[id]).collect();
        let mut component = vec![JobId(0); n];
        for comp in weak_components(&ids, &edges) {
            for id in &comp {
                component[index[id]] = comp[0];
            }
        }
        Ok(Self {
            ids,
            index,
            succ,
            pred,
            topo,
            component,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: JobId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn idx(&self, id: JobId) -> usize {
        self.index[&id]
    }
}

/// Longest chain volume ending at each job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainTable {
    pub chain: BTreeMap<JobId, Rational>,
}

impl ChainTable {
    pub fn get(&self, id: JobId) -> &Rational {
        &self.chain[&id]
    }
}

pub fn compute_chains(inst: &Instance) -> Result<ChainTable, InstanceError> {
    let topo = inst.topology()?;
    let sizes = sizes_by_index(inst, &topo);
    let mut chain = vec![exact::zero(); topo.len()];
    for &v in &topo.topo {
        let best = topo.pred[v]
            .iter()
            .map(|&p| &chain[p])
            .max()
            .cloned()
            .unwrap_or_else(exact::zero);
        chain[v] = best + &sizes[v];
    }
    Ok(ChainTable {
        chain: topo.ids.iter().copied().zip(chain).collect(),
    })
}

pub(crate) fn sizes_by_index(inst: &Instance, topo: &Topology) -> Vec<Rational> {
    let mut sizes = vec![exact::zero(); topo.len()];
    for job in &inst.jobs {
        sizes[topo.idx(job.id)] = job.size.clone();
    }
    sizes
}
