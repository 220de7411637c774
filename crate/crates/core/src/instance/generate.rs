use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Instance, JobId, JobSpec, PrecedenceDag, Topology};
use crate::exact::{int, rat, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReleaseMode {
    /// Every job released at time 0.
    Zero,
    /// One random integer release per weakly connected component.
    PerComponent,
    /// Release equals the job's layer index (nondecreasing along edges).
    Layered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub jobs: u32,
    pub layers: u32,
    /// Probability of each forward edge between consecutive-or-later layers.
    pub density: f64,
    /// Inclusive integer size range.
    pub size_min: u32,
    pub size_max: u32,
    /// Weights are `k/d` with `d` in `1..=weight_den_max` and value in `(0, weight_max]`.
    pub weight_max: u32,
    pub weight_den_max: u32,
    pub machines: u32,
    pub release_mode: ReleaseMode,
    /// Largest release used by [`ReleaseMode::PerComponent`].
    pub release_max: u32,
    pub no_surprises: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            jobs: 12,
            layers: 3,
            density: 0.5,
            size_min: 1,
            size_max: 4,
            weight_max: 3,
            weight_den_max: 2,
            machines: 2,
            release_mode: ReleaseMode::Zero,
            release_max: 3,
            no_surprises: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("job count must be at least 1")]
    NoJobs,
    #[error("edge density {0} outside [0, 1]")]
    Density(f64),
    #[error("invalid parameter: {0}")]
    Param(&'static str),
    #[error("star adversary needs n >= 2, got {0}")]
    StarTooSmall(u32),
}

/// Layered random DAG; edges only go from an earlier layer to a later one.
pub fn gen_random_dag(params: &GenParams, seed: u64) -> Result<Instance, GenError> {
    let p = params;
    if p.jobs == 0 {
        return Err(GenError::NoJobs);
    }
    if !(0.0..=1.0).contains(&p.density) {
        return Err(GenError::Density(p.density));
    }
    if p.layers == 0 {
        return Err(GenError::Param("layers must be at least 1"));
    }
    if p.size_min == 0 || p.size_min > p.size_max {
        return Err(GenError::Param("size range must satisfy 1 <= size_min <= size_max"));
    }
    if p.weight_max == 0 || p.weight_den_max == 0 {
        return Err(GenError::Param("weight_max and weight_den_max must be positive"));
    }
    if p.machines == 0 {
        return Err(GenError::Param("machines must be at least 1"));
    }
    if p.no_surprises && p.release_mode == ReleaseMode::Layered {
        return Err(GenError::Param(
            "layered releases mix release dates within a component",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.jobs;
    let layers = p.layers.min(n);
    let layer_of = |i: u32| (u64::from(i) * u64::from(layers) / u64::from(n)) as u32;

    let mut jobs = Vec::with_capacity(n as usize);
    for i in 0..n {
        let size = int(rng.gen_range(p.size_min..=p.size_max).into());
        let den = rng.gen_range(1..=p.weight_den_max);
        let num = rng.gen_range(1..=p.weight_max * den);
        let weight = rat(num.into(), den.into());
        jobs.push(JobSpec::new(i, size, weight, int(0)));
    }

    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if layer_of(a) < layer_of(b) && rng.gen_bool(p.density) {
                edges.push((JobId(a), JobId(b)));
            }
        }
    }

    let mut inst = Instance {
        jobs,
        dag: PrecedenceDag { edges },
        machines: p.machines,
        no_surprises: p.no_surprises,
        allow_zero_size: false,
    };

    match p.release_mode {
        ReleaseMode::Zero => {}
        ReleaseMode::Layered => {
            for job in &mut inst.jobs {
                job.release = int(layer_of(job.id.0).into());
            }
        }
        ReleaseMode::PerComponent => {
            let topo = Topology::new(&inst).expect("layered graph is acyclic");
            let mut release_of: std::collections::BTreeMap<JobId, Rational> = Default::default();
            for &c in &topo.component {
                release_of
                    .entry(c)
                    .or_insert_with(|| int(rng.gen_range(0..=p.release_max).into()));
            }
            for job in &mut inst.jobs {
                let c = topo.component[topo.idx(job.id)];
                job.release = release_of[&c].clone();
            }
        }
    }
    Ok(inst)
}

/// Star lower-bound scenario: a hidden pivot gates a flood of zero-size jobs.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialScenario {
    pub instance: Instance,
    pub pivot: JobId,
    pub n: u32,
}

impl AdversarialScenario {
    /// Total flow time of the offline schedule that runs the pivot first.
    ///
    /// With one machine the first-stage jobs finish at 1, 2, ..., n and every
    /// zero-size job completes on release.
    pub fn offline_opt_flow(&self) -> Rational {
        let n = i64::from(self.n);
        int(n * (n + 1) / 2)
    }
}

pub fn gen_star_adversary(n: u32, seed: u64) -> Result<AdversarialScenario, GenError> {
    if n < 2 {
        return Err(GenError::StarTooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pivot = JobId(rng.gen_range(0..n));
    let flood = u64::from(n).pow(3);
    let total = u64::from(n) + flood;
    let total = u32::try_from(total).map_err(|_| GenError::Param("n is too large"))?;

    let mut jobs = Vec::with_capacity(total as usize);
    for i in 0..n {
        jobs.push(JobSpec::new(i, int(1), int(1), int(0)));
    }
    let mut edges = Vec::with_capacity(flood as usize);
    for i in n..total {
        jobs.push(JobSpec::new(i, int(0), int(1), int(1)));
        edges.push((pivot, JobId(i)));
    }
    Ok(AdversarialScenario {
        instance: Instance {
            jobs,
            dag: PrecedenceDag { edges },
            machines: 1,
            no_surprises: false,
            allow_zero_size: true,
        },
        pivot,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_instance;
    use num_traits::Zero;

    #[test]
    fn single_job() {
        let p = GenParams {
            jobs: 1,
            density: 0.9,
            ..GenParams::default()
        };
        let inst = gen_random_dag(&p, 0).unwrap();
        assert_eq!(inst.jobs.len(), 1);
        assert!(inst.dag.edges.is_empty());
    }

    #[test]
    fn zero_density_is_edgeless() {
        let p = GenParams {
            jobs: 10,
            density: 0.0,
            ..GenParams::default()
        };
        let inst = gen_random_dag(&p, 42).unwrap();
        assert_eq!(inst.jobs.len(), 10);
        assert!(inst.dag.edges.is_empty());
    }

    #[test]
    fn same_seed_same_instance() {
        let p = GenParams {
            jobs: 12,
            layers: 3,
            density: 0.5,
            ..GenParams::default()
        };
        assert_eq!(gen_random_dag(&p, 7).unwrap(), gen_random_dag(&p, 7).unwrap());
        assert_ne!(gen_random_dag(&p, 7).unwrap(), gen_random_dag(&p, 8).unwrap());
    }

    #[test]
    fn rejects_bad_params() {
        let zero = GenParams {
            jobs: 0,
            ..GenParams::default()
        };
        assert_eq!(gen_random_dag(&zero, 0), Err(GenError::NoJobs));
        for d in [-0.1, 1.5, f64::NAN] {
            let p = GenParams {
                density: d,
                ..GenParams::default()
            };
            assert!(matches!(gen_random_dag(&p, 0), Err(GenError::Density(_))));
        }
    }

    #[test]
    fn every_release_mode_validates() {
        for (mode, ns) in [
            (ReleaseMode::Zero, true),
            (ReleaseMode::PerComponent, true),
            (ReleaseMode::Layered, false),
        ] {
            for seed in 0..20 {
                let p = GenParams {
                    jobs: 15,
                    layers: 4,
                    density: 0.2,
                    release_mode: mode,
                    no_surprises: ns,
                    ..GenParams::default()
                };
                let inst = gen_random_dag(&p, seed).unwrap();
                let report = validate_instance(&inst);
                assert!(report.is_valid(), "{mode:?} seed {seed}: {report}");
            }
        }
    }

    #[test]
    fn star_shape() {
        let s = gen_star_adversary(2, 0).unwrap();
        assert_eq!(s.instance.jobs.len(), 10);
        assert_eq!(s.instance.dag.edges.len(), 8);
        assert!(s.instance.dag.edges.iter().all(|&(a, _)| a == s.pivot));
        let s3 = gen_star_adversary(3, 5).unwrap();
        assert_eq!(s3.instance.jobs.len(), 30);
        for job in &s3.instance.jobs[3..] {
            assert!(job.size.is_zero());
            assert_eq!(job.release, int(1));
        }
        assert!(validate_instance(&s3.instance).is_valid());
        assert_eq!(s3.offline_opt_flow(), int(6));
        assert_eq!(gen_star_adversary(1, 0), Err(GenError::StarTooSmall(1)));
    }
}
