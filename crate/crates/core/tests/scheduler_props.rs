use std::collections::{BTreeMap, BTreeSet};

use fairsched::exact::{self, int, rat, Rational};
use fairsched::instance::{gen_random_dag, gen_star_adversary, GenParams, Instance, JobId, ReleaseMode};
use fairsched::schedulers::{
    completions_csv, laps_sandwich_violation, objective, segments_csv, simulate, slow_down, validate_trace,
    ObjectiveKind, OrderMode, PolicyConfig, SimulationRun,
};
use proptest::prelude::*;

fn instance(seed: u64, jobs: u32, machines: u32, density: f64, per_component: bool) -> Instance {
    let params = GenParams {
        jobs,
        layers: 3,
        density,
        machines,
        release_mode: if per_component { ReleaseMode::PerComponent } else { ReleaseMode::Zero },
        ..GenParams::default()
    };
    gen_random_dag(&params, seed).unwrap()
}

fn policies() -> Vec<PolicyConfig> {
    vec![
        PolicyConfig::ct(),
        PolicyConfig::ft(rat(1, 2)),
        PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological),
        PolicyConfig::laps(rat(1, 3), OrderMode::DynamicCompletion),
    ]
}

/// Start time and rates of every segment that begins before `until`.
fn prefix(run: &SimulationRun, until: &Rational) -> Vec<(Rational, Vec<(JobId, Rational)>)> {
    run.trace
        .segments
        .iter()
        .filter(|s| &s.start < until)
        .map(|s| (s.start.clone(), s.rates.clone()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_policy_produces_a_valid_trace(seed in 0u64..10_000, jobs in 1u32..16, m in 1u32..4, density in 0.0f64..0.7, pc: bool) {
        let inst = instance(seed, jobs, m, density, pc);
        for cfg in policies() {
            let run = simulate(&inst, &cfg).unwrap();
            let rep = validate_trace(&inst, &run.trace);
            prop_assert!(rep.is_valid(), "{}: {}", cfg.kind, rep);
            prop_assert_eq!(run.trace.completions.len(), inst.jobs.len());
            prop_assert_eq!(&run.trace.speed, &cfg.effective_speed());
        }
    }

    #[test]
    fn runs_are_deterministic(seed in 0u64..10_000, jobs in 1u32..14, m in 1u32..4, pc: bool) {
        let inst = instance(seed, jobs, m, 0.4, pc);
        for cfg in policies() {
            let a = simulate(&inst, &cfg).unwrap();
            let b = simulate(&inst, &cfg).unwrap();
            prop_assert_eq!(segments_csv(&a.trace), segments_csv(&b.trace));
            prop_assert_eq!(completions_csv(&a.trace), completions_csv(&b.trace));
        }
    }

    #[test]
    fn budget_is_used_or_every_minimal_job_runs_at_full_rate(seed in 0u64..10_000, jobs in 1u32..16, m in 1u32..5, density in 0.0f64..0.7) {
        let inst = instance(seed, jobs, m, density, true);
        for cfg in policies() {
            let run = simulate(&inst, &cfg).unwrap();
            for s in &run.history {
                let seg = &run.trace.segments[s.segment];
                let total: Rational = seg.rates.iter().map(|(_, r)| r.clone()).sum();
                let minimal: BTreeSet<JobId> = s.graph.left.iter().copied().collect();
                let full = minimal.iter().all(|id| seg.rate_of(*id) == Some(&exact::one()));
                prop_assert!(total == Rational::from_integer(m.into()) || full);
            }
        }
    }

    #[test]
    fn no_waiting_component_starves(seed in 0u64..10_000, jobs in 1u32..16, m in 1u32..4, density in 0.0f64..0.7) {
        let inst = instance(seed, jobs, m, density, true);
        let topo = inst.topology().unwrap();
        for cfg in policies() {
            let run = simulate(&inst, &cfg).unwrap();
            for s in &run.history {
                let seg = &run.trace.segments[s.segment];
                let waiting: BTreeSet<JobId> = s.graph.right.iter().map(|id| topo.component[topo.idx(*id)]).collect();
                let running: BTreeSet<JobId> = seg
                    .rates
                    .iter()
                    .filter(|(_, r)| *r > exact::zero())
                    .map(|(id, _)| topo.component[topo.idx(*id)])
                    .collect();
                prop_assert_eq!(waiting, running);
            }
        }
    }

    #[test]
    fn decisions_ignore_sizes_until_a_completion(seed in 0u64..10_000, jobs in 2u32..14, m in 1u32..4, bumps in proptest::collection::vec(0u32..4, 14)) {
        let inst = instance(seed, jobs, m, 0.4, true);
        for cfg in policies() {
            let run = simulate(&inst, &cfg).unwrap();
            let first = run.trace.completions.values().min().unwrap().clone();
            let mut bigger = inst.clone();
            for (j, b) in bigger.jobs.iter_mut().zip(&bumps) {
                j.size = &j.size + int((*b).into());
            }
            let rerun = simulate(&bigger, &cfg).unwrap();
            prop_assert_eq!(prefix(&run, &first), prefix(&rerun, &first));
        }
    }

    #[test]
    fn slowed_schedule_stays_valid_and_scales_cost(seed in 0u64..10_000, jobs in 1u32..14, m in 1u32..4, num in 1i64..7) {
        let inst = instance(seed, jobs, m, 0.4, false);
        let run = simulate(&inst, &PolicyConfig::ct()).unwrap();
        let factor = Rational::new((num + 4).into(), 4.into());
        let slow = slow_down(&run.trace, &factor);
        prop_assert!(validate_trace(&inst, &slow).is_valid());
        let a = objective(&run.trace, &inst, ObjectiveKind::Completion).unwrap();
        let b = objective(&slow, &inst, ObjectiveKind::Completion).unwrap();
        prop_assert_eq!(a * &factor, b);
    }

    #[test]
    fn priority_weights_are_normalized_and_sandwiched(seed in 0u64..10_000, jobs in 1u32..16, m in 1u32..4) {
        let inst = instance(seed, jobs, m, 0.4, true);
        for cfg in [
            PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological),
            PolicyConfig::laps(rat(1, 4), OrderMode::DynamicCompletion),
            PolicyConfig::laps(rat(2, 5), OrderMode::FixedTopological),
        ] {
            let k = cfg.k().unwrap();
            let run = simulate(&inst, &cfg).unwrap();
            for s in &run.history {
                let lw = s.laps.as_ref().unwrap();
                let ws: Vec<(JobId, Rational)> =
                    lw.order.iter().map(|&id| (id, inst.job(id).unwrap().weight.clone())).collect();
                if lw.exact {
                    prop_assert_eq!(lw.hatw.iter().sum::<Rational>(), exact::one());
                }
                prop_assert!(lw.hatw.iter().all(|h| *h > exact::zero()));
                let tol = if lw.exact { 1e-12 } else { 1e-6 };
                prop_assert!(laps_sandwich_violation(&ws, lw, &k) <= tol);
            }
        }
    }
}

#[test]
fn order_modes_agree() {
    for seed in 0..30 {
        let inst = instance(seed, 12, 2, 0.5, true);
        let a = simulate(&inst, &PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological)).unwrap();
        let b = simulate(&inst, &PolicyConfig::laps(rat(1, 2), OrderMode::DynamicCompletion)).unwrap();
        assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn star_flood_completes_with_the_pivot() {
    let scenario = gen_star_adversary(3, 5).unwrap();
    let mut cfg = PolicyConfig::ft(rat(1, 2)).with_speed(int(1));
    cfg.allow_surprises = true;
    let run = simulate(&scenario.instance, &cfg).unwrap();
    assert!(validate_trace(&scenario.instance, &run.trace).is_valid());
    let pivot_done = run.trace.completions[&scenario.pivot].clone();
    assert_eq!(scenario.instance.jobs.len(), 3 + 27);
    for j in scenario.instance.jobs.iter().filter(|j| j.size == exact::zero()) {
        assert_eq!(run.trace.completions[&j.id], exact::max(&pivot_done, &j.release));
    }
    // Equal thirds on [0, 1); then the blocked flood routes its weight to the
    // pivot, which gets 28/30 of the machine for its remaining 2/3.
    assert_eq!(pivot_done, rat(12, 7));
}

#[test]
fn flow_policies_refuse_mixed_releases() {
    let params = GenParams {
        jobs: 8,
        density: 0.8,
        release_mode: ReleaseMode::Layered,
        no_surprises: false,
        ..GenParams::default()
    };
    let inst = gen_random_dag(&params, 3).unwrap();
    assert!(simulate(&inst, &PolicyConfig::ft(rat(1, 2))).is_err());
    assert!(simulate(&inst, &PolicyConfig::ct()).is_ok());
}

#[test]
fn release_dates_are_respected() {
    for seed in 0..20 {
        let inst = instance(seed, 10, 2, 0.4, true);
        let releases: BTreeMap<JobId, Rational> = inst.jobs.iter().map(|j| (j.id, j.release.clone())).collect();
        for cfg in policies() {
            let run = simulate(&inst, &cfg).unwrap();
            for (id, start) in &run.trace.start_times {
                assert!(start >= &releases[id]);
            }
        }
    }
}
