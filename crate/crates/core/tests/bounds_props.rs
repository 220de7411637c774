use fairsched::bounds::{
    build_ct_duals, build_flow_duals, chain_lb, check_ct_dual_feasibility, competitive_report, dual_objective,
    exhaustive_opt, flow_dual_audit, release_lb, ReportOptions,
};
use fairsched::exact::{self, int, rat, Rational};
use fairsched::instance::{gen_random_dag, GenParams, Instance, JobSpec, PrecedenceDag, ReleaseMode};
use fairsched::schedulers::{simulate, ObjectiveKind, OrderMode, PolicyConfig};
use proptest::prelude::*;

fn small(seed: u64, jobs: u32, machines: u32, density: f64, mode: ReleaseMode) -> Instance {
    let params = GenParams {
        jobs,
        layers: 3,
        density,
        size_max: 3,
        machines,
        release_mode: mode,
        no_surprises: mode != ReleaseMode::Layered,
        ..GenParams::default()
    };
    gen_random_dag(&params, seed).unwrap()
}

fn release_mode() -> impl Strategy<Value = ReleaseMode> {
    prop_oneof![Just(ReleaseMode::Zero), Just(ReleaseMode::PerComponent), Just(ReleaseMode::Layered)]
}

/// Weighted completion time of the ratio rule (largest `w/p` first), which
/// is optimal for independent jobs on one machine released at 0.
fn smith_rule(inst: &Instance) -> Rational {
    let mut jobs: Vec<&JobSpec> = inst.jobs.iter().collect();
    jobs.sort_by(|a, b| (&b.weight / &b.size).cmp(&(&a.weight / &a.size)));
    let mut t = exact::zero();
    let mut total = exact::zero();
    for j in jobs {
        t += &j.size;
        total += &j.weight * &t;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exhaustive_matches_ratio_rule(seed in 0u64..10_000, jobs in 1u32..7) {
        let inst = small(seed, jobs, 1, 0.0, ReleaseMode::Zero);
        let opt = exhaustive_opt(&inst, ObjectiveKind::Completion, 8).unwrap();
        prop_assert_eq!(opt, smith_rule(&inst));
    }

    #[test]
    fn certified_bounds_sit_below_the_optimum(seed in 0u64..10_000, jobs in 1u32..7, m in 1u32..3, density in 0.0f64..0.8, mode in release_mode()) {
        let inst = small(seed, jobs, m, density, mode);
        let opt = exhaustive_opt(&inst, ObjectiveKind::Completion, 8).unwrap();
        prop_assert!(chain_lb(&inst).unwrap() <= opt);
        prop_assert!(release_lb(&inst, ObjectiveKind::Completion) <= opt);
        let run = simulate(&inst, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &inst).unwrap();
        prop_assert!(check_ct_dual_feasibility(&inst, &cert, 0.0).unwrap().passed);
        prop_assert!(dual_objective(&cert) <= opt);
    }

    #[test]
    fn ct_dual_objective_matches_direct_integration(seed in 0u64..10_000, jobs in 1u32..14, m in 1u32..4, density in 0.0f64..0.7, mode in release_mode()) {
        let inst = small(seed, jobs, m, density, mode);
        let run = simulate(&inst, &PolicyConfig::ct()).unwrap();
        let cert = build_ct_duals(&run, &inst).unwrap();
        // α: weight times the time spent with a minimal neighbour below rate 1.
        // m∫β: half the unfinished weight.
        let mut direct = exact::zero();
        for (idx, seg) in run.trace.segments.iter().enumerate() {
            let len = seg.len();
            let unfinished: Rational = inst
                .jobs
                .iter()
                .filter(|j| run.trace.completions[&j.id] > seg.start)
                .map(|j| j.weight.clone())
                .sum();
            direct -= &unfinished / int(2) * &len;
            if let Some(s) = run.snapshot_for(idx) {
                for (r, id) in s.graph.right.iter().enumerate() {
                    let slow = s.graph.right_edges[r]
                        .iter()
                        .any(|&k| s.solution.l[s.graph.edges[k].left] < exact::one());
                    if slow {
                        direct += &inst.job(*id).unwrap().weight * &len;
                    }
                }
            }
        }
        prop_assert_eq!(dual_objective(&cert), direct);
    }

    #[test]
    fn flow_alpha_covers_active_weight(seed in 0u64..10_000, jobs in 1u32..14, m in 1u32..4, density in 0.0f64..0.7) {
        let inst = small(seed, jobs, m, density, ReleaseMode::PerComponent);
        let run = simulate(&inst, &PolicyConfig::ft(rat(1, 2))).unwrap();
        let cert = build_flow_duals(&run, &inst).unwrap();
        for seg in &cert.segments {
            let active: Rational = seg.active.iter().map(|id| inst.job(*id).unwrap().weight.clone()).sum();
            prop_assert_eq!(seg.alpha.values().sum::<Rational>(), active);
        }
    }

    #[test]
    fn gamma_nets_cancel(seed in 0u64..10_000, jobs in 1u32..14, m in 1u32..4, density in 0.0f64..0.7) {
        let inst = small(seed, jobs, m, density, ReleaseMode::Zero);
        for run in [
            simulate(&inst, &PolicyConfig::ct()).unwrap(),
            simulate(&inst, &PolicyConfig::ft(rat(1, 2))).unwrap(),
        ] {
            let cert = if run.policy.kind == fairsched::schedulers::PolicyKind::Ct {
                build_ct_duals(&run, &inst).unwrap()
            } else {
                build_flow_duals(&run, &inst).unwrap()
            };
            for seg in &cert.segments {
                prop_assert_eq!(seg.net.values().sum::<Rational>(), exact::zero());
                prop_assert!(seg.gamma.values().all(|g| *g >= exact::zero()));
            }
        }
    }

    #[test]
    fn flow_audits_pass(seed in 0u64..10_000, jobs in 1u32..12, m in 1u32..4, density in 0.0f64..0.7, eps_den in 2i64..5) {
        let inst = small(seed, jobs, m, density, ReleaseMode::PerComponent);
        let eps = rat(1, eps_den);
        for cfg in [PolicyConfig::ft(eps.clone()), PolicyConfig::laps(eps.clone(), OrderMode::FixedTopological)] {
            let run = simulate(&inst, &cfg).unwrap();
            let audit = flow_dual_audit(&run, &inst, 1e-9).unwrap();
            let failed: Vec<_> = audit.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            prop_assert!(failed.is_empty(), "{}: {:?}", cfg.kind, failed);
            prop_assert!(audit.flow <= audit.flow_bound);
        }
    }
}

#[test]
fn report_on_small_instances_is_consistent() {
    for seed in 0..20 {
        let inst = small(seed, 6, 2, 0.5, ReleaseMode::PerComponent);
        let runs = vec![
            simulate(&inst, &PolicyConfig::ct()).unwrap(),
            simulate(&inst, &PolicyConfig::ft(rat(1, 2))).unwrap(),
            simulate(&inst, &PolicyConfig::laps(rat(1, 2), OrderMode::FixedTopological)).unwrap(),
        ];
        let rep = competitive_report(&inst, &runs, &ReportOptions::default()).unwrap();
        let failed: Vec<_> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert!(failed.is_empty(), "seed {seed}: {failed:?}");
        let opt = rep.exhaustive_opt.clone().unwrap();
        let b = rep.policy("CT-B").unwrap();
        assert_eq!(b.objective, int(2) * &rep.policy("CT-A").unwrap().objective);
        assert!(b.ratio_vs_opt.unwrap() <= 10.0);
        assert!(rep.chain_lb <= opt);
    }
}

#[test]
fn weighted_chain_certificate() {
    // a(p = 2, w = 1) ≺ b(p = 3, w = 2) on one machine at speed 2: a runs on
    // [0, 1) and b on [1, 5/2), always at full rate, so α vanishes and
    // m∫β = (3/2)·1 + (2/2)·(3/2) = 3.
    let inst = Instance {
        jobs: vec![JobSpec::new(0, int(2), int(1), int(0)), JobSpec::new(1, int(3), int(2), int(0))],
        dag: PrecedenceDag::new([(0, 1)]),
        machines: 1,
        no_surprises: true,
        allow_zero_size: false,
    };
    let run = simulate(&inst, &PolicyConfig::ct()).unwrap();
    let cert = build_ct_duals(&run, &inst).unwrap();
    assert_eq!(cert.alpha_sum(), int(0));
    assert_eq!(cert.beta_integral(), int(3));
    assert_eq!(dual_objective(&cert), int(-3));
    assert_eq!(chain_lb(&inst).unwrap(), int(12));
}
