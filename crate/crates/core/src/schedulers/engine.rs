use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::policy::decide;
use super::public::{PublicInstance, PublicView};
use super::{PolicyConfig, PolicyKind, ScheduleTrace, Segment, SimError, SimulationRun};
use crate::exact::{self, Rational};
use crate::instance::{validate_instance, Instance, JobId, Topology};

/// Holds the hidden sizes. The engine asks it how long a job at a given
/// effective rate has left and tells it how much work was done; it never
/// exposes a size to the policy.
struct CompletionOracle {
    residual: Vec<Rational>,
}

impl CompletionOracle {
    fn new(inst: &Instance, topo: &Topology) -> Self {
        let mut residual = vec![exact::zero(); topo.len()];
        for j in &inst.jobs {
            residual[topo.idx(j.id)] = j.size.clone();
        }
        Self { residual }
    }

    fn exhausted(&self, v: usize) -> bool {
        self.residual[v].is_zero()
    }

    fn time_to_finish(&self, v: usize, effective_rate: &Rational) -> Rational {
        &self.residual[v] / effective_rate
    }

    /// Returns whether the job just finished.
    fn advance(&mut self, v: usize, volume: &Rational) -> bool {
        self.residual[v] -= volume;
        debug_assert!(!self.residual[v].is_negative());
        self.residual[v].is_zero()
    }
}

struct State {
    waiting: Vec<bool>,
    open_preds: Vec<usize>,
    completed: Vec<(JobId, Rational)>,
    completions: BTreeMap<JobId, Rational>,
    start_times: BTreeMap<JobId, Rational>,
    waiting_count: usize,
}

impl State {
    fn complete(&mut self, topo: &Topology, v: usize, at: &Rational) {
        self.waiting[v] = false;
        self.waiting_count -= 1;
        self.completed.push((topo.ids[v], at.clone()));
        self.completions.insert(topo.ids[v], at.clone());
        for &s in &topo.succ[v] {
            self.open_preds[s] -= 1;
        }
    }
}

/// Runs a policy to completion.
///
/// Rates are recomputed at every arrival and completion and held constant in
/// between. Minimal zero-size jobs finish at the instant they become minimal,
/// in waves, before rates are recomputed.
pub fn simulate(inst: &Instance, cfg: &PolicyConfig) -> Result<SimulationRun, SimError> {
    cfg.validate()?;
    let report = validate_instance(inst);
    if !report.is_valid() {
        return Err(SimError::InvalidInstance(report));
    }
    if cfg.kind != PolicyKind::Ct && !inst.no_surprises && !cfg.allow_surprises {
        return Err(SimError::SurprisesNotAllowed);
    }
    let public = PublicInstance::new(inst)?;
    let topo = &public.topology;
    let n = topo.len();
    let mut oracle = CompletionOracle::new(inst, topo);
    let speed = cfg.effective_speed();

    let mut arrivals: Vec<usize> = (0..n).collect();
    arrivals.sort_by(|&a, &b| public.jobs[a].release.cmp(&public.jobs[b].release).then(a.cmp(&b)));
    let mut next_arrival = 0;

    let mut st = State {
        waiting: vec![false; n],
        open_preds: topo.pred.iter().map(|p| p.len()).collect(),
        completed: Vec::with_capacity(n),
        completions: BTreeMap::new(),
        start_times: BTreeMap::new(),
        waiting_count: 0,
    };
    let mut segments: Vec<Segment> = Vec::new();
    let mut history = Vec::new();
    let mut now = exact::zero();

    loop {
        while next_arrival < n && public.jobs[arrivals[next_arrival]].release <= now {
            st.waiting[arrivals[next_arrival]] = true;
            st.waiting_count += 1;
            next_arrival += 1;
        }

        let mut waves = 0;
        loop {
            let ready: Vec<usize> = (0..n)
                .filter(|&v| st.waiting[v] && st.open_preds[v] == 0 && oracle.exhausted(v))
                .collect();
            if ready.is_empty() {
                break;
            }
            waves += 1;
            if waves > n {
                return Err(SimError::WaveLimit);
            }
            for v in ready {
                st.start_times.entry(topo.ids[v]).or_insert_with(|| now.clone());
                st.complete(topo, v, &now);
            }
        }

        let next_release = (next_arrival < n).then(|| public.jobs[arrivals[next_arrival]].release.clone());
        if st.waiting_count == 0 {
            match next_release {
                Some(r) => {
                    segments.push(Segment {
                        start: now.clone(),
                        end: r.clone(),
                        rates: Vec::new(),
                    });
                    now = r;
                    continue;
                }
                None => break,
            }
        }

        let waiting_ids: Vec<JobId> = (0..n).filter(|&v| st.waiting[v]).map(|v| topo.ids[v]).collect();
        let view = PublicView {
            public: &public,
            now: &now,
            waiting: &waiting_ids,
            completed: &st.completed,
        };
        let mut snap = decide(cfg, &view)?;

        let sol = &snap.solution;
        let g = &snap.graph;
        let mut rates: Vec<(JobId, Rational)> = g.left.iter().copied().zip(sol.l.iter().cloned()).collect();
        rates.retain(|(_, r)| r.is_positive());
        for id in &g.left {
            st.start_times.entry(*id).or_insert_with(|| now.clone());
        }

        let mut dt: Option<Rational> = next_release.map(|r| r - &now);
        for (id, r) in &rates {
            let t = oracle.time_to_finish(topo.idx(*id), &(&speed * r));
            if dt.as_ref().map_or(true, |d| &t < d) {
                dt = Some(t);
            }
        }
        let dt = dt.expect("a waiting job always has a positive rate");
        debug_assert!(dt.is_positive());
        let end = &now + &dt;

        snap.segment = segments.len();
        history.push(snap);
        for (id, r) in &rates {
            let v = topo.idx(*id);
            if oracle.advance(v, &(&speed * r * &dt)) {
                st.complete(topo, v, &end);
            }
        }
        segments.push(Segment {
            start: now,
            end: end.clone(),
            rates,
        });
        now = end;
    }

    Ok(SimulationRun {
        trace: ScheduleTrace {
            segments,
            speed,
            machines: inst.machines,
            completions: st.completions,
            start_times: st.start_times,
        },
        history,
        policy: cfg.clone(),
    })
}
