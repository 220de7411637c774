use std::collections::HashMap;

use num_traits::ToPrimitive;

use crate::exact::{self, Rational};
use crate::instance::Instance;
use crate::schedulers::ObjectiveKind;

pub const DEFAULT_JOB_LIMIT: usize = 8;

/// Largest residual-size state space searched.
const STATE_LIMIT: u64 = 2_000_000;

struct Search {
    sizes: Vec<u8>,
    weights: Vec<Rational>,
    releases: Vec<u32>,
    /// Predecessor bitmask per job.
    preds: Vec<u32>,
    machines: usize,
    memo: HashMap<(u32, Vec<u8>, u32), Rational>,
}

impl Search {
    /// Minimum weighted completion time of the unfinished jobs from time `t`,
    /// where `done` marks completed jobs.
    fn best(&mut self, t: u32, residual: Vec<u8>, mut done: u32) -> Rational {
        let n = residual.len();
        let mut cost = exact::zero();
        // Zero-size jobs finish the moment they become available.
        loop {
            let settle: Vec<usize> = (0..n)
                .filter(|&i| done & (1 << i) == 0 && residual[i] == 0)
                .filter(|&i| self.releases[i] <= t && self.preds[i] & !done == 0)
                .collect();
            if settle.is_empty() {
                break;
            }
            for i in settle {
                done |= 1 << i;
                cost += &self.weights[i] * Rational::from_integer(t.into());
            }
        }
        if done.count_ones() as usize == n {
            return cost;
        }
        let key = (t, residual, done);
        if let Some(v) = self.memo.get(&key) {
            return cost + v;
        }
        let (t, residual, done) = key;
        let ready: Vec<usize> = (0..n)
            .filter(|&i| residual[i] > 0 && self.releases[i] <= t && self.preds[i] & !done == 0)
            .collect();
        let value = if ready.is_empty() {
            let next = (0..n)
                .filter(|&i| done & (1 << i) == 0 && self.releases[i] > t)
                .map(|i| self.releases[i])
                .min()
                .expect("an unfinished job is ready, blocked, or unreleased");
            self.best(next, residual.clone(), done)
        } else {
            let pick = ready.len().min(self.machines);
            let mut best: Option<Rational> = None;
            for chosen in subsets(&ready, pick) {
                let mut next = residual.clone();
                let mut next_done = done;
                let mut step = exact::zero();
                for &i in &chosen {
                    next[i] -= 1;
                    if next[i] == 0 {
                        next_done |= 1 << i;
                        step += &self.weights[i] * Rational::from_integer((t + 1).into());
                    }
                }
                let total = step + self.best(t + 1, next, next_done);
                if best.as_ref().map_or(true, |b| &total < b) {
                    best = Some(total);
                }
            }
            best.expect("at least one subset")
        };
        self.memo.insert((t, residual, done), value.clone());
        cost + value
    }
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

/// Offline optimum over schedules that preempt only at integer times, on
/// `m` unit-speed machines, by memoized search over residual sizes.
///
/// Such schedules are feasible, so the value upper-bounds the preemptive
/// optimum; every valid lower bound stays below it. `None` when the instance
/// has more than `job_limit` jobs, non-integral sizes or releases, or too
/// many states.
pub fn exhaustive_opt(inst: &Instance, kind: ObjectiveKind, job_limit: usize) -> Option<Rational> {
    let n = inst.jobs.len();
    if n > job_limit || n > 31 || !inst.validate().is_valid() {
        return None;
    }
    let mut sizes = Vec::with_capacity(n);
    let mut releases = Vec::with_capacity(n);
    let mut states: u64 = 1;
    for j in &inst.jobs {
        if !exact::is_integral(&j.size) || !exact::is_integral(&j.release) {
            return None;
        }
        let p = j.size.to_integer().to_u8()?;
        sizes.push(p);
        releases.push(j.release.to_integer().to_u32()?);
        states = states.saturating_mul(u64::from(p) + 1);
    }
    if states > STATE_LIMIT {
        return None;
    }
    let index: HashMap<_, _> = inst.jobs.iter().enumerate().map(|(i, j)| (j.id, i)).collect();
    let mut preds = vec![0u32; n];
    for (a, b) in &inst.dag.edges {
        preds[index[b]] |= 1 << index[a];
    }
    let mut search = Search {
        sizes,
        weights: inst.jobs.iter().map(|j| j.weight.clone()).collect(),
        releases,
        preds,
        machines: inst.machines as usize,
        memo: HashMap::new(),
    };
    let start = search.sizes.clone();
    let completion = search.best(0, start, 0);
    Some(match kind {
        ObjectiveKind::Completion => completion,
        ObjectiveKind::Flow => completion - inst.jobs.iter().map(|j| &j.weight * &j.release).sum::<Rational>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::int;
    use crate::instance::{JobSpec, PrecedenceDag};

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
            allow_zero_size: true,
        }
    }

    #[test]
    fn small_cases() {
        let c = ObjectiveKind::Completion;
        assert_eq!(exhaustive_opt(&inst(&[1, 1], &[], 1), c, 8), Some(int(3)));
        assert_eq!(exhaustive_opt(&inst(&[1, 1], &[(0, 1)], 1), c, 8), Some(int(3)));
        assert_eq!(exhaustive_opt(&inst(&[1, 1], &[], 2), c, 8), Some(int(2)));
    }

    #[test]
    fn shortest_first_on_one_machine() {
        assert_eq!(exhaustive_opt(&inst(&[3, 1, 2], &[], 1), ObjectiveKind::Completion, 8), Some(int(10)));
    }

    #[test]
    fn precedence_beats_greedy() {
        // Running the long job first unlocks three unit successors.
        let i = inst(&[2, 1, 1, 1, 1], &[(0, 1), (0, 2), (0, 3)], 2);
        assert_eq!(exhaustive_opt(&i, ObjectiveKind::Completion, 8), Some(int(2 + 1 + 3 + 3 + 4)));
    }

    #[test]
    fn releases_and_flow() {
        let mut i = inst(&[1, 1], &[], 1);
        i.jobs[1].release = int(5);
        assert_eq!(exhaustive_opt(&i, ObjectiveKind::Completion, 8), Some(int(7)));
        assert_eq!(exhaustive_opt(&i, ObjectiveKind::Flow, 8), Some(int(2)));
    }

    #[test]
    fn zero_size_jobs_are_free() {
        let i = inst(&[0, 1], &[(0, 1)], 1);
        assert_eq!(exhaustive_opt(&i, ObjectiveKind::Completion, 8), Some(int(1)));
        let tail = inst(&[1, 0], &[(0, 1)], 1);
        assert_eq!(exhaustive_opt(&tail, ObjectiveKind::Completion, 8), Some(int(2)));
    }

    #[test]
    fn limits() {
        let c = ObjectiveKind::Completion;
        assert_eq!(exhaustive_opt(&inst(&[1; 9], &[], 2), c, 8), None);
        let mut i = inst(&[1], &[], 1);
        i.jobs[0].size = crate::exact::rat(1, 2);
        assert_eq!(exhaustive_opt(&i, c, 8), None);
    }
}
