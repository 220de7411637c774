use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{ScheduleTrace, Segment};
use crate::exact::{self, format_f64, format_rational, Rational};
use crate::instance::{Instance, JobId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// `Σ w_j C_j`
    Completion,
    /// `Σ w_j (C_j − r_j)`
    Flow,
}

/// Weighted completion or flow time. `None` if some job never completes.
pub fn objective(trace: &ScheduleTrace, inst: &Instance, kind: ObjectiveKind) -> Option<Rational> {
    let mut total = exact::zero();
    for job in &inst.jobs {
        let c = trace.completions.get(&job.id)?;
        total += match kind {
            ObjectiveKind::Completion => &job.weight * c,
            ObjectiveKind::Flow => &job.weight * (c - &job.release),
        };
    }
    Some(total)
}

/// Stretches time by `factor`; volumes are preserved by dividing the speed.
pub fn slow_down(trace: &ScheduleTrace, factor: &Rational) -> ScheduleTrace {
    assert!(*factor >= exact::one(), "slow-down factor must be at least 1");
    let scale = |m: &BTreeMap<JobId, Rational>| m.iter().map(|(k, v)| (*k, v * factor)).collect();
    ScheduleTrace {
        segments: trace
            .segments
            .iter()
            .map(|s| Segment {
                start: &s.start * factor,
                end: &s.end * factor,
                rates: s.rates.clone(),
            })
            .collect(),
        speed: &trace.speed / factor,
        machines: trace.machines,
        completions: scale(&trace.completions),
        start_times: scale(&trace.start_times),
    }
}

/// A piece of a unit slot `[0, 1)` on one machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotPiece {
    pub job: JobId,
    pub start: Rational,
    pub end: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SlotError {
    #[error("rate of job {0} is outside [0, 1]")]
    Rate(JobId),
    #[error("rates sum to more than the machine count")]
    Capacity,
}

/// Wrap-around packing of one unit of time: jobs are laid end to end
/// across the machines' unit slots. A job split over two machines gets
/// `[p, 1)` on one and `[0, q)` on the next with `q <= p` since its rate is
/// at most 1, so the two pieces never overlap in wall-clock time.
pub fn realize_slots(rates: &[(JobId, Rational)], machines: u32) -> Result<Vec<Vec<SlotPiece>>, SlotError> {
    let one = exact::one();
    let mut total = exact::zero();
    for (id, r) in rates {
        if r.is_negative() || *r > one {
            return Err(SlotError::Rate(*id));
        }
        total += r;
    }
    if total > Rational::from_integer(machines.into()) {
        return Err(SlotError::Capacity);
    }
    let mut out: Vec<Vec<SlotPiece>> = vec![Vec::new(); machines as usize];
    let mut machine = 0usize;
    let mut pos = exact::zero();
    for (id, r) in rates {
        if r.is_zero() {
            continue;
        }
        let room = &one - &pos;
        if *r <= room {
            let end = &pos + r;
            out[machine].push(SlotPiece {
                job: *id,
                start: pos.clone(),
                end: end.clone(),
            });
            pos = end;
        } else {
            let spill = r - &room;
            out[machine].push(SlotPiece {
                job: *id,
                start: pos.clone(),
                end: one.clone(),
            });
            machine += 1;
            out[machine].push(SlotPiece {
                job: *id,
                start: exact::zero(),
                end: spill.clone(),
            });
            pos = spill;
        }
        if pos == one {
            machine += 1;
            pos = exact::zero();
        }
    }
    Ok(out)
}

/// Pairs of pieces of the same job on different machines that overlap in time.
pub fn pieces_overlap(machines: &[Vec<SlotPiece>]) -> Vec<JobId> {
    let mut by_job: BTreeMap<JobId, Vec<(usize, &SlotPiece)>> = BTreeMap::new();
    for (m, pieces) in machines.iter().enumerate() {
        for p in pieces {
            by_job.entry(p.job).or_default().push((m, p));
        }
    }
    let mut bad = Vec::new();
    for (job, ps) in by_job {
        let clash = ps.iter().enumerate().any(|(i, (ma, a))| {
            ps[i + 1..]
                .iter()
                .any(|(mb, b)| ma != mb && a.start < b.end && b.start < a.end)
        });
        if clash {
            bad.push(job);
        }
    }
    bad
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceViolation {
    Tiling { segment: usize },
    Capacity { segment: usize },
    RateRange { segment: usize, job: JobId },
    Volume { job: JobId },
    Window { segment: usize, job: JobId },
    Precedence { segment: usize, pred: JobId, succ: JobId },
    Incomplete { job: JobId },
    UnknownJob { job: JobId },
    SlotOverlap { segment: usize, job: JobId },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::Tiling { segment } => write!(f, "tiling violation at segment {segment}"),
            TraceViolation::Capacity { segment } => write!(f, "capacity violation at segment {segment}"),
            TraceViolation::RateRange { segment, job } => {
                write!(f, "rate violation: job {job} outside [0, 1] at segment {segment}")
            }
            TraceViolation::Volume { job } => write!(f, "volume violation: job {job}"),
            TraceViolation::Window { segment, job } => {
                write!(f, "window violation: job {job} runs outside its window at segment {segment}")
            }
            TraceViolation::Precedence { segment, pred, succ } => write!(
                f,
                "precedence violation: job {succ} runs before predecessor {pred} completes (segment {segment})"
            ),
            TraceViolation::Incomplete { job } => write!(f, "job {job} never completes"),
            TraceViolation::UnknownJob { job } => write!(f, "trace mentions unknown job {job}"),
            TraceViolation::SlotOverlap { segment, job } => {
                write!(f, "slot violation: job {job} on two machines at once in segment {segment}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TraceReport {
    pub violations: Vec<TraceViolation>,
}

impl TraceReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for TraceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

pub fn validate_trace(inst: &Instance, trace: &ScheduleTrace) -> TraceReport {
    let mut v = Vec::new();
    let jobs: BTreeMap<JobId, _> = inst.jobs.iter().map(|j| (j.id, j)).collect();
    let mut preds: BTreeMap<JobId, Vec<JobId>> = BTreeMap::new();
    for &(a, b) in &inst.dag.edges {
        preds.entry(b).or_default().push(a);
    }
    let no_preds = Vec::new();
    let m = Rational::from_integer(trace.machines.into());
    let one = exact::one();

    let mut expected_start = exact::zero();
    for (s, seg) in trace.segments.iter().enumerate() {
        if seg.start != expected_start || seg.end <= seg.start {
            v.push(TraceViolation::Tiling { segment: s });
        }
        expected_start = seg.end.clone();
    }
    let last_completion = trace.completions.values().max().cloned().unwrap_or_else(exact::zero);
    if expected_start != last_completion && !trace.segments.is_empty() {
        v.push(TraceViolation::Tiling {
            segment: trace.segments.len() - 1,
        });
    }

    let mut done: BTreeMap<JobId, Rational> = BTreeMap::new();
    for (s, seg) in trace.segments.iter().enumerate() {
        let total: Rational = seg.rates.iter().map(|(_, r)| r.clone()).sum();
        if total > m {
            v.push(TraceViolation::Capacity { segment: s });
        }
        for (id, r) in &seg.rates {
            let Some(job) = jobs.get(id) else {
                v.push(TraceViolation::UnknownJob { job: *id });
                continue;
            };
            if r.is_negative() || *r > one {
                v.push(TraceViolation::RateRange { segment: s, job: *id });
            }
            if !r.is_positive() {
                continue;
            }
            *done.entry(*id).or_insert_with(exact::zero) += &trace.speed * r * seg.len();
            let start_ok = trace.start_times.get(id).is_some_and(|t| *t <= seg.start);
            let end_ok = trace.completions.get(id).is_some_and(|c| seg.end <= *c);
            if !start_ok || !end_ok || seg.start < job.release {
                v.push(TraceViolation::Window { segment: s, job: *id });
            }
            for &pred in preds.get(id).unwrap_or(&no_preds) {
                if !trace.completions.get(&pred).is_some_and(|c| *c <= seg.start) {
                    v.push(TraceViolation::Precedence { segment: s, pred, succ: *id });
                }
            }
        }
        match realize_slots(&seg.rates, trace.machines) {
            Ok(pieces) => {
                for job in pieces_overlap(&pieces) {
                    v.push(TraceViolation::SlotOverlap { segment: s, job });
                }
            }
            Err(_) => v.push(TraceViolation::Capacity { segment: s }),
        }
    }

    for job in &inst.jobs {
        match trace.completions.get(&job.id) {
            None => v.push(TraceViolation::Incomplete { job: job.id }),
            Some(c) => {
                let got = done.get(&job.id).cloned().unwrap_or_else(exact::zero);
                if got != job.size {
                    v.push(TraceViolation::Volume { job: job.id });
                }
                for &pred in preds.get(&job.id).unwrap_or(&no_preds) {
                    if !trace.completions.get(&pred).is_some_and(|cp| cp <= c) {
                        v.push(TraceViolation::Precedence {
                            segment: trace.segments.len(),
                            pred,
                            succ: job.id,
                        });
                    }
                }
                if *c < job.release {
                    v.push(TraceViolation::Window {
                        segment: trace.segments.len(),
                        job: job.id,
                    });
                }
            }
        }
    }
    v.dedup();
    TraceReport { violations: v }
}

/// One row per running job per segment, exact and float columns.
pub fn segments_csv(trace: &ScheduleTrace) -> String {
    let mut out = String::from("segment_start,segment_end,job_id,rate,segment_start_f,segment_end_f,rate_f\n");
    for seg in &trace.segments {
        for (id, r) in &seg.rates {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                format_rational(&seg.start),
                format_rational(&seg.end),
                id,
                format_rational(r),
                format_f64(exact::to_f64(&seg.start)),
                format_f64(exact::to_f64(&seg.end)),
                format_f64(exact::to_f64(r)),
            );
        }
    }
    out
}

pub fn completions_csv(trace: &ScheduleTrace) -> String {
    let mut out = String::from("job_id,start_time,completion,start_time_f,completion_f\n");
    for (id, c) in &trace.completions {
        let s = trace.start_times.get(id).cloned().unwrap_or_else(|| c.clone());
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            id,
            format_rational(&s),
            format_rational(c),
            format_f64(exact::to_f64(&s)),
            format_f64(exact::to_f64(c)),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};
    use crate::instance::{JobSpec, PrecedenceDag};
    use crate::schedulers::{simulate, PolicyConfig};

    fn pair(edges: &[(u32, u32)]) -> Instance {
        Instance {
            jobs: vec![
                JobSpec::new(0, int(1), int(1), int(0)),
                JobSpec::new(1, int(1), int(1), int(0)),
            ],
            dag: PrecedenceDag::new(edges.iter().copied()),
            machines: 1,
            no_surprises: true,
            allow_zero_size: false,
        }
    }

    #[test]
    fn wrap_around_example() {
        let r = vec![(JobId(1), rat(3, 5)), (JobId(2), rat(3, 5)), (JobId(3), rat(4, 5))];
        let s = realize_slots(&r, 2).unwrap();
        let p = |j, a, b| SlotPiece {
            job: JobId(j),
            start: a,
            end: b,
        };
        assert_eq!(s[0], vec![p(1, int(0), rat(3, 5)), p(2, rat(3, 5), int(1))]);
        assert_eq!(s[1], vec![p(2, int(0), rat(1, 5)), p(3, rat(1, 5), int(1))]);
        assert!(pieces_overlap(&s).is_empty());
    }

    #[test]
    fn full_and_partial_slots() {
        let s = realize_slots(&[(JobId(0), int(1)), (JobId(1), int(1))], 2).unwrap();
        assert_eq!(s[0].len(), 1);
        assert_eq!(s[1].len(), 1);
        let t = realize_slots(&[(JobId(0), rat(1, 3))], 1).unwrap();
        assert_eq!(t[0][0].end, rat(1, 3));
        assert_eq!(realize_slots(&[(JobId(0), rat(3, 2))], 2), Err(SlotError::Rate(JobId(0))));
        assert_eq!(
            realize_slots(&[(JobId(0), int(1)), (JobId(1), int(1))], 1),
            Err(SlotError::Capacity)
        );
    }

    #[test]
    fn objectives() {
        let inst = pair(&[]);
        let mut trace = simulate(&inst, &PolicyConfig::ct()).unwrap().trace;
        trace.completions.insert(JobId(0), int(1));
        trace.completions.insert(JobId(1), int(2));
        assert_eq!(objective(&trace, &inst, ObjectiveKind::Completion), Some(int(3)));
        assert_eq!(objective(&trace, &inst, ObjectiveKind::Flow), Some(int(3)));
        let mut late = inst.clone();
        late.jobs[1].release = int(1);
        assert_eq!(objective(&trace, &late, ObjectiveKind::Flow), Some(int(2)));
        trace.completions.remove(&JobId(1));
        assert_eq!(objective(&trace, &inst, ObjectiveKind::Flow), None);
    }

    #[test]
    fn chain_objective_and_slow_down() {
        let inst = pair(&[(0, 1)]);
        let trace = simulate(&inst, &PolicyConfig::ct()).unwrap().trace;
        assert_eq!(objective(&trace, &inst, ObjectiveKind::Completion), Some(rat(3, 2)));
        let b = slow_down(&trace, &int(2));
        assert_eq!(b.completions[&JobId(0)], int(1));
        assert_eq!(b.completions[&JobId(1)], int(2));
        assert_eq!(b.speed, int(1));
        assert!(validate_trace(&inst, &b).is_valid());
        assert_eq!(objective(&b, &inst, ObjectiveKind::Completion), Some(int(3)));
        assert_eq!(slow_down(&trace, &int(1)), trace);
    }

    #[test]
    fn injected_faults_are_named() {
        let inst = pair(&[(0, 1)]);
        let mut trace = simulate(&inst, &PolicyConfig::ct()).unwrap().trace;
        assert!(validate_trace(&inst, &trace).is_valid());
        trace.segments[0].rates.push((JobId(1), rat(1, 2)));
        let rep = validate_trace(&inst, &trace);
        let text = rep.to_string();
        assert!(text.contains("precedence violation"), "{text}");
        assert!(text.contains("job 1") && text.contains("predecessor 0"), "{text}");

        let indep = pair(&[]);
        let mut t2 = simulate(&indep, &PolicyConfig::ct()).unwrap().trace;
        t2.machines = 1;
        t2.segments[0].rates = vec![(JobId(0), int(1)), (JobId(1), rat(1, 2))];
        assert!(validate_trace(&indep, &t2).to_string().contains("capacity violation"));
    }

    #[test]
    fn csv_has_exact_and_float_columns() {
        let inst = pair(&[]);
        let trace = simulate(&inst, &PolicyConfig::ct()).unwrap().trace;
        let csv = segments_csv(&trace);
        assert!(csv.lines().nth(1).unwrap().starts_with("0/1,1/1,0,1/2,0,1.00000000000e0,5.00000000000e-1"));
        let c = completions_csv(&trace);
        assert_eq!(c.lines().count(), 3);
    }
}
