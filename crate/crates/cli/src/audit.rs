use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use fairsched::bounds::{
    build_ct_duals, check_ct_dual_feasibility, competitive_report, dual_objective, flow_dual_audit,
    inactive_time_check, ReportOptions, DEFAULT_JOB_LIMIT,
};
use fairsched::exact::{self, Rational};
use fairsched::instance::Instance;
use fairsched::rate_program::kkt_audit;
use fairsched::schedulers::{segments_csv, PolicyKind, SimulationRun};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::files::{load_instance, sha256_hex, write_json};
use crate::run::{simulate_checked, RunRecord, OBJECTIVE_FILE, TRACE_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    /// Exact KKT conditions of every rate-program solution in the run.
    Kkt,
    /// Completion-time dual certificate (CT runs).
    CtDual,
    /// Flow-time dual certificate and bounds (FT and FT-LAPS runs).
    FtDual,
    /// Offline optimum of small instances and the ratio table.
    Exhaustive,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::Kkt => "kkt",
            Which::CtDual => "ct-dual",
            Which::FtDual => "ft-dual",
            Which::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Args)]
pub struct AuditCmd {
    #[arg(long)]
    pub instance: PathBuf,
    /// Directory written by `run`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "kkt")]
    pub which: Vec<Which>,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_JOB_LIMIT)]
    pub job_limit: usize,
}

struct Outcome {
    passed: bool,
    summary: String,
    body: Value,
}

fn q(x: &Rational) -> Value {
    json!({ "exact": exact::format_rational(x), "value": exact::to_f64(x) })
}

fn audit_kkt(run: &SimulationRun) -> CliResult<Outcome> {
    let mut failures = Vec::new();
    for s in &run.history {
        let rep = kkt_audit(&s.graph, &s.solution, &s.weights, 0.0).map_err(|e| CliError::Other(e.into()))?;
        if !rep.passed() {
            failures.push(json!({ "segment": s.segment, "failed": rep.failed() }));
        }
    }
    Ok(Outcome {
        passed: failures.is_empty(),
        summary: format!("{} solutions, {} with nonzero residuals", run.history.len(), failures.len()),
        body: json!({ "solutions": run.history.len(), "tolerance": 0.0, "failures": failures }),
    })
}

fn require(run: &SimulationRun, ok: bool, which: Which) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Incompatible(format!("audit {} does not apply to a {} run", which.name(), run.policy.kind)))
    }
}

fn audit_ct(run: &SimulationRun, inst: &Instance, tol: f64) -> CliResult<Outcome> {
    require(run, run.policy.kind == PolicyKind::Ct, Which::CtDual)?;
    let bounds = |e: fairsched::bounds::BoundsError| CliError::Other(e.into());
    let cert = build_ct_duals(run, inst).map_err(bounds)?;
    let feas = check_ct_dual_feasibility(inst, &cert, tol).map_err(bounds)?;
    let inactive = inactive_time_check(inst, &run.trace, &cert, tol).map_err(bounds)?;
    let dual = dual_objective(&cert);
    let passed = feas.passed && inactive.passed;
    let worst = feas.worst_slack().map(exact::to_f64);
    Ok(Outcome {
        passed,
        summary: format!("dual objective {} feasible={} worst slack {worst:?}", exact::format_f64(exact::to_f64(&dual)), feas.passed),
        body: json!({
            "dual_objective": q(&dual),
            "is_lower_bound": feas.passed,
            "feasibility": feas,
            "inactive_time": inactive,
            "alpha_sum": q(&cert.alpha_sum()),
            "beta_integral": q(&cert.beta_integral()),
        }),
    })
}

fn audit_ft(run: &SimulationRun, inst: &Instance, tol: f64) -> CliResult<Outcome> {
    require(run, run.policy.kind != PolicyKind::Ct, Which::FtDual)?;
    let audit = flow_dual_audit(run, inst, tol).map_err(|e| match e {
        fairsched::bounds::BoundsError::SurprisesPresent => CliError::Incompatible(e.to_string()),
        other => CliError::Other(other.into()),
    })?;
    let failed: Vec<&str> = audit.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    Ok(Outcome {
        passed: audit.passed(),
        summary: format!(
            "flow {} bound {} failed {failed:?}",
            exact::format_f64(exact::to_f64(&audit.flow)),
            exact::format_f64(exact::to_f64(&audit.flow_bound))
        ),
        body: serde_json::to_value(&audit)?,
    })
}

fn audit_exhaustive(run: SimulationRun, inst: &Instance, tol: f64, job_limit: usize) -> CliResult<Outcome> {
    let opts = ReportOptions { tolerance: tol, job_limit };
    let rep = competitive_report(inst, std::slice::from_ref(&run), &opts).map_err(|e| CliError::Other(e.into()))?;
    let mut lines = Vec::new();
    for p in &rep.policies {
        lines.push(format!(
            "{} objective {} lb {} ratio {:.6} vs-opt {}",
            p.policy,
            exact::format_f64(exact::to_f64(&p.objective)),
            exact::format_f64(exact::to_f64(&p.lower_bound)),
            p.ratio,
            p.ratio_vs_opt.map_or("n/a".to_string(), |r| format!("{r:.6}")),
        ));
    }
    let opt = rep.exhaustive_opt.as_ref().map_or("unavailable".to_string(), exact::format_rational);
    Ok(Outcome {
        passed: rep.passed(),
        summary: format!("optimum {opt}; {}", lines.join("; ")),
        body: serde_json::to_value(&rep)?,
    })
}

pub fn run(cmd: &AuditCmd) -> CliResult<()> {
    if cmd.which.is_empty() {
        return Err(CliError::Usage("--which selects no audit".into()));
    }
    let loaded = load_instance(&cmd.instance)?;
    let record_path = cmd.run.join(OBJECTIVE_FILE);
    let record: RunRecord = serde_json::from_slice(
        &fs::read(&record_path).with_context(|| format!("reading {}", record_path.display()))?,
    )?;
    if record.instance_sha256 != loaded.sha256 {
        return Err(CliError::Incompatible(format!(
            "run was recorded for instance {} but {} hashes to {}",
            record.instance_sha256,
            cmd.instance.display(),
            loaded.sha256
        )));
    }
    let trace_path = cmd.run.join(TRACE_FILE);
    let stored = fs::read(&trace_path).with_context(|| format!("reading {}", trace_path.display()))?;
    if sha256_hex(&stored) != record.trace_sha256 {
        return Err(CliError::Incompatible(format!("{} does not match its recorded hash", trace_path.display())));
    }

    // The rate history is recovered by deterministic replay.
    let cfg = record.policy.to_config()?;
    let run = simulate_checked(&loaded.instance, &cfg)?;
    if sha256_hex(segments_csv(&run.trace).as_bytes()) != record.trace_sha256 {
        return Err(CliError::Incompatible("replayed trace differs from the recorded one".into()));
    }

    let mut which = cmd.which.clone();
    which.sort();
    which.dedup();
    let mut failed = Vec::new();
    for w in which {
        let outcome = match w {
            Which::Kkt => audit_kkt(&run)?,
            Which::CtDual => audit_ct(&run, &loaded.instance, cmd.tolerance)?,
            Which::FtDual => audit_ft(&run, &loaded.instance, cmd.tolerance)?,
            Which::Exhaustive => audit_exhaustive(run.clone(), &loaded.instance, cmd.tolerance, cmd.job_limit)?,
        };
        let path = cmd.run.join(format!("audit-{}.json", w.name()));
        write_json(
            &path,
            &json!({
                "audit": w,
                "instance_sha256": loaded.sha256,
                "policy": record.policy,
                "passed": outcome.passed,
                "report": outcome.body,
            }),
        )?;
        println!("{:<11} {}  {}", w.name(), if outcome.passed { "PASS" } else { "FAIL" }, outcome.summary);
        if !outcome.passed {
            failed.push(w.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::AuditFailed(failed.join(", ")))
    }
}
