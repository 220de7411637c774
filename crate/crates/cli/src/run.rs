use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fairsched::exact::{self, int, Rational};
use fairsched::instance::Instance;
use fairsched::schedulers::{
    completions_csv, objective, segments_csv, simulate, slow_down, validate_trace, ObjectiveKind, OrderMode,
    PolicyConfig, PolicyKind, SimulationRun,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{load_instance, output_path, sha256_hex, write_atomic, write_json};
use crate::policy::{sim_error, PolicySpec};

pub const TRACE_FILE: &str = "trace.csv";
pub const COMPLETIONS_FILE: &str = "completions.csv";
pub const OBJECTIVE_FILE: &str = "objective.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    FixedTopological,
    DynamicCompletion,
}

impl From<OrderArg> for OrderMode {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::FixedTopological => OrderMode::FixedTopological,
            OrderArg::DynamicCompletion => OrderMode::DynamicCompletion,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    /// ct, ft or laps.
    #[arg(long)]
    pub policy: PolicyKind,
    /// Required for ft and laps; `0.5` or `1/2`.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Overrides the policy's default speed.
    #[arg(long)]
    pub speed: Option<String>,
    #[arg(long, value_enum, default_value = "fixed-topological")]
    pub order: OrderArg,
    /// Run flow-time policies on instances whose components mix release dates.
    #[arg(long)]
    pub allow_surprises: bool,
}

impl PolicyArgs {
    pub fn spec(&self) -> PolicySpec {
        PolicySpec {
            policy: self.policy,
            epsilon: self.epsilon.clone(),
            speed: self.speed.clone(),
            order: self.order.into(),
            allow_surprises: self.allow_surprises,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub label: String,
    pub kind: String,
    pub exact: String,
    pub value: f64,
}

/// Contents of `objective.json`: the run's objectives plus what is needed to
/// replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_sha256: String,
    pub trace_sha256: String,
    pub policy: PolicySpec,
    pub speed: String,
    pub makespan: String,
    pub objectives: Vec<ObjectiveValue>,
}

fn value(label: &str, kind: &str, q: &Rational) -> ObjectiveValue {
    ObjectiveValue {
        label: label.into(),
        kind: kind.into(),
        exact: exact::format_rational(q),
        value: exact::to_f64(q),
    }
}

/// `Σ w C` for CT-A and its slow-down CT-B, or `Σ w (C − r)` for flow policies.
pub fn objectives(run: &SimulationRun, inst: &Instance) -> CliResult<Vec<ObjectiveValue>> {
    let missing = || CliError::AuditFailed("trace does not complete every job".into());
    Ok(match run.policy.kind {
        PolicyKind::Ct => {
            let a = objective(&run.trace, inst, ObjectiveKind::Completion).ok_or_else(missing)?;
            let b = objective(&slow_down(&run.trace, &int(2)), inst, ObjectiveKind::Completion).ok_or_else(missing)?;
            vec![value("CT-A", "completion", &a), value("CT-B", "completion", &b)]
        }
        kind => {
            let f = objective(&run.trace, inst, ObjectiveKind::Flow).ok_or_else(missing)?;
            vec![value(&kind.to_string(), "flow", &f)]
        }
    })
}

/// Simulates and validates; an invalid trace is an audit failure.
pub fn simulate_checked(inst: &Instance, cfg: &PolicyConfig) -> CliResult<SimulationRun> {
    let run = simulate(inst, cfg).map_err(sim_error)?;
    let report = validate_trace(inst, &run.trace);
    if !report.is_valid() {
        return Err(CliError::AuditFailed(format!("trace validation: {report}")));
    }
    Ok(run)
}

#[derive(Debug, Args)]
pub struct RunCmd {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Output directory; defaults to `$FAIRSCHED_OUT/run`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn run(cmd: &RunCmd) -> CliResult<()> {
    let loaded = load_instance(&cmd.instance)?;
    let spec = cmd.policy.spec();
    let cfg = spec.to_config()?;
    let dir = output_path(cmd.out_dir.as_deref(), "run");
    let record = execute(&loaded.instance, &loaded.sha256, &cfg, &dir)?;
    for o in &record.objectives {
        println!("{:<8} {:<10} {:>16} ({})", o.label, o.kind, exact::format_f64(o.value), o.exact);
    }
    println!("speed {}  makespan {}  -> {}", record.speed, record.makespan, dir.display());
    Ok(())
}

/// Runs one policy and writes trace, completions and objective files to `dir`.
pub fn execute(inst: &Instance, instance_sha256: &str, cfg: &PolicyConfig, dir: &Path) -> CliResult<RunRecord> {
    let run = simulate_checked(inst, cfg)?;
    let trace = segments_csv(&run.trace);
    write_atomic(&dir.join(TRACE_FILE), trace.as_bytes())?;
    write_atomic(&dir.join(COMPLETIONS_FILE), completions_csv(&run.trace).as_bytes())?;
    let record = RunRecord {
        instance_sha256: instance_sha256.to_string(),
        trace_sha256: sha256_hex(trace.as_bytes()),
        policy: PolicySpec::from_config(cfg),
        speed: exact::format_rational(&run.trace.speed),
        makespan: exact::format_rational(&run.trace.makespan()),
        objectives: objectives(&run, inst)?,
    };
    write_json(&dir.join(OBJECTIVE_FILE), &record)?;
    Ok(record)
}
