use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use fairsched::bounds::{competitive_report, BoundsReport, ReportOptions, DEFAULT_JOB_LIMIT};
use fairsched::exact::{self, rat, Rational};
use fairsched::instance::{gen_star_adversary, serialize_instance, Instance};
use fairsched::rate_program::kkt_audit;
use fairsched::schedulers::{objective, ObjectiveKind, OrderMode, PolicyKind, SimulationRun};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{load_instance, output_path, sha256_hex, write_atomic, write_json};
use crate::generate::{GenArgs, GenSpec};
use crate::policy::PolicySpec;
use crate::run::{simulate_checked, PolicyArgs};

pub const INSTANCES_DIR: &str = "instances";
pub const REPORTS_DIR: &str = "reports";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// `count` instances per spec, seeds `seed, seed + 1, ...`.
    Generate { specs: Vec<GenSpec>, count: u32, seed: u64 },
    Files { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditToggles {
    pub kkt: bool,
    pub ct_dual: bool,
    pub ft_dual: bool,
    pub exhaustive: bool,
}

impl Default for AuditToggles {
    fn default() -> Self {
        Self {
            kkt: true,
            ct_dual: true,
            ft_dual: true,
            exhaustive: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything needed to reproduce a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: Source,
    /// Empty means the defaults for the source kind.
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub audits: AuditToggles,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_job_limit")]
    pub job_limit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_job_limit() -> usize {
    DEFAULT_JOB_LIMIT
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        match &self.source {
            Source::Generate { specs, count, .. } if specs.is_empty() || *count == 0 => {
                return Err(CliError::Usage("generator source needs at least one spec and count >= 1".into()))
            }
            Source::Files { paths } if paths.is_empty() => {
                return Err(CliError::Empty("file source lists no instances".into()))
            }
            _ => {}
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(CliError::Usage(format!("tolerance {} must be finite and non-negative", self.tolerance)));
        }
        for p in &self.policies {
            p.to_config()?;
        }
        Ok(())
    }

    fn is_star(&self) -> bool {
        matches!(&self.source, Source::Generate { specs, .. } if specs.iter().all(|s| matches!(s, GenSpec::Star { .. })))
    }

    /// Configured policies, else FT at speed 1 for star batches and all three
    /// policies at ε = 1/2 otherwise.
    pub fn policy_specs(&self) -> Vec<PolicySpec> {
        if !self.policies.is_empty() {
            return self.policies.clone();
        }
        let eps = Some("1/2".to_string());
        if self.is_star() {
            return vec![PolicySpec {
                policy: PolicyKind::Ft,
                epsilon: eps,
                speed: Some("1".into()),
                order: OrderMode::FixedTopological,
                allow_surprises: true,
            }];
        }
        [PolicyKind::Ct, PolicyKind::Ft, PolicyKind::FtLaps]
            .into_iter()
            .map(|policy| PolicySpec {
                policy,
                epsilon: (policy != PolicyKind::Ct).then(|| eps.clone()).flatten(),
                speed: None,
                order: OrderMode::FixedTopological,
                allow_surprises: false,
            })
            .collect()
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance: String,
    pub policy: String,
    pub objective_kind: String,
    pub objective: String,
    pub objective_f: f64,
    pub chain_lb: String,
    pub release_lb: String,
    pub dual_lb: Option<String>,
    pub exhaustive_opt: Option<String>,
    pub lower_bound: String,
    pub ratio: f64,
    pub ratio_vs_opt: Option<f64>,
    pub constant: Option<f64>,
    pub within_constant: Option<bool>,
    pub worst_dual_slack: Option<f64>,
    pub pass: bool,
}

/// One point of the star lower-bound curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryRow {
    pub instance: String,
    pub n: u32,
    pub seed: u64,
    pub policy: String,
    pub flow: String,
    pub opt_flow: String,
    pub ratio: f64,
}

/// Per-instance file under `reports/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: String,
    pub instance_sha256: String,
    pub jobs: usize,
    pub machines: u32,
    pub rows: Vec<SummaryRow>,
    #[serde(default)]
    pub adversary: Vec<AdversaryRow>,
    pub bounds: serde_json::Value,
}

struct Task {
    name: String,
    instance: Instance,
    star: Option<(u32, u64, Rational)>,
}

fn tasks(cfg: &ExperimentConfig) -> CliResult<Vec<Task>> {
    let mut out = Vec::new();
    match &cfg.source {
        Source::Generate { specs, count, seed } => {
            for (s, spec) in specs.iter().enumerate() {
                for i in 0..u64::from(*count) {
                    let seed = seed + i;
                    match spec {
                        GenSpec::Random(_) => out.push(Task {
                            name: format!("random-{s:02}-{i:04}-s{seed}"),
                            instance: spec.build(seed)?,
                            star: None,
                        }),
                        GenSpec::Star { n } => {
                            let sc = gen_star_adversary(*n, seed).map_err(|e| CliError::Usage(e.to_string()))?;
                            out.push(Task {
                                name: format!("star-n{n:04}-s{seed}"),
                                star: Some((*n, seed, sc.offline_opt_flow())),
                                instance: sc.instance,
                            });
                        }
                    }
                }
            }
        }
        Source::Files { paths } => {
            for p in paths {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("instance").to_string();
                out.push(Task {
                    name: stem,
                    instance: load_instance(p)?.instance,
                    star: None,
                });
            }
            let mut names: Vec<&str> = out.iter().map(|t| t.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(CliError::Usage("instance files must have distinct names".into()));
            }
        }
    }
    Ok(out)
}

/// Checks of `competitive_report` governed by each toggle.
fn check_enabled(name: &str, audits: &AuditToggles) -> bool {
    match name {
        "ct-dual-feasibility" | "inactive-time-within-chain" | "completion-cost-chain" | "doubled-cost-chain" => {
            audits.ct_dual
        }
        "flow-audit" => audits.ft_dual,
        "lower-bounds-below-optimum" => audits.exhaustive,
        _ => true,
    }
}

fn rows(name: &str, rep: &BoundsReport, audits: &AuditToggles, kkt_ok: bool) -> Vec<SummaryRow> {
    let ct_ok = rep
        .checks
        .iter()
        .filter(|c| c.name != "flow-audit" && check_enabled(c.name, audits))
        .all(|c| c.passed);
    rep.policies
        .iter()
        .map(|p| {
            let (dual_lb, slack, audit_ok) = if p.kind == ObjectiveKind::Completion {
                let feasible = rep.dual_feasibility.as_ref().is_some_and(|f| f.passed);
                (
                    rep.dual_objective.as_ref().filter(|_| feasible).map(exact::format_rational),
                    rep.dual_feasibility.as_ref().and_then(|f| f.worst_slack()).map(exact::to_f64),
                    ct_ok,
                )
            } else {
                match rep.flow_audits.get(&p.policy) {
                    Some(a) => (
                        a.dual_lower_bound.as_ref().map(exact::format_rational),
                        a.relaxed_constraint.worst_slack().map(exact::to_f64),
                        !audits.ft_dual || a.passed(),
                    ),
                    None => (None, None, true),
                }
            };
            SummaryRow {
                instance: name.to_string(),
                policy: p.policy.clone(),
                objective_kind: match p.kind {
                    ObjectiveKind::Completion => "completion".into(),
                    ObjectiveKind::Flow => "flow".into(),
                },
                objective: exact::format_rational(&p.objective),
                objective_f: exact::to_f64(&p.objective),
                chain_lb: exact::format_rational(&rep.chain_lb),
                release_lb: if p.kind == ObjectiveKind::Completion {
                    exact::format_rational(&rep.release_lb)
                } else {
                    exact::format_rational(&exact::zero())
                },
                dual_lb,
                exhaustive_opt: rep.exhaustive_opt.as_ref().map(exact::format_rational),
                lower_bound: exact::format_rational(&p.lower_bound),
                ratio: p.ratio,
                ratio_vs_opt: p.ratio_vs_opt,
                constant: p.constant,
                within_constant: p.within_constant,
                worst_dual_slack: slack,
                pass: kkt_ok && audit_ok && p.within_constant != Some(false),
            }
        })
        .collect()
}

fn kkt_clean(runs: &[SimulationRun]) -> CliResult<bool> {
    for run in runs {
        for s in &run.history {
            let rep = kkt_audit(&s.graph, &s.solution, &s.weights, 0.0).map_err(|e| CliError::Other(e.into()))?;
            if !rep.passed() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn process(task: &Task, cfg: &ExperimentConfig, policies: &[PolicySpec], dir: &Path) -> CliResult<()> {
    let bytes = serialize_instance(&task.instance);
    let sha = sha256_hex(&bytes);
    write_atomic(&dir.join(INSTANCES_DIR).join(format!("{}.json", task.name)), &bytes)?;

    let mut runs = Vec::with_capacity(policies.len());
    for p in policies {
        runs.push(simulate_checked(&task.instance, &p.to_config()?)?);
    }
    let opts = ReportOptions {
        tolerance: cfg.tolerance,
        job_limit: if cfg.audits.exhaustive { cfg.job_limit } else { 0 },
    };
    let rep = competitive_report(&task.instance, &runs, &opts).map_err(|e| CliError::Other(e.into()))?;
    let kkt_ok = !cfg.audits.kkt || kkt_clean(&runs)?;

    let mut adversary = Vec::new();
    if let Some((n, seed, opt)) = &task.star {
        for run in runs.iter().filter(|r| r.policy.kind != PolicyKind::Ct) {
            let flow = objective(&run.trace, &task.instance, ObjectiveKind::Flow)
                .ok_or_else(|| CliError::AuditFailed("incomplete trace".into()))?;
            adversary.push(AdversaryRow {
                instance: task.name.clone(),
                n: *n,
                seed: *seed,
                policy: run.policy.kind.to_string(),
                ratio: exact::to_f64(&(&flow / opt)),
                flow: exact::format_rational(&flow),
                opt_flow: exact::format_rational(opt),
            });
        }
    }
    let record = InstanceRecord {
        instance: task.name.clone(),
        instance_sha256: sha,
        jobs: task.instance.jobs.len(),
        machines: task.instance.machines,
        rows: rows(&task.name, &rep, &cfg.audits, kkt_ok),
        adversary,
        bounds: serde_json::to_value(&rep)?,
    };
    write_json(&dir.join(REPORTS_DIR).join(format!("{}.json", task.name)), &record)
}

/// Runs every instance of the batch in parallel and writes one record each.
pub fn execute(cfg: &ExperimentConfig, dir: &Path) -> CliResult<usize> {
    cfg.validate()?;
    let policies = cfg.policy_specs();
    let tasks = tasks(cfg)?;
    if tasks.is_empty() {
        return Err(CliError::Empty("batch has no instances".into()));
    }
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let results: Vec<CliResult<()>> = tasks.par_iter().map(|t| process(t, cfg, &policies, dir)).collect();
    for r in results {
        r?;
    }
    Ok(tasks.len())
}

#[derive(Debug, Args)]
pub struct BatchCmd {
    /// Experiment configuration file; generator flags are ignored when set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub gen: GenArgs,
    /// Instances per generator spec.
    #[arg(long, default_value_t = 10)]
    pub count: u32,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Policies to run (repeatable); flow policies share `--epsilon`.
    #[arg(long = "policy")]
    pub policies: Vec<PolicyKind>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub speed: Option<String>,
    #[arg(long)]
    pub allow_surprises: bool,
    #[arg(long)]
    pub no_exhaustive: bool,
    /// Output directory; defaults to the config's, then `$FAIRSCHED_OUT/batch`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl BatchCmd {
    fn config(&self) -> CliResult<ExperimentConfig> {
        if let Some(path) = &self.config {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())));
        }
        let seed = self.seed.ok_or_else(|| CliError::Usage("--seed is required for generated batches".into()))?;
        let policies = self
            .policies
            .iter()
            .map(|&policy| {
                let flow = policy != PolicyKind::Ct;
                PolicyArgs {
                    policy,
                    epsilon: if flow { self.epsilon.clone().or_else(|| Some(exact::format_rational(&rat(1, 2)))) } else { None },
                    speed: self.speed.clone(),
                    order: crate::run::OrderArg::FixedTopological,
                    allow_surprises: self.allow_surprises,
                }
                .spec()
            })
            .collect();
        Ok(ExperimentConfig {
            source: Source::Generate {
                specs: GenSpec::all_from_args(&self.gen)?,
                count: self.count,
                seed,
            },
            policies,
            audits: AuditToggles {
                exhaustive: !self.no_exhaustive,
                ..AuditToggles::default()
            },
            tolerance: default_tolerance(),
            job_limit: default_job_limit(),
            out_dir: None,
            formats: default_formats(),
        })
    }
}

pub fn run(cmd: &BatchCmd) -> CliResult<()> {
    let cfg = cmd.config()?;
    let dir = match (&cmd.out, &cfg.out_dir) {
        (Some(d), _) | (None, Some(d)) => d.clone(),
        (None, None) => output_path(None, "batch"),
    };
    let n = execute(&cfg, &dir)?;
    println!("{n} instances -> {}", dir.display());
    Ok(())
}
