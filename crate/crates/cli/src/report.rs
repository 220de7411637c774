use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use fairsched::exact::format_f64;

use crate::batch::{AdversaryRow, ExperimentConfig, Format, InstanceRecord, SummaryRow, CONFIG_FILE, REPORTS_DIR};
use crate::error::{CliError, CliResult};
use crate::files::{write_atomic, write_json};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_JSON_FILE: &str = "summary.json";
pub const ADVERSARY_FILE: &str = "adversary_curve.csv";

#[derive(Debug, Args)]
pub struct ReportCmd {
    /// Directory written by `batch`.
    #[arg(long)]
    pub batch: PathBuf,
}

fn opt_f(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

fn opt_s(x: &Option<String>) -> String {
    x.clone().unwrap_or_default()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "instance,policy,objective_kind,objective,objective_f,chain_lb,release_lb,dual_lb,exhaustive_opt,\
         lower_bound,ratio,ratio_vs_opt,constant,within_constant,worst_dual_slack,pass\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.instance,
            r.policy,
            r.objective_kind,
            r.objective,
            format_f64(r.objective_f),
            r.chain_lb,
            r.release_lb,
            opt_s(&r.dual_lb),
            opt_s(&r.exhaustive_opt),
            r.lower_bound,
            format_f64(r.ratio),
            opt_f(r.ratio_vs_opt),
            opt_f(r.constant),
            r.within_constant.map(|b| b.to_string()).unwrap_or_default(),
            opt_f(r.worst_dual_slack),
            r.pass,
        );
    }
    out
}

pub fn adversary_csv(rows: &[AdversaryRow]) -> String {
    let mut out = String::from("n,seed,instance,policy,flow,opt_flow,ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.seed,
            r.instance,
            r.policy,
            r.flow,
            r.opt_flow,
            format_f64(r.ratio)
        );
    }
    out
}

pub fn run(cmd: &ReportCmd) -> CliResult<()> {
    let dir = cmd.batch.join(REPORTS_DIR);
    let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if files.is_empty() {
        return Err(CliError::Empty(format!("no instance reports in {}", dir.display())));
    }
    files.sort();

    let mut rows = Vec::new();
    let mut adversary = Vec::new();
    for f in &files {
        let bytes = fs::read(f).with_context(|| format!("reading {}", f.display()))?;
        let rec: InstanceRecord =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))?;
        rows.extend(rec.rows);
        adversary.extend(rec.adversary);
    }
    adversary.sort_by(|a, b| (a.n, a.seed, &a.policy).cmp(&(b.n, b.seed, &b.policy)));

    write_atomic(&cmd.batch.join(SUMMARY_FILE), summary_csv(&rows).as_bytes())?;
    if !adversary.is_empty() {
        write_atomic(&cmd.batch.join(ADVERSARY_FILE), adversary_csv(&adversary).as_bytes())?;
    }
    let wants_json = fs::read(cmd.batch.join(CONFIG_FILE))
        .ok()
        .and_then(|b| serde_json::from_slice::<ExperimentConfig>(&b).ok())
        .is_some_and(|c| c.formats.contains(&Format::Json));
    if wants_json {
        write_json(&cmd.batch.join(SUMMARY_JSON_FILE), &serde_json::json!({ "rows": rows, "adversary": adversary }))?;
    }

    println!("{:<24} {:<8} {:>14} {:>14} {:>10} {:>8}  pass", "instance", "policy", "objective", "lower bound", "ratio", "const");
    for r in &rows {
        println!(
            "{:<24} {:<8} {:>14.6} {:>14} {:>10.4} {:>8}  {}",
            r.instance,
            r.policy,
            r.objective_f,
            r.lower_bound,
            r.ratio,
            r.constant.map_or("-".to_string(), |c| format!("{c:.2}")),
            if r.pass { "yes" } else { "NO" }
        );
    }
    for a in &adversary {
        println!("star n={:<4} seed={:<4} {} ratio {:.4}", a.n, a.seed, a.policy, a.ratio);
    }
    let failing = rows.iter().filter(|r| !r.pass).count();
    println!("{} rows, {} failing -> {}", rows.len(), failing, cmd.batch.join(SUMMARY_FILE).display());
    Ok(())
}
