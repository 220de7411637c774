use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fairsched::instance::{gen_random_dag, gen_star_adversary, serialize_instance, GenParams, Instance, ReleaseMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{output_path, sha256_hex, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    /// Layered random DAG.
    Random,
    /// Lower-bound star: n unit jobs, one hidden pivot gating n³ zero-size jobs.
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReleaseArg {
    Zero,
    PerComponent,
    Layered,
}

impl From<ReleaseArg> for ReleaseMode {
    fn from(r: ReleaseArg) -> Self {
        match r {
            ReleaseArg::Zero => ReleaseMode::Zero,
            ReleaseArg::PerComponent => ReleaseMode::PerComponent,
            ReleaseArg::Layered => ReleaseMode::Layered,
        }
    }
}

/// Generator parameters shared by `generate` and `batch`.
#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "random")]
    pub kind: GenKind,
    #[arg(long, default_value_t = 12)]
    pub jobs: u32,
    #[arg(long, default_value_t = 3)]
    pub layers: u32,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 1)]
    pub size_min: u32,
    #[arg(long, default_value_t = 4)]
    pub size_max: u32,
    #[arg(long, default_value_t = 3)]
    pub weight_max: u32,
    #[arg(long, default_value_t = 2)]
    pub weight_den_max: u32,
    #[arg(long, default_value_t = 2)]
    pub machines: u32,
    #[arg(long, value_enum, default_value = "zero")]
    pub release: ReleaseArg,
    #[arg(long, default_value_t = 3)]
    pub release_max: u32,
    /// Star size n (`--kind star`); `batch` accepts a list.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<u32>,
}

impl GenArgs {
    pub fn params(&self) -> GenParams {
        let release_mode = ReleaseMode::from(self.release);
        GenParams {
            jobs: self.jobs,
            layers: self.layers,
            density: self.density,
            size_min: self.size_min,
            size_max: self.size_max,
            weight_max: self.weight_max,
            weight_den_max: self.weight_den_max,
            machines: self.machines,
            release_mode,
            release_max: self.release_max,
            no_surprises: release_mode != ReleaseMode::Layered,
        }
    }
}

/// What to generate, in the form stored in batch configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GenSpec {
    Random(GenParams),
    Star { n: u32 },
}

impl GenSpec {
    /// One spec per star size, or a single random spec.
    pub fn all_from_args(a: &GenArgs) -> CliResult<Vec<Self>> {
        match a.kind {
            GenKind::Random => Ok(vec![GenSpec::Random(a.params())]),
            GenKind::Star if a.n.is_empty() => Err(CliError::Usage("--kind star requires --n".into())),
            GenKind::Star => Ok(a.n.iter().map(|&n| GenSpec::Star { n }).collect()),
        }
    }

    pub fn from_args(a: &GenArgs) -> CliResult<Self> {
        let mut specs = Self::all_from_args(a)?;
        if specs.len() > 1 {
            return Err(CliError::Usage("generate takes a single --n".into()));
        }
        Ok(specs.remove(0))
    }

    pub fn build(&self, seed: u64) -> CliResult<Instance> {
        match self {
            GenSpec::Random(p) => gen_random_dag(p, seed).map_err(|e| CliError::Usage(e.to_string())),
            GenSpec::Star { n } => gen_star_adversary(*n, seed)
                .map(|s| s.instance)
                .map_err(|e| CliError::Usage(e.to_string())),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateCmd {
    #[command(flatten)]
    pub gen: GenArgs,
    #[arg(long)]
    pub seed: u64,
    /// Output file; defaults to `$FAIRSCHED_OUT/instance.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cmd: &GenerateCmd) -> CliResult<()> {
    let inst = GenSpec::from_args(&cmd.gen)?.build(cmd.seed)?;
    let bytes = serialize_instance(&inst);
    let path = output_path(cmd.out.as_deref(), "instance.json");
    write_atomic(&path, &bytes)?;
    println!("{}  {}  jobs={}", sha256_hex(&bytes), path.display(), inst.jobs.len());
    Ok(())
}
