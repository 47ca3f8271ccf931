//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::extract::{extract, render_table, ExtractConfig};
use crate::commands::fit::fit;
use crate::commands::simulate::simulate;
use crate::commands::sweep::{sweep, SweepAxis};
use crate::config::{read_json, Centre, FitKind, FitSpec, PresetName, RunConfig};
use crate::error::CliError;

/// Spin-resolved photodynamics of NV centres: simulate, fit, extract.
#[derive(Debug, Parser)]
#[command(name = "nvcycle", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a measurement protocol and write its CSV outputs.
    Simulate(RunArgs),
    /// Fit a histogram or a two-column CSV curve.
    Fit(FitArgs),
    /// Extract intersystem-crossing probabilities with uncertainties.
    Extract(ExtractArgs),
    /// Repeat a protocol over a range of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [env: NVCYCLE_OUT_DIR, default: nvcycle-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Protocol to run with default settings (ignored with --config).
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    /// Seed for the shot noise; required unless --noiseless.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Expected counts instead of Poisson samples.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(value_enum)]
    pub kind: FitKind,
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Hold both lifetimes fixed (ns), e.g. `13.26,6.89`.
    #[arg(long, value_delimiter = ',', value_name = "T13,T14")]
    pub fixed_taus: Option<Vec<f64>>,
    /// IRF width (ns); the fit window starts 2σ past the peak.
    #[arg(long)]
    pub irf_sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtractPreset {
    NvJ,
    NvC,
    /// Both reference centres side by side.
    Table,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub preset: Option<ExtractPreset>,
    /// Seed for the Monte-Carlo draws [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo draws (at least 1000).
    #[arg(long)]
    pub draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub values: Vec<f64>,
}

const DEFAULT_OUT_DIR: &str = "nvcycle-out";

/// `--out`, then the configured directory, then `NVCYCLE_OUT_DIR`.
fn output_dir(flag: &Option<PathBuf>, configured: Option<&Path>) -> PathBuf {
    flag.clone()
        .or_else(|| configured.map(Path::to_path_buf))
        .or_else(|| std::env::var_os("NVCYCLE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn run_config(args: &RunArgs, default_preset: Option<PresetName>) -> Result<RunConfig, CliError> {
    let mut config = match (&args.common.config, args.preset.or(default_preset)) {
        (Some(path), _) => read_json::<RunConfig>(path)?,
        (None, Some(p)) => RunConfig::new(p.with_defaults()),
        (None, None) => return Err(CliError::Usage("give --preset or --config".into())),
    };
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    config.noiseless |= args.noiseless;
    Ok(config)
}

/// Runs one invocation; `Ok` carries text for stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let config = run_config(&args, None)?;
            let out = output_dir(&args.common.out, config.output_dir.as_deref());
            let manifest = simulate(&config, &out)?;
            Ok(format!("wrote {}\n", manifest.display()))
        }
        Command::Fit(args) => {
            let mut spec = match &args.common.config {
                Some(path) => {
                    let spec: FitSpec = read_json(path)?;
                    if spec.kind != args.kind {
                        return Err(CliError::Usage(format!(
                            "config fit kind {:?} differs from {:?}",
                            spec.kind, args.kind
                        )));
                    }
                    spec
                }
                None => FitSpec {
                    kind: args.kind,
                    decay: Default::default(),
                },
            };
            match args.fixed_taus.as_deref() {
                None => {}
                Some(&[t13, t14]) => spec.decay.fixed_taus = Some((t13, t14)),
                Some(_) => return Err(CliError::Usage("--fixed-taus takes exactly two lifetimes".into())),
            }
            if let Some(s) = args.irf_sigma {
                spec.decay.irf_sigma_ns = s;
            }
            let out = output_dir(&args.common.out, None);
            let (path, result) = fit(&spec, &args.input, &out)?;
            let mut text = String::new();
            for p in &result.parameters {
                text.push_str(&format!("{:<16} {:>14.6} ± {:.6}\n", p.name, p.value, p.sigma));
            }
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            text.push_str(&format!("wrote {}\n", path.display()));
            Ok(text)
        }
        Command::Extract(args) => {
            let base = args
                .common
                .config
                .as_deref()
                .and_then(Path::parent)
                .map(Path::to_path_buf)
                .unwrap_or_default();
            let mut config = match (&args.common.config, args.preset) {
                (Some(path), None) => read_json::<ExtractConfig>(path)?,
                (None, Some(ExtractPreset::NvJ)) => ExtractConfig::reference(&[Centre::NvJ]),
                (None, Some(ExtractPreset::NvC)) => ExtractConfig::reference(&[Centre::NvC]),
                (None, Some(ExtractPreset::Table)) => ExtractConfig::reference(&[Centre::NvJ, Centre::NvC]),
                _ => return Err(CliError::Usage("give exactly one of --preset and --config".into())),
            };
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(draws) = args.draws {
                config.draws = draws;
            }
            let out = output_dir(&args.common.out, None);
            let reports = extract(&config, &base, &out)?;
            Ok(render_table(&reports))
        }
        Command::Sweep(args) => {
            let default = match args.axis {
                SweepAxis::Temperature => PresetName::DoublePulse,
                SweepAxis::PumpRate => PresetName::Power,
                SweepAxis::Theta => PresetName::Rabi,
            };
            let config = run_config(&args.run, Some(default))?;
            let out = output_dir(&args.run.common.out, config.output_dir.as_deref());
            let (manifest, _) = sweep(&config, args.axis, &args.values, &out)?;
            Ok(format!("wrote {}\n", manifest.display()))
        }
    }
}
