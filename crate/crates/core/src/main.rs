#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bgvcf_stap::error::{Result, StapError};
use bgvcf_stap::pipeline::{
    load_cpi_file, load_dataset, run_pipeline, write_cpi_file, Estimator, InputConfig,
    PipelineConfig, RunMode,
};

/// Clutter suppression for airborne space-time radar data.
#[derive(Parser)]
#[command(name = "bgvcf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured scenario and write its data cube.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output CPI file (`.csv` for text, anything else for binary).
        #[arg(long)]
        data: PathBuf,
    },
    /// Full pipeline: screening, estimators, filtering and every metric table.
    Run(Common),
    /// Build training covariances and write the Brauer screening table only.
    Screen(Common),
    /// Estimators and metric curves (IF, beampatterns, SCNR sweep, Capon) for one CUT.
    Metrics(Common),
    /// Convert a CPI file between the binary and CSV encodings.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        elements: usize,
        #[arg(long)]
        pulses: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration, TOML or JSON.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, env = "BGVCF_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Process this CPI file instead of simulating.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    psi1: Option<f64>,
    #[arg(long)]
    ar_order: Option<usize>,
    #[arg(long)]
    subspace_dim: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    cut: Option<usize>,
    /// Inclusive CUT range, e.g. `110:180`.
    #[arg(long, value_parser = parse_range)]
    sweep: Option<[usize; 2]>,
    #[arg(long)]
    training: Option<usize>,
    #[arg(long)]
    guard: Option<usize>,
    /// Comma-separated estimator labels.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Comma-separated input SCNR values in dB for the output-SCNR sweep.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    scnr_sweep: Option<Vec<f64>>,
}

fn parse_range(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected FIRST:LAST, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok([parse(a)?, parse(b)?])
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(path) = &self.input {
            cfg.input = Some(InputConfig { path: path.clone() });
        }
        if let Some(seed) = self.seed {
            cfg.scenario.rng_seed = seed;
        }
        if let Some(v) = self.psi1 {
            cfg.burg.psi1 = v;
        }
        if let Some(v) = self.ar_order {
            cfg.burg.order = Some(v);
        }
        if let Some(v) = self.subspace_dim {
            cfg.optimizer.subspace_dim = Some(v);
        }
        if let Some(v) = self.step_size {
            cfg.optimizer.step_size = v;
        }
        if let Some(v) = self.max_iters {
            cfg.optimizer.max_iterations = v;
        }
        if let Some(v) = self.tol {
            cfg.optimizer.tolerance = v;
        }
        if let Some(v) = self.cut {
            cfg.window.cut = Some(v);
            cfg.window.sweep = None;
        }
        if let Some(v) = self.sweep {
            cfg.window.sweep = Some(v);
        }
        if let Some(v) = self.training {
            cfg.window.num_training = v;
        }
        if let Some(v) = self.guard {
            cfg.window.num_guard = v;
        }
        if let Some(labels) = &self.estimators {
            cfg.estimators = labels
                .iter()
                .map(|l| l.trim().parse::<Estimator>())
                .collect::<Result<_>>()?;
        }
        if let Some(v) = &self.scnr_sweep {
            cfg.metrics.scnr_sweep_db = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_stage(common: &Common, mode: RunMode) -> Result<()> {
    let cfg = common.resolve()?;
    let manifest = run_pipeline(&cfg, mode)?;
    for file in &manifest.outputs {
        println!("{}", cfg.output_dir.join(&file.path).display());
    }
    Ok(())
}

fn convert(input: &Path, output: &Path, elements: usize, pulses: usize) -> Result<()> {
    let data = load_cpi_file(input, elements, pulses)?;
    write_cpi_file(output, &data.snapshots)?;
    println!(
        "{} snapshots of length {}",
        data.snapshots.len(),
        elements * pulses
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, data } => {
            let cfg = common.resolve()?;
            if cfg.input.is_some() {
                return Err(StapError::Config("simulate does not take --input".into()));
            }
            let dataset = load_dataset(&cfg)?;
            write_cpi_file(&data, &dataset.snapshots)?;
            println!("{}", data.display());
            Ok(())
        }
        Command::Run(common) => run_stage(&common, RunMode::Full),
        Command::Screen(common) => run_stage(&common, RunMode::Screen),
        Command::Metrics(common) => run_stage(&common, RunMode::Metrics),
        Command::Convert {
            input,
            output,
            elements,
            pulses,
        } => convert(&input, &output, elements, pulses),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.chain());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
