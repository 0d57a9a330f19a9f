//! `nnqft` draws network ensembles from a TOML configuration and writes
//! plot-ready CSV and JSON tables.
//!
//! Every run writes `manifest-<command>.json` next to its outputs. Failures
//! print a single JSON object `{"error": {"code", "message", "stage"}}` on
//! stderr and exit with status 1.

mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nnqft::fit::Model;

use crate::output::CliError;
use crate::stages::{Context, Stage};

#[derive(Parser, Debug)]
#[command(name = "nnqft", version, about = "Finite-width network ensembles: GP limit, couplings and RG flow")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `plan.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Single width to sample, and the width analyzed by the pipeline.
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Overrides `plan.widths`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Overrides `analysis.cutoffs` for the RG sweep, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub cutoffs: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, global = true, default_value = "nnqft-out")]
    pub out: PathBuf,
    /// Worker threads for sampling.
    #[arg(long, global = true, env = "NNQFT_THREADS")]
    pub threads: Option<usize>,
    /// Gauss–Legendre points per axis for the interaction integrals.
    #[arg(long, global = true)]
    pub quad_points: Option<usize>,
    /// 20 experiments of 5·10⁴ networks.
    #[arg(long, global = true, conflicts_with = "paper_scale")]
    pub desk_scale: bool,
    /// 100 experiments of 10⁵ networks.
    #[arg(long, global = true)]
    pub paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw the ensembles and write one moment snapshot per width.
    Sample {
        /// Sample on the coupling-fit training grid instead of the main grid.
        #[arg(long)]
        train_grid: bool,
    },
    /// Tabulate K and K_W over the grid.
    Kernels,
    /// Empirical 2-, 4- and 6-point functions against the GP prediction.
    Npt {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
    },
    /// Large-width falloff of the deviations and of the connected 6-point function.
    Scaling {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
    },
    /// Quartic coupling per grid element from the 4-point function.
    ExtractLambda { snapshot: PathBuf },
    /// 6-point prediction from the extracted coupling.
    PredictG6 { snapshot: PathBuf },
    /// Coupling as a function of the cutoff.
    RgSweep { snapshot: PathBuf },
    /// Fit the couplings of one model on a training snapshot and test on another.
    FitCouplings {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run several stages in order, sharing snapshots through the output directory.
    Pipeline {
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "sample,npt,scaling,extract-lambda,predict-g6,rg-sweep,fit-couplings"
        )]
        stages: Vec<Stage>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    M0,
    M1,
    M2,
    M3,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::M0 => Model::M0,
            ModelArg::M1 => Model::M1,
            ModelArg::M2 => Model::M2,
            ModelArg::M3 => Model::M3,
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample { .. } => "sample",
            Command::Kernels => "kernels",
            Command::Npt { .. } => "npt",
            Command::Scaling { .. } => "scaling",
            Command::ExtractLambda { .. } => "extract-lambda",
            Command::PredictG6 { .. } => "predict-g6",
            Command::RgSweep { .. } => "rg-sweep",
            Command::FitCouplings { .. } => "fit-couplings",
            Command::Pipeline { .. } => "pipeline",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = chrono::Utc::now();
    let mut ctx = Context::load(&cli.global)?;
    match &cli.command {
        Command::Sample { train_grid } => {
            let grid = if *train_grid { ctx.cfg.train_grid()? } else { ctx.plan.grid.clone() };
            let widths = ctx.plan.widths.clone();
            stages::sample(&mut ctx, &grid, &widths)?;
        }
        Command::Kernels => stages::kernels(&mut ctx)?,
        Command::Npt { snapshots } => {
            let snaps = ctx.load_snapshots(snapshots)?;
            stages::npt(&mut ctx, &snaps)?;
        }
        Command::Scaling { snapshots } => {
            let snaps = ctx.load_snapshots(snapshots)?;
            stages::scaling(&mut ctx, &snaps)?;
        }
        Command::ExtractLambda { snapshot } => {
            let snap = ctx.load_snapshot(snapshot)?;
            stages::extract_lambda(&mut ctx, &snap)?;
        }
        Command::PredictG6 { snapshot } => {
            let snap = ctx.load_snapshot(snapshot)?;
            stages::predict_g6(&mut ctx, &snap)?;
        }
        Command::RgSweep { snapshot } => {
            let snap = ctx.load_snapshot(snapshot)?;
            stages::rg_sweep(&mut ctx, &snap)?;
        }
        Command::FitCouplings { model, train, test } => {
            let (train, test) = ctx.load_fit_pair(train, test)?;
            stages::fit_couplings(&mut ctx, (*model).into(), &train, &test)?;
        }
        Command::Pipeline { stages: list } => stages::pipeline(&mut ctx, list)?,
    }
    ctx.out.write_manifest(cli.command.name(), &ctx.config_sha256, ctx.plan.seed, started)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
