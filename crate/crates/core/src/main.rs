use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nnopt::harness::{
    export_fit_curve, run_chained, run_grid, run_single, write_curve_csv, write_json, ExperimentConfig, GridConfig,
    HarnessError, RunReport, DESK_SINC_POINTS,
};
use nnopt::net::read_params;
use nnopt::optim::{Algorithm, StopCriteria};
use nnopt::problems::{evaluate_field, write_field_csv, SincConvention};

#[derive(Parser)]
#[command(name = "nnopt", version, about = "Train small networks with Adam, BFGS, L-BFGS or Levenberg-Marquardt")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit sinc(10x) with a single optimizer.
    FitSinc(RunArgs),
    /// Train a physics-informed network on Burgers' equation.
    FitBurgers {
        #[command(flatten)]
        run: RunArgs,
        /// Field export lattice size in x.
        #[arg(long, default_value_t = 101)]
        field_nx: usize,
        /// Field export lattice size in t.
        #[arg(long, default_value_t = 51)]
        field_nt: usize,
    },
    /// Adam followed by BFGS or L-BFGS from Adam's final weights.
    Chain {
        #[command(flatten)]
        run: RunArgs,
        /// Second-phase optimizer (bfgs or lbfgs).
        #[arg(long)]
        second: Option<Algorithm>,
        /// Second-phase iteration cap.
        #[arg(long)]
        second_epochs: Option<usize>,
    },
    /// Adam over every (layers, hidden units) pair.
    Grid {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "out/grid")]
        out_dir: PathBuf,
        /// Use the small sinc dataset.
        #[arg(long)]
        desk: bool,
    },
    /// Evaluate a trained sinc model on an even grid.
    ExportCurve {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long)]
        normalized: bool,
        #[arg(long, default_value = "curve.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    optimizer: Option<Algorithm>,
    #[arg(long, default_value = "out/run")]
    out_dir: PathBuf,
    /// Use the small dataset sizes.
    #[arg(long)]
    desk: bool,
}

impl RunArgs {
    fn resolve(&self, default: ExperimentConfig, kind: &str) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => default,
        };
        if cfg.problem.kind() != kind {
            return Err(HarnessError::Config(format!(
                "this command runs the {kind} problem but the config describes {}",
                cfg.problem.kind()
            )));
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(epochs) = self.epochs {
            cfg.stop.max_epochs = epochs;
        }
        if let Some(opt) = self.optimizer {
            cfg.optimizer = opt;
        }
        if self.desk {
            cfg.problem.desk_scale();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(dir: &Path, r: &RunReport) {
    let s = &r.summary;
    for p in &s.phases {
        eprintln!(
            "{:>6}: {} epochs, best {:.6e} at epoch {}, {:?}, {:.2}s",
            p.optimizer, p.epochs, p.best_loss, p.best_epoch, p.stop_reason, p.elapsed_s
        );
    }
    println!(
        "best loss {:.10e} at epoch {} ({} epochs, {:.2}s) -> {}",
        s.best_loss,
        s.best_epoch,
        s.epochs,
        s.wall_time_s,
        dir.display()
    );
}

fn finish(dir: &Path, r: &RunReport) -> Result<(), HarnessError> {
    report(dir, r);
    if r.numerical_failure() {
        return Err(HarnessError::Numerical(format!("{:?}", r.summary.stop_reason)));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::FitSinc(args) => {
            let cfg = args.resolve(ExperimentConfig::sinc_default(), "sinc")?;
            let r = run_single(&cfg, Some(&args.out_dir))?;
            finish(&args.out_dir, &r)
        }
        Command::FitBurgers { run, field_nx, field_nt } => {
            let cfg = run.resolve(ExperimentConfig::burgers_default(), "burgers")?;
            let r = run_single(&cfg, Some(&run.out_dir))?;
            let field = evaluate_field(&cfg.spec, &r.best_params, field_nx, field_nt)?;
            write_field_csv(&run.out_dir.join("field.csv"), &field)?;
            finish(&run.out_dir, &r)
        }
        Command::Chain { run, second, second_epochs } => {
            let mut cfg = run.resolve(ExperimentConfig::chain_default(), "sinc")?;
            let default_phase = ExperimentConfig::chain_default().chain.expect("default chain");
            let phase = cfg.chain.get_or_insert(default_phase);
            if let Some(alg) = second {
                phase.optimizer = alg;
            }
            if let Some(n) = second_epochs {
                phase.stop = StopCriteria { max_epochs: n, ..phase.stop.clone() };
            }
            let phase = phase.clone();
            let r = run_chained(&cfg, phase.optimizer, &phase.stop, Some(&run.out_dir))?;
            finish(&run.out_dir, &r)
        }
        Command::Grid { config, seed, epochs, out_dir, desk } => {
            let mut grid = match config {
                Some(path) => GridConfig::load(&path)?,
                None => GridConfig::default(),
            };
            if let Some(seed) = seed {
                grid.seed = seed;
            }
            if let Some(epochs) = epochs {
                grid.epochs = epochs;
            }
            if desk {
                grid.sinc.n = DESK_SINC_POINTS;
            }
            let rows = run_grid(&grid, Some(&out_dir))?;
            write_json(&out_dir.join("grid_config.json"), &grid)?;
            println!("layers,hidden_units,param_count,best_loss,best_epoch");
            for r in rows {
                println!("{},{},{},{:.6e},{}", r.layers, r.hidden_units, r.param_count, r.best_loss, r.best_epoch);
            }
            Ok(())
        }
        Command::ExportCurve { params, points, normalized, out } => {
            let (spec, p) = read_params(&params).map_err(|e| HarnessError::Config(format!("{}: {e}", params.display())))?;
            let convention = if normalized { SincConvention::Normalized } else { SincConvention::Unnormalized };
            let curve = export_fit_curve(&spec, &p, points, convention)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            write_curve_csv(&out, &curve)?;
            println!("{} points -> {}", curve.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
