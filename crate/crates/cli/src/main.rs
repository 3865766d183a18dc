use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use psrl_zsg::harness::{self, RunConfig};
use psrl_zsg::matrix_game::solve_matrix_game;
use psrl_zsg::planner::{solve_sg, PlannerConfig};
use psrl_zsg::sg_model::{validate_game, StochasticGame};

#[derive(Parser)]
#[command(name = "psrl-zsg", version, about = "Posterior sampling for zero-sum stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv, episodes.csv and meta.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `run.out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run seeds `seed .. seed + N` and write per-seed directories plus summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a game file and print gain, bias and equilibrium policies as JSON.
    Plan {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0.2)]
        damping: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
    },
    /// Solve a matrix game given as a JSON array of rows (file or stdin).
    SolveMatrix {
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Re-check a run directory: growth rule, episode bound, regret accounting.
    CheckBounds {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            let dir = out_dir(out, &cfg)?;
            let trace = harness::run_experiment(&cfg)?;
            harness::write_run(&trace, &dir)?;
            let last = trace.final_checkpoint();
            println!(
                "{}",
                serde_json::json!({
                    "out": dir,
                    "T": trace.meta.T,
                    "J_star": trace.meta.J_star,
                    "cum_regret": last.cum_regret,
                    "K_T": trace.meta.K_T,
                })
            );
        }
        Command::Sweep {
            config,
            seeds,
            parallel,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out_dir(out, &cfg)?;
            let traces = harness::run_sweep(&cfg, seeds, parallel)?;
            for trace in &traces {
                harness::write_run(trace, &dir.join(format!("seed_{}", trace.meta.seed)))?;
            }
            let summary = harness::aggregate_runs(&traces)?;
            harness::write_summary(&summary, &dir.join("summary.csv"))?;
            let last = summary.final_row();
            println!(
                "{}",
                serde_json::json!({
                    "out": dir,
                    "n_runs": summary.n_runs,
                    "T": summary.horizon,
                    "mean_regret": last.mean_regret,
                    "se_regret": last.se_regret,
                    "mean_K_T": summary.mean_K_T,
                })
            );
        }
        Command::Plan {
            game,
            tol,
            damping,
            max_iter,
        } => {
            let g = load_game(&game)?;
            let cfg = PlannerConfig { tol, damping, max_iter };
            let solution = solve_sg(&g, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&solution)?);
        }
        Command::SolveMatrix { file, tol } => {
            let text = match &file {
                Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
                    s
                }
            };
            let g: Vec<Vec<f64>> = serde_json::from_str(&text).context("matrix must be a JSON array of rows")?;
            let solution = solve_matrix_game(&g, tol)?;
            println!("{}", serde_json::to_string_pretty(&solution)?);
        }
        Command::CheckBounds { trace } => {
            let report = harness::check_bounds_dir(&trace)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn out_dir(cli: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    match cli.or_else(|| cfg.run.out_dir.clone()) {
        Some(dir) => Ok(dir),
        None => bail!("no output directory: pass --out or set run.out_dir"),
    }
}

fn load_game(path: &Path) -> Result<StochasticGame> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let game = StochasticGame::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = validate_game(&game);
    if !report.is_valid() {
        bail!("{}: {report}", path.display());
    }
    Ok(game)
}
