use clap::{Parser, Subcommand};
use fedmuon::config::ExperimentConfig;
use fedmuon::error::Error;
use fedmuon::runner;
use fedmuon::verify;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fedmuon",
    version,
    about = "Deterministic federated-optimization laboratory built around linear minimization oracles"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the seeded runs described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override run.seeds with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of the stepsize/alpha grids and rank cells.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid worker threads (FEDMUON_WORKERS also works).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run every module invariant suite with fixed seeds.
    Verify,
    /// LocalMuon next to FedMuon on the two-client scalar construction.
    Counterexample {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
        /// FedMuon stepsize; defaults to the better of {0.01, 0.001}.
        #[arg(long)]
        eta: Option<f64>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::UnknownClient(_) => 2,
        Error::NonFiniteLoss { .. } => 3,
        _ => 1,
    }
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.run.seeds = vec![seed];
    }
    if let Some(out) = out {
        cfg.run.out = out;
    }
    Ok(cfg)
}

fn cmd_run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Error> {
    let cfg = load_config(&config, seed, out)?;
    let out_dir = cfg.run.out.clone();
    let summaries = runner::run_all_seeds(&cfg, &out_dir)?;
    for s in &summaries {
        println!(
            "seed {:>3}: {} records, final loss {:.6e}, final grad (F {:.3e} / trace {:.3e} / sp {:.3e})",
            s.seed, s.records, s.final_loss, s.final_grad_frobenius, s.final_grad_trace, s.final_grad_spectral
        );
    }
    println!("traces and summary.csv written to {}", out_dir.display());
    Ok(())
}

fn cmd_grid(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<(), Error> {
    let cfg = load_config(&config, seed, out)?;
    let out_dir = cfg.run.out.clone();
    let rows = runner::execute_grid(&cfg, &out_dir, workers)?;
    println!(
        "{:<5} {:<8} {:>10} {:>10} {:>7} {:>14} {:>14}",
        "rank", "cell", "eta", "eta_aux", "alpha", "mean loss", "mean dual grad"
    );
    for (rank, row) in rows.iter().enumerate() {
        println!(
            "{:<5} cell{:03} {:>10} {:>10} {:>7} {:>14.6e} {:>14.6e}",
            rank + 1,
            row.cell_index,
            row.cell.eta,
            row.cell.eta_aux,
            row.cell.alpha,
            row.mean_final_loss,
            row.mean_dual_grad_last10
        );
    }
    println!("leaderboard.csv written to {}", out_dir.display());
    Ok(())
}

fn cmd_verify() -> Result<bool, Error> {
    let results = verify::run_all();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut all_passed = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {:<width$}  {}", r.name, r.detail);
        all_passed &= r.passed;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed", results.len(), failed);
    Ok(all_passed)
}

fn cmd_counterexample(a: f64, alpha: f64, rounds: usize, eta: Option<f64>) -> Result<(), Error> {
    let etas = match eta {
        Some(e) => vec![e],
        None => vec![0.01, 0.001],
    };
    let report = runner::counterexample_report(a, alpha, rounds, &etas)?;
    println!(
        "two-client construction: a = {a}, alpha = {alpha}, analytic floor a^2/16 = {}",
        report.floor
    );
    println!("fedmuon stepsize: {}", report.fedmuon_eta);
    println!(
        "{:>8} {:>22} {:>22} {:>14}",
        "round", "localmuon |grad|^2", "fedmuon |grad|^2", "floor"
    );
    let stride = (rounds / 20).max(1);
    for (lm, fm) in report.localmuon.iter().zip(&report.fedmuon) {
        if lm.0 % stride as u64 == 0 || lm.0 + 1 == rounds as u64 {
            println!("{:>8} {:>22.12e} {:>22.12e} {:>14.6e}", lm.0, lm.1, fm.1, report.floor);
        }
    }
    println!(
        "localmuon pinned at the floor: {} | fedmuon min |grad|^2: {:.6e}",
        report.localmuon_constant, report.fedmuon_min
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run { config, seed, out } => cmd_run(config, seed, out).map(|_| true),
        Cmd::Grid { config, seed, out, workers } => {
            cmd_grid(config, seed, out, workers).map(|_| true)
        }
        Cmd::Verify => cmd_verify(),
        Cmd::Counterexample { a, alpha, rounds, eta } => {
            cmd_counterexample(a, alpha, rounds, eta).map(|_| true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
