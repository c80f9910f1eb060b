//! Experiment orchestration on top of the round engine: seeded runs writing
//! JSONL traces and CSV summaries, grid sweeps with a leaderboard, and the
//! side-by-side counterexample report.

use crate::config::{ExperimentConfig, GridCell};
use crate::error::{Error, Result};
use crate::fed::{self, Algorithm, RoundConfig};
use crate::lmo::LmoMode;
use crate::mat::{dual_norm_kind, NormKind};
use crate::problems::{CounterexampleProblem, NoiseChannel, Problem};
use crate::trace::RoundTrace;
use rayon::prelude::*;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable overriding the grid worker count.
pub const WORKERS_ENV: &str = "FEDMUON_WORKERS";

/// Scalar digest of one finished run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub seed: u64,
    pub rounds: usize,
    pub records: usize,
    pub final_loss: f64,
    pub final_grad_frobenius: f64,
    pub final_grad_trace: f64,
    pub final_grad_spectral: f64,
    /// Mean dual-norm gradient over the last tenth of the rounds.
    pub mean_dual_grad_last10: f64,
    pub running_kappa: f64,
    pub final_accuracy: Option<f64>,
}

/// Dual-norm gradient of a record under the run's geometry.
pub fn dual_grad(trace: &RoundTrace, norm: NormKind) -> f64 {
    match dual_norm_kind(norm).unwrap_or(NormKind::Frobenius) {
        NormKind::Trace => trace.grad_trace,
        NormKind::Spectral => trace.grad_spectral,
        _ => trace.grad_frobenius,
    }
}

/// Accumulates the summary while records stream out.
struct SummaryBuilder {
    seed: u64,
    rounds: usize,
    norm: NormKind,
    cutoff_round: u64,
    records: usize,
    tail_sum: f64,
    tail_count: usize,
    last: Option<RoundTrace>,
}

impl SummaryBuilder {
    fn new(seed: u64, rounds: usize, norm: NormKind) -> Self {
        let cutoff_round = (rounds as f64 * 0.9).floor() as u64;
        SummaryBuilder {
            seed,
            rounds,
            norm,
            cutoff_round,
            records: 0,
            tail_sum: 0.0,
            tail_count: 0,
            last: None,
        }
    }

    fn push(&mut self, trace: &RoundTrace) {
        self.records += 1;
        if trace.round >= self.cutoff_round {
            self.tail_sum += dual_grad(trace, self.norm);
            self.tail_count += 1;
        }
        self.last = Some(trace.clone());
    }

    fn finish(self) -> Result<RunSummary> {
        let last = self
            .last
            .ok_or_else(|| Error::Config("run produced no trace records".into()))?;
        Ok(RunSummary {
            seed: self.seed,
            rounds: self.rounds,
            records: self.records,
            final_loss: last.loss,
            final_grad_frobenius: last.grad_frobenius,
            final_grad_trace: last.grad_trace,
            final_grad_spectral: last.grad_spectral,
            mean_dual_grad_last10: if self.tail_count > 0 {
                self.tail_sum / self.tail_count as f64
            } else {
                f64::NAN
            },
            running_kappa: last.running_kappa,
            final_accuracy: last.accuracy,
        })
    }
}

/// Run one seed of the experiment, streaming JSONL to
/// `<dir>/trace_seed<seed>.jsonl`.
pub fn execute_run(
    cfg: &ExperimentConfig,
    round_cfg: &RoundConfig,
    seed: u64,
    dir: &Path,
) -> Result<RunSummary> {
    let problem = cfg.problem.build()?;
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("trace_seed{seed}.jsonl"));
    let file = fs::File::create(&path)?;
    let mut writer = std::io::BufWriter::new(file);
    let mut builder = SummaryBuilder::new(seed, cfg.run.rounds, round_cfg.norm);
    let channel = cfg.channel(seed);
    let result = fed::run(
        round_cfg,
        problem.as_ref(),
        &channel,
        cfg.run.rounds,
        cfg.run.metric_every,
        cfg.run.wallclock,
        &mut |t| {
            writeln!(writer, "{}", t.to_json_line()?)?;
            builder.push(t);
            Ok(())
        },
    );
    writer.flush()?;
    result?;
    builder.finish()
}

pub fn summary_csv_header() -> &'static str {
    "seed,rounds,records,final_loss,final_grad_frobenius,final_grad_trace,final_grad_spectral,mean_dual_grad_last10,running_kappa,final_accuracy"
}

fn summary_row(s: &RunSummary) -> Vec<String> {
    vec![
        s.seed.to_string(),
        s.rounds.to_string(),
        s.records.to_string(),
        s.final_loss.to_string(),
        s.final_grad_frobenius.to_string(),
        s.final_grad_trace.to_string(),
        s.final_grad_spectral.to_string(),
        s.mean_dual_grad_last10.to_string(),
        s.running_kappa.to_string(),
        s.final_accuracy.map(|a| a.to_string()).unwrap_or_default(),
    ]
}

pub fn write_summary_csv(path: &Path, summaries: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_csv_header().split(','))?;
    for s in summaries {
        w.write_record(summary_row(s))?;
    }
    w.flush()?;
    Ok(())
}

/// All seeds of the `run` subcommand: traces plus `summary.csv`.
pub fn run_all_seeds(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RunSummary>> {
    let mut summaries = Vec::new();
    for &seed in &cfg.run.seeds {
        let round_cfg = cfg.round.to_round_config(seed);
        summaries.push(execute_run(cfg, &round_cfg, seed, out)?);
    }
    write_summary_csv(&out.join("summary.csv"), &summaries)?;
    Ok(summaries)
}

/// One leaderboard row: a grid cell averaged over seeds.
#[derive(Clone, Debug)]
pub struct LeaderboardRow {
    pub cell_index: usize,
    pub cell: GridCell,
    pub seeds: usize,
    pub mean_final_loss: f64,
    pub mean_dual_grad_last10: f64,
}

/// Run the full Cartesian product of grids x seeds. Each cell owns
/// `<out>/cell<idx>/`; the leaderboard is sorted by mean final loss
/// (the selection metric), best first.
pub fn execute_grid(
    cfg: &ExperimentConfig,
    out: &Path,
    workers: Option<usize>,
) -> Result<Vec<LeaderboardRow>> {
    let cells = cfg.grid_cells()?;
    fs::create_dir_all(out)?;

    let jobs: Vec<(usize, GridCell)> = cells.into_iter().enumerate().collect();
    let run_cell = |(index, cell): &(usize, GridCell)| -> Result<LeaderboardRow> {
        let dir = out.join(format!("cell{index:03}"));
        let mut summaries = Vec::new();
        for &seed in &cfg.run.seeds {
            let mut round_cfg = cfg.round.to_round_config(seed);
            round_cfg.eta = cell.eta;
            round_cfg.eta_aux = cell.eta_aux;
            round_cfg.alpha = cell.alpha;
            round_cfg.validate()?;
            summaries.push(execute_run(cfg, &round_cfg, seed, &dir)?);
        }
        write_summary_csv(&dir.join("summary.csv"), &summaries)?;
        let n = summaries.len() as f64;
        Ok(LeaderboardRow {
            cell_index: *index,
            cell: *cell,
            seeds: summaries.len(),
            mean_final_loss: summaries.iter().map(|s| s.final_loss).sum::<f64>() / n,
            mean_dual_grad_last10: summaries.iter().map(|s| s.mean_dual_grad_last10).sum::<f64>()
                / n,
        })
    };

    let mut rows: Vec<LeaderboardRow> = match effective_workers(workers) {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run_cell).collect::<Result<_>>())?
        }
        None => jobs.par_iter().map(run_cell).collect::<Result<_>>()?,
    };

    rows.sort_by(|a, b| {
        a.mean_final_loss
            .partial_cmp(&b.mean_final_loss)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cell_index.cmp(&b.cell_index))
    });
    let mut w = csv::Writer::from_path(out.join("leaderboard.csv"))?;
    w.write_record([
        "rank",
        "cell",
        "eta",
        "eta_aux",
        "alpha",
        "seeds",
        "mean_final_loss",
        "mean_dual_grad_last10",
    ])?;
    for (rank, row) in rows.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            format!("cell{:03}", row.cell_index),
            row.cell.eta.to_string(),
            row.cell.eta_aux.to_string(),
            row.cell.alpha.to_string(),
            row.seeds.to_string(),
            row.mean_final_loss.to_string(),
            row.mean_dual_grad_last10.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

fn effective_workers(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&w| w > 0)
    })
}

/// Result of the side-by-side counterexample comparison.
#[derive(Clone, Debug)]
pub struct CounterexampleReport {
    pub a: f64,
    pub alpha: f64,
    pub rounds: usize,
    pub floor: f64,
    /// (round, grad^2) trajectory samples for both methods.
    pub localmuon: Vec<(u64, f64)>,
    pub fedmuon: Vec<(u64, f64)>,
    pub fedmuon_eta: f64,
    pub localmuon_constant: bool,
    pub fedmuon_min: f64,
}

/// Run LocalMuon and FedMuon side by side on the two-client construction.
/// FedMuon picks the better stepsize from `etas` by the smallest gradient
/// reached.
pub fn counterexample_report(
    a: f64,
    alpha: f64,
    rounds: usize,
    etas: &[f64],
) -> Result<CounterexampleReport> {
    if rounds == 0 {
        return Err(Error::Config("rounds must be at least 1".into()));
    }
    if etas.is_empty() {
        return Err(Error::Config("need at least one stepsize".into()));
    }
    let problem = CounterexampleProblem::new(a)?;
    let base = RoundConfig {
        n_clients: 2,
        sampled: 2,
        local_steps: 1,
        eta: etas[0],
        eta_aux: etas[0],
        alpha,
        algorithm: Algorithm::LocalMuon,
        norm: NormKind::EuclideanVec,
        lmo: LmoMode::Exact,
        scale_stepsize: true,
        sgd_momentum: 0.9,
        aux_optimizer: crate::fed::AuxOptimizer::SgdMomentum,
        momentum_init: crate::fed::MomentumInit::Zero,
        seed: 0,
    };

    let trajectory = |cfg: &RoundConfig| -> Result<Vec<(u64, f64)>> {
        let mut sim = fed::Simulator::new(cfg.clone(), &problem, NoiseChannel::silent())?;
        let mut out = Vec::with_capacity(rounds);
        for r in 0..rounds {
            let g = problem.global_grad(&sim.server().x)?[0][(0, 0)];
            out.push((r as u64, g * g));
            sim.step_round()?;
        }
        Ok(out)
    };

    let localmuon = trajectory(&base)?;
    let mut best: Option<(f64, f64, Vec<(u64, f64)>)> = None;
    for &eta in etas {
        let mut cfg = base.clone();
        cfg.algorithm = Algorithm::FedMuon;
        cfg.eta = eta;
        let traj = trajectory(&cfg)?;
        let min = traj.iter().map(|(_, g)| *g).fold(f64::INFINITY, f64::min);
        if best.as_ref().map_or(true, |(b, _, _)| min < *b) {
            best = Some((min, eta, traj));
        }
    }
    let (_, fedmuon_eta, fedmuon) = best.expect("at least one eta");

    let floor = problem.stagnation_floor();
    let localmuon_constant = localmuon.iter().all(|(_, g)| *g == floor);
    let fedmuon_min = fedmuon.iter().map(|(_, g)| *g).fold(f64::INFINITY, f64::min);
    Ok(CounterexampleReport {
        a,
        alpha,
        rounds,
        floor,
        localmuon,
        fedmuon,
        fedmuon_eta,
        localmuon_constant,
        fedmuon_min,
    })
}

/// Path of the per-seed trace file inside a run directory.
pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::read_jsonl;

    const COUNTEREXAMPLE: &str = r#"
        [problem]
        kind = "counterexample"

        [round]
        algorithm = "local_muon"
        n = 2
        s = 2
        k = 1
        eta = 0.01
        alpha = 0.5
        norm = "euclidean_vec"
        lmo = { kind = "exact" }

        [run]
        rounds = 50
    "#;

    #[test]
    fn run_writes_traces_and_summary() {
        let cfg = ExperimentConfig::from_toml(COUNTEREXAMPLE).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summaries = run_all_seeds(&cfg, dir.path()).unwrap();
        assert_eq!(summaries.len(), 1);
        assert_eq!(summaries[0].records, 50);
        assert!((summaries[0].final_loss - 0.15625).abs() < 1e-15);
        let traces = read_jsonl(&trace_path(dir.path(), 0)).unwrap();
        assert_eq!(traces.len(), 50);
        let csv_text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(csv_text.starts_with("seed,rounds"));
        assert_eq!(csv_text.lines().count(), 2);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = ExperimentConfig::from_toml(COUNTEREXAMPLE).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_all_seeds(&cfg, dir_a.path()).unwrap();
        run_all_seeds(&cfg, dir_b.path()).unwrap();
        let a = std::fs::read(trace_path(dir_a.path(), 0)).unwrap();
        let b = std::fs::read(trace_path(dir_b.path(), 0)).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn grid_runs_every_cell_and_ranks_by_final_loss() {
        let text = COUNTEREXAMPLE.to_string()
            + r#"
        [grid]
        eta = [0.01, 0.001]
        eta_aux = [0.01]
        "#;
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows = execute_grid(&cfg, dir.path(), Some(2)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].mean_final_loss <= rows[1].mean_final_loss);
        for idx in 0..2 {
            assert!(trace_path(&dir.path().join(format!("cell{idx:03}")), 0).exists());
        }
        let leaderboard = std::fs::read_to_string(dir.path().join("leaderboard.csv")).unwrap();
        assert!(leaderboard.starts_with("rank,cell,eta"));
        assert_eq!(leaderboard.lines().count(), 3);
    }

    #[test]
    fn grid_with_singleton_grids_matches_plain_run() {
        let text = COUNTEREXAMPLE.to_string()
            + r#"
        [grid]
        eta = [0.01]
        eta_aux = [0.01]
        alpha = [0.5]
        "#;
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let dir_grid = tempfile::tempdir().unwrap();
        let dir_run = tempfile::tempdir().unwrap();
        execute_grid(&cfg, dir_grid.path(), None).unwrap();
        run_all_seeds(&cfg, dir_run.path()).unwrap();
        let a = std::fs::read(trace_path(&dir_grid.path().join("cell000"), 0)).unwrap();
        let b = std::fs::read(trace_path(dir_run.path(), 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leaderboard_averages_recompute_from_per_run_files() {
        let text = COUNTEREXAMPLE.replace("rounds = 50", "rounds = 40\nseeds = [0, 1]")
            + r#"
        [grid]
        eta = [0.01]
        "#;
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows = execute_grid(&cfg, dir.path(), None).unwrap();
        assert_eq!(rows[0].seeds, 2);
        let mut recomputed = 0.0;
        for seed in [0u64, 1] {
            let traces = read_jsonl(&trace_path(&dir.path().join("cell000"), seed)).unwrap();
            recomputed += traces.last().unwrap().loss / 2.0;
        }
        assert!((rows[0].mean_final_loss - recomputed).abs() < 1e-15);
    }

    #[test]
    fn counterexample_report_shapes() {
        let report = counterexample_report(1.0, 0.5, 300, &[0.01, 0.001]).unwrap();
        assert_eq!(report.floor, 0.0625);
        assert!(report.localmuon_constant);
        assert!(report.fedmuon_min < report.floor);
        assert_eq!(report.localmuon.len(), 300);
    }
}
