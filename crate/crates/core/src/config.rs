//! Experiment configuration: a single TOML file, fully validated before any
//! compute starts.

use crate::error::{Error, Result};
use crate::fed::{Algorithm, AuxOptimizer, MomentumInit, RoundConfig};
use crate::lmo::{LmoMode, NsConfig};
use crate::mat::NormKind;
use crate::problems::{
    MatrixQuadraticProblem, NoiseChannel, Problem, QuadraticConfig, ToyClassificationProblem,
    ToyConfig, ToyDataset,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Counterexample {
        #[serde(default = "default_offset")]
        a: f64,
        #[serde(default)]
        sigma: f64,
    },
    MatrixQuadratic {
        #[serde(default = "default_clients")]
        clients: usize,
        #[serde(default = "default_obs")]
        obs: usize,
        #[serde(default = "default_d1")]
        d1: usize,
        #[serde(default = "default_d2")]
        d2: usize,
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default = "default_heterogeneity")]
        heterogeneity: f64,
        #[serde(default)]
        data_seed: u64,
        #[serde(default)]
        sigma: f64,
    },
    ToyClassification {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default = "default_clients")]
        clients: usize,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        data_seed: u64,
        /// Load a saved dataset container (stem of the .bin/.json pair)
        /// instead of generating one.
        #[serde(default)]
        dataset_path: Option<PathBuf>,
        #[serde(default)]
        sigma: f64,
    },
}

fn default_offset() -> f64 {
    1.0
}
fn default_clients() -> usize {
    16
}
fn default_obs() -> usize {
    12
}
fn default_d1() -> usize {
    8
}
fn default_d2() -> usize {
    6
}
fn default_heterogeneity() -> f64 {
    1.0
}
fn default_samples() -> usize {
    256
}
fn default_features() -> usize {
    8
}
fn default_classes() -> usize {
    4
}
fn default_hidden() -> usize {
    8
}
fn default_beta() -> f64 {
    0.1
}

impl ProblemSpec {
    pub fn n_clients(&self) -> usize {
        match self {
            ProblemSpec::Counterexample { .. } => 2,
            ProblemSpec::MatrixQuadratic { clients, .. } => *clients,
            ProblemSpec::ToyClassification { clients, .. } => *clients,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            ProblemSpec::Counterexample { sigma, .. } => *sigma,
            ProblemSpec::MatrixQuadratic { sigma, .. } => *sigma,
            ProblemSpec::ToyClassification { sigma, .. } => *sigma,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Problem>> {
        match self {
            ProblemSpec::Counterexample { a, .. } => {
                Ok(Box::new(crate::problems::CounterexampleProblem::new(*a)?))
            }
            ProblemSpec::MatrixQuadratic {
                clients,
                obs,
                d1,
                d2,
                rank,
                heterogeneity,
                data_seed,
                ..
            } => Ok(Box::new(MatrixQuadraticProblem::generate(&QuadraticConfig {
                clients: *clients,
                obs: *obs,
                d1: *d1,
                d2: *d2,
                rank: *rank,
                heterogeneity: *heterogeneity,
                seed: *data_seed,
            })?)),
            ProblemSpec::ToyClassification {
                samples,
                features,
                classes,
                hidden,
                clients,
                beta,
                data_seed,
                dataset_path,
                ..
            } => {
                let problem = match dataset_path {
                    Some(stem) => ToyClassificationProblem::from_dataset(
                        ToyDataset::load(stem)?,
                        *clients,
                        *beta,
                        *hidden,
                        *data_seed,
                    )?,
                    None => ToyClassificationProblem::generate(&ToyConfig {
                        samples: *samples,
                        features: *features,
                        classes: *classes,
                        hidden: *hidden,
                        clients: *clients,
                        beta: *beta,
                        seed: *data_seed,
                    })?,
                };
                Ok(Box::new(problem))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LmoSpec {
    Exact,
    NewtonSchulz {
        #[serde(default = "default_ns_iters")]
        iters: usize,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
        #[serde(default)]
        c: Option<f64>,
    },
    Off,
}

fn default_ns_iters() -> usize {
    5
}

impl LmoSpec {
    pub fn to_mode(&self) -> LmoMode {
        match self {
            LmoSpec::Exact => LmoMode::Exact,
            LmoSpec::NewtonSchulz { iters, a, b, c } => {
                let base = NsConfig::analyzed(*iters);
                LmoMode::NewtonSchulz(NsConfig {
                    a: a.unwrap_or(base.a),
                    b: b.unwrap_or(base.b),
                    c: c.unwrap_or(base.c),
                    iters: *iters,
                })
            }
            LmoSpec::Off => LmoMode::Off,
        }
    }
}

impl Default for LmoSpec {
    fn default() -> Self {
        LmoSpec::NewtonSchulz { iters: default_ns_iters(), a: None, b: None, c: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundSpec {
    pub algorithm: Algorithm,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_eta_aux")]
    pub eta_aux: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_norm")]
    pub norm: NormKind,
    #[serde(default)]
    pub lmo: LmoSpec,
    #[serde(default = "default_true")]
    pub scale_stepsize: bool,
    #[serde(default = "default_sgd_momentum")]
    pub sgd_momentum: f64,
    #[serde(default = "default_aux_optimizer")]
    pub aux_optimizer: AuxOptimizer,
    #[serde(default = "default_momentum_init")]
    pub momentum_init: MomentumInit,
}

fn default_n() -> usize {
    16
}
fn default_s() -> usize {
    8
}
fn default_k() -> usize {
    5
}
fn default_eta() -> f64 {
    0.001
}
fn default_eta_aux() -> f64 {
    0.01
}
fn default_alpha() -> f64 {
    0.1
}
fn default_norm() -> NormKind {
    NormKind::Spectral
}
fn default_true() -> bool {
    true
}
fn default_sgd_momentum() -> f64 {
    0.9
}
fn default_aux_optimizer() -> AuxOptimizer {
    AuxOptimizer::SgdMomentum
}
fn default_momentum_init() -> MomentumInit {
    MomentumInit::Zero
}

impl RoundSpec {
    pub fn to_round_config(&self, seed: u64) -> RoundConfig {
        RoundConfig {
            n_clients: self.n,
            sampled: self.s,
            local_steps: self.k,
            eta: self.eta,
            eta_aux: self.eta_aux,
            alpha: self.alpha,
            algorithm: self.algorithm,
            norm: self.norm,
            lmo: self.lmo.to_mode(),
            scale_stepsize: self.scale_stepsize,
            sgd_momentum: self.sgd_momentum,
            aux_optimizer: self.aux_optimizer,
            momentum_init: self.momentum_init,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub rounds: usize,
    #[serde(default = "default_metric_every")]
    pub metric_every: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub wallclock: bool,
}

fn default_metric_every() -> usize {
    1
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Stepsize/alpha grids for `grid` mode. Missing entries fall back to the
/// per-algorithm default grids.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    #[serde(default)]
    pub eta_aux: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub round: RoundSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

/// Default stepsize grid per algorithm.
pub fn default_eta_grid(algorithm: Algorithm) -> Vec<f64> {
    match algorithm {
        Algorithm::FedMuon | Algorithm::LocalMuon => vec![0.001, 0.0001],
        Algorithm::FedAvg | Algorithm::Scaffold => vec![0.1, 0.01, 0.001],
    }
}

/// Default auxiliary (SGD) stepsize grid per algorithm.
pub fn default_eta_aux_grid(algorithm: Algorithm, fallback: f64) -> Vec<f64> {
    match algorithm {
        Algorithm::FedMuon | Algorithm::LocalMuon => vec![0.1, 0.01],
        Algorithm::FedAvg | Algorithm::Scaffold => vec![fallback],
    }
}

/// One grid cell: the hyperparameters swept by `grid` mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub eta: f64,
    pub eta_aux: f64,
    pub alpha: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.rounds == 0 {
            return Err(Error::Config("run.rounds must be at least 1".into()));
        }
        if self.run.metric_every == 0 {
            return Err(Error::Config("run.metric_every must be at least 1".into()));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".into()));
        }
        if self.round.n != self.problem.n_clients() {
            return Err(Error::Config(format!(
                "round.n = {} but the problem defines {} clients",
                self.round.n,
                self.problem.n_clients()
            )));
        }
        if self.problem.sigma() < 0.0 {
            return Err(Error::Config("problem.sigma must be non-negative".into()));
        }
        self.round.to_round_config(0).validate()?;
        if let Some(grid) = &self.grid {
            for (key, values) in [
                ("grid.eta", &grid.eta),
                ("grid.eta_aux", &grid.eta_aux),
                ("grid.alpha", &grid.alpha),
            ] {
                if let Some(v) = values {
                    if v.is_empty() {
                        return Err(Error::Config(format!("{key} must not be empty")));
                    }
                    if v.iter().any(|x| !(*x > 0.0)) {
                        return Err(Error::Config(format!("{key} entries must be positive")));
                    }
                }
            }
            if let Some(alphas) = &grid.alpha {
                if alphas.iter().any(|a| *a > 1.0) {
                    return Err(Error::Config("grid.alpha entries must lie in (0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    /// Noise channel for one seeded run.
    pub fn channel(&self, seed: u64) -> NoiseChannel {
        NoiseChannel { sigma: self.problem.sigma(), seed }
    }

    /// Cartesian product of the grids, falling back to the per-algorithm
    /// defaults (or the configured scalar) where a grid is missing.
    pub fn grid_cells(&self) -> Result<Vec<GridCell>> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::Config("grid mode needs a [grid] section".into()))?;
        let etas =
            grid.eta.clone().unwrap_or_else(|| default_eta_grid(self.round.algorithm));
        let eta_auxes = grid
            .eta_aux
            .clone()
            .unwrap_or_else(|| default_eta_aux_grid(self.round.algorithm, self.round.eta_aux));
        let alphas = grid.alpha.clone().unwrap_or_else(|| vec![self.round.alpha]);
        let mut cells = Vec::new();
        for &eta in &etas {
            for &eta_aux in &eta_auxes {
                for &alpha in &alphas {
                    cells.push(GridCell { eta, eta_aux, alpha });
                }
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        kind = "counterexample"

        [round]
        algorithm = "local_muon"
        n = 2
        s = 2
        k = 1
        norm = "euclidean_vec"
        lmo = { kind = "exact" }

        [run]
        rounds = 100
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.round.k, 1);
        assert_eq!(cfg.round.eta, 0.001);
        assert_eq!(cfg.run.seeds, vec![0]);
        assert!(!cfg.run.wallclock);
        let rc = cfg.round.to_round_config(7);
        assert_eq!(rc.seed, 7);
        assert_eq!(rc.lmo, LmoMode::Exact);
    }

    #[test]
    fn unknown_keys_are_named_in_the_error() {
        let bad = MINIMAL.replace("rounds = 100", "rounds = 100\nbogus_key = 3");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn client_count_mismatch_is_rejected() {
        let bad = MINIMAL.replace("n = 2", "n = 4").replace("s = 2", "s = 4");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("clients"), "{err}");
    }

    #[test]
    fn newton_schulz_spec_with_overrides() {
        let text = MINIMAL
            .replace("norm = \"euclidean_vec\"", "norm = \"spectral\"")
            .replace(
                "lmo = { kind = \"exact\" }",
                "lmo = { kind = \"newton_schulz\", iters = 3, a = 2.0 }",
            );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        match cfg.round.lmo.to_mode() {
            LmoMode::NewtonSchulz(ns) => {
                assert_eq!(ns.iters, 3);
                assert_eq!(ns.a, 2.0);
                assert_eq!(ns.b, -1.25);
            }
            other => panic!("unexpected mode {other:?}"),
        }
    }

    #[test]
    fn grid_cells_default_to_algorithm_grids() {
        let text = MINIMAL.to_string() + "\n[grid]\n";
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let cells = cfg.grid_cells().unwrap();
        // local_muon: eta {0.001, 0.0001} x eta_aux {0.1, 0.01} x alpha {0.1}
        assert_eq!(cells.len(), 4);
        let text = text.replace("[grid]", "[grid]\neta = [0.5]\neta_aux = [0.1]");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.grid_cells().unwrap().len(), 1);
    }

    #[test]
    fn grid_without_section_errors() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert!(cfg.grid_cells().is_err());
    }

    #[test]
    fn empty_grid_entries_rejected() {
        let text = MINIMAL.to_string() + "\n[grid]\neta = []\n";
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn toy_problem_loads_from_saved_container() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("blob");
        ToyDataset::generate(64, 4, 2, 3).unwrap().save(&stem).unwrap();
        let text = format!(
            r#"
            [problem]
            kind = "toy_classification"
            clients = 4
            hidden = 4
            dataset_path = "{}"

            [round]
            algorithm = "fed_muon"
            n = 4
            s = 2
            k = 2

            [run]
            rounds = 3
            "#,
            stem.display()
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let problem = cfg.problem.build().unwrap();
        assert_eq!(problem.n_clients(), 4);
        // the whole pipeline runs off the loaded container
        let round_cfg = cfg.round.to_round_config(0);
        let mut records = 0;
        crate::fed::run(&round_cfg, problem.as_ref(), &cfg.channel(0), 3, 1, false, &mut |_| {
            records += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(records, 6);
    }

    #[test]
    fn problem_build_roundtrip() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let problem = cfg.problem.build().unwrap();
        assert_eq!(problem.n_clients(), 2);
        let quad = r#"
            [problem]
            kind = "matrix_quadratic"
            clients = 4
            d1 = 5
            d2 = 3

            [round]
            algorithm = "fed_muon"
            n = 4
            s = 2

            [run]
            rounds = 10
        "#;
        let cfg = ExperimentConfig::from_toml(quad).unwrap();
        let problem = cfg.problem.build().unwrap();
        assert_eq!(problem.layers()[0].rows, 5);
    }
}
