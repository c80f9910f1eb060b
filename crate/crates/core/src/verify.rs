//! Runtime invariant suites behind the `verify` subcommand: every module's
//! checked properties, run with fixed seeds, reported as one pass/fail line
//! each.

use crate::config::ExperimentConfig;
use crate::fed::{self, Algorithm, AuxOptimizer, MomentumInit, RoundConfig, Simulator};
use crate::lmo::{self, EffectiveP, LmoMode, NsConfig};
use crate::mat::{self, norm, Mat, NormKind};
use crate::optim;
use crate::problems::{
    self, dirichlet_partition, CounterexampleProblem, MatrixQuadraticProblem, NoiseChannel,
    Problem, QuadraticConfig, ToyClassificationProblem, ToyConfig,
};
use crate::rng::{gaussian_mat, stream_rng};
use rand::Rng;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult { name: name.to_string(), passed, detail: detail.into() }
    }
}

fn check(name: &str, run: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match run() {
        Ok(detail) => CheckResult::new(name, true, detail),
        Err(detail) => CheckResult::new(name, false, detail),
    }
}

/// The whole suite, in module order.
pub fn run_all() -> Vec<CheckResult> {
    let mut results = vec![
        svd_factorization(),
        norm_sandwich(),
        schatten_monotonicity(),
        holder_pairing(),
        lmo_pairing_identity(),
        lmo_feasibility(),
        ns_sandwich(),
        effective_p_properties(),
        polynomial_bound_check(&NsConfig::analyzed(1), 100_000),
        ns_approaches_exact_oracle(),
        momentum_convexity(),
        corrected_direction_feasibility(),
        stepsize_scaling(),
        run_determinism(),
        momentum_persistence(),
        control_variate_mean(),
        per_step_movement(),
        localmuon_stagnation(),
        scaffold_equivalence(),
        gradient_finite_differences(),
        noise_channel_moments(),
        dirichlet_behaviour(),
        trace_roundtrip(),
        emitted_norm_ordering(),
    ];
    for r in &mut results {
        r.name = r.name.to_string();
    }
    results
}

fn svd_factorization() -> CheckResult {
    check("matlin/svd_factorization", || {
        let mut rng = stream_rng(1001, &[0]);
        let mut worst: f64 = 0.0;
        for (rows, cols) in [(6, 4), (4, 6), (5, 5), (1, 3), (8, 2)] {
            let a = gaussian_mat(&mut rng, rows, cols, 1.0);
            let f = mat::svd(&a).map_err(|e| e.to_string())?;
            worst = worst.max((&f.reconstruct() - &a).frobenius() / a.frobenius().max(1.0));
            let utu = f.u.transpose().matmul(&f.u);
            for i in 0..utu.rows() {
                for j in 0..utu.cols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((utu[(i, j)] - want).abs());
                }
            }
            for w in f.s.windows(2) {
                if w[0] < w[1] {
                    return Err("singular values not sorted".into());
                }
            }
        }
        if worst <= 1e-8 {
            Ok(format!("max residual {worst:.2e}"))
        } else {
            Err(format!("residual {worst:.2e} above 1e-8"))
        }
    })
}

fn norm_sandwich() -> CheckResult {
    check("matlin/frobenius_trace_sandwich", || {
        let mut rng = stream_rng(1002, &[0]);
        for _ in 0..200 {
            let rows = 1 + rng.gen_range(0..7);
            let cols = 1 + rng.gen_range(0..7);
            let a = gaussian_mat(&mut rng, rows, cols, 1.0);
            let f = norm(&a, NormKind::Frobenius).map_err(|e| e.to_string())?;
            let t = norm(&a, NormKind::Trace).map_err(|e| e.to_string())?;
            let cap = (rows.min(cols) as f64).sqrt() * f;
            if f > t + 1e-10 || t > cap + 1e-10 {
                return Err(format!("violated for {rows}x{cols}: F={f} trace={t} cap={cap}"));
            }
        }
        Ok("200 random matrices".into())
    })
}

fn schatten_monotonicity() -> CheckResult {
    check("matlin/schatten_monotone_in_p", || {
        let mut rng = stream_rng(1003, &[0]);
        for _ in 0..100 {
            let a = gaussian_mat(&mut rng, 5, 4, 1.0);
            let mut prev = f64::INFINITY;
            for p in [1.0, 1.25, 1.5, 2.0, 3.0, 8.0] {
                let v = norm(&a, NormKind::Schatten(p)).map_err(|e| e.to_string())?;
                if v > prev + 1e-10 {
                    return Err(format!("p={p}: {v} > {prev}"));
                }
                prev = v;
            }
        }
        Ok("100 random matrices".into())
    })
}

fn holder_pairing() -> CheckResult {
    check("matlin/holder_inequality", || {
        let mut rng = stream_rng(1004, &[0]);
        for _ in 0..100 {
            let a = gaussian_mat(&mut rng, 4, 5, 1.0);
            let b = gaussian_mat(&mut rng, 4, 5, 1.0);
            for kind in [NormKind::Frobenius, NormKind::Spectral, NormKind::Trace] {
                let lhs = mat::inner(&a, &b).map_err(|e| e.to_string())?;
                let rhs = norm(&a, kind).map_err(|e| e.to_string())?
                    * norm(&b, mat::dual_norm_kind(kind).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?;
                if lhs > rhs + 1e-8 {
                    return Err(format!("{kind}: {lhs} > {rhs}"));
                }
            }
        }
        Ok("100 random pairs, three geometries".into())
    })
}

fn lmo_pairing_identity() -> CheckResult {
    check("lmo/spectral_pairing_identity", || {
        let mut rng = stream_rng(1005, &[0]);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let rows = 1 + rng.gen_range(0..6);
            let cols = 1 + rng.gen_range(0..6);
            let g = gaussian_mat(&mut rng, rows, cols, 1.0);
            let d = lmo::lmo_exact(&g, NormKind::Spectral).map_err(|e| e.to_string())?;
            let pair = mat::inner(&g, &d).map_err(|e| e.to_string())?;
            let trace = norm(&g, NormKind::Trace).map_err(|e| e.to_string())?;
            worst = worst.max((pair + trace).abs() / trace.max(1.0));
        }
        if worst <= 1e-8 {
            Ok(format!("max pairing gap {worst:.2e}"))
        } else {
            Err(format!("pairing gap {worst:.2e}"))
        }
    })
}

fn lmo_feasibility() -> CheckResult {
    check("lmo/unit_ball_feasibility", || {
        let mut rng = stream_rng(1006, &[0]);
        for _ in 0..50 {
            let g = gaussian_mat(&mut rng, 6, 4, 1.0);
            for kind in [NormKind::Frobenius, NormKind::Spectral] {
                let d = lmo::lmo_exact(&g, kind).map_err(|e| e.to_string())?;
                let n = norm(&d, kind).map_err(|e| e.to_string())?;
                if n > 1.0 + 1e-8 {
                    return Err(format!("exact {kind}: norm {n}"));
                }
            }
            for t in 0..=12 {
                let d = lmo::lmo_newton_schulz(&g, &NsConfig::analyzed(t));
                let n = norm(&d, NormKind::Spectral).map_err(|e| e.to_string())?;
                if n > 1.0 + 1e-6 {
                    return Err(format!("newton-schulz t={t}: spectral norm {n}"));
                }
            }
        }
        Ok("exact + newton-schulz, T in 0..=12".into())
    })
}

fn ns_sandwich() -> CheckResult {
    check("lmo/newton_schulz_sandwich", || {
        let mut rng = stream_rng(1007, &[0]);
        for t in [0usize, 1, 3, 6, 12] {
            for _ in 0..40 {
                let g = gaussian_mat(&mut rng, 5, 7, 1.0);
                let d = lmo::lmo_newton_schulz(&g, &NsConfig::analyzed(t));
                let pair = mat::inner(&g, &d).map_err(|e| e.to_string())?;
                let trace = norm(&g, NormKind::Trace).map_err(|e| e.to_string())?;
                let s = mat::svd(&g).map_err(|e| e.to_string())?.s;
                let p = lmo::effective_p(&s, t).map_err(|e| e.to_string())?.p;
                let schatten = norm(&g, NormKind::Schatten(p)).map_err(|e| e.to_string())?;
                if pair < -trace - 1e-8 || pair > -schatten + 1e-8 {
                    return Err(format!(
                        "t={t}: pairing {pair} outside [-{trace}, -{schatten}]"
                    ));
                }
            }
        }
        Ok("T in {0,1,3,6,12}, 40 matrices each".into())
    })
}

fn effective_p_properties() -> CheckResult {
    check("lmo/effective_p_formula", || {
        for kappa in [0.03, 0.2, 0.5, 0.9, 0.999] {
            if EffectiveP::from_kappa(kappa, 0).p != 2.0 {
                return Err(format!("p(T=0) != 2 at kappa={kappa}"));
            }
            let mut prev = f64::INFINITY;
            for t in 0..=14 {
                let p = EffectiveP::from_kappa(kappa, t).p;
                if !(1.0..=2.0).contains(&p) || p > prev + 1e-15 {
                    return Err(format!("kappa={kappa} t={t}: p={p} prev={prev}"));
                }
                prev = p;
            }
        }
        let tail = EffectiveP::from_kappa(0.5, 10).p;
        if (tail - 1.0).abs() > 1e-6 {
            return Err(format!("p(0.5, 10) = {tail}, expected ~1"));
        }
        Ok("exactness at T=0, monotone decay, deep-T limit".into())
    })
}

/// The scalar polynomial bound `0 <= 1 - phi(x) <= (1 - x)^1.5` on a dense
/// grid. Parameterized so a perturbed coefficient triple demonstrably fails.
pub fn polynomial_bound_check(ns: &NsConfig, points: usize) -> CheckResult {
    check("lmo/polynomial_bound", || {
        for i in 0..=points {
            let x = i as f64 / points as f64;
            let gap = 1.0 - ns.phi(x);
            let cap = (1.0 - x).powf(1.5);
            if gap < -1e-12 || gap > cap + 1e-12 {
                return Err(format!("x={x}: 1-phi={gap}, cap={cap}"));
            }
        }
        Ok(format!("{points} grid points, coefficients ({}, {}, {})", ns.a, ns.b, ns.c))
    })
}

fn ns_approaches_exact_oracle() -> CheckResult {
    check("lmo/newton_schulz_convergence", || {
        let mut rng = stream_rng(1008, &[0]);
        for _ in 0..10 {
            let raw = gaussian_mat(&mut rng, 6, 4, 1.0);
            let f = mat::svd(&raw).map_err(|e| e.to_string())?;
            let k = f.s.len();
            let mut vt = f.vt.clone();
            for i in 0..k {
                let target = 0.3 + 0.7 * i as f64 / (k - 1).max(1) as f64;
                for j in 0..vt.cols() {
                    vt[(i, j)] *= target;
                }
            }
            let g = f.u.matmul(&vt);
            let exact = lmo::lmo_exact(&g, NormKind::Spectral).map_err(|e| e.to_string())?;
            let approx = lmo::lmo_newton_schulz(&g, &NsConfig::analyzed(12));
            let gap = (&exact - &approx).frobenius();
            if gap >= 1e-3 {
                return Err(format!("gap {gap} at T=12"));
            }
        }
        Ok("well-conditioned inputs, T=12, gap < 1e-3".into())
    })
}

fn momentum_convexity() -> CheckResult {
    check("optim/momentum_stays_in_gradient_ball", || {
        let mut rng = stream_rng(1009, &[0]);
        let bound = 1.5;
        let mut state = optim::MomentumState::zeros(4, 4, 0.3);
        for _ in 0..100 {
            let mut g = gaussian_mat(&mut rng, 4, 4, 1.0);
            let f = g.frobenius();
            if f > bound {
                g = g.scale(bound / f);
            }
            state = optim::momentum_update(&state, &g).map_err(|e| e.to_string())?;
            if state.m.frobenius() > bound + 1e-10 {
                return Err(format!("momentum norm {}", state.m.frobenius()));
            }
        }
        Ok("100 steps, bound preserved".into())
    })
}

fn corrected_direction_feasibility() -> CheckResult {
    check("optim/corrected_direction_in_unit_ball", || {
        let mut rng = stream_rng(1010, &[0]);
        for _ in 0..30 {
            let m = gaussian_mat(&mut rng, 5, 4, 1.0);
            let cl = gaussian_mat(&mut rng, 5, 4, 1.0);
            let cg = gaussian_mat(&mut rng, 5, 4, 1.0);
            for mode in [LmoMode::Exact, LmoMode::NewtonSchulz(NsConfig::analyzed(5))] {
                let d = optim::muon_corrected_direction(&m, &cl, &cg, NormKind::Spectral, &mode)
                    .map_err(|e| e.to_string())?;
                let n = norm(&d, NormKind::Spectral).map_err(|e| e.to_string())?;
                if n > 1.0 + 1e-6 {
                    return Err(format!("{mode:?}: spectral norm {n}"));
                }
            }
        }
        Ok("exact and newton-schulz modes".into())
    })
}

fn stepsize_scaling() -> CheckResult {
    check("optim/per_layer_stepsize", || {
        let m = optim::per_layer_stepsize(0.001, &optim::LayerSpec::matrix(64, 256));
        let v = optim::per_layer_stepsize(0.1, &optim::LayerSpec::vector(32));
        if (m - 0.016).abs() > 1e-18 || v != 0.1 {
            return Err(format!("matrix {m}, vector {v}"));
        }
        Ok("sqrt(max dim) on matrices, identity elsewhere".into())
    })
}

fn quadratic_cfg(algorithm: Algorithm, lmo: LmoMode, seed: u64) -> RoundConfig {
    RoundConfig {
        n_clients: 8,
        sampled: 4,
        local_steps: 5,
        eta: 0.01,
        eta_aux: 0.01,
        alpha: 0.5,
        algorithm,
        norm: NormKind::Spectral,
        lmo,
        scale_stepsize: false,
        sgd_momentum: 0.9,
        aux_optimizer: AuxOptimizer::SgdMomentum,
        momentum_init: MomentumInit::Zero,
        seed,
    }
}

fn quad_problem(seed: u64) -> Result<MatrixQuadraticProblem, String> {
    MatrixQuadraticProblem::generate(&QuadraticConfig {
        clients: 8,
        obs: 10,
        d1: 6,
        d2: 4,
        rank: None,
        heterogeneity: 1.0,
        seed,
    })
    .map_err(|e| e.to_string())
}

fn run_determinism() -> CheckResult {
    check("fedproto/rerun_determinism", || {
        let problem = quad_problem(41)?;
        let cfg = quadratic_cfg(Algorithm::FedMuon, LmoMode::NewtonSchulz(NsConfig::analyzed(2)), 5);
        let channel = NoiseChannel { sigma: 0.1, seed: 5 };
        let collect = || -> Result<Vec<String>, String> {
            let mut lines = Vec::new();
            fed::run(&cfg, &problem, &channel, 10, 1, false, &mut |t| {
                lines.push(t.to_json_line()?);
                Ok(())
            })
            .map_err(|e| e.to_string())?;
            Ok(lines)
        };
        if collect()? != collect()? {
            return Err("two identical runs emitted different traces".into());
        }
        Ok("10 noisy rounds, bit-identical records".into())
    })
}

fn momentum_persistence() -> CheckResult {
    check("fedproto/unsampled_state_untouched", || {
        let problem = quad_problem(43)?;
        let cfg = quadratic_cfg(Algorithm::FedMuon, LmoMode::Exact, 9);
        let channel = NoiseChannel { sigma: 0.1, seed: 9 };
        let mut sim = Simulator::new(cfg.clone(), &problem, channel).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let before: Vec<_> =
                sim.clients().iter().map(|c| (c.m[0].clone(), c.c[0].clone())).collect();
            let round = sim.server().round;
            let mut rng = stream_rng(cfg.seed, &[crate::rng::stream::SAMPLING, round]);
            let sampled =
                fed::sample_clients(cfg.n_clients, cfg.sampled, &mut rng).map_err(|e| e.to_string())?;
            sim.step_round().map_err(|e| e.to_string())?;
            for id in 0..cfg.n_clients {
                if !sampled.contains(&id)
                    && (sim.clients()[id].m[0] != before[id].0
                        || sim.clients()[id].c[0] != before[id].1)
                {
                    return Err(format!("client {id} mutated while unsampled"));
                }
            }
        }
        Ok("3 rounds of partial participation".into())
    })
}

fn control_variate_mean() -> CheckResult {
    check("fedproto/global_cv_is_registry_mean", || {
        let problem = quad_problem(47)?;
        let mut cfg = quadratic_cfg(Algorithm::FedMuon, LmoMode::Exact, 3);
        cfg.sampled = 8;
        let channel = NoiseChannel { sigma: 0.05, seed: 3 };
        let mut sim = Simulator::new(cfg, &problem, channel).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            sim.step_round().map_err(|e| e.to_string())?;
            let mut mean = Mat::zeros(6, 4);
            for reg in &sim.server().c_registry {
                mean.axpy(1.0 / 8.0, &reg[0]);
            }
            let gap = (&sim.server().c[0] - &mean).frobenius();
            if gap > 1e-12 {
                return Err(format!("gap {gap}"));
            }
        }
        Ok("full participation, 5 rounds, gap <= 1e-12".into())
    })
}

fn per_step_movement() -> CheckResult {
    check("fedproto/per_step_displacement_bound", || {
        let problem = quad_problem(53)?;
        let cfg = quadratic_cfg(Algorithm::FedMuon, LmoMode::Exact, 11);
        let channel = NoiseChannel { sigma: 0.1, seed: 11 };
        let sim = Simulator::new(cfg.clone(), &problem, channel).map_err(|e| e.to_string())?;
        let out = fed::local_round(
            &cfg,
            &problem,
            &channel,
            &sim.clients()[1],
            &sim.server().x,
            &sim.server().c,
            0,
        )
        .map_err(|e| e.to_string())?;
        let mut prev = Mat::zeros(6, 4);
        for step in &out.step_deltas {
            let moved = norm(&(&step[0] - &prev), cfg.norm).map_err(|e| e.to_string())?;
            if moved > cfg.eta * (1.0 + 1e-9) {
                return Err(format!("moved {moved} above eta {}", cfg.eta));
            }
            prev = step[0].clone();
        }
        Ok("K local steps, movement <= eta".into())
    })
}

fn localmuon_stagnation() -> CheckResult {
    check("fedproto/localmuon_counterexample_stagnation", || {
        let problem = CounterexampleProblem::new(1.0).map_err(|e| e.to_string())?;
        let mut cfg = quadratic_cfg(Algorithm::LocalMuon, LmoMode::Exact, 0);
        cfg.n_clients = 2;
        cfg.sampled = 2;
        cfg.local_steps = 1;
        cfg.norm = NormKind::EuclideanVec;
        cfg.alpha = 0.5;
        let mut sim =
            Simulator::new(cfg, &problem, NoiseChannel::silent()).map_err(|e| e.to_string())?;
        let x0 = sim.server().x[0][(0, 0)].to_bits();
        for _ in 0..1000 {
            sim.step_round().map_err(|e| e.to_string())?;
            if sim.server().x[0][(0, 0)].to_bits() != x0 {
                return Err("parameter drifted".into());
            }
        }
        let g = problem.global_grad(&sim.server().x).map_err(|e| e.to_string())?[0][(0, 0)];
        if g * g != 0.0625 {
            return Err(format!("grad^2 = {}", g * g));
        }
        Ok("1000 rounds bit-identical, grad^2 = a^2/16".into())
    })
}

fn scaffold_equivalence() -> CheckResult {
    check("fedproto/identity_map_recovers_scaffold", || {
        let problem = quad_problem(59)?;
        let mut muon = quadratic_cfg(Algorithm::FedMuon, LmoMode::Off, 13);
        muon.alpha = 1.0;
        let scaffold = quadratic_cfg(Algorithm::Scaffold, LmoMode::Exact, 13);
        let channel = NoiseChannel { sigma: 0.1, seed: 13 };
        let mut a = Simulator::new(muon, &problem, channel).map_err(|e| e.to_string())?;
        let mut b = Simulator::new(scaffold, &problem, channel).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            a.step_round().map_err(|e| e.to_string())?;
            b.step_round().map_err(|e| e.to_string())?;
            worst = worst.max((&a.server().x[0] - &b.server().x[0]).frobenius());
        }
        if worst <= 1e-10 {
            Ok(format!("50 rounds, max gap {worst:.2e}"))
        } else {
            Err(format!("max gap {worst:.2e}"))
        }
    })
}

fn gradient_finite_differences() -> CheckResult {
    check("problems/finite_difference_gradients", || {
        let ce = CounterexampleProblem::new(1.3).map_err(|e| e.to_string())?;
        let quad = quad_problem(61)?;
        let toy = ToyClassificationProblem::generate(&ToyConfig {
            samples: 48,
            features: 5,
            classes: 3,
            hidden: 4,
            clients: 3,
            beta: 0.5,
            seed: 2,
        })
        .map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        let probes: [(&dyn Problem, usize); 3] = [(&ce, 1), (&quad, 2), (&toy, 1)];
        for (problem, client) in probes {
            let mut x = problem.init_params();
            let mut rng = stream_rng(1011, &[0]);
            for layer in &mut x {
                let jitter = gaussian_mat(&mut rng, layer.rows(), layer.cols(), 0.3);
                layer.axpy(1.0, &jitter);
            }
            let gap = problems::finite_difference_gap(problem, client, &x, 1e-5)
                .map_err(|e| e.to_string())?;
            worst = worst.max(gap);
        }
        if worst < 1e-5 {
            Ok(format!("worst relative gap {worst:.2e}"))
        } else {
            Err(format!("gap {worst:.2e} above 1e-5"))
        }
    })
}

fn noise_channel_moments() -> CheckResult {
    check("problems/noise_channel_moments", || {
        let channel = NoiseChannel { sigma: 0.6, seed: 12 };
        let n = 20_000u64;
        let mut mean = Mat::zeros(3, 2);
        let mut sq = 0.0;
        for draw in 0..n {
            let noise = channel.draw(3, 2, &[crate::rng::stream::NOISE, 0, draw, 0, 0]);
            mean.axpy(1.0 / n as f64, &noise);
            sq += noise.frobenius().powi(2) / n as f64;
        }
        let mean_bound = 3.0 * channel.sigma / (n as f64).sqrt();
        let var_bound = 3.0 * channel.sigma.powi(2) * (2.0 / (6.0 * n as f64)).sqrt();
        if mean.frobenius() > mean_bound {
            return Err(format!("mean norm {}", mean.frobenius()));
        }
        if (sq - channel.sigma.powi(2)).abs() > var_bound {
            return Err(format!("second moment {sq}"));
        }
        Ok(format!("{n} draws: mean and variance within 3-sigma bands"))
    })
}

fn dirichlet_behaviour() -> CheckResult {
    check("problems/dirichlet_partition", || {
        let labels: Vec<usize> = (0..800).map(|i| i % 8).collect();
        let even = dirichlet_partition(&labels, 8, 1e6, 1).map_err(|e| e.to_string())?;
        for shard in &even {
            let dev = (shard.len() as f64 - 100.0).abs() / 100.0;
            if dev > 0.05 {
                return Err(format!("beta=1e6 shard size {}", shard.len()));
            }
        }
        let single = dirichlet_partition(&labels, 1, 0.1, 1).map_err(|e| e.to_string())?;
        if single[0].len() != 800 {
            return Err("single client must own the dataset".into());
        }
        let skewed = dirichlet_partition(&labels, 16, 0.1, 1).map_err(|e| e.to_string())?;
        if skewed.iter().any(|s| s.is_empty()) {
            return Err("empty shard after repair".into());
        }
        Ok("uniform limit, single client, repair".into())
    })
}

fn trace_roundtrip() -> CheckResult {
    check("harness/jsonl_roundtrip", || {
        let t = crate::trace::RoundTrace {
            round: 12,
            step: 3,
            loss: 0.1 + 0.2,
            grad_frobenius: 1e-17,
            grad_trace: 2.5,
            grad_spectral: 1.5,
            grad_schatten_phat: 2.0,
            running_kappa: 0.25,
            wallclock_ns: 12345,
            accuracy: Some(0.75),
        };
        let back = crate::trace::RoundTrace::from_json_line(&t.to_json_line().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        if back != t {
            return Err("roundtrip changed a field".into());
        }
        Ok("all fields preserved".into())
    })
}

fn emitted_norm_ordering() -> CheckResult {
    check("harness/emitted_norm_ordering", || {
        let text = r#"
            [problem]
            kind = "matrix_quadratic"
            clients = 4
            d1 = 6
            d2 = 4
            sigma = 0.05

            [round]
            algorithm = "fed_muon"
            n = 4
            s = 2
            k = 3
            eta = 0.01
            alpha = 0.5
            lmo = { kind = "newton_schulz", iters = 2 }
            scale_stepsize = false

            [run]
            rounds = 8
        "#;
        let cfg = ExperimentConfig::from_toml(text).map_err(|e| e.to_string())?;
        let problem = cfg.problem.build().map_err(|e| e.to_string())?;
        let channel = cfg.channel(0);
        let round_cfg = cfg.round.to_round_config(0);
        let min_dim = fed::pooled_min_dim(problem.layers()) as f64;
        let mut count = 0;
        fed::run(&round_cfg, problem.as_ref(), &channel, 8, 1, false, &mut |t| {
            count += 1;
            if t.grad_frobenius > t.grad_trace + 1e-12 {
                return Err(crate::error::Error::Config(format!(
                    "record {count}: frobenius {} > trace {}",
                    t.grad_frobenius, t.grad_trace
                )));
            }
            if t.grad_trace > min_dim.sqrt() * t.grad_frobenius + 1e-12 {
                return Err(crate::error::Error::Config(format!(
                    "record {count}: trace above sqrt(min dim) cap"
                )));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
        Ok(format!("{count} records ordered F <= trace <= sqrt(d) F"))
    })
}
