//! The federated round engine: client sampling, local loops, control-variate
//! bookkeeping, and server aggregation.
//!
//! Clients report their parameter *displacement* rather than raw parameters.
//! The aggregation rule
//!     X(r+1) = (n-S)/n X(r) + 1/n sum_i X_i(r,K)
//! is algebraically X(r) + 1/n sum_i delta_i, and the displacement form is
//! what makes exactly-cancelling client updates leave the server parameter
//! bit-identical, which the stagnation construction relies on.
//!
//! Every stochastic draw is keyed by (seed, client, round, step), so local
//! loops can run on any number of threads with bit-identical results;
//! aggregation always sums in ascending client-id order.

use crate::error::{Error, Result};
use crate::lmo::{lmo_exact, lmo_newton_schulz, EffectiveP, LmoMode};
use crate::mat::{self, Mat, NormKind};
use crate::optim::{per_layer_stepsize, LayerRole, LayerSpec};
use crate::problems::{stoch_grad, NoiseChannel, Problem};
use crate::rng::{self, stream};
use crate::trace::RoundTrace;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    FedMuon,
    LocalMuon,
    FedAvg,
    Scaffold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumInit {
    Zero,
    /// One stochastic gradient at the initial parameters.
    StochGrad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxOptimizer {
    SgdMomentum,
    Adam,
}

/// Static description of one federated run.
#[derive(Clone, Debug)]
pub struct RoundConfig {
    pub n_clients: usize,
    /// Clients sampled per round (S).
    pub sampled: usize,
    /// Local steps per sampled client (K).
    pub local_steps: usize,
    /// Stepsize of the oracle-driven layers (or the only stepsize for
    /// FedAvg/SCAFFOLD).
    pub eta: f64,
    /// Stepsize for vector/scalar layers that fall back to SGD/Adam under
    /// the oracle methods.
    pub eta_aux: f64,
    /// Momentum mixing weight in (0, 1].
    pub alpha: f64,
    pub algorithm: Algorithm,
    pub norm: NormKind,
    pub lmo: LmoMode,
    /// Scale matrix-layer stepsizes by sqrt(max(rows, cols)).
    pub scale_stepsize: bool,
    /// Heavy-ball coefficient for SGD-routed layers and FedAvg.
    pub sgd_momentum: f64,
    pub aux_optimizer: AuxOptimizer,
    pub momentum_init: MomentumInit,
    pub seed: u64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            n_clients: 16,
            sampled: 8,
            local_steps: 5,
            eta: 0.001,
            eta_aux: 0.01,
            alpha: 0.1,
            algorithm: Algorithm::FedMuon,
            norm: NormKind::Spectral,
            lmo: LmoMode::NewtonSchulz(crate::lmo::NsConfig::default()),
            scale_stepsize: true,
            sgd_momentum: 0.9,
            aux_optimizer: AuxOptimizer::SgdMomentum,
            momentum_init: MomentumInit::Zero,
            seed: 0,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::Config("n_clients must be at least 1".into()));
        }
        if self.sampled == 0 || self.sampled > self.n_clients {
            return Err(Error::Config(format!(
                "sampled clients must satisfy 1 <= S <= n, got S={} n={}",
                self.sampled, self.n_clients
            )));
        }
        if self.local_steps == 0 {
            return Err(Error::Config("local_steps must be at least 1".into()));
        }
        if !(self.eta > 0.0) || !(self.eta_aux > 0.0) {
            return Err(Error::Config("stepsizes must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.sgd_momentum) {
            return Err(Error::Config("sgd_momentum must lie in [0, 1)".into()));
        }
        match self.norm {
            NormKind::Trace | NormKind::Schatten(_) => {
                return Err(Error::Config(format!(
                    "no oracle is available over the {} ball",
                    self.norm
                )));
            }
            _ => {}
        }
        if matches!(self.lmo, LmoMode::NewtonSchulz(_)) && self.norm != NormKind::Spectral {
            return Err(Error::Config(
                "the newton_schulz oracle only solves the spectral geometry".into(),
            ));
        }
        Ok(())
    }
}

/// Per-client state persisted across rounds. Unsampled clients keep their
/// momentum and control variates untouched.
#[derive(Clone, Debug)]
pub struct ClientState {
    pub id: usize,
    pub x: Vec<Mat>,
    pub m: Vec<Mat>,
    pub c: Vec<Mat>,
    adam_v: Vec<Mat>,
    adam_t: u64,
}

/// Server-side state: the global parameter, the global control variate, and
/// a registry of the last control variate received from each client.
#[derive(Clone, Debug)]
pub struct ServerState {
    pub x: Vec<Mat>,
    pub c: Vec<Mat>,
    pub c_registry: Vec<Vec<Mat>>,
    pub round: u64,
}

/// What a sampled client sends back: its displacement over the round and,
/// for control-variate methods, its refreshed control variate.
#[derive(Clone, Debug)]
pub struct ClientUpdate {
    pub id: usize,
    pub delta: Vec<Mat>,
    pub c_new: Option<Vec<Mat>>,
}

/// Uniform size-S subset of {0..n-1} without replacement (partial
/// Fisher-Yates), returned in ascending order.
pub fn sample_clients<R: Rng>(n: usize, s: usize, rng: &mut R) -> Result<Vec<usize>> {
    if s == 0 || s > n {
        return Err(Error::Config(format!("cannot sample {s} of {n} clients")));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = i + rng.gen_range(0..n - i);
        ids.swap(i, j);
    }
    let mut picked = ids[..s].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// How one layer is driven during local steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    /// Momentum + (corrected) oracle direction.
    Oracle,
    /// Momentum SGD or Adam fallback at `eta_aux`.
    Aux,
    /// Raw (FedAvg / SCAFFOLD) local rule at `eta`.
    Plain,
}

/// Matrix layers go through the configured oracle; vector and scalar layers
/// follow it only when the run's geometry is itself the euclidean one,
/// otherwise they fall back to the auxiliary optimizer.
fn layer_route(cfg: &RoundConfig, spec: &LayerSpec) -> Route {
    match cfg.algorithm {
        Algorithm::FedAvg | Algorithm::Scaffold => Route::Plain,
        Algorithm::FedMuon | Algorithm::LocalMuon => match spec.role {
            LayerRole::Matrix => Route::Oracle,
            LayerRole::Vector | LayerRole::Scalar => {
                if cfg.norm == NormKind::EuclideanVec {
                    Route::Oracle
                } else {
                    Route::Aux
                }
            }
        },
    }
}

fn oracle_direction(g: &Mat, kind: NormKind, mode: &LmoMode) -> Result<Mat> {
    match mode {
        LmoMode::Exact => lmo_exact(g, kind),
        LmoMode::NewtonSchulz(ns) => Ok(lmo_newton_schulz(g, ns)),
        LmoMode::Off => Ok(-g),
    }
}

/// Result of one client's K local steps.
#[derive(Clone, Debug)]
pub struct LocalOutcome {
    pub id: usize,
    /// Cumulative displacement after local steps 1..=K, per layer.
    pub step_deltas: Vec<Vec<Mat>>,
    pub m: Vec<Mat>,
    pub c_new: Option<Vec<Mat>>,
    /// Smallest kappa across this round's matrix oracle inputs (1.0 if none).
    pub kappa_min: f64,
    adam_v: Vec<Mat>,
    adam_t: u64,
}

impl LocalOutcome {
    pub fn final_delta(&self) -> &[Mat] {
        self.step_deltas.last().expect("K >= 1")
    }

    /// The client parameter after the round, X(r) + delta.
    pub fn x_final(&self, x_global: &[Mat]) -> Vec<Mat> {
        x_global
            .iter()
            .zip(self.final_delta())
            .map(|(x, d)| {
                let mut out = x.clone();
                out.axpy(1.0, d);
                out
            })
            .collect()
    }
}

/// K local steps of the configured algorithm, in displacement form.
///
/// The gradient at step k is evaluated at X(r) + delta(k); the momentum
/// carried in from the previous round keeps accumulating across rounds.
pub fn local_round(
    cfg: &RoundConfig,
    problem: &dyn Problem,
    channel: &NoiseChannel,
    client: &ClientState,
    x_global: &[Mat],
    c_global: &[Mat],
    round: u64,
) -> Result<LocalOutcome> {
    let layers = problem.layers();
    let mut delta: Vec<Mat> =
        layers.iter().map(|l| Mat::zeros(l.rows, l.cols)).collect();
    let mut m = client.m.clone();
    let mut adam_v = client.adam_v.clone();
    let mut adam_t = client.adam_t;
    let mut last_grad: Vec<Mat> = Vec::new();
    let mut step_deltas = Vec::with_capacity(cfg.local_steps);
    let mut kappa_min = 1.0f64;

    for k in 0..cfg.local_steps {
        let x_eval: Vec<Mat> = x_global
            .iter()
            .zip(&delta)
            .map(|(x, d)| {
                let mut out = x.clone();
                out.axpy(1.0, d);
                out
            })
            .collect();
        let grads = stoch_grad(problem, client.id, &x_eval, channel, round, k as u64)?;

        if matches!(cfg.algorithm, Algorithm::Scaffold) && k + 1 == cfg.local_steps {
            last_grad = grads.clone();
        }
        if matches!(cfg.aux_optimizer, AuxOptimizer::Adam)
            && layers.iter().any(|l| layer_route(cfg, l) == Route::Aux)
        {
            adam_t += 1;
        }

        for (layer, spec) in layers.iter().enumerate() {
            let g = &grads[layer];
            match layer_route(cfg, spec) {
                Route::Oracle => {
                    // M <- (1 - alpha) M + alpha grad
                    let mut next_m = m[layer].scale(1.0 - cfg.alpha);
                    next_m.axpy(cfg.alpha, g);
                    m[layer] = next_m;

                    let corrected = match cfg.algorithm {
                        Algorithm::FedMuon => {
                            let mut out = &m[layer] - &client.c[layer];
                            out.axpy(1.0, &c_global[layer]);
                            out
                        }
                        _ => m[layer].clone(),
                    };
                    if spec.role == LayerRole::Matrix && !corrected.is_zero() {
                        if let Ok(f) = mat::svd(&corrected) {
                            let nz = f.nonzero_singular_values();
                            if !nz.is_empty() {
                                let sum_sq: f64 = nz.iter().map(|s| s * s).sum();
                                let kmin = nz.iter().cloned().fold(f64::INFINITY, f64::min);
                                kappa_min = kappa_min.min(kmin / sum_sq.sqrt());
                            }
                        }
                    }
                    let dir = oracle_direction(&corrected, cfg.norm, &cfg.lmo)?;
                    let step = if cfg.scale_stepsize {
                        per_layer_stepsize(cfg.eta, spec)
                    } else {
                        cfg.eta
                    };
                    delta[layer].axpy(step, &dir);
                }
                Route::Aux => match cfg.aux_optimizer {
                    AuxOptimizer::SgdMomentum => {
                        let mut buf = m[layer].scale(cfg.sgd_momentum);
                        buf.axpy(1.0, g);
                        delta[layer].axpy(-cfg.eta_aux, &buf);
                        m[layer] = buf;
                    }
                    AuxOptimizer::Adam => {
                        let beta1 = 0.9;
                        let beta2 = 0.999;
                        let eps = 1e-8;
                        let mut m1 = m[layer].scale(beta1);
                        m1.axpy(1.0 - beta1, g);
                        let mut v = adam_v[layer].scale(beta2);
                        for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
                            *vi += (1.0 - beta2) * gi * gi;
                        }
                        let bc1 = 1.0 - beta1.powi(adam_t as i32);
                        let bc2 = 1.0 - beta2.powi(adam_t as i32);
                        let mut update = Mat::zeros(spec.rows, spec.cols);
                        for ((ui, mi), vi) in
                            update.data_mut().iter_mut().zip(m1.data()).zip(v.data())
                        {
                            *ui = (mi / bc1) / ((vi / bc2).sqrt() + eps);
                        }
                        delta[layer].axpy(-cfg.eta_aux, &update);
                        m[layer] = m1;
                        adam_v[layer] = v;
                    }
                },
                Route::Plain => match cfg.algorithm {
                    Algorithm::FedAvg => {
                        let mut buf = m[layer].scale(cfg.sgd_momentum);
                        buf.axpy(1.0, g);
                        delta[layer].axpy(-cfg.eta, &buf);
                        m[layer] = buf;
                    }
                    Algorithm::Scaffold => {
                        let mut corrected = g - &client.c[layer];
                        corrected.axpy(1.0, &c_global[layer]);
                        delta[layer].axpy(-cfg.eta, &corrected);
                    }
                    _ => unreachable!("plain route only serves fedavg/scaffold"),
                },
            }
        }
        step_deltas.push(delta.clone());
    }

    let c_new = match cfg.algorithm {
        Algorithm::FedAvg => None,
        // C_i(r+1) <- M_i(r, K); only oracle-routed layers carry a live
        // control variate, the rest keep their previous (zero) entry.
        Algorithm::FedMuon | Algorithm::LocalMuon => Some(
            layers
                .iter()
                .enumerate()
                .map(|(l, spec)| match layer_route(cfg, spec) {
                    Route::Oracle => m[l].clone(),
                    _ => client.c[l].clone(),
                })
                .collect(),
        ),
        // the control variate is the last local stochastic gradient, which
        // matches the momentum-free specialization above
        Algorithm::Scaffold => Some(last_grad),
    };

    Ok(LocalOutcome { id: client.id, step_deltas, m, c_new, kappa_min, adam_v, adam_t })
}

/// Fold sampled-client updates into the server state:
/// `x += 1/n sum delta_i` and `c += 1/n sum (c_i_new - c_i_old)`.
pub fn server_aggregate(
    server: &mut ServerState,
    updates: &[ClientUpdate],
    cfg: &RoundConfig,
) -> Result<()> {
    let mut order: Vec<usize> = (0..updates.len()).collect();
    order.sort_by_key(|&i| updates[i].id);
    for w in order.windows(2) {
        if updates[w[0]].id == updates[w[1]].id {
            return Err(Error::Protocol(format!(
                "duplicate update from client {}",
                updates[w[0]].id
            )));
        }
    }
    let inv_n = 1.0 / cfg.n_clients as f64;
    for &i in &order {
        let update = &updates[i];
        if update.id >= cfg.n_clients {
            return Err(Error::UnknownClient(update.id));
        }
        if update.delta.len() != server.x.len() {
            return Err(Error::Dimension("update layer count mismatch".into()));
        }
        for (x, d) in server.x.iter_mut().zip(&update.delta) {
            x.axpy(inv_n, d);
        }
        if let Some(c_new) = &update.c_new {
            for (layer, c) in c_new.iter().enumerate() {
                let mut diff = c.clone();
                diff.axpy(-1.0, &server.c_registry[update.id][layer]);
                server.c[layer].axpy(inv_n, &diff);
                server.c_registry[update.id][layer] = c.clone();
            }
        }
    }
    server.round += 1;
    Ok(())
}

/// Virtual average of the client parameters at one local step.
#[derive(Clone, Debug)]
pub struct StepSnapshot {
    pub round: u64,
    pub step: u64,
    pub virtual_avg: Vec<Mat>,
}

/// In-memory federated simulation, advanced one round at a time.
pub struct Simulator<'a> {
    cfg: RoundConfig,
    problem: &'a dyn Problem,
    channel: NoiseChannel,
    server: ServerState,
    clients: Vec<ClientState>,
    running_kappa: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(
        cfg: RoundConfig,
        problem: &'a dyn Problem,
        channel: NoiseChannel,
    ) -> Result<Self> {
        cfg.validate()?;
        if problem.n_clients() != cfg.n_clients {
            return Err(Error::Config(format!(
                "config expects {} clients but the problem defines {}",
                cfg.n_clients,
                problem.n_clients()
            )));
        }
        let x0 = problem.init_params();
        let layers = problem.layers();
        let zeros: Vec<Mat> = layers.iter().map(|l| Mat::zeros(l.rows, l.cols)).collect();

        let mut clients = Vec::with_capacity(cfg.n_clients);
        for id in 0..cfg.n_clients {
            let m = match cfg.momentum_init {
                MomentumInit::Zero => zeros.clone(),
                MomentumInit::StochGrad => {
                    let mut g = problem.grad(id, &x0)?;
                    if channel.sigma > 0.0 {
                        for (layer, gm) in g.iter_mut().enumerate() {
                            let noise = channel.draw(
                                gm.rows(),
                                gm.cols(),
                                &[stream::MOMENTUM_INIT, id as u64, layer as u64],
                            );
                            gm.axpy(1.0, &noise);
                        }
                    }
                    g
                }
            };
            // C_i(0) := M_i(0,0)
            clients.push(ClientState {
                id,
                x: x0.clone(),
                c: m.clone(),
                m,
                adam_v: zeros.clone(),
                adam_t: 0,
            });
        }
        // C(0) := mean of the client control variates
        let mut c = zeros.clone();
        for client in &clients {
            for (acc, ci) in c.iter_mut().zip(&client.c) {
                acc.axpy(1.0 / cfg.n_clients as f64, ci);
            }
        }
        let registry = clients.iter().map(|cl| cl.c.clone()).collect();
        Ok(Simulator {
            cfg,
            problem,
            channel,
            server: ServerState { x: x0, c, c_registry: registry, round: 0 },
            clients,
            running_kappa: 1.0,
        })
    }

    pub fn cfg(&self) -> &RoundConfig {
        &self.cfg
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn running_kappa(&self) -> f64 {
        self.running_kappa
    }

    /// Effective Schatten exponent for reporting: the oracle mode decides
    /// between the exact pairing (trace norm, p = 1), the normalized-gradient
    /// regime (p = 2), and the Newton-Schulz interpolation.
    pub fn effective_exponent(&self) -> f64 {
        match (&self.cfg.algorithm, &self.cfg.lmo) {
            (Algorithm::FedMuon | Algorithm::LocalMuon, LmoMode::Exact) => 1.0,
            (Algorithm::FedMuon | Algorithm::LocalMuon, LmoMode::NewtonSchulz(ns)) => {
                EffectiveP::from_kappa(self.running_kappa, ns.iters).p
            }
            _ => 2.0,
        }
    }

    /// Run one round: sample, run local loops (possibly in parallel),
    /// aggregate. Returns the virtual average at each local step, with step 0
    /// being the pre-round server parameter.
    pub fn step_round(&mut self) -> Result<Vec<StepSnapshot>> {
        let round = self.server.round;
        let mut rng = rng::stream_rng(self.cfg.seed, &[stream::SAMPLING, round]);
        let ids = sample_clients(self.cfg.n_clients, self.cfg.sampled, &mut rng)?;

        let one_client = |&id: &usize| {
            local_round(
                &self.cfg,
                self.problem,
                &self.channel,
                &self.clients[id],
                &self.server.x,
                &self.server.c,
                round,
            )
        };
        // parallelism pays only when the local loops carry real work; tiny
        // problems run inline (the results are identical either way)
        let entries: usize = self.problem.layers().iter().map(|l| l.rows * l.cols).sum();
        let outcomes: Vec<LocalOutcome> = if ids.len() >= 2 && entries * self.cfg.local_steps >= 200
        {
            ids.par_iter().map(one_client).collect::<Result<_>>()?
        } else {
            ids.iter().map(one_client).collect::<Result<_>>()?
        };

        // Virtual averages: step 0 is X(r) itself, step k the state after k
        // local steps on every sampled client.
        let inv_n = 1.0 / self.cfg.n_clients as f64;
        let mut snapshots = Vec::with_capacity(self.cfg.local_steps);
        snapshots.push(StepSnapshot { round, step: 0, virtual_avg: self.server.x.clone() });
        for k in 1..self.cfg.local_steps {
            let mut avg = self.server.x.clone();
            for outcome in &outcomes {
                for (a, d) in avg.iter_mut().zip(&outcome.step_deltas[k - 1]) {
                    a.axpy(inv_n, d);
                }
            }
            snapshots.push(StepSnapshot { round, step: k as u64, virtual_avg: avg });
        }

        let updates: Vec<ClientUpdate> = outcomes
            .iter()
            .map(|o| ClientUpdate {
                id: o.id,
                delta: o.final_delta().to_vec(),
                c_new: o.c_new.clone(),
            })
            .collect();

        let x_before = self.server.x.clone();
        server_aggregate(&mut self.server, &updates, &self.cfg)?;

        for outcome in outcomes {
            self.running_kappa = self.running_kappa.min(outcome.kappa_min);
            let client = &mut self.clients[outcome.id];
            client.x = outcome.x_final(&x_before);
            client.m = outcome.m;
            client.adam_v = outcome.adam_v;
            client.adam_t = outcome.adam_t;
            if let Some(c_new) = outcome.c_new {
                client.c = c_new;
            }
        }
        Ok(snapshots)
    }
}

/// Pooled singular values of a layered gradient, i.e. the spectrum of the
/// block-diagonal matrix formed by the layers. Vector and scalar layers
/// contribute their euclidean norm as a single singular value.
pub fn pooled_singular_values(grads: &[Mat], layers: &[LayerSpec]) -> Result<Vec<f64>> {
    let mut pooled = Vec::new();
    for (g, spec) in grads.iter().zip(layers) {
        match spec.role {
            LayerRole::Matrix => pooled.extend(mat::svd(g)?.s),
            LayerRole::Vector | LayerRole::Scalar => pooled.push(g.frobenius()),
        }
    }
    pooled.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(pooled)
}

/// Summed min-dimension of the layers, the constant in the pooled
/// trace-vs-frobenius inequality.
pub fn pooled_min_dim(layers: &[LayerSpec]) -> usize {
    layers
        .iter()
        .map(|l| match l.role {
            LayerRole::Matrix => l.rows.min(l.cols),
            LayerRole::Vector | LayerRole::Scalar => 1,
        })
        .sum()
}

/// Drive a simulation for `rounds` rounds, emitting one trace record per
/// selected (round, local step) into `sink`.
///
/// Records are selected by `metric_every` over the flat step index
/// `round * K + step`. A non-finite loss or parameter aborts the run with
/// the offending coordinates; previously emitted records stand.
#[allow(clippy::too_many_arguments)]
pub fn run(
    cfg: &RoundConfig,
    problem: &dyn Problem,
    channel: &NoiseChannel,
    rounds: usize,
    metric_every: usize,
    wallclock: bool,
    sink: &mut dyn FnMut(&RoundTrace) -> Result<()>,
) -> Result<()> {
    if metric_every == 0 {
        return Err(Error::Config("metric_every must be at least 1".into()));
    }
    let mut sim = Simulator::new(cfg.clone(), problem, *channel)?;
    let start = Instant::now();
    let k = cfg.local_steps as u64;
    for _ in 0..rounds {
        let snapshots = sim.step_round()?;
        for snap in &snapshots {
            if snap.virtual_avg.iter().any(|m| !m.is_finite()) {
                return Err(Error::NonFiniteLoss { round: snap.round as usize, step: snap.step as usize });
            }
            if (snap.round * k + snap.step) % metric_every as u64 != 0 {
                continue;
            }
            let trace = trace_at(&sim, problem, snap, wallclock, &start)?;
            sink(&trace)?;
        }
    }
    Ok(())
}

/// Metrics at one snapshot.
pub fn trace_at(
    sim: &Simulator,
    problem: &dyn Problem,
    snap: &StepSnapshot,
    wallclock: bool,
    start: &Instant,
) -> Result<RoundTrace> {
    let loss = problem.global_loss(&snap.virtual_avg)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { round: snap.round as usize, step: snap.step as usize });
    }
    let grads = problem.global_grad(&snap.virtual_avg)?;
    let pooled = pooled_singular_values(&grads, problem.layers())?;
    let p_hat = sim.effective_exponent();
    Ok(RoundTrace {
        round: snap.round,
        step: snap.step,
        loss,
        grad_frobenius: pooled.iter().map(|s| s * s).sum::<f64>().sqrt(),
        grad_trace: pooled.iter().sum(),
        grad_spectral: pooled.first().copied().unwrap_or(0.0),
        grad_schatten_phat: mat::schatten_from_singular_values(&pooled, p_hat),
        running_kappa: sim.running_kappa(),
        wallclock_ns: if wallclock { start.elapsed().as_nanos() as u64 } else { 0 },
        accuracy: problem.accuracy(&snap.virtual_avg),
    })
}
