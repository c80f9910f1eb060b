//! Objective suite with exact loss/gradient oracles and a controllable
//! stochastic-gradient channel.
//!
//! Parameters are bundles of matrices, one per layer, so the same round
//! engine drives scalar toy constructions and small multi-layer models.

mod dataset;
mod dirichlet;
mod quadratic;
mod toy;

pub use dataset::ToyDataset;
pub use dirichlet::dirichlet_partition;
pub use quadratic::{MatrixQuadraticProblem, QuadraticConfig};
pub use toy::{ToyClassificationProblem, ToyConfig};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::optim::LayerSpec;
use crate::rng::{self, stream};
use serde::{Deserialize, Serialize};

/// Client-gradient spread at the optimum, or a proxy when no closed-form
/// optimum exists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Heterogeneity {
    /// sqrt((1/n) sum_i ||grad_i(X*)||_F^2) with X* from a closed form.
    Exact(f64),
    /// Gradient dispersion around the mean at the supplied point; flagged so
    /// callers never mistake it for the optimum-based quantity.
    Proxy(f64),
}

impl Heterogeneity {
    pub fn value(&self) -> f64 {
        match self {
            Heterogeneity::Exact(v) | Heterogeneity::Proxy(v) => *v,
        }
    }
}

/// A federated objective: per-client loss/gradient oracles over a shared
/// layer layout.
pub trait Problem: Send + Sync {
    fn n_clients(&self) -> usize;
    fn layers(&self) -> &[LayerSpec];
    fn init_params(&self) -> Vec<Mat>;
    fn loss(&self, client: usize, x: &[Mat]) -> Result<f64>;
    fn grad(&self, client: usize, x: &[Mat]) -> Result<Vec<Mat>>;

    fn global_loss(&self, x: &[Mat]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.n_clients() {
            total += self.loss(i, x)?;
        }
        Ok(total / self.n_clients() as f64)
    }

    fn global_grad(&self, x: &[Mat]) -> Result<Vec<Mat>> {
        let mut acc = self.grad(0, x)?;
        for i in 1..self.n_clients() {
            for (a, g) in acc.iter_mut().zip(self.grad(i, x)?) {
                a.axpy(1.0, &g);
            }
        }
        let w = 1.0 / self.n_clients() as f64;
        Ok(acc.into_iter().map(|m| m.scale(w)).collect())
    }

    /// Client-gradient spread; exact when the optimum has a closed form,
    /// otherwise a dispersion proxy at `x`.
    fn heterogeneity(&self, x: &[Mat]) -> Result<Heterogeneity> {
        let mean = self.global_grad(x)?;
        let mut acc = 0.0;
        for i in 0..self.n_clients() {
            let gi = self.grad(i, x)?;
            let mut sq = 0.0;
            for (g, m) in gi.iter().zip(&mean) {
                sq += (g - m).frobenius().powi(2);
            }
            acc += sq;
        }
        Ok(Heterogeneity::Proxy((acc / self.n_clients() as f64).sqrt()))
    }

    /// Classification accuracy where it makes sense.
    fn accuracy(&self, _x: &[Mat]) -> Option<f64> {
        None
    }

    fn check_client(&self, client: usize) -> Result<()> {
        if client >= self.n_clients() {
            return Err(Error::UnknownClient(client));
        }
        Ok(())
    }
}

/// Additive zero-mean Gaussian perturbation of gradients with
/// `E||noise||_F^2 = sigma^2` per layer (entrywise variance
/// `sigma^2 / (rows * cols)`).
///
/// Draws are keyed by (seed, client, round, step, layer) so the channel is
/// reproducible regardless of evaluation order.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseChannel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseChannel {
    pub fn silent() -> Self {
        NoiseChannel { sigma: 0.0, seed: 0 }
    }

    pub fn draw(&self, rows: usize, cols: usize, coords: &[u64]) -> Mat {
        let mut rng = rng::stream_rng(self.seed, coords);
        let std = self.sigma / ((rows * cols) as f64).sqrt();
        rng::gaussian_mat(&mut rng, rows, cols, std)
    }
}

/// Exact gradient plus one noise draw per layer. With `sigma = 0` the exact
/// gradient is returned untouched (no rng stream is consumed).
pub fn stoch_grad(
    problem: &dyn Problem,
    client: usize,
    x: &[Mat],
    channel: &NoiseChannel,
    round: u64,
    step: u64,
) -> Result<Vec<Mat>> {
    let mut grads = problem.grad(client, x)?;
    if channel.sigma == 0.0 {
        return Ok(grads);
    }
    for (layer, g) in grads.iter_mut().enumerate() {
        let noise = channel.draw(
            g.rows(),
            g.cols(),
            &[stream::NOISE, client as u64, round, step, layer as u64],
        );
        g.axpy(1.0, &noise);
    }
    Ok(grads)
}

/// Max relative deviation between the analytic gradient and a central finite
/// difference at `x`, over all entries of all layers.
pub fn finite_difference_gap(
    problem: &dyn Problem,
    client: usize,
    x: &[Mat],
    h: f64,
) -> Result<f64> {
    let analytic = problem.grad(client, x)?;
    let mut worst: f64 = 0.0;
    let scale = analytic.iter().map(|g| g.frobenius()).fold(1.0, f64::max);
    let mut probe: Vec<Mat> = x.to_vec();
    for l in 0..x.len() {
        for idx in 0..x[l].data().len() {
            let orig = probe[l].data()[idx];
            probe[l].data_mut()[idx] = orig + h;
            let up = problem.loss(client, &probe)?;
            probe[l].data_mut()[idx] = orig - h;
            let down = problem.loss(client, &probe)?;
            probe[l].data_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - analytic[l].data()[idx]).abs() / scale);
        }
    }
    Ok(worst)
}

/// The two-client scalar construction whose averaged oracle directions cancel
/// exactly: f1(x) = x^2/2 and f2(x) = (x + a)^2/2, started at x = -a/4.
#[derive(Clone, Copy, Debug)]
pub struct CounterexampleProblem {
    pub a: f64,
}

impl CounterexampleProblem {
    pub fn new(a: f64) -> Result<Self> {
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::Config(format!("counterexample offset must be positive, got {a}")));
        }
        Ok(CounterexampleProblem { a })
    }

    pub fn minimizer(&self) -> f64 {
        -self.a / 2.0
    }

    /// Squared gradient norm the averaged-oracle method is pinned at.
    pub fn stagnation_floor(&self) -> f64 {
        self.a * self.a / 16.0
    }

    pub fn zeta_star_sq(&self) -> f64 {
        self.a * self.a / 4.0
    }

    fn as_scalar(x: &[Mat]) -> Result<f64> {
        if x.len() != 1 || x[0].shape() != (1, 1) {
            return Err(Error::Dimension("counterexample parameter is a single scalar".into()));
        }
        Ok(x[0][(0, 0)])
    }
}

const COUNTEREXAMPLE_LAYERS: [LayerSpec; 1] =
    [LayerSpec { role: crate::optim::LayerRole::Scalar, rows: 1, cols: 1 }];

impl Problem for CounterexampleProblem {
    fn n_clients(&self) -> usize {
        2
    }

    fn layers(&self) -> &[LayerSpec] {
        &COUNTEREXAMPLE_LAYERS
    }

    fn init_params(&self) -> Vec<Mat> {
        vec![Mat::scalar(-self.a / 4.0)]
    }

    fn loss(&self, client: usize, x: &[Mat]) -> Result<f64> {
        self.check_client(client)?;
        let v = Self::as_scalar(x)?;
        Ok(match client {
            0 => v * v / 2.0,
            _ => (v + self.a) * (v + self.a) / 2.0,
        })
    }

    fn grad(&self, client: usize, x: &[Mat]) -> Result<Vec<Mat>> {
        self.check_client(client)?;
        let v = Self::as_scalar(x)?;
        Ok(vec![Mat::scalar(match client {
            0 => v,
            _ => v + self.a,
        })])
    }

    fn heterogeneity(&self, _x: &[Mat]) -> Result<Heterogeneity> {
        Ok(Heterogeneity::Exact(self.zeta_star_sq().sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_gradients() {
        let p = CounterexampleProblem::new(1.0).unwrap();
        let x = vec![Mat::scalar(-0.25)];
        assert_eq!(p.grad(1, &x).unwrap()[0][(0, 0)], 0.75);
        assert_eq!(p.grad(0, &x).unwrap()[0][(0, 0)], -0.25);
        let g = p.global_grad(&x).unwrap();
        assert_eq!(g[0][(0, 0)], 0.25);
        assert!(p.grad(2, &x).is_err());
    }

    #[test]
    fn counterexample_analytics() {
        let p = CounterexampleProblem::new(1.0).unwrap();
        assert_eq!(p.minimizer(), -0.5);
        assert_eq!(p.stagnation_floor(), 0.0625);
        assert_eq!(p.zeta_star_sq(), 0.25);
        match p.heterogeneity(&p.init_params()).unwrap() {
            Heterogeneity::Exact(z) => assert!((z - 0.5).abs() < 1e-15),
            _ => panic!("expected exact heterogeneity"),
        }
        let p2 = CounterexampleProblem::new(2.0).unwrap();
        assert_eq!(p2.stagnation_floor(), 0.25);
    }

    #[test]
    fn counterexample_rejects_bad_offset() {
        assert!(CounterexampleProblem::new(0.0).is_err());
        assert!(CounterexampleProblem::new(-1.0).is_err());
    }

    #[test]
    fn counterexample_finite_difference() {
        let p = CounterexampleProblem::new(1.5).unwrap();
        for client in 0..2 {
            let gap =
                finite_difference_gap(&p, client, &[Mat::scalar(0.37)], 1e-5).unwrap();
            assert!(gap < 1e-5, "fd gap {gap}");
        }
    }

    #[test]
    fn noise_channel_unbiased_with_matching_variance() {
        let channel = NoiseChannel { sigma: 0.7, seed: 99 };
        let (rows, cols) = (2, 3);
        let n = 100_000u64;
        let mut mean = Mat::zeros(rows, cols);
        let mut sq = 0.0;
        for draw in 0..n {
            let noise = channel.draw(rows, cols, &[stream::NOISE, 0, draw, 0, 0]);
            mean.axpy(1.0 / n as f64, &noise);
            sq += noise.frobenius().powi(2) / n as f64;
        }
        let bound = 3.0 * channel.sigma / (n as f64).sqrt();
        assert!(mean.frobenius() <= bound, "mean {} > {}", mean.frobenius(), bound);
        let var_tol =
            3.0 * channel.sigma.powi(2) * (2.0 / ((rows * cols) as f64 * n as f64)).sqrt();
        let want = channel.sigma.powi(2);
        assert!((sq - want).abs() <= var_tol, "E||noise||^2 = {sq}, want {want} +- {var_tol}");
    }

    #[test]
    fn stoch_grad_is_centered_on_exact_gradient() {
        let p = CounterexampleProblem::new(1.0).unwrap();
        let x = vec![Mat::scalar(0.1)];
        let channel = NoiseChannel { sigma: 0.5, seed: 5 };
        let exact = p.grad(0, &x).unwrap()[0][(0, 0)];
        let n = 100_000u64;
        let mut mean = 0.0;
        for draw in 0..n {
            mean += stoch_grad(&p, 0, &x, &channel, draw, 0).unwrap()[0][(0, 0)] / n as f64;
        }
        assert!((mean - exact).abs() <= 3.0 * channel.sigma / (n as f64).sqrt());
    }

    #[test]
    fn silent_channel_returns_exact_gradient() {
        let p = CounterexampleProblem::new(1.0).unwrap();
        let x = vec![Mat::scalar(0.1)];
        let g = stoch_grad(&p, 0, &x, &NoiseChannel::silent(), 3, 1).unwrap();
        assert_eq!(g[0][(0, 0)], 0.1);
    }

    #[test]
    fn stoch_grad_draws_are_reproducible_and_coordinate_keyed() {
        let p = CounterexampleProblem::new(1.0).unwrap();
        let x = vec![Mat::scalar(0.1)];
        let channel = NoiseChannel { sigma: 0.5, seed: 5 };
        let a = stoch_grad(&p, 0, &x, &channel, 7, 2).unwrap();
        let b = stoch_grad(&p, 0, &x, &channel, 7, 2).unwrap();
        let c = stoch_grad(&p, 0, &x, &channel, 7, 3).unwrap();
        assert_eq!(a[0], b[0]);
        assert_ne!(a[0], c[0]);
    }
}
