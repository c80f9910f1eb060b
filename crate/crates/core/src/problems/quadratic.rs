//! Per-client least-squares objectives f_i(X) = ||A_i X - B_i||_F^2 / 2.
//!
//! The heterogeneity knob spreads the client minimizers around a shared
//! target, and an optional rank cap on A_i produces the approximately
//! low-rank curvature regime where spectral-geometry methods shine.

use super::{Heterogeneity, Problem};
use crate::error::{Error, Result};
use crate::mat::{self, Mat, SV_ZERO_REL};
use crate::optim::LayerSpec;
use crate::rng::{self, stream};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadraticConfig {
    pub clients: usize,
    /// Observation rows of each A_i.
    pub obs: usize,
    pub d1: usize,
    pub d2: usize,
    /// Rank cap for A_i; None means full rank.
    pub rank: Option<usize>,
    /// Scales the spread of client minimizers; 0 makes every client share
    /// one minimizer, so the heterogeneity at the optimum vanishes.
    pub heterogeneity: f64,
    pub seed: u64,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        QuadraticConfig {
            clients: 8,
            obs: 12,
            d1: 8,
            d2: 6,
            rank: None,
            heterogeneity: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatrixQuadraticProblem {
    a: Vec<Mat>,
    b: Vec<Mat>,
    layers: [LayerSpec; 1],
}

impl MatrixQuadraticProblem {
    pub fn generate(cfg: &QuadraticConfig) -> Result<Self> {
        if cfg.clients == 0 || cfg.obs == 0 || cfg.d1 == 0 || cfg.d2 == 0 {
            return Err(Error::Config("quadratic dimensions must be positive".into()));
        }
        if cfg.heterogeneity < 0.0 {
            return Err(Error::Config("heterogeneity must be non-negative".into()));
        }
        if let Some(r) = cfg.rank {
            if r == 0 || r > cfg.obs.min(cfg.d1) {
                return Err(Error::Config(format!(
                    "rank {r} out of range for {}x{} design",
                    cfg.obs, cfg.d1
                )));
            }
        }
        let mut rng = rng::stream_rng(cfg.seed, &[stream::DATA, 0x51]);
        let scale = 1.0 / (cfg.obs as f64).sqrt();
        let target = rng::gaussian_mat(&mut rng, cfg.d1, cfg.d2, 1.0);
        let mut a = Vec::with_capacity(cfg.clients);
        let mut b = Vec::with_capacity(cfg.clients);
        for _ in 0..cfg.clients {
            let design = match cfg.rank {
                Some(r) => {
                    let left = rng::gaussian_mat(&mut rng, cfg.obs, r, scale);
                    let right = rng::gaussian_mat(&mut rng, r, cfg.d1, 1.0);
                    left.matmul(&right)
                }
                None => rng::gaussian_mat(&mut rng, cfg.obs, cfg.d1, scale),
            };
            let mut minimizer = target.clone();
            if cfg.heterogeneity > 0.0 {
                let offset = rng::gaussian_mat(&mut rng, cfg.d1, cfg.d2, 1.0);
                minimizer.axpy(cfg.heterogeneity, &offset);
            }
            b.push(design.matmul(&minimizer));
            a.push(design);
        }
        Ok(MatrixQuadraticProblem {
            a,
            b,
            layers: [LayerSpec::matrix(cfg.d1, cfg.d2)],
        })
    }

    /// Build directly from per-client design/target pairs.
    pub fn from_parts(a: Vec<Mat>, b: Vec<Mat>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Config("need matching non-empty design/target lists".into()));
        }
        let (obs, d1) = a[0].shape();
        let d2 = b[0].cols();
        for (ai, bi) in a.iter().zip(&b) {
            if ai.shape() != (obs, d1) || bi.shape() != (obs, d2) {
                return Err(Error::Dimension("inconsistent client shapes".into()));
            }
        }
        Ok(MatrixQuadraticProblem { a, b, layers: [LayerSpec::matrix(d1, d2)] })
    }

    pub fn design(&self, client: usize) -> &Mat {
        &self.a[client]
    }

    fn d1(&self) -> usize {
        self.layers[0].rows
    }

    fn d2(&self) -> usize {
        self.layers[0].cols
    }

    /// Closed-form global minimizer via the pseudo-inverse of the averaged
    /// normal matrix.
    pub fn global_minimizer(&self) -> Result<Mat> {
        let n = self.a.len() as f64;
        let mut h = Mat::zeros(self.d1(), self.d1());
        let mut g = Mat::zeros(self.d1(), self.d2());
        for (ai, bi) in self.a.iter().zip(&self.b) {
            let at = ai.transpose();
            h.axpy(1.0 / n, &at.matmul(ai));
            g.axpy(1.0 / n, &at.matmul(bi));
        }
        Ok(pinv(&h)?.matmul(&g))
    }

    /// Largest squared leading singular value over client designs: the
    /// Lipschitz constant of the gradients in Frobenius geometry.
    pub fn lipschitz(&self) -> Result<f64> {
        let mut l: f64 = 0.0;
        for ai in &self.a {
            let s1 = mat::svd(ai)?.s[0];
            l = l.max(s1 * s1);
        }
        Ok(l)
    }

    /// A sufficient constant for the trace-vs-spectral smoothness pairing:
    /// ||grad(X) - grad(Y)||_trace <= witness * ||X - Y||_sp. Uses
    /// ||M||_trace <= sqrt(rank M) ||M||_F twice, once on the gradient
    /// difference and once on X - Y.
    pub fn smoothness_witness(&self) -> Result<f64> {
        let d = self.d1().min(self.d2());
        let mut rank_a = 0usize;
        for ai in &self.a {
            rank_a = rank_a.max(mat::svd(ai)?.nonzero_singular_values().len());
        }
        let r = rank_a.min(d);
        Ok(self.lipschitz()? * ((r * d) as f64).sqrt())
    }
}

/// Moore-Penrose pseudo-inverse with the shared singular-value threshold.
pub fn pinv(m: &Mat) -> Result<Mat> {
    let f = mat::svd(m)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let mut ut = f.u.transpose();
    for (i, &s) in f.s.iter().enumerate() {
        let inv = if smax > 0.0 && s > SV_ZERO_REL * smax { 1.0 / s } else { 0.0 };
        for j in 0..ut.cols() {
            ut[(i, j)] *= inv;
        }
    }
    Ok(f.vt.transpose().matmul(&ut))
}

impl Problem for MatrixQuadraticProblem {
    fn n_clients(&self) -> usize {
        self.a.len()
    }

    fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    fn init_params(&self) -> Vec<Mat> {
        vec![Mat::zeros(self.d1(), self.d2())]
    }

    fn loss(&self, client: usize, x: &[Mat]) -> Result<f64> {
        self.check_client(client)?;
        let residual = &self.a[client].matmul(&x[0]) - &self.b[client];
        Ok(0.5 * residual.frobenius().powi(2))
    }

    fn grad(&self, client: usize, x: &[Mat]) -> Result<Vec<Mat>> {
        self.check_client(client)?;
        let residual = &self.a[client].matmul(&x[0]) - &self.b[client];
        Ok(vec![self.a[client].transpose().matmul(&residual)])
    }

    fn heterogeneity(&self, _x: &[Mat]) -> Result<Heterogeneity> {
        let star = vec![self.global_minimizer()?];
        let mut acc = 0.0;
        for i in 0..self.n_clients() {
            acc += self.grad(i, &star)?[0].frobenius().powi(2);
        }
        Ok(Heterogeneity::Exact((acc / self.n_clients() as f64).sqrt()))
    }
}
