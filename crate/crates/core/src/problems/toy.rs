//! Small softmax classifier over synthetic blobs: one hidden tanh layer,
//! weight matrices routed to matrix oracles, bias vectors to plain SGD.

use super::dataset::ToyDataset;
use super::dirichlet::dirichlet_partition;
use super::Problem;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::optim::LayerSpec;
use crate::rng::{self, stream};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToyConfig {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub hidden: usize,
    pub clients: usize,
    /// Dirichlet concentration for the label partition.
    pub beta: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            samples: 256,
            features: 8,
            classes: 4,
            hidden: 8,
            clients: 16,
            beta: 0.1,
            seed: 0,
        }
    }
}

/// Layer order: W1 (hidden x features), b1, W2 (classes x hidden), b2.
#[derive(Clone, Debug)]
pub struct ToyClassificationProblem {
    data: ToyDataset,
    shards: Vec<Vec<usize>>,
    layers: Vec<LayerSpec>,
    seed: u64,
}

impl ToyClassificationProblem {
    pub fn generate(cfg: &ToyConfig) -> Result<Self> {
        if cfg.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let data = ToyDataset::generate(cfg.samples, cfg.features, cfg.classes, cfg.seed)?;
        Self::from_dataset(data, cfg.clients, cfg.beta, cfg.hidden, cfg.seed)
    }

    pub fn from_dataset(
        data: ToyDataset,
        clients: usize,
        beta: f64,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let shards = dirichlet_partition(&data.labels, clients, beta, seed)?;
        let d = data.features.cols();
        let c = data.n_classes;
        let layers = vec![
            LayerSpec::matrix(hidden, d),
            LayerSpec::vector(hidden),
            LayerSpec::matrix(c, hidden),
            LayerSpec::vector(c),
        ];
        Ok(ToyClassificationProblem { data, shards, layers, seed })
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    fn hidden(&self) -> usize {
        self.layers[0].rows
    }

    fn check_params(&self, x: &[Mat]) -> Result<()> {
        if x.len() != self.layers.len()
            || x.iter().zip(&self.layers).any(|(m, l)| m.shape() != (l.rows, l.cols))
        {
            return Err(Error::Dimension("parameter bundle does not match layer layout".into()));
        }
        Ok(())
    }

    /// Forward pass for one sample; returns (hidden activation, logits).
    fn forward(&self, x: &[Mat], sample: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.data.features.cols();
        let h = self.hidden();
        let c = self.data.n_classes;
        let (w1, b1, w2, b2) = (&x[0], &x[1], &x[2], &x[3]);
        let mut a1 = vec![0.0; h];
        for i in 0..h {
            let mut z = b1[(i, 0)];
            for j in 0..d {
                z += w1[(i, j)] * self.data.features[(sample, j)];
            }
            a1[i] = z.tanh();
        }
        let mut logits = vec![0.0; c];
        for i in 0..c {
            let mut z = b2[(i, 0)];
            for j in 0..h {
                z += w2[(i, j)] * a1[j];
            }
            logits[i] = z;
        }
        (a1, logits)
    }

    fn softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    fn shard_loss(&self, indices: &[usize], x: &[Mat]) -> f64 {
        let mut total = 0.0;
        for &sample in indices {
            let (_, logits) = self.forward(x, sample);
            let p = Self::softmax(&logits);
            total -= p[self.data.labels[sample]].max(f64::MIN_POSITIVE).ln();
        }
        total / indices.len() as f64
    }
}

impl Problem for ToyClassificationProblem {
    fn n_clients(&self) -> usize {
        self.shards.len()
    }

    fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    fn init_params(&self) -> Vec<Mat> {
        let d = self.data.features.cols();
        let h = self.hidden();
        let c = self.data.n_classes;
        let mut rng = rng::stream_rng(self.seed, &[stream::DATA, 0x111]);
        vec![
            rng::gaussian_mat(&mut rng, h, d, 1.0 / (d as f64).sqrt()),
            Mat::zeros(h, 1),
            rng::gaussian_mat(&mut rng, c, h, 1.0 / (h as f64).sqrt()),
            Mat::zeros(c, 1),
        ]
    }

    fn loss(&self, client: usize, x: &[Mat]) -> Result<f64> {
        self.check_client(client)?;
        self.check_params(x)?;
        Ok(self.shard_loss(&self.shards[client], x))
    }

    fn grad(&self, client: usize, x: &[Mat]) -> Result<Vec<Mat>> {
        self.check_client(client)?;
        self.check_params(x)?;
        let d = self.data.features.cols();
        let h = self.hidden();
        let c = self.data.n_classes;
        let w2 = &x[2];
        let indices = &self.shards[client];
        let scale = 1.0 / indices.len() as f64;

        let mut dw1 = Mat::zeros(h, d);
        let mut db1 = Mat::zeros(h, 1);
        let mut dw2 = Mat::zeros(c, h);
        let mut db2 = Mat::zeros(c, 1);

        for &sample in indices {
            let (a1, logits) = self.forward(x, sample);
            let mut dz2 = Self::softmax(&logits);
            dz2[self.data.labels[sample]] -= 1.0;

            for i in 0..c {
                let g = dz2[i] * scale;
                db2[(i, 0)] += g;
                for j in 0..h {
                    dw2[(i, j)] += g * a1[j];
                }
            }
            for j in 0..h {
                let mut da = 0.0;
                for i in 0..c {
                    da += w2[(i, j)] * dz2[i];
                }
                let dz1 = da * (1.0 - a1[j] * a1[j]) * scale;
                db1[(j, 0)] += dz1;
                for k in 0..d {
                    dw1[(j, k)] += dz1 * self.data.features[(sample, k)];
                }
            }
        }
        Ok(vec![dw1, db1, dw2, db2])
    }

    fn accuracy(&self, x: &[Mat]) -> Option<f64> {
        if self.check_params(x).is_err() {
            return None;
        }
        let mut correct = 0usize;
        for sample in 0..self.data.features.rows() {
            let (_, logits) = self.forward(x, sample);
            let pred = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if pred == self.data.labels[sample] {
                correct += 1;
            }
        }
        Some(correct as f64 / self.data.features.rows() as f64)
    }
}
