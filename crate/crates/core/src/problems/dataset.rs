//! Synthetic labeled datasets and their on-disk container.
//!
//! The container is one binary file (little-endian f64 features, row-major,
//! followed by little-endian u32 labels) plus a JSON sidecar describing the
//! shapes and per-class counts. See the repository README for the layout.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::{self, stream};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDataset {
    /// samples x features.
    pub features: Mat,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dtype: String,
    samples: usize,
    features: usize,
    classes: usize,
    label_counts: Vec<usize>,
}

impl ToyDataset {
    /// Gaussian blobs: one random mean per class, samples spread around it.
    pub fn generate(samples: usize, features: usize, classes: usize, seed: u64) -> Result<Self> {
        if samples == 0 || features == 0 || classes < 2 {
            return Err(Error::Config("dataset needs samples, features and >= 2 classes".into()));
        }
        if samples < classes {
            return Err(Error::Config("need at least one sample per class".into()));
        }
        let mut rng = rng::stream_rng(seed, &[stream::DATA, 0xB10B]);
        let means: Vec<Mat> =
            (0..classes).map(|_| rng::gaussian_mat(&mut rng, 1, features, 2.0)).collect();
        let mut x = Mat::zeros(samples, features);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let class = i % classes;
            let noise = rng::gaussian_mat(&mut rng, 1, features, 1.0);
            for j in 0..features {
                x[(i, j)] = means[class][(0, j)] + noise[(0, j)];
            }
            labels.push(class);
        }
        Ok(ToyDataset { features: x, labels, n_classes: classes })
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Write `<stem>.bin` and `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let sidecar = Sidecar {
            dtype: "f64le".into(),
            samples: self.features.rows(),
            features: self.features.cols(),
            classes: self.n_classes,
            label_counts: self.label_counts(),
        };
        fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
        let mut bin = fs::File::create(stem.with_extension("bin"))?;
        let mut buf = Vec::with_capacity(self.features.data().len() * 8 + self.labels.len() * 4);
        for &v in self.features.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &l in &self.labels {
            buf.extend_from_slice(&(l as u32).to_le_bytes());
        }
        bin.write_all(&buf)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let sidecar: Sidecar =
            serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
        if sidecar.dtype != "f64le" {
            return Err(Error::Config(format!("unsupported dtype {}", sidecar.dtype)));
        }
        let mut bytes = Vec::new();
        fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
        let feat_bytes = sidecar.samples * sidecar.features * 8;
        let expected = feat_bytes + sidecar.samples * 4;
        if bytes.len() != expected {
            return Err(Error::Config(format!(
                "binary payload is {} bytes, sidecar implies {expected}",
                bytes.len()
            )));
        }
        let data: Vec<f64> = bytes[..feat_bytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let labels: Vec<usize> = bytes[feat_bytes..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        if labels.iter().any(|&l| l >= sidecar.classes) {
            return Err(Error::Config("label out of range for declared class count".into()));
        }
        Ok(ToyDataset {
            features: Mat::from_vec(sidecar.samples, sidecar.features, data)?,
            labels,
            n_classes: sidecar.classes,
        })
    }
}
