//! Label-skewed data partitioning.

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Split item indices across clients with per-label client proportions drawn
/// from Dirichlet(beta * 1_n). Small beta concentrates each label on few
/// clients; large beta approaches an even split.
///
/// Empty shards are repaired by moving one item from the currently largest
/// shard, so every client stays trainable.
pub fn dirichlet_partition(
    labels: &[usize],
    n_clients: usize,
    beta: f64,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n_clients == 0 {
        return Err(Error::Config("need at least one client".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Config(format!("dirichlet beta must be positive, got {beta}")));
    }
    if labels.len() < n_clients {
        return Err(Error::Config(format!(
            "cannot spread {} items over {} clients",
            labels.len(),
            n_clients
        )));
    }

    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (idx, &label) in labels.iter().enumerate() {
        by_label[label].push(idx);
    }

    let mut rng = rng::stream_rng(seed, &[stream::DATA, 0xD1]);
    let gamma = Gamma::new(beta, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); n_clients];

    for items in by_label.iter_mut() {
        if items.is_empty() {
            continue;
        }
        items.shuffle(&mut rng);
        let mut weights: Vec<f64> = (0..n_clients).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            // extreme beta underflow: fall back to a uniform draw
            let pick = rng.gen_range(0..n_clients);
            weights = vec![0.0; n_clients];
            weights[pick] = 1.0;
        }
        let total: f64 = weights.iter().sum();
        let mut cum = 0.0;
        let mut taken = 0usize;
        for (client, w) in weights.iter().enumerate() {
            cum += w / total;
            let upto = if client + 1 == n_clients {
                items.len()
            } else {
                (cum * items.len() as f64).round() as usize
            };
            let upto = upto.clamp(taken, items.len());
            shards[client].extend_from_slice(&items[taken..upto]);
            taken = upto;
        }
    }

    // repair pass
    for client in 0..n_clients {
        if !shards[client].is_empty() {
            continue;
        }
        let donor = (0..n_clients)
            .max_by_key(|&i| (shards[i].len(), usize::MAX - i))
            .expect("at least one client");
        let item = shards[donor].pop().ok_or_else(|| {
            Error::Config("not enough items to repair empty shards".into())
        })?;
        shards[client].push(item);
    }
    for shard in &mut shards {
        shard.sort_unstable();
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyclic_labels(n_items: usize, n_labels: usize) -> Vec<usize> {
        (0..n_items).map(|i| i % n_labels).collect()
    }

    fn entropy(counts: &[usize]) -> f64 {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total as f64;
                -p * p.ln()
            })
            .sum()
    }

    #[test]
    fn partition_covers_everything_exactly_once() {
        let labels = cyclic_labels(500, 10);
        let shards = dirichlet_partition(&labels, 16, 0.5, 3).unwrap();
        let mut seen = vec![false; labels.len()];
        for shard in &shards {
            assert!(!shard.is_empty());
            for &i in shard {
                assert!(!seen[i], "item {i} assigned twice");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn huge_beta_concentrates_on_even_split() {
        let labels = cyclic_labels(3200, 10);
        let shards = dirichlet_partition(&labels, 16, 1e6, 7).unwrap();
        let expected = labels.len() / 16;
        for shard in &shards {
            let dev = (shard.len() as f64 - expected as f64).abs() / expected as f64;
            assert!(dev < 0.05, "shard size {} vs {expected}", shard.len());
        }
    }

    #[test]
    fn small_beta_skews_label_distributions() {
        let n_labels = 10;
        let labels = cyclic_labels(2000, n_labels);
        let uniform_entropy = (n_labels as f64).ln();
        let mut mean_entropy = 0.0;
        let mut shard_count = 0usize;
        for seed in 0..50 {
            let shards = dirichlet_partition(&labels, 16, 0.1, seed).unwrap();
            for shard in shards {
                let mut counts = vec![0usize; n_labels];
                for &i in &shard {
                    counts[labels[i]] += 1;
                }
                mean_entropy += entropy(&counts);
                shard_count += 1;
            }
        }
        mean_entropy /= shard_count as f64;
        assert!(
            mean_entropy < uniform_entropy / 2.0,
            "mean label entropy {mean_entropy} not below {}",
            uniform_entropy / 2.0
        );
    }

    #[test]
    fn single_client_gets_the_full_dataset() {
        let labels = cyclic_labels(40, 4);
        let shards = dirichlet_partition(&labels, 1, 0.3, 0).unwrap();
        assert_eq!(shards.len(), 1);
        assert_eq!(shards[0].len(), 40);
    }

    #[test]
    fn deterministic_given_seed() {
        let labels = cyclic_labels(300, 5);
        let a = dirichlet_partition(&labels, 8, 0.2, 42).unwrap();
        let b = dirichlet_partition(&labels, 8, 0.2, 42).unwrap();
        assert_eq!(a, b);
        let c = dirichlet_partition(&labels, 8, 0.2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn validates_inputs() {
        let labels = cyclic_labels(4, 2);
        assert!(dirichlet_partition(&labels, 0, 0.5, 0).is_err());
        assert!(dirichlet_partition(&labels, 2, 0.0, 0).is_err());
        assert!(dirichlet_partition(&labels, 5, 0.5, 0).is_err());
    }
}
