//! Offline (batch) deterministic annealing for clustering.
//!
//! At each temperature the Gibbs memberships of every point and the
//! mass-weighted centroids are alternated to a fixed point over the whole
//! dataset, then the codebook goes through the same merge / idle-removal /
//! perturbation cycle as the online learner. Every fixed-point iteration
//! touches all points, which is what the sample-presentation counter tracks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annealing::{derive_seed, OdaConfig};
use crate::baselines::{BaselineKind, BaselineModel};
use crate::data::Dataset;
use crate::divergence::DivergenceKind;
use crate::error::Result;
use crate::metrics;

const POSITIVE_FLOOR: f64 = 1e-12;
const MAX_FIXED_POINT_ITERS: usize = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchLevelRecord {
    pub temperature: f64,
    pub k_effective: usize,
    /// Cumulative sample presentations: dataset size times the number of
    /// fixed-point iterations performed so far.
    pub presentations_cumulative: u64,
    pub avg_distortion: f64,
}

#[derive(Debug, Clone)]
pub struct BatchDaOutcome {
    pub model: BaselineModel,
    pub levels: Vec<BatchLevelRecord>,
    pub total_presentations: u64,
}

/// Run batch deterministic annealing over the full dataset with the same
/// schedule and thresholds as an online run configured by `config`.
pub fn batch_da_fit(ds: &Dataset, config: &OdaConfig) -> Result<BatchDaOutcome> {
    config.validate()?;
    let div = config.divergence;
    let n = ds.len();
    let mut codebook: Vec<Vec<f64>> = vec![ds.mean()];
    if div.kind == DivergenceKind::GeneralizedIDivergence {
        for mu in &mut codebook {
            mu.iter_mut().for_each(|c| *c = c.max(POSITIVE_FLOOR));
        }
    }
    let mut masses = vec![1.0f64];
    let mut temperature = config.t_max;
    let mut presentations: u64 = 0;
    let mut levels = Vec::new();
    let mut level_index: u64 = 0;

    loop {
        // Fixed point of (memberships, centroids) at this temperature.
        for _ in 0..MAX_FIXED_POINT_ITERS {
            let k = codebook.len();
            let mut weight = vec![0.0f64; k];
            let mut weighted_sum = vec![vec![0.0f64; ds.d]; k];
            for p in &ds.points {
                let mut logits = Vec::with_capacity(k);
                for mu in &codebook {
                    logits.push(-div.evaluate(p, mu)? / temperature);
                }
                let shift = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut probs: Vec<f64> = logits.iter().map(|l| (l - shift).exp()).collect();
                let total: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|q| *q /= total);
                for (h, &q) in probs.iter().enumerate() {
                    weight[h] += q;
                    for (s, &c) in weighted_sum[h].iter_mut().zip(p) {
                        *s += q * c;
                    }
                }
            }
            presentations += n as u64;
            let mut max_move = 0.0f64;
            for h in 0..k {
                if weight[h] > 0.0 {
                    let new_mu: Vec<f64> =
                        weighted_sum[h].iter().map(|&s| s / weight[h]).collect();
                    let moved = div.evaluate(&new_mu, &codebook[h])?;
                    max_move = max_move.max(moved);
                    codebook[h] = new_mu;
                }
                masses[h] = weight[h] / n as f64;
            }
            if max_move < config.eps_c {
                break;
            }
        }

        // Merge coincident codevectors (lower index survives).
        let k = codebook.len();
        let mut alive = vec![true; k];
        for i in 0..k {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..k {
                if alive[j] && div.evaluate(&codebook[j], &codebook[i])? < config.eps_n {
                    alive[j] = false;
                    masses[i] += masses[j];
                }
            }
        }
        // Idle removal, keeping at least one codevector.
        let survivors: Vec<usize> = (0..k).filter(|&h| alive[h]).collect();
        let all_idle = survivors.iter().all(|&h| masses[h] < config.eps_r);
        let kept: Vec<usize> = if all_idle {
            let mut best = survivors[0];
            for &h in &survivors {
                if masses[h] > masses[best] {
                    best = h;
                }
            }
            vec![best]
        } else {
            survivors
                .into_iter()
                .filter(|&h| masses[h] >= config.eps_r)
                .collect()
        };
        let new_codebook: Vec<Vec<f64>> = kept.iter().map(|&h| codebook[h].clone()).collect();
        let mut new_masses: Vec<f64> = kept.iter().map(|&h| masses[h]).collect();
        let total: f64 = new_masses.iter().sum();
        if total > 0.0 {
            new_masses.iter_mut().for_each(|m| *m /= total);
        }

        let k_effective = new_codebook.len();
        let eval_model = BaselineModel::new(BaselineKind::BatchDa, div, new_codebook.clone())?;
        levels.push(BatchLevelRecord {
            temperature,
            k_effective,
            presentations_cumulative: presentations,
            avg_distortion: metrics::avg_distortion(&eval_model, ds)?,
        });

        let at_capacity = k_effective >= config.k_max;
        let schedule_done = temperature * config.gamma <= config.t_min;
        if at_capacity || schedule_done {
            codebook = new_codebook;
            break;
        }
        temperature *= config.gamma;
        // Perturb survivors into antipodal pairs for the next level, with
        // the same growth budget as the online learner: at most
        // k_max - k_effective parents split, heaviest first.
        let split_budget = config.k_max - k_effective;
        let mut order: Vec<usize> = (0..k_effective).collect();
        order.sort_by(|&a, &b| {
            new_masses[b]
                .partial_cmp(&new_masses[a])
                .expect("finite mass")
                .then(a.cmp(&b))
        });
        let mut splits = vec![false; k_effective];
        for &i in order.iter().take(split_budget) {
            splits[i] = true;
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, 0x4BA7_0000 ^ level_index));
        let mut next_codebook = Vec::with_capacity(2 * k_effective);
        let mut next_masses = Vec::with_capacity(2 * k_effective);
        for (h, (mu, &m)) in new_codebook.iter().zip(&new_masses).enumerate() {
            if !splits[h] {
                next_codebook.push(mu.clone());
                next_masses.push(m);
                continue;
            }
            let dir = unit_vector(&mut rng, ds.d);
            for sign in [1.0, -1.0] {
                let mut child: Vec<f64> = mu
                    .iter()
                    .zip(&dir)
                    .map(|(&c, &u)| c + sign * config.delta * u)
                    .collect();
                if div.kind == DivergenceKind::GeneralizedIDivergence {
                    child.iter_mut().for_each(|c| *c = c.max(POSITIVE_FLOOR));
                }
                next_codebook.push(child);
                next_masses.push(m / 2.0);
            }
        }
        codebook = next_codebook;
        masses = next_masses;
        level_index += 1;
    }

    let model = BaselineModel::new(BaselineKind::BatchDa, div, codebook)?;
    Ok(BatchDaOutcome {
        model,
        total_presentations: presentations,
        levels,
    })
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z
            })
            .collect();
        let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}
