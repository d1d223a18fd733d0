//! Lloyd's k-means under an arbitrary Bregman divergence.
//!
//! Hard Voronoi assignment followed by unweighted-mean centroid updates,
//! which minimize the within-cell divergence sum for any generator.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{BaselineKind, BaselineModel};
use crate::data::Dataset;
use crate::divergence::Divergence;
use crate::error::{OdaError, Result};

/// How initial centroids are chosen.
#[derive(Debug, Clone)]
pub enum Seeding {
    /// First centroid drawn uniformly with the seeded RNG; each further
    /// centroid is the point farthest (max-min divergence) from those
    /// already chosen. Deterministic given the seed.
    FarthestFirst { rng_seed: u64 },
    /// Explicit point indices, mostly for tests.
    Indices(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub model: BaselineModel,
    /// Mean divergence to the assigned centroid at the final assignment.
    pub distortion: f64,
    pub iterations: usize,
    /// Distortion after each assignment pass; non-increasing.
    pub distortion_trace: Vec<f64>,
}

pub fn kmeans_fit(
    ds: &Dataset,
    k: usize,
    divergence: Divergence,
    seeding: Seeding,
    max_iter: usize,
) -> Result<KMeansOutcome> {
    if k == 0 || k > ds.len() {
        return Err(OdaError::TooFewSamples {
            needed: k.max(1),
            have: ds.len(),
        });
    }
    let seeds = match seeding {
        Seeding::FarthestFirst { rng_seed } => farthest_first(ds, k, &divergence, rng_seed)?,
        Seeding::Indices(idx) => idx,
    };
    let codebook: Vec<Vec<f64>> = seeds.iter().map(|&i| ds.points[i].clone()).collect();
    let mut model = BaselineModel::new(BaselineKind::KMeans, divergence, codebook)?;

    let n = ds.len();
    let mut assignment = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        // Assignment pass.
        let mut changed = false;
        let mut distortion = 0.0;
        for (i, p) in ds.points.iter().enumerate() {
            let (h, d) = model.nearest(p)?;
            distortion += d;
            if assignment[i] != h {
                assignment[i] = h;
                changed = true;
            }
        }
        let distortion = distortion / n as f64;
        if let Some(&prev) = trace.last() {
            debug_assert!(distortion <= prev + 1e-9, "distortion increased");
        }
        trace.push(distortion);
        if !changed {
            break;
        }
        // Centroid pass: unweighted means; empty clusters reseed at the
        // point currently farthest from its assigned centroid.
        let mut sums = vec![vec![0.0; ds.d]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in ds.points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, &c) in sums[assignment[i]].iter_mut().zip(p) {
                *s += c;
            }
        }
        for h in 0..k {
            if counts[h] > 0 {
                for (m, &s) in model.codebook[h].iter_mut().zip(&sums[h]) {
                    *m = s / counts[h] as f64;
                }
            } else {
                let far = farthest_assigned(ds, &model, &assignment)?;
                model.codebook[h] = ds.points[far].clone();
            }
        }
        model.update_counts.iter_mut().for_each(|c| *c += 1);
    }
    let distortion = *trace.last().expect("at least one pass");
    Ok(KMeansOutcome {
        model,
        distortion,
        iterations,
        distortion_trace: trace,
    })
}

fn farthest_first(ds: &Dataset, k: usize, div: &Divergence, rng_seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut chosen = vec![rng.random_range(0..ds.len())];
    let mut min_div: Vec<f64> = ds
        .points
        .iter()
        .map(|p| div.evaluate(p, &ds.points[chosen[0]]))
        .collect::<Result<_>>()?;
    while chosen.len() < k {
        let mut best = 0;
        for i in 1..ds.len() {
            if min_div[i] > min_div[best] {
                best = i;
            }
        }
        chosen.push(best);
        for i in 0..ds.len() {
            let d = div.evaluate(&ds.points[i], &ds.points[best])?;
            if d < min_div[i] {
                min_div[i] = d;
            }
        }
    }
    Ok(chosen)
}

fn farthest_assigned(
    ds: &Dataset,
    model: &BaselineModel,
    assignment: &[usize],
) -> Result<usize> {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, p) in ds.points.iter().enumerate() {
        let d = model.divergence.evaluate(p, &model.codebook[assignment[i]])?;
        if d > best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_blobs;

    #[test]
    fn two_points_two_clusters() {
        let ds = Dataset::new(vec![vec![0.0, 0.0], vec![4.0, 4.0]], None).unwrap();
        let out = kmeans_fit(
            &ds,
            2,
            Divergence::squared_euclidean(2),
            Seeding::FarthestFirst { rng_seed: 1 },
            50,
        )
        .unwrap();
        assert_eq!(out.distortion, 0.0);
        let mut cb = out.model.codebook.clone();
        cb.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(cb, vec![vec![0.0, 0.0], vec![4.0, 4.0]]);
    }

    #[test]
    fn unit_square_single_cluster_mean() {
        let ds = Dataset::new(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
            ],
            None,
        )
        .unwrap();
        let out = kmeans_fit(
            &ds,
            1,
            Divergence::squared_euclidean(2),
            Seeding::Indices(vec![0]),
            50,
        )
        .unwrap();
        assert_eq!(out.model.codebook[0], vec![0.5, 0.5]);
    }

    #[test]
    fn distortion_non_increasing() {
        let ds = gen_blobs(
            300,
            &[
                (vec![-4.0, 0.0], 0),
                (vec![4.0, 0.0], 0),
                (vec![0.0, 6.0], 0),
            ],
            0.8,
            17,
        )
        .unwrap();
        let out = kmeans_fit(
            &ds,
            3,
            Divergence::squared_euclidean(2),
            Seeding::FarthestFirst { rng_seed: 2 },
            100,
        )
        .unwrap();
        for w in out.distortion_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        assert!(out.distortion < 2.0);
    }

    #[test]
    fn empty_cluster_reseeded() {
        // Two coincident seeds: one cluster starts empty and must be
        // reseeded rather than dropped.
        let ds = Dataset::new(
            vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]],
            None,
        )
        .unwrap();
        let out = kmeans_fit(
            &ds,
            2,
            Divergence::squared_euclidean(1),
            Seeding::Indices(vec![0, 0]),
            50,
        )
        .unwrap();
        assert_eq!(out.model.k(), 2);
        assert!(out.distortion < 0.01);
    }
}
