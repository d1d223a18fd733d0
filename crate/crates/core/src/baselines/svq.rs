//! Stochastic vector quantization: winner-take-all online codebook updates.

use crate::baselines::BaselineModel;
use crate::data::{Dataset, SampleSource};
use crate::divergence::DivergenceKind;
use crate::error::Result;
use crate::metrics::Classifier;

/// Positive-orthant floor for the I-divergence update, whose
/// diagonally-preconditioned step can otherwise exit the domain.
const POSITIVE_FLOOR: f64 = 1e-12;

/// One winner-take-all update. The divergence-nearest codevector moves along
/// the natural (Hessian-preconditioned) direction:
/// `mu += alpha * (x - mu)` for the squared Euclidean distance and
/// `mu_j += alpha * (x_j - mu_j) / mu_j` for the generalized I-divergence.
/// Returns the winner's index.
pub fn svq_step<F: Fn(u64) -> f64>(
    model: &mut BaselineModel,
    x: &[f64],
    stepsize: F,
) -> Result<usize> {
    let (winner, _) = model.nearest(x)?;
    let alpha = stepsize(model.update_counts[winner]);
    let mu = &mut model.codebook[winner];
    match model.divergence.kind {
        DivergenceKind::SquaredEuclidean => {
            for (m, &xi) in mu.iter_mut().zip(x) {
                *m += alpha * (xi - *m);
            }
        }
        DivergenceKind::GeneralizedIDivergence => {
            for (m, &xi) in mu.iter_mut().zip(x) {
                *m += alpha * (xi - *m) / *m;
                *m = m.max(POSITIVE_FLOOR);
            }
        }
    }
    model.update_counts[winner] += 1;
    Ok(winner)
}

/// Train over `steps` draws with the default stepsize `1/(1+v)`.
pub fn svq_fit<S: SampleSource>(
    model: &mut BaselineModel,
    source: &mut S,
    steps: usize,
) -> Result<()> {
    for _ in 0..steps {
        let (x, _) = source.draw();
        // Borrow of `source` ends before the next draw.
        let x = x.to_vec();
        svq_step(model, &x, |v| 1.0 / (1.0 + v as f64))?;
    }
    Ok(())
}

/// A codebook whose entries carry class labels assigned by majority vote.
/// Prediction is the label of the divergence-nearest codevector. This is
/// the standard way to use an unsupervised codebook as a classifier.
#[derive(Debug, Clone)]
pub struct LabeledCodebook {
    pub model: BaselineModel,
    pub labels: Vec<usize>,
}

impl Classifier for LabeledCodebook {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        let (h, _) = self.model.nearest(x)?;
        Ok(self.labels[h])
    }
}

/// Label each codevector by the majority class of the training points it
/// attracts. Codevectors attracting no points get the globally most common
/// class. Ties break to the smaller label.
pub fn label_by_majority(model: BaselineModel, ds: &Dataset) -> Result<LabeledCodebook> {
    let labels = ds.labels.as_ref().ok_or(crate::error::OdaError::NotClassifier)?;
    let n_classes = ds.class_set.len();
    let class_index = |c: usize| ds.class_set.iter().position(|&x| x == c).unwrap_or(0);
    let mut votes = vec![vec![0usize; n_classes]; model.k()];
    let mut global = vec![0usize; n_classes];
    for (p, &l) in ds.points.iter().zip(labels) {
        let (h, _) = model.nearest(p)?;
        votes[h][class_index(l)] += 1;
        global[class_index(l)] += 1;
    }
    let majority = |counts: &[usize], fallback: &[usize]| -> usize {
        let source = if counts.iter().all(|&c| c == 0) {
            fallback
        } else {
            counts
        };
        let mut best = 0usize;
        for (i, &c) in source.iter().enumerate() {
            if c > source[best] {
                best = i;
            }
        }
        ds.class_set[best]
    };
    let assigned: Vec<usize> = votes.iter().map(|v| majority(v, &global)).collect();
    Ok(LabeledCodebook {
        model,
        labels: assigned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::BaselineKind;
    use crate::data::Stream;
    use crate::divergence::Divergence;

    #[test]
    fn euclidean_step_halves_the_gap() {
        let div = Divergence::squared_euclidean(2);
        let mut model =
            BaselineModel::new(BaselineKind::Svq, div, vec![vec![0.0, 0.0]]).unwrap();
        let w = svq_step(&mut model, &[2.0, 0.0], |_| 0.5).unwrap();
        assert_eq!(w, 0);
        assert_eq!(model.codebook[0], vec![1.0, 0.0]);
        assert_eq!(model.update_counts[0], 1);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let div = Divergence::squared_euclidean(1);
        let mut model = BaselineModel::new(
            BaselineKind::Svq,
            div,
            vec![vec![-1.0], vec![1.0]],
        )
        .unwrap();
        let w = svq_step(&mut model, &[0.0], |_| 0.1).unwrap();
        assert_eq!(w, 0);
    }

    #[test]
    fn harmonic_stepsize_reproduces_running_mean() {
        // With one codevector and alpha(v) = 1/(1+v) the recursion is the
        // running sample mean, bit-for-bit up to rounding.
        let div = Divergence::squared_euclidean(2);
        let ds = crate::data::gen_blobs(200, &[(vec![3.0, -1.0], 0)], 2.0, 8).unwrap();
        let mut model = BaselineModel::new(
            BaselineKind::Svq,
            div,
            vec![vec![0.0, 0.0]],
        )
        .unwrap();
        let mut mean = vec![0.0, 0.0];
        for (t, p) in ds.points.iter().enumerate() {
            svq_step(&mut model, p, |v| 1.0 / (1.0 + v as f64)).unwrap();
            for j in 0..2 {
                mean[j] += (p[j] - mean[j]) / (t as f64 + 1.0);
            }
        }
        for j in 0..2 {
            assert!((model.codebook[0][j] - mean[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn point_mass_converges_to_the_point() {
        let div = Divergence::squared_euclidean(2);
        let ds = crate::data::gen_blobs(4, &[(vec![1.5, -0.5], 0)], 0.0, 1).unwrap();
        let mut model =
            BaselineModel::new(BaselineKind::Svq, div, vec![vec![10.0, 10.0]]).unwrap();
        let mut stream = Stream::new(&ds, 3);
        svq_fit(&mut model, &mut stream, 1000).unwrap();
        assert!((model.codebook[0][0] - 1.5).abs() < 1e-3);
        assert!((model.codebook[0][1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn i_divergence_step_stays_positive() {
        let div = Divergence::generalized_i(1);
        let mut model =
            BaselineModel::new(BaselineKind::Svq, div, vec![vec![0.5]]).unwrap();
        // The preconditioned step (0.01 - 0.5)/0.5 overshoots below zero
        // without the floor.
        svq_step(&mut model, &[0.01], |_| 1.0).unwrap();
        assert!(model.codebook[0][0] > 0.0);
    }
}
