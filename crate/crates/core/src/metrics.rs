//! Evaluation metrics over trained models.

use crate::data::Dataset;
use crate::error::{OdaError, Result};

/// Hard-assigns a point to a codebook entry.
pub trait VectorQuantizer {
    /// Index of the nearest codevector and the attained divergence.
    fn quantize(&self, x: &[f64]) -> Result<(usize, f64)>;
}

/// Predicts a class label for a point.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> Result<usize>;
}

impl VectorQuantizer for crate::annealing::OdaModel {
    fn quantize(&self, x: &[f64]) -> Result<(usize, f64)> {
        crate::annealing::OdaModel::quantize(self, x)
    }
}

impl Classifier for crate::annealing::OdaModel {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        crate::annealing::OdaModel::predict(self, x)
    }
}

/// Mean divergence to the nearest codevector over the dataset.
pub fn avg_distortion<Q: VectorQuantizer + ?Sized>(model: &Q, ds: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for p in &ds.points {
        total += model.quantize(p)?.1;
    }
    Ok(total / ds.len() as f64)
}

/// Fraction of points whose prediction matches the label.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, ds: &Dataset) -> Result<f64> {
    let labels = ds.labels.as_ref().ok_or(OdaError::NotClassifier)?;
    let mut hits = 0usize;
    for (p, &l) in ds.points.iter().zip(labels) {
        if model.predict(p)? == l {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

/// Unweighted mean over classes of the per-class F1 score. A class that is
/// never predicted and never occurs contributes 0.
pub fn f1_macro<C: Classifier + ?Sized>(model: &C, ds: &Dataset) -> Result<f64> {
    let labels = ds.labels.as_ref().ok_or(OdaError::NotClassifier)?;
    let classes = &ds.class_set;
    let index_of = |c: usize| classes.iter().position(|&x| x == c);
    let k = classes.len();
    // confusion[actual][predicted]
    let mut confusion = vec![vec![0usize; k + 1]; k + 1];
    for (p, &l) in ds.points.iter().zip(labels) {
        let pred = model.predict(p)?;
        let li = index_of(l).unwrap_or(k);
        let pi = index_of(pred).unwrap_or(k);
        confusion[li][pi] += 1;
    }
    let mut f1_sum = 0.0;
    for c in 0..k {
        let tp = confusion[c][c];
        let fp: usize = (0..=k).filter(|&r| r != c).map(|r| confusion[r][c]).sum();
        let fnn: usize = (0..=k).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        let denom = 2 * tp + fp + fnn;
        if denom > 0 {
            f1_sum += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(f1_sum / k as f64)
}
