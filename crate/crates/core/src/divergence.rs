//! Bregman divergences used as proximity measures.
//!
//! Two members of the family are provided: the squared Euclidean distance
//! (generator φ(x) = ⟨x, x⟩) and the generalized I-divergence
//! (generator φ(x) = ⟨x, log x⟩, defined on strictly positive vectors).
//! Both are nonnegative, vanish exactly on the diagonal, and are generally
//! asymmetric — callers must not assume d(x, y) = d(y, x).
//!
//! The key property shared by every Bregman divergence is that the weighted
//! mean of a point set is the unique minimizer of the weighted divergence
//! sum, regardless of the generator. [`Divergence::weighted_centroid`]
//! relies on this, which is what keeps the learners in this crate
//! gradient-free.

use serde::{Deserialize, Serialize};

use crate::error::{OdaError, Result};

/// Which generator function the divergence is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceKind {
    /// d(x, μ) = ‖x − μ‖².
    SquaredEuclidean,
    /// d(x, μ) = ⟨x, log x − log μ⟩ − ⟨1, x − μ⟩, on strictly positive vectors.
    GeneralizedIDivergence,
}

impl DivergenceKind {
    /// Canonical CLI / config-file name for this kind.
    pub fn name(&self) -> &'static str {
        match self {
            DivergenceKind::SquaredEuclidean => "euclidean",
            DivergenceKind::GeneralizedIDivergence => "i-divergence",
        }
    }

    /// Parse a CLI / config-file name (`euclidean` or `i-divergence`).
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(DivergenceKind::SquaredEuclidean),
            "i-divergence" => Ok(DivergenceKind::GeneralizedIDivergence),
            other => Err(OdaError::InvalidConfig {
                field: "divergence".into(),
                message: format!("unknown divergence `{other}` (expected `euclidean` or `i-divergence`)"),
            }),
        }
    }
}

/// A Bregman divergence over `dimension`-length vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub kind: DivergenceKind,
    pub dimension: usize,
}

impl Divergence {
    pub fn squared_euclidean(dimension: usize) -> Self {
        Divergence {
            kind: DivergenceKind::SquaredEuclidean,
            dimension,
        }
    }

    pub fn generalized_i(dimension: usize) -> Self {
        Divergence {
            kind: DivergenceKind::GeneralizedIDivergence,
            dimension,
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension {
            return Err(OdaError::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// True when `v` lies in the divergence's domain.
    pub fn in_domain(&self, v: &[f64]) -> bool {
        match self.kind {
            DivergenceKind::SquaredEuclidean => true,
            DivergenceKind::GeneralizedIDivergence => v.iter().all(|&c| c > 0.0),
        }
    }

    fn check_domain(&self, v: &[f64], role: &str) -> Result<()> {
        if !self.in_domain(v) {
            return Err(OdaError::DomainViolation(format!(
                "generalized I-divergence requires strictly positive coordinates; {role} has a nonpositive entry"
            )));
        }
        Ok(())
    }

    /// Evaluate d_φ(x, mu).
    ///
    /// No epsilon smoothing is applied: the I-divergence rejects nonpositive
    /// coordinates instead of clamping them, so callers own domain validity
    /// (see [`crate::data::Dataset::positive_shift`]).
    pub fn evaluate(&self, x: &[f64], mu: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        self.check_len(mu)?;
        match self.kind {
            DivergenceKind::SquaredEuclidean => Ok(x
                .iter()
                .zip(mu)
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum()),
            DivergenceKind::GeneralizedIDivergence => {
                self.check_domain(x, "x")?;
                self.check_domain(mu, "mu")?;
                let mut acc = 0.0;
                for (a, b) in x.iter().zip(mu) {
                    acc += a * (a.ln() - b.ln()) - (a - b);
                }
                // Rounding can push the exact zero slightly negative.
                Ok(acc.max(0.0))
            }
        }
    }

    /// Weighted centroid Σᵢ wᵢ xᵢ / Σᵢ wᵢ.
    ///
    /// For any Bregman divergence this is the unique minimizer of
    /// Σᵢ wᵢ d_φ(xᵢ, μ), so the result is independent of `kind`.
    pub fn weighted_centroid(&self, points: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
        if points.len() != weights.len() {
            return Err(OdaError::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(OdaError::ZeroMass);
        }
        let mut acc = vec![0.0; self.dimension];
        for (p, &w) in points.iter().zip(weights) {
            self.check_len(p)?;
            self.check_domain(p, "point")?;
            for (a, &c) in acc.iter_mut().zip(p) {
                *a += w * c;
            }
        }
        for a in &mut acc {
            *a /= total;
        }
        Ok(acc)
    }
}
