//! Reference algorithms the annealing learner is benchmarked against:
//! stochastic vector quantization, Lloyd's k-means, and offline (batch)
//! deterministic annealing. All share the divergence and dataset types.
//!
//! Classification with these codebooks goes through majority-vote labeling
//! ([`label_by_majority`]). The signed-distortion update rule that repels
//! the winner from wrong-class samples is deliberately not implemented; it
//! belongs to a fine-tuning stage this crate does not include.

mod batch_da;
mod kmeans;
mod svq;

pub use batch_da::{batch_da_fit, BatchDaOutcome, BatchLevelRecord};
pub use kmeans::{kmeans_fit, KMeansOutcome, Seeding};
pub use svq::{label_by_majority, svq_fit, svq_step, LabeledCodebook};

use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{OdaError, Result};
use crate::metrics::VectorQuantizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Svq,
    KMeans,
    BatchDa,
}

/// A plain codebook model with per-codevector update counters (used by sVQ).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub divergence: Divergence,
    pub codebook: Vec<Vec<f64>>,
    /// v(h): how many times codevector h has been updated.
    pub update_counts: Vec<u64>,
}

impl BaselineModel {
    pub fn new(kind: BaselineKind, divergence: Divergence, codebook: Vec<Vec<f64>>) -> Result<Self> {
        if codebook.is_empty() {
            return Err(OdaError::EmptySeeds);
        }
        for mu in &codebook {
            if mu.len() != divergence.dimension {
                return Err(OdaError::DimensionMismatch {
                    expected: divergence.dimension,
                    got: mu.len(),
                });
            }
            if !divergence.in_domain(mu) {
                return Err(OdaError::DomainViolation(
                    "codevector outside divergence domain".into(),
                ));
            }
        }
        let update_counts = vec![0; codebook.len()];
        Ok(BaselineModel {
            kind,
            divergence,
            codebook,
            update_counts,
        })
    }

    pub fn k(&self) -> usize {
        self.codebook.len()
    }

    /// Index of the divergence-nearest codevector; lowest index wins ties.
    pub fn nearest(&self, x: &[f64]) -> Result<(usize, f64)> {
        let mut best = (0usize, f64::INFINITY);
        for (h, mu) in self.codebook.iter().enumerate() {
            let d = self.divergence.evaluate(x, mu)?;
            if d < best.1 {
                best = (h, d);
            }
        }
        Ok(best)
    }
}

impl VectorQuantizer for BaselineModel {
    fn quantize(&self, x: &[f64]) -> Result<(usize, f64)> {
        self.nearest(x)
    }
}
