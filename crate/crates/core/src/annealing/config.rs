//! Learner configuration and the temperature schedule.

use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{OdaError, Result};

/// Geometric temperature descent from `t_max` to `t_min`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub t_max: f64,
    pub t_min: f64,
    /// Descent factor in (0, 1).
    pub gamma: f64,
    /// Current temperature, always in [t_min, t_max].
    pub current: f64,
}

impl TemperatureSchedule {
    pub fn new(t_max: f64, t_min: f64, gamma: f64) -> Self {
        TemperatureSchedule {
            t_max,
            t_min,
            gamma,
            current: t_max,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.current <= self.t_min
    }

    /// One geometric step, clamped at `t_min`.
    pub fn lower(&mut self) -> f64 {
        self.current = (self.current * self.gamma).max(self.t_min);
        self.current
    }
}

/// Full parameter set for one online annealing run.
///
/// The `defaults` constructor scales every threshold by `delta_s * d`,
/// where `delta_s` is the largest edge of the data bounding box, so a
/// single parameterization transfers across datasets without tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdaConfig {
    pub divergence: Divergence,
    /// Effective-codevector budget; growth stops once reached.
    pub k_max: usize,
    pub t_max: f64,
    pub t_min: f64,
    pub gamma: f64,
    /// Convergence threshold on per-codevector drift (divergence units).
    pub eps_c: f64,
    /// Merge threshold: pairs closer than this coalesce (divergence units).
    pub eps_n: f64,
    /// Idle threshold: codevectors with mass below this are removed.
    pub eps_r: f64,
    /// Perturbation offset length applied when a level splits.
    pub delta: f64,
    /// Stepsize is 1 / (step_a + step_b * n) at the n-th observation of a level.
    pub step_a: f64,
    pub step_b: f64,
    /// Forced-advance cap on observations per temperature level.
    pub max_obs_per_level: usize,
    /// First convergence checkpoint of a level; later checkpoints double
    /// (100, 200, 400, ...). Under 1/(a + b*n) stepsizes a geometric grid
    /// keeps the integrated stepsize per window constant, so the drift test
    /// measures distance from the fixed point rather than stepsize decay.
    pub check_every: usize,
    /// In classification mode, also spawn one perturbed child per other
    /// class at each split. Off by default: colonization of a class's data
    /// already happens through its own codevectors at high temperature,
    /// while foreign children spawned at low temperature stall between
    /// regions and inflate the codebook.
    pub cross_class_split: bool,
    /// Seed for perturbation directions; level k uses a generator derived
    /// from (rng_seed, k), so resumed runs perturb identically.
    pub rng_seed: u64,
}

impl OdaConfig {
    /// Default parameterization: thresholds and temperatures scaled by
    /// `delta_s * d`. Matches the values shipped with the CLI.
    pub fn defaults(divergence: Divergence, delta_s: f64) -> Self {
        let scale = delta_s * divergence.dimension as f64;
        OdaConfig {
            divergence,
            k_max: 100,
            t_max: 100.0 * scale,
            t_min: 0.001 * scale,
            gamma: 0.8,
            eps_c: 0.0001 * scale,
            eps_n: 0.001 * scale,
            eps_r: 1e-7,
            delta: 0.01 * scale,
            step_a: 1.0,
            step_b: 0.9,
            max_obs_per_level: 10_000,
            check_every: 100,
            cross_class_split: false,
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    /// Validate hard constraints; returns soft warnings on success.
    pub fn validate(&self) -> Result<Vec<String>> {
        fn bad(field: &str, message: String) -> OdaError {
            OdaError::InvalidConfig {
                field: field.into(),
                message,
            }
        }
        if self.divergence.dimension == 0 {
            return Err(bad("divergence.dimension", "must be positive".into()));
        }
        if self.k_max == 0 {
            return Err(bad("k_max", "must be positive".into()));
        }
        if !(self.t_max > 0.0) || !(self.t_min > 0.0) {
            return Err(bad("t_max/t_min", "temperatures must be positive".into()));
        }
        if self.t_min >= self.t_max {
            return Err(bad(
                "t_min",
                format!("t_min ({}) must be below t_max ({})", self.t_min, self.t_max),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(bad("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        for (name, v) in [
            ("eps_c", self.eps_c),
            ("eps_n", self.eps_n),
            ("eps_r", self.eps_r),
            ("delta", self.delta),
            ("step_a", self.step_a),
            ("step_b", self.step_b),
        ] {
            if !(v > 0.0) {
                return Err(bad(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_obs_per_level == 0 {
            return Err(bad("max_obs_per_level", "must be positive".into()));
        }
        if self.check_every == 0 {
            return Err(bad("check_every", "must be positive".into()));
        }
        let mut warnings = Vec::new();
        if self.eps_r >= 0.01 {
            warnings.push(format!(
                "eps_r = {} is large; idle removal expects a value near zero",
                self.eps_r
            ));
        }
        if self.delta > self.eps_n {
            warnings.push(format!(
                "delta ({}) exceeds eps_n ({}); re-merges rely on within-level contraction",
                self.delta, self.eps_n
            ));
        }
        Ok(warnings)
    }

    pub fn schedule(&self) -> TemperatureSchedule {
        TemperatureSchedule::new(self.t_max, self.t_min, self.gamma)
    }
}

/// Stable seed derivation for sub-streams (folds, levels). SplitMix64 over
/// the pair, so results do not depend on platform hashers.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
