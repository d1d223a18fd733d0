//! The online annealing learner.
//!
//! Training interleaves two loops. The inner loop consumes one observation
//! at a time: every codevector's mass `rho` and weighted-position accumulator
//! `sigma` are folded toward the sample through a stochastic-approximation
//! step, and positions are recovered as `mu = sigma / rho` — no gradients of
//! the divergence are ever taken. The outer loop runs once the codebook has
//! stopped drifting: coincident codevectors are merged, starved ones removed,
//! the temperature is lowered geometrically, and every survivor is replaced
//! by a perturbed pair. Pairs re-merge at the next level unless a critical
//! temperature has been crossed, which is what grows the model only when the
//! data demands it.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annealing::config::{derive_seed, OdaConfig, TemperatureSchedule};
use crate::data::{Dataset, SampleSource};
use crate::divergence::DivergenceKind;
use crate::error::{OdaError, Result};
use crate::metrics;
use crate::report::{LevelRecord, RunReport, RunSummary, REPORT_FORMAT_VERSION};

/// Smallest coordinate a perturbed codevector may take under the
/// generalized I-divergence.
const POSITIVE_FLOOR: f64 = 1e-12;

/// One prototype: position, optional class, and SA accumulators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Codevector {
    pub mu: Vec<f64>,
    pub class_label: Option<usize>,
    /// SA estimate of the codevector's probability mass.
    pub rho: f64,
    /// SA estimate of mass-weighted position; `mu = sigma / rho`.
    pub sigma: Vec<f64>,
    /// Position at the last convergence snapshot.
    #[serde(skip)]
    pub prev_mu: Vec<f64>,
}

impl Codevector {
    fn seed(mu: Vec<f64>, class_label: Option<usize>) -> Self {
        let sigma = mu.clone();
        let prev_mu = mu.clone();
        Codevector {
            mu,
            class_label,
            rho: 1.0,
            sigma,
            prev_mu,
        }
    }
}

/// One stochastic-approximation step, folding a weighted membership into
/// the `(rho, sigma)` accumulators of a single codevector.
pub fn sa_update(rho: &mut f64, sigma: &mut [f64], x: &[f64], weighted_membership: f64, alpha: f64) {
    *rho += alpha * (weighted_membership - *rho);
    for (s, &xi) in sigma.iter_mut().zip(x) {
        *s += alpha * (weighted_membership * xi - *s);
    }
}

/// Stepsize for the n-th observation of a level (n starts at 1).
pub fn stepsize(config: &OdaConfig, n: usize) -> f64 {
    1.0 / (config.step_a + config.step_b * n as f64)
}

/// Snapshot of one effective codevector, taken after merge and idle
/// removal but before the next perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveCodevector {
    pub mu: Vec<f64>,
    pub class_label: Option<usize>,
    pub rho: f64,
}

/// What one `advance_level` call did.
#[derive(Debug, Clone)]
pub struct LevelTransition {
    /// Temperature at which the completed level ran.
    pub temperature: f64,
    pub k_effective: usize,
    pub effective: Vec<EffectiveCodevector>,
    /// The level hit the observation cap without meeting the drift test.
    pub forced_advance: bool,
    /// Whether survivors were perturbed into pairs for the next level.
    pub split_performed: bool,
}

/// Versioned on-disk form of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: OdaConfig,
    pub schedule: TemperatureSchedule,
    pub classes: Vec<usize>,
    pub class_counts: Vec<u64>,
    pub codebook: Vec<Codevector>,
    pub levels_done: usize,
    pub total_obs: u64,
    pub stopped: bool,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// The annealing state: codebook, temperature, and level bookkeeping.
///
/// A model is single-writer: `observe` and `advance_level` mutate state and
/// must be externally serialized. Clones are independent, and the read-only
/// operations (`membership`, `predict`, `quantize`) are safe to call
/// concurrently on a snapshot.
#[derive(Debug, Clone)]
pub struct OdaModel {
    pub codebook: Vec<Codevector>,
    pub schedule: TemperatureSchedule,
    pub config: OdaConfig,
    /// Sorted class labels; empty in clustering mode.
    pub classes: Vec<usize>,
    /// Observed samples per class, aligned with `classes`; estimates the
    /// class priors that turn conditional codevector masses into joint ones.
    pub class_counts: Vec<u64>,
    /// History of completed levels (structural fields; `fit` fills metrics).
    pub history: Vec<LevelRecord>,
    level_obs: usize,
    /// Next observation count at which `fit` tests convergence; doubles
    /// after every unconverged check.
    next_check: usize,
    /// Observation count at the last snapshot.
    window_start: usize,
    /// Largest single-observation codevector move since the last snapshot.
    window_peak_move: f64,
    levels_done: usize,
    total_obs: u64,
    stopped: bool,
}

impl OdaModel {
    /// Build a model from seed codevectors: exactly one per class in
    /// classification mode, at least one (unlabeled) in clustering mode.
    pub fn init(config: OdaConfig, seeds: &[(Vec<f64>, Option<usize>)]) -> Result<OdaModel> {
        config.validate()?;
        if seeds.is_empty() {
            return Err(OdaError::EmptySeeds);
        }
        let labeled = seeds[0].1.is_some();
        if seeds.iter().any(|(_, l)| l.is_some() != labeled) {
            return Err(OdaError::MixedSeedLabels);
        }
        let mut classes = Vec::new();
        for (mu, label) in seeds {
            if mu.len() != config.divergence.dimension {
                return Err(OdaError::DimensionMismatch {
                    expected: config.divergence.dimension,
                    got: mu.len(),
                });
            }
            if !config.divergence.in_domain(mu) {
                return Err(OdaError::DomainViolation(
                    "seed codevector outside divergence domain".into(),
                ));
            }
            if let Some(c) = label {
                if classes.contains(c) {
                    return Err(OdaError::DuplicateClassSeed(*c));
                }
                classes.push(*c);
            }
        }
        classes.sort_unstable();
        let codebook = seeds
            .iter()
            .map(|(mu, label)| Codevector::seed(mu.clone(), *label))
            .collect();
        let next_check = config.check_every;
        let class_counts = vec![0; classes.len()];
        Ok(OdaModel {
            codebook,
            schedule: config.schedule(),
            config,
            classes,
            class_counts,
            history: Vec::new(),
            level_obs: 0,
            next_check,
            window_start: 0,
            window_peak_move: 0.0,
            levels_done: 0,
            total_obs: 0,
            stopped: false,
        })
    }

    /// Convenience: one seed per class taken from the first occurrence in
    /// the dataset (classification), or the first point (clustering).
    pub fn seeds_from_dataset(ds: &Dataset) -> Vec<(Vec<f64>, Option<usize>)> {
        match &ds.labels {
            Some(labels) => ds
                .class_set
                .iter()
                .map(|&c| {
                    let i = labels.iter().position(|&l| l == c).expect("class present");
                    (ds.points[i].clone(), Some(c))
                })
                .collect(),
            None => vec![(ds.points[0].clone(), None)],
        }
    }

    pub fn is_classifier(&self) -> bool {
        !self.classes.is_empty()
    }

    pub fn k(&self) -> usize {
        self.codebook.len()
    }

    pub fn temperature(&self) -> f64 {
        self.schedule.current
    }

    pub fn levels_done(&self) -> usize {
        self.levels_done
    }

    pub fn total_observations(&self) -> u64 {
        self.total_obs
    }

    /// Annealing is over: capacity reached or schedule exhausted.
    pub fn finished(&self) -> bool {
        self.stopped || self.schedule.exhausted()
    }

    fn check_ready(&self) -> Result<()> {
        if self.codebook.is_empty() {
            return Err(OdaError::NotInitialized);
        }
        Ok(())
    }

    /// Estimated class prior for the codevector's class; uniform before any
    /// observation. Returns 1 for unlabeled codevectors (clustering).
    fn class_prior(&self, class_label: Option<usize>) -> f64 {
        match class_label {
            None => 1.0,
            Some(c) => {
                let total: u64 = self.class_counts.iter().sum();
                if total == 0 {
                    1.0 / self.classes.len() as f64
                } else {
                    let idx = self
                        .classes
                        .iter()
                        .position(|&x| x == c)
                        .expect("known class");
                    self.class_counts[idx] as f64 / total as f64
                }
            }
        }
    }

    /// Gibbs membership probabilities over the codebook, computed with a
    /// max-shift in the exponent so adding a constant to every distortion
    /// cannot change the result.
    ///
    /// With a label (classification training), the distribution runs over
    /// the codevectors of that class — codevectors of other classes take
    /// membership 0 and are excluded from the normalization, so each class
    /// learns the conditional density of its own samples. Without a label,
    /// the rho-weighted Gibbs distribution over the whole codebook is
    /// returned, with class priors folded into the weights; this is the
    /// prediction-side membership.
    pub fn membership(&self, x: &[f64], label: Option<usize>) -> Result<Vec<f64>> {
        self.check_ready()?;
        if let Some(l) = label {
            if !self.classes.contains(&l) {
                return Err(OdaError::UnknownLabel(l));
            }
        }
        let t = self.schedule.current;
        let mut weights = Vec::with_capacity(self.codebook.len());
        for cv in &self.codebook {
            let w = match (label, cv.class_label) {
                (Some(lx), Some(lc)) if lx != lc => f64::NEG_INFINITY,
                (Some(_), _) => cv.rho.ln() - self.config.divergence.evaluate(x, &cv.mu)? / t,
                (None, _) => {
                    (self.class_prior(cv.class_label) * cv.rho).ln()
                        - self.config.divergence.evaluate(x, &cv.mu)? / t
                }
            };
            weights.push(w);
        }
        let shift = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(OdaError::DomainViolation(
                "all codevector masses are zero".into(),
            ));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| (w - shift).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(probs)
    }

    /// Consume one observation. Every class-compatible codevector's
    /// accumulators are folded toward the sample, weighted by its membership;
    /// in classification mode, codevectors of a different class are left
    /// untouched by this sample. A codevector far from all data of its own
    /// class therefore receives only negligible memberships and its mass
    /// decays toward zero, which is what idle removal keys on.
    pub fn observe(&mut self, x: &[f64], label: Option<usize>) -> Result<()> {
        self.check_ready()?;
        let label = if self.is_classifier() {
            match label {
                Some(l) => Some(l),
                None => {
                    return Err(OdaError::DomainViolation(
                        "classification model requires a labeled sample".into(),
                    ))
                }
            }
        } else {
            None
        };
        let memberships = self.membership(x, label)?;
        if let Some(l) = label {
            let idx = self
                .classes
                .iter()
                .position(|&c| c == l)
                .expect("label validated by membership");
            self.class_counts[idx] += 1;
        }
        let n = self.level_obs + 1;
        let alpha = stepsize(&self.config, n);
        let eps_r = self.config.eps_r;
        let div = self.config.divergence;
        let mut peak = self.window_peak_move;
        let mut moved = Vec::new();
        for (cv, &p) in self.codebook.iter_mut().zip(&memberships) {
            if let (Some(lx), Some(lc)) = (label, cv.class_label) {
                if lx != lc {
                    continue;
                }
            }
            sa_update(&mut cv.rho, &mut cv.sigma, x, p, alpha);
            if cv.rho >= eps_r {
                moved.clear();
                moved.extend(cv.sigma.iter().map(|&s| s / cv.rho));
                let step = div.evaluate(&moved, &cv.mu)?;
                if step > peak {
                    peak = step;
                }
                cv.mu.copy_from_slice(&moved);
            }
        }
        self.window_peak_move = peak;
        self.level_obs = n;
        self.total_obs += 1;
        Ok(())
    }

    /// Drift test only: every codevector has moved less than `eps_c`
    /// (divergence from current to snapshotted position) since the last
    /// snapshot.
    fn drift_converged(&self) -> bool {
        self.codebook.iter().all(|cv| {
            self.config
                .divergence
                .evaluate(&cv.mu, &cv.prev_mu)
                .map(|d| d < self.config.eps_c)
                .unwrap_or(false)
        })
    }

    /// True when the codebook has stopped moving since the last snapshot,
    /// or the level's observation cap has been reached (forced advance).
    ///
    /// Two sufficient movement tests are accepted: the windowed drift of
    /// every codevector is below `eps_c`, or no single observation in the
    /// window moved any codevector by `eps_c` (the per-sample test applied
    /// across the whole window, which stays meaningful when estimator noise
    /// dominates windowed drift).
    pub fn converged(&self) -> bool {
        if self.level_obs >= self.config.max_obs_per_level {
            return true;
        }
        if self.drift_converged() {
            return true;
        }
        self.level_obs - self.window_start >= self.config.check_every
            && self.window_peak_move < self.config.eps_c
    }

    /// Snapshot current positions for the next convergence check.
    pub fn snapshot(&mut self) {
        for cv in &mut self.codebook {
            cv.prev_mu.clone_from(&cv.mu);
        }
        self.window_start = self.level_obs;
        self.window_peak_move = 0.0;
    }

    /// Close the current temperature level: merge coincident codevectors,
    /// drop idle ones, renormalize masses, lower the temperature, and (if
    /// capacity and schedule allow) perturb every survivor into offspring
    /// for the next level.
    pub fn advance_level(&mut self) -> Result<LevelTransition> {
        self.check_ready()?;
        if self.stopped {
            return Err(OdaError::CapacityReached(self.config.k_max));
        }
        if self.schedule.exhausted() {
            return Err(OdaError::ScheduleExhausted);
        }
        let settled = self.drift_converged()
            || (self.level_obs - self.window_start >= self.config.check_every
                && self.window_peak_move < self.config.eps_c);
        let forced_advance = self.level_obs >= self.config.max_obs_per_level && !settled;

        // Merge: the lower-index member of any coincident same-class pair
        // survives and absorbs the other's mass.
        let k = self.codebook.len();
        let mut alive = vec![true; k];
        for i in 0..k {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..k {
                if !alive[j] {
                    continue;
                }
                if self.codebook[i].class_label != self.codebook[j].class_label {
                    continue;
                }
                let d = self
                    .config
                    .divergence
                    .evaluate(&self.codebook[j].mu, &self.codebook[i].mu)?;
                if d < self.config.eps_n {
                    alive[j] = false;
                    self.codebook[i].rho += self.codebook[j].rho;
                }
            }
        }

        // Idle removal: drop starved codevectors, but never the last one of
        // a class (or the last one overall, in clustering mode).
        let groups: Vec<Option<usize>> = if self.classes.is_empty() {
            vec![None]
        } else {
            self.classes.iter().map(|&c| Some(c)).collect()
        };
        for group in groups {
            let members: Vec<usize> = (0..k)
                .filter(|&i| alive[i] && self.codebook[i].class_label == group)
                .collect();
            let starved: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| self.codebook[i].rho < self.config.eps_r)
                .collect();
            if starved.len() == members.len() {
                // Keep the heaviest (first at the max) and drop the rest.
                let keep = members
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        self.codebook[a]
                            .rho
                            .partial_cmp(&self.codebook[b].rho)
                            .expect("finite rho")
                            .then(b.cmp(&a))
                    })
                    .expect("group nonempty");
                for i in starved {
                    if i != keep {
                        alive[i] = false;
                    }
                }
            } else {
                for i in starved {
                    alive[i] = false;
                }
            }
        }

        let mut survivors: Vec<Codevector> = self
            .codebook
            .drain(..)
            .zip(alive)
            .filter_map(|(cv, keep)| keep.then_some(cv))
            .collect();

        // Renormalize masses within each class (or the single clustering
        // pool) and resynchronize accumulators to positions.
        let renorm_groups: Vec<Option<usize>> = if self.classes.is_empty() {
            vec![None]
        } else {
            self.classes.iter().map(|&c| Some(c)).collect()
        };
        for group in renorm_groups {
            let members: Vec<usize> = (0..survivors.len())
                .filter(|&i| survivors[i].class_label == group)
                .collect();
            if members.is_empty() {
                continue;
            }
            let total: f64 = members.iter().map(|&i| survivors[i].rho).sum();
            let uniform = 1.0 / members.len() as f64;
            for &i in &members {
                survivors[i].rho = if total > 0.0 {
                    survivors[i].rho / total
                } else {
                    uniform
                };
            }
        }
        for cv in &mut survivors {
            cv.sigma = cv.mu.iter().map(|&m| m * cv.rho).collect();
            cv.prev_mu.clone_from(&cv.mu);
        }

        let k_effective = survivors.len();
        let effective: Vec<EffectiveCodevector> = survivors
            .iter()
            .map(|cv| EffectiveCodevector {
                mu: cv.mu.clone(),
                class_label: cv.class_label,
                rho: cv.rho,
            })
            .collect();

        let temperature = self.schedule.current;
        self.schedule.lower();

        let at_capacity = k_effective >= self.config.k_max;
        let split_performed = !at_capacity && !self.schedule.exhausted();
        if split_performed {
            self.codebook = self.perturb(survivors);
        } else {
            self.codebook = survivors;
            if at_capacity {
                self.stopped = true;
            }
        }

        self.history.push(LevelRecord {
            temperature,
            k_effective,
            samples_seen_cumulative: self.total_obs,
            avg_distortion: None,
            accuracy: None,
            f1_macro: None,
            wall_time_ms: 0.0,
            forced_advance,
        });
        self.levels_done += 1;
        self.level_obs = 0;
        self.next_check = self.config.check_every;
        self.window_start = 0;
        self.window_peak_move = 0.0;

        Ok(LevelTransition {
            temperature,
            k_effective,
            effective,
            forced_advance,
            split_performed,
        })
    }

    /// Replace survivors by antipodal pairs offset by `delta` along fresh
    /// random unit directions; with `cross_class_split`, each splitting
    /// parent also spawns one perturbed child per other class. Children
    /// split the parent's mass equally, so mass is conserved per split.
    ///
    /// Growth is budgeted: at most `k_max - k_effective` parents split (the
    /// heaviest first), so the effective count can never overshoot `k_max`,
    /// and the transient codebook stays within `2 * k_max` entries.
    fn perturb(&mut self, survivors: Vec<Codevector>) -> Vec<Codevector> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.config.rng_seed,
            self.levels_done as u64,
        ));
        let dim = self.config.divergence.dimension;
        let delta = self.config.delta;
        let positive = self.config.divergence.kind == DivergenceKind::GeneralizedIDivergence;
        let cap = 2 * self.config.k_max;
        let cross = self.config.cross_class_split && self.classes.len() > 1;

        let split_budget = self.config.k_max.saturating_sub(survivors.len());
        let mut order: Vec<usize> = (0..survivors.len()).collect();
        order.sort_by(|&a, &b| {
            survivors[b]
                .rho
                .partial_cmp(&survivors[a].rho)
                .expect("finite rho")
                .then(a.cmp(&b))
        });
        let mut splits = vec![false; survivors.len()];
        for &i in order.iter().take(split_budget) {
            splits[i] = true;
        }

        let child = |parent: &Codevector, dir: &[f64], sign: f64, class: Option<usize>, mass: f64| {
            let mut mu: Vec<f64> = parent
                .mu
                .iter()
                .zip(dir)
                .map(|(&m, &u)| m + sign * delta * u)
                .collect();
            if positive {
                mu.iter_mut().for_each(|c| *c = c.max(POSITIVE_FLOOR));
            }
            let sigma = mu.iter().map(|&m| m * mass).collect();
            let prev_mu = mu.clone();
            Codevector {
                mu,
                class_label: class,
                rho: mass,
                sigma,
                prev_mu,
            }
        };

        let mut next = Vec::with_capacity(2 * survivors.len());
        for (pi, parent) in survivors.iter().enumerate() {
            if !splits[pi] {
                next.push(parent.clone());
                continue;
            }
            let others: Vec<usize> = if cross {
                self.classes
                    .iter()
                    .copied()
                    .filter(|&c| Some(c) != parent.class_label)
                    .collect()
            } else {
                Vec::new()
            };
            let full_litter = 2 + others.len();
            // Parents not yet emitted are owed at least one slot each.
            let reserved: usize = (pi + 1..survivors.len())
                .map(|j| if splits[j] { 2 } else { 1 })
                .sum();
            let litter = if next.len() + full_litter + reserved <= cap {
                full_litter
            } else {
                2
            };
            let mass = parent.rho / litter as f64;
            let dir = random_unit_vector(&mut rng, dim);
            next.push(child(parent, &dir, 1.0, parent.class_label, mass));
            next.push(child(parent, &dir, -1.0, parent.class_label, mass));
            if litter > 2 {
                for &c in &others {
                    let dir = random_unit_vector(&mut rng, dim);
                    next.push(child(parent, &dir, 1.0, Some(c), mass));
                }
            }
        }
        next
    }

    /// Run the full annealing loop over a sample source. When an evaluation
    /// dataset is supplied, per-level distortion (and accuracy / macro-F1
    /// for labeled data on a classifier) are recorded in the report.
    pub fn fit<S: SampleSource>(
        &mut self,
        source: &mut S,
        eval: Option<&Dataset>,
    ) -> Result<RunReport> {
        self.check_ready()?;
        let run_start = Instant::now();
        while !self.finished() {
            let level_start = Instant::now();
            loop {
                let (x, label) = source.draw();
                // In clustering mode labels on the stream are ignored.
                let label = if self.is_classifier() { label } else { None };
                self.observe(x, label)?;
                if self.level_obs >= self.next_check
                    || self.level_obs >= self.config.max_obs_per_level
                {
                    if self.converged() {
                        break;
                    }
                    self.snapshot();
                    self.next_check = self.level_obs.saturating_mul(2);
                }
            }
            self.advance_level()?;
            let wall_ms = level_start.elapsed().as_secs_f64() * 1e3;
            let mut avg_distortion = None;
            let mut accuracy = None;
            let mut f1 = None;
            if let Some(ds) = eval {
                avg_distortion = Some(metrics::avg_distortion(self, ds)?);
                if self.is_classifier() && ds.labels.is_some() {
                    accuracy = Some(metrics::accuracy(self, ds)?);
                    f1 = Some(metrics::f1_macro(self, ds)?);
                }
            }
            let record = self.history.last_mut().expect("level just recorded");
            record.wall_time_ms = wall_ms;
            record.avg_distortion = avg_distortion;
            record.accuracy = accuracy;
            record.f1_macro = f1;
        }
        let last = self.history.last();
        let summary = RunSummary {
            final_k: self.codebook.len(),
            final_temperature: self.schedule.current,
            total_samples: self.total_obs,
            final_distortion: last.and_then(|l| l.avg_distortion),
            final_accuracy: last.and_then(|l| l.accuracy),
            final_f1_macro: last.and_then(|l| l.f1_macro),
            total_wall_ms: run_start.elapsed().as_secs_f64() * 1e3,
        };
        Ok(RunReport {
            format_version: REPORT_FORMAT_VERSION,
            config: self.config.clone(),
            rng_seed: self.config.rng_seed,
            levels: self.history.clone(),
            summary,
        })
    }

    /// Class of the codevector with the largest unconditioned Gibbs
    /// membership; ties break to the lowest codevector index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if !self.is_classifier() {
            return Err(OdaError::NotClassifier);
        }
        let probs = self.membership(x, None)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok(self.codebook[best].class_label.expect("classifier codebook"))
    }

    /// Hard assignment: index of the divergence-nearest codevector and the
    /// attained divergence. Ties break to the lowest index.
    pub fn quantize(&self, x: &[f64]) -> Result<(usize, f64)> {
        self.check_ready()?;
        let mut best = (0usize, f64::INFINITY);
        for (i, cv) in self.codebook.iter().enumerate() {
            let d = self.config.divergence.evaluate(x, &cv.mu)?;
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }

    // -- persistence ---------------------------------------------------------

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            schedule: self.schedule.clone(),
            classes: self.classes.clone(),
            class_counts: self.class_counts.clone(),
            codebook: self.codebook.clone(),
            levels_done: self.levels_done,
            total_obs: self.total_obs,
            stopped: self.stopped,
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<OdaModel> {
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(OdaError::InvalidConfig {
                field: "format_version".into(),
                message: format!(
                    "unsupported model format {} (supported: {})",
                    file.format_version, MODEL_FORMAT_VERSION
                ),
            });
        }
        let mut codebook = file.codebook;
        for cv in &mut codebook {
            cv.prev_mu.clone_from(&cv.mu);
        }
        let next_check = file.config.check_every;
        if file.class_counts.len() != file.classes.len() {
            return Err(OdaError::InvalidConfig {
                field: "class_counts".into(),
                message: "must align with classes".into(),
            });
        }
        Ok(OdaModel {
            codebook,
            schedule: file.schedule,
            config: file.config,
            classes: file.classes,
            class_counts: file.class_counts,
            history: Vec::new(),
            level_obs: 0,
            next_check,
            window_start: 0,
            window_peak_move: 0.0,
            levels_done: file.levels_done,
            total_obs: file.total_obs,
            stopped: file.stopped,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_model_file())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<OdaModel> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| OdaError::FileNotFound(path.display().to_string()))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        OdaModel::from_model_file(file)
    }
}

fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, Stream};
    use crate::divergence::Divergence;

    fn config2d(delta_s: f64) -> OdaConfig {
        OdaConfig::defaults(Divergence::squared_euclidean(2), delta_s)
    }

    #[test]
    fn init_single_clustering_seed() {
        let model = OdaModel::init(config2d(1.0), &[(vec![0.0, 0.0], None)]).unwrap();
        assert_eq!(model.k(), 1);
        assert_eq!(model.temperature(), model.config.t_max);
        assert_eq!(model.codebook[0].rho, 1.0);
        assert_eq!(model.codebook[0].sigma, vec![0.0, 0.0]);
        assert!(!model.is_classifier());
    }

    #[test]
    fn init_one_codevector_per_class() {
        let seeds = vec![
            (vec![0.0, 0.0], Some(2)),
            (vec![1.0, 0.0], Some(0)),
            (vec![2.0, 0.0], Some(1)),
        ];
        let model = OdaModel::init(config2d(1.0), &seeds).unwrap();
        assert_eq!(model.k(), 3);
        assert_eq!(model.classes, vec![0, 1, 2]);
        assert!(model.is_classifier());
    }

    #[test]
    fn init_rejects_bad_seeds() {
        assert!(matches!(
            OdaModel::init(config2d(1.0), &[]),
            Err(OdaError::EmptySeeds)
        ));
        assert!(matches!(
            OdaModel::init(
                config2d(1.0),
                &[(vec![0.0, 0.0], Some(1)), (vec![1.0, 1.0], Some(1))]
            ),
            Err(OdaError::DuplicateClassSeed(1))
        ));
        assert!(matches!(
            OdaModel::init(
                config2d(1.0),
                &[(vec![0.0, 0.0], Some(1)), (vec![1.0, 1.0], None)]
            ),
            Err(OdaError::MixedSeedLabels)
        ));
        let idiv = OdaConfig::defaults(Divergence::generalized_i(2), 1.0);
        assert!(matches!(
            OdaModel::init(idiv, &[(vec![0.0, 1.0], None)]),
            Err(OdaError::DomainViolation(_))
        ));
    }

    #[test]
    fn membership_single_codevector() {
        let model = OdaModel::init(config2d(1.0), &[(vec![0.0, 0.0], None)]).unwrap();
        assert_eq!(model.membership(&[0.3, 0.4], None).unwrap(), vec![1.0]);
    }

    #[test]
    fn membership_matches_hand_computed_gibbs() {
        // Two codevectors at squared distances 1 and 3 from x, equal rho,
        // T = 1: p = (e^-1, e^-3) normalized.
        let mut cfg = config2d(1.0);
        cfg.t_max = 1.0;
        cfg.t_min = 1e-6;
        let seeds = vec![
            (vec![1.0, 0.0], None),
            (vec![3.0f64.sqrt(), 0.0], None),
        ];
        let model = OdaModel::init(cfg, &seeds).unwrap();
        let p = model.membership(&[0.0, 0.0], None).unwrap();
        assert!((p[0] - 0.8807970779778823).abs() < 1e-12, "p0 = {}", p[0]);
        assert!((p[1] - 0.11920292202211755).abs() < 1e-12, "p1 = {}", p[1]);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn membership_uniform_at_huge_temperature() {
        let mut cfg = config2d(1.0);
        cfg.t_max = 1e9;
        cfg.t_min = 1.0;
        let seeds = vec![
            (vec![0.1, 0.2], None),
            (vec![0.9, 0.4], None),
            (vec![0.5, 0.8], None),
        ];
        let model = OdaModel::init(cfg, &seeds).unwrap();
        let p = model.membership(&[0.4, 0.4], None).unwrap();
        for &pi in &p {
            assert!((pi - 1.0 / 3.0).abs() < 1e-6, "memberships {p:?}");
        }
    }

    #[test]
    fn membership_shift_invariance_via_extra_dimension() {
        // Appending a coordinate that adds a constant to every distortion
        // must leave memberships unchanged: exactly what the max-shift
        // guarantees.
        let mut cfg = config2d(1.0);
        cfg.t_max = 2.0;
        cfg.t_min = 1e-6;
        let seeds2 = vec![(vec![1.0, 0.0], None), (vec![0.0, 2.0], None)];
        let model2 = OdaModel::init(cfg, &seeds2).unwrap();
        let p2 = model2.membership(&[0.2, 0.3], None).unwrap();

        let mut cfg3 = OdaConfig::defaults(Divergence::squared_euclidean(3), 1.0);
        cfg3.t_max = 2.0;
        cfg3.t_min = 1e-6;
        let shift = 7.5f64;
        let seeds3 = vec![
            (vec![1.0, 0.0, shift.sqrt()], None),
            (vec![0.0, 2.0, shift.sqrt()], None),
        ];
        let model3 = OdaModel::init(cfg3, &seeds3).unwrap();
        let p3 = model3.membership(&[0.2, 0.3, 0.0], None).unwrap();
        for (a, b) in p2.iter().zip(&p3) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_unknown_label_rejected() {
        let seeds = vec![(vec![0.0, 0.0], Some(0)), (vec![1.0, 1.0], Some(1))];
        let model = OdaModel::init(config2d(1.0), &seeds).unwrap();
        assert!(matches!(
            model.membership(&[0.0, 0.0], Some(7)),
            Err(OdaError::UnknownLabel(7))
        ));
    }

    #[test]
    fn membership_masks_other_classes() {
        let seeds = vec![(vec![0.0, 0.0], Some(0)), (vec![0.1, 0.0], Some(1))];
        let model = OdaModel::init(config2d(1.0), &seeds).unwrap();
        let p = model.membership(&[0.05, 0.0], Some(0)).unwrap();
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observe_point_mass_fixed_point() {
        let mut model = OdaModel::init(config2d(1.0), &[(vec![5.0, -3.0], None)]).unwrap();
        for _ in 0..8000 {
            model.observe(&[1.0, 2.0], None).unwrap();
        }
        assert!((model.codebook[0].mu[0] - 1.0).abs() < 1e-3);
        assert!((model.codebook[0].mu[1] - 2.0).abs() < 1e-3);
        assert!((model.codebook[0].rho - 1.0).abs() < 1e-3);
    }

    #[test]
    fn observe_requires_label_in_classification() {
        let seeds = vec![(vec![0.0, 0.0], Some(0)), (vec![1.0, 1.0], Some(1))];
        let mut model = OdaModel::init(config2d(1.0), &seeds).unwrap();
        assert!(model.observe(&[0.5, 0.5], None).is_err());
        assert!(model.observe(&[0.5, 0.5], Some(0)).is_ok());
    }

    #[test]
    fn observe_leaves_other_classes_untouched() {
        let seeds = vec![(vec![0.0, 0.0], Some(0)), (vec![1.0, 1.0], Some(1))];
        let mut model = OdaModel::init(config2d(1.0), &seeds).unwrap();
        let before = model.codebook[1].clone();
        model.observe(&[0.2, 0.1], Some(0)).unwrap();
        assert_eq!(model.codebook[1].mu, before.mu);
        assert_eq!(model.codebook[1].rho, before.rho);
        assert_eq!(model.codebook[1].sigma, before.sigma);
        // The same-class codevector did move toward the sample.
        assert_ne!(model.codebook[0].mu, vec![0.0, 0.0]);
    }

    #[test]
    fn misplaced_codevector_mass_decays() {
        // A codevector far from all data of its own class receives only
        // negligible membership, so its mass shrinks toward removal.
        let mut cfg = config2d(1.0);
        cfg.t_max = 0.05;
        cfg.t_min = 0.04;
        let seeds = vec![(vec![0.0, 0.0], Some(0)), (vec![9.0, 9.0], Some(1))];
        let mut model = OdaModel::init(cfg, &seeds).unwrap();
        // Push a second class-0 codevector out into class-1 territory.
        let mut far = model.codebook[0].clone();
        far.mu = vec![9.0, 9.0];
        far.sigma = vec![9.0, 9.0];
        far.prev_mu = vec![9.0, 9.0];
        model.codebook.push(far);
        for _ in 0..4000 {
            model.observe(&[0.0, 0.0], Some(0)).unwrap();
            model.observe(&[9.0, 9.0], Some(1)).unwrap();
        }
        // One level of decay; full removal below eps_r spans a few levels
        // because the stepsize restarts at each one.
        assert!(
            model.codebook[2].rho < 0.01,
            "misplaced rho = {}",
            model.codebook[2].rho
        );
        assert!(model.codebook[0].rho > 0.5);
    }

    #[test]
    fn converged_trivially_after_snapshot() {
        let mut model = OdaModel::init(config2d(1.0), &[(vec![0.0, 0.0], None)]).unwrap();
        model.observe(&[0.4, 0.4], None).unwrap();
        model.snapshot();
        assert!(model.converged());
    }

    #[test]
    fn converged_false_after_large_move() {
        let mut model = OdaModel::init(config2d(1.0), &[(vec![0.0, 0.0], None)]).unwrap();
        model.snapshot();
        model.observe(&[5.0, 5.0], None).unwrap();
        assert!(!model.converged());
    }

    #[test]
    fn forced_advance_at_observation_cap() {
        let mut cfg = config2d(1.0);
        cfg.max_obs_per_level = 50;
        let mut model = OdaModel::init(cfg, &[(vec![0.0, 0.0], None)]).unwrap();
        let mut step = 0.0;
        for _ in 0..50 {
            // Keep it moving so the drift test cannot pass.
            step += 1.0;
            model.observe(&[step, -step], None).unwrap();
            model.snapshot();
            model.observe(&[-step, step], None).unwrap();
        }
        assert!(model.converged());
        let t = model.advance_level().unwrap();
        assert!(t.forced_advance);
        assert!(model.history.last().unwrap().forced_advance);
    }

    #[test]
    fn advance_merges_coincident_codevectors() {
        let mut cfg = config2d(1.0);
        cfg.eps_n = 0.01;
        let mut model = OdaModel::init(cfg, &[(vec![0.5, 0.5], None)]).unwrap();
        let mut twin = model.codebook[0].clone();
        twin.rho = 0.25;
        twin.sigma = vec![0.5 * 0.25, 0.5 * 0.25];
        model.codebook.push(twin);
        model.codebook[0].rho = 0.75;
        model.codebook[0].sigma = vec![0.5 * 0.75, 0.5 * 0.75];
        model.observe(&[0.5, 0.5], None).unwrap();
        let t = model.advance_level().unwrap();
        assert_eq!(t.k_effective, 1);
        // Survivor takes the absorbed mass, then renormalizes to 1.
        assert!((t.effective[0].rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advance_removes_idle_but_keeps_last_of_class() {
        let mut cfg = config2d(1.0);
        cfg.eps_n = 1e-9;
        let seeds = vec![(vec![0.0, 0.0], Some(0)), (vec![5.0, 5.0], Some(1))];
        let mut model = OdaModel::init(cfg, &seeds).unwrap();
        // Second class-0 codevector with starved mass.
        let mut starved = model.codebook[0].clone();
        starved.mu = vec![1.0, 1.0];
        starved.rho = 1e-9;
        model.codebook.push(starved);
        // Class-1 codevector is starved too, but is the last of its class.
        model.codebook[1].rho = 1e-9;
        model.observe(&[0.0, 0.0], Some(0)).unwrap();
        let t = model.advance_level().unwrap();
        assert_eq!(t.k_effective, 2);
        let classes: Vec<Option<usize>> =
            t.effective.iter().map(|cv| cv.class_label).collect();
        assert!(classes.contains(&Some(0)));
        assert!(classes.contains(&Some(1)));
    }

    #[test]
    fn advance_lowers_temperature_geometrically() {
        let mut cfg = config2d(1.0);
        cfg.t_max = 10.0;
        cfg.t_min = 0.1;
        cfg.gamma = 0.8;
        let mut model = OdaModel::init(cfg, &[(vec![0.0, 0.0], None)]).unwrap();
        model.observe(&[0.0, 0.0], None).unwrap();
        model.advance_level().unwrap();
        assert!((model.temperature() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn advance_errors_at_capacity() {
        let mut cfg = config2d(1.0);
        cfg.k_max = 1;
        let mut model = OdaModel::init(cfg, &[(vec![0.0, 0.0], None)]).unwrap();
        model.observe(&[0.1, 0.1], None).unwrap();
        let t = model.advance_level().unwrap();
        assert!(!t.split_performed);
        assert!(model.finished());
        assert!(matches!(
            model.advance_level(),
            Err(OdaError::CapacityReached(1))
        ));
    }

    #[test]
    fn advance_errors_when_schedule_exhausted() {
        let mut cfg = config2d(1.0);
        cfg.t_max = 1.0;
        cfg.t_min = 0.9;
        let mut model = OdaModel::init(cfg, &[(vec![0.0, 0.0], None)]).unwrap();
        model.observe(&[0.0, 0.0], None).unwrap();
        model.advance_level().unwrap();
        assert!(model.schedule.exhausted());
        assert!(matches!(
            model.advance_level(),
            Err(OdaError::ScheduleExhausted)
        ));
    }

    #[test]
    fn merge_soundness_after_advance() {
        // Surviving pairs are at least eps_n apart, in the stated argument
        // order d(mu_j, mu_i) for i < j.
        let ds = gen_blobs(
            400,
            &[(vec![-4.0, 0.0], 0), (vec![4.0, 0.0], 0)],
            0.6,
            3,
        )
        .unwrap()
        .unlabeled();
        let mut cfg = config2d(ds.delta_s());
        cfg.rng_seed = 5;
        let mut model = OdaModel::init(cfg.clone(), &[(ds.points[0].clone(), None)]).unwrap();
        let mut stream = Stream::new(&ds, 11);
        for _ in 0..12 {
            if model.finished() {
                break;
            }
            loop {
                let (x, _) = stream.draw();
                let x = x.to_vec();
                model.observe(&x, None).unwrap();
                if model.level_obs >= model.next_check {
                    if model.converged() {
                        break;
                    }
                    model.snapshot();
                    model.next_check *= 2;
                }
                if model.level_obs >= cfg.max_obs_per_level {
                    break;
                }
            }
            let t = model.advance_level().unwrap();
            for i in 0..t.effective.len() {
                for j in (i + 1)..t.effective.len() {
                    let d = cfg
                        .divergence
                        .evaluate(&t.effective[j].mu, &t.effective[i].mu)
                        .unwrap();
                    assert!(d >= cfg.eps_n, "pair ({i},{j}) at {d} < {}", cfg.eps_n);
                }
            }
            assert!(model.k() <= 2 * cfg.k_max);
        }
    }

    #[test]
    fn predict_class_of_nearest_and_tie_break() {
        let mut cfg = config2d(1.0);
        cfg.t_max = 0.5;
        cfg.t_min = 0.01;
        let seeds = vec![(vec![0.0, 0.0], Some(3)), (vec![4.0, 0.0], Some(8))];
        let model = OdaModel::init(cfg, &seeds).unwrap();
        assert_eq!(model.predict(&[0.1, 0.0]).unwrap(), 3);
        assert_eq!(model.predict(&[3.9, 0.0]).unwrap(), 8);
        // Equidistant with equal rho: lowest codevector index wins.
        assert_eq!(model.predict(&[2.0, 0.0]).unwrap(), 3);
    }

    #[test]
    fn predict_rejects_clustering_model() {
        let model = OdaModel::init(config2d(1.0), &[(vec![0.0, 0.0], None)]).unwrap();
        assert!(matches!(
            model.predict(&[0.0, 0.0]),
            Err(OdaError::NotClassifier)
        ));
    }

    #[test]
    fn quantize_exact_hit_and_oracle() {
        use rand::RngExt;
        use rand::SeedableRng;
        let seeds: Vec<(Vec<f64>, Option<usize>)> = (0..5)
            .map(|i| (vec![i as f64, (i * i) as f64 / 4.0], None))
            .collect();
        let model = OdaModel::init(config2d(5.0), &seeds).unwrap();
        let (idx, d) = model.quantize(&model.codebook[3].mu.clone()).unwrap();
        assert_eq!((idx, d), (3, 0.0));
        // Independent linear scan over random queries.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let x = vec![rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0];
            let (idx, d) = model.quantize(&x).unwrap();
            let mut best = (0usize, f64::INFINITY);
            for (i, cv) in model.codebook.iter().enumerate() {
                let di: f64 = x
                    .iter()
                    .zip(&cv.mu)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if di < best.1 {
                    best = (i, di);
                }
            }
            assert_eq!(idx, best.0);
            assert!((d - best.1).abs() < 1e-12);
        }
    }

    #[test]
    fn quantize_single_codevector() {
        let model = OdaModel::init(config2d(1.0), &[(vec![1.0, 1.0], None)]).unwrap();
        let (idx, d) = model.quantize(&[0.0, 0.0]).unwrap();
        assert_eq!(idx, 0);
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn persistence_roundtrip_value_exact() {
        let ds = gen_blobs(
            200,
            &[(vec![-2.0, 0.0], 0), (vec![2.0, 0.5], 1)],
            0.4,
            21,
        )
        .unwrap();
        let mut cfg = config2d(ds.delta_s());
        cfg.rng_seed = 77;
        cfg.max_obs_per_level = 2000;
        let mut model = OdaModel::init(cfg, &OdaModel::seeds_from_dataset(&ds)).unwrap();
        let mut stream = Stream::new(&ds, 5);
        model.fit(&mut stream, None).unwrap();

        let dir = std::env::temp_dir().join("oda_model_roundtrip_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        model.save(&path).unwrap();
        let loaded = OdaModel::load(&path).unwrap();

        assert_eq!(model.codebook.len(), loaded.codebook.len());
        for (a, b) in model.codebook.iter().zip(&loaded.codebook) {
            assert_eq!(a.mu, b.mu);
            assert_eq!(a.sigma, b.sigma);
            assert_eq!(a.rho, b.rho);
            assert_eq!(a.class_label, b.class_label);
        }
        assert_eq!(model.schedule.current, loaded.schedule.current);
        assert_eq!(model.classes, loaded.classes);
        assert_eq!(model.class_counts, loaded.class_counts);
        for p in &ds.points {
            assert_eq!(model.predict(p).unwrap(), loaded.predict(p).unwrap());
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn fit_deterministic_under_seeds() {
        let ds = gen_blobs(
            150,
            &[(vec![-2.0, 0.0], 0), (vec![2.0, 0.5], 1)],
            0.4,
            9,
        )
        .unwrap();
        let run = || {
            let mut cfg = config2d(ds.delta_s());
            cfg.rng_seed = 13;
            cfg.max_obs_per_level = 1500;
            let mut model = OdaModel::init(cfg, &OdaModel::seeds_from_dataset(&ds)).unwrap();
            let mut stream = Stream::new(&ds, 31);
            model.fit(&mut stream, Some(&ds)).unwrap()
        };
        let report = run();
        report.check_invariants().unwrap();
        let a = serde_json::to_string(&report.normalized()).unwrap();
        let b = serde_json::to_string(&run().normalized()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stepsize_schedule_values() {
        let cfg = config2d(1.0);
        assert!((stepsize(&cfg, 1) - 1.0 / 1.9).abs() < 1e-15);
        assert!((stepsize(&cfg, 10) - 1.0 / 10.0).abs() < 1e-15);
    }
}
