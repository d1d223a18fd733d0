//! Run reports: one record per temperature level plus a final summary.

use serde::{Deserialize, Serialize};

use crate::annealing::OdaConfig;
use crate::error::Result;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Metrics trace for one temperature level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    /// Temperature at which the level's inner optimization ran.
    pub temperature: f64,
    /// Effective codevectors after merging and idle removal.
    pub k_effective: usize,
    /// Total observations consumed so far, across all levels.
    pub samples_seen_cumulative: u64,
    pub avg_distortion: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1_macro: Option<f64>,
    pub wall_time_ms: f64,
    /// The level hit the per-level observation cap before converging.
    pub forced_advance: bool,
}

/// End-of-run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_k: usize,
    pub final_temperature: f64,
    pub total_samples: u64,
    pub final_distortion: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub final_f1_macro: Option<f64>,
    pub total_wall_ms: f64,
}

/// Full trace of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config: OdaConfig,
    /// Seed of the sample stream / fold that produced this run.
    pub rng_seed: u64,
    pub levels: Vec<LevelRecord>,
    pub summary: RunSummary,
}

impl RunReport {
    /// Clone with wall-clock fields zeroed. Two runs with identical seeds
    /// and streams serialize to identical bytes after normalization; wall
    /// times are the only machine-dependent fields.
    pub fn normalized(&self) -> RunReport {
        let mut out = self.clone();
        for l in &mut out.levels {
            l.wall_time_ms = 0.0;
        }
        out.summary.total_wall_ms = 0.0;
        out
    }

    /// Structural invariants: cumulative samples strictly increase and
    /// temperature strictly decreases across level records.
    pub fn check_invariants(&self) -> Result<()> {
        for w in self.levels.windows(2) {
            if w[1].samples_seen_cumulative <= w[0].samples_seen_cumulative {
                return Err(crate::error::OdaError::InvalidConfig {
                    field: "report.levels".into(),
                    message: "cumulative samples must strictly increase".into(),
                });
            }
            if w[1].temperature >= w[0].temperature {
                return Err(crate::error::OdaError::InvalidConfig {
                    field: "report.levels".into(),
                    message: "temperature must strictly decrease".into(),
                });
            }
        }
        Ok(())
    }

    /// Line-delimited JSON: a header line, one line per level, a summary line.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            kind: &'static str,
            format_version: u32,
            rng_seed: u64,
            config: &'a OdaConfig,
        }
        #[derive(Serialize)]
        struct Level<'a> {
            kind: &'static str,
            #[serde(flatten)]
            record: &'a LevelRecord,
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            kind: &'static str,
            #[serde(flatten)]
            summary: &'a RunSummary,
        }
        writeln!(
            w,
            "{}",
            serde_json::to_string(&Header {
                kind: "header",
                format_version: self.format_version,
                rng_seed: self.rng_seed,
                config: &self.config,
            })?
        )?;
        for record in &self.levels {
            writeln!(
                w,
                "{}",
                serde_json::to_string(&Level {
                    kind: "level",
                    record
                })?
            )?;
        }
        writeln!(
            w,
            "{}",
            serde_json::to_string(&Summary {
                kind: "summary",
                summary: &self.summary,
            })?
        )?;
        Ok(())
    }
}
