//! Datasets: synthetic generators, CSV ingestion, preprocessing, and
//! resampling for cross-validation.
//!
//! All generators are pure functions of their parameters and the RNG seed.

use std::io::Read;
use std::path::Path;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{OdaError, Result};

/// Labeled or unlabeled observations plus domain metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    /// One label per point when present; `None` for clustering data.
    pub labels: Option<Vec<usize>>,
    /// Dimension of every point.
    pub d: usize,
    /// Per-coordinate (min, max) over all points.
    pub bounding_box: Vec<(f64, f64)>,
    /// Sorted distinct labels; empty for unlabeled data.
    pub class_set: Vec<usize>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.is_empty() {
            return Err(OdaError::EmptyDataset);
        }
        let d = points[0].len();
        for p in &points {
            if p.len() != d {
                return Err(OdaError::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(OdaError::DimensionMismatch {
                    expected: points.len(),
                    got: l.len(),
                });
            }
        }
        let bounding_box = bounding_box(&points, d);
        let class_set = labels
            .as_ref()
            .map(|l| {
                let mut c: Vec<usize> = l.clone();
                c.sort_unstable();
                c.dedup();
                c
            })
            .unwrap_or_default();
        Ok(Dataset {
            points,
            labels,
            d,
            bounding_box,
            class_set,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, idx: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[idx])
    }

    /// Length of the largest edge of the bounding box.
    pub fn delta_s(&self) -> f64 {
        self.bounding_box
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    /// Per-point mean of the dataset.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for p in &self.points {
            for (a, &c) in m.iter_mut().zip(p) {
                *a += c;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Drop the labels, producing clustering data over the same points.
    pub fn unlabeled(&self) -> Dataset {
        let mut ds = self.clone();
        ds.labels = None;
        ds.class_set = Vec::new();
        ds
    }

    /// Shift every feature whose minimum is below `1e-6` so that its minimum
    /// becomes exactly `1e-6`. Features already strictly positive are left
    /// untouched. Required before using the generalized I-divergence on data
    /// that may contain zeros or negatives.
    pub fn positive_shift(&self) -> Dataset {
        const FLOOR: f64 = 1e-6;
        let mut out = self.clone();
        for j in 0..self.d {
            let (lo, _) = self.bounding_box[j];
            if lo < FLOOR {
                let shift = FLOOR - lo;
                for p in &mut out.points {
                    // Clamp: rounding in the addition must not dip below the floor.
                    p[j] = (p[j] + shift).max(FLOOR);
                }
            }
        }
        out.bounding_box = bounding_box(&out.points, out.d);
        out
    }

    /// Min-max scale every feature to [0, 1]. Constant features map to 0.
    pub fn min_max_scaled(&self) -> Dataset {
        let mut out = self.clone();
        for j in 0..self.d {
            let (lo, hi) = self.bounding_box[j];
            let span = hi - lo;
            for p in &mut out.points {
                p[j] = if span > 0.0 { (p[j] - lo) / span } else { 0.0 };
            }
        }
        out.bounding_box = bounding_box(&out.points, out.d);
        out
    }

    /// Seeded uniform draw of `m` rows without replacement.
    pub fn subsample(&self, m: usize, rng_seed: u64) -> Result<Dataset> {
        if m == 0 || m > self.len() {
            return Err(OdaError::TooFewSamples {
                needed: m,
                have: self.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut idx: Vec<usize> = (0..self.len()).collect();
        // Partial Fisher-Yates: the first m slots end up a uniform sample.
        for i in 0..m {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(m);
        self.select(&idx)
    }

    /// Build a dataset from a subset of row indices.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let points: Vec<Vec<f64>> = indices.iter().map(|&i| self.points[i].clone()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Dataset::new(points, labels)
    }
}

fn bounding_box(points: &[Vec<f64>], d: usize) -> Vec<(f64, f64)> {
    let mut bb = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for p in points {
        for (j, &c) in p.iter().enumerate() {
            if c < bb[j].0 {
                bb[j].0 = c;
            }
            if c > bb[j].1 {
                bb[j].1 = c;
            }
        }
    }
    bb
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

/// Two concentric rings (radii 1.0 and 0.5) with Gaussian radial noise.
/// Class 0 is the outer ring, class 1 the inner. `n` is split evenly,
/// the outer ring taking the extra point when `n` is odd.
pub fn gen_circles(n: usize, noise: f64, rng_seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(OdaError::TooFewSamples { needed: 2, have: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let radial = Normal::new(0.0, noise.max(0.0)).expect("valid stddev");
    let n_inner = n / 2;
    let n_outer = n - n_inner;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (count, radius, label) in [(n_outer, 1.0, 0usize), (n_inner, 0.5, 1usize)] {
        for _ in 0..count {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let r = radius + if noise > 0.0 { radial.sample(&mut rng) } else { 0.0 };
            points.push(vec![r * theta.cos(), r * theta.sin()]);
            labels.push(label);
        }
    }
    Dataset::new(points, Some(labels))
}

/// Two interleaved half-moons with isotropic Gaussian noise.
/// Class counts are balanced within one point.
pub fn gen_moons(n: usize, noise: f64, rng_seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(OdaError::TooFewSamples { needed: 2, have: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let jitter = Normal::new(0.0, noise.max(0.0)).expect("valid stddev");
    let n_lower = n / 2;
    let n_upper = n - n_lower;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n_upper {
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let (mut x, mut y) = (t.cos(), t.sin());
        if noise > 0.0 {
            x += jitter.sample(&mut rng);
            y += jitter.sample(&mut rng);
        }
        points.push(vec![x, y]);
        labels.push(0);
    }
    for _ in 0..n_lower {
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let (mut x, mut y) = (1.0 - t.cos(), 0.5 - t.sin());
        if noise > 0.0 {
            x += jitter.sample(&mut rng);
            y += jitter.sample(&mut rng);
        }
        points.push(vec![x, y]);
        labels.push(1);
    }
    Dataset::new(points, Some(labels))
}

/// Gaussian mixture: one isotropic blob of shared `spread` per center,
/// labeled with the class attached to that center. `n` is split across
/// centers as evenly as possible (earlier centers take the remainder).
pub fn gen_blobs(
    n: usize,
    centers: &[(Vec<f64>, usize)],
    spread: f64,
    rng_seed: u64,
) -> Result<Dataset> {
    if centers.is_empty() {
        return Err(OdaError::EmptyDataset);
    }
    if n < centers.len() {
        return Err(OdaError::TooFewSamples {
            needed: centers.len(),
            have: n,
        });
    }
    let d = centers[0].0.len();
    for (c, _) in centers {
        if c.len() != d {
            return Err(OdaError::DimensionMismatch {
                expected: d,
                got: c.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let jitter = Normal::new(0.0, spread.max(0.0)).expect("valid stddev");
    let base = n / centers.len();
    let extra = n % centers.len();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (k, (center, label)) in centers.iter().enumerate() {
        let count = base + usize::from(k < extra);
        for _ in 0..count {
            let p: Vec<f64> = center
                .iter()
                .map(|&c| c + if spread > 0.0 { jitter.sample(&mut rng) } else { 0.0 })
                .collect();
            points.push(p);
            labels.push(*label);
        }
    }
    Dataset::new(points, Some(labels))
}

/// Default Gaussian-mixture layout used by the benchmark harness:
/// four well-separated clusters carrying three classes (class 1 owns two).
pub fn gaussians_preset() -> Vec<(Vec<f64>, usize)> {
    vec![
        (vec![-6.0, -6.0], 0),
        (vec![-6.0, 6.0], 1),
        (vec![6.0, -6.0], 2),
        (vec![6.0, 6.0], 1),
    ]
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Which column carries the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    /// 0-based column index.
    Index(usize),
    /// The last column of each row.
    Last,
}

impl LabelColumn {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "last" {
            return Ok(LabelColumn::Last);
        }
        s.parse::<usize>()
            .map(LabelColumn::Index)
            .map_err(|_| OdaError::InvalidConfig {
                field: "label_column".into(),
                message: format!("expected a 0-based index or `last`, got `{s}`"),
            })
    }
}

/// Side information from a CSV load.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvReport {
    /// Rows dropped because a selected cell held a missing-value marker
    /// (`?`, empty, `NA`, `na`, `NaN`).
    pub rejected_rows: usize,
    /// Whether a non-numeric header row was detected and skipped.
    pub header_skipped: bool,
    /// Raw label values in sorted order, index = remapped label.
    pub raw_labels: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "NaN" | "nan")
}

/// Load a comma-separated numeric file.
///
/// A single header row is auto-detected (first row with any non-numeric,
/// non-missing cell) and skipped. Rows containing missing-value markers are
/// rejected and counted in the report. Any other non-numeric cell is a
/// [`OdaError::ParseError`] naming the line and column. Label values are
/// remapped to dense 0-based classes in sorted order of the raw value.
///
/// With `positive_shift`, features are shifted per [`Dataset::positive_shift`]
/// so the result is valid for the generalized I-divergence.
pub fn load_csv(
    path: &Path,
    label_column: Option<LabelColumn>,
    positive_shift: bool,
) -> Result<(Dataset, CsvReport)> {
    let mut file = std::fs::File::open(path)
        .map_err(|_| OdaError::FileNotFound(path.display().to_string()))?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    load_csv_str(&text, label_column, positive_shift)
}

/// [`load_csv`] over an in-memory string; used by tests and the CLI.
pub fn load_csv_str(
    text: &str,
    label_column: Option<LabelColumn>,
    positive_shift: bool,
) -> Result<(Dataset, CsvReport)> {
    let mut report = CsvReport::default();
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        rows.push((lineno + 1, trimmed.split(',').map(str::trim).collect()));
    }
    if rows.is_empty() {
        return Err(OdaError::EmptyDataset);
    }
    // Header detection: a first row with a cell that is neither numeric nor
    // a missing-value marker is treated as a header.
    let header = rows[0]
        .1
        .iter()
        .any(|c| !is_missing(c) && c.parse::<f64>().is_err());
    if header {
        report.header_skipped = true;
        rows.remove(0);
        if rows.is_empty() {
            return Err(OdaError::EmptyDataset);
        }
    }
    let width = rows[0].1.len();
    let label_idx = match label_column {
        Some(LabelColumn::Index(i)) => {
            if i >= width {
                return Err(OdaError::InvalidConfig {
                    field: "label_column".into(),
                    message: format!("index {i} out of range for {width}-column file"),
                });
            }
            Some(i)
        }
        Some(LabelColumn::Last) => Some(width - 1),
        None => None,
    };

    let mut points = Vec::with_capacity(rows.len());
    let mut raw_label_vals: Vec<f64> = Vec::new();
    'rows: for (lineno, cells) in &rows {
        if cells.len() != width {
            return Err(OdaError::ParseError {
                line: *lineno,
                column: cells.len(),
                message: format!("expected {width} columns, found {}", cells.len()),
            });
        }
        let mut feats = Vec::with_capacity(width - usize::from(label_idx.is_some()));
        let mut label_val = 0.0;
        for (col, cell) in cells.iter().enumerate() {
            if is_missing(cell) {
                report.rejected_rows += 1;
                continue 'rows;
            }
            let v: f64 = cell.parse().map_err(|_| OdaError::ParseError {
                line: *lineno,
                column: col,
                message: format!("non-numeric cell `{cell}`"),
            })?;
            if Some(col) == label_idx {
                label_val = v;
            } else {
                feats.push(v);
            }
        }
        points.push(feats);
        if label_idx.is_some() {
            raw_label_vals.push(label_val);
        }
    }
    if points.is_empty() {
        return Err(OdaError::EmptyDataset);
    }

    let labels = if label_idx.is_some() {
        let mut distinct: Vec<f64> = raw_label_vals.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
        distinct.dedup();
        report.raw_labels = distinct.iter().map(|v| format!("{v}")).collect();
        Some(
            raw_label_vals
                .iter()
                .map(|v| distinct.partition_point(|x| x < v))
                .collect(),
        )
    } else {
        None
    };

    let mut ds = Dataset::new(points, labels)?;
    if positive_shift {
        ds = ds.positive_shift();
    }
    Ok((ds, report))
}

/// Write a dataset as CSV with an `f0,f1,...[,label]` header.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = (0..ds.d).map(|j| format!("f{j}")).collect();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, p) in ds.points.iter().enumerate() {
        let mut cells: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
        if let Some(l) = &ds.labels {
            cells.push(format!("{}", l[i]));
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Disjoint, exhaustive k-fold index partitions. Labeled datasets are
/// stratified: each class is shuffled independently and dealt round-robin,
/// so per-fold class counts differ by at most one.
pub fn kfold(ds: &Dataset, k: usize, rng_seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(OdaError::InvalidConfig {
            field: "folds".into(),
            message: format!("need at least 2 folds, got {k}"),
        });
    }
    if ds.len() < k {
        return Err(OdaError::TooFewSamples {
            needed: k,
            have: ds.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut fold_of = vec![0usize; ds.len()];
    let groups: Vec<Vec<usize>> = match &ds.labels {
        Some(labels) => ds
            .class_set
            .iter()
            .map(|&c| {
                (0..ds.len())
                    .filter(|&i| labels[i] == c)
                    .collect::<Vec<_>>()
            })
            .collect(),
        None => vec![(0..ds.len()).collect()],
    };
    let mut next_fold = 0usize;
    for mut group in groups {
        // Fisher-Yates within the class, then deal round-robin continuing
        // from the previous class's cursor to keep fold sizes balanced.
        for i in (1..group.len()).rev() {
            let j = rng.random_range(0..=i);
            group.swap(i, j);
        }
        for idx in group {
            fold_of[idx] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    }
    let mut out = Vec::with_capacity(k);
    for f in 0..k {
        let test: Vec<usize> = (0..ds.len()).filter(|&i| fold_of[i] == f).collect();
        let train: Vec<usize> = (0..ds.len()).filter(|&i| fold_of[i] != f).collect();
        out.push((train, test));
    }
    Ok(out)
}

/// A source of i.i.d. training samples.
pub trait SampleSource {
    /// Draw the next sample: the point and its label, if any.
    fn draw(&mut self) -> (&[f64], Option<usize>);
}

/// Infinite shuffled-with-replacement sampler over a dataset.
pub struct Stream<'a> {
    dataset: &'a Dataset,
    indices: Option<&'a [usize]>,
    rng: ChaCha8Rng,
}

impl<'a> Stream<'a> {
    pub fn new(dataset: &'a Dataset, rng_seed: u64) -> Self {
        Stream {
            dataset,
            indices: None,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    /// Stream restricted to a subset of rows (e.g. a training fold).
    pub fn over_indices(dataset: &'a Dataset, indices: &'a [usize], rng_seed: u64) -> Self {
        Stream {
            dataset,
            indices: Some(indices),
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    fn next_row(&mut self) -> usize {
        match self.indices {
            Some(idx) => idx[self.rng.random_range(0..idx.len())],
            None => self.rng.random_range(0..self.dataset.len()),
        }
    }
}

impl<'a> SampleSource for Stream<'a> {
    fn draw(&mut self) -> (&[f64], Option<usize>) {
        let row = self.next_row();
        (&self.dataset.points[row], self.dataset.label(row))
    }
}
