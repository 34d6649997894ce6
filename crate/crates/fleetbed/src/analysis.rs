//! Dataset-quality evaluation: class balance (dispersion index, relative
//! class deviation), consecutive-duplicate counting, binned distribution
//! comparison via R², and ordinary least squares for scaling measurements.

use crate::record::{CategoryGroup, DataCategory, Label, LogRecord};
use crate::record::{line_without_vtime, serialize_record};
use serde::Serialize;
use std::collections::BTreeMap;

/// Pixel edge of one position-heatmap cell.
pub const HEATMAP_CELL_PX: u32 = 20;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("input must contain at least one class count")]
    EmptyInput,
    #[error("class counts sum to zero, the dispersion index is undefined")]
    ZeroMean,
    #[error("baseline has zero variance, R² against it is undefined")]
    DegenerateBaseline,
    #[error("regression needs at least two distinct x values")]
    DegenerateInput,
}

/// Population variance of the class counts divided by their mean. Zero for
/// an exactly balanced dataset; grows with the square of the imbalance.
pub fn dispersion_index(class_counts: &[u64]) -> Result<f64, AnalysisError> {
    if class_counts.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let n = class_counts.len() as f64;
    let mean = class_counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(AnalysisError::ZeroMean);
    }
    let variance = class_counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(variance / mean)
}

/// Number of records whose content (everything except the timestamp)
/// bitwise-equals the immediately preceding record's content. Adjacency
/// only: identical records separated by anything else do not count.
pub fn duplicate_count<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> u64 {
    let mut duplicates = 0;
    let mut previous: Option<String> = None;
    for record in records {
        let line = serialize_record(record);
        let content = line_without_vtime(&line).to_owned();
        if previous.as_deref() == Some(content.as_str()) {
            duplicates += 1;
        }
        previous = Some(content);
    }
    duplicates
}

/// Relative frequencies over half-open bins `[k·w, (k+1)·w)`, keyed by the
/// bin index `k = ⌊v / w⌋`. Frequencies sum to 1 on non-empty input; an
/// empty input yields an empty map.
///
/// Panics if `bin_width` is not positive or a value is not finite.
pub fn histogram(values: &[f64], bin_width: f64) -> BTreeMap<i64, f64> {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &v in values {
        assert!(v.is_finite(), "histogram values must be finite, got {v}");
        *counts.entry((v / bin_width).floor() as i64).or_insert(0) += 1;
    }
    let total = values.len() as f64;
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total))
        .collect()
}

/// A relative-frequency grid over fixed-size position cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    cols: usize,
    rows: usize,
    cells: Vec<f64>,
}

impl Heatmap {
    /// Bin positions into `⌈width/cell⌉ × ⌈height/cell⌉` cells of
    /// [`HEATMAP_CELL_PX`] pixels. Positions on the far boundary fall into
    /// the last cell. Frequencies sum to 1 when any position was given.
    pub fn from_positions(
        positions: impl IntoIterator<Item = (f64, f64)>,
        width: u32,
        height: u32,
    ) -> Heatmap {
        let cols = width.div_ceil(HEATMAP_CELL_PX) as usize;
        let rows = height.div_ceil(HEATMAP_CELL_PX) as usize;
        let mut counts = vec![0u64; cols * rows];
        let mut total = 0u64;
        for (x, y) in positions {
            let col = ((x / HEATMAP_CELL_PX as f64).floor() as usize).min(cols - 1);
            let row = ((y / HEATMAP_CELL_PX as f64).floor() as usize).min(rows - 1);
            counts[row * cols + col] += 1;
            total += 1;
        }
        let denom = if total == 0 { 1 } else { total } as f64;
        Heatmap {
            cols,
            rows,
            cells: counts.into_iter().map(|c| c as f64 / denom).collect(),
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell(&self, col: usize, row: usize) -> f64 {
        self.cells[row * self.cols + col]
    }

    /// Row-major cell frequencies.
    pub fn frequencies(&self) -> &[f64] {
        &self.cells
    }

    /// One CSV line per grid row, cells comma-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|col| self.cell(col, row).to_string())
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Heatmap over the positions carried by position-bearing records
/// (scalar-generator records carry none and are skipped).
pub fn position_heatmap<'a>(
    records: impl IntoIterator<Item = &'a LogRecord>,
    width: u32,
    height: u32,
) -> Heatmap {
    Heatmap::from_positions(
        records
            .into_iter()
            .filter_map(|r| r.payload().position()),
        width,
        height,
    )
}

/// Coefficient of determination of `candidate` against `baseline`:
/// `1 − SS_res / SS_tot`, with the residuals taken between the two series
/// and the total sum of squares about the baseline mean. Equals 1 when the
/// series coincide; can be negative when the candidate fits worse than the
/// baseline's own mean.
///
/// Panics if the slices have different lengths.
pub fn r_squared(baseline: &[f64], candidate: &[f64]) -> Result<f64, AnalysisError> {
    assert_eq!(
        baseline.len(),
        candidate.len(),
        "series must have equal lengths"
    );
    let n = baseline.len() as f64;
    let mean = baseline.iter().sum::<f64>() / n;
    let ss_tot = baseline.iter().map(|b| (b - mean).powi(2)).sum::<f64>();
    if ss_tot == 0.0 {
        return Err(AnalysisError::DegenerateBaseline);
    }
    let ss_res = baseline
        .iter()
        .zip(candidate)
        .map(|(b, c)| (b - c).powi(2))
        .sum::<f64>();
    Ok(1.0 - ss_res / ss_tot)
}

/// [`r_squared`] over keyed frequency maps: the key sets are aligned first,
/// with bins missing on either side counted as 0.
pub fn r_squared_binned<K: Ord + Clone>(
    baseline: &BTreeMap<K, f64>,
    candidate: &BTreeMap<K, f64>,
) -> Result<f64, AnalysisError> {
    let keys: std::collections::BTreeSet<&K> = baseline.keys().chain(candidate.keys()).collect();
    let b: Vec<f64> = keys.iter().map(|k| *baseline.get(k).unwrap_or(&0.0)).collect();
    let c: Vec<f64> = keys.iter().map(|k| *candidate.get(k).unwrap_or(&0.0)).collect();
    r_squared(&b, &c)
}

/// An ordinary least squares line with its fit quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Mean squared residual of the fit.
    pub mse: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(xs, ys)`. Requires at least two distinct x
/// values. When all ys are equal the horizontal fit is exact and R² is 1.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, AnalysisError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(AnalysisError::DegenerateInput);
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx = xs.iter().map(|x| (x - x_mean).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateInput);
    }
    let sxy = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum::<f64>();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum::<f64>();
    let ss_tot = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        mse: ss_res / n,
        r_squared,
    })
}

/// Class balance and duplicate statistics for one slice of a log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceStats {
    pub element_count: u64,
    pub normal_count: u64,
    pub intrusion_count: u64,
    /// Population variance of the two class counts over their mean.
    pub dispersion_index: f64,
    /// `|normal − intrusion| / element_count`.
    pub relative_class_deviation: f64,
    pub duplicate_count: u64,
    /// `duplicate_count / element_count`.
    pub duplicate_rate: f64,
}

/// Per-group and per-category dataset quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub total_records: u64,
    pub groups: BTreeMap<CategoryGroup, BalanceStats>,
    pub categories: BTreeMap<DataCategory, BalanceStats>,
}

/// Streaming accumulator behind [`quality_report`]: feed records in log
/// order (duplicate detection is adjacency-based), then `finish`.
#[derive(Debug, Default)]
pub struct QualityScan {
    total: u64,
    counts: BTreeMap<DataCategory, (u64, u64, u64)>,
    previous_line: Option<String>,
}

impl QualityScan {
    pub fn new() -> QualityScan {
        QualityScan::default()
    }

    pub fn push(&mut self, record: &LogRecord) {
        self.total += 1;
        let entry = self.counts.entry(record.category()).or_insert((0, 0, 0));
        match record.label() {
            Label::Normal => entry.0 += 1,
            Label::Intrusion => entry.1 += 1,
        }
        let line = serialize_record(record);
        let content = line_without_vtime(&line).to_owned();
        if self.previous_line.as_deref() == Some(content.as_str()) {
            entry.2 += 1;
        }
        self.previous_line = Some(content);
    }

    pub fn finish(self) -> QualityReport {
        fn stats(normal: u64, intrusion: u64, duplicates: u64) -> BalanceStats {
            let total = normal + intrusion;
            BalanceStats {
                element_count: total,
                normal_count: normal,
                intrusion_count: intrusion,
                dispersion_index: dispersion_index(&[normal, intrusion])
                    .expect("non-empty class counts"),
                relative_class_deviation: normal.abs_diff(intrusion) as f64 / total as f64,
                duplicate_count: duplicates,
                duplicate_rate: duplicates as f64 / total as f64,
            }
        }
        let mut groups: BTreeMap<CategoryGroup, (u64, u64, u64)> = BTreeMap::new();
        for (category, &(n, i, d)) in &self.counts {
            let entry = groups.entry(category.group()).or_insert((0, 0, 0));
            entry.0 += n;
            entry.1 += i;
            entry.2 += d;
        }
        QualityReport {
            total_records: self.total,
            groups: groups
                .into_iter()
                .map(|(g, (n, i, d))| (g, stats(n, i, d)))
                .collect(),
            categories: self
                .counts
                .into_iter()
                .map(|(c, (n, i, d))| (c, stats(n, i, d)))
                .collect(),
        }
    }
}

/// Dataset quality of a record sequence in log order.
pub fn quality_report<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> QualityReport {
    let mut scan = QualityScan::new();
    for record in records {
        scan.push(record);
    }
    scan.finish()
}
