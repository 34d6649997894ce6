//! A baseline one-class detector and its scoring harness.
//!
//! The detector learns a closed interval `[q_lo, q_hi]` of empirical
//! quantiles from normal-only training values and flags everything strictly
//! outside it. It is deliberately simple — its job is to make detection
//! *difficulty* measurable, not to compete with real intrusion detection:
//! the difficulty-gap experiment shows that easy intrusions are always
//! caught while hard ones slip inside the learned interval.

use crate::record::{DataCategory, Label, LogRecord};
use crate::sim2d::{color_distance, LEGAL_COLORS, LEGAL_POI_TYPES};
use serde::Serialize;

/// Default training tail fraction: the learned interval spans the central
/// 99.8% of the training data, mirroring the construction the intrusion
/// formulas are based on.
pub const DEFAULT_ALPHA: f64 = 0.001;
/// Tail fraction used by the difficulty-gap experiment. The wider interval
/// separates the levels: easy off-values (5 spans out) stay far outside it,
/// hard off-values (0.1% beyond the 99.8% edge) fall inside and are missed.
pub const GAP_ALPHA: f64 = 1e-4;
/// Minimum number of training values.
pub const MIN_TRAINING_VALUES: usize = 100;
/// A recall difference of at least this many percentage points counts as a
/// significant detectability gap between difficulty levels.
pub const GAP_THRESHOLD_POINTS: f64 = 5.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DetectorError {
    #[error("training needs at least {MIN_TRAINING_VALUES} values, got {0}")]
    InsufficientData(usize),
    #[error("alpha must lie strictly between 0 and 0.5, got {0}")]
    InvalidAlpha(f64),
    #[error("interval bounds are not ordered finite numbers: [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("verdicts and labels differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// One-class interval detector over a scalar feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalDetector {
    q_lo: f64,
    q_hi: f64,
    alpha: f64,
}

/// Linearly interpolated empirical quantile of an ascending-sorted slice.
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl IntervalDetector {
    /// Learn the interval `[quantile(alpha), quantile(1 − alpha)]` from
    /// training values (normal-only in the intended one-class setting).
    pub fn train(values: &[f64], alpha: f64) -> Result<IntervalDetector, DetectorError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(DetectorError::InvalidAlpha(alpha));
        }
        if values.len() < MIN_TRAINING_VALUES {
            return Err(DetectorError::InsufficientData(values.len()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(IntervalDetector {
            q_lo: empirical_quantile(&sorted, alpha),
            q_hi: empirical_quantile(&sorted, 1.0 - alpha),
            alpha,
        })
    }

    /// Rebuild a detector from persisted bounds (e.g. a saved model file).
    pub fn from_interval(
        q_lo: f64,
        q_hi: f64,
        alpha: f64,
    ) -> Result<IntervalDetector, DetectorError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(DetectorError::InvalidAlpha(alpha));
        }
        if !(q_lo.is_finite() && q_hi.is_finite() && q_lo <= q_hi) {
            return Err(DetectorError::InvalidInterval(q_lo, q_hi));
        }
        Ok(IntervalDetector { q_lo, q_hi, alpha })
    }

    /// Intrusion iff the value lies strictly outside the closed learned
    /// interval; values on the boundary are normal.
    pub fn classify(&self, value: f64) -> Label {
        if value < self.q_lo || value > self.q_hi {
            Label::Intrusion
        } else {
            Label::Normal
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.q_lo, self.q_hi)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Confusion counts and derived metrics of one evaluation. Positives are
/// intrusion-labeled records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
    /// TP / (TP + FP); 0 when no positives were predicted (see
    /// `precision_defined`).
    pub precision: f64,
    /// TP / (TP + FN); 0 when no positives exist (see `recall_defined`).
    pub recall: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

impl ScoreReport {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Confusion counts of predicted verdicts against ground-truth labels.
/// Undefined ratios (no predicted or no actual positives) are reported as 0
/// with the corresponding `*_defined` flag cleared.
pub fn score(verdicts: &[Label], labels: &[Label]) -> Result<ScoreReport, DetectorError> {
    if verdicts.len() != labels.len() {
        return Err(DetectorError::LengthMismatch(verdicts.len(), labels.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&verdict, &label) in verdicts.iter().zip(labels) {
        match (verdict, label) {
            (Label::Intrusion, Label::Intrusion) => tp += 1,
            (Label::Intrusion, Label::Normal) => fp += 1,
            (Label::Normal, Label::Normal) => tn += 1,
            (Label::Normal, Label::Intrusion) => fn_ += 1,
        }
    }
    let precision_defined = tp + fp > 0;
    let recall_defined = tp + fn_ > 0;
    Ok(ScoreReport {
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        precision: if precision_defined {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        },
        recall: if recall_defined {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        },
        precision_defined,
        recall_defined,
    })
}

/// The scalar feature the detector sees for a record. Scalar generators pass
/// their value through; the positional and color categories are mapped to
/// numbers that separate their compromised variants:
///
/// * Color: distance to the nearest legal background color (0 for legal
///   readings).
/// * POI: legal-type membership (1 for a legal type, 0 otherwise).
/// * Route: Euclidean distance from position to target (0 for the
///   compromised stand-still variant).
/// * Country code: how far the claimed position lies outside the
///   `width × height` environment (0 when inside).
pub fn feature(record: &LogRecord, width: u32, height: u32) -> f64 {
    payload_feature(record.payload(), width, height)
}

/// [`feature`] for a bare payload (the view a live detector gets).
pub fn payload_feature(payload: &crate::record::Payload, width: u32, height: u32) -> f64 {
    use crate::record::Payload;
    match payload {
        Payload::Value { value } => *value,
        Payload::ColorReading { color, .. } => LEGAL_COLORS
            .iter()
            .map(|&legal| color_distance(*color, legal))
            .fold(f64::INFINITY, f64::min),
        Payload::Poi { poi_type, .. } => {
            if LEGAL_POI_TYPES.contains(&poi_type.as_str()) {
                1.0
            } else {
                0.0
            }
        }
        Payload::Route {
            x,
            y,
            target_x,
            target_y,
        } => (target_x - x).hypot(target_y - y),
        Payload::CountryCode { x, y, .. } => {
            let excess_x = (-x).max(x - width as f64).max(0.0);
            let excess_y = (-y).max(y - height as f64).max(0.0);
            excess_x.max(excess_y)
        }
    }
}

/// Mean detection quality over several independently generated record sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelOutcome {
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub sets: Vec<ScoreReport>,
}

/// Outcome of the two-level difficulty experiment for one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub category: DataCategory,
    pub easy: LevelOutcome,
    pub hard: LevelOutcome,
    /// `mean_recall(easy) − mean_recall(hard)`, in percentage points.
    pub recall_gap_points: f64,
    /// `mean_precision(easy) − mean_precision(hard)`, in percentage points.
    pub precision_gap_points: f64,
    /// Whether the absolute recall gap reaches [`GAP_THRESHOLD_POINTS`].
    pub significant: bool,
}

/// Train on the normal-labeled records of `category` within one set and
/// score the detector over all records of that category.
pub fn evaluate_set(
    records: &[LogRecord],
    category: DataCategory,
    width: u32,
    height: u32,
    alpha: f64,
) -> Result<ScoreReport, DetectorError> {
    let mut training = Vec::new();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in records {
        if record.category() != category {
            continue;
        }
        let value = feature(record, width, height);
        if record.label() == Label::Normal {
            training.push(value);
        }
        features.push(value);
        labels.push(record.label());
    }
    let detector = IntervalDetector::train(&training, alpha)?;
    let verdicts: Vec<Label> = features.iter().map(|&v| detector.classify(v)).collect();
    score(&verdicts, &labels)
}

/// Evaluate each set independently and average the per-set metrics.
pub fn evaluate_sets(
    sets: &[Vec<LogRecord>],
    category: DataCategory,
    width: u32,
    height: u32,
    alpha: f64,
) -> Result<LevelOutcome, DetectorError> {
    let reports: Vec<ScoreReport> = sets
        .iter()
        .map(|set| evaluate_set(set, category, width, height, alpha))
        .collect::<Result<_, _>>()?;
    let n = reports.len() as f64;
    Ok(LevelOutcome {
        mean_precision: reports.iter().map(|r| r.precision).sum::<f64>() / n,
        mean_recall: reports.iter().map(|r| r.recall).sum::<f64>() / n,
        sets: reports,
    })
}

/// The difficulty-gap experiment over pre-generated record sets: per level,
/// train on each set's normal records and evaluate on the full set, then
/// compare the level means. A recall difference of at least
/// [`GAP_THRESHOLD_POINTS`] percentage points is flagged as significant.
pub fn difficulty_gap_experiment(
    category: DataCategory,
    easy_sets: &[Vec<LogRecord>],
    hard_sets: &[Vec<LogRecord>],
    width: u32,
    height: u32,
    alpha: f64,
) -> Result<GapReport, DetectorError> {
    let easy = evaluate_sets(easy_sets, category, width, height, alpha)?;
    let hard = evaluate_sets(hard_sets, category, width, height, alpha)?;
    let recall_gap_points = (easy.mean_recall - hard.mean_recall) * 100.0;
    let precision_gap_points = (easy.mean_precision - hard.mean_precision) * 100.0;
    Ok(GapReport {
        category,
        easy,
        hard,
        recall_gap_points,
        precision_gap_points,
        significant: recall_gap_points.abs() >= GAP_THRESHOLD_POINTS,
    })
}
