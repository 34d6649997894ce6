//! Canonical log record: the unit of data every other module produces or
//! consumes.
//!
//! A log file is UTF-8, one record per line, tab-separated fields in fixed
//! order:
//!
//! ```text
//! vtime \t client_id \t category \t payload \t label
//! ```
//!
//! * `vtime` — virtual timestamp in milliseconds (unsigned integer).
//! * `client_id` — non-empty token of `[A-Za-z0-9_-]`.
//! * `category` — lowercase category name, see [`DataCategory`].
//! * `payload` — comma-separated values in the category's schema order.
//!   Floats use Rust's shortest round-trip formatting, so
//!   `parse(serialize(r)) == r` holds bitwise.
//! * `label` — `normal` or `intrusion`.
//!
//! String payload fields (country codes, POI types/results) are tokens of
//! `[A-Za-z0-9_.-]`, which keeps the format unambiguous without quoting.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Ground-truth class assigned at injection time. Detectors never see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Intrusion,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Intrusion => "intrusion",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "normal" => Some(Label::Normal),
            "intrusion" => Some(Label::Intrusion),
            _ => None,
        }
    }
}

/// Intrusion difficulty. Every injected anomaly is parameterized by one of
/// these three levels; `factor` is the multiplier applied to the interval
/// spans when constructing off-values and significant errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyLevel {
    Easy,
    Medium,
    Hard,
}

impl DifficultyLevel {
    pub const ALL: [DifficultyLevel; 3] = [
        DifficultyLevel::Easy,
        DifficultyLevel::Medium,
        DifficultyLevel::Hard,
    ];

    /// Span multiplier for generator intrusions: 5 / 1.5 / 1.001.
    pub fn factor(self) -> f64 {
        match self {
            DifficultyLevel::Easy => 5.0,
            DifficultyLevel::Medium => 1.5,
            DifficultyLevel::Hard => 1.001,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLevel::Easy => "easy",
            DifficultyLevel::Medium => "medium",
            DifficultyLevel::Hard => "hard",
        }
    }
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// RGB color triple as read from a simulated 2D environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

/// The fourteen data categories a client can emit: ten scalar generators plus
/// the four streams of the 2D vehicle simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataCategory {
    Gaussian,
    Gumbel,
    Laplace,
    Logistic,
    VonMises,
    Pareto,
    Rayleigh,
    Uniform,
    Wald,
    Weibull,
    Color,
    CountryCode,
    Poi,
    Route,
}

/// Coarse grouping used by dataset-quality reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoryGroup {
    Generators,
    Positional,
    Color,
}

impl CategoryGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            CategoryGroup::Generators => "generators",
            CategoryGroup::Positional => "positional",
            CategoryGroup::Color => "color",
        }
    }
}

impl DataCategory {
    pub const ALL: [DataCategory; 14] = [
        DataCategory::Gaussian,
        DataCategory::Gumbel,
        DataCategory::Laplace,
        DataCategory::Logistic,
        DataCategory::VonMises,
        DataCategory::Pareto,
        DataCategory::Rayleigh,
        DataCategory::Uniform,
        DataCategory::Wald,
        DataCategory::Weibull,
        DataCategory::Color,
        DataCategory::CountryCode,
        DataCategory::Poi,
        DataCategory::Route,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataCategory::Gaussian => "gaussian",
            DataCategory::Gumbel => "gumbel",
            DataCategory::Laplace => "laplace",
            DataCategory::Logistic => "logistic",
            DataCategory::VonMises => "vonmises",
            DataCategory::Pareto => "pareto",
            DataCategory::Rayleigh => "rayleigh",
            DataCategory::Uniform => "uniform",
            DataCategory::Wald => "wald",
            DataCategory::Weibull => "weibull",
            DataCategory::Color => "color",
            DataCategory::CountryCode => "countrycode",
            DataCategory::Poi => "poi",
            DataCategory::Route => "route",
        }
    }

    pub fn parse(s: &str) -> Option<DataCategory> {
        DataCategory::ALL.iter().copied().find(|c| c.as_str() == s)
    }

    /// True for the ten scalar distribution generators.
    pub fn is_generator(self) -> bool {
        matches!(self.group(), CategoryGroup::Generators)
    }

    pub fn group(self) -> CategoryGroup {
        match self {
            DataCategory::Color => CategoryGroup::Color,
            DataCategory::CountryCode | DataCategory::Poi | DataCategory::Route => {
                CategoryGroup::Positional
            }
            _ => CategoryGroup::Generators,
        }
    }
}

impl fmt::Display for DataCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Category-specific record payload.
///
/// Schema per category (field order is the serialization order):
///
/// * generators — `value`
/// * `color` — `x, y, r, g, b`
/// * `countrycode` — `x, y, code`
/// * `poi` — `x, y, type, result`
/// * `route` — `x, y, target_x, target_y`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Value {
        value: f64,
    },
    ColorReading {
        x: f64,
        y: f64,
        color: Rgb,
    },
    CountryCode {
        x: f64,
        y: f64,
        code: String,
    },
    Poi {
        x: f64,
        y: f64,
        poi_type: String,
        result: String,
    },
    Route {
        x: f64,
        y: f64,
        target_x: f64,
        target_y: f64,
    },
}

impl Payload {
    /// Whether this payload has the shape `category` requires.
    pub fn matches(&self, category: DataCategory) -> bool {
        match self {
            Payload::Value { .. } => category.is_generator(),
            Payload::ColorReading { .. } => category == DataCategory::Color,
            Payload::CountryCode { .. } => category == DataCategory::CountryCode,
            Payload::Poi { .. } => category == DataCategory::Poi,
            Payload::Route { .. } => category == DataCategory::Route,
        }
    }

    /// Position carried by the payload, if the category has one.
    pub fn position(&self) -> Option<(f64, f64)> {
        match *self {
            Payload::Value { .. } => None,
            Payload::ColorReading { x, y, .. }
            | Payload::CountryCode { x, y, .. }
            | Payload::Poi { x, y, .. }
            | Payload::Route { x, y, .. } => Some((x, y)),
        }
    }

    fn write_fields(&self, out: &mut String) {
        use fmt::Write;
        match self {
            Payload::Value { value } => {
                let _ = write!(out, "{value}");
            }
            Payload::ColorReading { x, y, color } => {
                let _ = write!(out, "{x},{y},{},{},{}", color.0, color.1, color.2);
            }
            Payload::CountryCode { x, y, code } => {
                let _ = write!(out, "{x},{y},{code}");
            }
            Payload::Poi {
                x,
                y,
                poi_type,
                result,
            } => {
                let _ = write!(out, "{x},{y},{poi_type},{result}");
            }
            Payload::Route {
                x,
                y,
                target_x,
                target_y,
            } => {
                let _ = write!(out, "{x},{y},{target_x},{target_y}");
            }
        }
    }
}

/// One timestamped, labeled record. Construct through [`LogRecord::new`] so
/// the category/payload schema invariant holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    vtime: u64,
    client_id: String,
    category: DataCategory,
    payload: Payload,
    label: Label,
}

/// Errors raised by record construction and parsing.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RecordError {
    /// Line does not lex as a record: wrong field count, bad number, unknown
    /// category/label, or an invalid token.
    #[error("malformed record: {reason}")]
    Malformed { reason: String },
    /// Line lexes, but the payload does not fit the category's schema.
    #[error("payload does not match schema of category `{category}`: {reason}")]
    SchemaMismatch {
        category: DataCategory,
        reason: String,
    },
}

fn malformed(reason: impl Into<String>) -> RecordError {
    RecordError::Malformed {
        reason: reason.into(),
    }
}

/// True for identifier tokens allowed in `client_id`.
pub fn is_valid_client_id(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn is_valid_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || b == b'.')
}

fn check_finite(fields: &[(&str, f64)]) -> Result<(), RecordError> {
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(malformed(format!("non-finite value in field `{name}`")));
        }
    }
    Ok(())
}

impl LogRecord {
    pub fn new(
        vtime: u64,
        client_id: impl Into<String>,
        category: DataCategory,
        payload: Payload,
        label: Label,
    ) -> Result<LogRecord, RecordError> {
        let client_id = client_id.into();
        if !is_valid_client_id(&client_id) {
            return Err(malformed(format!("invalid client id `{client_id}`")));
        }
        if !payload.matches(category) {
            return Err(RecordError::SchemaMismatch {
                category,
                reason: "payload variant does not belong to this category".into(),
            });
        }
        match &payload {
            Payload::Value { value } => check_finite(&[("value", *value)])?,
            Payload::ColorReading { x, y, .. } => check_finite(&[("x", *x), ("y", *y)])?,
            Payload::CountryCode { x, y, code } => {
                check_finite(&[("x", *x), ("y", *y)])?;
                if !is_valid_token(code) {
                    return Err(malformed(format!("invalid code token `{code}`")));
                }
            }
            Payload::Poi {
                x,
                y,
                poi_type,
                result,
            } => {
                check_finite(&[("x", *x), ("y", *y)])?;
                if !is_valid_token(poi_type) || !is_valid_token(result) {
                    return Err(malformed("invalid poi type/result token"));
                }
            }
            Payload::Route {
                x,
                y,
                target_x,
                target_y,
            } => check_finite(&[
                ("x", *x),
                ("y", *y),
                ("target_x", *target_x),
                ("target_y", *target_y),
            ])?,
        }
        Ok(LogRecord {
            vtime,
            client_id,
            category,
            payload,
            label,
        })
    }

    pub fn vtime(&self) -> u64 {
        self.vtime
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn category(&self) -> DataCategory {
        self.category
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn label(&self) -> Label {
        self.label
    }

    /// Re-timestamp a record (used by the server, which owns time assignment).
    pub fn with_vtime(mut self, vtime: u64) -> LogRecord {
        self.vtime = vtime;
        self
    }
}

/// Serialize one record to its canonical line (no trailing newline).
pub fn serialize_record(r: &LogRecord) -> String {
    use fmt::Write;
    let mut out = String::with_capacity(64);
    let _ = write!(out, "{}\t{}\t{}\t", r.vtime, r.client_id, r.category);
    r.payload.write_fields(&mut out);
    let _ = write!(out, "\t{}", r.label.as_str());
    out
}

fn parse_f64(s: &str, what: &str) -> Result<f64, RecordError> {
    let v: f64 = s
        .parse()
        .map_err(|_| malformed(format!("`{s}` is not a number ({what})")))?;
    if !v.is_finite() {
        return Err(malformed(format!("non-finite number in {what}")));
    }
    Ok(v)
}

fn parse_u8(s: &str, what: &str) -> Result<u8, RecordError> {
    s.parse()
        .map_err(|_| malformed(format!("`{s}` is not a color channel ({what})")))
}

/// Parse one canonical line back into a record.
///
/// Inverse of [`serialize_record`]: `parse_record(&serialize_record(&r))`
/// returns `r` exactly.
pub fn parse_record(line: &str) -> Result<LogRecord, RecordError> {
    let mut fields = line.split('\t');
    let (vtime, client_id, category, payload, label) = match (
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
    ) {
        (Some(a), Some(b), Some(c), Some(d), Some(e), None) => (a, b, c, d, e),
        _ => return Err(malformed("expected exactly 5 tab-separated fields")),
    };

    let vtime: u64 = vtime
        .parse()
        .map_err(|_| malformed(format!("`{vtime}` is not a timestamp")))?;
    let category =
        DataCategory::parse(category).ok_or_else(|| malformed(format!("unknown category `{category}`")))?;
    let label = Label::parse(label).ok_or_else(|| malformed(format!("unknown label `{label}`")))?;

    let parts: Vec<&str> = payload.split(',').collect();
    let mismatch = |reason: &str| RecordError::SchemaMismatch {
        category,
        reason: reason.into(),
    };
    let payload = match category.group() {
        CategoryGroup::Generators => {
            if parts.len() != 1 {
                return Err(mismatch("generator payload has exactly 1 value"));
            }
            Payload::Value {
                value: parse_f64(parts[0], "value")?,
            }
        }
        CategoryGroup::Color => {
            if parts.len() != 5 {
                return Err(mismatch("color payload has exactly 5 values"));
            }
            Payload::ColorReading {
                x: parse_f64(parts[0], "x")?,
                y: parse_f64(parts[1], "y")?,
                color: Rgb(
                    parse_u8(parts[2], "r")?,
                    parse_u8(parts[3], "g")?,
                    parse_u8(parts[4], "b")?,
                ),
            }
        }
        CategoryGroup::Positional => match category {
            DataCategory::CountryCode => {
                if parts.len() != 3 {
                    return Err(mismatch("countrycode payload has exactly 3 values"));
                }
                Payload::CountryCode {
                    x: parse_f64(parts[0], "x")?,
                    y: parse_f64(parts[1], "y")?,
                    code: parts[2].to_string(),
                }
            }
            DataCategory::Poi => {
                if parts.len() != 4 {
                    return Err(mismatch("poi payload has exactly 4 values"));
                }
                Payload::Poi {
                    x: parse_f64(parts[0], "x")?,
                    y: parse_f64(parts[1], "y")?,
                    poi_type: parts[2].to_string(),
                    result: parts[3].to_string(),
                }
            }
            DataCategory::Route => {
                if parts.len() != 4 {
                    return Err(mismatch("route payload has exactly 4 values"));
                }
                Payload::Route {
                    x: parse_f64(parts[0], "x")?,
                    y: parse_f64(parts[1], "y")?,
                    target_x: parse_f64(parts[2], "target_x")?,
                    target_y: parse_f64(parts[3], "target_y")?,
                }
            }
            _ => unreachable!("positional group covers exactly these categories"),
        },
    };

    LogRecord::new(vtime, client_id, category, payload, label)
}

/// The serialized line with its leading vtime field removed. Two adjacent
/// records are duplicates when these suffixes compare equal bitwise.
pub fn line_without_vtime(line: &str) -> &str {
    match line.find('\t') {
        Some(i) => &line[i + 1..],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<LogRecord> {
        vec![
            LogRecord::new(
                100,
                "gen-1",
                DataCategory::Gaussian,
                Payload::Value { value: -1.25 },
                Label::Normal,
            )
            .unwrap(),
            LogRecord::new(
                200,
                "unit_7",
                DataCategory::Color,
                Payload::ColorReading {
                    x: 12.5,
                    y: 499.0,
                    color: Rgb(150, 140, 200),
                },
                Label::Intrusion,
            )
            .unwrap(),
            LogRecord::new(
                200,
                "unit_7",
                DataCategory::CountryCode,
                Payload::CountryCode {
                    x: 0.1,
                    y: 0.2,
                    code: "DE".into(),
                },
                Label::Normal,
            )
            .unwrap(),
            LogRecord::new(
                400,
                "unit_7",
                DataCategory::Poi,
                Payload::Poi {
                    x: 3.0,
                    y: 4.0,
                    poi_type: "gas_station".into(),
                    result: "Invalid".into(),
                },
                Label::Intrusion,
            )
            .unwrap(),
            LogRecord::new(
                400,
                "unit_7",
                DataCategory::Route,
                Payload::Route {
                    x: 1.0,
                    y: 2.0,
                    target_x: 1.0,
                    target_y: 2.0,
                },
                Label::Intrusion,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn round_trip_examples() {
        for r in sample_records() {
            let line = serialize_record(&r);
            assert_eq!(parse_record(&line).unwrap(), r, "line: {line}");
        }
    }

    #[test]
    fn float_formatting_round_trips_extremes() {
        for value in [
            0.1 + 0.2,
            f64::MIN_POSITIVE,
            1.0e300,
            -3.0902323061678132,
            f64::EPSILON,
        ] {
            let r = LogRecord::new(
                0,
                "c",
                DataCategory::Uniform,
                Payload::Value { value },
                Label::Normal,
            )
            .unwrap();
            assert_eq!(parse_record(&serialize_record(&r)).unwrap(), r);
        }
    }

    #[test]
    fn wrong_field_count_is_malformed() {
        let err = parse_record("100\tgen-1\tgaussian\t1.0").unwrap_err();
        assert!(matches!(err, RecordError::Malformed { .. }));
        let err = parse_record("100\tgen-1\tgaussian\t1.0\tnormal\textra").unwrap_err();
        assert!(matches!(err, RecordError::Malformed { .. }));
    }

    #[test]
    fn generator_payload_with_three_values_is_schema_mismatch() {
        let err = parse_record("100\tgen-1\tgaussian\t1.0,2.0,3.0\tnormal").unwrap_err();
        assert!(
            matches!(err, RecordError::SchemaMismatch { category, .. } if category == DataCategory::Gaussian)
        );
    }

    #[test]
    fn color_payload_arity_is_checked() {
        let err = parse_record("1\tu\tcolor\t1.0,2.0,150,140\tnormal").unwrap_err();
        assert!(matches!(err, RecordError::SchemaMismatch { .. }));
    }

    #[test]
    fn unknown_category_and_label_are_malformed() {
        assert!(matches!(
            parse_record("1\tu\tmystery\t1.0\tnormal").unwrap_err(),
            RecordError::Malformed { .. }
        ));
        assert!(matches!(
            parse_record("1\tu\tgaussian\t1.0\tmaybe").unwrap_err(),
            RecordError::Malformed { .. }
        ));
    }

    #[test]
    fn bad_client_id_is_rejected_at_construction() {
        let err = LogRecord::new(
            0,
            "has space",
            DataCategory::Gaussian,
            Payload::Value { value: 0.0 },
            Label::Normal,
        )
        .unwrap_err();
        assert!(matches!(err, RecordError::Malformed { .. }));
    }

    #[test]
    fn payload_category_consistency_is_enforced() {
        let err = LogRecord::new(
            0,
            "c",
            DataCategory::Gaussian,
            Payload::Route {
                x: 0.0,
                y: 0.0,
                target_x: 1.0,
                target_y: 1.0,
            },
            Label::Normal,
        )
        .unwrap_err();
        assert!(matches!(err, RecordError::SchemaMismatch { .. }));
    }

    #[test]
    fn non_finite_floats_are_rejected() {
        let err = LogRecord::new(
            0,
            "c",
            DataCategory::Gaussian,
            Payload::Value { value: f64::NAN },
            Label::Normal,
        )
        .unwrap_err();
        assert!(matches!(err, RecordError::Malformed { .. }));
    }

    #[test]
    fn vtime_prefix_is_stripped_for_duplicate_comparison() {
        let r = &sample_records()[0];
        let a = serialize_record(r);
        let b = serialize_record(&r.clone().with_vtime(999));
        assert_ne!(a, b);
        assert_eq!(line_without_vtime(&a), line_without_vtime(&b));
    }

    #[test]
    fn category_groups_partition_all_categories() {
        let gens = DataCategory::ALL.iter().filter(|c| c.is_generator()).count();
        assert_eq!(gens, 10);
        assert_eq!(
            DataCategory::ALL
                .iter()
                .filter(|c| c.group() == CategoryGroup::Positional)
                .count(),
            3
        );
        assert_eq!(
            DataCategory::ALL
                .iter()
                .filter(|c| c.group() == CategoryGroup::Color)
                .count(),
            1
        );
    }

    #[test]
    fn difficulty_factors() {
        assert_eq!(DifficultyLevel::Easy.factor(), 5.0);
        assert_eq!(DifficultyLevel::Medium.factor(), 1.5);
        assert_eq!(DifficultyLevel::Hard.factor(), 1.001);
    }
}
