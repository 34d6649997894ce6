//! The 2D vehicle simulator: a bounded, colored environment, a wandering
//! unit, periodic color readings, and three positional request types with
//! compromised variants.
//!
//! Colors and geometry follow fixed conventions: the background is tiled
//! from four legal colors in quadrant blocks, intrusion-bearing environments
//! add either an erroneous rectangle (color-area scenarios) or an
//! erroneously colored illegal zone (dwell scenarios), and color distances
//! are Euclidean over channels scaled to `[0, 1]` by division by 255.

use crate::record::{DataCategory, DifficultyLevel, Label, Payload, Rgb};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default square environment edge, in pixels.
pub const DEFAULT_ENV_SIZE: u32 = 500;
/// Distance a unit covers per movement tick, in pixels.
pub const SPEED_PX_PER_TICK: f64 = 2.0;
/// Half-width of the uniform per-tick heading perturbation, in radians.
pub const HEADING_JITTER_RAD: f64 = 0.4;
/// Virtual milliseconds between movement ticks (and color readings).
pub const MOVE_PERIOD_MS: u64 = 100;
/// Virtual milliseconds between color readings.
pub const COLOR_PERIOD_MS: u64 = 100;
/// Virtual milliseconds between successive requests of one kind.
pub const REQUEST_PERIOD_MS: u64 = 200;
/// Coordinate offset range for compromised country-code requests: each axis
/// is displaced by a uniform draw from this range, sign chosen per axis.
pub const CC_OFFSET_MIN: f64 = 10.0;
pub const CC_OFFSET_MAX: f64 = 50.0;

/// The four legal background colors.
pub const PURPLE: Rgb = Rgb(150, 140, 200);
pub const YELLOW: Rgb = Rgb(170, 250, 140);
pub const GREEN: Rgb = Rgb(120, 180, 130);
pub const BLUE: Rgb = Rgb(120, 180, 200);
pub const LEGAL_COLORS: [Rgb; 4] = [PURPLE, YELLOW, GREEN, BLUE];

/// Country codes returned by the 2×2 quadrant partition, in quadrant order
/// north-west, north-east, south-west, south-east.
pub const COUNTRY_CODES: [&str; 4] = ["DE", "FR", "IT", "AT"];

/// Legal point-of-interest types; each resolves to one of three results
/// depending on position.
pub const LEGAL_POI_TYPES: [&str; 2] = ["gas_station", "restaurant"];
/// Illegal point-of-interest types; both resolve to [`INVALID_POI_RESULT`].
pub const ILLEGAL_POI_TYPES: [&str; 2] = ["casino", "junkyard"];
pub const GAS_STATION_RESULTS: [&str; 3] = ["station_a", "station_b", "station_c"];
pub const RESTAURANT_RESULTS: [&str; 3] = ["diner_a", "diner_b", "diner_c"];
pub const INVALID_POI_RESULT: &str = "Invalid";

/// Pixel width of the position bands used by the POI resolver.
const POI_BAND_PX: f64 = 20.0;
/// Result index patterns per band; unequal counts give the eight
/// (type, result) forms distinct long-run frequencies.
const GAS_STATION_BANDS: [usize; 6] = [0, 1, 0, 2, 0, 1];
const RESTAURANT_BANDS: [usize; 4] = [0, 0, 1, 2];

/// The erroneous color per difficulty, ordered by decreasing distance from
/// the legal palette.
pub fn erroneous_color(level: DifficultyLevel) -> Rgb {
    match level {
        DifficultyLevel::Easy => Rgb(255, 0, 0),
        DifficultyLevel::Medium => Rgb(200, 50, 50),
        DifficultyLevel::Hard => Rgb(170, 80, 80),
    }
}

/// Fraction of the environment area the erroneous rectangle covers.
pub fn erroneous_area_fraction(level: DifficultyLevel) -> f64 {
    match level {
        DifficultyLevel::Easy => 0.40,
        DifficultyLevel::Medium => 0.20,
        DifficultyLevel::Hard => 0.05,
    }
}

/// Probability that one positional request from a compromised unit is
/// actually corrupted.
pub fn corruption_probability(level: DifficultyLevel) -> f64 {
    match level {
        DifficultyLevel::Easy => 0.40,
        DifficultyLevel::Medium => 0.20,
        DifficultyLevel::Hard => 0.05,
    }
}

/// Euclidean distance between two colors after scaling each channel to
/// `[0, 1]` by dividing by 255. Result lies in `[0, √3]`.
pub fn color_distance(p: Rgb, q: Rgb) -> f64 {
    let d = |a: u8, b: u8| (a as f64 - b as f64) / 255.0;
    (d(p.0, q.0).powi(2) + d(p.1, q.1).powi(2) + d(p.2, q.2).powi(2)).sqrt()
}

/// Mean distance from `c` to the four legal colors.
pub fn average_distance_to_legal(c: Rgb) -> f64 {
    LEGAL_COLORS.iter().map(|&l| color_distance(c, l)).sum::<f64>() / LEGAL_COLORS.len() as f64
}

/// Distance statistics over the legal palette.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorDistanceStats {
    /// Smallest distance between two distinct legal colors.
    pub min: f64,
    /// Largest distance between two distinct legal colors.
    pub max: f64,
    /// Mean over the full pairing matrix of the palette with itself,
    /// self-pairs included.
    pub mean: f64,
}

/// Pairwise distance statistics of the four legal colors.
pub fn legal_color_distance_stats() -> ColorDistanceStats {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let mut total = 0.0;
    for &a in &LEGAL_COLORS {
        for &b in &LEGAL_COLORS {
            let d = color_distance(a, b);
            total += d;
            if a != b {
                min = min.min(d);
                max = max.max(d);
            }
        }
    }
    ColorDistanceStats {
        min,
        max,
        mean: total / (LEGAL_COLORS.len() * LEGAL_COLORS.len()) as f64,
    }
}

/// Axis-aligned rectangle in pixel coordinates. Containment is half-open:
/// the left/top edges belong to the rectangle, the right/bottom edges do not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Sim2dError {
    #[error("environment dimensions must be positive")]
    InvalidDimensions,
    #[error("zone {0:?} does not fit inside a {1}×{2} environment")]
    ZoneOutOfBounds(Rect, u32, u32),
    #[error("zone color {0:?} collides with a legal background color")]
    ZoneColorIsLegal(Rgb),
}

/// A bounded colored world one unit lives in. Units do not share
/// environments, so intrusion-bearing features are configured per unit.
#[derive(Debug, Clone)]
pub struct Environment2D {
    width: u32,
    height: u32,
    erroneous_area: Option<(Rect, Rgb)>,
    illegal_zone: Option<Rect>,
    illegal_zone_color: Option<Rgb>,
}

impl Environment2D {
    /// An environment with legal background colors only.
    pub fn plain(width: u32, height: u32) -> Result<Environment2D, Sim2dError> {
        if width == 0 || height == 0 {
            return Err(Sim2dError::InvalidDimensions);
        }
        Ok(Environment2D {
            width,
            height,
            erroneous_area: None,
            illegal_zone: None,
            illegal_zone_color: None,
        })
    }

    /// An environment with an illegal zone. If `color` is set (it must not be
    /// one of the legal colors), readings inside the zone return it and are
    /// labeled intrusions — the configuration dwell units run in. With
    /// `color = None` the zone is purely geometric: a region avoided by
    /// normal units that shows the ordinary background.
    pub fn with_illegal_zone(
        width: u32,
        height: u32,
        zone: Rect,
        color: Option<Rgb>,
    ) -> Result<Environment2D, Sim2dError> {
        let mut env = Environment2D::plain(width, height)?;
        if zone.w <= 0.0
            || zone.h <= 0.0
            || zone.x < 0.0
            || zone.y < 0.0
            || zone.x + zone.w > width as f64
            || zone.y + zone.h > height as f64
        {
            return Err(Sim2dError::ZoneOutOfBounds(zone, width, height));
        }
        if let Some(c) = color {
            if LEGAL_COLORS.contains(&c) {
                return Err(Sim2dError::ZoneColorIsLegal(c));
            }
        }
        env.illegal_zone = Some(zone);
        env.illegal_zone_color = color;
        Ok(env)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn erroneous_area(&self) -> Option<(Rect, Rgb)> {
        self.erroneous_area
    }

    pub fn illegal_zone(&self) -> Option<Rect> {
        self.illegal_zone
    }

    /// The legal background color at a position: quadrant blocks of purple
    /// (north-west), yellow (north-east), green (south-west), blue
    /// (south-east).
    pub fn background_color(&self, x: f64, y: f64) -> Rgb {
        let east = x >= self.width as f64 / 2.0;
        let south = y >= self.height as f64 / 2.0;
        match (south, east) {
            (false, false) => PURPLE,
            (false, true) => YELLOW,
            (true, false) => GREEN,
            (true, true) => BLUE,
        }
    }

    /// The color visible at a position, and whether it is an erroneous one.
    /// A colored illegal zone takes precedence over an erroneous rectangle;
    /// both fall back to the legal background.
    fn color_and_flag_at(&self, x: f64, y: f64) -> (Rgb, bool) {
        if let (Some(zone), Some(color)) = (self.illegal_zone, self.illegal_zone_color) {
            if zone.contains(x, y) {
                return (color, true);
            }
        }
        if let Some((rect, color)) = self.erroneous_area {
            if rect.contains(x, y) {
                return (color, true);
            }
        }
        (self.background_color(x, y), false)
    }

    /// The color visible at a position.
    pub fn color_at(&self, x: f64, y: f64) -> Rgb {
        self.color_and_flag_at(x, y).0
    }
}

/// An environment carrying an erroneous rectangle for `level`: colored per
/// the difficulty, sized to the level's area fraction (square up to
/// rounding, clamped to the bounds), and placed uniformly at random with
/// full containment.
pub fn build_environment(
    level: DifficultyLevel,
    width: u32,
    height: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Environment2D, Sim2dError> {
    let mut env = Environment2D::plain(width, height)?;
    let target = erroneous_area_fraction(level) * (width as f64 * height as f64);
    let mut side_w = target.sqrt().round().max(1.0).min(width as f64);
    let side_h = (target / side_w).round().max(1.0).min(height as f64);
    side_w = (target / side_h).round().max(1.0).min(width as f64);
    let max_x = width as f64 - side_w;
    let max_y = height as f64 - side_h;
    let x = if max_x > 0.0 {
        rng.gen_range(0..=max_x as u32) as f64
    } else {
        0.0
    };
    let y = if max_y > 0.0 {
        rng.gen_range(0..=max_y as u32) as f64
    } else {
        0.0
    };
    env.erroneous_area = Some((
        Rect {
            x,
            y,
            w: side_w,
            h: side_h,
        },
        erroneous_color(level),
    ));
    Ok(env)
}

/// One positional request kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    CountryCode,
    Poi,
    Route,
}

impl RequestKind {
    pub const ALL: [RequestKind; 3] = [
        RequestKind::CountryCode,
        RequestKind::Poi,
        RequestKind::Route,
    ];

    pub fn category(self) -> DataCategory {
        match self {
            RequestKind::CountryCode => DataCategory::CountryCode,
            RequestKind::Poi => DataCategory::Poi,
            RequestKind::Route => DataCategory::Route,
        }
    }
}

/// Which of a unit's behaviors are compromised.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompromisedFlags {
    pub color_area: bool,
    pub illegal_dwell: bool,
    pub country_code: bool,
    pub poi: bool,
    pub route: bool,
}

impl CompromisedFlags {
    pub fn any(&self) -> bool {
        self.color_area || self.illegal_dwell || self.country_code || self.poi || self.route
    }

    fn for_request(&self, kind: RequestKind) -> bool {
        match kind {
            RequestKind::CountryCode => self.country_code,
            RequestKind::Poi => self.poi,
            RequestKind::Route => self.route,
        }
    }
}

/// One labeled positional request, ready to be logged.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalRequest {
    pub category: DataCategory,
    pub payload: Payload,
    pub label: Label,
}

/// Margin kept from a zone's exclusive far edges when clamping a dwelling
/// unit, so its position always satisfies half-open containment.
const ZONE_EDGE_MARGIN: f64 = 1e-9;

/// The moving vehicle unit. Owns its RNG stream; movement, avoidance, and
/// request corruption all draw from it in a fixed order, so a unit's whole
/// behavior is a deterministic function of its seed.
#[derive(Debug, Clone)]
pub struct Unit {
    x: f64,
    y: f64,
    heading: f64,
    flags: CompromisedFlags,
    level: DifficultyLevel,
    rng: ChaCha8Rng,
}

impl Unit {
    pub fn new(
        x: f64,
        y: f64,
        heading: f64,
        flags: CompromisedFlags,
        level: DifficultyLevel,
        rng: ChaCha8Rng,
    ) -> Unit {
        Unit {
            x,
            y,
            heading,
            flags,
            level,
            rng,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn flags(&self) -> CompromisedFlags {
        self.flags
    }

    pub fn level(&self) -> DifficultyLevel {
        self.level
    }

    /// The rectangle this unit's movement is clamped to: the illegal zone
    /// for dwelling units (they never leave it), the full environment
    /// otherwise.
    fn movement_bounds(&self, env: &Environment2D) -> Rect {
        if self.flags.illegal_dwell {
            if let Some(zone) = env.illegal_zone {
                return Rect {
                    x: zone.x,
                    y: zone.y,
                    w: zone.w - ZONE_EDGE_MARGIN,
                    h: zone.h - ZONE_EDGE_MARGIN,
                };
            }
        }
        Rect {
            x: 0.0,
            y: 0.0,
            w: env.width as f64,
            h: env.height as f64,
        }
    }

    /// One movement tick: perturb the heading uniformly, step forward, clamp
    /// to the movement bounds. A unit pinned by the clamp (position
    /// unchanged, e.g. heading into a corner) is re-aimed at the interior
    /// and stepped again, so positions never repeat across consecutive
    /// ticks. Non-dwelling units inside the illegal zone are turned toward
    /// the zone's nearest open side so they leave it in bounded time.
    pub fn step(&mut self, env: &Environment2D) {
        let bounds = self.movement_bounds(env);
        let clamp = |x: f64, y: f64| {
            (
                x.clamp(bounds.x, bounds.x + bounds.w),
                y.clamp(bounds.y, bounds.y + bounds.h),
            )
        };
        self.heading += self.rng.gen_range(-HEADING_JITTER_RAD..=HEADING_JITTER_RAD);
        let (mut nx, mut ny) = clamp(
            self.x + SPEED_PX_PER_TICK * self.heading.cos(),
            self.y + SPEED_PX_PER_TICK * self.heading.sin(),
        );
        if nx == self.x && ny == self.y {
            let (cx, cy) = bounds.center();
            self.heading = (cy - self.y).atan2(cx - self.x)
                + self.rng.gen_range(-HEADING_JITTER_RAD..=HEADING_JITTER_RAD);
            (nx, ny) = clamp(
                self.x + SPEED_PX_PER_TICK * self.heading.cos(),
                self.y + SPEED_PX_PER_TICK * self.heading.sin(),
            );
        }
        self.x = nx;
        self.y = ny;
        if !self.flags.illegal_dwell {
            if let Some(zone) = env.illegal_zone {
                if zone.contains(self.x, self.y) {
                    self.heading = escape_heading(env, &zone, self.x, self.y)
                        + self.rng.gen_range(-HEADING_JITTER_RAD..=HEADING_JITTER_RAD);
                }
            }
        }
    }

    /// Read the color under the unit. The label is an intrusion exactly when
    /// the returned color is an erroneous one (erroneous rectangle, or
    /// colored illegal zone for dwelling units).
    pub fn read_color(&self, env: &Environment2D) -> (Rgb, Label) {
        let (color, erroneous) = env.color_and_flag_at(self.x, self.y);
        let label = if erroneous {
            Label::Intrusion
        } else {
            Label::Normal
        };
        (color, label)
    }

    /// Issue one positional request. If the unit is compromised for this
    /// kind, the corrupted variant is emitted with the level's corruption
    /// probability and labeled an intrusion; otherwise the normal form.
    pub fn make_request(&mut self, env: &Environment2D, kind: RequestKind) -> PositionalRequest {
        let corrupt = self.flags.for_request(kind)
            && self.rng.gen::<f64>() < corruption_probability(self.level);
        let (x, y) = (self.x, self.y);
        let (w, h) = (env.width, env.height);
        let (payload, label) = match (kind, corrupt) {
            (RequestKind::CountryCode, false) => (
                Payload::CountryCode {
                    x,
                    y,
                    code: resolve_country_code(w, h, x, y).to_owned(),
                },
                Label::Normal,
            ),
            (RequestKind::CountryCode, true) => {
                // Claimed position displaced by at least 10 px on each axis.
                // The code answers for the nearest in-bounds position, but
                // the payload carries the claimed coordinates.
                let mut displace = |coord: f64| {
                    let offset = self.rng.gen_range(CC_OFFSET_MIN..=CC_OFFSET_MAX);
                    if self.rng.gen::<bool>() {
                        coord + offset
                    } else {
                        coord - offset
                    }
                };
                let cx = displace(x);
                let cy = displace(y);
                let code = resolve_country_code(
                    w,
                    h,
                    cx.clamp(0.0, w as f64),
                    cy.clamp(0.0, h as f64),
                );
                (
                    Payload::CountryCode {
                        x: cx,
                        y: cy,
                        code: code.to_owned(),
                    },
                    Label::Intrusion,
                )
            }
            (RequestKind::Poi, false) => {
                let poi_type = LEGAL_POI_TYPES[self.rng.gen_range(0..LEGAL_POI_TYPES.len())];
                (
                    Payload::Poi {
                        x,
                        y,
                        poi_type: poi_type.to_owned(),
                        result: resolve_poi(x, y, poi_type).to_owned(),
                    },
                    Label::Normal,
                )
            }
            (RequestKind::Poi, true) => {
                let poi_type = ILLEGAL_POI_TYPES[self.rng.gen_range(0..ILLEGAL_POI_TYPES.len())];
                (
                    Payload::Poi {
                        x,
                        y,
                        poi_type: poi_type.to_owned(),
                        result: resolve_poi(x, y, poi_type).to_owned(),
                    },
                    Label::Intrusion,
                )
            }
            (RequestKind::Route, false) => {
                // A genuine route target differs from the current position
                // in both coordinates.
                let (target_x, target_y) = loop {
                    let tx = self.rng.gen_range(0.0..w as f64);
                    let ty = self.rng.gen_range(0.0..h as f64);
                    if tx != x && ty != y {
                        break (tx, ty);
                    }
                };
                (
                    Payload::Route {
                        x,
                        y,
                        target_x,
                        target_y,
                    },
                    Label::Normal,
                )
            }
            (RequestKind::Route, true) => (
                Payload::Route {
                    x,
                    y,
                    target_x: x,
                    target_y: y,
                },
                Label::Intrusion,
            ),
        };
        PositionalRequest {
            category: kind.category(),
            payload,
            label,
        }
    }
}

/// Heading that leaves the illegal zone through its nearest side with open
/// space beyond it. Falls back to pointing away from the zone center if the
/// zone spans the whole environment.
fn escape_heading(env: &Environment2D, zone: &Rect, x: f64, y: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut best: Option<(f64, f64)> = None;
    let candidates = [
        (zone.x > 0.0, x - zone.x, PI),
        (zone.x + zone.w < env.width as f64, zone.x + zone.w - x, 0.0),
        (zone.y > 0.0, y - zone.y, -FRAC_PI_2),
        (
            zone.y + zone.h < env.height as f64,
            zone.y + zone.h - y,
            FRAC_PI_2,
        ),
    ];
    for (open, dist, heading) in candidates {
        if open && best.map_or(true, |(d, _)| dist < d) {
            best = Some((dist, heading));
        }
    }
    match best {
        Some((_, heading)) => heading,
        None => {
            let (cx, cy) = zone.center();
            (y - cy).atan2(x - cx)
        }
    }
}

/// Country code for a position: a 2×2 quadrant partition of the environment.
pub fn resolve_country_code(width: u32, height: u32, x: f64, y: f64) -> &'static str {
    let east = x >= width as f64 / 2.0;
    let south = y >= height as f64 / 2.0;
    COUNTRY_CODES[(south as usize) * 2 + east as usize]
}

/// Result returned for a POI inquiry. Legal types map to one of their three
/// results through fixed position bands (gas stations band over x,
/// restaurants over y, 20 px wide, with unequal result shares); any other
/// type is illegal and yields [`INVALID_POI_RESULT`].
pub fn resolve_poi(x: f64, y: f64, poi_type: &str) -> &'static str {
    match poi_type {
        "gas_station" => {
            let band = (x / POI_BAND_PX).floor().max(0.0) as usize % GAS_STATION_BANDS.len();
            GAS_STATION_RESULTS[GAS_STATION_BANDS[band]]
        }
        "restaurant" => {
            let band = (y / POI_BAND_PX).floor().max(0.0) as usize % RESTAURANT_BANDS.len();
            RESTAURANT_RESULTS[RESTAURANT_BANDS[band]]
        }
        _ => INVALID_POI_RESULT,
    }
}
