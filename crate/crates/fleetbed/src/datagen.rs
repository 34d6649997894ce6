//! The data-generator client component: periodic scalar draws from one
//! distribution, with two numeric intrusion modes for compromised components.
//!
//! A compromised generator emits an intrusion value on every tick. Both
//! intrusion modes are built on the distribution's central 99.8% interval
//! profile: the emitted value is displaced from the mean by at least
//! `span × factor`, where the factor shrinks toward 1 as the difficulty
//! rises, pushing the value toward the interval edge.

use crate::distributions::{DistributionError, DistributionSpec, IntervalProfile};
use crate::record::{DifficultyLevel, Label};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default emission period of a generator component, in virtual milliseconds.
pub const DEFAULT_PERIOD_MS: u64 = 100;

/// Numeric intrusion modes a compromised generator can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrusionKind {
    /// Emit one of the two values displaced exactly `span × factor` from the
    /// mean (side chosen by coin flip per emission).
    OffValue,
    /// Draw a value `v`, then emit it pushed outside the interval by
    /// `span × factor + v²` on the side `v` fell on.
    SignificantError,
}

#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    #[error("emission period must be positive")]
    InvalidPeriod,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// The off-value intrusion: `mean ± span × factor`, on the requested side.
pub fn off_value(profile: &IntervalProfile, level: DifficultyLevel, upper_side: bool) -> f64 {
    let f = level.factor();
    if upper_side {
        profile.mean + profile.span_right * f
    } else {
        profile.mean - profile.span_left * f
    }
}

/// The significant-error intrusion: the drawn value `v` determines the side
/// (relative to the mean) and contributes `v²` extra displacement.
pub fn significant_error(profile: &IntervalProfile, level: DifficultyLevel, drawn: f64) -> f64 {
    let f = level.factor();
    if drawn >= profile.mean {
        profile.mean + profile.span_right * f + drawn * drawn
    } else {
        profile.mean - (profile.span_left * f + drawn * drawn)
    }
}

/// One periodic scalar emitter. Owns its RNG stream, so components can run
/// concurrently without sharing state.
#[derive(Debug, Clone)]
pub struct GeneratorComponent {
    spec: DistributionSpec,
    profile: IntervalProfile,
    period_ms: u64,
    intrusion: Option<IntrusionKind>,
    level: DifficultyLevel,
    rng: ChaCha8Rng,
}

impl GeneratorComponent {
    /// Build a component, computing the interval profile from `spec`. Fails
    /// for non-positive periods, invalid parameters, or distributions with
    /// no finite mean.
    pub fn new(
        spec: DistributionSpec,
        period_ms: u64,
        intrusion: Option<IntrusionKind>,
        level: DifficultyLevel,
        rng: ChaCha8Rng,
    ) -> Result<GeneratorComponent, DatagenError> {
        if period_ms == 0 {
            return Err(DatagenError::InvalidPeriod);
        }
        let profile = spec.interval_profile()?;
        Ok(GeneratorComponent {
            spec,
            profile,
            period_ms,
            intrusion,
            level,
            rng,
        })
    }

    pub fn kind(&self) -> crate::record::DataCategory {
        self.spec.kind()
    }

    pub fn period_ms(&self) -> u64 {
        self.period_ms
    }

    pub fn profile(&self) -> &IntervalProfile {
        &self.profile
    }

    pub fn level(&self) -> DifficultyLevel {
        self.level
    }

    pub fn is_compromised(&self) -> bool {
        self.intrusion.is_some()
    }

    /// Produce the next emission: a clean draw for normal components, an
    /// intrusion value (labeled as such) for compromised ones.
    pub fn next_value(&mut self) -> (f64, Label) {
        match self.intrusion {
            None => (self.spec.sample(&mut self.rng), Label::Normal),
            Some(IntrusionKind::OffValue) => {
                let upper: bool = self.rng.gen();
                (off_value(&self.profile, self.level, upper), Label::Intrusion)
            }
            Some(IntrusionKind::SignificantError) => {
                let v = self.spec.sample(&mut self.rng);
                (
                    significant_error(&self.profile, self.level, v),
                    Label::Intrusion,
                )
            }
        }
    }
}
