//! The ten scalar distribution families the generator components draw from,
//! together with the central 99.8% interval profile intrusion injection is
//! built on.
//!
//! Quantiles use closed forms wherever one exists. Wald falls back to
//! bisection on its CDF (expressed through the normal CDF), and von Mises to
//! bisection on a numerically integrated CDF over `(mean − π, mean + π]`;
//! both bisect until the bracket is below 1e-9.

use crate::record::DataCategory;
use rand::Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};
use statrs::function::erf;
use statrs::function::gamma::gamma;

/// Euler–Mascheroni constant (Gumbel mean = location + scale * γ).
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Lower and upper quantile levels of the profile interval: the central 99.8%.
pub const PROFILE_LO: f64 = 0.001;
pub const PROFILE_HI: f64 = 0.999;

/// Absolute bracket width at which quantile bisection stops.
const BISECT_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DistributionError {
    /// A parameter is outside its family's domain (e.g. non-positive scale).
    #[error("invalid parameters for {family}: {reason}")]
    InvalidParams { family: &'static str, reason: String },
    /// The family has no finite mean at these parameters, so no interval
    /// profile exists (Pareto with shape ≤ 1).
    #[error("{family} has no finite mean at these parameters ({reason})")]
    UndefinedMean { family: &'static str, reason: String },
}

fn invalid(family: &'static str, reason: impl Into<String>) -> DistributionError {
    DistributionError::InvalidParams {
        family,
        reason: reason.into(),
    }
}

fn d0() -> f64 {
    0.0
}
fn d1() -> f64 {
    1.0
}
fn d3() -> f64 {
    3.0
}
fn d1_5() -> f64 {
    1.5
}

/// A fully parameterized distribution. Field defaults follow the common
/// library defaults, so `params = {}` in a scenario file means the standard
/// member of each family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", content = "params", rename_all = "lowercase")]
pub enum DistributionSpec {
    Gaussian {
        #[serde(default = "d0")]
        mean: f64,
        #[serde(default = "d1")]
        std_dev: f64,
    },
    Gumbel {
        #[serde(default = "d0")]
        location: f64,
        #[serde(default = "d1")]
        scale: f64,
    },
    Laplace {
        #[serde(default = "d0")]
        location: f64,
        #[serde(default = "d1")]
        scale: f64,
    },
    Logistic {
        #[serde(default = "d0")]
        location: f64,
        #[serde(default = "d1")]
        scale: f64,
    },
    VonMises {
        #[serde(default = "d0")]
        mean: f64,
        #[serde(default = "d1")]
        kappa: f64,
    },
    Pareto {
        #[serde(default = "d3")]
        shape: f64,
        #[serde(default = "d1")]
        scale: f64,
    },
    Rayleigh {
        #[serde(default = "d1")]
        scale: f64,
    },
    Uniform {
        #[serde(default = "d0")]
        low: f64,
        #[serde(default = "d1")]
        high: f64,
    },
    Wald {
        #[serde(default = "d1")]
        mean: f64,
        #[serde(default = "d1")]
        scale: f64,
    },
    Weibull {
        #[serde(default = "d1_5")]
        shape: f64,
        #[serde(default = "d1")]
        scale: f64,
    },
}

/// Central 99.8% interval of a distribution plus its mean and the two spans
/// intrusion values are scaled by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProfile {
    /// 0.001 quantile.
    pub r_min: f64,
    /// 0.999 quantile.
    pub r_max: f64,
    pub mean: f64,
    /// `mean - r_min`.
    pub span_left: f64,
    /// `r_max - mean`.
    pub span_right: f64,
}

impl DistributionSpec {
    /// The standard member of `kind`'s family. Panics if `kind` is not a
    /// generator category.
    pub fn default_for(kind: DataCategory) -> DistributionSpec {
        match kind {
            DataCategory::Gaussian => DistributionSpec::Gaussian {
                mean: 0.0,
                std_dev: 1.0,
            },
            DataCategory::Gumbel => DistributionSpec::Gumbel {
                location: 0.0,
                scale: 1.0,
            },
            DataCategory::Laplace => DistributionSpec::Laplace {
                location: 0.0,
                scale: 1.0,
            },
            DataCategory::Logistic => DistributionSpec::Logistic {
                location: 0.0,
                scale: 1.0,
            },
            DataCategory::VonMises => DistributionSpec::VonMises {
                mean: 0.0,
                kappa: 1.0,
            },
            DataCategory::Pareto => DistributionSpec::Pareto {
                shape: 3.0,
                scale: 1.0,
            },
            DataCategory::Rayleigh => DistributionSpec::Rayleigh { scale: 1.0 },
            DataCategory::Uniform => DistributionSpec::Uniform {
                low: 0.0,
                high: 1.0,
            },
            DataCategory::Wald => DistributionSpec::Wald {
                mean: 1.0,
                scale: 1.0,
            },
            DataCategory::Weibull => DistributionSpec::Weibull {
                shape: 1.5,
                scale: 1.0,
            },
            other => panic!("{other} is not a generator category"),
        }
    }

    /// The data category records from this distribution carry.
    pub fn kind(&self) -> DataCategory {
        match self {
            DistributionSpec::Gaussian { .. } => DataCategory::Gaussian,
            DistributionSpec::Gumbel { .. } => DataCategory::Gumbel,
            DistributionSpec::Laplace { .. } => DataCategory::Laplace,
            DistributionSpec::Logistic { .. } => DataCategory::Logistic,
            DistributionSpec::VonMises { .. } => DataCategory::VonMises,
            DistributionSpec::Pareto { .. } => DataCategory::Pareto,
            DistributionSpec::Rayleigh { .. } => DataCategory::Rayleigh,
            DistributionSpec::Uniform { .. } => DataCategory::Uniform,
            DistributionSpec::Wald { .. } => DataCategory::Wald,
            DistributionSpec::Weibull { .. } => DataCategory::Weibull,
        }
    }

    /// Check parameter domains. Does not require a finite mean; pair with
    /// [`DistributionSpec::mean`] for profile-bearing uses.
    pub fn validate(&self) -> Result<(), DistributionError> {
        fn positive(
            family: &'static str,
            name: &str,
            v: f64,
        ) -> Result<(), DistributionError> {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(family, format!("{name} must be positive, got {v}")));
            }
            Ok(())
        }
        fn finite(family: &'static str, name: &str, v: f64) -> Result<(), DistributionError> {
            if !v.is_finite() {
                return Err(invalid(family, format!("{name} must be finite, got {v}")));
            }
            Ok(())
        }
        match *self {
            DistributionSpec::Gaussian { mean, std_dev } => {
                finite("gaussian", "mean", mean)?;
                positive("gaussian", "std_dev", std_dev)
            }
            DistributionSpec::Gumbel { location, scale } => {
                finite("gumbel", "location", location)?;
                positive("gumbel", "scale", scale)
            }
            DistributionSpec::Laplace { location, scale } => {
                finite("laplace", "location", location)?;
                positive("laplace", "scale", scale)
            }
            DistributionSpec::Logistic { location, scale } => {
                finite("logistic", "location", location)?;
                positive("logistic", "scale", scale)
            }
            DistributionSpec::VonMises { mean, kappa } => {
                finite("vonmises", "mean", mean)?;
                positive("vonmises", "kappa", kappa)?;
                if kappa > 100.0 {
                    return Err(invalid("vonmises", "kappa above 100 is not supported"));
                }
                Ok(())
            }
            DistributionSpec::Pareto { shape, scale } => {
                positive("pareto", "shape", shape)?;
                positive("pareto", "scale", scale)
            }
            DistributionSpec::Rayleigh { scale } => positive("rayleigh", "scale", scale),
            DistributionSpec::Uniform { low, high } => {
                finite("uniform", "low", low)?;
                finite("uniform", "high", high)?;
                if low >= high {
                    return Err(invalid("uniform", format!("low {low} must be below high {high}")));
                }
                Ok(())
            }
            DistributionSpec::Wald { mean, scale } => {
                positive("wald", "mean", mean)?;
                positive("wald", "scale", scale)
            }
            DistributionSpec::Weibull { shape, scale } => {
                positive("weibull", "shape", shape)?;
                positive("weibull", "scale", scale)
            }
        }
    }

    /// Distribution mean. `UndefinedMean` for Pareto with shape ≤ 1.
    pub fn mean(&self) -> Result<f64, DistributionError> {
        self.validate()?;
        match *self {
            DistributionSpec::Gaussian { mean, .. } => Ok(mean),
            DistributionSpec::Gumbel { location, scale } => Ok(location + scale * EULER_GAMMA),
            DistributionSpec::Laplace { location, .. } => Ok(location),
            DistributionSpec::Logistic { location, .. } => Ok(location),
            DistributionSpec::VonMises { mean, .. } => Ok(mean),
            DistributionSpec::Pareto { shape, scale } => {
                if shape <= 1.0 {
                    Err(DistributionError::UndefinedMean {
                        family: "pareto",
                        reason: format!("shape {shape} ≤ 1"),
                    })
                } else {
                    Ok(shape * scale / (shape - 1.0))
                }
            }
            DistributionSpec::Rayleigh { scale } => {
                Ok(scale * (std::f64::consts::PI / 2.0).sqrt())
            }
            DistributionSpec::Uniform { low, high } => Ok(0.5 * (low + high)),
            DistributionSpec::Wald { mean, .. } => Ok(mean),
            DistributionSpec::Weibull { shape, scale } => Ok(scale * gamma(1.0 + 1.0 / shape)),
        }
    }

    /// Quantile function at `p ∈ (0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64, DistributionError> {
        self.validate()?;
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("quantile", format!("p must be in (0, 1), got {p}")));
        }
        Ok(match *self {
            DistributionSpec::Gaussian { mean, std_dev } => mean + std_dev * probit(p),
            DistributionSpec::Gumbel { location, scale } => location - scale * (-p.ln()).ln(),
            DistributionSpec::Laplace { location, scale } => {
                if p < 0.5 {
                    location + scale * (2.0 * p).ln()
                } else {
                    location - scale * (2.0 * (1.0 - p)).ln()
                }
            }
            DistributionSpec::Logistic { location, scale } => {
                location + scale * (p / (1.0 - p)).ln()
            }
            DistributionSpec::VonMises { mean, kappa } => mean + von_mises_quantile(kappa, p),
            DistributionSpec::Pareto { shape, scale } => scale * (1.0 - p).powf(-1.0 / shape),
            DistributionSpec::Rayleigh { scale } => scale * (-2.0 * (1.0 - p).ln()).sqrt(),
            DistributionSpec::Uniform { low, high } => low + p * (high - low),
            DistributionSpec::Wald { mean, scale } => wald_quantile(mean, scale, p),
            DistributionSpec::Weibull { shape, scale } => {
                scale * (-(1.0 - p).ln()).powf(1.0 / shape)
            }
        })
    }

    /// Central 99.8% interval profile: `[q(0.001), q(0.999)]`, the mean, and
    /// the spans from the mean to each end.
    ///
    /// Fails with `UndefinedMean` when the family has no finite mean at these
    /// parameters, since the spans are then meaningless.
    pub fn interval_profile(&self) -> Result<IntervalProfile, DistributionError> {
        let mean = self.mean()?;
        let r_min = self.quantile(PROFILE_LO)?;
        let r_max = self.quantile(PROFILE_HI)?;
        Ok(IntervalProfile {
            r_min,
            r_max,
            mean,
            span_left: mean - r_min,
            span_right: r_max - mean,
        })
    }

    /// Draw one value. Callers own the RNG; a fixed seed gives a fixed
    /// sequence of draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DistributionSpec::Gaussian { mean, std_dev } => {
                rand_distr::Normal::new(mean, std_dev)
                    .expect("validated params")
                    .sample(rng)
            }
            DistributionSpec::Gumbel { location, scale } => {
                rand_distr::Gumbel::new(location, scale)
                    .expect("validated params")
                    .sample(rng)
            }
            DistributionSpec::Laplace { location, scale } => {
                // Inverse CDF on u ∈ (-0.5, 0.5).
                loop {
                    let u = rng.gen::<f64>() - 0.5;
                    let t = 1.0 - 2.0 * u.abs();
                    if t > 0.0 {
                        return location - scale * u.signum() * t.ln();
                    }
                }
            }
            DistributionSpec::Logistic { location, scale } => loop {
                let u = rng.gen::<f64>();
                if u > 0.0 {
                    return location + scale * (u / (1.0 - u)).ln();
                }
            },
            DistributionSpec::VonMises { mean, kappa } => von_mises_sample(mean, kappa, rng),
            DistributionSpec::Pareto { shape, scale } => rand_distr::Pareto::new(scale, shape)
                .expect("validated params")
                .sample(rng),
            DistributionSpec::Rayleigh { scale } => {
                let u = rng.gen::<f64>();
                scale * (-2.0 * (1.0 - u).ln()).sqrt()
            }
            DistributionSpec::Uniform { low, high } => rng.gen_range(low..high),
            DistributionSpec::Wald { mean, scale } => {
                rand_distr::InverseGaussian::new(mean, scale)
                    .expect("validated params")
                    .sample(rng)
            }
            DistributionSpec::Weibull { shape, scale } => rand_distr::Weibull::new(scale, shape)
                .expect("validated params")
                .sample(rng),
        }
    }
}

/// Standard normal quantile.
fn probit(p: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    statrs::distribution::Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

/// Standard normal CDF via erfc for accurate tails.
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Wald (inverse Gaussian) CDF.
fn wald_cdf(mean: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = (scale / x).sqrt();
    let a = std_normal_cdf(s * (x / mean - 1.0));
    let b = (2.0 * scale / mean).exp() * std_normal_cdf(-s * (x / mean + 1.0));
    (a + b).clamp(0.0, 1.0)
}

/// Wald quantile by bisection; the CDF is continuous and strictly increasing
/// on (0, ∞).
fn wald_quantile(mean: f64, scale: f64, p: f64) -> f64 {
    let mut hi = mean;
    while wald_cdf(mean, scale, hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if wald_cdf(mean, scale, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Modified Bessel function of the first kind, order zero (power series; fine
/// for the κ ≤ 100 we admit).
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..400 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// CDF of the centered von Mises distribution on (−π, π], by composite
/// Simpson integration of exp(κ·cos t) / (2π·I0(κ)).
fn von_mises_cdf(kappa: f64, theta: f64) -> f64 {
    use std::f64::consts::PI;
    if theta <= -PI {
        return 0.0;
    }
    if theta >= PI {
        return 1.0;
    }
    let n = 2048; // even panel count; integrand is smooth and periodic
    let a = -PI;
    let h = (theta - a) / n as f64;
    let f = |t: f64| (kappa * t.cos()).exp();
    let mut sum = f(a) + f(theta);
    for i in 1..n {
        let t = a + h * i as f64;
        sum += f(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = sum * h / 3.0;
    (integral / (2.0 * PI * bessel_i0(kappa))).clamp(0.0, 1.0)
}

/// Centered von Mises quantile on (−π, π] by bisection to 1e-9.
fn von_mises_quantile(kappa: f64, p: f64) -> f64 {
    use std::f64::consts::PI;
    let (mut lo, mut hi) = (-PI, PI);
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if von_mises_cdf(kappa, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Best–Fisher rejection sampler for von Mises, wrapped to (mean − π, mean + π].
fn von_mises_sample<R: Rng + ?Sized>(mean: f64, kappa: f64, rng: &mut R) -> f64 {
    use std::f64::consts::PI;
    if kappa < 1e-8 {
        return mean + rng.gen_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.gen();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen();
            let theta = if u3 < 0.5 { -f.acos() } else { f.acos() };
            return mean + theta;
        }
    }
}
