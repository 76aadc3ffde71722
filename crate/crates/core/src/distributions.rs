//! The five distribution families used by the synthetic generators, the
//! ground-truth quantile oracle and the log-normal baseline head.
//!
//! Parameter conventions:
//! - `Exponential` takes a scale (its mean), not a rate.
//! - `Weibull` takes `(scale, shape)`.
//! - `LogNormal` takes the mean and standard deviation of `ln y`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistSpec {
    Normal { mean: f64, std: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Exponential { scale: f64 },
    Weibull { scale: f64, shape: f64 },
    Uniform { low: f64, high: f64 },
}

impl DistSpec {
    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::Normal { mean, std }.validated()
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::LogNormal { mu, sigma }.validated()
    }

    pub fn exponential(scale: f64) -> Result<Self> {
        Self::Exponential { scale }.validated()
    }

    pub fn weibull(scale: f64, shape: f64) -> Result<Self> {
        Self::Weibull { scale, shape }.validated()
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        Self::Uniform { low, high }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be finite and > 0, got {v}")))
            }
        }
        fn finite(name: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be finite, got {v}")))
            }
        }
        match *self {
            DistSpec::Normal { mean, std } => {
                finite("mean", mean)?;
                positive("std", std)
            }
            DistSpec::LogNormal { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            DistSpec::Exponential { scale } => positive("scale", scale),
            DistSpec::Weibull { scale, shape } => {
                positive("scale", scale)?;
                positive("shape", shape)
            }
            DistSpec::Uniform { low, high } => {
                finite("low", low)?;
                finite("high", high)?;
                if low < high {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("uniform needs low < high, got [{low}, {high}]")))
                }
            }
        }
    }

    /// Draws one value. The stream is advanced by a fixed pattern per family,
    /// so results are reproducible for a given stream state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.validate()?;
        Ok(self.sample_unchecked(rng))
    }

    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DistSpec::Normal { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
            DistSpec::LogNormal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma * z).exp()
            }
            DistSpec::Exponential { scale } => {
                let e: f64 = rng.sample(Exp1);
                scale * e
            }
            DistSpec::Weibull { scale, shape } => {
                let e: f64 = rng.sample(Exp1);
                scale * e.powf(1.0 / shape)
            }
            DistSpec::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }

    /// Inverse CDF, `inf { y : cdf(y) >= tau }`.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0,1), got {tau}")));
        }
        self.validate()?;
        Ok(match *self {
            DistSpec::Normal { mean, std } => mean + std * normal_inv_cdf(tau),
            DistSpec::LogNormal { mu, sigma } => (mu + sigma * normal_inv_cdf(tau)).exp(),
            DistSpec::Exponential { scale } => -scale * (-tau).ln_1p(),
            DistSpec::Weibull { scale, shape } => scale * (-(-tau).ln_1p()).powf(1.0 / shape),
            DistSpec::Uniform { low, high } => low + tau * (high - low),
        })
    }

    /// Natural-log density; `-inf` outside the support.
    pub fn log_pdf(&self, y: f64) -> f64 {
        match *self {
            DistSpec::Normal { mean, std } => {
                let z = (y - mean) / std;
                -LN_SQRT_2PI - std.ln() - 0.5 * z * z
            }
            DistSpec::LogNormal { mu, sigma } => {
                if y <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let ly = y.ln();
                let z = (ly - mu) / sigma;
                -LN_SQRT_2PI - sigma.ln() - 0.5 * z * z - ly
            }
            DistSpec::Exponential { scale } => {
                if y < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -scale.ln() - y / scale
                }
            }
            DistSpec::Weibull { scale, shape } => {
                if y < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if y == 0.0 {
                    return match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => -scale.ln(),
                        _ => f64::NEG_INFINITY,
                    };
                }
                let r = y / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * r.ln() - r.powf(shape)
            }
            DistSpec::Uniform { low, high } => {
                if y < low || y > high {
                    f64::NEG_INFINITY
                } else {
                    -(high - low).ln()
                }
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            DistSpec::Normal { mean, std } => normal_cdf((y - mean) / std),
            DistSpec::LogNormal { mu, sigma } => {
                if y <= 0.0 {
                    0.0
                } else {
                    normal_cdf((y.ln() - mu) / sigma)
                }
            }
            DistSpec::Exponential { scale } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-y / scale).exp_m1()
                }
            }
            DistSpec::Weibull { scale, shape } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-(y / scale).powf(shape)).exp_m1()
                }
            }
            DistSpec::Uniform { low, high } => ((y - low) / (high - low)).clamp(0.0, 1.0),
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, without cancellation for large `z`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

/// `ln(1 - Φ(z))`, finite far into the upper tail.
pub fn normal_log_sf(z: f64) -> f64 {
    if z < 30.0 {
        normal_sf(z).ln()
    } else {
        // Asymptotic Mills-ratio expansion.
        let z2 = z * z;
        -0.5 * z2 - z.ln() - LN_SQRT_2PI + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

pub fn normal_log_pdf(z: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * z * z
}

/// Standard normal quantile function.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Newton step against the erfc-based CDF.
pub fn normal_inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -normal_inv_cdf(1.0 - p);
    }

    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let err = normal_cdf(x) - p;
    let density = normal_log_pdf(x).exp();
    if density > 0.0 {
        x - err / density
    } else {
        x
    }
}
