//! Prior log-density kernels and their gradients.
//!
//! All scalar densities are unnormalized kernels: additive constants are
//! dropped, consistently per prior instance. Sampling and importance-ratio
//! computations only require constants to be fixed, not present.
//!
//! The ED50 parameter uses a functional uniform prior, approximated by a
//! log-normal on ED50 / D with log-mean -2.5 and log-sd 1.8, where D is the
//! largest dose on the scale the parameter lives on. The exact functional
//! uniform density is available separately for validating the approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EmaxParams;

pub const FUA_LOG_MEAN: f64 = -2.5;
pub const FUA_LOG_SD: f64 = 1.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PriorSpec {
    Normal {
        mu: f64,
        sd: f64,
    },
    HalfNormal {
        scale: f64,
    },
    LogNormal {
        mu_log: f64,
        sd_log: f64,
    },
    /// Log-normal(-2.5, 1.8) on value / max_dose.
    FunctionalUniformApprox {
        max_dose: f64,
    },
    /// Exact sqrt-det functional uniform prior over a dose grid; evaluated
    /// through [`functional_uniform_exact`], not as a scalar kernel.
    FunctionalUniformExact {
        dose_grid: Vec<f64>,
    },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PriorSpec::Normal { sd, .. } => *sd > 0.0 && sd.is_finite(),
            PriorSpec::HalfNormal { scale } => *scale > 0.0 && scale.is_finite(),
            PriorSpec::LogNormal { sd_log, .. } => *sd_log > 0.0 && sd_log.is_finite(),
            PriorSpec::FunctionalUniformApprox { max_dose } => {
                *max_dose > 0.0 && max_dose.is_finite()
            }
            PriorSpec::FunctionalUniformExact { dose_grid } => {
                !dose_grid.is_empty()
                    && dose_grid.iter().all(|d| d.is_finite() && *d >= 0.0)
                    && dose_grid.windows(2).all(|w| w[0] < w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDesign(format!(
                "invalid prior parameters: {self:?}"
            )))
        }
    }

    /// Unnormalized log density at `value`.
    pub fn log_density(&self, value: f64) -> Result<f64> {
        match *self {
            PriorSpec::Normal { mu, sd } => {
                let z = (value - mu) / sd;
                Ok(-0.5 * z * z)
            }
            PriorSpec::HalfNormal { scale } => {
                if value < 0.0 {
                    return Err(Error::OutOfSupport {
                        value,
                        family: "half-normal",
                    });
                }
                let z = value / scale;
                Ok(-0.5 * z * z)
            }
            PriorSpec::LogNormal { mu_log, sd_log } => {
                if value <= 0.0 {
                    return Err(Error::OutOfSupport {
                        value,
                        family: "log-normal",
                    });
                }
                let lz = (value.ln() - mu_log) / sd_log;
                Ok(-value.ln() - 0.5 * lz * lz)
            }
            PriorSpec::FunctionalUniformApprox { max_dose } => {
                if value <= 0.0 {
                    return Err(Error::OutOfSupport {
                        value,
                        family: "functional-uniform",
                    });
                }
                let lr = (value / max_dose).ln();
                let lz = (lr - FUA_LOG_MEAN) / FUA_LOG_SD;
                Ok(-lr - 0.5 * lz * lz)
            }
            PriorSpec::FunctionalUniformExact { .. } => Err(Error::ExactPriorIsNotScalar),
        }
    }

    /// d/d value of [`Self::log_density`].
    pub fn grad_log_density(&self, value: f64) -> Result<f64> {
        match *self {
            PriorSpec::Normal { mu, sd } => Ok(-(value - mu) / (sd * sd)),
            PriorSpec::HalfNormal { scale } => {
                if value < 0.0 {
                    return Err(Error::OutOfSupport {
                        value,
                        family: "half-normal",
                    });
                }
                Ok(-value / (scale * scale))
            }
            PriorSpec::LogNormal { mu_log, sd_log } => {
                if value <= 0.0 {
                    return Err(Error::OutOfSupport {
                        value,
                        family: "log-normal",
                    });
                }
                let lz = (value.ln() - mu_log) / (sd_log * sd_log);
                Ok((-1.0 - lz) / value)
            }
            PriorSpec::FunctionalUniformApprox { max_dose } => {
                if value <= 0.0 {
                    return Err(Error::OutOfSupport {
                        value,
                        family: "functional-uniform",
                    });
                }
                let lz = ((value / max_dose).ln() - FUA_LOG_MEAN) / (FUA_LOG_SD * FUA_LOG_SD);
                Ok((-1.0 - lz) / value)
            }
            PriorSpec::FunctionalUniformExact { .. } => Err(Error::ExactPriorIsNotScalar),
        }
    }
}

///// Exact functional uniform density, up to normalization: sqrt(det(F'F))
/// where F has one row per grid dose x with the curve gradient
/// (1, x/(x+ED50), -x*Emax/(x+ED50)^2).
pub fn functional_uniform_exact(dose_grid: &[f64], theta: &EmaxParams) -> Result<f64> {
    if theta.ed50 <= 0.0 {
        return Err(Error::OutOfSupport {
            value: theta.ed50,
            family: "functional-uniform-exact",
        });
    }
    let mut distinct = 0usize;
    let mut last = f64::NAN;
    for &x in dose_grid {
        if x != last {
            distinct += 1;
            last = x;
        }
    }
    if distinct < 3 {
        return Err(Error::SingularInformation(format!(
            "need at least 3 distinct grid doses, got {distinct}"
        )));
    }
    // Accumulate the 3x3 Gram matrix of curve gradients.
    let mut g = [[0.0f64; 3]; 3];
    for &x in dose_grid {
        let denom = x + theta.ed50;
        let j = [1.0, x / denom, -x * theta.emax / (denom * denom)];
        for r in 0..3 {
            for c in 0..3 {
                g[r][c] += j[r] * j[c];
            }
        }
    }
    let det = det3(&g);
    if det <= 1e-14 {
        return Err(Error::SingularInformation(format!("det(F'F) = {det:.3e}")));
    }
    Ok(det.sqrt())
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Ratio of the 97.5% to the 2.5% quantile of the between-schedule ED50
/// distribution implied by a heterogeneity value tau: exp(3.92 * tau).
pub fn wip_range(tau: f64) -> f64 {
    (3.92 * tau).exp()
}
