use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::IntegrationDomain;
use crate::special::{normal_cdf, normal_log_cdf, normal_pdf};

/// Null hypotheses in scope. Univariate nulls are standardized: location 0
/// and unit scale (the exponential has unit mean).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModel {
    Normal,
    Logistic,
    Exponential,
    /// N₂(0, I) with nothing estimated.
    BinormalSimple,
    /// N₂(μ, I) with the mean estimated.
    BinormalMean,
}

impl NullModel {
    pub fn parse(id: &str) -> Result<Self> {
        Ok(match id {
            "normal" => Self::Normal,
            "logistic" => Self::Logistic,
            "exponential" => Self::Exponential,
            "binormal_simple" => Self::BinormalSimple,
            "binormal_mean" => Self::BinormalMean,
            _ => return Err(Error::Config(format!("unknown null model '{id}'"))),
        })
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Logistic => "logistic",
            Self::Exponential => "exponential",
            Self::BinormalSimple => "binormal_simple",
            Self::BinormalMean => "binormal_mean",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            Self::BinormalSimple | Self::BinormalMean => 2,
            _ => 1,
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, Self::Exponential)
    }

    /// Integration domain of the univariate support.
    pub fn support(self) -> IntegrationDomain {
        match self {
            Self::Exponential => IntegrationDomain::half_line(0.0),
            _ => IntegrationDomain::real_line(),
        }
    }

    pub fn density(self, x: f64) -> f64 {
        match self {
            Self::Normal => normal_pdf(x),
            Self::Logistic => logistic_pdf(x),
            Self::Exponential => {
                if x < 0.0 {
                    0.0
                } else {
                    (-x).exp()
                }
            }
            Self::BinormalSimple | Self::BinormalMean => normal_pdf(x),
        }
    }

    pub fn density2(self, x: f64, y: f64) -> f64 {
        (-(x * x + y * y) / 2.0).exp() / (2.0 * PI)
    }

    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Self::Logistic => logistic_cdf(x),
            Self::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            _ => normal_cdf(x),
        }
    }

    /// ln F₀(x), finite wherever F₀(x) > 0.
    pub fn log_cdf(self, x: f64) -> f64 {
        match self {
            Self::Logistic => {
                if x > 0.0 {
                    -(-x).exp().ln_1p()
                } else {
                    x - x.exp().ln_1p()
                }
            }
            Self::Exponential => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (-(-x).exp_m1()).ln()
                }
            }
            _ => normal_log_cdf(x),
        }
    }

    /// f₀′(x)/f₀(x).
    pub fn score(self, x: f64) -> f64 {
        match self {
            Self::Logistic => -(x / 2.0).tanh(),
            Self::Exponential => -1.0,
            _ => -x,
        }
    }

    /// Characteristic function of the null law as (re, im).
    pub fn cf(self, t: f64) -> (f64, f64) {
        match self {
            Self::Exponential => {
                let d = 1.0 + t * t;
                (1.0 / d, t / d)
            }
            _ => (self.cf_real(t), 0.0),
        }
    }

    /// C₀(t), the real part of the null characteristic function.
    pub fn cf_real(self, t: f64) -> f64 {
        match self {
            Self::Logistic => logistic_cf(t).0,
            Self::Exponential => 1.0 / (1.0 + t * t),
            _ => (-0.5 * t * t).exp(),
        }
    }

    /// C₀′(t).
    pub fn cf_real_derivative(self, t: f64) -> f64 {
        match self {
            Self::Logistic => logistic_cf(t).1,
            Self::Exponential => -2.0 * t / (1.0 + t * t).powi(2),
            _ => -t * (-0.5 * t * t).exp(),
        }
    }

    /// C₀″(t).
    pub fn cf_real_second_derivative(self, t: f64) -> f64 {
        match self {
            Self::Logistic => logistic_cf(t).2,
            Self::Exponential => (6.0 * t * t - 2.0) / (1.0 + t * t).powi(3),
            _ => (t * t - 1.0) * (-0.5 * t * t).exp(),
        }
    }
}

pub(crate) fn logistic_pdf(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub(crate) fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// πt/sinh(πt) and its first two derivatives in t.
pub fn logistic_cf(t: f64) -> (f64, f64, f64) {
    let y = PI * t;
    let ay = y.abs();
    if ay < 0.05 {
        let y2 = y * y;
        let c = 1.0 - y2 / 6.0 + 7.0 * y2 * y2 / 360.0 - 31.0 * y2 * y2 * y2 / 15120.0
            + 127.0 * y2.powi(4) / 604_800.0;
        let d1 = -y / 3.0 + 7.0 * y * y2 / 90.0 - 31.0 * y * y2 * y2 / 2520.0 + 127.0 * y * y2.powi(3) / 75_600.0;
        let d2 = -1.0 / 3.0 + 7.0 * y2 / 30.0 - 31.0 * y2 * y2 / 504.0 + 127.0 * y2.powi(3) / 10_800.0;
        return (c, PI * d1, PI * PI * d2);
    }
    // 1/sinh(|y|) = 2e^{−|y|}/(1 − e^{−2|y|}) stays finite for large |y|
    let e = (-ay).exp();
    let inv_sinh = 2.0 * e / (1.0 - e * e);
    let coth = (1.0 + e * e) / (1.0 - e * e);
    let c = ay * inv_sinh;
    // derivatives of y/sinh y in y; the first is odd, the second even
    let d1 = inv_sinh * (1.0 - ay * coth) * y.signum();
    let d2 = inv_sinh * (-2.0 * coth - ay + 2.0 * ay * coth * coth);
    (c, PI * d1, PI * PI * d2)
}
