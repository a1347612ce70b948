use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::alternatives::AlternativeFamily;
use super::null::NullModel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_vec, QuadOptions};

/// Parameter estimators whose probability limits drive the standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    NormalMoments,
    ExponentialMean,
    LogisticMl,
    LogisticMoments,
}

/// First and second θ-derivatives at 0 of the limits μ(θ), σ(θ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDerivatives {
    pub d_mu: f64,
    pub d_sigma: f64,
    pub d2_mu: f64,
    pub d2_sigma: f64,
}

/// An estimator paired with an alternative, with its derivatives at θ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorLimit {
    pub estimator: Estimator,
    pub family: AlternativeFamily,
    pub derivatives: EstimatorDerivatives,
}

impl EstimatorLimit {
    pub fn new(estimator: Estimator, family: AlternativeFamily) -> Result<Self> {
        let derivatives = estimator_derivatives(estimator, &family)?;
        Ok(Self { estimator, family, derivatives })
    }

    /// (μ(θ), σ(θ)).
    pub fn at(&self, theta: f64) -> Result<(f64, f64)> {
        estimator_limit(self.estimator, &self.family, theta)
    }
}

/// Logistic Fisher information for location and scale at (0, 1).
pub const LOGISTIC_INFO_MU: f64 = 1.0 / 3.0;
pub fn logistic_info_sigma() -> f64 {
    (PI * PI + 3.0) / 9.0
}

const LIMIT_TOL: f64 = 1e-13;
const ML_RESIDUAL: f64 = 1e-10;

impl Estimator {
    pub fn parse(id: &str) -> Result<Self> {
        Ok(match id {
            "normal_moments" | "moments_normal" => Self::NormalMoments,
            "exponential_mean" => Self::ExponentialMean,
            "ml" | "logistic_ml" => Self::LogisticMl,
            "moments" | "logistic_moments" => Self::LogisticMoments,
            _ => return Err(Error::Config(format!("unknown estimator '{id}'"))),
        })
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::NormalMoments => "normal_moments",
            Self::ExponentialMean => "exponential_mean",
            Self::LogisticMl => "ml",
            Self::LogisticMoments => "moments",
        }
    }

    pub fn null(self) -> NullModel {
        match self {
            Self::NormalMoments => NullModel::Normal,
            Self::ExponentialMean => NullModel::Exponential,
            Self::LogisticMl | Self::LogisticMoments => NullModel::Logistic,
        }
    }

    /// Influence functions (ℓ_μ(z), ℓ_σ(z)) at a standardized point.
    pub fn influence(self, z: f64) -> (f64, f64) {
        match self {
            Self::NormalMoments => (z, (z * z - 1.0) / 2.0),
            Self::ExponentialMean => (0.0, z - 1.0),
            Self::LogisticMoments => (z, (3.0 * z * z - PI * PI) / (2.0 * PI * PI)),
            Self::LogisticMl => {
                let t = (z / 2.0).tanh();
                (3.0 * t, 9.0 / (PI * PI + 3.0) * (z * t - 1.0))
            }
        }
    }

    fn check_pair(self, fam: &AlternativeFamily) -> Result<()> {
        if fam.null == self.null() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "estimator {} belongs to the {} null, alternative {} to the {} null",
                self.id(),
                self.null().id(),
                fam.id(),
                fam.null.id()
            )))
        }
    }
}

/// ∫x g_θ and ∫x² g_θ.
fn raw_moments(fam: &AlternativeFamily, theta: f64) -> Result<(f64, f64)> {
    fam.check_theta(theta)?;
    let r = integrate_vec(
        |x: f64| {
            let g = fam.density_unchecked(theta, x);
            [x * g, x * x * g]
        },
        &fam.support(),
        QuadOptions::rel(LIMIT_TOL, LIMIT_TOL),
    )?;
    Ok((r.value[0], r.value[1]))
}

/// Probability limits (μ(θ), σ(θ)) of the estimator under g_θ. For the
/// exponential null μ ≡ 0 and σ(θ) is the mean.
pub fn estimator_limit(est: Estimator, fam: &AlternativeFamily, theta: f64) -> Result<(f64, f64)> {
    est.check_pair(fam)?;
    match est {
        Estimator::NormalMoments => {
            let (m1, m2) = raw_moments(fam, theta)?;
            Ok((m1, (m2 - m1 * m1).sqrt()))
        }
        Estimator::LogisticMoments => {
            let (m1, m2) = raw_moments(fam, theta)?;
            Ok((m1, 3f64.sqrt() / PI * (m2 - m1 * m1).sqrt()))
        }
        Estimator::ExponentialMean => Ok((0.0, raw_moments(fam, theta)?.0)),
        Estimator::LogisticMl => logistic_ml_limit(fam, theta),
    }
}

/// Root of the population logistic score equations under g_θ by damped
/// Newton from the moment limits.
fn logistic_ml_limit(fam: &AlternativeFamily, theta: f64) -> Result<(f64, f64)> {
    let (mut mu, mut sigma) = estimator_limit(Estimator::LogisticMoments, fam, theta)?;
    let eval = |mu: f64, sigma: f64| -> Result<[f64; 6]> {
        let r = integrate_vec(
            |x: f64| {
                let g = fam.density_unchecked(theta, x);
                if g == 0.0 {
                    return [0.0; 6];
                }
                let z = (x - mu) / sigma;
                let t = (z / 2.0).tanh();
                let dpm = 0.5 * (1.0 - t * t);
                let dps = t + z * dpm;
                [t * g, (z * t - 1.0) * g, -dpm * g / sigma, -z * dpm * g / sigma, -dps * g / sigma, -z * dps * g / sigma]
            },
            &fam.support(),
            QuadOptions::rel(1e-13, 1e-14),
        )?;
        Ok(r.value)
    };
    let mut v = eval(mu, sigma)?;
    let norm = |v: &[f64; 6]| v[0].abs().max(v[1].abs());
    for _ in 0..60 {
        let res = norm(&v);
        if res < 1e-12 {
            return Ok((mu, sigma));
        }
        let det = v[2] * v[5] - v[3] * v[4];
        let dmu = -(v[5] * v[0] - v[3] * v[1]) / det;
        let dsig = -(-v[4] * v[0] + v[2] * v[1]) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (m2, s2) = (mu + step * dmu, sigma + step * dsig);
            if s2 > 0.0 {
                let v2 = eval(m2, s2)?;
                if norm(&v2) < res {
                    mu = m2;
                    sigma = s2;
                    v = v2;
                    accepted = true;
                    break;
                }
            }
            step /= 2.0;
        }
        if !accepted {
            // no further decrease is possible at working precision
            break;
        }
    }
    if norm(&v) < ML_RESIDUAL {
        Ok((mu, sigma))
    } else {
        Err(Error::NoConvergence { what: format!("logistic ML limit for {} at θ={theta}", fam.id()), partial: norm(&v) })
    }
}

/// Location and scale estimating functions ψ and their first two
/// derivatives, as [ψ_μ, ψ_σ, ψ_μ′, ψ_σ′, ψ_μ″, ψ_σ″].
fn ml_psi(null: NullModel, z: f64) -> [f64; 6] {
    match null {
        NullModel::Logistic => {
            let t = (z / 2.0).tanh();
            let d = 0.5 * (1.0 - t * t);
            let dd = -t * d;
            [t, z * t - 1.0, d, t + z * d, dd, 2.0 * d + z * dd]
        }
        _ => [z, z * z - 1.0, 1.0, 2.0 * z, 0.0, 2.0],
    }
}

/// Implicit-function-theorem derivatives of an M-estimator of location and
/// scale defined by the estimating functions of `ml_psi`.
fn ml_derivatives(fam: &AlternativeFamily) -> Result<EstimatorDerivatives> {
    let null = fam.null;
    let r = integrate_vec(
        |x: f64| {
            let f = null.density(x);
            let h = fam.h(x);
            let u = fam.u(x);
            let p = ml_psi(null, x);
            let mut out = [0.0; 18];
            for i in 0..2 {
                let (psi, d, dd) = (p[i], p[2 + i], p[4 + i]);
                out[i] = psi * h; // F_θ
                out[2 + 2 * i] = -d * f; // J[i][μ]
                out[3 + 2 * i] = -x * d * f; // J[i][σ]
                out[6 + i] = psi * u; // F_θθ
                out[8 + 2 * i] = -d * h; // F_pθ[i][μ]
                out[9 + 2 * i] = -x * d * h; // F_pθ[i][σ]
                out[12 + 3 * i] = dd * f; // F_μμ
                out[13 + 3 * i] = (x * dd + d) * f; // F_μσ
                out[14 + 3 * i] = (x * x * dd + 2.0 * x * d) * f; // F_σσ
            }
            out
        },
        &fam.support(),
        QuadOptions::rel(1e-13, 1e-12),
    )?
    .value;
    let j = [[r[2], r[3]], [r[4], r[5]]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let solve = |b: [f64; 2]| -> [f64; 2] {
        [(j[1][1] * b[0] - j[0][1] * b[1]) / det, (-j[1][0] * b[0] + j[0][0] * b[1]) / det]
    };
    let p1 = solve([-r[0], -r[1]]);
    let mut rhs = [0.0; 2];
    for i in 0..2 {
        let fpt = r[8 + 2 * i] * p1[0] + r[9 + 2 * i] * p1[1];
        let fpp = r[12 + 3 * i] * p1[0] * p1[0] + 2.0 * r[13 + 3 * i] * p1[0] * p1[1] + r[14 + 3 * i] * p1[1] * p1[1];
        rhs[i] = -(r[6 + i] + 2.0 * fpt + fpp);
    }
    let p2 = solve(rhs);
    Ok(EstimatorDerivatives { d_mu: p1[0], d_sigma: p1[1], d2_mu: p2[0], d2_sigma: p2[1] })
}

/// ∫x h, ∫x² h, ∫x u, ∫x² u.
fn moment_integrals(fam: &AlternativeFamily) -> Result<[f64; 4]> {
    Ok(integrate_vec(
        |x: f64| {
            let (h, u) = (fam.h(x), fam.u(x));
            [x * h, x * x * h, x * u, x * x * u]
        },
        &fam.support(),
        QuadOptions::rel(1e-13, 1e-12),
    )?
    .value)
}

/// (μ′(0), σ′(0), μ″(0), σ″(0)) for the estimator under the family.
pub fn estimator_derivatives(est: Estimator, fam: &AlternativeFamily) -> Result<EstimatorDerivatives> {
    est.check_pair(fam)?;
    match est {
        Estimator::LogisticMl => ml_derivatives(fam),
        Estimator::NormalMoments => {
            let [xh, x2h, xu, x2u] = moment_integrals(fam)?;
            Ok(EstimatorDerivatives {
                d_mu: xh,
                d_sigma: 0.5 * x2h,
                d2_mu: xu,
                d2_sigma: 0.5 * x2u - xh * xh - 0.25 * x2h * x2h,
            })
        }
        Estimator::LogisticMoments => {
            let [xh, x2h, xu, x2u] = moment_integrals(fam)?;
            let pi2 = PI * PI;
            Ok(EstimatorDerivatives {
                d_mu: xh,
                d_sigma: 1.5 / pi2 * x2h,
                d2_mu: xu,
                d2_sigma: 1.5 / pi2 * x2u - 3.0 / pi2 * xh * xh - 9.0 / (4.0 * pi2 * pi2) * x2h * x2h,
            })
        }
        Estimator::ExponentialMean => {
            let [xh, _, xu, _] = moment_integrals(fam)?;
            Ok(EstimatorDerivatives { d_mu: 0.0, d_sigma: xh, d2_mu: 0.0, d2_sigma: xu })
        }
    }
}

/// Normal-null derivatives through the maximum-likelihood estimating
/// equations; they coincide with the moment route and serve as its check.
pub fn normal_ml_derivatives(fam: &AlternativeFamily) -> Result<EstimatorDerivatives> {
    if fam.null != NullModel::Normal {
        return Err(Error::Config("normal_ml_derivatives needs a normal-null family".into()));
    }
    ml_derivatives(fam)
}
