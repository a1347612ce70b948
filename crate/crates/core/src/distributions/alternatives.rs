use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::null::{logistic_pdf, NullModel};
use crate::error::{Error, Result};
use crate::quadrature::IntegrationDomain;
use crate::special::{gamma_fn, EULER_GAMMA};

/// Parameters (μ₁, μ₂, σ₁, σ₂, ρ) of a bivariate normal law; ρ is the
/// off-diagonal covariance entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinormalParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl BinormalParams {
    pub const STANDARD: Self = Self { mu1: 0.0, mu2: 0.0, sigma1: 1.0, sigma2: 1.0, rho: 0.0 };

    pub fn new(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        let p = Self { mu1, mu2, sigma1, sigma2, rho };
        if !(sigma1 > 0.0 && sigma2 > 0.0) || p.det() <= 0.0 {
            return Err(Error::Domain(format!("covariance of {p:?} is not positive definite")));
        }
        Ok(p)
    }

    /// The contaminating laws g⁽¹⁾_cn … g⁽¹¹⁾_cn.
    pub fn contamination_preset(k: usize) -> Result<Self> {
        let p = match k {
            1 => (0.1, 0.0, 1.0, 1.0, 0.0),
            2 => (0.5, 0.0, 1.0, 1.0, 0.0),
            3 => (0.9, 0.0, 1.0, 1.0, 0.0),
            4 => (1.5, 0.0, 1.0, 1.0, 0.0),
            5 => (0.0, 0.0, 1.0, 1.0, 0.1),
            6 => (0.0, 0.0, 1.0, 1.0, 0.5),
            7 => (0.0, 0.0, 1.0, 1.0, 0.9),
            8 => (0.0, 0.0, 0.5, 1.0, 0.0),
            9 => (0.0, 0.0, 0.7, 1.0, 0.0),
            10 => (0.0, 0.0, 0.9, 1.0, 0.0),
            11 => (0.0, 0.0, 1.1, 1.0, 0.0),
            _ => return Err(Error::Config(format!("no contamination preset {k} (expected 1..=11)"))),
        };
        Self::new(p.0, p.1, p.2, p.3, p.4)
    }

    fn det(&self) -> f64 {
        self.sigma1 * self.sigma1 * self.sigma2 * self.sigma2 - self.rho * self.rho
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        let (a, c) = (self.sigma1 * self.sigma1, self.sigma2 * self.sigma2);
        let det = self.det();
        let (dx, dy) = (x - self.mu1, y - self.mu2);
        let q = (c * dx * dx - 2.0 * self.rho * dx * dy + a * dy * dy) / det;
        (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
    }

    /// Characteristic function as (re, im).
    pub fn cf(&self, t1: f64, t2: f64) -> (f64, f64) {
        let quad = self.sigma1 * self.sigma1 * t1 * t1 + 2.0 * self.rho * t1 * t2 + self.sigma2 * self.sigma2 * t2 * t2;
        let m = (-0.5 * quad).exp();
        let ph = t1 * self.mu1 + t2 * self.mu2;
        (m * ph.cos(), m * ph.sin())
    }

    /// f(x,y)/f₀(x,y) against the standard bivariate normal, in log space.
    fn ratio_to_standard(&self, x: f64, y: f64) -> f64 {
        let (a, c) = (self.sigma1 * self.sigma1, self.sigma2 * self.sigma2);
        let det = self.det();
        let (dx, dy) = (x - self.mu1, y - self.mu2);
        let q = (c * dx * dx - 2.0 * self.rho * dx * dy + a * dy * dy) / det;
        (-0.5 * q + 0.5 * (x * x + y * y) - 0.5 * det.ln()).exp()
    }
}

/// Identifies an alternative family. Univariate families of the first group
/// are defined relative to the null they perturb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AltKind {
    Lehmann,
    Ley1,
    Ley2,
    /// Mixture (1−θ)f₀ + θf_c. On the normal null f_c = N(mu, p) with p the
    /// variance; on the logistic null f_c is logistic with location mu and
    /// scale p.
    Contam { mu: f64, p: f64 },
    Weibull,
    Gamma,
    Makeham,
    Lfr,
    Me { beta: f64 },
    BivLocation,
    BivCorrelation,
    BivScale1,
    BivScale2,
    BivContam { params: BinormalParams },
}

/// A θ-indexed family of densities g_θ with g₀ equal to the null density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternativeFamily {
    pub kind: AltKind,
    pub null: NullModel,
}

impl AlternativeFamily {
    pub fn new(kind: AltKind, null: NullModel) -> Result<Self> {
        let ok = match kind {
            AltKind::Lehmann | AltKind::Ley1 | AltKind::Ley2 => {
                matches!(null, NullModel::Normal | NullModel::Logistic)
            }
            AltKind::Contam { p, .. } => {
                if !(p > 0.0) {
                    return Err(Error::Domain(format!("contamination spread must be positive, got {p}")));
                }
                matches!(null, NullModel::Normal | NullModel::Logistic)
            }
            AltKind::Weibull | AltKind::Gamma | AltKind::Makeham | AltKind::Lfr => null == NullModel::Exponential,
            AltKind::Me { beta } => {
                if !(beta > 1.0) {
                    return Err(Error::Domain(format!("ME(β) needs β > 1, got {beta}")));
                }
                null == NullModel::Exponential
            }
            AltKind::BivLocation
            | AltKind::BivCorrelation
            | AltKind::BivScale1
            | AltKind::BivScale2
            | AltKind::BivContam { .. } => null.dimension() == 2,
        };
        if !ok {
            return Err(Error::Config(format!("alternative {kind:?} cannot be paired with the {} null", null.id())));
        }
        Ok(Self { kind, null })
    }

    /// Parses identifiers such as `lehmann`, `contam:1,1`, `me:3`,
    /// `biv_contam:5` or `biv_contam:0.1,0,1,1,0`.
    pub fn parse(id: &str, null: NullModel) -> Result<Self> {
        let (head, args) = match id.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a)),
            None => (id.trim(), None),
        };
        let nums = |a: Option<&str>| -> Result<Vec<f64>> {
            let a = a.ok_or_else(|| Error::Config(format!("alternative '{id}' needs parameters")))?;
            a.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}' in '{id}'"))))
                .collect()
        };
        let no_args = |k: AltKind| -> Result<AltKind> {
            if args.is_some() {
                Err(Error::Config(format!("alternative '{head}' takes no parameters")))
            } else {
                Ok(k)
            }
        };
        let kind = match head {
            "lehmann" => no_args(AltKind::Lehmann)?,
            "ley1" => no_args(AltKind::Ley1)?,
            "ley2" => no_args(AltKind::Ley2)?,
            "weibull" => no_args(AltKind::Weibull)?,
            "gamma" => no_args(AltKind::Gamma)?,
            "makeham" => no_args(AltKind::Makeham)?,
            "lfr" => no_args(AltKind::Lfr)?,
            "biv_location" => no_args(AltKind::BivLocation)?,
            "biv_correlation" => no_args(AltKind::BivCorrelation)?,
            "biv_scale1" => no_args(AltKind::BivScale1)?,
            "biv_scale2" => no_args(AltKind::BivScale2)?,
            "contam" => match nums(args)?.as_slice() {
                [mu, p] => AltKind::Contam { mu: *mu, p: *p },
                _ => return Err(Error::Config(format!("'{id}': contam takes two numbers"))),
            },
            "me" => match nums(args)?.as_slice() {
                [b] => AltKind::Me { beta: *b },
                _ => return Err(Error::Config(format!("'{id}': me takes one number"))),
            },
            "biv_contam" => match nums(args)?.as_slice() {
                [k] if *k >= 1.0 && k.fract() == 0.0 => AltKind::BivContam {
                    params: BinormalParams::contamination_preset(*k as usize)?,
                },
                [a, b, c, d, e] => AltKind::BivContam { params: BinormalParams::new(*a, *b, *c, *d, *e)? },
                _ => return Err(Error::Config(format!("'{id}': biv_contam takes a preset index or five numbers"))),
            },
            _ => return Err(Error::Config(format!("unknown alternative '{id}'"))),
        };
        Self::new(kind, null)
    }

    /// Stable identifier, the inverse of [`AlternativeFamily::parse`].
    pub fn id(&self) -> String {
        match self.kind {
            AltKind::Lehmann => "lehmann".into(),
            AltKind::Ley1 => "ley1".into(),
            AltKind::Ley2 => "ley2".into(),
            AltKind::Contam { mu, p } => format!("contam:{mu},{p}"),
            AltKind::Weibull => "weibull".into(),
            AltKind::Gamma => "gamma".into(),
            AltKind::Makeham => "makeham".into(),
            AltKind::Lfr => "lfr".into(),
            AltKind::Me { beta } => format!("me:{beta}"),
            AltKind::BivLocation => "biv_location".into(),
            AltKind::BivCorrelation => "biv_correlation".into(),
            AltKind::BivScale1 => "biv_scale1".into(),
            AltKind::BivScale2 => "biv_scale2".into(),
            AltKind::BivContam { params: p } => {
                for k in 1..=11 {
                    if BinormalParams::contamination_preset(k).ok() == Some(p) {
                        return format!("biv_contam:{k}");
                    }
                }
                format!("biv_contam:{},{},{},{},{}", p.mu1, p.mu2, p.sigma1, p.sigma2, p.rho)
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.null.dimension()
    }

    /// Closed interval of admissible θ.
    pub fn theta_range(&self) -> (f64, f64) {
        match self.kind {
            AltKind::Lehmann => (-1.0 + 1e-12, f64::INFINITY),
            AltKind::Ley1 => (-1.0, f64::INFINITY),
            AltKind::Ley2 => (-1.0 / PI, 1.0 / PI),
            AltKind::Contam { .. } | AltKind::BivContam { .. } => (0.0, 1.0),
            AltKind::Weibull | AltKind::Gamma => (-1.0 + 1e-12, f64::INFINITY),
            AltKind::Makeham => (-1.0, f64::INFINITY),
            AltKind::Lfr => (0.0, f64::INFINITY),
            AltKind::Me { beta } => (0.0, 1.0 / (beta - 1.0)),
            AltKind::BivLocation => (f64::NEG_INFINITY, f64::INFINITY),
            AltKind::BivCorrelation => (-1.0 + 1e-12, 1.0 - 1e-12),
            AltKind::BivScale1 | AltKind::BivScale2 => (f64::NEG_INFINITY, 1.0 - 1e-12),
        }
    }

    /// True when θ may take both signs near zero.
    pub fn two_sided(&self) -> bool {
        self.theta_range().0 < 0.0
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        let (lo, hi) = self.theta_range();
        if theta.is_finite() && theta >= lo && theta <= hi {
            Ok(())
        } else {
            Err(Error::Domain(format!("θ = {theta} outside [{lo}, {hi}] for {}", self.id())))
        }
    }

    /// Integration domain of the univariate support, with the points where
    /// the alternative's density is not smooth.
    pub fn support(&self) -> IntegrationDomain {
        self.null.support()
    }

    fn contam_density(&self, x: f64) -> f64 {
        match self.kind {
            AltKind::Contam { mu, p } => match self.null {
                NullModel::Logistic => logistic_pdf((x - mu) / p) / p,
                _ => (-(x - mu) * (x - mu) / (2.0 * p)).exp() / (2.0 * PI * p).sqrt(),
            },
            _ => unreachable!(),
        }
    }

    /// g_θ(x) for univariate families.
    pub fn density(&self, theta: f64, x: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.require_dim(1)?;
        Ok(self.density_unchecked(theta, x))
    }

    pub(crate) fn density_unchecked(&self, theta: f64, x: f64) -> f64 {
        let n = self.null;
        if n == NullModel::Exponential && x < 0.0 {
            return 0.0;
        }
        match self.kind {
            AltKind::Lehmann => {
                let f = n.density(x);
                if f == 0.0 {
                    return 0.0;
                }
                (1.0 + theta) * (theta * n.log_cdf(x)).exp() * f
            }
            AltKind::Ley1 => {
                let f = n.density(x);
                let fc = n.cdf(x);
                let sf = n.cdf(-x);
                f * (-theta * sf).exp() * (1.0 + theta * fc)
            }
            AltKind::Ley2 => n.density(x) * (1.0 - theta * PI * (PI * n.cdf(x)).cos()),
            AltKind::Contam { .. } => (1.0 - theta) * n.density(x) + theta * self.contam_density(x),
            AltKind::Weibull => {
                if x == 0.0 {
                    return if theta == 0.0 { 1.0 } else if theta > 0.0 { 0.0 } else { f64::INFINITY };
                }
                let xt = x.powf(theta);
                (1.0 + theta) * xt * (-x * xt).exp()
            }
            AltKind::Gamma => {
                if x == 0.0 {
                    return if theta == 0.0 { 1.0 } else if theta > 0.0 { 0.0 } else { f64::INFINITY };
                }
                (theta * x.ln() - x).exp() / gamma_fn(1.0 + theta).unwrap_or(f64::NAN)
            }
            AltKind::Makeham => {
                let a = -(-x).exp_m1();
                let b = x - a;
                (1.0 + theta * a) * (-x - theta * b).exp()
            }
            AltKind::Lfr => (1.0 + theta * x) * (-x - theta * x * x / 2.0).exp(),
            AltKind::Me { beta } => (1.0 + theta) * (-x).exp() - theta * beta * (-beta * x).exp(),
            _ => f64::NAN,
        }
    }

    /// h(x) = ∂g_θ(x)/∂θ at θ = 0.
    pub fn h(&self, x: f64) -> f64 {
        let n = self.null;
        if n == NullModel::Exponential && x < 0.0 {
            return 0.0;
        }
        match self.kind {
            AltKind::Contam { .. } => self.contam_density(x) - n.density(x),
            AltKind::Me { beta } => (-x).exp() - beta * (-beta * x).exp(),
            _ => {
                let f = n.density(x);
                if f == 0.0 {
                    0.0
                } else {
                    self.h_ratio(x) * f
                }
            }
        }
    }

    /// h(x)/f₀(x), evaluated without dividing by a possibly underflowed f₀.
    pub fn h_ratio(&self, x: f64) -> f64 {
        let n = self.null;
        match self.kind {
            AltKind::Lehmann => 1.0 + n.log_cdf(x),
            AltKind::Ley1 => 2.0 * n.cdf(x) - 1.0,
            AltKind::Ley2 => -PI * (PI * n.cdf(x)).cos(),
            AltKind::Contam { mu, p } => match n {
                NullModel::Logistic => {
                    // ratio of logistic densities, in log space
                    let z = (x - mu) / p;
                    let lc = -z.abs() - 2.0 * (-z.abs()).exp().ln_1p() - p.ln();
                    let l0 = -x.abs() - 2.0 * (-x.abs()).exp().ln_1p();
                    (lc - l0).exp() - 1.0
                }
                _ => (-(x - mu) * (x - mu) / (2.0 * p) + x * x / 2.0 - 0.5 * p.ln()).exp() - 1.0,
            },
            AltKind::Weibull => {
                let l = x.ln();
                1.0 + l - x * l
            }
            AltKind::Gamma => x.ln() + EULER_GAMMA,
            AltKind::Makeham => {
                let a = -(-x).exp_m1();
                a - (x - a)
            }
            AltKind::Lfr => x - x * x / 2.0,
            AltKind::Me { beta } => 1.0 - beta * (-(beta - 1.0) * x).exp(),
            _ => f64::NAN,
        }
    }

    /// u(x) = ∂²g_θ(x)/∂θ² at θ = 0.
    pub fn u(&self, x: f64) -> f64 {
        let n = self.null;
        if n == NullModel::Exponential && x < 0.0 {
            return 0.0;
        }
        let f = n.density(x);
        match self.kind {
            AltKind::Lehmann => {
                if f == 0.0 {
                    return 0.0;
                }
                let l = n.log_cdf(x);
                (2.0 * l + l * l) * f
            }
            AltKind::Ley1 => {
                let fc = n.cdf(x);
                f * n.cdf(-x) * (1.0 - 3.0 * fc)
            }
            AltKind::Ley2 | AltKind::Contam { .. } | AltKind::Me { .. } => 0.0,
            AltKind::Weibull => {
                if x == 0.0 {
                    return f64::INFINITY;
                }
                let l = x.ln();
                let r = 1.0 + l - x * l;
                f * (r * r - 1.0 - x * l * l)
            }
            AltKind::Gamma => {
                let r = x.ln() + EULER_GAMMA;
                f * (r * r - PI * PI / 6.0)
            }
            AltKind::Makeham => {
                let a = -(-x).exp_m1();
                let b = x - a;
                f * ((a - b) * (a - b) - a * a)
            }
            AltKind::Lfr => {
                let r = x - x * x / 2.0;
                f * (r * r - x * x)
            }
            _ => f64::NAN,
        }
    }

    fn require_dim(&self, d: usize) -> Result<()> {
        if self.dimension() == d {
            Ok(())
        } else {
            Err(Error::Domain(format!("{} is {}-variate, called with {d} coordinates", self.id(), self.dimension())))
        }
    }

    /// The Gaussian member g_θ for the non-mixture bivariate families.
    fn binormal_at(&self, theta: f64) -> Option<BinormalParams> {
        let s = BinormalParams::STANDARD;
        match self.kind {
            AltKind::BivLocation => Some(BinormalParams { mu1: theta, ..s }),
            AltKind::BivCorrelation => Some(BinormalParams { rho: theta, ..s }),
            AltKind::BivScale1 => Some(BinormalParams { sigma1: 1.0 - theta, ..s }),
            AltKind::BivScale2 => Some(BinormalParams { sigma1: 1.0 - theta, sigma2: 1.0 - theta, ..s }),
            _ => None,
        }
    }

    /// g_θ(x, y) for bivariate families.
    pub fn density2(&self, theta: f64, x: f64, y: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.require_dim(2)?;
        Ok(match self.kind {
            AltKind::BivContam { params } => {
                (1.0 - theta) * BinormalParams::STANDARD.density(x, y) + theta * params.density(x, y)
            }
            _ => self.binormal_at(theta).expect("bivariate family").density(x, y),
        })
    }

    /// Characteristic function of g_θ as (re, im).
    pub fn cf2(&self, theta: f64, t1: f64, t2: f64) -> Result<(f64, f64)> {
        self.check_theta(theta)?;
        self.require_dim(2)?;
        Ok(match self.kind {
            AltKind::BivContam { params } => {
                let (a, _) = BinormalParams::STANDARD.cf(t1, t2);
                let (cr, ci) = params.cf(t1, t2);
                ((1.0 - theta) * a + theta * cr, theta * ci)
            }
            _ => self.binormal_at(theta).expect("bivariate family").cf(t1, t2),
        })
    }

    /// Mean vector of g_θ.
    pub fn mean2(&self, theta: f64) -> Result<(f64, f64)> {
        self.check_theta(theta)?;
        self.require_dim(2)?;
        Ok(match self.kind {
            AltKind::BivLocation => (theta, 0.0),
            AltKind::BivContam { params } => (theta * params.mu1, theta * params.mu2),
            _ => (0.0, 0.0),
        })
    }

    /// h(x,y)/f₀(x,y).
    pub fn h2_ratio(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            AltKind::BivLocation => x,
            AltKind::BivCorrelation => x * y,
            AltKind::BivScale1 => 1.0 - x * x,
            AltKind::BivScale2 => 2.0 - x * x - y * y,
            AltKind::BivContam { params } => params.ratio_to_standard(x, y) - 1.0,
            _ => f64::NAN,
        }
    }

    pub fn h2(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            AltKind::BivContam { params } => params.density(x, y) - BinormalParams::STANDARD.density(x, y),
            _ => self.h2_ratio(x, y) * BinormalParams::STANDARD.density(x, y),
        }
    }

    pub fn u2(&self, x: f64, y: f64) -> f64 {
        let f = BinormalParams::STANDARD.density(x, y);
        match self.kind {
            AltKind::BivLocation => (x * x - 1.0) * f,
            AltKind::BivCorrelation => ((x * y).powi(2) + 1.0 - x * x - y * y) * f,
            AltKind::BivScale1 => ((1.0 - x * x).powi(2) + 1.0 - 3.0 * x * x) * f,
            AltKind::BivScale2 => {
                let r2 = x * x + y * y;
                ((2.0 - r2).powi(2) + 2.0 - 3.0 * r2) * f
            }
            AltKind::BivContam { .. } => 0.0,
            _ => f64::NAN,
        }
    }
}
