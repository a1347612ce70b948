//! Kullback–Leibler coefficients, probability limits b(θ) of the test
//! statistics, their curvature at θ = 0, and the resulting local approximate
//! Bahadur efficiency b″(0)/(2·λ₁·kl₂).

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{estimator_derivatives, estimator_limit, AlternativeFamily, Estimator, NullModel};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::quadrature::{integrate_vec, integrate_with, IntegrationDomain, QuadOptions};
use crate::spectral::{lambda1, lambda1_mc, SpectralResult, WeightFunction};

/// Which parameters of the bivariate normal null are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// N₂(0, I) fully specified.
    Simple,
    /// N₂(μ, I) with μ estimated by the sample mean.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "test")]
pub enum TestFamily {
    /// Energy test of normality, weight |t|^{−1−γ}.
    Energy { gamma: f64 },
    /// BHEP test of normality, weight e^{−γt²}.
    Bhep { gamma: f64 },
    /// Logistic test, weight e^{−γ|t|}.
    Logistic { gamma: f64, est: Estimator },
    /// Exponentiality test, weight e^{−γ|t|}.
    ExpW1 { gamma: f64 },
    /// Exponentiality test, weight e^{−γt²}.
    ExpW2 { gamma: f64 },
    BivBhep { gamma: f64, hyp: Hypothesis },
    BivEnergy { gamma: f64, hyp: Hypothesis },
}

impl TestFamily {
    pub fn gamma(&self) -> f64 {
        match *self {
            Self::Energy { gamma }
            | Self::Bhep { gamma }
            | Self::Logistic { gamma, .. }
            | Self::ExpW1 { gamma }
            | Self::ExpW2 { gamma }
            | Self::BivBhep { gamma, .. }
            | Self::BivEnergy { gamma, .. } => gamma,
        }
    }

    /// Short identifier such as `bhep`, `logistic_ml` or `biv_energy_mean`.
    pub fn id(&self) -> String {
        match self {
            Self::Energy { .. } => "energy".into(),
            Self::Bhep { .. } => "bhep".into(),
            Self::Logistic { est, .. } => format!("logistic_{}", est.id()),
            Self::ExpW1 { .. } => "exp_w1".into(),
            Self::ExpW2 { .. } => "exp_w2".into(),
            Self::BivBhep { hyp, .. } => format!("biv_bhep_{}", hyp_id(*hyp)),
            Self::BivEnergy { hyp, .. } => format!("biv_energy_{}", hyp_id(*hyp)),
        }
    }

    /// Inverse of [`TestFamily::id`] at a given γ.
    pub fn parse(id: &str, gamma: f64) -> Result<Self> {
        Ok(match id {
            "energy" | "ge" => Self::Energy { gamma },
            "bhep" => Self::Bhep { gamma },
            "logistic_ml" => Self::Logistic { gamma, est: Estimator::LogisticMl },
            "logistic_moments" => Self::Logistic { gamma, est: Estimator::LogisticMoments },
            "exp_w1" => Self::ExpW1 { gamma },
            "exp_w2" => Self::ExpW2 { gamma },
            "biv_bhep_simple" => Self::BivBhep { gamma, hyp: Hypothesis::Simple },
            "biv_bhep_mean" => Self::BivBhep { gamma, hyp: Hypothesis::Mean },
            "biv_energy_simple" => Self::BivEnergy { gamma, hyp: Hypothesis::Simple },
            "biv_energy_mean" => Self::BivEnergy { gamma, hyp: Hypothesis::Mean },
            _ => return Err(Error::Config(format!("unknown test '{id}'"))),
        })
    }
}

fn hyp_id(h: Hypothesis) -> &'static str {
    match h {
        Hypothesis::Simple => "simple",
        Hypothesis::Mean => "mean",
    }
}

/// A test together with its weight, limit kernel and null model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub family: TestFamily,
    pub weight: WeightFunction,
    pub kernel: KernelSpec,
    pub null: NullModel,
}

impl TestSpec {
    pub fn new(family: TestFamily) -> Result<Self> {
        let g = family.gamma();
        let (weight, kernel, null) = match family {
            TestFamily::Energy { .. } => (WeightFunction::energy(g)?, KernelSpec::NormalEstimated, NullModel::Normal),
            TestFamily::Bhep { .. } => (WeightFunction::gauss(g)?, KernelSpec::NormalEstimated, NullModel::Normal),
            TestFamily::Logistic { est, .. } => {
                if est.null() != NullModel::Logistic {
                    return Err(Error::Config(format!("estimator {} is not a logistic estimator", est.id())));
                }
                (WeightFunction::exp_abs(g)?, KernelSpec::Logistic { est }, NullModel::Logistic)
            }
            TestFamily::ExpW1 { .. } => (WeightFunction::exp_abs(g)?, KernelSpec::Exponential, NullModel::Exponential),
            TestFamily::ExpW2 { .. } => (WeightFunction::gauss(g)?, KernelSpec::Exponential, NullModel::Exponential),
            TestFamily::BivBhep { hyp, .. } | TestFamily::BivEnergy { hyp, .. } => {
                let weight = if matches!(family, TestFamily::BivBhep { .. }) {
                    WeightFunction::gauss(g)?.with_dim(2)
                } else {
                    if g > 1.0 {
                        return Err(Error::Config(format!("bivariate energy test is limited to 0 < γ ≤ 1, got {g}")));
                    }
                    WeightFunction::energy(g)?.with_dim(2)
                };
                match hyp {
                    Hypothesis::Simple => (weight, KernelSpec::NormalSimple { dim: 2 }, NullModel::BinormalSimple),
                    Hypothesis::Mean => (weight, KernelSpec::NormalMean { dim: 2 }, NullModel::BinormalMean),
                }
            }
        };
        Ok(Self { family, weight, kernel, null })
    }

    /// The same test with its weight multiplied by `c`.
    pub fn with_weight_scale(mut self, c: f64) -> Self {
        self.weight = self.weight.scaled(c);
        self
    }

    /// Estimator used to standardize the data, when one is used.
    pub fn estimator(&self) -> Option<Estimator> {
        match self.family {
            TestFamily::Energy { .. } | TestFamily::Bhep { .. } => Some(Estimator::NormalMoments),
            TestFamily::Logistic { est, .. } => Some(est),
            TestFamily::ExpW1 { .. } | TestFamily::ExpW2 { .. } => Some(Estimator::ExponentialMean),
            _ => None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.null.dimension()
    }

    fn check_family(&self, fam: &AlternativeFamily) -> Result<()> {
        if fam.null != self.null {
            return Err(Error::Config(format!(
                "alternative {} perturbs the {} null, test {} needs {}",
                fam.id(),
                fam.null.id(),
                self.family.id(),
                self.null.id()
            )));
        }
        Ok(())
    }

    /// Largest eigenvalue of the limit covariance operator.
    pub fn lambda1(&self, opts: &SpectralOptions) -> Result<SpectralResult> {
        if self.dimension() == 1 {
            let sched = opts.schedule.clone().unwrap_or_else(|| self.weight.default_schedule());
            lambda1(&self.kernel, &self.weight, &sched)
        } else {
            lambda1_mc(&self.kernel, &self.weight, opts.mc_points, opts.mc_reps, opts.seed)
        }
    }
}

/// Controls for the eigenvalue computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Grid schedule; the weight's default when absent.
    pub schedule: Option<Vec<(usize, f64)>>,
    pub mc_points: usize,
    pub mc_reps: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { schedule: None, mc_points: 6000, mc_reps: 6, seed: 20_240_601 }
    }
}

// ---------------------------------------------------------------------------
// Kullback–Leibler coefficient

/// Coefficient of θ² in 2·inf K(g_θ, null family).
///
/// Normal null: ∫h²/φ − (∫xh)² − ½(∫x²h)². Exponential null: ∫h²eˣ − (∫xh)².
/// Logistic null: the general location-scale form at the maximum-likelihood
/// derivatives. Bivariate nulls: ∫h²/f₀, less |∫xh|² when the mean is
/// estimated.
pub fn kl_coefficient(fam: &AlternativeFamily) -> Result<f64> {
    let opts = QuadOptions::rel(1e-14, 1e-11);
    match fam.null {
        NullModel::Normal => {
            let r = integrate_vec(|x| {
                let h = fam.h(x);
                [if h == 0.0 { 0.0 } else { fam.h_ratio(x) * h }, x * h, x * x * h]
            }, &fam.support(), opts)?;
            let [a, b, c] = r.value;
            Ok(a - b * b - 0.5 * c * c)
        }
        NullModel::Exponential => {
            let r = integrate_vec(|x| {
                let h = fam.h(x);
                [if h == 0.0 { 0.0 } else { fam.h_ratio(x) * h }, x * h]
            }, &fam.support(), opts)?;
            let [a, b] = r.value;
            Ok(a - b * b)
        }
        NullModel::Logistic => {
            let d = estimator_derivatives(Estimator::LogisticMl, fam)?;
            kl_coefficient_generic(fam, d.d_mu, d.d_sigma)
        }
        NullModel::BinormalSimple | NullModel::BinormalMean => kl_coefficient_bivariate(fam),
    }
}

/// ∫(h − f₀·[ρ(x)(μ′ + xσ′) − σ′])²/f₀ with ρ = −f₀′/f₀, expanded as
/// ∫h²/f₀ − 2∫hρ(μ′+xσ′) + ∫f₀ρ²(μ′+xσ′)² − σ′². Minimized over (μ′, σ′)
/// it is the θ²-coefficient of twice the minimal Kullback–Leibler distance.
pub fn kl_coefficient_generic(fam: &AlternativeFamily, d_mu: f64, d_sigma: f64) -> Result<f64> {
    let null = fam.null;
    if null.dimension() != 1 {
        return Err(Error::Config("the location-scale KL form is univariate".into()));
    }
    let r = integrate_vec(
        |x| {
            let h = fam.h(x);
            let f = null.density(x);
            let rho = -null.score(x);
            let lin = d_mu + x * d_sigma;
            let hh = if h == 0.0 { 0.0 } else { fam.h_ratio(x) * h };
            [hh, h * rho * lin, f * rho * rho * lin * lin]
        },
        &fam.support(),
        QuadOptions::rel(1e-14, 1e-11),
    )?;
    let [a, b, c] = r.value;
    Ok(a - 2.0 * b + c - d_sigma * d_sigma)
}

fn plane_polar() -> (IntegrationDomain, IntegrationDomain) {
    (IntegrationDomain::half_line(0.0), IntegrationDomain::bounded(0.0, 2.0 * PI))
}

/// Nested quadrature with an inner error captured for the caller.
fn nested<const N: usize, F>(
    f: F,
    outer: &IntegrationDomain,
    inner: &IntegrationDomain,
    outer_opts: QuadOptions,
    inner_opts: QuadOptions,
) -> Result<[f64; N]>
where
    F: Fn(f64, f64) -> [f64; N],
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let r = integrate_vec(
        |x| {
            if failure.borrow().is_some() {
                return [0.0; N];
            }
            match integrate_vec(|y| f(x, y), inner, inner_opts) {
                Ok(v) => v.value,
                Err(e) => {
                    *failure.borrow_mut() = Some(e.context(format!("inner integral at {x}")));
                    [0.0; N]
                }
            }
        },
        outer,
        outer_opts,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r?.value)
}

fn kl_coefficient_bivariate(fam: &AlternativeFamily) -> Result<f64> {
    let (rd, ad) = plane_polar();
    let v = nested(
        |r, a| {
            let (x, y) = (r * a.cos(), r * a.sin());
            let h = fam.h2(x, y);
            if h == 0.0 {
                return [0.0; 3];
            }
            [fam.h2_ratio(x, y) * h * r, x * h * r, y * h * r]
        },
        &rd,
        &ad,
        QuadOptions::rel(1e-13, 1e-10),
        QuadOptions::rel(1e-14, 1e-11),
    )?;
    Ok(match fam.null {
        NullModel::BinormalMean => v[0] - v[1] * v[1] - v[2] * v[2],
        _ => v[0],
    })
}

/// The KL coefficient from the specialized expression together with the
/// generic location-scale form evaluated at the limiting estimator
/// derivatives (moments for the normal and exponential nulls, ML for the
/// logistic). The generic value is absent for bivariate nulls.
pub fn kl_cross_check(fam: &AlternativeFamily) -> Result<(f64, Option<f64>)> {
    let spec = kl_coefficient(fam)?;
    let (dm, ds) = match fam.null {
        NullModel::Exponential => (0.0, estimator_derivatives(Estimator::ExponentialMean, fam)?.d_sigma),
        NullModel::Normal => {
            let d = estimator_derivatives(Estimator::NormalMoments, fam)?;
            (d.d_mu, d.d_sigma)
        }
        NullModel::Logistic => {
            let d = estimator_derivatives(Estimator::LogisticMl, fam)?;
            (d.d_mu, d.d_sigma)
        }
        NullModel::BinormalSimple | NullModel::BinormalMean => return Ok((spec, None)),
    };
    Ok((spec, Some(kl_coefficient_generic(fam, dm, ds)?)))
}

/// inf over the null family of K(g_θ, f), attained at the maximum-likelihood
/// limits (the moment limits for the normal and exponential nulls).
pub fn kl_distance(fam: &AlternativeFamily, theta: f64) -> Result<f64> {
    fam.check_theta(theta)?;
    let null = fam.null;
    let (mu, sigma) = match null {
        NullModel::Normal => estimator_limit(Estimator::NormalMoments, fam, theta)?,
        NullModel::Logistic => estimator_limit(Estimator::LogisticMl, fam, theta)?,
        NullModel::Exponential => estimator_limit(Estimator::ExponentialMean, fam, theta)?,
        _ => return Err(Error::Config("KL distance is implemented for univariate nulls".into())),
    };
    // ∫f·[(1+r)ln(1+r) − r] with r = g/f − 1, written in z = (x−μ)/σ
    let r = integrate_with(
        |z| {
            let f = null.density(z);
            if f == 0.0 {
                return 0.0;
            }
            let g = sigma * fam.density_unchecked(theta, mu + sigma * z);
            let r = g / f - 1.0;
            if r <= -1.0 {
                return f * 1.0;
            }
            f * ((1.0 + r) * r.ln_1p() - r)
        },
        &null.support(),
        QuadOptions::rel(1e-16, 1e-10),
    )?;
    Ok(r.value)
}

// ---------------------------------------------------------------------------
// Probability limit b(θ)

/// Characteristic function of the standardized law minus the null one,
/// D(t) = ∫e^{itz}[σ·g_θ(μ+σz) − f₀(z)]dz, as (re, im).
fn standardized_cf_gap(
    fam: &AlternativeFamily,
    theta: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    scale: f64,
) -> Result<(f64, f64)> {
    let null = fam.null;
    let r = integrate_vec(
        |z| {
            let x = mu + sigma * z;
            let d = sigma * fam.density_unchecked(theta, x) - null.density(z);
            if d == 0.0 {
                return [0.0, 0.0];
            }
            [(t * z).cos() * d, (t * z).sin() * d]
        },
        &null.support(),
        QuadOptions::rel(1e-12 * scale, 1e-10),
    )?;
    Ok((r.value[0], r.value[1]))
}

/// Pointwise squared deviation of the statistic's integrand at frequency t.
fn univariate_gap2(null: NullModel, t: f64, d: (f64, f64)) -> f64 {
    match null {
        NullModel::Exponential => {
            // (|φ₀+D|² − Re(φ₀+D)) = 2Re(conj φ₀·D) − Re D + |D|²
            let q = 1.0 + t * t;
            let (pr, pi) = (1.0 / q, t / q);
            let v = 2.0 * (pr * d.0 + pi * d.1) - d.0 + d.0 * d.0 + d.1 * d.1;
            v * v
        }
        _ => d.0 * d.0 + d.1 * d.1,
    }
}

/// T_n/n → b(θ) under g_θ, through the characteristic function of the
/// standardized alternative.
pub fn b_theta(test: &TestSpec, fam: &AlternativeFamily, theta: f64) -> Result<f64> {
    test.check_family(fam)?;
    fam.check_theta(theta)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    if test.dimension() == 2 {
        return b_theta_bivariate(test, fam, theta);
    }
    let est = test.estimator().expect("univariate tests standardize");
    let (mu, sigma) = estimator_limit(est, fam, theta)?;
    let w = test.weight;
    let scale = theta.abs();
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let r = integrate_with(
        |t| {
            if t == 0.0 || failure.borrow().is_some() {
                return 0.0;
            }
            let wt = w.at_radius(t);
            if wt == 0.0 {
                return 0.0;
            }
            match standardized_cf_gap(fam, theta, mu, sigma, t, scale) {
                Ok(d) => 2.0 * univariate_gap2(test.null, t, d) * wt,
                Err(e) => {
                    *failure.borrow_mut() = Some(e.context(format!("characteristic function at t = {t}")));
                    0.0
                }
            }
        },
        &IntegrationDomain::half_line(0.0),
        QuadOptions::rel(1e-15 * scale * scale, 1e-9),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e.context(format!("b(θ) for {} under {}", test.family.id(), fam.id())));
    }
    Ok(r?.value)
}

fn b_theta_bivariate(test: &TestSpec, fam: &AlternativeFamily, theta: f64) -> Result<f64> {
    let (m1, m2) = match test.null {
        NullModel::BinormalMean => fam.mean2(theta)?,
        _ => (0.0, 0.0),
    };
    let w = test.weight;
    let (rd, _) = plane_polar();
    // |D(−t)| = |D(t)|, so half the circle suffices
    let ad = IntegrationDomain::bounded(0.0, PI);
    let v = nested(
        |r, a| {
            if r == 0.0 {
                return [0.0];
            }
            let (t1, t2) = (r * a.cos(), r * a.sin());
            let (cr, ci) = fam.cf2(theta, t1, t2).unwrap_or((f64::NAN, f64::NAN));
            let ph = -(t1 * m1 + t2 * m2);
            let (c, s) = (ph.cos(), ph.sin());
            let (sr, si) = (cr * c - ci * s, cr * s + ci * c);
            let dr = sr - (-0.5 * r * r).exp();
            [2.0 * (dr * dr + si * si) * w.at_radius(r) * r]
        },
        &rd,
        &ad,
        QuadOptions::rel(1e-16 * theta * theta, 1e-9),
        QuadOptions::rel(1e-14 * theta * theta, 1e-10),
    )?;
    Ok(v[0])
}

// ---------------------------------------------------------------------------
// Curvature b″(0)

/// θ-steps of the Richardson extrapolation.
pub const THETA_STEPS: [f64; 3] = [0.02, 0.01, 0.005];
/// Largest tolerated relative disagreement between extrapolation levels.
pub const EXTRAPOLATION_RTOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub b2: f64,
    /// |last extrapolation − previous level|.
    pub error: f64,
    pub thetas: Vec<f64>,
    /// 2b(θ)/θ² at each step.
    pub ratios: Vec<f64>,
}

/// b″(0) as the Richardson limit of 2b(θ)/θ² over θ = 0.02, 0.01, 0.005.
pub fn b_curvature(test: &TestSpec, fam: &AlternativeFamily) -> Result<Curvature> {
    let mut ratios = Vec::with_capacity(3);
    for &th in &THETA_STEPS {
        ratios.push(2.0 * b_theta(test, fam, th)? / (th * th));
    }
    let (b2, error) = richardson(&[ratios[0], ratios[1], ratios[2]]);
    let magnitude = ratios.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if magnitude < 1e-12 {
        return Ok(Curvature { b2: 0.0, error: magnitude, thetas: THETA_STEPS.to_vec(), ratios });
    }
    if error > EXTRAPOLATION_RTOL * b2.abs() {
        return Err(Error::NoConvergence {
            what: format!("b″(0) extrapolation for {} under {}", test.family.id(), fam.id()),
            partial: b2,
        });
    }
    Ok(Curvature { b2, error, thetas: THETA_STEPS.to_vec(), ratios })
}

/// b″(0) = 2∫ψ(t)²w(t)dt from the derivative ψ of the statistic's integrand.
///
/// Symmetric nulls: ψ = H(t) − it·C₀(t)μ′ − t·C₀′(t)σ′ with H(t) = ∫e^{itx}h.
/// Exponential null: with D = H − t·φ₀′(t)σ′, ψ = 2Re(conj φ₀·D) − Re D.
pub fn b_curvature_analytic(test: &TestSpec, fam: &AlternativeFamily) -> Result<f64> {
    test.check_family(fam)?;
    if test.dimension() != 1 {
        return Err(Error::Config("analytic curvature is implemented for univariate tests".into()));
    }
    let est = test.estimator().expect("univariate tests standardize");
    let d = estimator_derivatives(est, fam)?;
    let null = test.null;
    let w = test.weight;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let r = integrate_with(
        |t| {
            if t == 0.0 || failure.borrow().is_some() {
                return 0.0;
            }
            let hh = integrate_vec(
                |x| {
                    let h = fam.h(x);
                    [(t * x).cos() * h, (t * x).sin() * h]
                },
                &fam.support(),
                QuadOptions::rel(1e-13, 1e-11),
            );
            let (hr, hi) = match hh {
                Ok(v) => (v.value[0], v.value[1]),
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    return 0.0;
                }
            };
            let psi2 = match null {
                NullModel::Exponential => {
                    let q = 1.0 + t * t;
                    let (pr, pi) = (1.0 / q, t / q);
                    // φ₀′ = i/(1−it)²
                    let (d1r, d1i) = (-2.0 * t / (q * q), (1.0 - t * t) / (q * q));
                    let (dr, di) = (hr - t * d1r * d.d_sigma, hi - t * d1i * d.d_sigma);
                    let psi = 2.0 * (pr * dr + pi * di) - dr;
                    psi * psi
                }
                _ => {
                    let re = hr - t * null.cf_real_derivative(t) * d.d_sigma;
                    let im = hi - t * null.cf_real(t) * d.d_mu;
                    re * re + im * im
                }
            };
            4.0 * psi2 * w.at_radius(t)
        },
        &IntegrationDomain::half_line(0.0),
        QuadOptions::rel(1e-14, 1e-9),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r?.value)
}

// ---------------------------------------------------------------------------
// Efficiency

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub test: String,
    pub gamma: f64,
    pub alternative: String,
    /// Order in θ of the leading terms of b(θ) and K(θ): 2, or 4 when the
    /// alternative is tangent to the null family.
    pub order: u32,
    /// Leading coefficient of 2b(θ) (b″(0) when `order` is 2).
    pub b2: f64,
    pub b2_error: f64,
    /// Leading coefficient of 2K(θ).
    pub kl2: f64,
    pub lambda1: f64,
    pub lambda1_converged: bool,
    pub labe: f64,
    pub curvature: Curvature,
}

/// Smallest KL coefficient treated as a genuine departure from the null.
pub const KL_DEGENERATE: f64 = 1e-10;

/// Local approximate Bahadur efficiency, computing λ₁ on the way.
pub fn local_efficiency(test: &TestSpec, fam: &AlternativeFamily, opts: &SpectralOptions) -> Result<EfficiencyReport> {
    let spec = test.lambda1(opts)?;
    local_efficiency_with(test, fam, &spec)
}

/// Local approximate Bahadur efficiency with a precomputed spectral result.
///
/// When h lies in the tangent space of the null family (kl₂ = 0) both b(θ)
/// and K(θ) vanish to fourth order; the efficiency is then the limit of
/// b(θ)/(2λ₁K(θ)), obtained by extrapolating the θ⁴-coefficients of 2b and
/// 2K separately.
pub fn local_efficiency_with(test: &TestSpec, fam: &AlternativeFamily, spec: &SpectralResult) -> Result<EfficiencyReport> {
    test.check_family(fam)?;
    let cell = || format!("{} γ={} {}", test.family.id(), test.family.gamma(), fam.id());
    if !(spec.lambda1 > 0.0) {
        return Err(Error::NoConvergence { what: format!("λ₁ for {}", cell()), partial: spec.lambda1 });
    }
    let kl2 = kl_coefficient(fam).map_err(|e| e.context(format!("KL coefficient, {}", cell())))?;
    let (order, curvature, klc) = if kl2.abs() < KL_DEGENERATE {
        if test.dimension() != 1 {
            return Err(Error::Degenerate(format!("{}: alternative is tangent to the null family", cell())));
        }
        let (c, k) = fourth_order(test, fam).map_err(|e| e.context(format!("fourth-order expansion, {}", cell())))?;
        (4, c, k)
    } else {
        let c = b_curvature(test, fam).map_err(|e| e.context(format!("curvature, {}", cell())))?;
        (2, c, kl2)
    };
    let labe = curvature.b2 / (2.0 * spec.lambda1 * klc);
    Ok(EfficiencyReport {
        test: test.family.id(),
        gamma: test.family.gamma(),
        alternative: fam.id(),
        order,
        b2: curvature.b2,
        b2_error: curvature.error,
        kl2: klc,
        lambda1: spec.lambda1,
        lambda1_converged: spec.converged,
        labe,
        curvature,
    })
}

/// θ-steps for alternatives whose first-order direction is degenerate.
pub const HIGHER_ORDER_STEPS: [f64; 3] = [0.1, 0.05, 0.025];

fn richardson(r: &[f64; 3]) -> (f64, f64) {
    let r1a = 2.0 * r[1] - r[0];
    let r1b = 2.0 * r[2] - r[1];
    let lim = (4.0 * r1b - r1a) / 3.0;
    (lim, (lim - r1b).abs())
}

/// Limits of 2b(θ)/θ⁴ and 2K(θ)/θ⁴.
fn fourth_order(test: &TestSpec, fam: &AlternativeFamily) -> Result<(Curvature, f64)> {
    let mut rb = [0.0; 3];
    let mut rk = [0.0; 3];
    for (i, &th) in HIGHER_ORDER_STEPS.iter().enumerate() {
        let t4 = th.powi(4);
        rb[i] = 2.0 * b_theta(test, fam, th)? / t4;
        rk[i] = 2.0 * kl_distance(fam, th)? / t4;
    }
    let (b4, be) = richardson(&rb);
    let (k4, ke) = richardson(&rk);
    if k4.abs() < KL_DEGENERATE {
        return Err(Error::Degenerate(format!("{} coincides with the null family to fourth order", fam.id())));
    }
    if be > EXTRAPOLATION_RTOL * b4.abs() || ke > EXTRAPOLATION_RTOL * k4.abs() {
        return Err(Error::NoConvergence { what: "fourth-order extrapolation".into(), partial: b4 / k4 });
    }
    Ok((Curvature { b2: b4, error: be, thetas: HIGHER_ORDER_STEPS.to_vec(), ratios: rb.to_vec() }, k4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::univariate_catalog;
    use approx::assert_abs_diff_eq;

    fn fam(id: &str, null: NullModel) -> AlternativeFamily {
        AlternativeFamily::parse(id, null).unwrap()
    }

    #[test]
    fn kl_specializations_match_generic_form() {
        for f in univariate_catalog() {
            let spec = kl_coefficient(&f).unwrap();
            let (dm, ds) = match f.null {
                NullModel::Exponential => (0.0, estimator_derivatives(Estimator::ExponentialMean, &f).unwrap().d_sigma),
                NullModel::Normal => {
                    let d = estimator_derivatives(Estimator::NormalMoments, &f).unwrap();
                    (d.d_mu, d.d_sigma)
                }
                _ => continue,
            };
            let generic = kl_coefficient_generic(&f, dm, ds).unwrap();
            assert!((spec - generic).abs() < 1e-7, "{}: {spec} vs {generic}", f.id());
        }
    }

    #[test]
    fn logistic_kl_is_minimal_over_derivatives() {
        let f = fam("lehmann", NullModel::Logistic);
        let k = kl_coefficient(&f).unwrap();
        let d = estimator_derivatives(Estimator::LogisticMoments, &f).unwrap();
        assert!(kl_coefficient_generic(&f, d.d_mu, d.d_sigma).unwrap() >= k);
        let d = estimator_derivatives(Estimator::LogisticMl, &f).unwrap();
        for (em, es) in [(1e-3, 0.0), (0.0, 1e-3), (-1e-3, 1e-3)] {
            assert!(kl_coefficient_generic(&f, d.d_mu + em, d.d_sigma + es).unwrap() > k);
        }
    }

    #[test]
    fn kl_examples() {
        assert_abs_diff_eq!(kl_coefficient(&fam("contam:0,1", NullModel::Normal)).unwrap(), 0.0, epsilon = 1e-14);
        // LFR: ∫h²eˣ = E(X − X²/2)² = 2 − 6 + 6 = 2 and ∫xh = E(X² − X³/2) = −1
        let lfr = kl_coefficient(&fam("lfr", NullModel::Exponential)).unwrap();
        assert_abs_diff_eq!(lfr, 2.0 - 1.0, epsilon = 1e-10);
        // biv location: ∫x²f₀ = 1
        assert_abs_diff_eq!(kl_coefficient(&fam("biv_location", NullModel::BinormalSimple)).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(kl_coefficient(&fam("biv_location", NullModel::BinormalMean)).unwrap(), 0.0, epsilon = 1e-9);
        // correlation: E[x²y²] = 1
        assert_abs_diff_eq!(kl_coefficient(&fam("biv_correlation", NullModel::BinormalMean)).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn b_vanishes_at_zero_and_rejects_mismatch() {
        let t = TestSpec::new(TestFamily::Bhep { gamma: 1.0 }).unwrap();
        assert_eq!(b_theta(&t, &fam("ley1", NullModel::Normal), 0.0).unwrap(), 0.0);
        assert!(b_theta(&t, &fam("weibull", NullModel::Exponential), 0.1).unwrap_err().is_config());
        assert!(TestSpec::new(TestFamily::BivEnergy { gamma: 1.5, hyp: Hypothesis::Simple }).unwrap_err().is_config());
    }

    fn nested_expect(f: impl Fn(f64, f64) -> f64, fam: &AlternativeFamily, theta: f64, sing: bool) -> f64 {
        // E f(X, X') with X, X' iid g_θ
        let dom = fam.support();
        integrate_with(
            |x| {
                let gx = fam.density_unchecked(theta, x);
                if gx == 0.0 {
                    return 0.0;
                }
                let inner = if sing { dom.clone().with_singular(&[x]) } else { dom.clone() };
                gx * integrate_with(|y| f(x, y) * fam.density_unchecked(theta, y), &inner, QuadOptions::rel(1e-15, 1e-12))
                    .unwrap()
                    .value
            },
            &dom,
            QuadOptions::rel(1e-15, 1e-11),
        )
        .unwrap()
        .value
    }

    #[test]
    fn energy_b_matches_distance_form() {
        use crate::special::{normal_abs_moment_about, normal_pair_abs_moment};
        let g = 1.0;
        let test = TestSpec::new(TestFamily::Energy { gamma: g }).unwrap();
        let f = fam("ley1", NullModel::Normal);
        let th = 0.1;
        let (mu, s) = estimator_limit(Estimator::NormalMoments, &f, th).unwrap();
        let xx = nested_expect(|x, y| ((x - y) / s).abs().powf(g), &f, th, true);
        let xn = integrate_with(
            |x| normal_abs_moment_about((x - mu) / s, g).unwrap() * f.density_unchecked(th, x),
            &f.support(),
            QuadOptions::rel(1e-15, 1e-12),
        )
        .unwrap()
        .value;
        let closed = 2.0 * xn - xx - normal_pair_abs_moment(g).unwrap();
        let cf = b_theta(&test, &f, th).unwrap();
        assert!((cf - closed).abs() < 1e-6 * closed.abs().max(1e-3), "{cf} vs {closed}");
    }

    #[test]
    fn bhep_b_matches_gaussian_form() {
        let g = 1.0;
        let test = TestSpec::new(TestFamily::Bhep { gamma: g }).unwrap();
        for id in ["lehmann", "contam:1,1"] {
            let f = fam(id, NullModel::Normal);
            let th = 0.1;
            let (mu, s) = estimator_limit(Estimator::NormalMoments, &f, th).unwrap();
            let xx = nested_expect(|x, y| (-((x - y) / s).powi(2) / (4.0 * g)).exp(), &f, th, false);
            let xn = integrate_with(
                |x| (-((x - mu) / s).powi(2) / (2.0 * (1.0 + 2.0 * g))).exp() * f.density_unchecked(th, x),
                &f.support(),
                QuadOptions::rel(1e-15, 1e-12),
            )
            .unwrap()
            .value;
            let closed = (PI / g).sqrt() * xx - 2.0 * (2.0 * PI / (1.0 + 2.0 * g)).sqrt() * xn + (PI / (1.0 + g)).sqrt();
            let cf = b_theta(&test, &f, th).unwrap();
            assert!((cf - closed).abs() < 1e-6 * closed, "{id}: {cf} vs {closed}");
        }
    }

    #[test]
    fn logistic_b_matches_cauchy_kernel_form() {
        let g = 1.0;
        let wk = |a: f64| 2.0 * g / (g * g + a * a);
        for est in [Estimator::LogisticMl, Estimator::LogisticMoments] {
            let test = TestSpec::new(TestFamily::Logistic { gamma: g, est }).unwrap();
            let f = fam("ley2", NullModel::Logistic);
            let th = 0.1;
            let (mu, s) = estimator_limit(est, &f, th).unwrap();
            let null = fam("contam:0,1", NullModel::Logistic);
            let xx = nested_expect(|x, y| wk((x - y) / s), &f, th, false);
            // E W(X_std − Y) with Y standard logistic
            let dom = f.support();
            let xy = integrate_with(
                |x| {
                    let gx = f.density_unchecked(th, x);
                    let z = (x - mu) / s;
                    gx * integrate_with(|y| wk(z - y) * NullModel::Logistic.density(y), &dom, QuadOptions::rel(1e-15, 1e-12))
                        .unwrap()
                        .value
                },
                &dom,
                QuadOptions::rel(1e-15, 1e-11),
            )
            .unwrap()
            .value;
            let yy = nested_expect(|x, y| wk(x - y), &null, 0.0, false);
            let closed = xx - 2.0 * xy + yy;
            let cf = b_theta(&test, &f, th).unwrap();
            assert!((cf - closed).abs() < 1e-6 * closed, "{est:?}: {cf} vs {closed}");
        }
    }

    #[test]
    fn curvature_routes_agree() {
        let cases = [
            (TestFamily::Bhep { gamma: 1.0 }, "ley1", NullModel::Normal),
            (TestFamily::Energy { gamma: 1.0 }, "lehmann", NullModel::Normal),
            (TestFamily::Logistic { gamma: 1.0, est: Estimator::LogisticMl }, "ley2", NullModel::Logistic),
            (TestFamily::Logistic { gamma: 3.0, est: Estimator::LogisticMoments }, "lehmann", NullModel::Logistic),
            (TestFamily::ExpW1 { gamma: 1.0 }, "weibull", NullModel::Exponential),
            (TestFamily::ExpW2 { gamma: 1.0 }, "me:3", NullModel::Exponential),
        ];
        for (tf, id, null) in cases {
            let t = TestSpec::new(tf).unwrap();
            let f = fam(id, null);
            let c = b_curvature(&t, &f).unwrap();
            let a = b_curvature_analytic(&t, &f).unwrap();
            assert!((c.b2 - a).abs() < 1e-4 * a, "{} {id}: {} vs {a}", tf.id(), c.b2);
            // quadratic vanishing
            assert!((c.ratios[1] - c.ratios[2]).abs() < 0.01 * c.ratios[2]);
        }
    }

    #[test]
    fn degenerate_direction_has_zero_curvature() {
        let t = TestSpec::new(TestFamily::Bhep { gamma: 1.0 }).unwrap();
        let f = fam("contam:0,1", NullModel::Normal);
        assert_eq!(b_curvature(&t, &f).unwrap().b2, 0.0);
        let spec = SpectralResult { lambda1: 1.0, schedule: vec![], converged: true, trace: 1.0, trace2: 1.0, mc: None };
        let r = local_efficiency_with(&t, &f, &spec);
        assert!(matches!(r.as_ref().map_err(Error::root), Err(Error::Degenerate(_))), "{r:?}");
    }

    #[test]
    fn tangent_alternative_uses_fourth_order_terms() {
        // logistic ley1: h = f₀·tanh(x/2) is a pure location direction
        let f = fam("ley1", NullModel::Logistic);
        assert!(kl_coefficient(&f).unwrap().abs() < 1e-12);
        let k = kl_distance(&f, 0.05).unwrap();
        assert!(k > 0.0 && k < 1e-7);
        let t = TestSpec::new(TestFamily::Logistic { gamma: 1.0, est: Estimator::LogisticMoments }).unwrap();
        let spec = t.lambda1(&SpectralOptions { schedule: Some(vec![(400, 20.0), (800, 30.0)]), ..Default::default() }).unwrap();
        let r = local_efficiency_with(&t, &f, &spec).unwrap();
        assert_eq!(r.order, 4);
        assert!(r.labe > 0.8 && r.labe < 1.0, "{}", r.labe);
    }

    #[test]
    fn kl_distance_matches_quadratic_coefficient() {
        for (id, null) in [("lehmann", NullModel::Normal), ("ley2", NullModel::Logistic), ("lfr", NullModel::Exponential)] {
            let f = fam(id, null);
            // ratio has an O(θ) correction; one Richardson step removes it
            let q = |th: f64| 2.0 * kl_distance(&f, th).unwrap() / (th * th);
            let est = 2.0 * q(0.002) - q(0.004);
            let c = kl_coefficient(&f).unwrap();
            assert!((est - c).abs() < 1e-3 * c, "{id}: {est} vs {c}");
        }
    }

    #[test]
    fn bivariate_location_curvature_closed_form() {
        // |D|² = 2(1 − cos θt₁)e^{−|t|²}, so b″(0) = 2∫t₁²e^{−(1+γ)|t|²} = π/(1+γ)²
        let g = 0.5;
        let t = TestSpec::new(TestFamily::BivBhep { gamma: g, hyp: Hypothesis::Simple }).unwrap();
        let c = b_curvature(&t, &fam("biv_location", NullModel::BinormalSimple)).unwrap();
        assert_abs_diff_eq!(c.b2, PI / ((1.0 + g) * (1.0 + g)), epsilon = 1e-6);
        // under the estimated mean a pure shift is invisible
        let t = TestSpec::new(TestFamily::BivBhep { gamma: g, hyp: Hypothesis::Mean }).unwrap();
        let c = b_curvature(&t, &fam("biv_location", NullModel::BinormalMean)).unwrap();
        assert_eq!(c.b2, 0.0);
    }
}
