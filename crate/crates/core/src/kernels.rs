//! Covariance kernels K(s,t) of the limiting Gaussian processes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{logistic_info_sigma, Estimator, NullModel, LOGISTIC_INFO_MU};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_vec, QuadOptions};

/// Anything that can be evaluated as a symmetric kernel on ℝᵈ × ℝᵈ.
pub trait Kernel: Sync {
    fn dimension(&self) -> usize;
    /// K(s,t); `s` and `t` have `dimension()` coordinates.
    fn eval(&self, s: &[f64], t: &[f64]) -> f64;
}

/// The kernels of the tests in scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelSpec {
    /// Standardized normal data, mean and variance estimated (GE and BHEP).
    NormalEstimated,
    /// N_d(0, I), nothing estimated.
    NormalSimple { dim: usize },
    /// N_d(μ, I), mean estimated.
    NormalMean { dim: usize },
    /// Logistic null with location and scale estimated by `est`.
    Logistic { est: Estimator },
    /// Scale-standardized exponential data.
    Exponential,
}

impl KernelSpec {
    /// K(s,t) with a dimension check.
    pub fn kernel_eval(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        let d = self.dimension();
        if s.len() != d || t.len() != d {
            return Err(Error::Domain(format!(
                "kernel is {d}-dimensional, got points of dimension {} and {}",
                s.len(),
                t.len()
            )));
        }
        Ok(self.eval(s, t))
    }

    /// Univariate evaluation.
    #[inline]
    pub fn eval1(&self, s: f64, t: f64) -> f64 {
        // fixed argument order keeps floating-point results exactly symmetric
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        match self {
            Self::NormalEstimated => {
                let st = s * t;
                (-(s - t) * (s - t) / 2.0).exp() - (1.0 + st + st * st / 2.0) * (-(s * s + t * t) / 2.0).exp()
            }
            Self::NormalSimple { .. } => (-(s - t) * (s - t) / 2.0).exp() - (-(s * s + t * t) / 2.0).exp(),
            Self::NormalMean { .. } => {
                (-(s - t) * (s - t) / 2.0).exp() - (1.0 + s * t) * (-(s * s + t * t) / 2.0).exp()
            }
            Self::Logistic { est } => ProjectedKernel { null: NullModel::Logistic, est: *est }.eval(s, t),
            Self::Exponential => {
                let (s2, t2) = (s * s, t * t);
                let d = (s - t) * (s - t);
                let p = (s + t) * (s + t);
                s2 * t2 * (1.0 + s2 + t2) / ((1.0 + s2) * (1.0 + t2) * (1.0 + d) * (1.0 + p))
            }
        }
    }

    pub fn null(&self) -> NullModel {
        match self {
            Self::NormalEstimated => NullModel::Normal,
            Self::NormalSimple { .. } => NullModel::BinormalSimple,
            Self::NormalMean { .. } => NullModel::BinormalMean,
            Self::Logistic { .. } => NullModel::Logistic,
            Self::Exponential => NullModel::Exponential,
        }
    }
}

impl Kernel for KernelSpec {
    fn dimension(&self) -> usize {
        match self {
            Self::NormalSimple { dim } | Self::NormalMean { dim } => *dim,
            _ => 1,
        }
    }

    #[inline]
    fn eval(&self, s: &[f64], t: &[f64]) -> f64 {
        match self {
            Self::NormalSimple { .. } | Self::NormalMean { .. } => {
                let mut diff = 0.0;
                let mut ss = 0.0;
                let mut tt = 0.0;
                let mut st = 0.0;
                for (a, b) in s.iter().zip(t) {
                    diff += (a - b) * (a - b);
                    ss += a * a;
                    tt += b * b;
                    st += a * b;
                }
                let base = (-(ss + tt) / 2.0).exp();
                let lead = if matches!(self, Self::NormalMean { .. }) { 1.0 + st } else { 1.0 };
                (-diff / 2.0).exp() - lead * base
            }
            _ => self.eval1(s[0], t[0]),
        }
    }
}

/// Kernel of the ECF process of a symmetric location-scale null after
/// standardization with an asymptotically linear estimator, in closed form.
///
/// With a(t) = t·C₀(t), c(t) = t·C₀′(t), A_μ(s) = E[sin(sZ)ℓ_μ(Z)],
/// A_σ(s) = E[cos(sZ)ℓ_σ(Z)] and V = E[ℓ²]:
/// K = C₀(s−t) − C₀(s)C₀(t) − a(t)A_μ(s) − c(t)A_σ(s) − a(s)A_μ(t) − c(s)A_σ(t)
///     + a(s)a(t)V_μ + c(s)c(t)V_σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedKernel {
    pub null: NullModel,
    pub est: Estimator,
}

impl ProjectedKernel {
    pub fn new(null: NullModel, est: Estimator) -> Result<Self> {
        let ok = matches!(
            (null, est),
            (NullModel::Normal, Estimator::NormalMoments)
                | (NullModel::Logistic, Estimator::LogisticMl)
                | (NullModel::Logistic, Estimator::LogisticMoments)
        );
        if ok {
            Ok(Self { null, est })
        } else {
            Err(Error::Config(format!("no projected kernel for {} with {}", null.id(), est.id())))
        }
    }

    /// (A_μ(s), A_σ(s)).
    fn a_terms(&self, s: f64, c: f64, c1: f64, c2: f64) -> (f64, f64) {
        match self.est {
            Estimator::LogisticMl => (s * c / LOGISTIC_INFO_MU, s * c1 / logistic_info_sigma()),
            Estimator::LogisticMoments => (-c1, (-3.0 * c2 - PI * PI * c) / (2.0 * PI * PI)),
            _ => (-c1, (-c2 - c) / 2.0),
        }
    }

    /// (V_μ, V_σ).
    fn variances(&self) -> (f64, f64) {
        match self.est {
            Estimator::LogisticMl => (1.0 / LOGISTIC_INFO_MU, 1.0 / logistic_info_sigma()),
            Estimator::LogisticMoments => (PI * PI / 3.0, 0.8),
            _ => (1.0, 0.5),
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        let n = self.null;
        let (cs, cs1, cs2) = (n.cf_real(s), n.cf_real_derivative(s), n.cf_real_second_derivative(s));
        let (ct, ct1, ct2) = (n.cf_real(t), n.cf_real_derivative(t), n.cf_real_second_derivative(t));
        let (as_, cs_) = (s * cs, s * cs1);
        let (at, ctt) = (t * ct, t * ct1);
        let (amu_s, asig_s) = self.a_terms(s, cs, cs1, cs2);
        let (amu_t, asig_t) = self.a_terms(t, ct, ct1, ct2);
        let (vmu, vsig) = self.variances();
        n.cf_real(s - t) - cs * ct - at * amu_s - ctt * asig_s - as_ * amu_t - cs_ * asig_t
            + as_ * at * vmu
            + cs_ * ctt * vsig
    }
}

/// E₀[ξ(Z,s)ξ(Z,t)] by quadrature over the null law.
///
/// For symmetric nulls ξ(z,t) = cos(tz) + sin(tz) − C₀(t) − ℓ_μ(z)·t·C₀(t)
/// − ℓ_σ(z)·t·C₀′(t). For the exponential null with the mean as scale
/// estimator ξ(x,t) = Re[(2·conj φ₀(t) − 1)(e^{itx} − φ₀(t) − t·φ₀′(t)(x−1))],
/// the linearization of |φ_n|² − Re φ_n.
pub fn kernel_project(null: NullModel, est: Estimator, s: f64, t: f64) -> Result<f64> {
    if est.null() != null {
        return Err(Error::Config(format!("estimator {} does not belong to the {} null", est.id(), null.id())));
    }
    let opts = QuadOptions::rel(1e-12, 1e-11);
    let r = match null {
        NullModel::Exponential => {
            let xi = |x: f64, t: f64| -> f64 {
                // φ₀ = 1/(1−it), φ₀′ = i/(1−it)²
                let d = 1.0 + t * t;
                let (pr, pi) = (1.0 / d, t / d);
                let (d1r, d1i) = (-2.0 * t / (d * d), (1.0 - t * t) / (d * d));
                let (er, ei) = ((t * x).cos(), (t * x).sin());
                let (vr, vi) = (er - pr - t * d1r * (x - 1.0), ei - pi - t * d1i * (x - 1.0));
                let (wr, wi) = (2.0 * pr - 1.0, -2.0 * pi);
                wr * vr - wi * vi
            };
            integrate_vec(|x| [xi(x, s) * xi(x, t) * (-x).exp()], &null.support(), opts)?
        }
        _ => {
            let c = |t: f64| (null.cf_real(t), null.cf_real_derivative(t));
            let (cs, cs1) = c(s);
            let (ct, ct1) = c(t);
            let xi = |z: f64, t: f64, c0: f64, c1: f64| -> f64 {
                let (lm, ls) = est.influence(z);
                (t * z).cos() + (t * z).sin() - c0 - lm * t * c0 - ls * t * c1
            };
            integrate_vec(
                |z| [xi(z, s, cs, cs1) * xi(z, t, ct, ct1) * null.density(z)],
                &null.support(),
                opts,
            )?
        }
    };
    Ok(r.value[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn min_eigenvalue(a: &[Vec<f64>]) -> f64 {
        // cyclic Jacobi, adequate for the 50×50 test matrices
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += m[p][q] * m[p][q];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (mkp, mkq) = (m[k][p], m[k][q]);
                        m[k][p] = c * mkp - s * mkq;
                        m[k][q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let (mpk, mqk) = (m[p][k], m[q][k]);
                        m[p][k] = c * mpk - s * mqk;
                        m[q][k] = s * mpk + c * mqk;
                    }
                }
            }
        }
        (0..n).map(|i| m[i][i]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn exponential_kernel_values() {
        let k = KernelSpec::Exponential;
        assert_eq!(k.eval1(0.0, 1.3), 0.0);
        assert_eq!(k.eval1(-2.0, 0.0), 0.0);
        assert_abs_diff_eq!(k.eval1(1.0, 1.0), 0.15, epsilon = 1e-15);
    }

    #[test]
    fn normal_estimated_vanishes_at_origin() {
        for &t in &[-3.0, 0.2, 1.0, 4.0] {
            assert_abs_diff_eq!(KernelSpec::NormalEstimated.eval1(0.0, t), 0.0, epsilon = 1e-16);
            assert_abs_diff_eq!(kernel_project(NullModel::Normal, Estimator::NormalMoments, 0.0, t).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_domain_error() {
        let k = KernelSpec::NormalSimple { dim: 2 };
        assert!(matches!(k.kernel_eval(&[1.0], &[1.0, 2.0]), Err(Error::Domain(_))));
        assert!(k.kernel_eval(&[1.0, 0.5], &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn projection_reproduces_closed_normal_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = rng.random_range(-4.0..4.0);
            let t = rng.random_range(-4.0..4.0);
            let q = kernel_project(NullModel::Normal, Estimator::NormalMoments, s, t).unwrap();
            assert_abs_diff_eq!(q, KernelSpec::NormalEstimated.eval1(s, t), epsilon = 1e-7);
            let p = ProjectedKernel::new(NullModel::Normal, Estimator::NormalMoments).unwrap();
            assert_abs_diff_eq!(p.eval(s, t), KernelSpec::NormalEstimated.eval1(s, t), epsilon = 1e-13);
        }
    }

    #[test]
    fn logistic_closed_forms_match_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for est in [Estimator::LogisticMl, Estimator::LogisticMoments] {
            for _ in 0..15 {
                let s = rng.random_range(-3.0..3.0);
                let t = rng.random_range(-3.0..3.0);
                let q = kernel_project(NullModel::Logistic, est, s, t).unwrap();
                assert_abs_diff_eq!(q, KernelSpec::Logistic { est }.eval1(s, t), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn exponential_projection_matches_printed_kernel() {
        for &(s, t) in &[(1.0, 1.0), (0.3, -2.0), (2.5, 0.7)] {
            let q = kernel_project(NullModel::Exponential, Estimator::ExponentialMean, s, t).unwrap();
            assert_abs_diff_eq!(q, KernelSpec::Exponential.eval1(s, t), epsilon = 1e-9);
        }
    }

    #[test]
    fn logistic_moment_kernel_monte_carlo() {
        use rand_distr::{Distribution, Uniform};
        let est = Estimator::LogisticMoments;
        let null = NullModel::Logistic;
        let (s, t) = (1.0, 1.0);
        let (c, c1) = (null.cf_real(1.0), null.cf_real_derivative(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let unif = Uniform::new(0.0f64, 1.0).unwrap();
        let n = 10_000_000usize;
        let (mut acc, mut acc2) = (0.0, 0.0);
        for _ in 0..n {
            let u: f64 = unif.sample(&mut rng);
            let z = (u / (1.0 - u)).ln();
            let (lm, ls) = est.influence(z);
            let xi = (s * z).cos() + (s * z).sin() - c - lm * s * c - ls * s * c1;
            let _ = t;
            acc += xi * xi;
            acc2 += xi.powi(4);
        }
        let mean = acc / n as f64;
        let se = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
        let k = KernelSpec::Logistic { est }.eval1(s, t);
        assert!(k > 0.0);
        assert!((mean - k).abs() < 3.0 * se, "{mean} vs {k} ± {se}");
    }

    #[test]
    fn kernels_are_symmetric_and_psd_on_random_grids() {
        let specs = [
            KernelSpec::NormalEstimated,
            KernelSpec::Exponential,
            KernelSpec::Logistic { est: Estimator::LogisticMl },
            KernelSpec::Logistic { est: Estimator::LogisticMoments },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in specs {
            let pts: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
            let g: Vec<Vec<f64>> = pts.iter().map(|&s| pts.iter().map(|&t| k.eval1(s, t)).collect()).collect();
            for i in 0..50 {
                for j in 0..50 {
                    assert_eq!(g[i][j], g[j][i]);
                }
            }
            let maxdiag = (0..50).map(|i| g[i][i]).fold(0.0, f64::max);
            assert!(min_eigenvalue(&g) >= -1e-8 * maxdiag, "{k:?}");
        }
        for k in [KernelSpec::NormalSimple { dim: 2 }, KernelSpec::NormalMean { dim: 2 }] {
            let pts: Vec<[f64; 2]> = (0..50).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let g: Vec<Vec<f64>> = pts.iter().map(|s| pts.iter().map(|t| k.eval(s, t)).collect()).collect();
            let maxdiag = (0..50).map(|i| g[i][i]).fold(0.0, f64::max);
            assert!(min_eigenvalue(&g) >= -1e-8 * maxdiag, "{k:?}");
        }
    }

    #[test]
    fn projected_process_is_orthogonal_to_ml_scores() {
        use crate::quadrature::integrate_vec;
        for (null, est) in [(NullModel::Normal, Estimator::NormalMoments), (NullModel::Logistic, Estimator::LogisticMl)] {
            for &t in &[0.3, 1.0, 2.2] {
                let (c0, c1) = (null.cf_real(t), null.cf_real_derivative(t));
                let r = integrate_vec(
                    |z| {
                        let (lm, ls) = est.influence(z);
                        let xi = (t * z).cos() + (t * z).sin() - c0 - lm * t * c0 - ls * t * c1;
                        [xi * lm * null.density(z), xi * ls * null.density(z)]
                    },
                    &null.support(),
                    QuadOptions::abs(1e-12),
                )
                .unwrap();
                assert_abs_diff_eq!(r.value[0], 0.0, epsilon = 1e-10);
                assert_abs_diff_eq!(r.value[1], 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn projection_vanishes_at_zero_frequency() {
        for (null, est) in [
            (NullModel::Normal, Estimator::NormalMoments),
            (NullModel::Logistic, Estimator::LogisticMl),
            (NullModel::Logistic, Estimator::LogisticMoments),
            (NullModel::Exponential, Estimator::ExponentialMean),
        ] {
            assert_abs_diff_eq!(kernel_project(null, est, 1.7, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert!(kernel_project(NullModel::Normal, Estimator::LogisticMl, 1.0, 1.0).unwrap_err().is_config());
    }
}
