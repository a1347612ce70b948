//! Null models, alternative families with analytic θ-derivatives, and the
//! probability limits of the parameter estimators.

mod alternatives;
mod estimators;
mod null;

pub use alternatives::{AltKind, AlternativeFamily, BinormalParams};
pub use estimators::{
    estimator_derivatives, estimator_limit, logistic_info_sigma, normal_ml_derivatives, Estimator,
    EstimatorDerivatives, EstimatorLimit, LOGISTIC_INFO_MU,
};
pub use null::{logistic_cf, NullModel};

use crate::error::Result;

/// g_θ(x) for a univariate family.
pub fn alt_density(fam: &AlternativeFamily, theta: f64, x: f64) -> Result<f64> {
    fam.density(theta, x)
}

/// h(x) = ∂g_θ/∂θ at θ = 0.
pub fn alt_h(fam: &AlternativeFamily, x: f64) -> f64 {
    fam.h(x)
}

/// u(x) = ∂²g_θ/∂θ² at θ = 0.
pub fn alt_u(fam: &AlternativeFamily, x: f64) -> f64 {
    fam.u(x)
}

/// Every univariate family used in the efficiency tables, paired with its
/// null.
pub fn univariate_catalog() -> Vec<AlternativeFamily> {
    let mut out = Vec::new();
    for null in [NullModel::Normal, NullModel::Logistic] {
        for id in ["lehmann", "ley1", "ley2", "contam:1,1", "contam:0.5,1", "contam:0,0.5"] {
            out.push(AlternativeFamily::parse(id, null).expect("catalog id"));
        }
    }
    for id in ["weibull", "gamma", "makeham", "lfr", "me:3", "me:6"] {
        out.push(AlternativeFamily::parse(id, NullModel::Exponential).expect("catalog id"));
    }
    out
}

/// Every bivariate family used in the efficiency tables.
pub fn bivariate_catalog(null: NullModel) -> Vec<AlternativeFamily> {
    let mut ids: Vec<String> = ["biv_location", "biv_correlation", "biv_scale1", "biv_scale2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    ids.extend((1..=11).map(|k| format!("biv_contam:{k}")));
    ids.iter().map(|id| AlternativeFamily::parse(id, null).expect("catalog id")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numdiff::derivatives_at_zero;
    use crate::quadrature::{integrate, integrate2, integrate_vec, QuadOptions};
    use crate::special::normal_pdf;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn sample_thetas(fam: &AlternativeFamily) -> Vec<f64> {
        let (lo, hi) = fam.theta_range();
        [-0.3, -0.05, 0.0, 0.05, 0.2, 0.3]
            .into_iter()
            .filter(|t| *t >= lo && *t <= hi)
            .collect()
    }

    #[test]
    fn univariate_densities_have_unit_mass() {
        for fam in univariate_catalog() {
            for theta in sample_thetas(&fam) {
                let r = integrate(|x| fam.density(theta, x).unwrap(), &fam.support(), 1e-11).unwrap();
                assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn derivative_directions_have_zero_mass() {
        for fam in univariate_catalog() {
            let r = integrate_vec(|x| [fam.h(x), fam.u(x)], &fam.support(), QuadOptions::abs(1e-12)).unwrap();
            assert_abs_diff_eq!(r.value[0], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(r.value[1], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn h_and_u_match_finite_differences() {
        let theta = 1e-4;
        for fam in univariate_catalog() {
            let grid: Vec<f64> = match fam.null {
                NullModel::Exponential => (1..=30).map(|k| k as f64 * 0.25).collect(),
                _ => (-24..=24).map(|k| k as f64 * 0.25).collect(),
            };
            for x in grid {
                let g = |t: f64| fam.density(t, x).unwrap();
                let (h_fd, u_fd) = if fam.two_sided() {
                    ((g(theta) - g(-theta)) / (2.0 * theta), (g(theta) - 2.0 * g(0.0) + g(-theta)) / (theta * theta))
                } else {
                    (
                        (-3.0 * g(0.0) + 4.0 * g(theta) - g(2.0 * theta)) / (2.0 * theta),
                        (2.0 * g(0.0) - 5.0 * g(theta) + 4.0 * g(2.0 * theta) - g(3.0 * theta)) / (theta * theta),
                    )
                };
                assert!((fam.h(x) - h_fd).abs() < 1e-5, "{} h at {x}: {} vs {h_fd}", fam.id(), fam.h(x));
                assert!((fam.u(x) - u_fd).abs() < 1e-5 * (1.0 + fam.u(x).abs()), "{} u at {x}: {} vs {u_fd}", fam.id(), fam.u(x));
            }
        }
    }

    #[test]
    fn null_recovered_at_zero() {
        let fam = AlternativeFamily::parse("lehmann", NullModel::Normal).unwrap();
        assert_eq!(alt_density(&fam, 0.0, 0.0).unwrap(), 1.0 / (2.0 * PI).sqrt());
        for fam in univariate_catalog() {
            for &x in &[0.3, 1.7] {
                assert_abs_diff_eq!(fam.density(0.0, x).unwrap(), fam.null.density(x), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn me3_vanishes_at_origin() {
        let fam = AlternativeFamily::parse("me:3", NullModel::Exponential).unwrap();
        assert_abs_diff_eq!(fam.density(0.5, 0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(fam.density(0.51, 1.0).unwrap_err().is_config());
        assert!(fam.density(-0.1, 1.0).is_err());
    }

    #[test]
    fn ley2_reading() {
        let fam = AlternativeFamily::parse("ley2", NullModel::Normal).unwrap();
        let want = normal_pdf(1.0) * (1.0 - 0.1 * PI * (PI * crate::special::normal_cdf(1.0)).cos());
        assert_abs_diff_eq!(fam.density(0.1, 1.0).unwrap(), want, epsilon = 1e-15);
        let mass = integrate(|x| fam.density(0.1, x).unwrap(), &fam.support(), 1e-12).unwrap();
        assert_abs_diff_eq!(mass.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn contamination_direction_is_difference_of_densities() {
        let fam = AlternativeFamily::parse("contam:1,1", NullModel::Normal).unwrap();
        for &x in &[-2.0, 0.0, 0.5, 3.0] {
            assert_abs_diff_eq!(fam.h(x), normal_pdf(x - 1.0) - normal_pdf(x), epsilon = 1e-15);
            assert_eq!(fam.u(x), 0.0);
        }
        assert!(fam.density(1.2, 0.0).is_err());
    }

    #[test]
    fn identifiers_round_trip() {
        for fam in univariate_catalog() {
            assert_eq!(AlternativeFamily::parse(&fam.id(), fam.null).unwrap(), fam);
        }
        for fam in bivariate_catalog(NullModel::BinormalSimple) {
            assert_eq!(AlternativeFamily::parse(&fam.id(), fam.null).unwrap(), fam);
        }
        assert!(AlternativeFamily::parse("weibull", NullModel::Normal).unwrap_err().is_config());
        assert!(AlternativeFamily::parse("contam:1", NullModel::Normal).unwrap_err().is_config());
        assert!(AlternativeFamily::parse("biv_contam:12", NullModel::BinormalMean).unwrap_err().is_config());
        assert!(AlternativeFamily::parse("nope", NullModel::Normal).unwrap_err().is_config());
    }

    #[test]
    fn bivariate_families_are_consistent() {
        for fam in bivariate_catalog(NullModel::BinormalSimple) {
            let theta = 0.1;
            let mass = integrate2(|x, y| fam.density2(theta, x, y).unwrap(), 1e-9).unwrap();
            assert_abs_diff_eq!(mass.value, 1.0, epsilon = 1e-8);
            let hu = integrate2(|x, y| fam.h2(x, y) + 3.0 * fam.u2(x, y), 1e-9).unwrap();
            assert_abs_diff_eq!(hu.value, 0.0, epsilon = 1e-8);
            let d = 1e-4;
            for &(x, y) in &[(0.3, -0.7), (1.2, 0.4), (-1.5, 2.0)] {
                let g = |t: f64| fam.density2(t, x, y).unwrap();
                let (h_fd, u_fd) = if fam.two_sided() {
                    ((g(d) - g(-d)) / (2.0 * d), (g(d) - 2.0 * g(0.0) + g(-d)) / (d * d))
                } else {
                    (
                        (-3.0 * g(0.0) + 4.0 * g(d) - g(2.0 * d)) / (2.0 * d),
                        (2.0 * g(0.0) - 5.0 * g(d) + 4.0 * g(2.0 * d) - g(3.0 * d)) / (d * d),
                    )
                };
                assert!((fam.h2(x, y) - h_fd).abs() < 1e-6, "{} h", fam.id());
                assert!((fam.u2(x, y) - u_fd).abs() < 1e-5, "{} u", fam.id());
            }
            // characteristic function against direct integration
            let (t1, t2) = (0.7, -0.4);
            let (re, im) = fam.cf2(theta, t1, t2).unwrap();
            let cre = integrate2(|x, y| (t1 * x + t2 * y).cos() * fam.density2(theta, x, y).unwrap(), 1e-10).unwrap();
            let cim = integrate2(|x, y| (t1 * x + t2 * y).sin() * fam.density2(theta, x, y).unwrap(), 1e-10).unwrap();
            assert_abs_diff_eq!(re, cre.value, epsilon = 1e-8);
            assert_abs_diff_eq!(im, cim.value, epsilon = 1e-8);
        }
    }

    fn all_pairs() -> Vec<(Estimator, AlternativeFamily)> {
        let mut out = Vec::new();
        for fam in univariate_catalog() {
            let ests: &[Estimator] = match fam.null {
                NullModel::Normal => &[Estimator::NormalMoments],
                NullModel::Logistic => &[Estimator::LogisticMl, Estimator::LogisticMoments],
                _ => &[Estimator::ExponentialMean],
            };
            for &e in ests {
                out.push((e, fam));
            }
        }
        out
    }

    #[test]
    fn limits_are_standard_at_zero() {
        for (est, fam) in all_pairs() {
            let (mu, sigma) = estimator_limit(est, &fam, 0.0).unwrap();
            assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(sigma, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn derivatives_match_finite_differences_of_limits() {
        for (est, fam) in all_pairs() {
            let d = estimator_derivatives(est, &fam).unwrap();
            let h = match fam.kind {
                AltKind::Lfr => 0.001,
                AltKind::Weibull | AltKind::Gamma | AltKind::Makeham => 0.003,
                _ => 0.02,
            };
            let (m1, m2) = derivatives_at_zero(|t| Ok(estimator_limit(est, &fam, t)?.0), h, fam.two_sided()).unwrap();
            let (s1, s2) = derivatives_at_zero(|t| Ok(estimator_limit(est, &fam, t)?.1), h, fam.two_sided()).unwrap();
            let tag = format!("{} / {}", est.id(), fam.id());
            assert!((d.d_mu - m1).abs() < 1e-6, "{tag}: μ′ {} vs {m1}", d.d_mu);
            assert!((d.d_sigma - s1).abs() < 1e-6, "{tag}: σ′ {} vs {s1}", d.d_sigma);
            assert!((d.d2_mu - m2).abs() < 1e-6, "{tag}: μ″ {} vs {m2}", d.d2_mu);
            assert!((d.d2_sigma - s2).abs() < 1e-6, "{tag}: σ″ {} vs {s2}", d.d2_sigma);
        }
    }

    #[test]
    fn normal_ml_route_equals_moment_route() {
        for fam in univariate_catalog().into_iter().filter(|f| f.null == NullModel::Normal) {
            let a = estimator_derivatives(Estimator::NormalMoments, &fam).unwrap();
            let b = normal_ml_derivatives(&fam).unwrap();
            assert_abs_diff_eq!(a.d_mu, b.d_mu, epsilon = 1e-9);
            assert_abs_diff_eq!(a.d_sigma, b.d_sigma, epsilon = 1e-9);
            assert_abs_diff_eq!(a.d2_mu, b.d2_mu, epsilon = 1e-9);
            assert_abs_diff_eq!(a.d2_sigma, b.d2_sigma, epsilon = 1e-9);
        }
    }

    #[test]
    fn logistic_ml_first_derivatives_match_closed_integrals() {
        let fam = AlternativeFamily::parse("lehmann", NullModel::Logistic).unwrap();
        let d = estimator_derivatives(Estimator::LogisticMl, &fam).unwrap();
        let r = integrate_vec(
            |x: f64| {
                let e = (-x).exp();
                let h = fam.h(x);
                if !e.is_finite() {
                    return [0.0, 0.0];
                }
                [h / (1.0 + e), (1.0 - e) * x * h / (1.0 + e)]
            },
            &fam.support(),
            QuadOptions::abs(1e-13),
        )
        .unwrap();
        assert_abs_diff_eq!(d.d_mu, 6.0 * r.value[0], epsilon = 1e-9);
        assert_abs_diff_eq!(d.d_sigma, 9.0 / (PI * PI + 3.0) * r.value[1], epsilon = 1e-9);
    }

    #[test]
    fn logistic_ml_limit_solves_score_equations() {
        let fam = AlternativeFamily::parse("ley1", NullModel::Logistic).unwrap();
        let theta = 0.05;
        let (mu, sigma) = estimator_limit(Estimator::LogisticMl, &fam, theta).unwrap();
        let r = integrate_vec(
            |x: f64| {
                let z = (x - mu) / sigma;
                let t = (z / 2.0).tanh();
                let g = fam.density(theta, x).unwrap();
                [t * g, (z * t - 1.0) * g]
            },
            &fam.support(),
            QuadOptions::abs(1e-13),
        )
        .unwrap();
        assert!(r.value[0].abs() < 1e-10 && r.value[1].abs() < 1e-10);
        let d = estimator_derivatives(Estimator::LogisticMl, &fam).unwrap();
        assert!((mu - d.d_mu * theta).abs() < 2.0 * theta * theta);
        assert!((sigma - 1.0 - d.d_sigma * theta).abs() < 2.0 * theta * theta);
    }

    #[test]
    fn symmetric_contamination_has_no_location_drift() {
        let fam = AlternativeFamily::parse("contam:0,0.5", NullModel::Normal).unwrap();
        let d = estimator_derivatives(Estimator::NormalMoments, &fam).unwrap();
        assert_abs_diff_eq!(d.d_mu, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn moment_limit_agrees_with_monte_carlo() {
        // importance weights (1+θ)Φ(Z)^θ turn standard normal draws into
        // Lehmann draws
        let fam = AlternativeFamily::parse("lehmann", NullModel::Normal).unwrap();
        let theta = 0.1;
        let (mu, _) = estimator_limit(Estimator::NormalMoments, &fam, theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000_000usize;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = z * (1.0 + theta) * (theta * fam.null.log_cdf(z)).exp();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se, "{mean} vs {mu} (se {se})");
    }

    #[test]
    fn mismatched_estimator_is_config_error() {
        let fam = AlternativeFamily::parse("weibull", NullModel::Exponential).unwrap();
        assert!(estimator_derivatives(Estimator::LogisticMl, &fam).unwrap_err().is_config());
    }
}
