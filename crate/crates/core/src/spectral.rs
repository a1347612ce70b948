//! Largest eigenvalue of the weighted covariance operator
//! f ↦ ∫K(·,t)f(t)w(t)dt, by grid discretization (univariate) or by a
//! Nyström Monte Carlo estimate (multivariate).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quadrature::{integrate2_over, integrate_with, IntegrationDomain, QuadOptions, QuadResult};
use crate::special::gamma_fn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum WeightFamily {
    /// e^{−γ|t|}
    ExpAbs,
    /// e^{−γ|t|²}
    Gauss,
    /// |t|^{−d−γ}/C_{d,γ}, 0 < γ < 2
    Energy,
    /// e^{−γ|t|^β}
    ExpAbsPow { beta: f64 },
}

/// A radial weight on ℝᵈ, optionally multiplied by a constant `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub family: WeightFamily,
    pub gamma: f64,
    pub dim: usize,
    pub scale: f64,
}

impl WeightFunction {
    pub fn new(family: WeightFamily, gamma: f64, dim: usize) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("weight parameter γ must be positive, got {gamma}")));
        }
        if dim == 0 {
            return Err(Error::Config("weight dimension must be positive".into()));
        }
        match family {
            WeightFamily::Energy if gamma >= 2.0 => {
                return Err(Error::Config(format!("energy weight requires 0 < γ < 2, got {gamma}")))
            }
            WeightFamily::ExpAbsPow { beta } if !(beta > 0.0 && beta <= 2.0) => {
                return Err(Error::Config(format!("weight exponent β must lie in (0, 2], got {beta}")))
            }
            _ => {}
        }
        Ok(Self { family, gamma, dim, scale: 1.0 })
    }

    pub fn exp_abs(gamma: f64) -> Result<Self> {
        Self::new(WeightFamily::ExpAbs, gamma, 1)
    }

    pub fn gauss(gamma: f64) -> Result<Self> {
        Self::new(WeightFamily::Gauss, gamma, 1)
    }

    pub fn energy(gamma: f64) -> Result<Self> {
        Self::new(WeightFamily::Energy, gamma, 1)
    }

    pub fn exp_abs_pow(gamma: f64, beta: f64) -> Result<Self> {
        Self::new(WeightFamily::ExpAbsPow { beta }, gamma, 1)
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// c·w.
    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    pub fn singular_at_zero(&self) -> bool {
        matches!(self.family, WeightFamily::Energy)
    }

    /// C_{d,γ} = 2π^{d/2}Γ(1−γ/2) / (γ·2^γ·Γ((d+γ)/2)), which makes
    /// ∫(1−cos⟨t,x⟩)|t|^{−d−γ}/C dt = |x|^γ.
    pub fn energy_constant(dim: usize, gamma: f64) -> f64 {
        let d = dim as f64;
        2.0 * PI.powf(d / 2.0) * gamma_fn(1.0 - gamma / 2.0).unwrap_or(f64::NAN)
            / (gamma * 2f64.powf(gamma) * gamma_fn((d + gamma) / 2.0).unwrap_or(f64::NAN))
    }

    /// w at a point with Euclidean norm `r`.
    #[inline]
    pub fn at_radius(&self, r: f64) -> f64 {
        let g = self.gamma;
        let v = match self.family {
            WeightFamily::ExpAbs => (-g * r).exp(),
            WeightFamily::Gauss => (-g * r * r).exp(),
            WeightFamily::ExpAbsPow { beta } => (-g * r.powf(beta)).exp(),
            WeightFamily::Energy => {
                r.powf(-(self.dim as f64) - g) / Self::energy_constant(self.dim, g)
            }
        };
        self.scale * v
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.at_radius(t.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Default (m, B) refinement schedule for grid discretization.
    pub fn default_schedule(&self) -> Vec<(usize, f64)> {
        let g = self.gamma;
        match self.family {
            WeightFamily::Gauss => {
                let c = (1.0 / (2.0 * g).sqrt()).max(0.25);
                vec![(500, 15.0 * c), (1000, 20.0 * c), (2000, 25.0 * c)]
            }
            WeightFamily::ExpAbs | WeightFamily::ExpAbsPow { .. } => {
                let eff = match self.family {
                    WeightFamily::ExpAbsPow { beta } => g.powf(1.0 / beta),
                    _ => g,
                };
                let c = if eff >= 1.0 { 1.0 / eff } else { 1.0 / eff.sqrt() };
                vec![(1000, 30.0 * c), (1500, 40.0 * c), (2000, 60.0 * c)]
            }
            WeightFamily::Energy => vec![(1000, 40.0), (1500, 60.0), (2000, 80.0)],
        }
    }

    /// Integration domain for a radial coordinate or a univariate argument.
    fn line_domain(&self) -> IntegrationDomain {
        if self.singular_at_zero() {
            IntegrationDomain::real_line().with_singular(&[0.0])
        } else {
            IntegrationDomain::real_line()
        }
    }
}

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major data; fails unless square and exactly symmetric.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Domain(format!("expected {} entries, got {}", n * n, data.len())));
        }
        for i in 0..n {
            for j in i + 1..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::Domain(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate().skip(i) {
                *v = f(i, j);
            }
        });
        for i in 0..n {
            for j in 0..i {
                data[i * n + j] = data[j * n + i];
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        });
    }
}

/// (2m+1)×(2m+1) matrix (2B/(2m+1))·K(x_i,x_j)·√(w(x_i)w(x_j)) on the nodes
/// x_i = iB/m, i = −m..m. Nodes where a singular weight blows up get zero
/// rows and columns.
pub fn discretize<K: Kernel + ?Sized>(kernel: &K, w: &WeightFunction, m: usize, b: f64) -> Result<SymMatrix> {
    if kernel.dimension() != 1 || w.dim != 1 {
        return Err(Error::Config("grid discretization needs a univariate kernel and weight".into()));
    }
    if m == 0 || !(b > 0.0) || !b.is_finite() {
        return Err(Error::Config(format!("invalid discretization m = {m}, B = {b}")));
    }
    let h = b / m as f64;
    let nodes: Vec<f64> = (-(m as i64)..=m as i64).map(|i| i as f64 * h).collect();
    let mut sqrt_w = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        let v = if x == 0.0 && w.singular_at_zero() { 0.0 } else { w.at_radius(x.abs()) };
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Config(format!("weight undefined at grid node {x}")));
        }
        sqrt_w.push(v.sqrt());
    }
    let cell = 2.0 * b / (2 * m + 1) as f64;
    Ok(SymMatrix::from_fn(nodes.len(), |i, j| {
        if sqrt_w[i] == 0.0 || sqrt_w[j] == 0.0 {
            0.0
        } else {
            cell * kernel.eval(&[nodes[i]], &[nodes[j]]) * sqrt_w[i] * sqrt_w[j]
        }
    }))
}

const LANCZOS_RESIDUAL: f64 = 1e-12;
const LANCZOS_MAX_STEPS: usize = 600;

/// Largest eigenvalue by Lanczos with full reorthogonalization.
pub fn top_eigenvalue(m: &SymMatrix) -> Result<f64> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    let scale = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max).max(m.frobenius_sq().sqrt());
    if scale == 0.0 {
        return Ok(0.0);
    }
    // fixed pseudo-random start: no symmetry, every eigenvector represented
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2b_3c4d);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut theta = 0.0;
    for k in 0..n.min(LANCZOS_MAX_STEPS) {
        m.matvec(&v, &mut w);
        let a = dot(&w, &v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= a * vi;
        }
        if let (Some(prev), Some(&bk)) = (basis.last(), beta.last()) {
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= bk * pi;
            }
        }
        basis.push(v.clone());
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        alpha.push(a);
        let b = dot(&w, &w).sqrt();
        theta = tridiagonal_max_eigenvalue(&alpha, &beta);
        let last = tridiagonal_eigvec_last(&alpha, &beta, theta);
        let residual = b * last.abs();
        if residual <= LANCZOS_RESIDUAL * scale || b <= 1e-15 * scale || k + 1 == n {
            return Ok(theta);
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
    }
    Err(Error::NoConvergence { what: "Lanczos iteration".into(), partial: theta })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Number of eigenvalues of the tridiagonal matrix below x (Sturm count).
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (alpha[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_max_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < k { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Last component of the unit eigenvector of the tridiagonal matrix for the
/// eigenvalue `theta`, by two steps of inverse iteration.
fn tridiagonal_eigvec_last(alpha: &[f64], beta: &[f64], theta: f64) -> f64 {
    let k = alpha.len();
    if k == 1 {
        return 1.0;
    }
    let scale = alpha.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1e-300);
    let shift = theta + 1e-13 * scale;
    let mut y = vec![1.0; k];
    for _ in 0..3 {
        // Gaussian elimination with partial pivoting on the tridiagonal system
        let mut diag: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
        let mut sup: Vec<f64> = beta[..k - 1].to_vec();
        let mut sup2 = vec![0.0; k];
        let mut sub: Vec<f64> = beta[..k - 1].to_vec();
        let mut rhs = y.clone();
        for i in 0..k - 1 {
            if sub[i].abs() > diag[i].abs() {
                // swap rows i and i+1
                let (d0, s0, t0, r0) = (diag[i], sup[i], sup2[i], rhs[i]);
                diag[i] = sub[i];
                sup[i] = diag[i + 1];
                sup2[i] = if i + 1 < k - 1 { sup[i + 1] } else { 0.0 };
                rhs[i] = rhs[i + 1];
                sub[i] = d0;
                diag[i + 1] = s0;
                if i + 1 < k - 1 {
                    sup[i + 1] = t0;
                }
                rhs[i + 1] = r0;
            }
            if diag[i] == 0.0 {
                diag[i] = f64::EPSILON * scale;
            }
            let f = sub[i] / diag[i];
            diag[i + 1] -= f * sup[i];
            if i + 1 < k - 1 {
                sup[i + 1] -= f * sup2[i];
            }
            rhs[i + 1] -= f * rhs[i];
        }
        if diag[k - 1] == 0.0 {
            diag[k - 1] = f64::EPSILON * scale;
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = rhs[i];
            if i + 1 < k {
                s -= sup[i] * x[i + 1];
            }
            if i + 2 < k {
                s -= sup2[i] * x[i + 2];
            }
            x[i] = s / diag[i];
        }
        let nrm = dot(&x, &x).sqrt();
        if !nrm.is_finite() || nrm == 0.0 {
            return 1.0;
        }
        y = x.iter().map(|v| v / nrm).collect();
    }
    y[k - 1]
}

/// One refinement step of a spectral computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub m: usize,
    pub b: f64,
    /// Largest eigenvalue after the cell-width correction.
    pub lambda1: f64,
    /// Largest eigenvalue of the matrix exactly as discretized.
    pub raw: f64,
}

/// Monte Carlo details of a Nyström estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Sample standard deviation of the per-repetition estimates.
    pub spread: f64,
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda1: f64,
    pub schedule: Vec<ScheduleEntry>,
    pub converged: bool,
    /// ∫K(t,t)w(t)dt
    pub trace: f64,
    /// ∬K(s,t)²w(s)w(t)ds dt
    pub trace2: f64,
    pub mc: Option<McSummary>,
}

/// Relative change between successive schedule values that certifies
/// convergence.
pub const SCHEDULE_RTOL: f64 = 1e-4;

/// λ₁ along a refinement schedule.
///
/// The grid matrix uses cells of width 2B/(2m+1) while its nodes are B/m
/// apart; each value is multiplied by (2m+1)/(2m) so that it is the
/// eigenvalue of the rule with matching cell width.
pub fn lambda1<K: Kernel + ?Sized>(kernel: &K, w: &WeightFunction, schedule: &[(usize, f64)]) -> Result<SpectralResult> {
    if schedule.is_empty() {
        return Err(Error::Config("empty discretization schedule".into()));
    }
    for pair in schedule.windows(2) {
        if pair[1].0 < pair[0].0 || pair[1].1 < pair[0].1 {
            return Err(Error::Config("discretization schedule must be non-decreasing in m and B".into()));
        }
    }
    let mut entries = Vec::with_capacity(schedule.len());
    for &(m, b) in schedule {
        let mat = discretize(kernel, w, m, b)?;
        let raw = top_eigenvalue(&mat)?;
        let corrected = raw * (2 * m + 1) as f64 / (2 * m) as f64;
        entries.push(ScheduleEntry { m, b, lambda1: corrected, raw });
    }
    let last = entries[entries.len() - 1].lambda1;
    let converged = entries.len() >= 2 && {
        let prev = entries[entries.len() - 2].lambda1;
        (last - prev).abs() <= SCHEDULE_RTOL * last.abs().max(f64::MIN_POSITIVE)
    };
    let (trace, trace2) = traces_1d(kernel, w)?;
    Ok(SpectralResult { lambda1: last, schedule: entries, converged, trace, trace2, mc: None })
}

fn value_or_partial(r: Result<QuadResult>) -> Result<f64> {
    match r {
        Ok(q) => Ok(q.value),
        Err(Error::Accuracy { value, .. }) if value.is_finite() => Ok(value),
        Err(e) => Err(e),
    }
}

/// (∫K(t,t)w dt, ∬K²ww) for a univariate kernel.
pub fn traces_1d<K: Kernel + ?Sized>(kernel: &K, w: &WeightFunction) -> Result<(f64, f64)> {
    let dom = w.line_domain();
    let wt = |t: f64| if t == 0.0 && w.singular_at_zero() { 0.0 } else { w.at_radius(t.abs()) };
    let trace = value_or_partial(integrate_with(
        |t| {
            let wv = wt(t);
            if wv == 0.0 {
                0.0
            } else {
                kernel.eval(&[t], &[t]) * wv
            }
        },
        &dom,
        QuadOptions::rel(1e-12, 1e-9),
    ))?;
    let trace2 = value_or_partial(integrate2_over(
        |s, t| {
            let ws = wt(s) * wt(t);
            if ws == 0.0 {
                0.0
            } else {
                let k = kernel.eval(&[s], &[t]);
                k * k * ws
            }
        },
        &dom,
        &dom,
        QuadOptions::rel(1e-12, 1e-7).with_budget(20_000_000),
    ))?;
    Ok((trace, trace2))
}

/// Relative spread above which a Nyström estimate is flagged.
pub const MC_SPREAD_LIMIT: f64 = 0.10;

/// Nyström estimate of λ₁ from `reps` independent samples of `n` points.
///
/// Points are drawn from an importance density q: N(0, I/(2γ)) for the
/// Gaussian weight, and the radial density ∝ |t|^{−γ}/(1+|t|²) for the
/// bivariate energy weight. Repetition r uses stream r of a ChaCha8
/// generator seeded with `seed`.
pub fn lambda1_mc<K: Kernel + ?Sized>(kernel: &K, w: &WeightFunction, n: usize, reps: usize, seed: u64) -> Result<SpectralResult> {
    let d = kernel.dimension();
    if w.dim != d {
        return Err(Error::Config(format!("weight dimension {} does not match kernel dimension {d}", w.dim)));
    }
    if n < 2 || reps == 0 {
        return Err(Error::Config(format!("need at least 2 points and 1 repetition, got N = {n}, R = {reps}")));
    }
    let sampler = Importance::for_weight(w)?;
    let runs: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut pts = Vec::with_capacity(n);
            let mut omega = Vec::with_capacity(n);
            for _ in 0..n {
                let (p, ratio) = sampler.draw(&mut rng, w);
                pts.push(p);
                omega.push(ratio.sqrt());
            }
            let nf = n as f64;
            let a = SymMatrix::from_fn(n, |i, j| kernel.eval(&pts[i], &pts[j]) * omega[i] * omega[j] / nf);
            let trace = a.trace();
            let off: f64 = a.frobenius_sq() - (0..n).map(|i| a.get(i, i).powi(2)).sum::<f64>();
            let trace2 = off * nf / (nf - 1.0);
            top_eigenvalue(&a).map(|l| (l, trace, trace2))
        })
        .collect::<Result<Vec<_>>>()?;
    let rf = reps as f64;
    let estimates: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mean = estimates.iter().sum::<f64>() / rf;
    let spread = if reps > 1 {
        (estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (rf - 1.0)).sqrt()
    } else {
        f64::INFINITY
    };
    let converged = reps > 1 && (spread <= MC_SPREAD_LIMIT * mean.abs() || spread == 0.0);
    Ok(SpectralResult {
        lambda1: mean,
        schedule: Vec::new(),
        converged,
        trace: runs.iter().map(|r| r.1).sum::<f64>() / rf,
        trace2: runs.iter().map(|r| r.2).sum::<f64>() / rf,
        mc: Some(McSummary { n, reps, seed, spread, estimates }),
    })
}

enum Importance {
    Normal { sd: f64, dim: usize },
    Radial2 { beta: Beta<f64>, norm: f64 },
}

impl Importance {
    fn for_weight(w: &WeightFunction) -> Result<Self> {
        match w.family {
            WeightFamily::Gauss => Ok(Self::Normal { sd: (1.0 / (2.0 * w.gamma)).sqrt(), dim: w.dim }),
            WeightFamily::Energy if w.dim == 2 => {
                let g = w.gamma;
                let beta = Beta::new(1.0 - g / 2.0, g / 2.0)
                    .map_err(|e| Error::Config(format!("importance density: {e}")))?;
                // ∫_{ℝ²} r^{−γ}/(1+r²) dt = π²/sin(πγ/2)
                Ok(Self::Radial2 { beta, norm: PI * PI / (PI * g / 2.0).sin() })
            }
            _ => Err(Error::Config(format!(
                "no importance density for {:?} weight in dimension {}",
                w.family, w.dim
            ))),
        }
    }

    /// A point and the ratio w/q at it.
    fn draw<R: Rng>(&self, rng: &mut R, w: &WeightFunction) -> (Vec<f64>, f64) {
        match self {
            Self::Normal { sd, dim } => {
                let p: Vec<f64> = (0..*dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
                // q = (γ/π)^{d/2} e^{−γ|t|²}
                let ratio = w.scale * (PI / w.gamma).powf(*dim as f64 / 2.0);
                (p, ratio)
            }
            Self::Radial2 { beta, norm } => {
                let (r2, u) = loop {
                    let u: f64 = beta.sample(rng);
                    if u > 0.0 && u < 1.0 {
                        break (u / (1.0 - u), u);
                    }
                };
                let _ = u;
                let r = r2.sqrt();
                let phi = 2.0 * PI * rng.random::<f64>();
                let q = r.powf(-w.gamma) / (1.0 + r2) / norm;
                (vec![r * phi.cos(), r * phi.sin()], w.at_radius(r) / q)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymMatrix::from_fn(n, |i, j| raw[i * n + j] + raw[j * n + i])
    }

    fn oracle_max(m: &SymMatrix) -> f64 {
        let n = m.dim();
        let a = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        a.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn small_matrices() {
        let d = SymMatrix::new(3, vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(top_eigenvalue(&d).unwrap(), 3.0, epsilon = 1e-14);
        let v = [1.0, -2.0, 0.5, 3.0];
        let r = SymMatrix::from_fn(4, |i, j| v[i] * v[j]);
        assert_abs_diff_eq!(top_eigenvalue(&r).unwrap(), 14.25, epsilon = 1e-12);
        assert_eq!(top_eigenvalue(&SymMatrix::from_fn(5, |_, _| 0.0)).unwrap(), 0.0);
        assert!(SymMatrix::new(2, vec![1.0, 2.0, 3.0, 1.0]).is_err());
    }

    #[test]
    fn random_matrices_match_full_spectrum() {
        for seed in 0..5 {
            let m = random_sym(50, seed);
            let l = top_eigenvalue(&m).unwrap();
            let o = oracle_max(&m);
            assert!((l - o).abs() <= 1e-9 * o.abs(), "{l} vs {o}");
        }
    }

    #[test]
    fn kernel_matrix_matches_full_spectrum() {
        let w = WeightFunction::exp_abs(1.0).unwrap();
        let m = discretize(&KernelSpec::Exponential, &w, 60, 20.0).unwrap();
        let l = top_eigenvalue(&m).unwrap();
        assert!((l - oracle_max(&m)).abs() <= 1e-10 * l);
    }

    #[test]
    fn three_by_three_discretization() {
        let w = WeightFunction::exp_abs(2.0).unwrap();
        let m = discretize(&KernelSpec::Exponential, &w, 1, 1.0).unwrap();
        let k = KernelSpec::Exponential.eval1(1.0, 1.0);
        for i in 0..3 {
            assert_eq!(m.get(1, i), 0.0);
            assert_eq!(m.get(i, 1), 0.0);
        }
        let corner = 2.0 / 3.0 * k * (-2.0f64).exp();
        assert_abs_diff_eq!(m.get(0, 0), corner, epsilon = 1e-16);
        assert_abs_diff_eq!(m.get(2, 2), corner, epsilon = 1e-16);
        let off = 2.0 / 3.0 * KernelSpec::Exponential.eval1(-1.0, 1.0) * (-2.0f64).exp();
        assert_abs_diff_eq!(m.get(0, 2), off, epsilon = 1e-16);
    }

    #[test]
    fn discretization_is_exactly_symmetric() {
        let k = KernelSpec::Logistic { est: crate::distributions::Estimator::LogisticMl };
        let w = WeightFunction::exp_abs(0.7).unwrap();
        for &(m, b) in &[(5, 3.0), (40, 17.0), (101, 9.5)] {
            let mat = discretize(&k, &w, m, b).unwrap();
            for i in 0..mat.dim() {
                for j in 0..mat.dim() {
                    assert_eq!(mat.get(i, j), mat.get(j, i));
                }
            }
        }
    }

    #[test]
    fn singular_weight_zeroes_center() {
        let w = WeightFunction::energy(1.0).unwrap();
        let m = discretize(&KernelSpec::NormalEstimated, &w, 3, 2.0).unwrap();
        for i in 0..7 {
            assert_eq!(m.get(3, i), 0.0);
        }
        assert!(m.get(4, 4) > 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(WeightFunction::energy(2.0).unwrap_err().is_config());
        assert!(WeightFunction::gauss(0.0).unwrap_err().is_config());
        let w = WeightFunction::gauss(1.0).unwrap();
        assert!(discretize(&KernelSpec::NormalSimple { dim: 2 }, &w, 3, 1.0).unwrap_err().is_config());
        assert!(lambda1(&KernelSpec::NormalEstimated, &w, &[]).unwrap_err().is_config());
        assert!(lambda1(&KernelSpec::NormalEstimated, &w, &[(10, 5.0), (5, 5.0)]).unwrap_err().is_config());
    }

    #[test]
    fn energy_constant_normalizes_one_dimension() {
        // ∫(1−cos t)|t|^{−2}dt = π, so C_{1,1} = π
        assert_abs_diff_eq!(WeightFunction::energy_constant(1, 1.0), PI, epsilon = 1e-12);
        // ∫_{ℝ²}(1−cos t₁)|t|^{−3}dt = 2π
        assert_abs_diff_eq!(WeightFunction::energy_constant(2, 1.0), 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn weight_scaling_scales_eigenvalue() {
        let w = WeightFunction::gauss(0.5).unwrap();
        let k = KernelSpec::NormalEstimated;
        let a = top_eigenvalue(&discretize(&k, &w, 200, 8.0).unwrap()).unwrap();
        let b = top_eigenvalue(&discretize(&k, &w.scaled(2.0), 200, 8.0).unwrap()).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn degenerate_schedule_is_unconverged() {
        let w = WeightFunction::exp_abs(1.0).unwrap();
        let r = lambda1(&KernelSpec::Exponential, &w, &[(1, 5.0)]).unwrap();
        assert!(!r.converged);
        assert_eq!(r.schedule.len(), 1);
    }

    #[test]
    fn monotone_in_truncation_bound() {
        let w = WeightFunction::exp_abs(1.0).unwrap();
        for k in [KernelSpec::Exponential, KernelSpec::NormalEstimated] {
            let mut prev = 0.0;
            for b in [2.0, 4.0, 8.0, 16.0] {
                let l = top_eigenvalue(&discretize(&k, &w, 300, b).unwrap()).unwrap();
                assert!(l >= prev - 1e-10, "{k:?} B = {b}: {l} < {prev}");
                prev = l;
            }
        }
    }

    #[test]
    fn trace_domination_and_grid_trace() {
        let cases = [
            (KernelSpec::Exponential, WeightFunction::exp_abs(1.0).unwrap()),
            (KernelSpec::NormalEstimated, WeightFunction::gauss(0.5).unwrap()),
            (KernelSpec::NormalEstimated, WeightFunction::gauss(2.0).unwrap()),
        ];
        for (k, w) in cases {
            let sched = w.default_schedule();
            let r = lambda1(&k, &w, &sched[..2]).unwrap();
            assert!(r.lambda1 <= r.trace * (1.0 + 1e-6));
            assert!(r.lambda1 * r.lambda1 <= r.trace2 * (1.0 + 1e-5));
            let (m, b) = sched[2];
            let grid = discretize(&k, &w, m, b).unwrap();
            let tr = grid.trace() * (2 * m + 1) as f64 / (2 * m) as f64;
            assert!((tr - r.trace).abs() < 1e-3 * r.trace, "{k:?}: {tr} vs {}", r.trace);
        }
    }

    #[test]
    fn exponential_kernel_self_convergence() {
        let w = WeightFunction::exp_abs(1.0).unwrap();
        let r = lambda1(&KernelSpec::Exponential, &w, &[(1000, 40.0), (2000, 40.0)]).unwrap();
        let (a, b) = (r.schedule[0].lambda1, r.schedule[1].lambda1);
        assert!((a - b).abs() < 5e-5 * b, "{a} vs {b}");
        assert!(r.converged);
    }

    #[test]
    fn grid_refinement_cauchy() {
        let w = WeightFunction::exp_abs(1.0).unwrap();
        let k = KernelSpec::Exponential;
        let raw = |m: usize| {
            let l = top_eigenvalue(&discretize(&k, &w, m, 30.0).unwrap()).unwrap();
            l * (2 * m + 1) as f64 / (2 * m) as f64
        };
        let (a, b, c) = (raw(500), raw(1000), raw(2000));
        assert!((c - b).abs() * 2.0 <= (b - a).abs() + 1e-12, "{a} {b} {c}");
    }

    struct Separable(KernelSpec);

    impl Kernel for Separable {
        fn dimension(&self) -> usize {
            2
        }
        fn eval(&self, s: &[f64], t: &[f64]) -> f64 {
            self.0.eval1(s[0], t[0]) * self.0.eval1(s[1], t[1])
        }
    }

    struct Zero;

    impl Kernel for Zero {
        fn dimension(&self) -> usize {
            2
        }
        fn eval(&self, _: &[f64], _: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn nystrom_product_kernel() {
        let w1 = WeightFunction::gauss(0.5).unwrap();
        let one = lambda1(&KernelSpec::NormalSimple { dim: 1 }, &w1, &w1.default_schedule()).unwrap();
        let w2 = w1.with_dim(2);
        let mc = lambda1_mc(&Separable(KernelSpec::NormalSimple { dim: 1 }), &w2, 800, 6, 11).unwrap();
        let spread = mc.mc.as_ref().unwrap().spread;
        let target = one.lambda1 * one.lambda1;
        assert!((mc.lambda1 - target).abs() <= 3.0 * spread + 0.02 * target, "{} vs {target} ± {spread}", mc.lambda1);
        assert!(mc.lambda1 <= mc.trace);
    }

    #[test]
    fn nystrom_zero_kernel_and_seed_batches() {
        let w = WeightFunction::gauss(0.5).unwrap().with_dim(2);
        let z = lambda1_mc(&Zero, &w, 50, 3, 1).unwrap();
        assert_eq!(z.lambda1, 0.0);
        let k = KernelSpec::NormalSimple { dim: 2 };
        let a = lambda1_mc(&k, &w, 500, 5, 100).unwrap();
        let b = lambda1_mc(&k, &w, 500, 5, 200).unwrap();
        let sa = a.mc.as_ref().unwrap().spread;
        let sb = b.mc.as_ref().unwrap().spread;
        assert!((a.lambda1 - b.lambda1).abs() <= 3.0 * sa.max(sb), "{} vs {}", a.lambda1, b.lambda1);
        let again = lambda1_mc(&k, &w, 500, 5, 100).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn energy_importance_weights_integrate_the_diagonal() {
        // mean of K(t,t)w/q estimates ∫K(t,t)w over the plane, here computed radially
        let w = WeightFunction::energy(1.0).unwrap().with_dim(2);
        let k = KernelSpec::NormalSimple { dim: 2 };
        let r = lambda1_mc(&k, &w, 1500, 4, 9).unwrap();
        let radial = integrate_with(
            |r| 2.0 * PI * r * (1.0 - (-r * r).exp()) * w.at_radius(r),
            &IntegrationDomain::half_line(0.0),
            QuadOptions::rel(1e-12, 1e-9),
        )
        .unwrap()
        .value;
        assert!((r.trace - radial).abs() < 0.05 * radial, "{} vs {radial}", r.trace);
    }
}
