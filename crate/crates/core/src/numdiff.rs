//! Finite-difference derivatives on fixed stencils (Fornberg weights).

use crate::error::Result;

/// Weights w[k][j] such that Σ_j w[k][j]·f(x_j) approximates f⁽ᵏ⁾(z) for
/// k = 0..=order.
pub fn fd_weights(z: f64, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivative at 0 from a 7-point centered stencil of
/// spacing `h`, or an 8-point forward stencil when `two_sided` is false.
pub fn derivatives_at_zero<F>(f: F, h: f64, two_sided: bool) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let nodes: Vec<f64> = if two_sided {
        (-3..=3).map(|k| k as f64 * h).collect()
    } else {
        (0..8).map(|k| k as f64 * h).collect()
    };
    let w = fd_weights(0.0, &nodes, 2);
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (j, &x) in nodes.iter().enumerate() {
        let v = f(x)?;
        d1 += w[1][j] * v;
        d2 += w[2][j] * v;
    }
    Ok((d1, d2))
}
