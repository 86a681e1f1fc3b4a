//! Gauss–Jacobi rules, sphere and half-sphere product rules, and an adaptive
//! one-dimensional integrator.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{FracError, Result};

/// Nodes and weights of the Gauss–Jacobi rule on [−1, 1] for the weight
/// `(1−x)^a (1+x)^b`, computed with the Golub–Welsch algorithm.
pub fn gauss_jacobi(npts: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(npts > 0 && a > -1.0 && b > -1.0);
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(npts, npts);
    for k in 0..npts {
        let kf = k as f64;
        jac[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < npts {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let b2 = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * j * (j + a) * (j + b) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            jac[(k, k + 1)] = b2.sqrt();
            jac[(k + 1, k)] = b2.sqrt();
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..npts)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Gauss rule on [0, 1] for the weight `u^p (1−u)^q`.
pub fn gauss_jacobi_unit(npts: usize, p: f64, q: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(npts, q, p);
    let scale = 2f64.powf(-(p + q + 1.0));
    (
        x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
        w.iter().map(|v| v * scale).collect(),
    )
}

/// Product rule on the unit sphere `S^d ⊂ ℝ^{d+1}`, exact for polynomials of
/// degree at most `degree`. Returns points and weights.
pub fn sphere_rule(d: usize, degree: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    match d {
        0 => (vec![vec![1.0], vec![-1.0]], vec![1.0, 1.0]),
        1 => {
            let m = degree + 1;
            let w = 2.0 * std::f64::consts::PI / m as f64;
            let pts = (0..m)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect();
            (pts, vec![w; m])
        }
        _ => {
            let q = degree / 2 + 1;
            let e = (d as f64 - 2.0) / 2.0;
            let (ts, tw) = gauss_jacobi(q, e, e);
            let (sub, sw) = sphere_rule(d - 1, degree);
            let mut pts = Vec::with_capacity(q * sub.len());
            let mut wts = Vec::with_capacity(q * sub.len());
            for (t, wt) in ts.iter().zip(&tw) {
                let s = (1.0 - t * t).sqrt();
                for (p, wp) in sub.iter().zip(&sw) {
                    let mut pt: Vec<f64> = p.iter().map(|v| v * s).collect();
                    pt.push(*t);
                    pts.push(pt);
                    wts.push(wt * wp);
                }
            }
            (pts, wts)
        }
    }
}

/// Exact value of `∫_{S^n_+} y^a x^β dσ`.
pub fn hemisphere_moment(a: f64, beta: &[u32]) -> f64 {
    if beta.iter().any(|b| b % 2 == 1) {
        return 0.0;
    }
    let n = beta.len() as f64;
    let bsum: f64 = beta.iter().map(|&b| b as f64).sum();
    let mut l = ln_gamma((a + 1.0) / 2.0) - ln_gamma((a + bsum + n + 1.0) / 2.0);
    for &b in beta {
        l += ln_gamma((b as f64 + 1.0) / 2.0);
    }
    l.exp()
}

/// Surface area of the unit sphere `S^{d} ⊂ ℝ^{d+1}`.
pub fn sphere_area(d: usize) -> f64 {
    let k = (d as f64 + 1.0) / 2.0;
    2.0 * std::f64::consts::PI.powf(k) / gamma(k)
}

/// Adaptive integration over a finite interval (double exponential rule).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    let out = quadrature::double_exponential::integrate(&f, a, b, abs_tol);
    if !out.integral.is_finite() {
        return Err(FracError::Numerical(format!("non-finite integral on [{a}, {b}]")));
    }
    if out.error_estimate > 1e3 * abs_tol {
        return Err(FracError::Numerical(format!(
            "quadrature on [{a}, {b}] did not converge: error estimate {:e}",
            out.error_estimate
        )));
    }
    Ok(out.integral)
}

/// Adaptive integration, bisecting the interval into `pieces` equal parts.
pub fn integrate_split(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, abs_tol: f64) -> Result<f64> {
    let h = (b - a) / pieces as f64;
    let mut s = 0.0;
    for i in 0..pieces {
        s += integrate(&f, a + h * i as f64, a + h * (i + 1) as f64, abs_tol / pieces as f64)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_rule_integrates_monomials() {
        let (a, b) = (-0.3, 0.6);
        let (x, w) = gauss_jacobi(7, a, b);
        for k in 0..14 {
            let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let exact = integrate(
                |t| (1.0 - t).powf(a) * (1.0 + t).powf(b) * t.powi(k),
                -1.0,
                1.0,
                1e-12,
            )
            .unwrap();
            assert!((num - exact).abs() < 1e-9, "k={k} {num} {exact}");
        }
    }

    #[test]
    fn unit_rule_matches_beta_function() {
        let (p, q) = (-0.25, 0.5);
        let (u, w) = gauss_jacobi_unit(6, p, q);
        let s: f64 = u.iter().zip(&w).map(|(u, w)| w * u * u).sum();
        let exact = (ln_gamma(p + 3.0) + ln_gamma(q + 1.0) - ln_gamma(p + q + 4.0)).exp();
        assert!((s - exact).abs() < 1e-13);
    }

    #[test]
    fn sphere_rules_integrate_constants() {
        for d in 0..4 {
            let (_, w) = sphere_rule(d, 6);
            let s: f64 = w.iter().sum();
            assert!((s - sphere_area(d)).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn two_sphere_rule_integrates_quartic() {
        let (p, w) = sphere_rule(2, 4);
        let s: f64 = p.iter().zip(&w).map(|(p, w)| w * p[0].powi(2) * p[2].powi(2)).sum();
        assert!((s - 4.0 * std::f64::consts::PI / 15.0).abs() < 1e-13);
    }
}
