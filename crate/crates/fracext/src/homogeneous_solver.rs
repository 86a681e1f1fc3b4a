//! Homogeneous solves of `D u = f` in the Dirichlet and weighted-Neumann
//! sectors.
//!
//! The primary path is a direct linear solve over a finite family of
//! admissible atoms of the target degree. A diagonal spectral solve in the
//! orthonormal harmonic basis serves as a cross-check for polynomial data.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{FracError, Result};
use crate::hemisphere_spectral::{eigenvalue, orthonormal_basis, spectral_coefficients, HemisphereQuadrature, Sector};
use crate::homogeneous_algebra::{multi_indices, AtomKey, AtomSum, Context, Direction, LatticeExponent};
use crate::scalar::Scalar;

/// Float residuals below this fraction of the deficit norm count as zero.
pub const FLOAT_RESIDUAL_TOL: f64 = 1e-10;
/// Number of times the atom family may be enlarged before giving up.
pub const MAX_ENLARGEMENTS: usize = 3;

/// Raw Dirichlet-sector denominator `(m'+2γ)(m'+n) − (m−n+1)(m+1−2γ)`.
pub fn dirichlet_denominator(n: usize, gamma: f64, m: i64, m2: i64) -> f64 {
    let (n, m, m2) = (n as f64, m as f64, m2 as f64);
    (m2 + 2.0 * gamma) * (m2 + n) - (m - n + 1.0) * (m + 1.0 - 2.0 * gamma)
}

/// Raw Neumann-sector denominator `m'(m'+n−2γ) − (m−n+1+2γ)(m+1)`.
pub fn neumann_denominator(n: usize, gamma: f64, m: i64, m2: i64) -> f64 {
    let (n, m, m2) = (n as f64, m as f64, m2 as f64);
    m2 * (m2 + n - 2.0 * gamma) - (m - n + 1.0 + 2.0 * gamma) * (m + 1.0)
}

fn admissible_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(FracError::config("gamma", "a value in (0,1)", gamma));
    }
    if gamma == 0.5 {
        return Err(FracError::GammaHalf);
    }
    Ok(())
}

pub fn check_solvable_dirichlet(n: usize, gamma: f64, m: i64, m2: i64) -> Result<f64> {
    admissible_gamma(gamma)?;
    Ok(dirichlet_denominator(n, gamma, m, m2))
}

pub fn check_solvable_neumann(n: usize, gamma: f64, m: i64, m2: i64) -> Result<f64> {
    admissible_gamma(gamma)?;
    Ok(neumann_denominator(n, gamma, m, m2))
}

#[derive(Clone, Debug, Serialize)]
pub struct SolvabilityReport {
    pub admissible: bool,
    /// Pairs `(k, λ)` with vanishing denominator.
    pub offending_pairs: Vec<(f64, f64)>,
    /// `k ↦ k(k+n−2γ) − (λ+1+2γ)(λ+n+1)` for the harmonic degrees `k` tested.
    pub denominators: Vec<(LatticeExponent, f64)>,
}

/// Denominators of the diagonal spectral system for data of degree `lambda`.
pub fn solvability_report(n: usize, gamma: f64, sector: Sector, lambda: LatticeExponent, max_m: u32) -> SolvabilityReport {
    let lam = lambda.value(gamma);
    let d = lam + 1.0 + 2.0 * gamma;
    let target = d * (d + n as f64 - 2.0 * gamma);
    let mut denominators = Vec::new();
    let mut offending_pairs = Vec::new();
    for m in 0..=max_m {
        let k = LatticeExponent::int(m as i64) + sector.sigma();
        let kv = k.value(gamma);
        let den = eigenvalue(n, gamma, kv) - target;
        let scale = target.abs().max(1.0);
        if den.abs() <= 1e-12 * scale || (k == lambda + LatticeExponent::new(1, 1)) {
            offending_pairs.push((kv, lam));
        }
        denominators.push((k, den));
    }
    SolvabilityReport {
        admissible: offending_pairs.is_empty(),
        offending_pairs,
        denominators,
    }
}

/// Polynomial degree of `y^{2γ−1} f` with the sector prefactor removed.
fn source_poly_degree(key: &AtomKey) -> i64 {
    key.y_exp.integer_part - 1 + key.x_degree()
}

fn check_source<S: Scalar>(f: &AtomSum<S>, sector: Sector) -> Result<LatticeExponent> {
    let deg = f
        .homogeneity()
        .ok_or_else(|| FracError::Precondition("right-hand side is not homogeneous".into()))?;
    for (k, _) in f.terms() {
        let ok = match sector {
            Sector::Dirichlet => k.y_exp.gamma_multiple == 0 && k.y_exp.integer_part >= 1,
            Sector::Neumann => k.y_exp.gamma_multiple == -1 && k.y_exp.integer_part >= 0,
        };
        if !ok {
            return Err(FracError::Precondition(format!(
                "atom with y exponent {} is outside the {:?}-sector source family",
                k.y_exp, sector
            )));
        }
    }
    Ok(deg)
}

/// Canonical atoms `y^{σ+j} x^β |z|^t` of total degree `d` with `j+|β| ≤ max_p`.
fn ansatz<S: Scalar>(ctx: &Context<S>, sector: Sector, d: LatticeExponent, max_p: i64) -> Vec<AtomKey> {
    let n = ctx.n();
    let sigma = sector.sigma();
    let skip_j1 = sector == Sector::Neumann && ctx.gamma_f64() > 0.5;
    let rest = d - sigma;
    let mut keys = Vec::new();
    let poly_degree = (rest.is_integer() && rest.integer_part >= 0).then_some(rest.integer_part);
    for p in 0..=max_p {
        for j in 0..=p {
            if skip_j1 && j == 1 {
                continue;
            }
            for beta in multi_indices((p - j) as u32, n) {
                if beta[n - 1] > 1 {
                    continue;
                }
                let t = rest - LatticeExponent::int(p);
                let polynomial = t.is_integer() && t.integer_part >= 0 && t.integer_part % 2 == 0;
                if polynomial {
                    continue;
                }
                keys.push(AtomKey::new(sigma + LatticeExponent::int(j), beta, t));
            }
        }
    }
    if let Some(dp) = poly_degree {
        for j in 0..=dp {
            if skip_j1 && j == 1 {
                continue;
            }
            for beta in multi_indices((dp - j) as u32, n) {
                keys.push(AtomKey::new(sigma + LatticeExponent::int(j), beta, LatticeExponent::ZERO));
            }
        }
    }
    keys
}

/// Solve `D u = f` for homogeneous `f`, with `u` in the given sector.
pub fn solve_homogeneous<S: Scalar>(f: &AtomSum<S>, sector: Sector) -> Result<AtomSum<S>> {
    let ctx = f.ctx().clone();
    if f.is_zero() {
        return Ok(AtomSum::zero(&ctx));
    }
    let deg = check_source(f, sector)?;
    let d = deg + LatticeExponent::new(1, 1);
    let p0 = f.terms().map(|(k, _)| source_poly_degree(k)).max().unwrap_or(0).max(0);
    let fnorm = f.coeff_norm();
    let mut last_remainder = f.clone();
    for step in 0..=MAX_ENLARGEMENTS {
        let max_p = p0 + 2 * step as i64;
        let keys = ansatz(&ctx, sector, d, max_p);
        let columns: Vec<AtomSum<S>> = keys
            .iter()
            .map(|k| {
                AtomSum::monomial(&ctx, S::one(), k.y_exp, k.x_multi.clone(), k.r_exp).apply_flat_d()
            })
            .collect();
        let mut rows: BTreeMap<AtomKey, usize> = BTreeMap::new();
        for (k, _) in f.terms() {
            let len = rows.len();
            rows.entry(k.clone()).or_insert(len);
        }
        for c in &columns {
            for (k, _) in c.terms() {
                let len = rows.len();
                rows.entry(k.clone()).or_insert(len);
            }
        }
        let mut a = vec![vec![S::zero(); keys.len()]; rows.len()];
        for (j, c) in columns.iter().enumerate() {
            for (k, v) in c.terms() {
                a[rows[k]][j] = v.clone();
            }
        }
        let mut b = vec![S::zero(); rows.len()];
        for (k, v) in f.terms() {
            b[rows[k]] = v.clone();
        }
        let Some(x) = S::min_norm_solve(&a, keys.len(), &b) else {
            continue;
        };
        let mut u = AtomSum::zero(&ctx);
        for (k, v) in keys.iter().zip(x) {
            u.add_term(k.clone(), v);
        }
        let residual = u.apply_flat_d().sub(f);
        if residual.is_negligible(FLOAT_RESIDUAL_TOL, fnorm) {
            return Ok(if S::EXACT { u } else { u.prune(1e-14) });
        }
        last_remainder = residual;
    }
    Err(FracError::Solver {
        message: format!(
            "{:?}-sector deficit of degree {} is not representable after {} enlargements",
            sector, deg, MAX_ENLARGEMENTS
        ),
        remainder: Some(last_remainder.to_f64().to_json()),
    })
}

/// Split `f` into the part whose atoms have an odd integer `y` offset, which
/// finite atom sums can reach exactly, and the remaining part.
pub fn split_parity<S: Scalar>(f: &AtomSum<S>) -> (AtomSum<S>, AtomSum<S>) {
    let mut exact = AtomSum::zero(f.ctx());
    let mut other = AtomSum::zero(f.ctx());
    for (k, c) in f.terms() {
        if k.y_exp.integer_part.rem_euclid(2) == 1 {
            exact.add_term(k.clone(), c.clone());
        } else {
            other.add_term(k.clone(), c.clone());
        }
    }
    (exact, other)
}

/// Product rule on the open unit half-sphere: Gauss–Legendre in `y ∈ (0, 1)`
/// times a rule on the equatorial sphere scaled by `√(1−y²)`. Returns
/// `(y, x, weight)`.
fn half_sphere_nodes(n: usize, degree: usize) -> Vec<(f64, Vec<f64>, f64)> {
    let (ys, wy) = crate::quadrature::gauss_jacobi_unit(degree / 2 + 2, 0.0, 0.0);
    let (omegas, wo) = crate::quadrature::sphere_rule(n - 1, degree);
    let mut out = Vec::with_capacity(ys.len() * omegas.len());
    for (y, w1) in ys.iter().zip(&wy) {
        let s = (1.0 - y * y).sqrt();
        let jac = s.powi(n as i32 - 2);
        for (om, w2) in omegas.iter().zip(&wo) {
            out.push((*y, om.iter().map(|o| o * s).collect(), w1 * w2 * jac));
        }
    }
    out
}

/// Result of a least-squares solve on the half-sphere.
#[derive(Clone, Debug)]
pub struct ProjectedSolve {
    pub solution: AtomSum<f64>,
    /// Weighted L² norm of `D u − f` on the unit half-sphere relative to `f`.
    pub relative_residual: f64,
    /// Largest `y` offset `J` used in the fit.
    pub max_p: i64,
    pub atoms: usize,
}

/// Solve `D u = f` for sources whose solution is smooth on the half-sphere
/// but not a finite atom sum (even integer `y` offsets).
///
/// Writing `u = Σ_β x^β U_β(y, r)`, the flat operator acts as
/// `D(x^β U) = x^β D_{n+2|β|} U − y^{1−2γ} (Δx^β) U`, where `D_N` is the
/// operator on functions of `(y, r)` with `N` horizontal dimensions. The
/// monomials are processed by decreasing degree; each `U_β` is a
/// least-squares fit in `y^{σ+j} r^{b_j}`, `j ≤ J`, on Gauss nodes of the
/// quarter circle `r = 1`. `J` grows until the weighted residual on the
/// half-sphere drops below `tol`.
pub fn solve_homogeneous_projected(f: &AtomSum<f64>, sector: Sector, tol: f64) -> Result<ProjectedSolve> {
    let ctx = f.ctx().clone();
    let n = ctx.n();
    let g = ctx.gamma_f64();
    if f.is_zero() {
        return Ok(ProjectedSolve {
            solution: AtomSum::zero(&ctx),
            relative_residual: 0.0,
            max_p: 0,
            atoms: 0,
        });
    }
    let deg = check_source(f, sector)?;
    let d = deg + LatticeExponent::new(1, 1);
    let sigma = sector.sigma();
    let skip_j1 = sector == Sector::Neumann && g > 0.5;
    let weight = |y: f64| match sector {
        Sector::Dirichlet => 1.0,
        Sector::Neumann => y.powf(2.0 * g),
    };
    let check_nodes = half_sphere_nodes(n, 24);
    let fnorm: f64 = check_nodes
        .iter()
        .map(|(y, x, w)| Ok(w * (weight(*y) * f.evaluate(*y, x)?).powi(2)))
        .sum::<Result<f64>>()?
        .sqrt();
    let mut best: Option<ProjectedSolve> = None;
    for jmax in [12usize, 18, 24, 30] {
        let js: Vec<usize> = (0..=jmax).filter(|&j| !(skip_j1 && j == 1)).collect();
        let (ts, tw) = crate::quadrature::gauss_jacobi_unit(2 * jmax + 24, 0.0, 0.0);
        let nodes: Vec<(f64, f64)> = ts
            .iter()
            .zip(&tw)
            .map(|(t, w)| ((t * std::f64::consts::FRAC_PI_2).sin(), w.sqrt()))
            .collect();
        let mut pending: BTreeMap<Vec<u32>, Vec<(LatticeExponent, f64)>> = BTreeMap::new();
        for (k, c) in f.terms() {
            pending.entry(k.x_multi.clone()).or_default().push((k.y_exp, *c));
        }
        let mut u = AtomSum::zero(&ctx);
        while let Some(beta) = pending
            .keys()
            .max_by_key(|b| (b.iter().sum::<u32>(), (*b).clone()))
            .cloned()
        {
            let data = pending.remove(&beta).unwrap_or_default();
            let l = beta.iter().sum::<u32>() as i64;
            let big_n = (n as i64 + 2 * l) as f64;
            let dl = d - LatticeExponent::int(l);
            let mut a = nalgebra::DMatrix::<f64>::zeros(nodes.len(), js.len());
            for (col, &j) in js.iter().enumerate() {
                let ay = (sigma + LatticeExponent::int(j as i64)).value(g);
                let bv = dl.value(g) - ay;
                let c0 = -ay * (ay - 2.0 * g);
                let c1 = -bv * (2.0 * ay + big_n + bv - 2.0 * g);
                for (row, (y, w)) in nodes.iter().enumerate() {
                    let v = c0 * y.powf(ay - 1.0 - 2.0 * g) + c1 * y.powf(ay + 1.0 - 2.0 * g);
                    a[(row, col)] = w * weight(*y) * v;
                }
            }
            let b = nalgebra::DVector::from_iterator(
                nodes.len(),
                nodes
                    .iter()
                    .map(|(y, w)| w * weight(*y) * data.iter().map(|(e, c)| c * y.powf(e.value(g))).sum::<f64>()),
            );
            let svd = a.svd(true, true);
            let eps = 1e-14 * svd.singular_values.max();
            let coef = svd
                .solve(&b, eps)
                .map_err(|e| FracError::Numerical(format!("projected solve: {e}")))?;
            let lower: Vec<(usize, Vec<u32>)> = (0..n)
                .filter(|&i| beta[i] >= 2)
                .map(|i| {
                    let mut lb = beta.clone();
                    lb[i] -= 2;
                    (i, lb)
                })
                .collect();
            for (&j, &c) in js.iter().zip(coef.iter()) {
                if c == 0.0 {
                    continue;
                }
                let ye = sigma + LatticeExponent::int(j as i64);
                let re = dl - ye;
                u.add_term(AtomKey::new(ye, beta.clone(), re), c);
                for (i, lb) in &lower {
                    let factor = (beta[*i] * (beta[*i] - 1)) as f64;
                    pending
                        .entry(lb.clone())
                        .or_default()
                        .push((ye + LatticeExponent::new(1, -1), factor * c));
                }
            }
        }
        let residual = u.apply_flat_d().sub(f);
        let num: f64 = check_nodes
            .iter()
            .map(|(y, x, w)| Ok(w * (weight(*y) * residual.evaluate(*y, x)?).powi(2)))
            .sum::<Result<f64>>()?
            .sqrt();
        let rel = num / fnorm;
        let candidate = ProjectedSolve {
            atoms: u.len(),
            solution: u,
            relative_residual: rel,
            max_p: jmax as i64,
        };
        let done = rel <= tol;
        if best.as_ref().is_none_or(|b| rel < b.relative_residual) {
            best = Some(candidate);
        }
        if done {
            break;
        }
    }
    let best = best.expect("at least one projection step runs");
    if best.relative_residual > tol {
        return Err(FracError::Solver {
            message: format!(
                "{:?}-sector projection of degree {} reached relative residual {:e} (limit {:e})",
                sector, deg, best.relative_residual, tol
            ),
            remainder: Some(f.to_json()),
        });
    }
    Ok(best)
}

pub fn solve_dirichlet<S: Scalar>(f: &AtomSum<S>) -> Result<AtomSum<S>> {
    solve_homogeneous(f, Sector::Dirichlet)
}

pub fn solve_neumann<S: Scalar>(f: &AtomSum<S>) -> Result<AtomSum<S>> {
    solve_homogeneous(f, Sector::Neumann)
}

/// Diagonal spectral solve for data `f = y^{1−2γ+σ} P(y,x) |z|^s` with `P`
/// even in `y` of degree at most `max_m`.
pub fn spectral_solve(f: &AtomSum<f64>, sector: Sector, max_m: u32) -> Result<AtomSum<f64>> {
    let ctx = f.ctx().clone();
    let n = ctx.n();
    let g = ctx.gamma_f64();
    let lambda = f
        .homogeneity()
        .ok_or_else(|| FracError::Precondition("right-hand side is not homogeneous".into()))?;
    let d = lambda + LatticeExponent::new(1, 1);
    let dv = d.value(g);
    let target = dv * (dv + n as f64 - 2.0 * g);
    let basis = orthonormal_basis(&ctx, sector, max_m)?;
    let quad = HemisphereQuadrature::for_sector(n, g, sector, 2 * max_m as usize + 4);
    let b = spectral_coefficients(|y, x| f.evaluate(y, x), &basis, &quad)?;
    let mut u = AtomSum::zero(&ctx);
    for (bi, e) in b.iter().zip(&basis) {
        let den = e.eigenvalue - target;
        if den.abs() < 1e-12 * target.abs().max(1.0) {
            return Err(FracError::Solver {
                message: format!("resonant harmonic degree {} for data degree {}", e.degree, lambda),
                remainder: None,
            });
        }
        if bi.abs() < 1e-15 {
            continue;
        }
        u = u.add(&e.body.mul_r(d - e.degree).scale(&(bi / den)));
    }
    Ok(u.prune(1e-13))
}

/// Log-log slope of `|y^{1−2γ}∂_y u|` along `y → 0` at a fixed boundary point.
pub fn weighted_trace_decay_exponent(u: &AtomSum<f64>, x: &[f64]) -> Result<f64> {
    let w = LatticeExponent::new(1, -1);
    let flux = u.differentiate(Direction::Y).mul_y(w);
    let ys: Vec<f64> = (0..6).map(|k| 1e-2 * 0.5f64.powi(k)).collect();
    let mut pts = Vec::new();
    for &y in &ys {
        let v = flux.evaluate(y, x)?.abs();
        if v == 0.0 {
            return Ok(f64::INFINITY);
        }
        pts.push((y.ln(), v.ln()));
    }
    Ok(crate::util::fit_slope(&pts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn denominator_examples() {
        assert!((dirichlet_denominator(2, 0.25, 0, 0) - 1.5).abs() < 1e-15);
        assert_eq!(dirichlet_denominator(1, 0.5, 1, 0), 0.0);
        assert!((neumann_denominator(1, 0.25, 0, 0) + 0.5).abs() < 1e-15);
        assert!((neumann_denominator(2, 0.75, 1, 1) + 1.5).abs() < 1e-15);
        assert!(matches!(check_solvable_dirichlet(1, 0.5, 1, 0), Err(FracError::GammaHalf)));
    }

    #[test]
    fn zero_data_gives_zero() {
        let ctx = Context::new(2, 0.3).unwrap();
        let z = AtomSum::zero(&ctx);
        assert!(solve_dirichlet(&z).unwrap().is_zero());
        assert!(solve_neumann(&z).unwrap().is_zero());
    }

    #[test]
    fn dirichlet_example_source() {
        let ctx = Context::new(2, 0.3).unwrap();
        let f = AtomSum::monomial(&ctx, 0.7, LatticeExponent::int(1), vec![0, 0], LatticeExponent::new(-3, -1));
        let u = solve_dirichlet(&f).unwrap();
        assert_eq!(u.homogeneity(), Some(LatticeExponent::int(-1)));
        let r = u.apply_flat_d().sub(&f);
        assert!(r.coeff_norm() < 1e-10 * f.coeff_norm());
        for (k, _) in u.terms() {
            assert!(k.y_exp.value(0.3) >= 0.6 - 1e-12);
        }
    }
}
