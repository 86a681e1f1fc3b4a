//! Polynomial D-harmonics of both boundary sectors and the weighted spectral
//! structure on the upper half-sphere `S^n_+`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{FracError, Result};
use crate::homogeneous_algebra::{multi_indices, AtomKey, AtomSum, Context, Direction, LatticeExponent};
use crate::quadrature::{gauss_jacobi_unit, sphere_rule};
use crate::scalar::Scalar;

/// Boundary behaviour of homogeneous solutions: Dirichlet-type functions carry
/// a factor `y^{2γ}`, Neumann-type functions have zero weighted flux.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Dirichlet,
    Neumann,
}

impl Sector {
    /// The `y` exponent offset σ ∈ {0, 2γ}.
    pub fn sigma(&self) -> LatticeExponent {
        match self {
            Sector::Dirichlet => LatticeExponent::TWO_GAMMA,
            Sector::Neumann => LatticeExponent::ZERO,
        }
    }

    pub fn sigma_value(&self, gamma: f64) -> f64 {
        self.sigma().value(gamma)
    }

    pub fn parse(s: &str) -> Result<Sector> {
        match s {
            "dirichlet" => Ok(Sector::Dirichlet),
            "neumann" => Ok(Sector::Neumann),
            other => Err(FracError::config("sector", "\"dirichlet\" or \"neumann\"", other)),
        }
    }
}

/// A polynomial-sector function annihilated by `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct DHarmonic<S = f64> {
    pub sector: Sector,
    /// Polynomial degree `m` of the seed.
    pub m: u32,
    /// Homogeneity `k = m + σ`.
    pub degree: LatticeExponent,
    pub body: AtomSum<S>,
    pub eigenvalue: f64,
}

impl<S: Scalar> DHarmonic<S> {
    pub fn to_f64(&self) -> DHarmonic<f64> {
        DHarmonic {
            sector: self.sector,
            m: self.m,
            degree: self.degree,
            body: self.body.to_f64(),
            eigenvalue: self.eigenvalue,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "sector": self.sector,
            "m": self.m,
            "degree": self.degree,
            "eigenvalue": self.eigenvalue,
            "body": self.body.to_json(),
        })
    }
}

/// `k(k + n − 2γ)`.
pub fn eigenvalue(n: usize, gamma: f64, k: f64) -> f64 {
    k * (k + n as f64 - 2.0 * gamma)
}

/// Harmonic completions of every degree-`m` monomial seed.
pub fn build_harmonics<S: Scalar>(ctx: &Context<S>, sector: Sector, m: u32) -> Vec<DHarmonic<S>> {
    let n = ctx.n();
    let sigma = sector.sigma();
    let sigma_v = ctx.value(sigma);
    let k = LatticeExponent::int(m as i64) + sigma;
    let lambda = eigenvalue(n, ctx.gamma_f64(), k.value(ctx.gamma_f64()));
    multi_indices(m, n)
        .into_iter()
        .map(|seed| {
            let mut p = AtomSum::monomial(ctx, S::one(), LatticeExponent::ZERO, seed, LatticeExponent::ZERO);
            let mut body = p.mul_y(sigma);
            let mut l: i64 = 0;
            loop {
                let lap = (0..n).fold(AtomSum::zero(ctx), |acc, i| {
                    acc.add(&p.differentiate(Direction::X(i)).differentiate(Direction::X(i)))
                });
                if lap.is_zero() {
                    break;
                }
                let two_l2 = S::from_int(2 * l + 2);
                let denom = (sigma_v.clone() + two_l2.clone())
                    * (sigma_v.clone() + two_l2 - ctx.two_gamma().clone());
                assert!(!denom.is_zero(), "harmonic recursion hit a zero denominator");
                p = lap.scale(&(-S::one() / denom));
                l += 1;
                body = body.add(&p.mul_y(sigma + LatticeExponent::int(2 * l)));
            }
            DHarmonic {
                sector,
                m,
                degree: k,
                body,
                eigenvalue: lambda,
            }
        })
        .collect()
}

/// Product rule on `S^n_+` for integrals `∫ y^α F dσ`, exact when `F` is a
/// polynomial of degree at most `degree` that is even in `y`.
#[derive(Clone, Debug)]
pub struct HemisphereQuadrature {
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub degree: usize,
    pub nodes: Vec<(f64, Vec<f64>)>,
    pub weights: Vec<f64>,
}

impl HemisphereQuadrature {
    pub fn new(n: usize, gamma: f64, alpha: f64, degree: usize) -> Self {
        let nu = degree / 4 + 2;
        let (us, uw) = gauss_jacobi_unit(nu, (alpha - 1.0) / 2.0, (n as f64 - 2.0) / 2.0);
        let (sp, sw) = sphere_rule(n - 1, degree);
        let mut nodes = Vec::with_capacity(nu * sp.len());
        let mut weights = Vec::with_capacity(nu * sp.len());
        for (u, w) in us.iter().zip(&uw) {
            let y = u.sqrt();
            let s = (1.0 - u).sqrt();
            for (p, wp) in sp.iter().zip(&sw) {
                nodes.push((y, p.iter().map(|v| v * s).collect()));
                weights.push(0.5 * w * wp);
            }
        }
        HemisphereQuadrature {
            n,
            gamma,
            alpha,
            degree,
            nodes,
            weights,
        }
    }

    /// Rule absorbing `y^{1−2γ}` (the bare weighted measure).
    pub fn weighted(n: usize, gamma: f64, degree: usize) -> Self {
        Self::new(n, gamma, 1.0 - 2.0 * gamma, degree)
    }

    /// Rule suited to products of two functions of a sector.
    pub fn for_sector(n: usize, gamma: f64, sector: Sector, degree: usize) -> Self {
        Self::new(n, gamma, 1.0 - 2.0 * gamma + 2.0 * sector.sigma_value(gamma), degree)
    }

    /// `Σ w_i F(node_i) ≈ ∫ y^α F dσ`.
    pub fn integrate(&self, f: impl Fn(f64, &[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|((y, x), w)| w * f(*y, x)).sum()
    }

    /// `∫ G dσ` for an integrand given pointwise; the rule weight is divided out.
    pub fn integrate_plain(&self, g: impl Fn(f64, &[f64]) -> Result<f64>) -> Result<f64> {
        let mut s = 0.0;
        for ((y, x), w) in self.nodes.iter().zip(&self.weights) {
            s += w * g(*y, x)? * y.powf(-self.alpha);
        }
        Ok(s)
    }
}

/// `∫_{S^n_+} y^{1−2γ} u v dσ`.
pub fn weighted_inner_product<S: Scalar>(u: &AtomSum<S>, v: &AtomSum<S>, quad: &HemisphereQuadrature) -> Result<f64> {
    let w = 1.0 - 2.0 * quad.gamma;
    quad.integrate_plain(|y, x| Ok(y.powf(w) * u.evaluate(y, x)? * v.evaluate(y, x)?))
}

/// Modified Gram–Schmidt (applied twice) in the weighted inner product.
pub fn orthogonalize_within_degree(
    harmonics: &[DHarmonic<f64>],
    quad: &HemisphereQuadrature,
) -> Result<Vec<DHarmonic<f64>>> {
    let mut out: Vec<DHarmonic<f64>> = Vec::with_capacity(harmonics.len());
    for h in harmonics {
        let norm0 = weighted_inner_product(&h.body, &h.body, quad)?.sqrt();
        let mut v = h.body.clone();
        for _ in 0..2 {
            for e in &out {
                let c = weighted_inner_product(&v, &e.body, quad)?;
                v = v.sub(&e.body.scale(&c));
            }
        }
        let nv = weighted_inner_product(&v, &v, quad)?.max(0.0).sqrt();
        if !(nv > 1e-10 * norm0) {
            return Err(FracError::Numerical(format!(
                "rank deficiency while orthogonalizing degree-{} harmonics (quadrature degree {})",
                h.m, quad.degree
            )));
        }
        out.push(DHarmonic {
            body: v.scale(&(1.0 / nv)),
            ..h.clone()
        });
    }
    Ok(out)
}

/// `∫ y^{1−2γ}|∇_S e|² / ∫ y^{1−2γ} e²` on the unit half-sphere.
pub fn rayleigh_quotient(e: &DHarmonic<f64>, quad: &HemisphereQuadrature) -> Result<f64> {
    let n = quad.n;
    let g = quad.gamma;
    let k = e.degree.value(g);
    let alpha_num = match e.sector {
        Sector::Dirichlet => 2.0 * g - 1.0,
        Sector::Neumann => 1.0 - 2.0 * g,
    };
    let qn = HemisphereQuadrature::new(n, g, alpha_num, quad.degree.max(2 * e.m as usize + 2));
    let qd = HemisphereQuadrature::for_sector(n, g, e.sector, quad.degree.max(2 * e.m as usize + 2));
    let grads: Vec<AtomSum<f64>> = std::iter::once(Direction::Y)
        .chain((0..n).map(Direction::X))
        .map(|d| e.body.differentiate(d))
        .collect();
    let w = 1.0 - 2.0 * g;
    let num = qn.integrate_plain(|y, x| {
        let mut gsq = 0.0;
        for d in &grads {
            gsq += d.evaluate(y, x)?.powi(2);
        }
        let v = e.body.evaluate(y, x)?;
        Ok(y.powf(w) * (gsq - k * k * v * v))
    })?;
    let den = weighted_inner_product(&e.body, &e.body, &qd)?;
    Ok(num / den)
}

/// Orthonormal harmonics of a sector with degrees `0..=max_m`.
pub fn orthonormal_basis(ctx: &Context<f64>, sector: Sector, max_m: u32) -> Result<Vec<DHarmonic<f64>>> {
    let quad = HemisphereQuadrature::for_sector(ctx.n(), ctx.gamma_f64(), sector, 2 * max_m as usize + 4);
    let mut out = Vec::new();
    for m in 0..=max_m {
        out.extend(orthogonalize_within_degree(&build_harmonics(ctx, sector, m), &quad)?);
    }
    Ok(out)
}

/// Expansion coefficients `⟨y^{2γ−1}F, e⟩ = ∫ F e dσ` of a function given
/// on the sphere, against an orthonormal harmonic list.
pub fn spectral_coefficients(
    f_on_sphere: impl Fn(f64, &[f64]) -> Result<f64>,
    basis: &[DHarmonic<f64>],
    quad: &HemisphereQuadrature,
) -> Result<Vec<f64>> {
    basis
        .iter()
        .map(|e| quad.integrate_plain(|y, x| Ok(f_on_sphere(y, x)? * e.body.evaluate(y, x)?)))
        .collect()
}

/// Weighted L² distance on the sphere between a sector polynomial and its
/// harmonic expansion up to degree `max_m`; returns (error, norm).
pub fn completeness_defect(ctx: &Context<f64>, sector: Sector, f: &AtomSum<f64>, max_m: u32) -> Result<(f64, f64)> {
    let basis = orthonormal_basis(ctx, sector, max_m)?;
    let quad = HemisphereQuadrature::for_sector(ctx.n(), ctx.gamma_f64(), sector, 2 * max_m as usize + 4);
    let w = 1.0 - 2.0 * ctx.gamma_f64();
    let coeffs = spectral_coefficients(|y, x| Ok(y.powf(w) * f.evaluate(y, x)?), &basis, &quad)?;
    let mut approx = AtomSum::zero(ctx);
    for (c, e) in coeffs.iter().zip(&basis) {
        approx = approx.add(&e.body.scale(c));
    }
    let diff = f.sub(&approx);
    let err = weighted_inner_product(&diff, &diff, &quad)?.max(0.0).sqrt();
    let norm = weighted_inner_product(f, f, &quad)?.sqrt();
    Ok((err, norm))
}

/// Key of the seed monomial `y^σ x^β` of a harmonic.
pub fn seed_key(h: &DHarmonic<impl Scalar>, beta: Vec<u32>) -> AtomKey {
    AtomKey::new(h.sector.sigma(), beta, LatticeExponent::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{hemisphere_moment, integrate};

    #[test]
    fn dirichlet_quadratic_example() {
        let ctx = Context::new(1, 0.3).unwrap();
        let hs = build_harmonics(&ctx, Sector::Dirichlet, 2);
        assert_eq!(hs.len(), 1);
        let mut expected = AtomSum::monomial(&ctx, 1.0, LatticeExponent::TWO_GAMMA, vec![2], LatticeExponent::ZERO);
        expected = expected.add(&AtomSum::monomial(
            &ctx,
            -1.0 / 2.6,
            LatticeExponent::new(2, 1),
            vec![0],
            LatticeExponent::ZERO,
        ));
        let d = hs[0].body.sub(&expected);
        assert!(d.max_abs_coeff() < 1e-15, "{}", hs[0].body);
    }

    #[test]
    fn neumann_quadratic_example() {
        let ctx = Context::new(1, 0.3).unwrap();
        let h = &build_harmonics(&ctx, Sector::Neumann, 2)[0];
        let c = h
            .body
            .coeff(&AtomKey::new(LatticeExponent::int(2), vec![0], LatticeExponent::ZERO))
            .copied()
            .unwrap();
        assert!((c + 1.0 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn constant_and_y2gamma_for_degree_zero() {
        let ctx = Context::new(3, 0.7).unwrap();
        let n0 = build_harmonics(&ctx, Sector::Neumann, 0);
        assert_eq!(n0[0].body, AtomSum::constant(&ctx, 1.0));
        let d0 = build_harmonics(&ctx, Sector::Dirichlet, 0);
        assert_eq!(
            d0[0].body,
            AtomSum::monomial(&ctx, 1.0, LatticeExponent::TWO_GAMMA, vec![0, 0, 0], LatticeExponent::ZERO)
        );
    }

    #[test]
    fn quadrature_reproduces_moments() {
        for n in 1..=3 {
            let g = 0.35;
            let q = HemisphereQuadrature::weighted(n, g, 8);
            for beta in multi_indices(4, n) {
                for a in [0u32, 2, 4] {
                    let num = q.integrate(|y, x| {
                        y.powi(a as i32) * x.iter().zip(&beta).map(|(v, b)| v.powi(*b as i32)).product::<f64>()
                    });
                    let exact = hemisphere_moment(1.0 - 2.0 * g + a as f64, &beta);
                    assert!((num - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n} {beta:?} a={a}");
                }
            }
        }
    }

    #[test]
    fn unit_norm_matches_one_dimensional_oracle() {
        let g = 0.25;
        let ctx = Context::new(1, g).unwrap();
        let q = HemisphereQuadrature::weighted(1, g, 4);
        let one = AtomSum::constant(&ctx, 1.0);
        let v = weighted_inner_product(&one, &one, &q).unwrap();
        let oracle = integrate(|t: f64| t.sin().powf(1.0 - 2.0 * g), 0.0, std::f64::consts::PI, 1e-14).unwrap();
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_examples() {
        let g = 0.25;
        let ctx = Context::new(1, g).unwrap();
        let basis = orthonormal_basis(&ctx, Sector::Neumann, 2).unwrap();
        let q = HemisphereQuadrature::for_sector(1, g, Sector::Neumann, 8);
        let r = rayleigh_quotient(&basis[2], &q).unwrap();
        assert_eq!(basis[2].m, 2);
        assert!((r - 5.0).abs() < 1e-10, "{r}");
        let r0 = rayleigh_quotient(&basis[0], &q).unwrap();
        assert!(r0.abs() < 1e-12);
        let ctx2 = Context::new(2, 0.3).unwrap();
        let d = orthonormal_basis(&ctx2, Sector::Dirichlet, 0).unwrap();
        let qd = HemisphereQuadrature::for_sector(2, 0.3, Sector::Dirichlet, 4);
        let r = rayleigh_quotient(&d[0], &qd).unwrap();
        assert!((r - 0.6 * 2.0).abs() < 1e-10, "{r}");
    }

    #[test]
    fn duplicate_input_is_rank_deficient() {
        let ctx = Context::new(1, 0.3).unwrap();
        let h = build_harmonics(&ctx, Sector::Neumann, 1).remove(0);
        let q = HemisphereQuadrature::for_sector(1, 0.3, Sector::Neumann, 6);
        assert!(orthogonalize_within_degree(&[h.clone(), h], &q).is_err());
    }
}
