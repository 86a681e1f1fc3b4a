//! Metric jets `g = dy² + h_y` in Fermi coordinates and the action of the
//! curved-minus-flat operator on atom sums.
//!
//! All derived quantities (√det, inverse metric, the coefficient `e` of
//! `E_g = e·y^{−2γ}`) are polynomial truncations at the jet order `N`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{FracError, Result};
use crate::homogeneous_algebra::{multi_indices, AtomSum, Context, Direction, LatticeExponent};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JetKind {
    Flat,
    Jet,
    PeLocallyFlat,
}

/// Taylor data of `h_y(x)` about the origin: `h = Σ H_{(j,β)} y^j x^β`.
#[derive(Debug)]
pub struct MetricJet {
    pub n: usize,
    pub gamma: f64,
    pub order: usize,
    pub kind: JetKind,
    /// Coefficients of `h − δ`, keyed by `(j, β)`.
    coeffs: BTreeMap<(u32, Vec<u32>), Vec<Vec<f64>>>,
    cache: OnceLock<DerivedJets<f64>>,
}

impl Clone for MetricJet {
    fn clone(&self) -> Self {
        MetricJet {
            n: self.n,
            gamma: self.gamma,
            order: self.order,
            kind: self.kind,
            coeffs: self.coeffs.clone(),
            cache: OnceLock::new(),
        }
    }
}

impl PartialEq for MetricJet {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && self.gamma == o.gamma && self.order == o.order && self.kind == o.kind && self.coeffs == o.coeffs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JetDiagnostics {
    pub minimal: bool,
    pub umbilic: bool,
    pub pe_flat_order: usize,
    pub det_normalized: bool,
}

/// Polynomial jets derived from `h`, truncated at the jet order.
#[derive(Clone, Debug)]
pub struct DerivedJets<S: Scalar> {
    pub order: usize,
    pub h: Vec<Vec<AtomSum<S>>>,
    /// `g^{ij} − δ^{ij}`.
    pub inverse_minus_delta: Vec<Vec<AtomSum<S>>>,
    pub sqrt_det: AtomSum<S>,
    /// `∂_p log √g` for `p = y, x_1, …, x_n`.
    pub dlog_sqrt_det: Vec<AtomSum<S>>,
    /// `e = ((n−2γ)/2)·∂_y √g / √g`.
    pub e: AtomSum<S>,
}

fn check_square(m: &[Vec<f64>], n: usize, label: &str) -> Result<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(FracError::Metric(format!("{label}: expected a {n}×{n} matrix")));
    }
    for i in 0..n {
        for j in 0..n {
            if !m[i][j].is_finite() {
                return Err(FracError::Metric(format!("{label}: entry ({i},{j}) is not finite")));
            }
            if (m[i][j] - m[j][i]).abs() > 1e-14 * (1.0 + m[i][j].abs()) {
                return Err(FracError::Metric(format!("{label}: matrix is not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

impl MetricJet {
    /// Build from Taylor coefficients of `h`. A `(0, 0)` entry, if present,
    /// must be the identity.
    pub fn new(
        n: usize,
        gamma: f64,
        order: usize,
        kind: JetKind,
        coefficients: Vec<((u32, Vec<u32>), Vec<Vec<f64>>)>,
    ) -> Result<Self> {
        Context::<f64>::new(n, gamma)?;
        let mut coeffs = BTreeMap::new();
        for (idx, ((j, beta), m)) in coefficients.into_iter().enumerate() {
            let label = format!("coefficients[{idx}]");
            if beta.len() != n {
                return Err(FracError::Metric(format!("{label}: beta must have length {n}")));
            }
            check_square(&m, n, &label)?;
            let deg = j as usize + beta.iter().map(|&b| b as usize).sum::<usize>();
            let mut m = m;
            if deg == 0 {
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] -= 1.0;
                }
                if m.iter().flatten().any(|v| v.abs() > 1e-14) {
                    return Err(FracError::Metric(format!(
                        "{label}: h at the origin must be the identity"
                    )));
                }
                continue;
            }
            if deg > order {
                return Err(FracError::Metric(format!(
                    "{label}: degree {deg} exceeds the declared order {order}"
                )));
            }
            if m.iter().flatten().all(|v| *v == 0.0) {
                continue;
            }
            if coeffs.insert((j, beta), m).is_some() {
                return Err(FracError::Metric(format!("{label}: duplicate (y_pow, beta) entry")));
            }
        }
        let jet = MetricJet {
            n,
            gamma,
            order,
            kind,
            coeffs,
            cache: OnceLock::new(),
        };
        jet.validate()?;
        Ok(jet)
    }

    pub fn flat(n: usize, gamma: f64, order: usize) -> Result<Self> {
        Self::new(n, gamma, order, JetKind::Flat, vec![])
    }

    /// `h_y = δ + y² S`.
    pub fn y2s(n: usize, gamma: f64, order: usize, s: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(n, gamma, order, JetKind::Jet, vec![((2, vec![0; n]), s)])
    }

    /// Random jet with `h − δ = O(y^n)`: every coefficient with `j ≥ n` and
    /// `j + |β| ≤ order` is a random symmetric matrix of size `scale`.
    pub fn pe_locally_flat_random(n: usize, gamma: f64, order: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = Vec::new();
        for deg in n..=order {
            for j in n..=deg {
                for beta in multi_indices((deg - j) as u32, n) {
                    let mut m = vec![vec![0.0; n]; n];
                    for a in 0..n {
                        for b in a..n {
                            let v = scale * (rng.random::<f64>() * 2.0 - 1.0);
                            m[a][b] = v;
                            m[b][a] = v;
                        }
                    }
                    coeffs.push(((j as u32, beta), m));
                }
            }
        }
        Self::new(n, gamma, order, JetKind::PeLocallyFlat, coeffs)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&(u32, Vec<u32>), &Vec<Vec<f64>>)> {
        self.coeffs.iter()
    }

    /// Same metric data with a different truncation order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|((j, b), _)| *j as usize + b.iter().map(|&v| v as usize).sum::<usize>() <= order)
            .map(|(k, m)| (k.clone(), m.clone()))
            .collect();
        Self::new(self.n, self.gamma, order, self.kind, coeffs)
    }

    /// Diagnostics; errors for non-minimal jets.
    pub fn validate(&self) -> Result<JetDiagnostics> {
        let n = self.n;
        let h1 = self.coeffs.get(&(1, vec![0; n]));
        if let Some(h1) = h1 {
            let tr: f64 = (0..n).map(|i| h1[i][i]).sum();
            if tr.abs() > 1e-12 {
                return Err(FracError::NonMinimal(tr));
            }
        }
        let ctx = Context::<f64>::new(n, self.gamma)?;
        let d = self.derived_generic::<f64>(&ctx);
        let layer0 = d.dlog_sqrt_det[0]
            .terms()
            .filter(|(k, _)| k.y_exp.is_zero())
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max);
        if layer0 > 1e-12 {
            return Err(FracError::NonMinimal(layer0));
        }
        let umbilic = h1.is_none();
        let pe_flat_order = self.coeffs.keys().map(|(j, _)| *j as usize).min().unwrap_or(self.order);
        let det_normalized = d
            .sqrt_det
            .terms()
            .filter(|(k, _)| k.y_exp.is_zero() && k.x_degree() > 0)
            .all(|(_, c)| c.abs() < 1e-12);
        Ok(JetDiagnostics {
            minimal: true,
            umbilic,
            pe_flat_order,
            det_normalized,
        })
    }

    /// Entries of `h` as polynomial atom sums.
    fn h_entries<S: Scalar>(&self, ctx: &Context<S>) -> Vec<Vec<AtomSum<S>>> {
        let n = self.n;
        let mut h = vec![vec![AtomSum::zero(ctx); n]; n];
        for ((j, beta), m) in &self.coeffs {
            for a in 0..n {
                for b in 0..n {
                    if m[a][b] != 0.0 {
                        let c = S::from_f64(m[a][b]).expect("finite coefficient");
                        h[a][b].add_term(
                            crate::AtomKey::new(LatticeExponent::int(*j as i64), beta.clone(), LatticeExponent::ZERO),
                            c,
                        );
                    }
                }
            }
        }
        h
    }

    /// Derived jets over an arbitrary coefficient field.
    pub fn derived_generic<S: Scalar>(&self, ctx: &Context<S>) -> DerivedJets<S> {
        let n = self.n;
        let nmax = LatticeExponent::int(self.order as i64);
        let tr = |u: &AtomSum<S>| u.truncate_above(nmax);
        let p = self.h_entries(ctx);
        let mut h = p.clone();
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = row[i].add(&AtomSum::constant(ctx, S::one()));
        }
        // (I + P)^{-1} − I = Σ_{k≥1} (−P)^k
        let mut term = p.iter().map(|r| r.iter().map(|v| v.neg()).collect::<Vec<_>>()).collect::<Vec<_>>();
        let mut inv = term.clone();
        for _ in 1..self.order {
            let mut next = vec![vec![AtomSum::zero(ctx); n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = AtomSum::zero(ctx);
                    for k in 0..n {
                        if term[i][k].is_zero() || p[k][j].is_zero() {
                            continue;
                        }
                        acc = acc.sub(&tr(&term[i][k].mul(&p[k][j])));
                    }
                    next[i][j] = acc;
                }
            }
            if next.iter().flatten().all(AtomSum::is_zero) {
                break;
            }
            for i in 0..n {
                for j in 0..n {
                    inv[i][j] = inv[i][j].add(&next[i][j]);
                }
            }
            term = next;
        }
        let det = truncated_det(&h, nmax);
        let q = det.sub(&AtomSum::constant(ctx, S::one()));
        // log √det = ½ Σ (−1)^{k+1} q^k / k ; √det = Σ binom(½, k) q^k
        let mut log_half = AtomSum::zero(ctx);
        let mut sqrt_det = AtomSum::constant(ctx, S::one());
        let mut qk = AtomSum::constant(ctx, S::one());
        let mut binom = S::one();
        for k in 1..=self.order.max(1) as i64 {
            qk = tr(&qk.mul(&q));
            if qk.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { S::one() } else { -S::one() };
            log_half = log_half.add(&qk.scale(&(sign * S::from_ratio(1, 2 * k))));
            binom = binom * (S::from_ratio(1, 2) - S::from_int(k - 1)) / S::from_int(k);
            sqrt_det = sqrt_det.add(&qk.scale(&binom));
        }
        let mut dlog = vec![log_half.differentiate(Direction::Y)];
        for i in 0..n {
            dlog.push(log_half.differentiate(Direction::X(i)));
        }
        let factor = (S::from_int(n as i64) - ctx.two_gamma().clone()) / S::from_int(2);
        let e = dlog[0].scale(&factor);
        DerivedJets {
            order: self.order,
            h,
            inverse_minus_delta: inv,
            sqrt_det,
            dlog_sqrt_det: dlog,
            e,
        }
    }

    /// Cached `f64` derived jets.
    pub fn derived(&self) -> &DerivedJets<f64> {
        self.cache.get_or_init(|| {
            let ctx = Context::<f64>::new(self.n, self.gamma).expect("validated at construction");
            self.derived_generic(&ctx)
        })
    }

    /// Rescaled jet for `ĝ = c² g` in coordinates `ẑ = c z`.
    pub fn conformal_rescale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(FracError::config("c", "a positive finite factor", c));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|((j, beta), m)| {
                let deg = *j as i32 + beta.iter().map(|&b| b as i32).sum::<i32>();
                let f = c.powi(-deg);
                ((*j, beta.clone()), m.iter().map(|r| r.iter().map(|v| v * f).collect()).collect())
            })
            .collect();
        Self::new(self.n, self.gamma, self.order, self.kind, coeffs)
    }

    /// Point value of `h_y(x)`.
    pub fn h_at(&self, y: f64, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for ((j, beta), m) in &self.coeffs {
            let mono = y.powi(*j as i32) * x.iter().zip(beta).map(|(v, b)| v.powi(*b as i32)).product::<f64>();
            for a in 0..n {
                for b in 0..n {
                    h[a][b] += m[a][b] * mono;
                }
            }
        }
        h
    }

    /// Point value of `∂_y h_y(x)`.
    pub fn dy_h_at(&self, y: f64, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut h = vec![vec![0.0; n]; n];
        for ((j, beta), m) in &self.coeffs {
            if *j == 0 {
                continue;
            }
            let mono = *j as f64
                * y.powi(*j as i32 - 1)
                * x.iter().zip(beta).map(|(v, b)| v.powi(*b as i32)).product::<f64>();
            for a in 0..n {
                for b in 0..n {
                    h[a][b] += m[a][b] * mono;
                }
            }
        }
        h
    }

    pub fn to_json(&self) -> Value {
        let coefficients: Vec<Value> = self
            .coeffs
            .iter()
            .map(|((j, beta), m)| json!({ "y_pow": j, "beta": beta, "matrix": m }))
            .collect();
        json!({
            "n": self.n,
            "gamma": self.gamma,
            "order": self.order,
            "type": self.kind,
            "coefficients": coefficients,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let get = |f: &str| v.get(f).cloned().unwrap_or(Value::Null);
        let n = get("n")
            .as_u64()
            .filter(|&n| n >= 1)
            .ok_or_else(|| FracError::config("n", "a positive integer", get("n")))? as usize;
        let gamma = get("gamma")
            .as_f64()
            .ok_or_else(|| FracError::config("gamma", "a number in (0,1)", get("gamma")))?;
        let order = get("order")
            .as_u64()
            .ok_or_else(|| FracError::config("order", "a non-negative integer", get("order")))? as usize;
        let kind: JetKind = serde_json::from_value(get("type"))
            .map_err(|_| FracError::config("type", "\"flat\", \"jet\" or \"pe_locally_flat\"", get("type")))?;
        let mut coeffs = Vec::new();
        let list = match get("coefficients") {
            Value::Null => vec![],
            Value::Array(a) => a,
            other => return Err(FracError::config("coefficients", "an array", other)),
        };
        for (i, c) in list.iter().enumerate() {
            let f = |s: &str| format!("coefficients[{i}].{s}");
            let j = c
                .get("y_pow")
                .and_then(Value::as_u64)
                .ok_or_else(|| FracError::config(f("y_pow"), "a non-negative integer", c.get("y_pow").unwrap_or(&Value::Null)))?;
            let beta: Vec<u32> = serde_json::from_value(c.get("beta").cloned().unwrap_or(Value::Null))
                .map_err(|e| FracError::config(f("beta"), "an array of non-negative integers", e))?;
            if beta.len() != n {
                return Err(FracError::config(f("beta"), format!("length {n}"), beta.len()));
            }
            let m: Vec<Vec<f64>> = serde_json::from_value(c.get("matrix").cloned().unwrap_or(Value::Null))
                .map_err(|e| FracError::config(f("matrix"), format!("a {n}×{n} array of numbers"), e))?;
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(FracError::config(f("matrix"), format!("a {n}×{n} array of numbers"), json!(m)));
            }
            coeffs.push(((j as u32, beta), m));
        }
        if kind == JetKind::Flat && !coeffs.is_empty() {
            return Err(FracError::config("coefficients", "an empty list for a flat metric", coeffs.len()));
        }
        let jet = Self::new(n, gamma, order, kind, coeffs)?;
        if kind == JetKind::PeLocallyFlat {
            let d = jet.validate()?;
            if d.pe_flat_order < n {
                return Err(FracError::config(
                    "coefficients",
                    format!("h − δ = O(y^{n}) for a pe_locally_flat metric"),
                    format!("a term of order y^{}", d.pe_flat_order),
                ));
            }
        }
        Ok(jet)
    }
}

fn truncated_det<S: Scalar>(m: &[Vec<AtomSum<S>>], nmax: LatticeExponent) -> AtomSum<S> {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let ctx = m[0][0].ctx().clone();
    let mut acc = AtomSum::zero(&ctx);
    for col in 0..n {
        if m[0][col].is_zero() {
            continue;
        }
        let minor: Vec<Vec<AtomSum<S>>> = m[1..]
            .iter()
            .map(|r| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| v.clone()).collect())
            .collect();
        let term = m[0][col].mul(&truncated_det(&minor, nmax)).truncate_above(nmax);
        acc = if col % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// `(D − D_g) u`, the perturbation of the flat operator by the metric.
///
/// For every graded piece of `u` of degree `δ`, metric factors are kept up to
/// the polynomial degree that lands at or below `max_out`; with `None` the
/// full jet order is used.
pub fn deficit_apply<S: Scalar>(
    jet: &MetricJet,
    u: &AtomSum<S>,
    max_out: Option<LatticeExponent>,
) -> Result<AtomSum<S>> {
    let ctx = u.ctx().clone();
    if ctx.n() != jet.n || (ctx.gamma_f64() - jet.gamma).abs() > 1e-15 {
        return Err(FracError::Precondition("jet and atom sum have different (n, γ)".into()));
    }
    let d = jet.derived_generic(&ctx);
    deficit_apply_with(&d, u, max_out)
}

/// As [`deficit_apply`], with precomputed derived jets.
pub fn deficit_apply_with<S: Scalar>(
    d: &DerivedJets<S>,
    u: &AtomSum<S>,
    max_out: Option<LatticeExponent>,
) -> Result<AtomSum<S>> {
    let ctx = u.ctx().clone();
    let n = ctx.n();
    let w = LatticeExponent::new(1, -1);
    let mut out = AtomSum::zero(&ctx);
    for (delta, piece) in u.homogeneity_grading() {
        let k_max = match max_out {
            None => d.order as i64,
            Some(h) => {
                let diff = h - (delta - LatticeExponent::new(1, 1));
                if !diff.is_integer() {
                    return Err(FracError::Precondition(format!(
                        "requested degree {h} is not in the coset of the deficit of degree {delta}"
                    )));
                }
                if diff.integer_part > d.order as i64 {
                    return Err(FracError::Precondition(format!(
                        "truncation at degree {h} needs metric order {}, the jet has order {}",
                        diff.integer_part, d.order
                    )));
                }
                diff.integer_part
            }
        };
        if k_max < 1 {
            continue;
        }
        let t_k = LatticeExponent::int(k_max);
        let t_k1 = LatticeExponent::int(k_max - 1);
        let du: Vec<AtomSum<S>> = std::iter::once(Direction::Y)
            .chain((0..n).map(Direction::X))
            .map(|dir| piece.differentiate(dir))
            .collect();
        // (∂_y log√g) y^{1−2γ} ∂_y u
        let a_y = d.dlog_sqrt_det[0].truncate_above(t_k1);
        out = out.add(&a_y.mul(&du[0]).mul_y(w));
        // Σ_i (Σ_j ∂_j log√g · g^{ji}) y^{1−2γ} ∂_i u
        for i in 0..n {
            let mut coef = d.dlog_sqrt_det[1 + i].clone();
            for j in 0..n {
                coef = coef.add(&d.dlog_sqrt_det[1 + j].mul(&d.inverse_minus_delta[j][i]).truncate_above(t_k1));
            }
            let coef = coef.truncate_above(t_k1);
            if !coef.is_zero() {
                out = out.add(&coef.mul(&du[1 + i]).mul_y(w));
            }
        }
        // y^{1−2γ} ∂_i((g^{ij} − δ^{ij}) ∂_j u)
        for i in 0..n {
            let mut inner = AtomSum::zero(&ctx);
            for j in 0..n {
                let gij = d.inverse_minus_delta[i][j].truncate_above(t_k);
                if !gij.is_zero() {
                    inner = inner.add(&gij.mul(&du[1 + j]));
                }
            }
            if !inner.is_zero() {
                out = out.add(&inner.differentiate(Direction::X(i)).mul_y(w));
            }
        }
        // − e y^{−2γ} u
        let e = d.e.truncate_above(t_k1);
        if !e.is_zero() {
            out = out.sub(&e.mul(&piece).mul_y(LatticeExponent::new(0, -1)));
        }
    }
    Ok(match max_out {
        Some(h) => out.truncate_above(h),
        None => out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s_iso(n: usize, s: f64) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for (i, r) in m.iter_mut().enumerate() {
            r[i] = s;
        }
        m
    }

    #[test]
    fn flat_diagnostics() {
        let j = MetricJet::flat(2, 0.3, 4).unwrap();
        let d = j.validate().unwrap();
        assert_eq!(
            d,
            JetDiagnostics {
                minimal: true,
                umbilic: true,
                pe_flat_order: 4,
                det_normalized: true
            }
        );
        assert!(j.derived().e.is_zero());
    }

    #[test]
    fn y2s_diagnostics_and_e() {
        let j = MetricJet::y2s(2, 0.25, 4, vec![vec![0.3, 0.1], vec![0.1, -0.2]]).unwrap();
        let d = j.validate().unwrap();
        assert_eq!(d.pe_flat_order, 2);
        assert!(d.minimal);
        // leading e = ((n−2γ)/2)·trace(S)·y
        let e = &j.derived().e;
        let lead = e
            .coeff(&crate::AtomKey::new(LatticeExponent::int(1), vec![0, 0], LatticeExponent::ZERO))
            .copied()
            .unwrap();
        assert!((lead - 0.75 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn trace_first_order_is_rejected() {
        let r = MetricJet::new(1, 0.3, 3, JetKind::Jet, vec![((1, vec![0]), vec![vec![0.5]])]);
        assert!(matches!(r, Err(FracError::NonMinimal(_))));
    }

    #[test]
    fn unimodular_family_has_no_e() {
        let a = vec![vec![0.4, 0.0], vec![0.0, -0.4]];
        let j = MetricJet::new(2, 0.3, 5, JetKind::Jet, vec![((2, vec![0, 0]), a)]).unwrap();
        // det(I + y²A) = 1 − 0.16 y⁴, so e starts at y³
        let e = &j.derived().e;
        assert!(e.terms().all(|(k, _)| k.y_exp.integer_part >= 3));
        let iso = MetricJet::y2s(2, 0.3, 5, s_iso(2, 0.0)).unwrap();
        assert!(iso.derived().e.is_zero());
    }

    #[test]
    fn e_matches_finite_differences_of_det() {
        let j = MetricJet::new(
            2,
            0.3,
            8,
            JetKind::Jet,
            vec![
                ((2, vec![0, 0]), vec![vec![0.2, 0.05], vec![0.05, -0.1]]),
                ((2, vec![1, 0]), vec![vec![0.1, 0.0], vec![0.0, 0.3]]),
                ((3, vec![0, 0]), vec![vec![0.0, 0.2], vec![0.2, 0.1]]),
            ],
        )
        .unwrap();
        let e = &j.derived().e;
        let sqrt_det = |y: f64, x: &[f64]| {
            let h = j.h_at(y, x);
            (h[0][0] * h[1][1] - h[0][1] * h[1][0]).sqrt()
        };
        let (y, x) = (0.08, [0.05, -0.03]);
        let step = 1e-4;
        let fd = (sqrt_det(y + step, &x) - sqrt_det(y - step, &x)) / (2.0 * step) / sqrt_det(y, &x) * (2.0 - 0.6) / 2.0;
        let jetv = e.evaluate(y, &x).unwrap();
        assert!((fd - jetv).abs() < 1e-7, "{fd} {jetv}");
    }

    #[test]
    fn flat_deficit_vanishes() {
        let j = MetricJet::flat(2, 0.3, 4).unwrap();
        let ctx = Context::new(2, 0.3).unwrap();
        let k = AtomSum::monomial(&ctx, 1.0, LatticeExponent::TWO_GAMMA, vec![0, 0], LatticeExponent::new(-2, -1));
        assert!(deficit_apply(&j, &k, None).unwrap().is_zero());
    }

    #[test]
    fn y2s_poisson_deficit_leading_atom() {
        // coefficient of y|z|^{−n−2γ} in (D − D_g)K is trace(S)·(2γ − (n−2γ)/2)
        let (n, g) = (2, 0.25);
        let s = vec![vec![0.3, 0.1], vec![0.1, -0.7]];
        let tr = -0.4;
        let j = MetricJet::y2s(n, g, 4, s).unwrap();
        let ctx = Context::new(n, g).unwrap();
        let t = LatticeExponent::new(-2, -1);
        let k = AtomSum::monomial(&ctx, 1.0, LatticeExponent::TWO_GAMMA, vec![0, 0], t);
        let b = deficit_apply(&j, &k, Some(LatticeExponent::new(-1, -1))).unwrap();
        assert_eq!(b.homogeneity(), Some(LatticeExponent::new(-1, -1)));
        let c = *b
            .coeff(&crate::AtomKey::new(LatticeExponent::int(1), vec![0, 0], t))
            .unwrap();
        let expected = tr * (2.0 * g - (n as f64 - 2.0 * g) / 2.0);
        assert!((c - expected).abs() < 1e-14, "{c} {expected}");
    }

    #[test]
    fn json_round_trip() {
        let j = MetricJet::pe_locally_flat_random(2, 0.3, 4, 0.1, 7).unwrap();
        let back = MetricJet::from_json(&j.to_json()).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn rescale_preserves_diagnostics() {
        let j = MetricJet::pe_locally_flat_random(3, 0.3, 4, 0.1, 3).unwrap();
        let r = j.conformal_rescale(1.7).unwrap();
        assert_eq!(j.validate().unwrap(), r.validate().unwrap());
        let f = MetricJet::flat(2, 0.3, 3).unwrap();
        assert_eq!(f.conformal_rescale(2.0).unwrap(), f);
    }
}
