//! Graded homogeneous terms `c·y^a·x^β·|z|^t` on the punctured half-space.
//!
//! Exponents live on the lattice ℤ + 2γℤ and are compared structurally, so
//! term merging never depends on floating point. Sums are kept in a canonical
//! form that is unique as a function:
//!
//! * a factor `|z|^{2k}` with `k ∈ ℕ₀` is expanded into `(y² + |x|²)^k`, so
//!   every atom with an even non-negative integer `|z|` power is a plain
//!   polynomial atom (`r = 0`);
//! * every other atom carries `x_n` to at most the first power, using
//!   `x_n² = |z|² − y² − Σ_{i<n} x_i²`.
//!
//! Both rules leave the `y` exponent coset untouched.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{FracError, Result};
use crate::scalar::Scalar;

/// Exponent `int + 2γ·g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeExponent {
    #[serde(rename = "int")]
    pub integer_part: i64,
    #[serde(rename = "g")]
    pub gamma_multiple: i64,
}

impl LatticeExponent {
    pub const ZERO: LatticeExponent = LatticeExponent::new(0, 0);
    pub const TWO_GAMMA: LatticeExponent = LatticeExponent::new(0, 1);

    pub const fn new(integer_part: i64, gamma_multiple: i64) -> Self {
        LatticeExponent {
            integer_part,
            gamma_multiple,
        }
    }

    pub const fn int(v: i64) -> Self {
        LatticeExponent::new(v, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.integer_part == 0 && self.gamma_multiple == 0
    }

    pub fn is_integer(&self) -> bool {
        self.gamma_multiple == 0
    }

    pub fn value(&self, gamma: f64) -> f64 {
        self.integer_part as f64 + 2.0 * gamma * self.gamma_multiple as f64
    }

    pub fn value_in<S: Scalar>(&self, two_gamma: &S) -> S {
        let mut v = S::from_int(self.integer_part);
        if self.gamma_multiple != 0 {
            v = v + two_gamma.clone() * S::from_int(self.gamma_multiple);
        }
        v
    }

    /// Ordering by value. Pairs that differ structurally but agree in value
    /// to 1e-12 compare equal.
    pub fn cmp_value(&self, other: &Self, gamma: f64) -> std::cmp::Ordering {
        if self == other {
            return std::cmp::Ordering::Equal;
        }
        let d = (*self - *other).value(gamma);
        if d.abs() <= 1e-12 {
            std::cmp::Ordering::Equal
        } else if d < 0.0 {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    }
}

impl Add for LatticeExponent {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        LatticeExponent::new(self.integer_part + o.integer_part, self.gamma_multiple + o.gamma_multiple)
    }
}

impl Sub for LatticeExponent {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        LatticeExponent::new(self.integer_part - o.integer_part, self.gamma_multiple - o.gamma_multiple)
    }
}

impl Neg for LatticeExponent {
    type Output = Self;
    fn neg(self) -> Self {
        LatticeExponent::new(-self.integer_part, -self.gamma_multiple)
    }
}

impl fmt::Display for LatticeExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.integer_part, self.gamma_multiple) {
            (i, 0) => write!(f, "{i}"),
            (0, 1) => write!(f, "2γ"),
            (0, -1) => write!(f, "-2γ"),
            (0, g) => write!(f, "{g}·2γ"),
            (i, 1) => write!(f, "{i}+2γ"),
            (i, -1) => write!(f, "{i}-2γ"),
            (i, g) if g > 0 => write!(f, "{i}+{g}·2γ"),
            (i, g) => write!(f, "{i}-{}·2γ", -g),
        }
    }
}

/// The parameters every atom sum carries: boundary dimension and γ.
#[derive(Clone, Debug, PartialEq)]
pub struct Context<S = f64> {
    n: usize,
    gamma: S,
    two_gamma: S,
    gamma_f64: f64,
}

impl<S: Scalar> Context<S> {
    pub fn new(n: usize, gamma: S) -> Result<Self> {
        if n == 0 {
            return Err(FracError::config("n", "a positive dimension", n));
        }
        let g = gamma.to_f64();
        if !(g > 0.0 && g < 1.0) {
            return Err(FracError::config("gamma", "a value in (0,1)", g));
        }
        if (gamma.clone() * S::from_int(2) - S::one()).is_zero() {
            return Err(FracError::GammaHalf);
        }
        let two_gamma = gamma.clone() * S::from_int(2);
        Ok(Context {
            n,
            gamma,
            two_gamma,
            gamma_f64: g,
        })
    }

    pub fn from_ratio(n: usize, p: i64, q: i64) -> Result<Self> {
        Self::new(n, S::from_ratio(p, q))
    }

    pub fn from_f64(n: usize, gamma: f64) -> Result<Self> {
        let g = S::from_f64(gamma).ok_or_else(|| FracError::config("gamma", "a finite number", gamma))?;
        Self::new(n, g)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn gamma(&self) -> &S {
        &self.gamma
    }
    pub fn two_gamma(&self) -> &S {
        &self.two_gamma
    }
    pub fn gamma_f64(&self) -> f64 {
        self.gamma_f64
    }
    pub fn value(&self, e: LatticeExponent) -> S {
        e.value_in(&self.two_gamma)
    }

    /// The same parameters over the `f64` field.
    pub fn to_f64(&self) -> Context<f64> {
        Context {
            n: self.n,
            gamma: self.gamma_f64,
            two_gamma: 2.0 * self.gamma_f64,
            gamma_f64: self.gamma_f64,
        }
    }
}

/// Monomial part of an atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomKey {
    pub y_exp: LatticeExponent,
    pub x_multi: Vec<u32>,
    pub r_exp: LatticeExponent,
}

impl AtomKey {
    pub fn new(y_exp: LatticeExponent, x_multi: Vec<u32>, r_exp: LatticeExponent) -> Self {
        AtomKey { y_exp, x_multi, r_exp }
    }

    pub fn x_degree(&self) -> i64 {
        self.x_multi.iter().map(|&b| b as i64).sum()
    }

    pub fn homogeneity(&self) -> LatticeExponent {
        self.y_exp + LatticeExponent::int(self.x_degree()) + self.r_exp
    }

    fn r_is_polynomial(&self) -> bool {
        self.r_exp.is_integer() && self.r_exp.integer_part >= 0 && self.r_exp.integer_part % 2 == 0
    }
}

/// A single term `coeff·y^a·x^β·|z|^t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedAtom<S = f64> {
    pub coeff: S,
    pub y_exp: LatticeExponent,
    pub x_multi: Vec<u32>,
    pub r_exp: LatticeExponent,
}

impl<S: Scalar> GradedAtom<S> {
    pub fn homogeneity(&self) -> LatticeExponent {
        self.key().homogeneity()
    }
    pub fn key(&self) -> AtomKey {
        AtomKey::new(self.y_exp, self.x_multi.clone(), self.r_exp)
    }
}

/// Differentiation direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Y,
    X(usize),
}

/// Finite sum of atoms in canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSum<S = f64> {
    ctx: Context<S>,
    terms: BTreeMap<AtomKey, S>,
}

impl<S: Scalar> AtomSum<S> {
    pub fn zero(ctx: &Context<S>) -> Self {
        AtomSum {
            ctx: ctx.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ctx: &Context<S>, c: S) -> Self {
        Self::monomial(ctx, c, LatticeExponent::ZERO, vec![0; ctx.n], LatticeExponent::ZERO)
    }

    pub fn monomial(
        ctx: &Context<S>,
        coeff: S,
        y_exp: LatticeExponent,
        x_multi: Vec<u32>,
        r_exp: LatticeExponent,
    ) -> Self {
        assert_eq!(x_multi.len(), ctx.n, "multi-index length must equal n");
        let mut s = Self::zero(ctx);
        s.add_term(AtomKey::new(y_exp, x_multi, r_exp), coeff);
        s
    }

    pub fn from_atoms(ctx: &Context<S>, atoms: impl IntoIterator<Item = GradedAtom<S>>) -> Self {
        let mut s = Self::zero(ctx);
        for a in atoms {
            assert_eq!(a.x_multi.len(), ctx.n, "multi-index length must equal n");
            s.add_term(AtomKey::new(a.y_exp, a.x_multi, a.r_exp), a.coeff);
        }
        s
    }

    pub fn ctx(&self) -> &Context<S> {
        &self.ctx
    }
    pub fn n(&self) -> usize {
        self.ctx.n
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&AtomKey, &S)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &AtomKey) -> Option<&S> {
        self.terms.get(key)
    }

    pub fn atoms(&self) -> Vec<GradedAtom<S>> {
        self.terms
            .iter()
            .map(|(k, c)| GradedAtom {
                coeff: c.clone(),
                y_exp: k.y_exp,
                x_multi: k.x_multi.clone(),
                r_exp: k.r_exp,
            })
            .collect()
    }

    /// Insert a term, restoring canonical form.
    pub fn add_term(&mut self, key: AtomKey, coeff: S) {
        let n = self.ctx.n;
        let mut stack = vec![(key, coeff)];
        while let Some((k, c)) = stack.pop() {
            if c.is_zero() {
                continue;
            }
            if k.r_is_polynomial() && !k.r_exp.is_zero() {
                let m = (k.r_exp.integer_part / 2) as u32;
                for_each_composition(m, n + 1, &mut |parts| {
                    let mult = multinomial(m, parts);
                    let mut beta = k.x_multi.clone();
                    for i in 0..n {
                        beta[i] += 2 * parts[i + 1];
                    }
                    let y = k.y_exp + LatticeExponent::int(2 * parts[0] as i64);
                    stack.push((
                        AtomKey::new(y, beta, LatticeExponent::ZERO),
                        c.clone() * S::from_int(mult),
                    ));
                });
                continue;
            }
            if !k.r_exp.is_zero() && k.x_multi[n - 1] >= 2 {
                let mut base = k.x_multi.clone();
                base[n - 1] -= 2;
                stack.push((
                    AtomKey::new(k.y_exp, base.clone(), k.r_exp + LatticeExponent::int(2)),
                    c.clone(),
                ));
                stack.push((
                    AtomKey::new(k.y_exp + LatticeExponent::int(2), base.clone(), k.r_exp),
                    -c.clone(),
                ));
                for i in 0..n - 1 {
                    let mut b = base.clone();
                    b[i] += 2;
                    stack.push((AtomKey::new(k.y_exp, b, k.r_exp), -c.clone()));
                }
                continue;
            }
            match self.terms.get_mut(&k) {
                Some(v) => {
                    let s = v.clone() + c;
                    if s.is_zero() {
                        self.terms.remove(&k);
                    } else {
                        *v = s;
                    }
                }
                None => {
                    self.terms.insert(k, c);
                }
            }
        }
    }

    fn check_ctx(&self, other: &Self) {
        assert_eq!(self.ctx, other.ctx, "atom sums with different (n, γ) cannot be combined");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_ctx(other);
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| -c.clone())
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zero(&self.ctx);
        }
        self.map_coeffs(|c| c.clone() * s.clone())
    }

    fn map_coeffs(&self, f: impl Fn(&S) -> S) -> Self {
        let mut out = Self::zero(&self.ctx);
        for (k, c) in &self.terms {
            let v = f(c);
            if !v.is_zero() {
                out.terms.insert(k.clone(), v);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_ctx(other);
        let mut out = Self::zero(&self.ctx);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                let beta = k1.x_multi.iter().zip(&k2.x_multi).map(|(a, b)| a + b).collect();
                out.add_term(
                    AtomKey::new(k1.y_exp + k2.y_exp, beta, k1.r_exp + k2.r_exp),
                    c1.clone() * c2.clone(),
                );
            }
        }
        out
    }

    /// Multiply by `y^e`.
    pub fn mul_y(&self, e: LatticeExponent) -> Self {
        let mut out = Self::zero(&self.ctx);
        for (k, c) in &self.terms {
            out.terms
                .insert(AtomKey::new(k.y_exp + e, k.x_multi.clone(), k.r_exp), c.clone());
        }
        out
    }

    /// Multiply by `|z|^e`.
    pub fn mul_r(&self, e: LatticeExponent) -> Self {
        let mut out = Self::zero(&self.ctx);
        for (k, c) in &self.terms {
            out.add_term(AtomKey::new(k.y_exp, k.x_multi.clone(), k.r_exp + e), c.clone());
        }
        out
    }

    pub fn differentiate(&self, dir: Direction) -> Self {
        let mut out = Self::zero(&self.ctx);
        let two = LatticeExponent::int(2);
        for (k, c) in &self.terms {
            let t = self.ctx.value(k.r_exp);
            match dir {
                Direction::Y => {
                    if !k.y_exp.is_zero() {
                        let a = self.ctx.value(k.y_exp);
                        out.add_term(
                            AtomKey::new(k.y_exp - LatticeExponent::int(1), k.x_multi.clone(), k.r_exp),
                            c.clone() * a,
                        );
                    }
                    if !k.r_exp.is_zero() {
                        out.add_term(
                            AtomKey::new(k.y_exp + LatticeExponent::int(1), k.x_multi.clone(), k.r_exp - two),
                            c.clone() * t,
                        );
                    }
                }
                Direction::X(i) => {
                    assert!(i < self.ctx.n, "direction x_{i} out of range");
                    if k.x_multi[i] > 0 {
                        let mut b = k.x_multi.clone();
                        b[i] -= 1;
                        out.add_term(
                            AtomKey::new(k.y_exp, b, k.r_exp),
                            c.clone() * S::from_int(k.x_multi[i] as i64),
                        );
                    }
                    if !k.r_exp.is_zero() {
                        let mut b = k.x_multi.clone();
                        b[i] += 1;
                        out.add_term(AtomKey::new(k.y_exp, b, k.r_exp - two), c.clone() * t);
                    }
                }
            }
        }
        out
    }

    /// The flat operator `D = −∂_y(y^{1−2γ}∂_y) − y^{1−2γ}Δ_x`, atom by atom.
    pub fn apply_flat_d(&self) -> Self {
        let ctx = &self.ctx;
        let n = ctx.n;
        let mut out = Self::zero(ctx);
        let one = LatticeExponent::int(1);
        let two = LatticeExponent::int(2);
        let tg = LatticeExponent::TWO_GAMMA;
        for (k, c) in &self.terms {
            let a_l = k.y_exp;
            let t_l = k.r_exp;
            let a = ctx.value(a_l);
            let t = ctx.value(t_l);
            let beta = &k.x_multi;
            let minus_c = -c.clone();
            // y-part of −D
            if !a_l.is_zero() && !(a_l - tg).is_zero() {
                out.add_term(
                    AtomKey::new(a_l - tg - one, beta.clone(), t_l),
                    minus_c.clone() * a.clone() * (a.clone() - ctx.two_gamma.clone()),
                );
            }
            if !t_l.is_zero() {
                let bdeg: i64 = beta.iter().map(|&b| b as i64).sum();
                // a·t + t(a+2−2γ) from the y-part, (2|β|+n)·t from the x-part
                let coeff_mid = t.clone()
                    * (a.clone() + a.clone() + S::from_int(2) - ctx.two_gamma.clone()
                        + S::from_int(2 * bdeg + n as i64));
                out.add_term(
                    AtomKey::new(a_l + one - tg, beta.clone(), t_l - two),
                    minus_c.clone() * coeff_mid,
                );
                if !(t_l - two).is_zero() {
                    let tt = t.clone() * (t.clone() - S::from_int(2));
                    out.add_term(
                        AtomKey::new(a_l + LatticeExponent::int(3) - tg, beta.clone(), t_l - two - two),
                        minus_c.clone() * tt.clone(),
                    );
                    for i in 0..n {
                        let mut b = beta.clone();
                        b[i] += 2;
                        out.add_term(
                            AtomKey::new(a_l + one - tg, b, t_l - two - two),
                            minus_c.clone() * tt.clone(),
                        );
                    }
                }
            }
            for i in 0..n {
                if beta[i] >= 2 {
                    let mut b = beta.clone();
                    b[i] -= 2;
                    let f = S::from_int(beta[i] as i64 * (beta[i] as i64 - 1));
                    out.add_term(AtomKey::new(a_l + one - tg, b, t_l), minus_c.clone() * f);
                }
            }
        }
        out
    }

    /// Split into homogeneous pieces keyed by total degree.
    pub fn homogeneity_grading(&self) -> BTreeMap<LatticeExponent, AtomSum<S>> {
        let mut map: BTreeMap<LatticeExponent, AtomSum<S>> = BTreeMap::new();
        for (k, c) in &self.terms {
            map.entry(k.homogeneity())
                .or_insert_with(|| Self::zero(&self.ctx))
                .terms
                .insert(k.clone(), c.clone());
        }
        map
    }

    /// Homogeneous pieces sorted by increasing degree value.
    pub fn grades_ascending(&self) -> Vec<(LatticeExponent, AtomSum<S>)> {
        let g = self.ctx.gamma_f64;
        let mut v: Vec<_> = self.homogeneity_grading().into_iter().collect();
        v.sort_by(|a, b| a.0.cmp_value(&b.0, g).then(a.0.cmp(&b.0)));
        v
    }

    /// Degree of a homogeneous sum; `None` for zero or mixed sums.
    pub fn homogeneity(&self) -> Option<LatticeExponent> {
        let mut it = self.terms.keys().map(AtomKey::homogeneity);
        let first = it.next()?;
        it.all(|h| h == first).then_some(first)
    }

    /// Keep only the pieces whose degree value is at most `max`.
    pub fn truncate_above(&self, max: LatticeExponent) -> Self {
        let g = self.ctx.gamma_f64;
        let mut out = Self::zero(&self.ctx);
        for (k, c) in &self.terms {
            if k.homogeneity().cmp_value(&max, g) != std::cmp::Ordering::Greater {
                out.terms.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// Keep only the atoms with `y` exponent zero and set `y = 0`.
    pub fn boundary_restriction(&self) -> Result<Self> {
        let g = self.ctx.gamma_f64;
        let mut out = Self::zero(&self.ctx);
        for (k, c) in &self.terms {
            if k.y_exp.is_zero() {
                out.terms.insert(k.clone(), c.clone());
            } else if k.y_exp.value(g) < 0.0 {
                return Err(FracError::Evaluation(format!(
                    "atom with y exponent {} has no boundary value",
                    k.y_exp
                )));
            }
        }
        Ok(out)
    }

    pub fn coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.to_f64().powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.to_f64().abs()).fold(0.0, f64::max)
    }

    /// Evaluate at `(y, x)`.
    pub fn evaluate(&self, y: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.ctx.n {
            return Err(FracError::Evaluation(format!(
                "point has {} x-coordinates, expected {}",
                x.len(),
                self.ctx.n
            )));
        }
        if y < 0.0 {
            return Err(FracError::Evaluation(format!("y = {y} is outside the half-space")));
        }
        let g = self.ctx.gamma_f64;
        let r = (y * y + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let mut total = 0.0;
        for (k, c) in &self.terms {
            let a = k.y_exp.value(g);
            let ypow = if k.y_exp.is_zero() {
                1.0
            } else if y == 0.0 {
                if a < 0.0 {
                    return Err(FracError::Evaluation(format!(
                        "negative y power {} at y = 0",
                        k.y_exp
                    )));
                }
                0.0
            } else {
                y.powf(a)
            };
            let t = k.r_exp.value(g);
            let rpow = if k.r_exp.is_zero() {
                1.0
            } else if r == 0.0 {
                if t < 0.0 {
                    return Err(FracError::Evaluation("singular sum evaluated at the origin".into()));
                }
                0.0
            } else {
                r.powf(t)
            };
            let mut xm = 1.0;
            for (xi, &b) in x.iter().zip(&k.x_multi) {
                xm *= xi.powi(b as i32);
            }
            total += c.to_f64() * ypow * xm * rpow;
        }
        Ok(total)
    }

    /// The same sum with coefficients converted to `f64`.
    pub fn to_f64(&self) -> AtomSum<f64> {
        let ctx = self.ctx.to_f64();
        let mut out = AtomSum::zero(&ctx);
        for (k, c) in &self.terms {
            let v = c.to_f64();
            if v != 0.0 {
                out.terms.insert(k.clone(), v);
            }
        }
        out
    }

    /// Drop coefficients below `rel · max|coeff|`.
    pub fn prune(&self, rel: f64) -> Self {
        let cut = rel * self.max_abs_coeff();
        let mut out = Self::zero(&self.ctx);
        for (k, c) in &self.terms {
            if c.to_f64().abs() > cut {
                out.terms.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// True if every coefficient is zero (exact fields) or below
    /// `rel_tol · scale` (floating point).
    pub fn is_negligible(&self, rel_tol: f64, scale: f64) -> bool {
        if S::EXACT {
            self.is_zero()
        } else {
            self.coeff_norm() <= rel_tol * scale
        }
    }

    pub fn to_json(&self) -> Value {
        let atoms: Vec<Value> = self
            .terms
            .iter()
            .map(|(k, c)| {
                json!({
                    "coeff": c.to_json(),
                    "y": k.y_exp,
                    "beta": k.x_multi,
                    "r": k.r_exp,
                })
            })
            .collect();
        json!({ "n": self.ctx.n, "gamma": self.ctx.gamma.to_json(), "atoms": atoms })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |field: &str, expected: &str, got: &Value| FracError::config(field, expected, got);
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("n", "a positive integer", v.get("n").unwrap_or(&Value::Null)))?
            as usize;
        let gamma = S::from_json(v.get("gamma").unwrap_or(&Value::Null))
            .map_err(|e| FracError::config("gamma", "a number in (0,1)", e))?;
        let ctx = Context::new(n, gamma)?;
        let atoms = v
            .get("atoms")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("atoms", "an array", v.get("atoms").unwrap_or(&Value::Null)))?;
        let mut out = Self::zero(&ctx);
        for (i, a) in atoms.iter().enumerate() {
            let field = |f: &str| format!("atoms[{i}].{f}");
            let coeff = S::from_json(a.get("coeff").unwrap_or(&Value::Null))
                .map_err(|e| FracError::config(field("coeff"), "a coefficient", e))?;
            let y: LatticeExponent = serde_json::from_value(a.get("y").cloned().unwrap_or(Value::Null))
                .map_err(|e| FracError::config(field("y"), "{int, g}", e))?;
            let r: LatticeExponent = serde_json::from_value(a.get("r").cloned().unwrap_or(Value::Null))
                .map_err(|e| FracError::config(field("r"), "{int, g}", e))?;
            let beta: Vec<u32> = serde_json::from_value(a.get("beta").cloned().unwrap_or(Value::Null))
                .map_err(|e| FracError::config(field("beta"), "an array of non-negative integers", e))?;
            if beta.len() != n {
                return Err(FracError::config(field("beta"), format!("length {n}"), beta.len()));
            }
            out.add_term(AtomKey::new(y, beta, r), coeff);
        }
        Ok(out)
    }
}

impl<S: Scalar> Serialize for AtomSum<S> {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for AtomSum<S> {
    fn deserialize<De: serde::Deserializer<'de>>(d: De) -> std::result::Result<Self, De::Error> {
        let v = Value::deserialize(d)?;
        AtomSum::from_json(&v).map_err(serde::de::Error::custom)
    }
}

impl<S: Scalar> fmt::Display for AtomSum<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{:?}", c)?;
            if !k.y_exp.is_zero() {
                write!(f, "·y^({})", k.y_exp)?;
            }
            for (j, b) in k.x_multi.iter().enumerate() {
                if *b > 0 {
                    write!(f, "·x{}^{}", j + 1, b)?;
                }
            }
            if !k.r_exp.is_zero() {
                write!(f, "·|z|^({})", k.r_exp)?;
            }
        }
        Ok(())
    }
}

/// Calls `f` with every vector of `parts` non-negative integers summing to `m`.
pub(crate) fn for_each_composition(m: u32, parts: usize, f: &mut dyn FnMut(&[u32])) {
    fn rec(rem: u32, idx: usize, cur: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
        if idx + 1 == cur.len() {
            cur[idx] = rem;
            f(cur);
            return;
        }
        for k in 0..=rem {
            cur[idx] = k;
            rec(rem - k, idx + 1, cur, f);
        }
    }
    let mut cur = vec![0; parts];
    rec(m, 0, &mut cur, f);
}

/// All multi-indices of total degree `m` in `n` variables.
pub fn multi_indices(m: u32, n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for_each_composition(m, n, &mut |p| out.push(p.to_vec()));
    out.reverse();
    out
}

fn multinomial(m: u32, parts: &[u32]) -> i64 {
    let mut res: i64 = 1;
    let mut acc = 0u32;
    for &p in parts {
        for i in 1..=p {
            acc += 1;
            res = res * acc as i64 / i as i64;
        }
    }
    debug_assert_eq!(acc, m);
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(n: usize, gamma: f64) -> Context<f64> {
        Context::new(n, gamma).unwrap()
    }

    #[test]
    fn gamma_half_is_rejected() {
        assert!(matches!(Context::<f64>::new(2, 0.5), Err(FracError::GammaHalf)));
    }

    #[test]
    fn power_rule_in_y() {
        let c = ctx(1, 0.3);
        let u = AtomSum::monomial(&c, 1.0, LatticeExponent::TWO_GAMMA, vec![0], LatticeExponent::ZERO);
        let d = u.differentiate(Direction::Y);
        let expected = AtomSum::monomial(&c, 0.6, LatticeExponent::new(-1, 1), vec![0], LatticeExponent::ZERO);
        assert_eq!(d, expected);
    }

    #[test]
    fn chain_rule_in_x() {
        let c = ctx(2, 0.25);
        let t = LatticeExponent::new(-2, 1);
        let u = AtomSum::monomial(&c, 1.0, LatticeExponent::ZERO, vec![0, 0], t);
        let d = u.differentiate(Direction::X(0));
        let expected = AtomSum::monomial(&c, -1.5, LatticeExponent::ZERO, vec![1, 0], t - LatticeExponent::int(2));
        assert_eq!(d, expected);
    }

    #[test]
    fn even_integer_radius_powers_become_polynomials() {
        let c = ctx(1, 0.25);
        let u = AtomSum::monomial(&c, 1.0, LatticeExponent::ZERO, vec![0], LatticeExponent::int(2));
        let y2 = AtomSum::monomial(&c, 1.0, LatticeExponent::int(2), vec![0], LatticeExponent::ZERO);
        let x2 = AtomSum::monomial(&c, 1.0, LatticeExponent::ZERO, vec![2], LatticeExponent::ZERO);
        assert_eq!(u, y2.add(&x2));
    }

    #[test]
    fn sphere_relation_cancels_exactly() {
        // x_n²|z|^t + y²|z|^t + x_1²|z|^t − |z|^{t+2} = 0
        let c = ctx(2, 0.3);
        let t = LatticeExponent::new(-3, 1);
        let mut u = AtomSum::monomial(&c, 1.0, LatticeExponent::ZERO, vec![0, 2], t);
        u = u.add(&AtomSum::monomial(&c, 1.0, LatticeExponent::int(2), vec![0, 0], t));
        u = u.add(&AtomSum::monomial(&c, 1.0, LatticeExponent::ZERO, vec![2, 0], t));
        u = u.sub(&AtomSum::monomial(&c, 1.0, LatticeExponent::ZERO, vec![0, 0], t + LatticeExponent::int(2)));
        assert!(u.is_zero(), "{u}");
    }

    #[test]
    fn grading_of_mixed_sum() {
        let c = ctx(2, 0.3);
        let a = AtomSum::monomial(&c, 1.0, LatticeExponent::TWO_GAMMA, vec![1, 0], LatticeExponent::ZERO);
        let b = AtomSum::monomial(&c, 1.0, LatticeExponent::int(1), vec![0, 0], LatticeExponent::int(-2));
        let g = a.add(&b).homogeneity_grading();
        assert_eq!(g.len(), 2);
        assert_eq!(g[&LatticeExponent::new(1, 1)], a);
        assert_eq!(g[&LatticeExponent::int(-1)], b);
    }

    #[test]
    fn evaluation_examples() {
        let c = ctx(2, 0.25);
        let g = AtomSum::monomial(&c, 1.0, LatticeExponent::ZERO, vec![0, 0], LatticeExponent::new(-2, 1));
        let v = g.evaluate(0.0, &[2.0_f64.sqrt(), 2.0_f64.sqrt()]).unwrap();
        assert!((v - 2f64.powf(-1.5)).abs() < 1e-15);
        assert!(g.evaluate(0.0, &[0.0, 0.0]).is_err());
        let k = AtomSum::monomial(&c, 1.0, LatticeExponent::TWO_GAMMA, vec![0, 0], LatticeExponent::new(-2, -1));
        let v = k.evaluate(0.7, &[0.0, 0.0]).unwrap();
        assert!((v - 0.7f64.powi(-2)).abs() < 1e-13);
        let neg = AtomSum::monomial(&c, 1.0, LatticeExponent::new(0, -1), vec![0, 0], LatticeExponent::ZERO);
        assert!(neg.evaluate(0.0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let c = ctx(2, 0.3);
        let u = AtomSum::monomial(&c, 0.1 + 0.2, LatticeExponent::new(1, -1), vec![1, 1], LatticeExponent::new(-5, 2));
        let s = serde_json::to_string(&u).unwrap();
        let back: AtomSum<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn multi_index_count() {
        assert_eq!(multi_indices(3, 3).len(), 10);
        assert_eq!(multi_indices(0, 2), vec![vec![0, 0]]);
    }
}
