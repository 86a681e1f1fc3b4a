//! Coefficient fields for atom sums.
//!
//! `f64` is the production field. With the `exact` feature, `Rational`
//! (arbitrary precision rationals) makes every symbolic identity an exact
//! equality, provided γ itself is rational.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde_json::Value;

/// Arithmetic needed by the symbolic layer.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact, so residuals must vanish identically.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    /// Best rational approximation is not attempted: only values that are
    /// exactly representable (dyadic for `f64`) are accepted by exact fields.
    fn from_f64(v: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;

    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self, String>;

    /// Minimal-norm solution of `a x = b` (rows of `a` are equations).
    /// Returns `None` when the system is inconsistent.
    fn min_norm_solve(a: &[Vec<Self>], ncols: usize, b: &[Self]) -> Option<Vec<Self>>;

    fn from_ratio(p: i64, q: i64) -> Self {
        Self::from_int(p) / Self::from_int(q)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_json(&self) -> Value {
        serde_json::json!(*self)
    }
    fn from_json(v: &Value) -> Result<Self, String> {
        v.as_f64().ok_or_else(|| format!("expected a number, got {v}"))
    }

    fn min_norm_solve(a: &[Vec<f64>], ncols: usize, b: &[f64]) -> Option<Vec<f64>> {
        let nrows = a.len();
        if ncols == 0 {
            return b.iter().all(|v| *v == 0.0).then(Vec::new);
        }
        if nrows == 0 {
            return Some(vec![0.0; ncols]);
        }
        let m = nalgebra::DMatrix::from_fn(nrows, ncols, |i, j| a[i][j]);
        let rhs = nalgebra::DVector::from_column_slice(b);
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = smax * 1e-12 * (nrows.max(ncols) as f64);
        let x = svd.solve(&rhs, eps).ok()?;
        let res = (&m * &x - &rhs).norm();
        let scale = rhs.norm().max(f64::MIN_POSITIVE);
        (res <= 1e-9 * scale).then(|| x.iter().copied().collect())
    }
}

#[cfg(feature = "exact")]
pub use exact::Rational;

#[cfg(feature = "exact")]
mod exact {
    use super::Scalar;
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
    use serde_json::Value;

    pub type Rational = BigRational;

    impl Scalar for BigRational {
        const EXACT: bool = true;

        fn zero() -> Self {
            Zero::zero()
        }
        fn one() -> Self {
            One::one()
        }
        fn from_int(v: i64) -> Self {
            BigRational::from_i64(v).expect("integer is representable")
        }
        fn from_f64(v: f64) -> Option<Self> {
            BigRational::from_float(v)
        }
        fn to_f64(&self) -> f64 {
            ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
        }
        fn is_zero(&self) -> bool {
            Zero::is_zero(self)
        }
        fn to_json(&self) -> Value {
            Value::String(self.to_string())
        }
        fn from_json(v: &Value) -> Result<Self, String> {
            match v {
                Value::String(s) => s
                    .parse::<BigRational>()
                    .map_err(|e| format!("bad rational {s:?}: {e}")),
                Value::Number(n) => n
                    .as_i64()
                    .map(Self::from_int)
                    .ok_or_else(|| format!("expected an integer or \"p/q\", got {n}")),
                other => Err(format!("expected a rational, got {other}")),
            }
        }

        fn min_norm_solve(a: &[Vec<Self>], ncols: usize, b: &[Self]) -> Option<Vec<Self>> {
            super::rref::rational_min_norm(a, ncols, b)
        }
    }
}

#[cfg(feature = "exact")]
mod rref {
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    /// Row-reduce `[a | b]`, then return the minimal-norm point of the
    /// affine solution set via the normal equations of the reduced rows.
    pub(super) fn rational_min_norm(
        a: &[Vec<BigRational>],
        ncols: usize,
        b: &[BigRational],
    ) -> Option<Vec<BigRational>> {
        let mut rows: Vec<Vec<BigRational>> = a
            .iter()
            .zip(b)
            .map(|(r, v)| {
                let mut row = r.clone();
                row.push(v.clone());
                row
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..ncols {
            let Some(p) = (rank..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
                continue;
            };
            rows.swap(rank, p);
            let inv = BigRational::one() / rows[rank][col].clone();
            for v in rows[rank].iter_mut() {
                if !v.is_zero() {
                    *v = &*v * &inv;
                }
            }
            let pivot_row = rows[rank].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i == rank || row[col].is_zero() {
                    continue;
                }
                let f = row[col].clone();
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v = &*v - &(&f * pv);
                    }
                }
            }
            pivots.push(col);
            rank += 1;
        }
        if rows[rank..].iter().any(|r| !r[ncols].is_zero()) {
            return None;
        }
        rows.truncate(rank);
        let mut x = vec![BigRational::zero(); ncols];
        if rank == ncols {
            for (r, &c) in rows.iter().zip(&pivots) {
                x[c] = r[ncols].clone();
            }
            return Some(x);
        }
        // Normal equations (R R^T) w = rhs, then x = R^T w.
        let mut gram: Vec<Vec<BigRational>> = (0..rank)
            .map(|i| {
                let mut row: Vec<BigRational> = (0..rank)
                    .map(|j| {
                        rows[i][..ncols]
                            .iter()
                            .zip(&rows[j][..ncols])
                            .filter(|(p, q)| !p.is_zero() && !q.is_zero())
                            .fold(BigRational::zero(), |acc, (p, q)| acc + p * q)
                    })
                    .collect();
                row.push(rows[i][ncols].clone());
                row
            })
            .collect();
        for col in 0..rank {
            let p = (col..rank).find(|&i| !gram[i][col].is_zero())?;
            gram.swap(col, p);
            let inv = BigRational::one() / gram[col][col].clone();
            for v in gram[col].iter_mut() {
                *v = &*v * &inv;
            }
            let prow = gram[col].clone();
            for (i, row) in gram.iter_mut().enumerate() {
                if i == col || row[col].is_zero() {
                    continue;
                }
                let f = row[col].clone();
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v = &*v - &(&f * pv);
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let w = &gram[i][rank];
            if w.is_zero() {
                continue;
            }
            for (xj, rij) in x.iter_mut().zip(&row[..ncols]) {
                if !rij.is_zero() {
                    *xj = &*xj + &(rij * w);
                }
            }
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_min_norm_picks_shortest_solution() {
        let a = vec![vec![1.0, 1.0]];
        let x = f64::min_norm_solve(&a, 2, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn float_inconsistent_system_is_rejected() {
        let a = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert!(f64::min_norm_solve(&a, 2, &[1.0, 2.0]).is_none());
    }

    #[cfg(feature = "exact")]
    #[test]
    fn rational_min_norm_matches_hand_solution() {
        let r = |p, q| Rational::from_ratio(p, q);
        let a = vec![vec![r(1, 1), r(2, 1), r(0, 1)], vec![r(0, 1), r(0, 1), r(1, 1)]];
        let x = Rational::min_norm_solve(&a, 3, &[r(5, 1), r(3, 1)]).unwrap();
        assert_eq!(x, vec![r(1, 1), r(2, 1), r(3, 1)]);
    }

    #[cfg(feature = "exact")]
    #[test]
    fn rational_json_round_trip() {
        let v = Rational::from_ratio(-7, 12);
        assert_eq!(Rational::from_json(&v.to_json()).unwrap(), v);
    }
}
