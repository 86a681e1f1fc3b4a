//! Small numeric helpers shared by the verification code.

/// Least-squares slope of the points `(x, y)`.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Linear least squares `min |A c − b|` with standard errors of `c`.
///
/// Returns `(coefficients, standard_errors, residual_norm)`.
pub fn least_squares(rows: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let m = rows.len();
    let k = rows.first()?.len();
    if m < k {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-14 * smax) {
        return None;
    }
    let c = svd.solve(&rhs, 0.0).ok()?;
    let res = &a * &c - &rhs;
    let rnorm = res.norm();
    let dof = (m - k).max(1) as f64;
    let s2 = res.norm_squared() / dof;
    let ata = a.transpose() * &a;
    let cov = ata.try_inverse()?;
    let se = (0..k).map(|i| (s2 * cov[(i, i)]).max(0.0).sqrt()).collect();
    Some((c.iter().copied().collect(), se, rnorm))
}
