//! Successive deficit killing for the Poisson kernel `K_g`, the
//! weighted-Neumann Green's function `Γ_g` and the boundary Green's
//! function `G_h`, plus the flat convolution identity `Γ = K * G`.
//!
//! Starting from the flat kernel `U₀`, the residual `R = D_g U = D U − B U`
//! (with `B = D − D_g`) is split into homogeneous pieces. The lowest piece
//! `R_λ` is removed by a homogeneous correction `v` with `D v = −R_λ`, and
//! `R ← R − R_λ − B v`. Each step raises the lowest residual grade.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{FracError, Result};
use crate::flat_kernels::{green_kernel_flat, p_n_gamma, poisson_kernel_flat, FracConfig};
use crate::hemisphere_spectral::Sector;
use crate::homogeneous_algebra::{AtomSum, LatticeExponent};
use crate::homogeneous_solver::{solve_homogeneous, solve_homogeneous_projected, split_parity};
use crate::metric_model::{deficit_apply_with, MetricJet};
use crate::quadrature::{integrate, sphere_area, sphere_rule};
use crate::util::fit_slope;

/// Default support radius of the cut-off `η_ξ`.
pub const DEFAULT_CUTOFF: f64 = 0.5;

/// Relative half-sphere residual accepted for least-squares corrections.
pub const PROJECTION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Poisson,
    GreenNeumann,
    BoundaryGreen,
}

impl KernelKind {
    pub fn sector(&self) -> Sector {
        match self {
            KernelKind::Poisson => Sector::Dirichlet,
            _ => Sector::Neumann,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(KernelKind::Poisson),
            "green" | "green_neumann" => Ok(KernelKind::GreenNeumann),
            "boundary" | "boundary_green" => Ok(KernelKind::BoundaryGreen),
            other => Err(FracError::config("kind", "poisson, green or boundary", other)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Poisson => "poisson",
            KernelKind::GreenNeumann => "green_neumann",
            KernelKind::BoundaryGreen => "boundary_green",
        }
    }

    /// Largest correction degree kept at order `m`: corrections above it lie
    /// in the remainder class.
    pub fn threshold(&self, m: u32) -> LatticeExponent {
        match self {
            KernelKind::Poisson => LatticeExponent::int(2 * m as i64),
            _ => LatticeExponent::new(2 * m as i64 - 1, 1),
        }
    }

    fn remainder_tag(&self, m: u32) -> String {
        match self {
            KernelKind::Poisson => format!("y^{{2γ}}C^{{{},α}}(X)", 2 * m),
            KernelKind::GreenNeumann => format!("C^{{{},α}}(X)", 2 * m),
            KernelKind::BoundaryGreen => format!("C^{{{},α}}(M)", 2 * m),
        }
    }
}

/// Record of one deficit-killing step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionStep {
    pub deficit_grade: LatticeExponent,
    pub correction_degree: LatticeExponent,
    pub deficit_norm: f64,
    pub correction_norm: f64,
    /// Relative residual of the least-squares part of the correction, when
    /// the deficit had components outside the finite-atom solvable class.
    pub projection_defect: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct KernelExpansion {
    pub kind: KernelKind,
    pub n: usize,
    pub gamma: f64,
    pub base: AtomSum<f64>,
    /// `(homogeneity, term)`, strictly increasing in homogeneity.
    pub corrections: Vec<(LatticeExponent, AtomSum<f64>)>,
    pub order: u32,
    pub cutoff_radius: f64,
    pub remainder_tag: String,
    pub threshold: LatticeExponent,
    pub steps: Vec<ExpansionStep>,
}

impl KernelExpansion {
    /// `base + Σ corrections`.
    pub fn truncated_sum(&self) -> AtomSum<f64> {
        self.corrections
            .iter()
            .fold(self.base.clone(), |acc, (_, t)| acc.add(t))
    }

    /// The expansion cut after its first `k` corrections. The threshold is
    /// lowered below the deficit of the first dropped correction, so
    /// [`expansion_residual`] only requires the kept grades to be killed.
    pub fn truncated(&self, k: usize) -> KernelExpansion {
        let mut out = self.clone();
        if k < self.corrections.len() {
            out.threshold = self.corrections[k].0 - LatticeExponent::int(1);
            out.corrections.truncate(k);
            out.steps.truncate(k);
        }
        out
    }

    pub fn correction_degrees(&self) -> Vec<LatticeExponent> {
        self.corrections.iter().map(|(h, _)| *h).collect()
    }

    pub fn base_degree(&self) -> Result<LatticeExponent> {
        self.base
            .homogeneity()
            .ok_or_else(|| FracError::Precondition("expansion base is not homogeneous".into()))
    }

    /// Strict grade increase, sector purity and degree consistency.
    pub fn check_invariants(&self) -> Result<()> {
        let g = self.gamma;
        let mut prev = self.base_degree()?;
        for (h, t) in &self.corrections {
            if h.cmp_value(&prev, g) != std::cmp::Ordering::Greater {
                return Err(FracError::Precondition(format!(
                    "correction degree {h} does not exceed the previous degree {prev}"
                )));
            }
            if t.homogeneity() != Some(*h) {
                return Err(FracError::Precondition(format!("correction of degree {h} is not homogeneous")));
            }
            let want = match self.kind {
                KernelKind::Poisson => 1,
                _ => 0,
            };
            if let Some((k, _)) = t.terms().find(|(k, _)| k.y_exp.gamma_multiple != want) {
                return Err(FracError::Precondition(format!(
                    "correction of degree {h} leaves its sector: y exponent {}",
                    k.y_exp
                )));
            }
            prev = *h;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "kind": self.kind,
            "n": self.n,
            "gamma": self.gamma,
            "order": self.order,
            "cutoff_radius": self.cutoff_radius,
            "remainder_tag": self.remainder_tag,
            "threshold": self.threshold,
            "base": self.base.to_json(),
            "corrections": self.corrections.iter().map(|(h, t)| json!({
                "homogeneity": h,
                "term": t.to_json(),
            })).collect::<Vec<_>>(),
            "steps": self.steps,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let get = |k: &str| v.get(k).ok_or_else(|| FracError::config(k, "a value", "nothing"));
        let kind_s = get("kind")?
            .as_str()
            .ok_or_else(|| FracError::config("kind", "a string", get("kind").unwrap()))?;
        let kind = KernelKind::parse(kind_s)?;
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .as_f64()
                .ok_or_else(|| FracError::config(k, "a number", get(k).unwrap()))
        };
        let exp = |val: &Value, field: &str| -> Result<LatticeExponent> {
            serde_json::from_value(val.clone()).map_err(|_| FracError::config(field, "{int, g}", val))
        };
        let base = AtomSum::from_json(get("base")?)?;
        let mut corrections = Vec::new();
        let list = get("corrections")?
            .as_array()
            .ok_or_else(|| FracError::config("corrections", "an array", get("corrections").unwrap()))?;
        for (i, c) in list.iter().enumerate() {
            let h = exp(c.get("homogeneity").unwrap_or(&Value::Null), &format!("corrections[{i}].homogeneity"))?;
            let t = AtomSum::from_json(c.get("term").unwrap_or(&Value::Null))?;
            corrections.push((h, t));
        }
        let mut steps = Vec::new();
        if let Some(list) = v.get("steps").and_then(Value::as_array) {
            for (i, s) in list.iter().enumerate() {
                let field = |k: &str| s.get(k).unwrap_or(&Value::Null);
                steps.push(ExpansionStep {
                    deficit_grade: exp(field("deficit_grade"), &format!("steps[{i}].deficit_grade"))?,
                    correction_degree: exp(field("correction_degree"), &format!("steps[{i}].correction_degree"))?,
                    deficit_norm: field("deficit_norm").as_f64().unwrap_or(f64::NAN),
                    correction_norm: field("correction_norm").as_f64().unwrap_or(f64::NAN),
                    projection_defect: field("projection_defect").as_f64(),
                });
            }
        }
        let order = get("order")?
            .as_u64()
            .ok_or_else(|| FracError::config("order", "a nonnegative integer", get("order").unwrap()))?
            as u32;
        Ok(KernelExpansion {
            kind,
            n: base.n(),
            gamma: num("gamma")?,
            base,
            corrections,
            order,
            cutoff_radius: num("cutoff_radius")?,
            remainder_tag: get("remainder_tag")?.as_str().unwrap_or_default().to_string(),
            threshold: exp(get("threshold")?, "threshold")?,
            steps,
        })
    }
}

/// Jet order needed to expand `kind` to order `m` in dimension `n`.
pub fn required_jet_order(kind: KernelKind, n: usize, m: u32) -> usize {
    match kind {
        KernelKind::Poisson => 2 * m as usize + n + 1,
        _ => 2 * m as usize + n,
    }
}

fn pipeline(
    jet: &MetricJet,
    kind: KernelKind,
    base: AtomSum<f64>,
    m: u32,
) -> Result<(Vec<(LatticeExponent, AtomSum<f64>)>, Vec<ExpansionStep>)> {
    jet.validate()?;
    let g = jet.gamma;
    let ctx = base.ctx().clone();
    if ctx.n() != jet.n || (ctx.gamma_f64() - g).abs() > 1e-15 {
        return Err(FracError::Precondition("jet and kernel have different (n, γ)".into()));
    }
    let need = required_jet_order(kind, jet.n, m);
    if jet.order < need {
        return Err(FracError::Precondition(format!(
            "order m = {m} needs a metric jet of order {need}, the jet has order {}",
            jet.order
        )));
    }
    let h_max = kind.threshold(m) - LatticeExponent::new(1, 1);
    let sector = kind.sector();
    let derived = jet.derived();
    let mut residual = deficit_apply_with(derived, &base, Some(h_max))?.neg();
    let tol = 1e-12 * base.coeff_norm().max(residual.coeff_norm());
    let mut corrections = Vec::new();
    let mut steps = Vec::new();
    let mut last: Option<LatticeExponent> = None;
    loop {
        let Some((h, piece)) = residual
            .grades_ascending()
            .into_iter()
            .find(|(_, p)| p.coeff_norm() > tol)
        else {
            break;
        };
        if let Some(prev) = last {
            if h.cmp_value(&prev, g) != std::cmp::Ordering::Greater {
                return Err(FracError::Numerical(format!(
                    "deficit grade did not increase: {h} after {prev}"
                )));
            }
        }
        let attach = |e: FracError| match e {
            FracError::Solver { message, .. } => FracError::Solver {
                message: format!("{message} (deficit grade {h})"),
                remainder: Some(piece.to_json()),
            },
            other => other,
        };
        let (natural, odd) = split_parity(&piece.neg());
        let mut v = solve_homogeneous(&natural, sector).map_err(attach)?;
        let mut projection_defect = None;
        if odd.coeff_norm() > tol {
            let p = solve_homogeneous_projected(&odd, sector, PROJECTION_TOL).map_err(attach)?;
            projection_defect = Some(p.relative_residual);
            v = v.add(&p.solution);
        }
        let degree = h + LatticeExponent::new(1, 1);
        steps.push(ExpansionStep {
            deficit_grade: h,
            correction_degree: degree,
            deficit_norm: piece.coeff_norm(),
            correction_norm: v.coeff_norm(),
            projection_defect,
        });
        // drop every grade up to h (the lower ones are round-off)
        let below: AtomSum<f64> = residual.truncate_above(h);
        residual = residual.sub(&below).sub(&deficit_apply_with(derived, &v, Some(h_max))?);
        if !v.is_zero() {
            corrections.push((degree, v));
        }
        last = Some(h);
    }
    Ok((corrections, steps))
}

fn finish(
    kind: KernelKind,
    jet: &MetricJet,
    base: AtomSum<f64>,
    m: u32,
    corrections: Vec<(LatticeExponent, AtomSum<f64>)>,
    steps: Vec<ExpansionStep>,
) -> Result<KernelExpansion> {
    let e = KernelExpansion {
        kind,
        n: jet.n,
        gamma: jet.gamma,
        base,
        corrections,
        order: m,
        cutoff_radius: DEFAULT_CUTOFF,
        remainder_tag: kind.remainder_tag(m),
        threshold: kind.threshold(m),
        steps,
    };
    e.check_invariants()?;
    Ok(e)
}

/// Expansion of the Poisson kernel `K_g(·, 0)` to order `m`.
pub fn expand_poisson(jet: &MetricJet, m: u32) -> Result<KernelExpansion> {
    let cfg = FracConfig::new(jet.n, jet.gamma)?;
    debug_assert!(p_n_gamma(&cfg) > 0.0);
    let base = poisson_kernel_flat(&cfg);
    let (c, s) = pipeline(jet, KernelKind::Poisson, base.clone(), m)?;
    finish(KernelKind::Poisson, jet, base, m, c, s)
}

/// Expansion of the weighted-Neumann Green's function `Γ_g(·, 0)`.
pub fn expand_green_neumann(jet: &MetricJet, m: u32, g_n_gamma: f64) -> Result<KernelExpansion> {
    let cfg = FracConfig::new(jet.n, jet.gamma)?;
    let base = green_kernel_flat(&cfg, g_n_gamma);
    let (c, s) = pipeline(jet, KernelKind::GreenNeumann, base.clone(), m)?;
    finish(KernelKind::GreenNeumann, jet, base, m, c, s)
}

/// Boundary restriction of a Green-Neumann expansion (`G_h = Γ_g|_{y=0}`).
pub fn boundary_green_from(green: &KernelExpansion) -> Result<KernelExpansion> {
    if green.kind != KernelKind::GreenNeumann {
        return Err(FracError::Precondition("boundary Green expansion needs a Green-Neumann expansion".into()));
    }
    let base = green.base.boundary_restriction()?;
    let mut corrections = Vec::new();
    for (h, t) in &green.corrections {
        let r = t.boundary_restriction()?;
        if !r.is_zero() {
            corrections.push((*h, r));
        }
    }
    Ok(KernelExpansion {
        kind: KernelKind::BoundaryGreen,
        n: green.n,
        gamma: green.gamma,
        base,
        corrections,
        order: green.order,
        cutoff_radius: green.cutoff_radius,
        remainder_tag: KernelKind::BoundaryGreen.remainder_tag(green.order),
        threshold: green.threshold,
        steps: green.steps.clone(),
    })
}

pub fn expand_boundary_green(jet: &MetricJet, m: u32, g_n_gamma: f64) -> Result<KernelExpansion> {
    boundary_green_from(&expand_green_neumann(jet, m, g_n_gamma)?)
}

/// Degrees of the corrections displayed for locally flat Poincaré–Einstein
/// data at order `m`: `{0, …, 2m}` for `K`, `{2γ, …, 2m−1+2γ}` for `Γ` and `G`.
pub fn pe_expected_degrees(kind: KernelKind, m: u32) -> Vec<LatticeExponent> {
    match kind {
        KernelKind::Poisson => (0..=2 * m as i64).map(LatticeExponent::int).collect(),
        _ => (0..2 * m as i64).map(|l| LatticeExponent::new(l, 1)).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub radii: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub slope: f64,
    /// Degree of the lowest nonzero residual grade.
    pub first_unkilled_grade: Option<LatticeExponent>,
    pub expected_slope: Option<f64>,
    pub identically_zero: bool,
    pub passed: bool,
}

/// `D_g(U) = D U − B U` for the truncated expansion, with the jet at full
/// order.
pub fn expansion_residual(jet: &MetricJet, exp: &KernelExpansion) -> Result<AtomSum<f64>> {
    if exp.kind == KernelKind::BoundaryGreen {
        return Err(FracError::Precondition("the residual is defined for interior expansions".into()));
    }
    let u = exp.truncated_sum();
    let deficit = deficit_apply_with(jet.derived(), &u, None)?;
    let r = u.apply_flat_d().sub(&deficit);
    let h_max = exp.threshold - LatticeExponent::new(1, 1);
    let g = exp.gamma;
    let dirs = upper_directions(exp.n);
    let sup = |f: &AtomSum<f64>| -> Result<f64> {
        dirs.iter()
            .map(|(y, x)| f.evaluate(*y, x).map(f64::abs))
            .try_fold(0.0f64, |a, v| Ok(a.max(v?)))
    };
    let cancelled = deficit.homogeneity_grading();
    let mut out = AtomSum::zero(u.ctx());
    for (h, p) in r.grades_ascending() {
        if h.cmp_value(&h_max, g) != std::cmp::Ordering::Greater {
            let scale = match cancelled.get(&h) {
                Some(d) => sup(d)?,
                None => 0.0,
            }
            .max(1e-12 * u.coeff_norm());
            let left = sup(&p)?;
            if left > 1e-7 * scale {
                return Err(FracError::Numerical(format!(
                    "residual grade {h} below the threshold was not killed (sup {left:e}, scale {scale:e})"
                )));
            }
            continue;
        }
        out = out.add(&p);
    }
    Ok(out)
}

/// Directions on the unit half-sphere with `y > 0.1`, as `(y, x)`.
fn upper_directions(n: usize) -> Vec<(f64, Vec<f64>)> {
    let (pts, _) = sphere_rule(n, 8);
    pts.into_iter()
        .filter(|p| p[n] > 0.1)
        .map(|p| (p[n], p[..n].to_vec()))
        .collect()
}

/// Log-log slope of `sup_{|z|=ρ} |D_g U|` over `ρ = ε 2^{−k}`, `k = 1..6`.
pub fn residual_decay_check(jet: &MetricJet, exp: &KernelExpansion) -> Result<DecayReport> {
    let r = expansion_residual(jet, exp)?;
    let radii: Vec<f64> = (1..=6).map(|k| exp.cutoff_radius * 0.5f64.powi(k)).collect();
    if r.is_zero() {
        return Ok(DecayReport {
            sup_norms: vec![0.0; radii.len()],
            radii,
            slope: f64::INFINITY,
            first_unkilled_grade: None,
            expected_slope: None,
            identically_zero: true,
            passed: true,
        });
    }
    let first = r.grades_ascending()[0].0;
    let expected = first.value(exp.gamma);
    let dirs = upper_directions(exp.n);
    let mut sups = Vec::new();
    for &rho in &radii {
        let mut s: f64 = 0.0;
        for (y, x) in &dirs {
            let xs: Vec<f64> = x.iter().map(|v| v * rho).collect();
            s = s.max(r.evaluate(y * rho, &xs)?.abs());
        }
        sups.push(s);
    }
    if sups.iter().any(|s| !(*s > 0.0)) {
        return Err(FracError::Numerical("residual vanishes at a sample radius; slope fit impossible".into()));
    }
    let slope = fit_slope(
        &radii
            .iter()
            .zip(&sups)
            .map(|(r, s)| (r.ln(), s.ln()))
            .collect::<Vec<_>>(),
    );
    Ok(DecayReport {
        radii,
        sup_norms: sups,
        slope,
        first_unkilled_grade: Some(first),
        expected_slope: Some(expected),
        identically_zero: false,
        passed: slope >= expected - 0.1,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionPoint {
    pub y: f64,
    pub x: Vec<f64>,
    pub green: f64,
    pub convolution: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionReport {
    pub points: Vec<ConvolutionPoint>,
    pub max_relative_error: f64,
}

/// `∫ K(y, x − ξ) G(ξ) dξ` for the flat kernels (`n ∈ {1, 2}`).
///
/// Written in polar coordinates about `ξ = 0`, the radial weight
/// `r^{2γ−1}` is removed by `s = r^{2γ}`; beyond `R = 10⁴(|x| + y)` the
/// leading tail `ω p y^{2γ} R^{−n}/n` is added.
pub fn flat_convolution(cfg: &FracConfig, g_n_gamma: f64, y: f64, x: &[f64]) -> Result<f64> {
    let n = cfg.n;
    if !(n == 1 || n == 2) {
        return Err(FracError::Precondition("the convolution check is implemented for n ∈ {1, 2}".into()));
    }
    let k = poisson_kernel_flat(cfg);
    let tg = 2.0 * cfg.gamma;
    let p = p_n_gamma(cfg);
    let kval = |xi: &[f64]| -> f64 {
        let d: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a - b).collect();
        k.evaluate(y, &d).unwrap_or(f64::NAN)
    };
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let angular = |r: f64| -> f64 {
        if n == 1 {
            kval(&[r]) + kval(&[-r])
        } else {
            let f = |th: f64| kval(&[r * th.cos(), r * th.sin()]);
            let tpi = 2.0 * std::f64::consts::PI;
            (0..8)
                .map(|i| integrate(f, tpi * i as f64 / 8.0, tpi * (i + 1) as f64 / 8.0, 1e-13).unwrap_or(f64::NAN))
                .sum()
        }
    };
    let big = 1e4 * (xn + y);
    let mut breaks = vec![0.0];
    for r in [0.5 * xn, xn, xn + y, 2.0 * xn + 2.0 * y, 10.0 * (xn + y), 100.0 * (xn + y), 1e3 * (xn + y), big] {
        if r > *breaks.last().unwrap() * (1.0 + 1e-9) {
            breaks.push(r);
        }
    }
    let f = |s: f64| angular(s.powf(1.0 / tg));
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate(f, w[0].powf(tg), w[1].powf(tg), 1e-12)?;
    }
    total /= tg;
    let tail = sphere_area(n - 1) * p * y.powf(tg) * big.powi(-(n as i32)) / n as f64;
    let v = g_n_gamma * (total + tail);
    if !v.is_finite() {
        return Err(FracError::Numerical("convolution quadrature produced a non-finite value".into()));
    }
    Ok(v)
}

/// Compare `Γ(y, x)` with `(K * G)(y, x)` at the given points.
pub fn convolution_check(cfg: &FracConfig, g_n_gamma: f64, samples: &[(f64, Vec<f64>)]) -> Result<ConvolutionReport> {
    let gk = green_kernel_flat(cfg, g_n_gamma);
    let mut points = Vec::new();
    for (y, x) in samples {
        let green = gk.evaluate(*y, x)?;
        let conv = flat_convolution(cfg, g_n_gamma, *y, x)?;
        points.push(ConvolutionPoint {
            y: *y,
            x: x.clone(),
            green,
            convolution: conv,
            relative_error: ((conv - green) / green).abs(),
        });
    }
    let max_relative_error = points.iter().map(|p| p.relative_error).fold(0.0, f64::max);
    Ok(ConvolutionReport {
        points,
        max_relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_jet_is_a_fixed_point() {
        let jet = MetricJet::flat(2, 0.25, 8).unwrap();
        let p = expand_poisson(&jet, 1).unwrap();
        assert!(p.corrections.is_empty());
        let g = expand_green_neumann(&jet, 1, 1.0).unwrap();
        assert!(g.corrections.is_empty());
        let b = boundary_green_from(&g).unwrap();
        assert!(b.corrections.is_empty());
        assert!(residual_decay_check(&jet, &p).unwrap().identically_zero);
    }

    #[test]
    fn y2s_first_poisson_correction_has_degree_two_minus_n() {
        let s = vec![vec![0.2, 0.05], vec![0.05, -0.1]];
        let jet = MetricJet::y2s(2, 0.25, 8, s).unwrap();
        let e = expand_poisson(&jet, 1).unwrap();
        assert_eq!(e.corrections[0].0, LatticeExponent::int(0));
        e.check_invariants().unwrap();
    }

    #[test]
    fn insufficient_jet_order_is_rejected() {
        let jet = MetricJet::flat(2, 0.25, 2).unwrap();
        assert!(matches!(expand_poisson(&jet, 2), Err(FracError::Precondition(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = vec![vec![0.3]];
        let jet = MetricJet::y2s(1, 0.3, 6, s).unwrap();
        let e = expand_green_neumann(&jet, 1, 0.7).unwrap();
        let back = KernelExpansion::from_json(&e.to_json()).unwrap();
        assert_eq!(back.correction_degrees(), e.correction_degrees());
        assert_eq!(back.truncated_sum(), e.truncated_sum());
        assert_eq!(back.steps, e.steps);
    }
}
