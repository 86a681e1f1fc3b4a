//! Finite volume solver for `D_g` on half-boxes `[0, Y] × Π (x-axes)`.
//!
//! The vertical flux `y^{1−2γ}∂_y U` is discretised with two-point
//! transmissibilities `T = 2γ / (y_{j+1}^{2γ} − y_j^{2γ})`, which are exact for
//! the local solutions `1` and `y^{2γ}`. Nodes are cell-centred in `x` and sit
//! on the `y` mesh lines; the lowest node row lies on `y = 0`.

use std::fmt::Write as _;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{FracError, Result};
use crate::metric_model::MetricJet;
use crate::util::{fit_slope, least_squares};

/// Scalar field `(y, x) ↦ value`.
pub type Field<'a> = dyn Fn(f64, &[f64]) -> f64 + Sync + 'a;
/// Boundary function `x ↦ value`.
pub type BoundaryFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XAxis {
    /// `nodes` equispaced points on `[0, length)`, wrapped.
    Periodic { nodes: usize, length: f64 },
    /// `nodes` equispaced points on `[lo, hi]`; the end points carry data.
    Boxed { nodes: usize, lo: f64, hi: f64 },
}

impl XAxis {
    pub fn nodes(&self) -> usize {
        match self {
            XAxis::Periodic { nodes, .. } | XAxis::Boxed { nodes, .. } => *nodes,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self {
            XAxis::Periodic { nodes, length } => length / *nodes as f64,
            XAxis::Boxed { nodes, lo, hi } => (hi - lo) / (*nodes as f64 - 1.0),
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        match self {
            XAxis::Periodic { .. } => i as f64 * self.spacing(),
            XAxis::Boxed { lo, .. } => lo + i as f64 * self.spacing(),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, XAxis::Periodic { .. })
    }

    fn is_edge(&self, i: usize) -> bool {
        match self {
            XAxis::Periodic { .. } => false,
            XAxis::Boxed { nodes, .. } => i == 0 || i + 1 == *nodes,
        }
    }

    fn step(&self, i: usize, s: isize) -> Option<usize> {
        let m = self.nodes() as isize;
        let k = i as isize + s;
        match self {
            XAxis::Periodic { .. } => Some(k.rem_euclid(m) as usize),
            XAxis::Boxed { .. } => (0..m).contains(&k).then_some(k as usize),
        }
    }

    fn validate(&self, idx: usize) -> Result<()> {
        let field = format!("axes[{idx}]");
        match self {
            XAxis::Periodic { nodes, length } => {
                if *nodes < 3 {
                    return Err(FracError::config(format!("{field}.nodes"), "at least 3", nodes));
                }
                if !(length.is_finite() && *length > 0.0) {
                    return Err(FracError::config(format!("{field}.length"), "a positive length", length));
                }
            }
            XAxis::Boxed { nodes, lo, hi } => {
                if *nodes < 3 {
                    return Err(FracError::config(format!("{field}.nodes"), "at least 3", nodes));
                }
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return Err(FracError::config(format!("{field}.hi"), format!("a bound above lo = {lo}"), hi));
                }
            }
        }
        Ok(())
    }
}

/// Grading exponent `q` of `y_j = Y (j/J)^q`: `1/(2γ)` clamped to `[2, 3]`,
/// so the first layers resolve both `y^{2γ}` and `y²`.
pub fn default_grading(gamma: f64) -> f64 {
    (1.0 / (2.0 * gamma)).clamp(2.0, 3.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub gamma: f64,
    /// Height `Y` of the box.
    pub height: f64,
    /// Number of `y` intervals `J`.
    pub layers: usize,
    /// Grading exponent; defaults to [`default_grading`].
    #[serde(default)]
    pub grading: Option<f64>,
    pub axes: Vec<XAxis>,
}

#[derive(Clone, Debug)]
pub struct HalfGrid {
    pub gamma: f64,
    pub y: Vec<f64>,
    pub axes: Vec<XAxis>,
    transmissibility: Vec<f64>,
    weight: Vec<f64>,
    length: Vec<f64>,
    y_weighted: Vec<f64>,
    y_mid: Vec<f64>,
    strides: Vec<usize>,
    columns: usize,
}

impl HalfGrid {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        if spec.layers < 2 {
            return Err(FracError::config("layers", "at least 2", spec.layers));
        }
        if !(spec.height.is_finite() && spec.height > 0.0) {
            return Err(FracError::config("height", "a positive height", spec.height));
        }
        let q = spec.grading.unwrap_or_else(|| default_grading(spec.gamma));
        if !(q.is_finite() && q > 0.0) {
            return Err(FracError::config("grading", "a positive exponent", q));
        }
        let j = spec.layers as f64;
        let y = (0..=spec.layers)
            .map(|k| spec.height * (k as f64 / j).powf(q))
            .collect();
        Self::from_nodes(spec.gamma, y, spec.axes.clone())
    }

    /// Grid with explicit `y` nodes (`y[0] = 0`, strictly increasing).
    pub fn from_nodes(gamma: f64, y: Vec<f64>, axes: Vec<XAxis>) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(FracError::config("gamma", "a value in (0, 1)", gamma));
        }
        if (gamma - 0.5).abs() < 1e-12 {
            return Err(FracError::GammaHalf);
        }
        if axes.is_empty() {
            return Err(FracError::config("axes", "at least one x-axis", 0));
        }
        for (i, a) in axes.iter().enumerate() {
            a.validate(i)?;
        }
        if y.len() < 3 || y[0] != 0.0 || y.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FracError::config("y", "strictly increasing nodes starting at 0", format!("{} nodes", y.len())));
        }
        let tg = 2.0 * gamma;
        let nl = y.len() - 1;
        let transmissibility: Vec<f64> = (0..nl).map(|j| tg / (y[j + 1].powf(tg) - y[j].powf(tg))).collect();
        if transmissibility.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(FracError::Numerical("non-finite transmissibility; the grading is too fine for f64".into()));
        }
        let p = 2.0 - tg;
        let mut weight = Vec::with_capacity(nl + 1);
        let mut length = Vec::with_capacity(nl + 1);
        let mut y_weighted = Vec::with_capacity(nl + 1);
        let mut y_mid = Vec::with_capacity(nl + 1);
        for j in 0..=nl {
            let a = if j == 0 { 0.0 } else { 0.5 * (y[j - 1] + y[j]) };
            let b = if j == nl { y[nl] } else { 0.5 * (y[j] + y[j + 1]) };
            let w = (b.powf(p) - a.powf(p)) / p;
            let m1 = (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0);
            weight.push(w);
            length.push(b - a);
            y_weighted.push(m1 / w);
            y_mid.push(0.5 * (a + b));
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].nodes();
        }
        let columns = axes.iter().map(XAxis::nodes).product();
        Ok(HalfGrid {
            gamma,
            y,
            axes,
            transmissibility,
            weight,
            length,
            y_weighted,
            y_mid,
            strides,
            columns,
        })
    }

    pub fn n(&self) -> usize {
        self.axes.len()
    }
    /// Number of `y` intervals.
    pub fn layers(&self) -> usize {
        self.y.len() - 1
    }
    /// Number of node columns (boundary nodes).
    pub fn columns(&self) -> usize {
        self.columns
    }
    pub fn len(&self) -> usize {
        self.columns * self.y.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn transmissibility(&self) -> &[f64] {
        &self.transmissibility
    }
    /// `∫ y^{1−2γ} dy` over the dual cell of each node row.
    pub fn cell_weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn index(&self, j: usize, col: usize) -> usize {
        j * self.columns + col
    }

    pub fn col_multi(&self, col: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| (col / s) % a.nodes())
            .collect()
    }

    pub fn col_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn x_of(&self, col: usize) -> Vec<f64> {
        self.col_multi(col)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    fn column_area(&self) -> f64 {
        self.axes.iter().map(XAxis::spacing).product()
    }
}

/// Condition imposed on the face `y = 0`.
#[derive(Clone, Copy)]
pub enum Bottom<'a> {
    /// `U(0, x) = f(x)`.
    Dirichlet(&'a BoundaryFn<'a>),
    /// `lim_{y→0} y^{1−2γ} ∂_y U = ψ(x)`.
    WeightedFlux(&'a BoundaryFn<'a>),
}

/// Right-hand side `√g`-free density `y^{1−2γ} φ + ψ`.
#[derive(Clone, Copy, Default)]
pub struct Rhs<'a> {
    pub weighted: Option<&'a Field<'a>>,
    pub plain: Option<&'a Field<'a>>,
}

#[derive(Clone, Copy)]
pub struct FdProblem<'a> {
    pub metric: Option<&'a MetricJet>,
    pub bottom: Bottom<'a>,
    /// Values at the top face, at boxed edges and at masked nodes.
    pub boundary: &'a Field<'a>,
    /// Nodes (other than the outer boundary) whose value is prescribed.
    pub fixed: Option<&'a (dyn Fn(f64, &[f64]) -> bool + Sync + 'a)>,
    pub rhs: Rhs<'a>,
}

struct PointMetric {
    sqrt_det: f64,
    inverse: Vec<Vec<f64>>,
    e_over_y: f64,
}

fn point_metric(metric: Option<&MetricJet>, n: usize, gamma: f64, y: f64, x: &[f64]) -> PointMetric {
    let Some(jet) = metric.filter(|j| j.coefficients().next().is_some()) else {
        let mut inverse = vec![vec![0.0; n]; n];
        for (i, r) in inverse.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        return PointMetric {
            sqrt_det: 1.0,
            inverse,
            e_over_y: 0.0,
        };
    };
    let h = jet.h_at(y, x);
    let dh = jet.dy_h_at(y, x);
    let hm = nalgebra::DMatrix::from_fn(n, n, |i, j| h[i][j]);
    let det = hm.determinant();
    let inv = hm.try_inverse().unwrap_or_else(|| nalgebra::DMatrix::from_element(n, n, f64::NAN));
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr += inv[(i, j)] * dh[j][i];
        }
    }
    let e = 0.25 * (n as f64 - 2.0 * gamma) * tr;
    PointMetric {
        sqrt_det: det.sqrt(),
        inverse: (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect(),
        e_over_y: if y > 0.0 { e / y } else { 0.0 },
    }
}

struct NodeRow {
    entries: Vec<(usize, f64)>,
    rhs: f64,
    /// Coefficient of the bottom weighted flux in the balance of a `y = 0` node.
    flux_factor: f64,
}

fn node_row(grid: &HalfGrid, pb: &FdProblem, j: usize, col: usize) -> NodeRow {
    let n = grid.n();
    let g = grid.gamma;
    let multi = grid.col_multi(col);
    let x: Vec<f64> = grid.x_of(col);
    let area = grid.column_area();
    let me = grid.index(j, col);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(3 + 4 * n * n);
    let mut diag = 0.0;

    // vertical fluxes
    let vertical = |jj: usize, tj: usize, entries: &mut Vec<(usize, f64)>, diag: &mut f64| {
        let yf = 0.5 * (grid.y[jj] + grid.y[tj]);
        let pm = point_metric(pb.metric, n, g, yf, &x);
        let c = pm.sqrt_det * grid.transmissibility[jj.min(tj)] * area;
        *diag += c;
        entries.push((grid.index(tj, col), -c));
    };
    if j < grid.layers() {
        vertical(j, j + 1, &mut entries, &mut diag);
    }
    if j > 0 {
        vertical(j, j - 1, &mut entries, &mut diag);
    }

    // horizontal fluxes, evaluated at the weighted centroid of the dual cell
    let yc = grid.y_weighted[j];
    let w = grid.weight[j];
    for k in 0..n {
        let hk = grid.axes[k].spacing();
        let face_area = area / hk;
        for s in [1isize, -1] {
            let Some(nb) = grid.axes[k].step(multi[k], s) else { continue };
            let mut xf = x.clone();
            xf[k] += 0.5 * s as f64 * hk;
            let pm = point_metric(pb.metric, n, g, yc, &xf);
            let c = w * pm.sqrt_det * pm.inverse[k][k] * face_area / hk;
            let mut nb_multi = multi.clone();
            nb_multi[k] = nb;
            diag += c;
            entries.push((grid.index(j, grid.col_index(&nb_multi)), -c));
            // mixed derivatives: −s · W √g g^{kl} ∂_l U at the face
            for l in 0..n {
                if l == k || pm.inverse[k][l] == 0.0 {
                    continue;
                }
                let hl = grid.axes[l].spacing();
                let cf = -(s as f64) * w * pm.sqrt_det * pm.inverse[k][l] * face_area / (4.0 * hl);
                for base in [&multi, &nb_multi] {
                    for (sl, sign) in [(1isize, 1.0), (-1, -1.0)] {
                        if let Some(il) = grid.axes[l].step(base[l], sl) {
                            let mut m2 = base.clone();
                            m2[l] = il;
                            entries.push((grid.index(j, grid.col_index(&m2)), -cf * sign));
                        }
                    }
                }
            }
        }
    }

    // zeroth order term e y^{−2γ} = (e/y) y^{1−2γ}
    let pm = point_metric(pb.metric, n, g, yc, &x);
    diag += pm.sqrt_det * pm.e_over_y * w * area;
    entries.push((me, diag));

    let mut rhs = 0.0;
    if let Some(phi) = pb.rhs.weighted {
        rhs += pm.sqrt_det * w * phi(yc, &x) * area;
    }
    if let Some(psi) = pb.rhs.plain {
        let ym = grid.y_mid[j];
        let pmm = point_metric(pb.metric, n, g, ym, &x);
        rhs += pmm.sqrt_det * grid.length[j] * psi(ym, &x) * area;
    }
    let flux_factor = if j == 0 {
        point_metric(pb.metric, n, g, 0.0, &x).sqrt_det * area
    } else {
        0.0
    };
    NodeRow {
        entries,
        rhs,
        flux_factor,
    }
}

/// Discrete solution with boundary metadata.
#[derive(Clone, Debug)]
pub struct HalfGridField {
    pub gamma: f64,
    pub y: Vec<f64>,
    pub axes: Vec<XAxis>,
    /// Node values, row-major in `(j, column)`.
    pub values: Vec<f64>,
    /// Discrete `lim_{y→0} y^{1−2γ} ∂_y U` per column, from the balance of
    /// the `y = 0` cells.
    pub bottom_flux: Vec<f64>,
    pub unknowns: usize,
}

impl HalfGridField {
    pub fn columns(&self) -> usize {
        self.axes.iter().map(XAxis::nodes).product()
    }
    pub fn value(&self, j: usize, col: usize) -> f64 {
        self.values[j * self.columns() + col]
    }
    pub fn layer(&self, j: usize) -> &[f64] {
        let c = self.columns();
        &self.values[j * c..(j + 1) * c]
    }
    /// Boundary values `U(0, x)`.
    pub fn trace_values(&self) -> &[f64] {
        self.layer(0)
    }
    fn grid(&self) -> Result<HalfGrid> {
        HalfGrid::from_nodes(self.gamma, self.y.clone(), self.axes.clone())
    }

    /// Maximum of `|U − u|` over nodes accepted by `filter`.
    pub fn max_error(&self, exact: &Field<'_>, filter: impl Fn(f64, &[f64]) -> bool) -> Result<f64> {
        let grid = self.grid()?;
        let mut err: f64 = 0.0;
        for j in 0..=grid.layers() {
            for col in 0..grid.columns() {
                let x = grid.x_of(col);
                if filter(self.y[j], &x) {
                    err = err.max((self.value(j, col) - exact(self.y[j], &x)).abs());
                }
            }
        }
        Ok(err)
    }

    /// CSV with header `y,x1,…,xn,value`.
    pub fn to_csv(&self) -> Result<String> {
        let grid = self.grid()?;
        let mut s = String::from("y");
        for k in 1..=grid.n() {
            write!(s, ",x{k}").unwrap();
        }
        s.push_str(",value\n");
        for j in 0..=grid.layers() {
            for col in 0..grid.columns() {
                write!(s, "{:e}", self.y[j]).unwrap();
                for v in grid.x_of(col) {
                    write!(s, ",{v:e}").unwrap();
                }
                writeln!(s, ",{:e}", self.value(j, col)).unwrap();
            }
        }
        Ok(s)
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "gamma": self.gamma,
            "layers": self.y.len() - 1,
            "height": self.y.last(),
            "axes": self.axes,
            "unknowns": self.unknowns,
            "trace": self.trace_values(),
            "bottom_flux": self.bottom_flux,
        })
    }
}

/// Assemble and solve the scheme for `pb`.
pub fn solve_fd(grid: &HalfGrid, pb: &FdProblem) -> Result<HalfGridField> {
    if let Some(m) = pb.metric {
        if m.n != grid.n() || (m.gamma - grid.gamma).abs() > 1e-15 {
            return Err(FracError::Precondition("metric jet and grid have different (n, γ)".into()));
        }
        m.validate()?;
    }
    let nl = grid.layers();
    let cols = grid.columns();
    let total = grid.len();
    // classify nodes
    let mut fixed_value: Vec<Option<f64>> = vec![None; total];
    fixed_value.par_iter_mut().enumerate().for_each(|(idx, slot)| {
        let (j, col) = (idx / cols, idx % cols);
        let multi = grid.col_multi(col);
        let x = grid.x_of(col);
        let y = grid.y[j];
        let outer = j == nl || multi.iter().zip(&grid.axes).any(|(&i, a)| a.is_edge(i));
        if outer || pb.fixed.is_some_and(|f| f(y, &x)) {
            *slot = Some((pb.boundary)(y, &x));
        } else if j == 0 {
            if let Bottom::Dirichlet(f) = pb.bottom {
                *slot = Some(f(&x));
            }
        }
    });
    let mut unknown = vec![usize::MAX; total];
    let mut free = Vec::new();
    for (idx, v) in fixed_value.iter().enumerate() {
        if v.is_none() {
            unknown[idx] = free.len();
            free.push(idx);
        }
    }
    let nfree = free.len();
    let rows: Vec<(Vec<Triplet<usize, usize, f64>>, f64)> = free
        .par_iter()
        .enumerate()
        .map(|(r, &idx)| {
            let (j, col) = (idx / cols, idx % cols);
            let row = node_row(grid, pb, j, col);
            let mut rhs = row.rhs;
            if j == 0 {
                if let Bottom::WeightedFlux(psi) = pb.bottom {
                    rhs -= row.flux_factor * psi(&grid.x_of(col));
                }
            }
            let mut trip = Vec::with_capacity(row.entries.len());
            for (node, c) in row.entries {
                match fixed_value[node] {
                    Some(v) => rhs -= c * v,
                    None => trip.push(Triplet::new(r, unknown[node], c)),
                }
            }
            (trip, rhs)
        })
        .collect();
    let mut triplets = Vec::with_capacity(rows.iter().map(|r| r.0.len()).sum());
    let mut b = Vec::with_capacity(nfree);
    for (t, r) in rows {
        triplets.extend(t);
        b.push(r);
    }
    let mut values: Vec<f64> = fixed_value.iter().map(|v| v.unwrap_or(0.0)).collect();
    if nfree > 0 {
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(nfree, nfree, &triplets)
            .map_err(|e| FracError::Numerical(format!("sparse assembly failed: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| FracError::Numerical(format!("singular finite volume system: {e:?}")))?;
        let rhs = Col::<f64>::from_fn(nfree, |i| b[i]);
        let sol = lu.solve(&rhs);
        for (r, &idx) in free.iter().enumerate() {
            values[idx] = sol[r];
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FracError::Numerical(
                "finite volume solve produced non-finite values (singular system)".into(),
            ));
        }
    }
    let bottom_flux: Vec<f64> = (0..cols)
        .into_par_iter()
        .map(|col| {
            let x = grid.x_of(col);
            if let (Bottom::WeightedFlux(psi), None) = (pb.bottom, fixed_value[col]) {
                return psi(&x);
            }
            let row = node_row(grid, pb, 0, col);
            let l0: f64 = row.entries.iter().map(|(node, c)| c * values[*node]).sum();
            (row.rhs - l0) / row.flux_factor
        })
        .collect();
    Ok(HalfGridField {
        gamma: grid.gamma,
        y: grid.y.clone(),
        axes: grid.axes.clone(),
        values,
        bottom_flux,
        unknowns: nfree,
    })
}

/// Dirichlet problem `D_g U = rhs`, `U = f` on `y = 0`, `U = outer` elsewhere.
pub fn solve_dirichlet_fd(
    grid: &HalfGrid,
    metric: Option<&MetricJet>,
    f: &BoundaryFn<'_>,
    outer: &Field<'_>,
    rhs: Rhs,
) -> Result<HalfGridField> {
    solve_fd(
        grid,
        &FdProblem {
            metric,
            bottom: Bottom::Dirichlet(f),
            boundary: outer,
            fixed: None,
            rhs,
        },
    )
}

/// Weighted Neumann problem `lim y^{1−2γ}∂_y U = flux` on `y = 0`.
pub fn solve_neumann_fd(
    grid: &HalfGrid,
    metric: Option<&MetricJet>,
    flux: &BoundaryFn<'_>,
    outer: &Field<'_>,
    rhs: Rhs,
) -> Result<HalfGridField> {
    solve_fd(
        grid,
        &FdProblem {
            metric,
            bottom: Bottom::WeightedFlux(flux),
            boundary: outer,
            fixed: None,
            rhs,
        },
    )
}

/// Near-boundary fit `U ≈ A₀ + B₀ y^{2γ} + A₂ y²` per column.
#[derive(Clone, Debug, Serialize)]
pub struct TraceFit {
    pub a0: Vec<f64>,
    pub b0: Vec<f64>,
    /// `−d_γ B₀`.
    pub trace: Vec<f64>,
    /// Largest least-squares residual over the columns.
    pub max_fit_residual: f64,
}

fn column_fit(
    field: &HalfGridField,
    col: usize,
    layers: usize,
    basis: &dyn Fn(f64) -> Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let last = layers.min(field.y.len() - 2);
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for j in 2..=last {
        rows.push(basis(field.y[j]));
        b.push(field.value(j, col));
    }
    least_squares(&rows, &b).ok_or_else(|| {
        FracError::Numerical(format!(
            "near-boundary fit is ill-conditioned on layers 2..{last}; refine the grid near y = 0"
        ))
    })
}

/// Fractional trace `−d_γ B₀` from a fit over layers `2..=layers`.
///
/// The fit includes a `y²` term: for `γ > 1/2` it lies only `y^{2−2γ}` above
/// the `y^{2γ}` branch and would otherwise bias `B₀`.
pub fn fractional_trace(field: &HalfGridField, d_gamma: f64, layers: usize) -> Result<TraceFit> {
    let tg = 2.0 * field.gamma;
    let basis = move |y: f64| vec![1.0, y.powf(tg), y * y];
    if layers < 4 {
        return Err(FracError::config("fit_layers", "at least 4", layers));
    }
    let fits: Vec<_> = (0..field.columns())
        .into_par_iter()
        .map(|c| column_fit(field, c, layers, &basis))
        .collect::<Result<_>>()?;
    Ok(TraceFit {
        a0: fits.iter().map(|f| f.0[0]).collect(),
        b0: fits.iter().map(|f| f.0[1]).collect(),
        trace: fits.iter().map(|f| -d_gamma * f.0[1]).collect(),
        max_fit_residual: fits.iter().map(|f| f.2).fold(0.0, f64::max),
    })
}

/// Trace from the conservative bottom flux: `−d*_γ lim y^{1−2γ}∂_y U`.
pub fn flux_trace(field: &HalfGridField, d_star_gamma: f64) -> Vec<f64> {
    field.bottom_flux.iter().map(|q| -d_star_gamma * q).collect()
}

/// `(−Δ)^γ f` on the discrete torus via the multiplier `|ξ|^{2γ}`.
pub fn fourier_fractional_oracle(values: &[f64], axes: &[XAxis], gamma: f64) -> Result<Vec<f64>> {
    if axes.iter().any(|a| !a.is_periodic()) {
        return Err(FracError::Precondition("the Fourier oracle needs periodic axes".into()));
    }
    let total: usize = axes.iter().map(XAxis::nodes).product();
    if values.len() != total {
        return Err(FracError::Precondition(format!(
            "{} samples for a torus with {total} nodes",
            values.len()
        )));
    }
    let n = axes.len();
    let mut strides = vec![1; n];
    for k in (0..n - 1).rev() {
        strides[k] = strides[k + 1] * axes[k + 1].nodes();
    }
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let transform = |data: &mut Vec<Complex<f64>>, planner: &mut FftPlanner<f64>, inverse: bool| {
        for k in 0..n {
            let m = axes[k].nodes();
            let fft = if inverse {
                planner.plan_fft_inverse(m)
            } else {
                planner.plan_fft_forward(m)
            };
            let mut line = vec![Complex::new(0.0, 0.0); m];
            for start in 0..total {
                if (start / strides[k]) % m != 0 {
                    continue;
                }
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * strides[k]];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * strides[k]] = *v;
                }
            }
        }
    };
    transform(&mut data, &mut planner, false);
    for (idx, v) in data.iter_mut().enumerate() {
        let mut xi2 = 0.0;
        for k in 0..n {
            let m = axes[k].nodes();
            let i = (idx / strides[k]) % m;
            let signed = if i <= m / 2 { i as f64 } else { i as f64 - m as f64 };
            let len = match axes[k] {
                XAxis::Periodic { length, .. } => length,
                XAxis::Boxed { .. } => unreachable!(),
            };
            xi2 += (2.0 * std::f64::consts::PI * signed / len).powi(2);
        }
        *v *= xi2.powf(gamma);
    }
    transform(&mut data, &mut planner, true);
    Ok(data.iter().map(|c| c.re / total as f64).collect())
}

/// Relative L² distance `|a − b| / |b|`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    let den: f64 = b.iter().map(|q| q * q).sum();
    (num / den).sqrt()
}

/// Fit `U ≈ A₀ + A₁y + B₀y^{2γ} + A₂y² + B₂y^{2+2γ}` near `y = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct LinearTermReport {
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
    pub b0: Vec<f64>,
    /// Standard error of `A₁`: the fit error, combined with the change of
    /// `A₁` under halving of the `y` mesh when a coarse field is supplied.
    pub a1_sigma: Vec<f64>,
    /// `max |A₁| / σ(A₁)` over the columns.
    pub max_a1_over_sigma: f64,
    /// `max |A₁|`.
    pub max_abs_a1: f64,
    pub a1_within_3_sigma: bool,
}

fn linear_term_fits(field: &HalfGridField, layers: usize) -> Result<Vec<(Vec<f64>, Vec<f64>, f64)>> {
    let tg = 2.0 * field.gamma;
    let basis = move |y: f64| vec![1.0, y, y.powf(tg), y * y, y.powf(2.0 + tg)];
    if layers < 7 {
        return Err(FracError::config("fit_layers", "at least 7", layers));
    }
    (0..field.columns())
        .into_par_iter()
        .map(|c| column_fit(field, c, layers, &basis))
        .collect()
}

fn linear_term_report(fits: Vec<(Vec<f64>, Vec<f64>, f64)>, sigma: Vec<f64>) -> LinearTermReport {
    let mut ratio: f64 = 0.0;
    let mut ok = true;
    for (f, &s) in fits.iter().zip(&sigma) {
        let a1 = f.0[1].abs();
        if s > 0.0 {
            ratio = ratio.max(a1 / s);
        }
        // an exact fit (zero residual) needs A₁ = 0 to round-off
        if a1 > 3.0 * s && a1 > 1e-10 * f.0[0].abs().max(f.0[2].abs()).max(1e-300) {
            ok = false;
        }
    }
    LinearTermReport {
        a0: fits.iter().map(|f| f.0[0]).collect(),
        a1: fits.iter().map(|f| f.0[1]).collect(),
        b0: fits.iter().map(|f| f.0[2]).collect(),
        max_abs_a1: fits.iter().map(|f| f.0[1].abs()).fold(0.0, f64::max),
        a1_sigma: sigma,
        max_a1_over_sigma: ratio,
        a1_within_3_sigma: ok,
    }
}

/// Single-grid fit; `σ(A₁)` is the least-squares standard error only.
pub fn linear_term_check(field: &HalfGridField, layers: usize) -> Result<LinearTermReport> {
    let fits = linear_term_fits(field, layers)?;
    let sigma = fits.iter().map(|f| f.1[1]).collect();
    Ok(linear_term_report(fits, sigma))
}

/// Fit on `fine`, whose `y` mesh halves every interval of `coarse`, over
/// the same physical window (`layers` coarse layers). `σ(A₁)` adds the
/// coarse-to-fine change of `A₁` to the fit error.
pub fn linear_term_refined_check(coarse: &HalfGridField, fine: &HalfGridField, layers: usize) -> Result<LinearTermReport> {
    let nested = fine.y.len() == 2 * coarse.y.len() - 1
        && coarse.y.iter().enumerate().all(|(j, y)| (fine.y[2 * j] - y).abs() <= 1e-12 * y.max(1.0));
    if !nested || fine.columns() != coarse.columns() {
        return Err(FracError::config(
            "grid",
            "a fine grid halving every y interval of the coarse grid, same columns",
            format!("{} and {} y-nodes", coarse.y.len(), fine.y.len()),
        ));
    }
    let fc = linear_term_fits(coarse, layers)?;
    let ff = linear_term_fits(fine, 2 * layers)?;
    let sigma = ff
        .iter()
        .zip(&fc)
        .map(|(f, c)| f.1[1].hypot(f.0[1] - c.0[1]))
        .collect();
    Ok(linear_term_report(ff, sigma))
}

/// Observed order from `(h, error)` pairs (log-log slope).
pub fn observed_order(samples: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = samples.iter().map(|(h, e)| (h.ln(), e.ln())).collect();
    fit_slope(&pts)
}

/// Richardson estimate of the order from three nested solutions sampled at
/// the same points (coarse, medium, fine) with refinement ratio 2.
pub fn richardson_order(coarse: &[f64], medium: &[f64], fine: &[f64]) -> f64 {
    let d1: f64 = coarse.iter().zip(medium).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let d2: f64 = medium.iter().zip(fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (d1 / d2).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(gamma: f64, nx: usize, layers: usize) -> HalfGrid {
        HalfGrid::new(&GridSpec {
            gamma,
            height: 2.0,
            layers,
            grading: None,
            axes: vec![XAxis::Boxed {
                nodes: nx,
                lo: -1.0,
                hi: 1.0,
            }],
        })
        .unwrap()
    }

    #[test]
    fn constants_are_reproduced() {
        let g = grid1(0.3, 9, 12);
        let u = solve_dirichlet_fd(&g, None, &|_| 1.0, &|_, _| 1.0, Rhs::default()).unwrap();
        assert!(u.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(u.bottom_flux.iter().all(|q| q.abs() < 1e-9));
    }

    #[test]
    fn neumann_zero_flux_constant() {
        let g = grid1(0.7, 9, 12);
        let u = solve_neumann_fd(&g, None, &|_| 0.0, &|_, _| 1.0, Rhs::default()).unwrap();
        assert!(u.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn y_two_gamma_is_exact_with_flux_two_gamma() {
        for gamma in [0.25, 0.75] {
            let tg = 2.0 * gamma;
            let g = grid1(gamma, 7, 10);
            let exact = move |y: f64, _: &[f64]| y.powf(tg);
            let u = solve_dirichlet_fd(&g, None, &|_| 0.0, &exact, Rhs::default()).unwrap();
            assert!(u.max_error(&exact, |_, _| true).unwrap() < 1e-12);
            // interior columns have flux 2γ
            for col in 1..6 {
                assert!((u.bottom_flux[col] - tg).abs() < 1e-9, "{}", u.bottom_flux[col]);
            }
        }
    }

    #[test]
    fn exact_fit_recovers_trace() {
        let gamma = 0.3;
        let g = grid1(gamma, 5, 20);
        let mut values = vec![0.0; g.len()];
        for j in 0..=g.layers() {
            for c in 0..g.columns() {
                values[g.index(j, c)] = 3.0 + 5.0 * g.y[j].powf(2.0 * gamma);
            }
        }
        let field = HalfGridField {
            gamma,
            y: g.y.clone(),
            axes: g.axes.clone(),
            values,
            bottom_flux: vec![0.0; 5],
            unknowns: 0,
        };
        let t = fractional_trace(&field, 1.7, 6).unwrap();
        assert!(t.trace.iter().all(|v| (v + 5.0 * 1.7).abs() < 1e-10));
        let p = linear_term_check(&field, 8).unwrap();
        assert!(p.a1_within_3_sigma);
        assert!(p.a0.iter().all(|a| (a - 3.0).abs() < 1e-10));
    }

    #[test]
    fn fourier_oracle_multiplier() {
        let axes = vec![XAxis::Periodic {
            nodes: 32,
            length: 2.0 * std::f64::consts::PI,
        }];
        let gamma = 0.3;
        let xs: Vec<f64> = (0..32).map(|i| axes[0].coord(i)).collect();
        let f: Vec<f64> = xs.iter().map(|x| (2.0 * x).cos() + 4.0).collect();
        let out = fourier_fractional_oracle(&f, &axes, gamma).unwrap();
        for (x, v) in xs.iter().zip(&out) {
            assert!((v - 2f64.powf(2.0 * gamma) * (2.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn maximum_principle_on_random_data() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = grid1(0.35, 11, 10);
        let data: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let bottom = |x: &[f64]| data[((x[0] + 1.0) * 5.0).round() as usize];
        let outer = |y: f64, x: &[f64]| data[50 + ((x[0] + 1.0) * 5.0 + 13.0 * y).round() as usize];
        let u = solve_dirichlet_fd(&g, None, &bottom, &outer, Rhs::default()).unwrap();
        let (lo, hi) = data.iter().fold((f64::MAX, f64::MIN), |a, v| (a.0.min(*v), a.1.max(*v)));
        assert!(u.values.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
    }
}
