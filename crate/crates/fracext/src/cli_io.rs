//! Run configuration, exports and the report plumbing behind the command
//! line front end.
//!
//! A configuration is a JSON object; unknown keys are rejected and every
//! error names the offending field.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::degenerate_fd::{GridSpec, HalfGridField};
use crate::error::{FracError, Result};
use crate::expansion_engine::{KernelExpansion, KernelKind};
use crate::flat_kernels::{CalibrationOptions, ConstantSet};
use crate::hemisphere_spectral::Sector;
use crate::metric_model::MetricJet;
use crate::verify::{Tolerances, VerifyOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Csv,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(FracError::config("format", "\"json\" or \"csv\"", other)),
        }
    }
}

/// Bottom condition of a finite volume run: `Σ a cos(k·x)` as Dirichlet
/// data or as the weighted flux `lim y^{1−2γ}∂_y U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryData {
    pub kind: BoundaryKind,
    pub modes: Vec<Mode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Flux,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    /// Wave vector.
    pub k: Vec<f64>,
    pub amplitude: f64,
}

impl BoundaryData {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amplitude * m.k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>().cos())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub order: Option<u32>,
    pub kind: Option<KernelKind>,
    pub sector: Option<Sector>,
    pub metric: Option<MetricJet>,
    pub grid: Option<GridSpec>,
    pub boundary: Option<BoundaryData>,
    pub fit_layers: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub calibration: CalibrationOptions,
    pub output: Option<PathBuf>,
    pub format: ExportFormat,
    pub only: Vec<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: None,
            gamma: None,
            order: None,
            kind: None,
            sector: None,
            metric: None,
            grid: None,
            boundary: None,
            fit_layers: 6,
            seed: VerifyOptions::default().seed,
            tolerances: Tolerances::default(),
            calibration: CalibrationOptions::default(),
            output: None,
            format: ExportFormat::Json,
            only: Vec::new(),
        }
    }
}

const KNOWN_KEYS: [&str; 15] = [
    "n",
    "gamma",
    "order",
    "kind",
    "sector",
    "metric",
    "grid",
    "boundary",
    "fit_layers",
    "seed",
    "tolerances",
    "calibration",
    "output",
    "format",
    "only",
];

fn check_gamma(g: f64) -> Result<f64> {
    if g == 0.5 {
        return Err(FracError::GammaHalf);
    }
    if !(g > 0.0 && g < 1.0) {
        return Err(FracError::config("gamma", "a number in (0, 1) other than 1/2", g));
    }
    Ok(g)
}

fn typed<T: for<'de> Deserialize<'de>>(v: &Value, field: &str, expected: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| FracError::config(field, expected, format!("{v} ({e})")))
}

/// Parse a configuration document. `base_dir` resolves a metric given as a
/// relative path.
pub fn parse_config(v: &Value, base_dir: Option<&Path>) -> Result<RunConfig> {
    let obj: &Map<String, Value> = v
        .as_object()
        .ok_or_else(|| FracError::config("config", "a JSON object", v))?;
    if let Some(k) = obj.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(FracError::config(
            k.as_str(),
            format!("one of the keys {}", KNOWN_KEYS.join(", ")),
            "an unknown key",
        ));
    }
    let mut cfg = RunConfig::default();
    if let Some(x) = obj.get("n") {
        let n = x
            .as_u64()
            .filter(|&n| (1..=8).contains(&n))
            .ok_or_else(|| FracError::config("n", "an integer in 1..=8", x))?;
        cfg.n = Some(n as usize);
    }
    if let Some(x) = obj.get("gamma") {
        let g = x.as_f64().ok_or_else(|| FracError::config("gamma", "a number", x))?;
        cfg.gamma = Some(check_gamma(g)?);
    }
    if let Some(x) = obj.get("order") {
        let m = x
            .as_u64()
            .filter(|&m| m <= 16)
            .ok_or_else(|| FracError::config("order", "an integer in 0..=16", x))?;
        cfg.order = Some(m as u32);
    }
    if let Some(x) = obj.get("kind") {
        let s = x.as_str().ok_or_else(|| FracError::config("kind", "a string", x))?;
        cfg.kind = Some(KernelKind::parse(s)?);
    }
    if let Some(x) = obj.get("sector") {
        let s = x.as_str().ok_or_else(|| FracError::config("sector", "a string", x))?;
        cfg.sector = Some(Sector::parse(s)?);
    }
    if let Some(x) = obj.get("metric") {
        let doc = match x {
            Value::String(p) => {
                let path = match base_dir {
                    Some(d) if Path::new(p).is_relative() => d.join(p),
                    _ => PathBuf::from(p),
                };
                read_json(&path)?
            }
            Value::Object(_) => x.clone(),
            other => return Err(FracError::config("metric", "a file path or a metric object", other)),
        };
        cfg.metric = Some(MetricJet::from_json(&doc)?);
    }
    if let Some(x) = obj.get("grid") {
        let g: GridSpec = typed(x, "grid", "{gamma, height, layers, grading?, axes}")?;
        check_gamma(g.gamma)?;
        cfg.grid = Some(g);
    }
    if let Some(x) = obj.get("boundary") {
        cfg.boundary = Some(typed(x, "boundary", "{kind: \"dirichlet\"|\"flux\", modes: [{k, amplitude}]}")?);
    }
    if let Some(x) = obj.get("fit_layers") {
        cfg.fit_layers = x
            .as_u64()
            .filter(|&l| l >= 4)
            .ok_or_else(|| FracError::config("fit_layers", "an integer ≥ 4", x))? as usize;
    }
    if let Some(x) = obj.get("seed") {
        cfg.seed = x.as_u64().ok_or_else(|| FracError::config("seed", "a non-negative integer", x))?;
    }
    if let Some(x) = obj.get("tolerances") {
        cfg.tolerances = typed(x, "tolerances", "an object of named tolerances")?;
    }
    if let Some(x) = obj.get("calibration") {
        cfg.calibration = typed(x, "calibration", "{nx, layers, height, fit_layers, nx_2d, layers_2d}")?;
    }
    if let Some(x) = obj.get("output") {
        let s = x.as_str().ok_or_else(|| FracError::config("output", "a file path", x))?;
        cfg.output = Some(PathBuf::from(s));
    }
    if let Some(x) = obj.get("format") {
        let s = x.as_str().ok_or_else(|| FracError::config("format", "a string", x))?;
        cfg.format = ExportFormat::parse(s)?;
    }
    if let Some(x) = obj.get("only") {
        cfg.only = typed(x, "only", "an array of criterion ids")?;
        if let Some(bad) = cfg.only.iter().find(|i| !(1..=10).contains(*i)) {
            return Err(FracError::config("only", "criterion ids in 1..=10", bad));
        }
    }
    if let (Some(m), Some(n)) = (&cfg.metric, cfg.n) {
        if m.n != n {
            return Err(FracError::config("metric.n", format!("{n} (the configured n)"), m.n));
        }
    }
    Ok(cfg)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FracError::config("path", "a readable file", format!("{} ({e})", path.display())))?;
    serde_json::from_str(&text).map_err(|e| FracError::config(path.display().to_string(), "valid JSON", e))
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&read_json(path)?, path.parent())
}

impl RunConfig {
    pub fn require_n(&self) -> Result<usize> {
        self.n
            .or(self.metric.as_ref().map(|m| m.n))
            .ok_or_else(|| FracError::config("n", "a positive integer", "nothing"))
    }

    pub fn require_gamma(&self) -> Result<f64> {
        self.gamma
            .or(self.metric.as_ref().map(|m| m.gamma))
            .ok_or_else(|| FracError::config("gamma", "a number in (0, 1) other than 1/2", "nothing"))
    }

    pub fn require_order(&self) -> Result<u32> {
        self.order
            .ok_or_else(|| FracError::config("order", "a non-negative integer", "nothing"))
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            seed: self.seed,
            only: self.only.clone(),
            calibration: self.calibration.clone(),
            tolerances: self.tolerances.clone(),
            ..VerifyOptions::default()
        }
    }
}

/// Expansion as JSON, or CSV rows `term,homogeneity,y_exp,x_multi,r_exp,coefficient`.
pub fn export_expansion(e: &KernelExpansion, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => Ok(serde_json::to_string_pretty(&e.to_json())?),
        ExportFormat::Csv => {
            let mut s = String::from("term,homogeneity,y_exp,x_multi,r_exp,coefficient\n");
            let base_h = e.base_degree()?;
            let all = std::iter::once(("base".to_string(), base_h, &e.base)).chain(
                e.corrections
                    .iter()
                    .enumerate()
                    .map(|(i, (h, t))| (format!("correction{}", i + 1), *h, t)),
            );
            for (label, h, t) in all {
                for (k, c) in t.terms() {
                    let beta: Vec<String> = k.x_multi.iter().map(u32::to_string).collect();
                    let _ = writeln!(s, "{label},{h},{},{},{},{c:e}", k.y_exp, beta.join(" "), k.r_exp);
                }
            }
            Ok(s)
        }
    }
}

pub fn export_field(field: &HalfGridField, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Csv => field.to_csv(),
        ExportFormat::Json => Ok(serde_json::to_string_pretty(&field.summary_json())?),
    }
}

/// Constants with their calibration residuals, as JSON or `name,value` CSV.
pub fn export_constants(c: &ConstantSet, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => Ok(serde_json::to_string_pretty(c)?),
        ExportFormat::Csv => {
            let r = &c.residuals;
            let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
            let mut s = String::from("name,value\n");
            for (name, v) in [
                ("n", c.n.to_string()),
                ("gamma", c.gamma.to_string()),
                ("c_n3", format!("{:e}", c.c_n3)),
                ("p_n_gamma", format!("{:e}", c.p_n_gamma)),
                ("d_gamma", format!("{:e}", c.d_gamma)),
                ("d_star_gamma", format!("{:e}", c.d_star_gamma)),
                ("g_n_gamma", opt(c.g_n_gamma)),
                ("residual_c_n3_oracle", format!("{:e}", r.c_n3_oracle)),
                ("residual_d_gamma_fit", opt(r.d_gamma_fit)),
                ("residual_trace_vs_fourier", opt(r.trace_vs_fourier)),
                ("residual_flux_spread", format!("{:e}", r.flux_spread)),
            ] {
                let _ = writeln!(s, "{name},{v}");
            }
            Ok(s)
        }
    }
}

/// Write to `path`, or to standard output when `path` is `None`.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, content)?),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{content}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

/// Error document printed by the front end on failure.
pub fn error_json(e: &FracError) -> Value {
    let mut v = json!({"error": e.to_string(), "exit_code": e.exit_code()});
    if let FracError::Solver {
        remainder: Some(r), ..
    } = e
    {
        v["remainder"] = r.clone();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config(&json!({"n": 2, "gamma": 0.25}), None).unwrap();
        assert_eq!(c.n, Some(2));
        assert_eq!(c.fit_layers, 6);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.format, ExportFormat::Json);
        assert!(c.order.is_none());
    }

    #[test]
    fn gamma_one_half_is_rejected() {
        let e = parse_config(&json!({"n": 1, "gamma": 0.5}), None).unwrap_err();
        assert!(matches!(e, FracError::GammaHalf));
        assert!(e.to_string().contains("1/2"));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(&json!({"n": 1, "gama": 0.3}), None).unwrap_err();
        assert!(e.to_string().contains("`gama`"), "{e}");
    }

    #[test]
    fn malformed_matrix_names_its_index() {
        let doc = json!({"metric": {"n": 2, "gamma": 0.3, "order": 3, "type": "jet",
            "coefficients": [
                {"y_pow": 2, "beta": [0, 0], "matrix": [[1.0, 0.0], [0.0, 1.0]]},
                {"y_pow": 3, "beta": [0, 0], "matrix": [[1.0, 0.0]]}
            ]}});
        let e = parse_config(&doc, None).unwrap_err();
        assert!(e.to_string().contains("coefficients[1].matrix"), "{e}");
    }

    #[test]
    fn boundary_modes_evaluate() {
        let b: BoundaryData =
            serde_json::from_value(json!({"kind": "dirichlet", "modes": [{"k": [1.0], "amplitude": 2.0}]})).unwrap();
        assert!((b.eval(&[0.0]) - 2.0).abs() < 1e-15);
    }
}
