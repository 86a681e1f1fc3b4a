use std::fs;

use fracext::cli_io::{
    export_constants, export_expansion, load_config, parse_config, write_output, BoundaryKind, ExportFormat,
};
use fracext::expansion_engine::{expand_poisson, required_jet_order, KernelExpansion, KernelKind};
use fracext::flat_kernels::{constants_with_d_gamma, FracConfig};
use fracext::metric_model::MetricJet;
use fracext::FracError;
use serde_json::json;

fn err(v: serde_json::Value) -> String {
    parse_config(&v, None).unwrap_err().to_string()
}

#[test]
fn field_errors_name_the_field() {
    assert!(err(json!({"n": 0})).contains("`n`"));
    assert!(err(json!({"n": "two"})).contains("`n`"));
    assert!(err(json!({"gamma": 1.5})).contains("`gamma`"));
    assert!(err(json!({"order": -1})).contains("`order`"));
    assert!(err(json!({"kind": "heat"})).contains("kind"));
    assert!(err(json!({"sector": "robin"})).contains("`sector`"));
    assert!(err(json!({"format": "xml"})).contains("`format`"));
    assert!(err(json!({"only": [0, 3]})).contains("`only`"));
    assert!(err(json!({"fit_layers": 2})).contains("`fit_layers`"));
    assert!(err(json!({"tolerances": {"poisson_mass": 1e-3, "slope": 1.0}})).contains("`tolerances`"));
    assert!(err(json!({"grid": {"gamma": 0.3, "height": 1.0, "layers": 10, "axes": [], "depth": 2}})).contains("`grid`"));
    assert!(err(json!({"boundary": {"kind": "dirichlet"}})).contains("`boundary`"));
    assert!(err(json!([1, 2])).contains("`config`"));
}

#[test]
fn gamma_one_half_is_rejected_everywhere() {
    let half = |v| matches!(parse_config(&v, None), Err(FracError::GammaHalf));
    assert!(half(json!({"gamma": 0.5})));
    assert!(half(json!({"grid": {"gamma": 0.5, "height": 1.0, "layers": 10, "axes": []}})));
    assert!(half(json!({"metric": {"n": 1, "gamma": 0.5, "order": 2, "type": "jet", "coefficients": []}})));
}

#[test]
fn required_fields_have_no_silent_defaults() {
    let cfg = parse_config(&json!({}), None).unwrap();
    assert!(cfg.require_n().unwrap_err().to_string().contains("`n`"));
    assert!(cfg.require_gamma().unwrap_err().to_string().contains("`gamma`"));
    assert!(cfg.require_order().unwrap_err().to_string().contains("`order`"));
}

#[test]
fn metric_dimension_must_match() {
    let jet = MetricJet::flat(2, 0.3, 3).unwrap();
    let e = err(json!({"n": 3, "metric": jet.to_json()}));
    assert!(e.contains("metric.n"), "{e}");
}

#[test]
fn metric_is_loaded_relative_to_the_config() {
    let dir = std::env::temp_dir().join(format!("fracext-config-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let jet = MetricJet::y2s(2, 0.25, 4, vec![vec![0.5, 0.0], vec![0.0, 0.2]]).unwrap();
    fs::write(dir.join("jet.json"), jet.to_json().to_string()).unwrap();
    let cfg_path = dir.join("run.json");
    fs::write(
        &cfg_path,
        json!({"metric": "jet.json", "kind": "poisson", "order": 1,
               "boundary": {"kind": "flux", "modes": [{"k": [1.0, 0.0], "amplitude": 0.5}]}})
        .to_string(),
    )
    .unwrap();
    let cfg = load_config(&cfg_path).unwrap();
    assert_eq!(cfg.require_n().unwrap(), 2);
    assert_eq!(cfg.require_gamma().unwrap(), 0.25);
    assert_eq!(cfg.kind, Some(KernelKind::Poisson));
    assert_eq!(cfg.boundary.unwrap().kind, BoundaryKind::Flux);
    assert_eq!(cfg.metric.unwrap().to_json(), jet.to_json());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_file_is_a_config_error() {
    let e = load_config(std::path::Path::new("/nonexistent/run.json")).unwrap_err();
    assert_eq!(e.exit_code(), 3);
}

fn sample_expansion() -> KernelExpansion {
    let jet = MetricJet::pe_locally_flat_random(2, 0.3, required_jet_order(KernelKind::Poisson, 2, 1), 0.3, 9).unwrap();
    expand_poisson(&jet, 1).unwrap()
}

#[test]
fn exported_expansion_round_trips() {
    let e = sample_expansion();
    let text = export_expansion(&e, ExportFormat::Json).unwrap();
    let back = KernelExpansion::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.corrections, e.corrections);
    assert_eq!(back.base, e.base);
}

#[test]
fn csv_export_lists_every_atom() {
    let e = sample_expansion();
    let csv = export_expansion(&e, ExportFormat::Csv).unwrap();
    let atoms = e.base.len() + e.corrections.iter().map(|(_, t)| t.len()).sum::<usize>();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "term,homogeneity,y_exp,x_multi,r_exp,coefficient");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), atoms);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
}

#[test]
fn constants_export_formats() {
    let c = constants_with_d_gamma(&FracConfig::new(2, 0.25).unwrap(), 1.0).unwrap();
    let csv = export_constants(&c, ExportFormat::Csv).unwrap();
    assert!(csv.starts_with("name,value\n"));
    assert!(csv.contains("c_n3,"));
    let v: serde_json::Value = serde_json::from_str(&export_constants(&c, ExportFormat::Json).unwrap()).unwrap();
    assert_eq!(v["n"], 2);
    assert!(v["c_n3"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_goes_to_the_requested_file() {
    let path = std::env::temp_dir().join(format!("fracext-out-{}.txt", std::process::id()));
    write_output(Some(&path), "payload").unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "payload");
    fs::remove_file(&path).unwrap();
}
