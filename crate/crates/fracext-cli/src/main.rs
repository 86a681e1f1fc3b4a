//! `fracext` command line front end.
//!
//! Exit codes: 0 success, 2 an invariant or tolerance check failed,
//! 3 invalid configuration, 4 solver or numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fracext::cli_io::{
    error_json, export_constants, export_expansion, export_field, load_config, read_json, write_output, BoundaryKind,
    ExportFormat, RunConfig,
};
use fracext::degenerate_fd::{
    fourier_fractional_oracle, fractional_trace, relative_l2, solve_dirichlet_fd, solve_neumann_fd, HalfGrid,
    HalfGridField, Rhs,
};
use fracext::expansion_engine::{
    expand_boundary_green, expand_green_neumann, expand_poisson, required_jet_order, residual_decay_check, KernelKind,
};
use fracext::flat_kernels::{calibrate_constants, calibrate_d_gamma, constants_with_d_gamma, ConstantSet, FracConfig};
use fracext::hemisphere_spectral::{build_harmonics, Sector};
use fracext::homogeneous_solver::{solve_homogeneous, solve_homogeneous_projected};
use fracext::metric_model::MetricJet;
use fracext::verify::{convolution_samples, harmonic_defects, run_verify, vanishes};
use fracext::{AtomSum, Context, FracError, Rational, Result};

#[derive(Parser)]
#[command(name = "fracext", version, about = "Kernel expansions for degenerate extension operators")]
struct Cli {
    /// JSON run configuration; command line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// `json` or `csv`.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Dims {
    #[arg(long)]
    n: Option<usize>,
    /// Decimal, or `p/q` for exact rational arithmetic where supported.
    #[arg(long)]
    gamma: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Flat constants, with the finite volume calibration of d_γ.
    Constants(Dims),
    /// D-harmonic polynomials of degree m in one sector.
    Harmonics {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        sector: Option<String>,
        #[arg(long)]
        m: Option<u32>,
    },
    /// Solve D u = f for a homogeneous atom sum read from a JSON file.
    SolveHomogeneous {
        input: PathBuf,
        #[arg(long)]
        sector: Option<String>,
        /// Fall back to the least-squares solver when no exact atom sum exists.
        #[arg(long)]
        projected: bool,
    },
    /// Expansion of a kernel to a given order.
    Expand {
        #[command(flatten)]
        dims: Dims,
        /// `poisson`, `green_neumann` or `boundary_green`.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        order: Option<u32>,
        /// Metric jet file; a random locally flat PE jet is drawn otherwise.
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Green constant; calibrated when absent.
        #[arg(long)]
        g: Option<f64>,
        /// Also measure the decay of the residual.
        #[arg(long)]
        check: bool,
    },
    /// Finite volume solve of the boundary problem in the configuration.
    FdSolve,
    /// Fractional trace of a finite volume solve against the Fourier multiplier.
    Trace {
        /// Calibrated when absent.
        #[arg(long)]
        d_gamma: Option<f64>,
    },
    /// Convolution of the flat boundary Green function with the Poisson kernel.
    Convolve {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        g: Option<f64>,
    },
    /// Run the acceptance criteria.
    Verify {
        /// Comma separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

struct Outcome {
    passed: bool,
    content: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) if o.passed => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("FRACEXT_THREADS") else {
        return Ok(());
    };
    let k: usize = v
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| FracError::config("FRACEXT_THREADS", "a positive integer", &v))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| FracError::Precondition(e.to_string()))
}

fn parse_gamma(s: &str) -> Result<f64> {
    let g = match s.split_once('/') {
        Some((p, q)) => match (p.trim().parse::<f64>(), q.trim().parse::<f64>()) {
            (Ok(p), Ok(q)) if q != 0.0 => p / q,
            _ => return Err(FracError::config("gamma", "a number or p/q", s)),
        },
        None => s.parse().map_err(|_| FracError::config("gamma", "a number or p/q", s))?,
    };
    if g == 0.5 {
        return Err(FracError::GammaHalf);
    }
    Ok(g)
}

fn apply_dims(cfg: &mut RunConfig, dims: &Dims) -> Result<()> {
    if let Some(n) = dims.n {
        cfg.n = Some(n);
    }
    if let Some(g) = &dims.gamma {
        cfg.gamma = Some(parse_gamma(g)?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    if let Some(f) = &cli.format {
        cfg.format = ExportFormat::parse(f)?;
    }
    let outcome = match &cli.command {
        Command::Constants(dims) => {
            apply_dims(&mut cfg, dims)?;
            constants(&cfg)?
        }
        Command::Harmonics { dims, sector, m } => {
            apply_dims(&mut cfg, dims)?;
            if let Some(s) = sector {
                cfg.sector = Some(Sector::parse(s)?);
            }
            if let Some(m) = m {
                cfg.order = Some(*m);
            }
            harmonics(&cfg, dims.gamma.as_deref())?
        }
        Command::SolveHomogeneous {
            input,
            sector,
            projected,
        } => {
            if let Some(s) = sector {
                cfg.sector = Some(Sector::parse(s)?);
            }
            solve(&cfg, input, *projected)?
        }
        Command::Expand {
            dims,
            kind,
            order,
            metric,
            g,
            check,
        } => {
            apply_dims(&mut cfg, dims)?;
            if let Some(k) = kind {
                cfg.kind = Some(KernelKind::parse(k)?);
            }
            if let Some(m) = order {
                cfg.order = Some(*m);
            }
            if let Some(p) = metric {
                cfg.metric = Some(MetricJet::from_json(&read_json(p)?)?);
            }
            expand(&cfg, *g, *check)?
        }
        Command::FdSolve => {
            let (_, field) = fd_solve(&cfg)?;
            Outcome {
                passed: true,
                content: export_field(&field, cfg.format)?,
            }
        }
        Command::Trace { d_gamma } => trace(&cfg, *d_gamma)?,
        Command::Convolve { dims, g } => {
            apply_dims(&mut cfg, dims)?;
            convolve(&cfg, *g)?
        }
        Command::Verify { only } => {
            if let Some(bad) = only.iter().find(|i| !(1..=10).contains(*i)) {
                return Err(FracError::config("only", "criterion ids in 1..=10", bad));
            }
            if !only.is_empty() {
                cfg.only = only.clone();
            }
            let report = run_verify(&cfg.verify_options());
            eprintln!("{}", report.summary());
            Outcome {
                passed: report.passed,
                content: serde_json::to_string_pretty(&report)?,
            }
        }
    };
    write_output(cfg.output.as_deref(), &outcome.content)?;
    Ok(outcome)
}

fn calibrated_constants(cfg: &RunConfig) -> Result<ConstantSet> {
    let fc = FracConfig::new(cfg.require_n()?, cfg.require_gamma()?)?;
    if fc.n <= 2 {
        calibrate_constants(&fc, &cfg.calibration)
    } else {
        let (d, _) = calibrate_d_gamma(fc.gamma, &cfg.calibration)?;
        constants_with_d_gamma(&fc, d)
    }
}

fn green_constant(cfg: &RunConfig, given: Option<f64>) -> Result<f64> {
    if let Some(g) = given {
        return Ok(g);
    }
    let n = cfg.require_n()?;
    let gamma = cfg.require_gamma()?;
    let (d, _) = calibrate_d_gamma(gamma, &cfg.calibration)?;
    constants_with_d_gamma(&FracConfig::new(n, gamma)?, d)?
        .g_n_gamma
        .ok_or_else(|| FracError::Precondition(format!("no Green constant for n = {n}, γ = {gamma}; pass --g")))
}

fn constants(cfg: &RunConfig) -> Result<Outcome> {
    let c = calibrated_constants(cfg)?;
    let t = &cfg.tolerances;
    let passed = c.residuals.c_n3_oracle <= t.c_n3_quadrature
        && c.residuals.flux_spread <= t.flux_spread
        && c.residuals.trace_vs_fourier.is_none_or(|r| r <= t.trace_vs_fourier);
    Ok(Outcome {
        passed,
        content: export_constants(&c, cfg.format)?,
    })
}

fn harmonics(cfg: &RunConfig, gamma_text: Option<&str>) -> Result<Outcome> {
    let n = cfg.require_n()?;
    let m = cfg.require_order()?;
    let sector = cfg
        .sector
        .ok_or_else(|| FracError::config("sector", "\"dirichlet\" or \"neumann\"", "nothing"))?;
    let (list, defects) = match gamma_text.filter(|s| s.contains('/')) {
        Some(s) => {
            let g: Rational = s
                .parse()
                .map_err(|_| FracError::config("gamma", "a rational p/q", s))?;
            let hs = build_harmonics(&Context::new(n, g)?, sector, m);
            let list: Vec<Value> = hs.iter().map(|h| h.to_json()).collect();
            (list, harmonic_defects(&hs))
        }
        None => {
            let hs = build_harmonics(&Context::new(n, cfg.require_gamma()?)?, sector, m);
            let list: Vec<Value> = hs.iter().map(|h| h.to_json()).collect();
            (list, harmonic_defects(&hs))
        }
    };
    let doc = json!({"n": n, "sector": sector, "m": m, "count": list.len(), "defects": defects, "harmonics": list});
    Ok(Outcome {
        passed: defects.is_empty(),
        content: serde_json::to_string_pretty(&doc)?,
    })
}

fn solve(cfg: &RunConfig, input: &PathBuf, projected: bool) -> Result<Outcome> {
    let f: AtomSum<f64> = AtomSum::from_json(&read_json(input)?)?;
    let sector = cfg
        .sector
        .ok_or_else(|| FracError::config("sector", "\"dirichlet\" or \"neumann\"", "nothing"))?;
    let (u, defect) = match solve_homogeneous(&f, sector) {
        Ok(u) => {
            let r = u.apply_flat_d().sub(&f);
            let rel = r.coeff_norm() / f.coeff_norm().max(f64::MIN_POSITIVE);
            (u, if vanishes(&r, f.coeff_norm()) { 0.0 } else { rel })
        }
        Err(FracError::Solver { .. }) if projected => {
            let p = solve_homogeneous_projected(&f, sector, 1e-10)?;
            (p.solution, p.relative_residual)
        }
        Err(e) => return Err(e),
    };
    let doc = json!({"sector": sector, "relative_residual": defect, "solution": u.to_json()});
    Ok(Outcome {
        passed: defect <= 1e-10,
        content: serde_json::to_string_pretty(&doc)?,
    })
}

fn expand(cfg: &RunConfig, g: Option<f64>, check: bool) -> Result<Outcome> {
    let kind = cfg
        .kind
        .ok_or_else(|| FracError::config("kind", "poisson, green_neumann or boundary_green", "nothing"))?;
    let m = cfg.require_order()?;
    let jet = match &cfg.metric {
        Some(j) => j.clone(),
        None => {
            let n = cfg.require_n()?;
            MetricJet::pe_locally_flat_random(n, cfg.require_gamma()?, required_jet_order(kind, n, m), 0.3, cfg.seed)?
        }
    };
    let mut cfg = cfg.clone();
    cfg.n = Some(jet.n);
    cfg.gamma = Some(jet.gamma);
    let exp = match kind {
        KernelKind::Poisson => expand_poisson(&jet, m)?,
        KernelKind::GreenNeumann => expand_green_neumann(&jet, m, green_constant(&cfg, g)?)?,
        KernelKind::BoundaryGreen => expand_boundary_green(&jet, m, green_constant(&cfg, g)?)?,
    };
    let mut passed = true;
    if check && kind != KernelKind::BoundaryGreen {
        let report = residual_decay_check(&jet, &exp)?;
        eprintln!("{}", serde_json::to_string(&report)?);
        passed = report.passed;
    }
    Ok(Outcome {
        passed,
        content: export_expansion(&exp, cfg.format)?,
    })
}

fn fd_solve(cfg: &RunConfig) -> Result<(HalfGrid, HalfGridField)> {
    let spec = cfg
        .grid
        .as_ref()
        .ok_or_else(|| FracError::config("grid", "{gamma, height, layers, axes}", "nothing"))?;
    let bc = cfg
        .boundary
        .as_ref()
        .ok_or_else(|| FracError::config("boundary", "{kind, modes}", "nothing"))?;
    if let Some(bad) = bc.modes.iter().position(|m| m.k.len() != spec.axes.len()) {
        return Err(FracError::config(
            format!("boundary.modes[{bad}].k"),
            format!("{} components", spec.axes.len()),
            bc.modes[bad].k.len(),
        ));
    }
    let grid = HalfGrid::new(spec)?;
    let data = |x: &[f64]| bc.eval(x);
    let outer = |_: f64, _: &[f64]| 0.0;
    let metric = cfg.metric.as_ref();
    let field = match bc.kind {
        BoundaryKind::Dirichlet => solve_dirichlet_fd(&grid, metric, &data, &outer, Rhs::default())?,
        BoundaryKind::Flux => solve_neumann_fd(&grid, metric, &data, &outer, Rhs::default())?,
    };
    Ok((grid, field))
}

fn trace(cfg: &RunConfig, d_gamma: Option<f64>) -> Result<Outcome> {
    if cfg.boundary.as_ref().is_some_and(|b| b.kind != BoundaryKind::Dirichlet) {
        return Err(FracError::config("boundary.kind", "\"dirichlet\"", "\"flux\""));
    }
    let (grid, field) = fd_solve(cfg)?;
    let d = match d_gamma {
        Some(d) => d,
        None => calibrate_d_gamma(field.gamma, &cfg.calibration)?.0,
    };
    let fit = fractional_trace(&field, d, cfg.fit_layers)?;
    let bc = cfg.boundary.as_ref().expect("checked by fd_solve");
    let data: Vec<f64> = (0..field.columns()).map(|c| bc.eval(&grid.x_of(c))).collect();
    let oracle = fourier_fractional_oracle(&data, &field.axes, field.gamma)?;
    let err = relative_l2(&fit.trace, &oracle);
    let doc = json!({
        "d_gamma": d,
        "relative_l2": err,
        "tolerance": cfg.tolerances.trace_vs_fourier,
        "max_fit_residual": fit.max_fit_residual,
        "trace": fit.trace,
        "fourier": oracle,
    });
    Ok(Outcome {
        passed: err <= cfg.tolerances.trace_vs_fourier,
        content: serde_json::to_string_pretty(&doc)?,
    })
}

fn convolve(cfg: &RunConfig, g: Option<f64>) -> Result<Outcome> {
    let fc = FracConfig::new(cfg.require_n()?, cfg.require_gamma()?)?;
    let g = green_constant(cfg, g)?;
    let report = fracext::expansion_engine::convolution_check(&fc, g, &convolution_samples(fc.n))?;
    Ok(Outcome {
        passed: report.max_relative_error <= cfg.tolerances.convolution_relative,
        content: serde_json::to_string_pretty(&report)?,
    })
}
