use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::json;

use super::config::{Command, Params, RunConfig};
use super::svg::{render_phase_portrait, PlotStyle};
use super::trace::{read_trace, write_atomic, write_trace, FlowTrace};
use super::verify::{run_check, sorted_csvs, CheckReport, CHECKS};
use crate::be_flow::{be_integrate, gradient_bound, BEOptions, BEState, NParam};
use crate::bundle_curvature::blocks::{ricci_blocks_general, ricci_blocks_torus};
use crate::bundle_curvature::data::RicciBlocks;
use crate::bundle_curvature::fields::{ConnectionField, QField};
use crate::bundle_curvature::flow::{integrate_torus, BundleState};
use crate::error::{Error, Result};
use crate::geometry_catalog::{berger, heisenberg, sl2r, sol3, su2_product, type_iii_product, BundleModel, CatalogEntry};
use crate::ke_ode::{ke_integrate, ke_sample, lambda_invariant, psi, psi_cleared, to_lauret, StopReason, DEFAULT_TOL};
use crate::tensor_lab::chart::PeriodicChart;
use crate::tensor_lab::field::{MetricField, ScalarField, DEFAULT_ORACLE_STEP};

/// What a run produced.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub checks: Vec<CheckReport>,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Process exit status for an error: 2 for configuration and I/O
/// problems, 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

/// Short machine-readable error kind.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::SingularMetric { .. } => "singular-metric",
        Error::ChartMismatch => "chart-mismatch",
        Error::DimensionMismatch { .. } => "dimension-mismatch",
        Error::Domain(_) => "domain",
        Error::BlowupTime { .. } => "blowup-time",
        Error::LambdaZero => "lambda-zero",
        Error::NegativeBase { .. } => "negative-base",
        Error::StepRejected { .. } => "step-rejected",
        Error::StepUnderflow { .. } => "step-underflow",
        Error::EmptyInput(_) => "empty-input",
        Error::Config(_) => "config",
        Error::Parse { .. } => "parse",
        Error::Io(_) => "io",
    }
}

/// Catalog entry from a name and its parameters.
pub fn catalog_entry(name: &str, params: &BTreeMap<String, f64>) -> Result<CatalogEntry> {
    match name {
        "berger" | "sl2r" => {
            let p = Params::new(params, &["lambda1", "lambda2"])?;
            let (l1, l2) = (p.require("lambda1")?, p.require("lambda2")?);
            if name == "berger" {
                berger(l1, l2)
            } else {
                sl2r(l1, l2)
            }
        }
        "heisenberg" => {
            let p = Params::new(params, &["n", "c"])?;
            heisenberg(p.count("n", 1)?, p.require("c")?)
        }
        "sol3" => {
            let p = Params::new(params, &["a", "c"])?;
            sol3(p.require("a")?, p.require("c")?)
        }
        other => Err(Error::Config(format!("unknown geometry {other:?}; expected berger, sl2r, heisenberg or sol3"))),
    }
}

fn file_stem(label: &str) -> String {
    let s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
    s.trim_end_matches('_').to_string()
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64> {
    let v = v.unwrap_or(default);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Config(format!("{name} must be positive, got {v}")));
    }
    Ok(v)
}

fn echo(cfg: &RunConfig, params: &BTreeMap<String, f64>) -> String {
    json!({ "geometry": cfg.geometry, "params": params, "numerics": {
        "tol": cfg.numerics.tol, "dt": cfg.numerics.dt, "t_end": cfg.numerics.t_end,
        "resolution": cfg.numerics.resolution, "oracle_step": cfg.numerics.oracle_step,
        "record_every": cfg.numerics.record_every,
    }})
    .to_string()
}

fn ode_trace(cfg: &RunConfig, params: &BTreeMap<String, f64>) -> Result<FlowTrace> {
    let e = catalog_entry(cfg.geometry()?, params)?;
    let tol = positive("tol", cfg.numerics.tol, DEFAULT_TOL)?;
    let t_end = positive("t_end", cfg.numerics.t_end, 1.0)?;
    let p = e.ke_params;
    let run = ke_integrate(&e.ke_state0, &p, t_end, tol)?;
    let states = match cfg.numerics.dt {
        None => run.states.clone(),
        Some(dt) => {
            let dt = positive("dt", Some(dt), 1.0)?;
            let last = run.last().t;
            let times: Vec<f64> = (0..).map(|i| i as f64 * dt).take_while(|t| *t <= last + 1e-12 * last).collect();
            let mut s = vec![e.ke_state0];
            s.extend(ke_sample(&e.ke_state0, &p, &times[1..], tol)?);
            s
        }
    };
    let legend: Vec<String> = e.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let mut tr = FlowTrace::new(&["t", "u", "f", "fiber", "psi", "psi_cleared", "a", "b", "lambda_inv"])
        .with_meta("label", e.label())
        .with_meta("legend", legend.join(", "))
        .with_meta("n", p.n)
        .with_meta("lambda", p.lambda)
        .with_meta("stop", match run.stop {
            StopReason::Horizon => "horizon",
            StopReason::Extinct => "extinct",
        })
        .with_meta("extinction_time", run.extinction_time.map_or("none".to_string(), |t| format!("{t:.16e}")))
        .with_meta("config", echo(cfg, params))
        .with_meta("version", env!("CARGO_PKG_VERSION"));
    for note in &e.notes {
        tr = tr.with_meta("note", note);
    }
    for s in &states {
        let l = to_lauret(s, &p);
        tr.push(&[
            s.t,
            s.u,
            s.f,
            s.fiber(),
            psi(s, &p).unwrap_or(f64::NAN),
            psi_cleared(s, &p).unwrap_or(f64::NAN),
            l.a,
            l.b,
            lambda_invariant(&l).unwrap_or(f64::NAN),
        ])?;
    }
    Ok(tr)
}

fn flow_ode(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let sets: Vec<&BTreeMap<String, f64>> =
        if cfg.runs.is_empty() { vec![&cfg.params] } else { cfg.runs.iter().collect() };
    if !cfg.runs.is_empty() && !cfg.params.is_empty() {
        return Err(Error::Config("give either params or runs, not both".into()));
    }
    if sets.len() > 1 && cfg.outputs.trace.is_some() {
        return Err(Error::Config("outputs.trace names a single file; omit it when using runs".into()));
    }
    let traces: Vec<Result<FlowTrace>> = {
        use rayon::prelude::*;
        sets.par_iter().map(|p| ode_trace(cfg, p)).collect()
    };
    let mut paths = Vec::new();
    for tr in traces {
        let tr = tr?;
        let name = match &cfg.outputs.trace {
            Some(n) => n.clone(),
            None => format!("{}.csv", file_stem(tr.meta("label").unwrap_or("trace"))),
        };
        let path = out.join(name);
        write_trace(&tr, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn flow_be(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if let Some(g) = &cfg.geometry {
        if g != "flat-torus" {
            return Err(Error::Config(format!("flow-be supports geometry \"flat-torus\", got {g:?}")));
        }
    }
    let p = Params::new(&cfg.params, &["N", "amplitude", "length"])?;
    let big_n = p.get("N").map_or(NParam::Infinite, NParam::Finite);
    let amp = p.or("amplitude", 0.1);
    let len = positive("length", p.get("length"), 1.0)?;
    let res = cfg.numerics.resolution.clone().unwrap_or(vec![32, 8]);
    if res.len() != 2 {
        return Err(Error::Config("flow-be needs a two-entry resolution".into()));
    }
    let chart = PeriodicChart::new(vec![len, len * res[1] as f64 / res[0] as f64], res)?;
    let f = ScalarField::from_fn(chart.clone(), |x| amp * (2.0 * std::f64::consts::PI * x[0] / len).sin())?;
    let state = BEState::new(MetricField::flat(chart), f, big_n)?;
    let opts = BEOptions {
        dt: positive("dt", cfg.numerics.dt, 1e-3)?,
        t_end: positive("t_end", cfg.numerics.t_end, 0.05)?,
        record_every: cfg.numerics.record_every.unwrap_or(1),
        ..Default::default()
    };
    let tr = be_integrate(state, &opts)?;
    let k0 = tr.records[0].max_grad_f_sq;
    let mut trace = FlowTrace::new(&["t", "min_tilde_s0", "min_tilde_s1", "max_grad_f_sq", "min_metric_eig", "gradient_bound"])
        .with_meta("N", match big_n {
            NParam::Infinite => "inf".to_string(),
            NParam::Finite(v) => v.to_string(),
        })
        .with_meta("stop", format!("{:?}", tr.stop))
        .with_meta("config", echo(cfg, &cfg.params))
        .with_meta("version", env!("CARGO_PKG_VERSION"));
    for r in &tr.records {
        let bound = gradient_bound(r.t, k0, 2, big_n).unwrap_or(f64::NAN);
        trace.push(&[r.t, r.min_tilde_s[0], r.min_tilde_s[1], r.max_grad_f_sq, r.min_metric_eig, bound])?;
    }
    let path = out.join(cfg.outputs.trace.clone().unwrap_or("be.csv".into()));
    write_trace(&trace, &path)?;
    Ok(vec![path])
}

/// Spatially constant circle-bundle data over a flat torus, integrated on
/// the grid, next to the reduced ODE at the same times.
fn flow_bundle(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let geometry = cfg.geometry()?;
    if geometry != "heisenberg" {
        return Err(Error::Config(format!("flow-bundle supports geometry \"heisenberg\", got {geometry:?}")));
    }
    let e = catalog_entry(geometry, &cfg.params)?;
    let n = e.ke_params.n as usize;
    if 2 * n > crate::tensor_lab::chart::MAX_DIMS {
        return Err(Error::Config(format!("grid flow supports n <= {}", crate::tensor_lab::chart::MAX_DIMS / 2)));
    }
    let d = 2 * n;
    let res = cfg.numerics.resolution.clone().unwrap_or(vec![8; d]);
    if res.len() != d {
        return Err(Error::Config(format!("resolution needs {d} entries")));
    }
    let chart = PeriodicChart::new(vec![1.0; d], res)?;
    let s0 = e.ke_state0;
    let g = MetricField::uniform(chart.clone(), DMatrix::identity(d, d) * s0.u)?;
    let q = QField::uniform(chart.clone(), DMatrix::from_element(1, 1, s0.fiber()))?;
    let mut flux = DMatrix::zeros(d, d);
    for i in 0..n {
        flux[(i, n + i)] = -1.0;
        flux[(n + i, i)] = 1.0;
    }
    let alpha = ConnectionField::with_flux(chart.clone(), 1, vec![DMatrix::zeros(1, d); chart.len()], vec![flux])?;
    let dt = positive("dt", cfg.numerics.dt, 1e-3)?;
    let t_end = positive("t_end", cfg.numerics.t_end, 1.0)?;
    let states = integrate_torus(BundleState::new(g, q, alpha)?, dt, t_end, cfg.numerics.record_every.unwrap_or(10))?;
    let times: Vec<f64> = states.iter().skip(1).map(|s| s.t).collect();
    let mut ode = vec![s0];
    ode.extend(ke_sample(&s0, &e.ke_params, &times, positive("tol", cfg.numerics.tol, DEFAULT_TOL)?)?);
    let mut trace = FlowTrace::new(&["t", "u", "fiber", "u_ode", "fiber_ode"])
        .with_meta("label", e.label())
        .with_meta("config", echo(cfg, &cfg.params))
        .with_meta("version", env!("CARGO_PKG_VERSION"));
    for (s, o) in states.iter().zip(&ode) {
        trace.push(&[s.t, s.g.at(0)[(0, 0)], s.q.at(0)[(0, 0)], o.u, o.fiber()])?;
    }
    let path = out.join(cfg.outputs.trace.clone().unwrap_or("bundle.csv".into()));
    write_trace(&trace, &path)?;
    Ok(vec![path])
}

fn blocks_json(b: &RicciBlocks) -> serde_json::Value {
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    json!({ "fiber": rows(&b.fiber), "mixed": rows(&b.mixed), "base": rows(&b.base) })
}

fn curvature(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let geometry = cfg.geometry()?;
    let (model, point, label): (BundleModel, Vec<f64>, String) = match geometry {
        "su2-product" => {
            let p = Params::new(&cfg.params, &["scale"])?;
            (su2_product(p.or("scale", 2.0)), vec![0.2, -0.1], geometry.to_string())
        }
        "type-iii-product" => {
            Params::new(&cfg.params, &[])?;
            (type_iii_product(), vec![0.3, 0.2], geometry.to_string())
        }
        name => {
            let e = catalog_entry(name, &cfg.params)?;
            let label = e.label();
            match (e.bundle, e.sample_point) {
                (Some(m), Some(x)) => (m, x, label),
                _ => return Err(Error::Config(format!("{label} has no total-space model"))),
            }
        }
    };
    let h = positive("oracle_step", cfg.numerics.oracle_step, DEFAULT_ORACLE_STEP)?;
    let evaluator = if model.group().structure_constants().is_abelian() { ricci_blocks_torus } else { ricci_blocks_general };
    let c = model.compare_with_oracle(&point, h, evaluator)?;
    let report = json!({
        "geometry": label,
        "point": point,
        "oracle_step": h,
        "formula": blocks_json(&c.formula),
        "oracle": blocks_json(&c.oracle),
        "max_error": c.error,
        "max_error_half_step": c.error_half,
        "richardson_ratio": c.richardson_ratio(),
    });
    let path = out.join(cfg.outputs.report.clone().unwrap_or("curvature.json".into()));
    write_atomic(&path, format!("{}\n", serde_json::to_string_pretty(&report).expect("json value")).as_bytes())?;
    Ok(vec![path])
}

fn plot(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    Params::new(&cfg.params, &[])?;
    if cfg.outputs.inputs.is_empty() {
        return Err(Error::Config("plot needs outputs.inputs (trace files or directories)".into()));
    }
    let mut files = Vec::new();
    for input in &cfg.outputs.inputs {
        let p = PathBuf::from(input);
        if p.is_dir() {
            files.extend(sorted_csvs(&p)?);
        } else {
            files.push(p);
        }
    }
    let traces: Vec<FlowTrace> = files.iter().map(|p| read_trace(p)).collect::<Result<_>>()?;
    let svg = render_phase_portrait(&traces, &PlotStyle::default())?;
    let path = out.join(cfg.outputs.plot.clone().unwrap_or("phase.svg".into()));
    write_atomic(&path, svg.as_bytes())?;
    Ok(vec![path])
}

fn verify(cfg: &RunConfig, out: &Path, only: Option<&str>) -> Result<(Vec<PathBuf>, Vec<CheckReport>)> {
    let names: Vec<String> = match only {
        Some(n) => vec![n.to_string()],
        None if !cfg.checks.is_empty() => cfg.checks.clone(),
        None => CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = names.iter().find(|n| !CHECKS.contains(&n.as_str())) {
        return Err(Error::Config(format!("unknown check {bad:?}; known: {CHECKS:?}")));
    }
    let reports: Vec<CheckReport> = names.iter().map(|n| run_check(n)).collect::<Result<_>>()?;
    let text: String = reports.iter().map(|r| r.line() + "\n").collect();
    let path = out.join(cfg.outputs.report.clone().unwrap_or("verify.txt".into()));
    write_atomic(&path, text.as_bytes())?;
    Ok((vec![path], reports))
}

/// Executes one configuration, writing artifacts under `out`. `check`
/// restricts `verify` to a single named check.
pub fn run(cfg: &RunConfig, out: &Path, check: Option<&str>) -> Result<RunOutcome> {
    if check.is_some() && cfg.command != Command::Verify {
        return Err(Error::Config("--check applies to the verify command only".into()));
    }
    let mut outcome = RunOutcome::default();
    match cfg.command {
        Command::FlowOde => outcome.artifacts = flow_ode(cfg, out)?,
        Command::FlowBe => outcome.artifacts = flow_be(cfg, out)?,
        Command::FlowBundle => outcome.artifacts = flow_bundle(cfg, out)?,
        Command::Curvature => outcome.artifacts = curvature(cfg, out)?,
        Command::Plot => outcome.artifacts = plot(cfg, out)?,
        Command::Verify => {
            let (a, c) = verify(cfg, out, check)?;
            outcome.artifacts = a;
            outcome.checks = c;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn round_berger_samples() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"{"command": "flow-ode", "geometry": "berger", "params": {"lambda1": 1, "lambda2": 1},
                        "numerics": {"t_end": 0.2, "dt": 0.05}}"#);
        let out = run(&c, dir.path(), None).unwrap();
        let t = read_trace(&out.artifacts[0]).unwrap();
        let ts = t.column("t").unwrap();
        let i = ts.iter().position(|v| (v - 0.1).abs() < 1e-12).unwrap();
        assert!((t.column("u").unwrap()[i] - 0.3).abs() < 1e-6);
        assert!((t.column("fiber").unwrap()[i] - 0.6).abs() < 1e-6);
        assert!(out.artifacts[0].ends_with("berger_1_1.csv"));
    }

    #[test]
    fn missing_and_unknown_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"{"command": "flow-ode", "geometry": "berger", "params": {"lambda1": 1}}"#);
        assert!(matches!(run(&c, dir.path(), None), Err(Error::Config(_))));
        let c = cfg(r#"{"command": "flow-ode", "geometry": "berger", "params": {"lambda1": 1, "lambda2": 1, "mu": 2}}"#);
        assert!(matches!(run(&c, dir.path(), None), Err(Error::Config(_))));
        let c = cfg(r#"{"command": "flow-ode", "geometry": "torus"}"#);
        assert_eq!(exit_code(&run(&c, dir.path(), None).unwrap_err()), 2);
        let c = cfg(r#"{"command": "flow-ode", "geometry": "berger", "params": {"lambda1": -1, "lambda2": 1}}"#);
        assert_eq!(exit_code(&run(&c, dir.path(), None).unwrap_err()), 3);
    }

    #[test]
    fn identical_configs_give_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"{"command": "flow-ode", "geometry": "sol3", "params": {"a": 1, "c": 1}, "numerics": {"t_end": 3}}"#);
        let a = run(&c, &dir.path().join("a"), None).unwrap();
        let b = run(&c, &dir.path().join("b"), None).unwrap();
        let read = |p: &PathBuf| std::fs::read(p).unwrap();
        assert_eq!(read(&a.artifacts[0]), read(&b.artifacts[0]));
    }

    #[test]
    fn curvature_report_for_heisenberg() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"{"command": "curvature", "geometry": "heisenberg", "params": {"n": 1, "c": 1}}"#);
        let out = run(&c, dir.path(), None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.artifacts[0]).unwrap()).unwrap();
        assert!(v["max_error"].as_f64().unwrap() < 2e-5);
        assert!((v["formula"]["fiber"][0][0].as_f64().unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn single_check_selection() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"{"command": "verify"}"#);
        let out = run(&c, dir.path(), Some("implicit-constants")).unwrap();
        assert_eq!(out.checks.len(), 1);
        assert!(out.all_passed());
        assert!(run(&c, dir.path(), Some("bogus")).is_err());
    }

    #[test]
    fn bundle_and_be_runs_write_traces() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"{"command": "flow-bundle", "geometry": "heisenberg", "params": {"n": 1, "c": 1},
                        "numerics": {"t_end": 0.1, "dt": 0.01, "record_every": 5}}"#);
        let t = read_trace(&run(&c, dir.path(), None).unwrap().artifacts[0]).unwrap();
        let (u, uo) = (t.column("u").unwrap(), t.column("u_ode").unwrap());
        assert!(u.iter().zip(uo).all(|(a, b)| (a - b).abs() < 1e-8));
        let c = cfg(r#"{"command": "flow-be", "params": {"N": 5}, "numerics": {"t_end": 0.002}}"#);
        let t = read_trace(&run(&c, dir.path(), None).unwrap().artifacts[0]).unwrap();
        assert!(t.len() > 2);
    }
}
