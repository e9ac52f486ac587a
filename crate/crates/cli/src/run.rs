//! Executing a validated config: artifacts, check verdicts and the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use matflow_core::convexity::{
    bochner_relative_residual, heat_positivity_experiment, is_operator_convex_sampled,
    HeatPositivityStatus, ScalarFunction,
};
use matflow_core::flows::{
    detect_convergence, normalized_flow_picard, normalized_flow_rk4, spectral_trace,
    ConvergenceStatus, FlowTrace, PicardParams, Rk4Params, SolverKind, TimeGrid,
};
use matflow_core::matrix_io::{read_matrix, MatrixFile};
use matflow_core::random::{normalize, random_complex_gaussian, rng_from_seed, sub_seed, RNG_NAME};
use matflow_core::stability::{entropy_stability_experiment, hs_stability_experiment, StabilityParams, StabilityReport};
use matflow_core::{hs_norm_sq, GeneratorVariant, Matrix, TorusModel, VariantTag};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, InitSpec, OutputFormat, SolverSpec, MANIFEST_FILE};
use crate::preset::resolve_init;
use crate::CliError;

pub const VERSION: &str = concat!("matflow ", env!("CARGO_PKG_VERSION"));

pub const RAYLEIGH_SLACK: f64 = 1e-10;
pub const TRACE_LAW_TOL: f64 = 1e-10;
pub const LOG_DET_SLACK: f64 = 1e-8;
pub const BOCHNER_TOL: f64 = 1e-9;
pub const KERNEL_TOL: f64 = 1e-10;

/// Allowed `|norm² − 1|` along a trajectory for each solver.
pub fn norm_tolerance(solver: SolverKind) -> f64 {
    match solver {
        SolverKind::Spectral => 1e-12,
        SolverKind::Picard | SolverKind::Rk4 => 1e-6,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Pass,
    CheckFailure,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub artifacts: Vec<PathBuf>,
    pub duration_secs: f64,
    pub checks: Vec<CheckVerdict>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub version: String,
    pub rng: String,
}

impl RunManifest {
    /// 0 when every requested check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Pass => 0,
            RunStatus::CheckFailure | RunStatus::Error => 1,
        }
    }
}

struct Outcome {
    csv: Option<String>,
    json: Value,
    checks: Vec<CheckVerdict>,
}

fn verdict(name: &str, passed: bool, detail: impl Into<String>) -> CheckVerdict {
    CheckVerdict {
        name: name.to_string(),
        passed,
        detail: detail.into(),
    }
}

/// Runs `config`, writes its artifacts and `manifest.json` into `out_dir`.
///
/// Runtime failures do not escape: they are recorded in the manifest, and
/// every requested check then fails with a "not evaluated" verdict.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> RunManifest {
    let start = Instant::now();
    let mut artifacts = Vec::new();
    let result = execute(config).and_then(|outcome| {
        for (path, format) in config.output.paths.iter().zip(&config.output.formats) {
            let body = match format {
                OutputFormat::Csv => outcome.csv.clone().expect("validated format"),
                OutputFormat::Json => pretty(&outcome.json),
            };
            write_file(&out_dir.join(path), &body)?;
            artifacts.push(path.clone());
        }
        Ok(outcome.checks)
    });

    let (checks, status, error) = match result {
        Ok(all) => {
            let checks: Vec<CheckVerdict> = config
                .checks
                .iter()
                .map(|name| {
                    all.iter()
                        .find(|v| &v.name == name)
                        .cloned()
                        .unwrap_or_else(|| verdict(name, false, "no verdict produced"))
                })
                .collect();
            let status = if checks.iter().all(|c| c.passed) {
                RunStatus::Pass
            } else {
                RunStatus::CheckFailure
            };
            (checks, status, None)
        }
        Err(e) => (
            config
                .checks
                .iter()
                .map(|name| verdict(name, false, "not evaluated: run failed"))
                .collect(),
            RunStatus::Error,
            Some(e.to_string()),
        ),
    };

    let mut manifest = RunManifest {
        config: config.clone(),
        artifacts,
        duration_secs: start.elapsed().as_secs_f64(),
        checks,
        status,
        error,
        version: VERSION.to_string(),
        rng: RNG_NAME.to_string(),
    };
    let text = pretty(&serde_json::to_value(&manifest).expect("manifest serializes"));
    if let Err(e) = write_file(&out_dir.join(MANIFEST_FILE), &text) {
        manifest.status = RunStatus::Error;
        manifest.error = Some(e.to_string());
    }
    manifest
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, body).map_err(io)
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn execute(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    match config.kind {
        ExperimentKind::Spectrum => spectrum(config),
        ExperimentKind::Evolve => evolve(config),
        ExperimentKind::Stability | ExperimentKind::EntropyStability => stability(config),
        ExperimentKind::Convexity => convexity(config),
        ExperimentKind::HeatPositivity => heat_positivity(config),
        ExperimentKind::Bochner => bochner(config),
    }
}

fn build_model(config: &ExperimentConfig) -> Result<TorusModel, CliError> {
    let spec = config.model.as_ref().expect("validated model");
    let variant = match spec.variant {
        VariantTag::ClockShift => GeneratorVariant::ClockShift,
        VariantTag::Custom => GeneratorVariant::Custom {
            x: read_matrix(spec.x.as_ref().expect("validated"))?,
            y: read_matrix(spec.y.as_ref().expect("validated"))?,
        },
    };
    Ok(TorusModel::build(spec.n, variant)?)
}

fn solver(config: &ExperimentConfig) -> &SolverSpec {
    config.solver.as_ref().expect("validated solver")
}

fn init(config: &ExperimentConfig, model: &TorusModel, spec: &Option<InitSpec>, slot: u64) -> Result<Matrix, CliError> {
    resolve_init(spec.as_ref().expect("validated init"), model, config.seed, slot)
}

/// Unit-norm version of the initial data, as the normalized flow requires.
fn unit_init(config: &ExperimentConfig, model: &TorusModel, spec: &Option<InitSpec>, slot: u64) -> Result<Matrix, CliError> {
    let a = init(config, model, spec, slot)?;
    if hs_norm_sq(&a) == 0.0 {
        return Err(CliError::Core(matflow_core::Error::NotNormalized { norm_sq: 0.0 }));
    }
    Ok(normalize(&a))
}

fn spectrum(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = build_model(config)?;
    let n = model.n();
    let basis = model.eigenbasis()?;

    let mut csv = String::from("index,eigenvalue,level\n");
    for (i, &l) in basis.eigenvalues.iter().enumerate() {
        let level = basis.levels.iter().position(|r| r.contains(&i)).unwrap_or(i);
        writeln!(csv, "{i},{},{level}", fmt_float(l)).unwrap();
    }

    let identity = Matrix::identity(n).scale(1.0 / (n as f64).sqrt());
    let kernel = &basis.eigenmatrices[0];
    let kernel_dist = kernel.max_abs_diff(&identity).min(kernel.max_abs_diff(&identity.scale(-1.0)));
    let mut eig_residual: f64 = 0.0;
    for (phi, &l) in basis.eigenmatrices.iter().zip(&basis.eigenvalues) {
        eig_residual = eig_residual.max((&model.laplacian(phi)? - &phi.scale(l)).hs_norm());
    }
    let residual_tol = 1e-9 * basis.lambda_max().max(1.0);

    let levels: Vec<Value> = basis
        .levels
        .iter()
        .map(|r| json!({"start": r.start, "end": r.end, "eigenvalue": basis.eigenvalues[r.start]}))
        .collect();
    let json = json!({
        "n": n,
        "eigenvalues": basis.eigenvalues,
        "levels": levels,
        "gap": basis.gap,
        "lambda_max": basis.lambda_max(),
        "kernel": MatrixFile::from(kernel),
        "max_eigen_residual": eig_residual,
    });
    Ok(Outcome {
        csv: Some(csv),
        json,
        checks: vec![
            verdict(
                "kernel-is-identity",
                kernel_dist <= KERNEL_TOL,
                format!("max |φ0 − I/√n| = {kernel_dist:.3e} (tol {KERNEL_TOL:.0e})"),
            ),
            verdict(
                "eigen-residual",
                eig_residual <= residual_tol,
                format!("max |Δφ − λφ| = {eig_residual:.3e} (tol {residual_tol:.1e})"),
            ),
        ],
    })
}

fn trace_csv(trace: &FlowTrace) -> String {
    let mut csv = String::from("t,lambda,norm_sq,trace_re,trace_im,min_eig,residual,log_det\n");
    for o in &trace.observations {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt_float(o.t),
            fmt_float(o.lambda),
            fmt_float(o.norm_sq),
            fmt_float(o.trace.re),
            fmt_float(o.trace.im),
            fmt_opt(o.min_eig),
            fmt_float(o.residual),
            fmt_opt(o.log_det),
        )
        .unwrap();
    }
    csv
}

fn evolve(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = build_model(config)?;
    let s = solver(config);
    let a0 = unit_init(config, &model, &config.init, 0)?;
    let mut picard_json = Value::Null;
    let trace = match s.solver {
        SolverKind::Spectral => spectral_trace(&model, &a0, TimeGrid::new(s.dt, s.t_end)?, false)?,
        SolverKind::Rk4 => normalized_flow_rk4(
            &model,
            &a0,
            Rk4Params {
                dt: s.dt,
                t_end: s.t_end,
                renormalize_each_step: s.renormalize,
                keep_states: false,
            },
        )?,
        SolverKind::Picard => {
            let out = normalized_flow_picard(
                &model,
                &a0,
                PicardParams {
                    t_end: s.t_end,
                    dt: s.dt,
                    k_max: s.k_max,
                    tol: s.tol,
                },
            )?;
            picard_json = json!({
                "iterations": out.iterations,
                "distances": out.distances,
                "converged": out.converged,
                "sup_distance_to_spectral": out.sup_distance_to_spectral,
            });
            out.trace
        }
    };
    let basis = model.eigenbasis()?;
    let status = detect_convergence(&trace, basis, s.tol)?;

    let drift = trace.max_norm_drift();
    let rise = trace.max_rayleigh_increase();
    let law = trace.trace_law_error();
    let norm_tol = norm_tolerance(s.solver);
    let mut checks = vec![
        verdict(
            "norm-conservation",
            drift <= norm_tol,
            format!("max |norm² − 1| = {drift:.3e} (tol {norm_tol:.0e})"),
        ),
        verdict(
            "rayleigh-monotone",
            rise <= RAYLEIGH_SLACK,
            format!("largest step increase of λ = {rise:.3e} (slack {RAYLEIGH_SLACK:.0e})"),
        ),
        verdict(
            "trace-law",
            law <= TRACE_LAW_TOL,
            format!("max |τ(a) − τ(a0)e^∫λ| = {law:.3e} (tol {TRACE_LAW_TOL:.0e})"),
        ),
    ];
    checks.push(match &status {
        ConvergenceStatus::Converged(r) => verdict(
            "converged",
            true,
            format!("λ∞ = {:.12} (mode {}), residual {:.3e}", r.lambda_inf, r.matched_eigenvalue_index, r.final_residual),
        ),
        ConvergenceStatus::NotConverged { final_residual, lambda_spread } => verdict(
            "converged",
            false,
            format!("residual {final_residual:.3e}, λ spread {lambda_spread:.3e} (tol {:.0e})", s.tol),
        ),
    });
    checks.push(match &status {
        ConvergenceStatus::Converged(r) => match r.gap_bound_holds {
            Some(holds) => verdict(
                "gap-bound",
                holds,
                format!("λ∞ = {:.12}, λ1 = {:.12}", r.lambda_inf, basis.gap),
            ),
            None => verdict("gap-bound", false, "initial data not trace-free"),
        },
        ConvergenceStatus::NotConverged { .. } => verdict("gap-bound", false, "trajectory did not converge"),
    });
    checks.push(match (trace.min_state_eigenvalue(), trace.max_log_det_decrease()) {
        (Some(m), Some(d)) if m > 0.0 => verdict(
            "positivity",
            d <= LOG_DET_SLACK,
            format!("min eigenvalue {m:.3e}, largest log det decrease {d:.3e} (slack {LOG_DET_SLACK:.0e})"),
        ),
        (Some(m), _) => verdict("positivity", false, format!("min eigenvalue {m:.3e}")),
        (None, _) => verdict("positivity", false, "state not Hermitian"),
    });

    let json = json!({
        "solver": s.solver,
        "n": model.n(),
        "initial": MatrixFile::from(&a0),
        "steps": trace.observations.len(),
        "first": trace.observations.first(),
        "final": trace.final_observation(),
        "convergence": status,
        "max_norm_drift": drift,
        "max_rayleigh_increase": rise,
        "trace_law_error": law,
        "picard": picard_json,
    });
    Ok(Outcome {
        csv: Some(trace_csv(&trace)),
        json,
        checks,
    })
}

fn stability(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = build_model(config)?;
    let s = solver(config);
    let u0 = unit_init(config, &model, &config.init, 0)?;
    let v0 = unit_init(config, &model, &config.init_other, 1)?;
    let params = StabilityParams { t_end: s.t_end, dt: s.dt };
    let report: StabilityReport = match config.kind {
        ExperimentKind::Stability => hs_stability_experiment(&model, &u0, &v0, params)?,
        _ => entropy_stability_experiment(&model, &u0, &v0, params, config.fannes_d.expect("validated"))?,
    };

    let mut csv = String::from("t,hs_dist_sq,trace_dist,entropy_gap,fannes_rhs\n");
    for j in 0..report.times.len() {
        writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_float(report.times[j]),
            fmt_float(report.hs_dist_sq[j]),
            fmt_opt(report.trace_dist[j]),
            fmt_opt(report.entropy_gap[j]),
            fmt_opt(report.fannes_rhs[j]),
        )
        .unwrap();
    }
    let note = report.regime_note.clone().unwrap_or_default();
    let checks = vec![
        verdict(
            "hs-bound",
            report.all_bounds_hold,
            format!("estimated C1 = {:.6e}", report.estimated_c1),
        ),
        verdict("in-regime", report.in_regime, note.clone()),
        verdict(
            "entropy-bound",
            report.in_regime && report.all_bounds_hold,
            if report.in_regime {
                format!("K = {:.6e}", report.trace_growth.unwrap_or(f64::NAN))
            } else {
                format!("out of regime: {note}")
            },
        ),
    ];
    Ok(Outcome {
        csv: Some(csv),
        json: serde_json::to_value(&report).expect("report serializes"),
        checks,
    })
}

fn function(config: &ExperimentConfig) -> Result<ScalarFunction, CliError> {
    Ok(config.function.as_deref().expect("validated function").parse()?)
}

fn convexity(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let f = function(config)?;
    let dim = config.dim.expect("validated dim");
    let trials = config.trials.expect("validated trials");
    let v = is_operator_convex_sampled(&f, dim, trials, config.seed)?;
    let detail = match &v.witness {
        Some(w) => format!("violation at trial {} (μ = {}), gap min eigenvalue {:.3e}", w.trial, w.mu, w.gap_min_eig),
        None => format!("no violation in {trials} trials, worst gap min eigenvalue {:.3e}", v.worst_gap_min_eig),
    };
    let checks = vec![
        verdict("convex-on-samples", v.is_convex_on_samples, detail.clone()),
        verdict("violation-found", !v.is_convex_on_samples, detail),
    ];
    let json = json!({
        "function": f.to_string(),
        "dim": dim,
        "seed": config.seed,
        "verdict": v,
    });
    Ok(Outcome { csv: None, json, checks })
}

fn heat_positivity(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = build_model(config)?;
    let s = solver(config);
    let f = function(config)?;
    let a0 = init(config, &model, &config.init, 0)?;
    let times = TimeGrid::new(s.dt, s.t_end)?.points();
    let normalized = config.normalized.unwrap_or(false);
    let a0 = if normalized { normalize(&a0) } else { a0 };
    let r = heat_positivity_experiment(&model, &f, &a0, &times, normalized)?;

    let mut csv = String::from("t,min_eig_f,min_eig_state\n");
    for j in 0..r.times.len() {
        writeln!(
            csv,
            "{},{},{}",
            fmt_float(r.times[j]),
            fmt_opt(r.min_eig_f[j]),
            fmt_float(r.min_eig_state[j])
        )
        .unwrap();
    }
    let checks = match r.status {
        HeatPositivityStatus::Refused => {
            let why = r.refusal.clone().unwrap_or_default();
            vec![
                verdict("f-positive", false, format!("refused: {why}")),
                verdict("state-positive", false, format!("refused: {why}")),
            ]
        }
        HeatPositivityStatus::Completed => {
            let min_f = r.min_eig_f.iter().map(|m| m.unwrap_or(f64::NEG_INFINITY)).fold(f64::INFINITY, f64::min);
            let min_a = r.min_eig_state.iter().copied().fold(f64::INFINITY, f64::min);
            vec![
                verdict("f-positive", r.f_stays_positive, format!("min eigenvalue of f(a(t)) = {min_f:.3e}")),
                verdict("state-positive", r.state_stays_positive, format!("min eigenvalue of a(t) = {min_a:.3e}")),
            ]
        }
    };
    Ok(Outcome {
        csv: Some(csv),
        json: serde_json::to_value(&r).expect("report serializes"),
        checks,
    })
}

fn bochner(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = build_model(config)?;
    let n = model.n();
    let samples = config.samples.expect("validated samples");
    let mut residuals = Vec::with_capacity(samples);
    let mut csv = String::from("sample,residual\n");
    for i in 0..samples {
        let a = random_complex_gaussian(&mut rng_from_seed(sub_seed(config.seed, i as u64)), n);
        let r = bochner_relative_residual(&model, &a)?;
        writeln!(csv, "{i},{}", fmt_float(r)).unwrap();
        residuals.push(r);
    }
    let max = residuals.iter().copied().fold(0.0, f64::max);
    Ok(Outcome {
        csv: Some(csv),
        json: json!({"n": n, "samples": samples, "max_residual": max, "residuals": residuals}),
        checks: vec![verdict(
            "bochner",
            max <= BOCHNER_TOL,
            format!("max relative residual {max:.3e} (tol {BOCHNER_TOL:.0e})"),
        )],
    })
}
