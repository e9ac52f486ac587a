//! Experiment configuration: JSON schema, defaults and validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Component, Path, PathBuf};

use matflow_core::convexity::ScalarFunction;
use matflow_core::flows::SolverKind;
use matflow_core::matrix_io::read_matrix;
use matflow_core::VariantTag;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::preset::check_preset_name;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    Evolve,
    Stability,
    EntropyStability,
    Convexity,
    HeatPositivity,
    Bochner,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Spectrum,
        Self::Evolve,
        Self::Stability,
        Self::EntropyStability,
        Self::Convexity,
        Self::HeatPositivity,
        Self::Bochner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Evolve => "evolve",
            Self::Stability => "stability",
            Self::EntropyStability => "entropy-stability",
            Self::Convexity => "convexity",
            Self::HeatPositivity => "heat-positivity",
            Self::Bochner => "bochner",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Names accepted in `checks`.
    pub fn checks(self) -> &'static [&'static str] {
        match self {
            Self::Spectrum => &["kernel-is-identity", "eigen-residual"],
            Self::Evolve => &[
                "norm-conservation",
                "rayleigh-monotone",
                "converged",
                "gap-bound",
                "trace-law",
                "positivity",
            ],
            Self::Stability => &["hs-bound"],
            Self::EntropyStability => &["in-regime", "entropy-bound"],
            Self::Convexity => &["convex-on-samples", "violation-found"],
            Self::HeatPositivity => &["f-positive", "state-positive"],
            Self::Bochner => &["bochner"],
        }
    }

    pub fn formats(self) -> &'static [OutputFormat] {
        match self {
            Self::Convexity => &[OutputFormat::Json],
            _ => &[OutputFormat::Csv, OutputFormat::Json],
        }
    }

    fn uses_model(self) -> bool {
        self != Self::Convexity
    }

    fn uses_init(self) -> bool {
        matches!(
            self,
            Self::Evolve | Self::Stability | Self::EntropyStability | Self::HeatPositivity
        )
    }

    fn uses_init_other(self) -> bool {
        matches!(self, Self::Stability | Self::EntropyStability)
    }

    fn uses_solver(self) -> bool {
        matches!(
            self,
            Self::Evolve | Self::Stability | Self::EntropyStability | Self::HeatPositivity
        )
    }

    fn uses_function(self) -> bool {
        matches!(self, Self::Convexity | Self::HeatPositivity)
    }

    fn default_solver(self) -> SolverSpec {
        let (dt, t_end) = match self {
            Self::Stability | Self::EntropyStability => (1e-2, 2.0),
            Self::HeatPositivity => (5e-2, 5.0),
            _ => (1e-2, 10.0),
        };
        SolverSpec {
            solver: SolverKind::Spectral,
            dt,
            t_end,
            tol: 1e-8,
            k_max: 50,
            renormalize: false,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    #[serde(default = "clock_shift")]
    pub variant: VariantTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
}

fn clock_shift() -> VariantTag {
    VariantTag::ClockShift
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    TracefreeUnit,
    PdUnit,
    HermitianUnit,
    GaussianUnit,
}

/// Initial data: a named preset, a matrix file, or a seeded random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    Preset(String),
    File(PathBuf),
    Random { ensemble: Ensemble, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSpec {
    pub solver: SolverKind,
    pub dt: f64,
    pub t_end: f64,
    pub tol: f64,
    pub k_max: usize,
    pub renormalize: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    solver: Option<SolverKind>,
    dt: Option<f64>,
    t_end: Option<f64>,
    tol: Option<f64>,
    k_max: Option<usize>,
    renormalize: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub paths: Vec<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl OutputSpec {
    pub fn default_for(kind: ExperimentKind) -> Self {
        let formats = kind.formats().to_vec();
        Self {
            paths: formats
                .iter()
                .map(|f| PathBuf::from(format!("{}.{}", kind.name(), f.extension())))
                .collect(),
            formats,
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// A fully validated experiment. Fields not used by `kind` are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_other: Option<InitSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fannes_d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized: Option<bool>,
    pub checks: Vec<String>,
    pub output: OutputSpec,
    pub seed: u64,
}

const TOP_LEVEL: [&str; 14] = [
    "kind",
    "model",
    "init",
    "init_other",
    "solver",
    "function",
    "dim",
    "trials",
    "fannes_d",
    "samples",
    "normalized",
    "checks",
    "output",
    "seed",
];

/// Parses a JSON config, resolving relative input files against the
/// current directory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let base = std::env::current_dir().map_err(|e| CliError::Io {
        path: PathBuf::from("."),
        message: e.to_string(),
    })?;
    parse_config_in(text, &base)
}

/// Parses a JSON config, resolving relative input files against `base`.
pub fn parse_config_in(text: &str, base: &Path) -> Result<ExperimentConfig, CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(vec![format!("malformed JSON: {e}")]))?;
    config_from_value(value, base)
}

pub fn emit_config(config: &ExperimentConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serializes");
    s.push('\n');
    s
}

struct Collector {
    errors: Vec<String>,
}

impl Collector {
    fn push(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn field<T: DeserializeOwned>(&mut self, obj: &Map<String, Value>, key: &str) -> Option<T> {
        let v = obj.get(key)?;
        match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                self.push(format!("{key}: {e}"));
                None
            }
        }
    }
}

/// Validates an already-parsed JSON value; collects every error found.
pub fn config_from_value(value: Value, base: &Path) -> Result<ExperimentConfig, CliError> {
    let Value::Object(obj) = value else {
        return Err(CliError::Config(vec!["config must be a JSON object".into()]));
    };
    let mut c = Collector { errors: Vec::new() };
    for key in obj.keys() {
        if !TOP_LEVEL.contains(&key.as_str()) {
            c.push(format!("unknown field `{key}`"));
        }
    }

    let kind = match obj.get("kind") {
        None => {
            c.push("missing required field `kind`");
            None
        }
        Some(Value::String(s)) => {
            let k = ExperimentKind::from_name(s);
            if k.is_none() {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                c.push(format!("unknown kind `{s}` (expected one of {})", names.join(", ")));
            }
            k
        }
        Some(other) => {
            c.push(format!("kind: expected a string, found {other}"));
            None
        }
    };

    let mut model: Option<ModelSpec> = c.field(&obj, "model");
    if let Some(m) = model.as_mut() {
        validate_model(m, base, &mut c);
    }
    let n = model.as_ref().map(|m| m.n).filter(|&n| n >= 2);

    let mut init: Option<InitSpec> = c.field(&obj, "init");
    let mut init_other: Option<InitSpec> = c.field(&obj, "init_other");
    for (key, spec) in [("init", &mut init), ("init_other", &mut init_other)] {
        if let Some(s) = spec.as_mut() {
            validate_init(key, s, n, base, &mut c);
        }
    }

    let raw_solver: Option<RawSolver> = c.field(&obj, "solver");
    let function: Option<String> = c.field(&obj, "function");
    if let Some(f) = &function {
        if let Err(e) = f.parse::<ScalarFunction>() {
            c.push(format!("function: {e}"));
        }
    }
    let mut dim: Option<usize> = c.field(&obj, "dim");
    let mut trials: Option<usize> = c.field(&obj, "trials");
    let mut fannes_d: Option<usize> = c.field(&obj, "fannes_d");
    let mut samples: Option<usize> = c.field(&obj, "samples");
    let mut normalized: Option<bool> = c.field(&obj, "normalized");
    let checks: Vec<String> = c.field(&obj, "checks").unwrap_or_default();
    let output: Option<OutputSpec> = c.field(&obj, "output");
    let seed: u64 = c.field(&obj, "seed").unwrap_or(0);

    let Some(kind) = kind else {
        return Err(CliError::Config(c.errors));
    };

    let require = |present: bool, used: bool, key: &str, c: &mut Collector| {
        if used && !present && obj.get(key).is_none() {
            c.push(format!("missing required field `{key}` for kind `{kind}`"));
        }
        if !used && obj.contains_key(key) {
            c.push(format!("field `{key}` is not used by kind `{kind}`"));
        }
    };
    if kind.uses_model() {
        require(model.is_some(), true, "model", &mut c);
    }
    require(init.is_some(), kind.uses_init(), "init", &mut c);
    require(init_other.is_some(), kind.uses_init_other(), "init_other", &mut c);
    require(function.is_some(), kind.uses_function(), "function", &mut c);
    require(true, kind.uses_solver(), "solver", &mut c);
    require(true, kind == ExperimentKind::Convexity, "trials", &mut c);
    require(true, kind == ExperimentKind::EntropyStability, "fannes_d", &mut c);
    require(true, kind == ExperimentKind::Bochner, "samples", &mut c);
    require(true, kind == ExperimentKind::HeatPositivity, "normalized", &mut c);
    if kind == ExperimentKind::Convexity {
        if model.is_some() {
            // A model only supplies the default dimension here.
            if dim.is_none() {
                dim = n;
            }
            model = None;
        } else if dim.is_none() && obj.get("dim").is_none() {
            c.push("missing required field `dim` (or `model`) for kind `convexity`");
        }
        if let Some(d) = dim {
            if d == 0 {
                c.push("dim must be at least 1");
            }
        }
        trials = Some(trials.unwrap_or(200));
        if trials == Some(0) {
            c.push("trials must be at least 1");
        }
    } else if obj.contains_key("dim") {
        c.push(format!("field `dim` is not used by kind `{kind}`"));
        dim = None;
    }
    if kind == ExperimentKind::EntropyStability {
        fannes_d = fannes_d.or(n);
        if fannes_d == Some(0) {
            c.push("fannes_d must be positive");
        }
    }
    if kind == ExperimentKind::Bochner {
        samples = Some(samples.unwrap_or(100));
        if samples == Some(0) {
            c.push("samples must be at least 1");
        }
    }
    if kind == ExperimentKind::HeatPositivity {
        normalized = Some(normalized.unwrap_or(false));
    }

    let solver = kind
        .uses_solver()
        .then(|| resolve_solver(kind, raw_solver, &mut c));
    if let Some(s) = &solver {
        if kind != ExperimentKind::Evolve && s.solver != SolverKind::Spectral {
            c.push(format!("solver: kind `{kind}` only supports the spectral solver"));
        }
    }

    let mut seen = BTreeSet::new();
    for name in &checks {
        if !kind.checks().contains(&name.as_str()) {
            c.push(format!(
                "unknown check `{name}` for kind `{kind}` (expected one of {})",
                kind.checks().join(", ")
            ));
        }
        if !seen.insert(name.as_str()) {
            c.push(format!("check `{name}` listed twice"));
        }
    }

    let output = output.unwrap_or_else(|| OutputSpec::default_for(kind));
    validate_output(kind, &output, &mut c);

    if !c.errors.is_empty() {
        return Err(CliError::Config(c.errors));
    }
    Ok(ExperimentConfig {
        kind,
        model: if kind.uses_model() { model } else { None },
        init,
        init_other,
        solver,
        function,
        dim,
        trials,
        fannes_d,
        samples,
        normalized,
        checks,
        output,
        seed,
    })
}

fn validate_model(m: &mut ModelSpec, base: &Path, c: &mut Collector) {
    if m.n < 2 {
        c.push(format!("model.n must be at least 2, got {}", m.n));
    }
    match m.variant {
        VariantTag::ClockShift => {
            if m.x.is_some() || m.y.is_some() {
                c.push("model.x/model.y are only used with variant `custom`");
            }
        }
        VariantTag::Custom => {
            for (key, path) in [("model.x", &mut m.x), ("model.y", &mut m.y)] {
                match path {
                    None => c.push(format!("missing required field `{key}` for variant `custom`")),
                    Some(p) => check_matrix_file(key, p, Some(m.n), base, c),
                }
            }
        }
    }
}

fn validate_init(key: &str, spec: &mut InitSpec, n: Option<usize>, base: &Path, c: &mut Collector) {
    match spec {
        InitSpec::Preset(name) => {
            if let Err(e) = check_preset_name(name, n) {
                c.push(format!("{key}: {e}"));
            }
        }
        InitSpec::File(path) => check_matrix_file(key, path, n, base, c),
        InitSpec::Random { .. } => {}
    }
}

/// Makes `path` absolute and checks that it holds an `n × n` matrix.
fn check_matrix_file(key: &str, path: &mut PathBuf, n: Option<usize>, base: &Path, c: &mut Collector) {
    let joined = base.join(&*path);
    let resolved = match std::fs::canonicalize(&joined) {
        Ok(p) => p,
        Err(e) => {
            c.push(format!("{key}: cannot read matrix file {}: {e}", joined.display()));
            return;
        }
    };
    match read_matrix(&resolved) {
        Ok(m) => {
            if let Some(n) = n {
                if m.n() != n {
                    c.push(format!("{key}: {} is {}×{}, model has n = {n}", resolved.display(), m.n(), m.n()));
                }
            }
        }
        Err(e) => c.push(format!("{key}: unreadable matrix file {}: {e}", resolved.display())),
    }
    *path = resolved;
}

fn resolve_solver(kind: ExperimentKind, raw: Option<RawSolver>, c: &mut Collector) -> SolverSpec {
    let d = kind.default_solver();
    let s = match raw {
        None => d,
        Some(r) => SolverSpec {
            solver: r.solver.unwrap_or(d.solver),
            dt: r.dt.unwrap_or(d.dt),
            t_end: r.t_end.unwrap_or(d.t_end),
            tol: r.tol.unwrap_or(d.tol),
            k_max: r.k_max.unwrap_or(d.k_max),
            renormalize: r.renormalize.unwrap_or(d.renormalize),
        },
    };
    if !(s.dt > 0.0 && s.dt.is_finite()) {
        c.push(format!("solver.dt must be positive, got {}", s.dt));
    }
    if !(s.t_end > 0.0 && s.t_end.is_finite()) {
        c.push(format!("solver.t_end must be positive, got {}", s.t_end));
    } else if s.dt > s.t_end {
        c.push(format!("solver.dt = {} exceeds solver.t_end = {}", s.dt, s.t_end));
    }
    if s.tol.is_nan() || s.tol <= 0.0 {
        c.push(format!("solver.tol must be positive, got {}", s.tol));
    }
    if s.k_max == 0 {
        c.push("solver.k_max must be at least 1");
    }
    if s.renormalize && s.solver != SolverKind::Rk4 {
        c.push("solver.renormalize only applies to the rk4 solver");
    }
    s
}

fn validate_output(kind: ExperimentKind, out: &OutputSpec, c: &mut Collector) {
    if out.paths.len() != out.formats.len() {
        c.push(format!(
            "output: {} paths but {} formats",
            out.paths.len(),
            out.formats.len()
        ));
    }
    if out.paths.is_empty() {
        c.push("output: at least one artifact is required");
    }
    for f in &out.formats {
        if !kind.formats().contains(f) {
            c.push(format!("output: format `{}` is not produced by kind `{kind}`", f.extension()));
        }
    }
    let mut seen = BTreeSet::new();
    for p in &out.paths {
        let relative = !p.as_os_str().is_empty()
            && p.components().all(|comp| matches!(comp, Component::Normal(_) | Component::CurDir));
        if !relative {
            c.push(format!("output: path {} must be relative and stay inside the output directory", p.display()));
        }
        if p == Path::new(MANIFEST_FILE) {
            c.push(format!("output: {MANIFEST_FILE} is reserved for the run manifest"));
        }
        if !seen.insert(p) {
            c.push(format!("output: path {} listed twice", p.display()));
        }
    }
}
