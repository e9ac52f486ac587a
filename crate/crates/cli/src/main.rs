use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matflow_cli::{config_from_value, run, CliError, RunManifest, RunStatus};
use serde_json::{json, Map, Value};

/// Laplacian flows on the clock–shift matrix algebra.
#[derive(Parser)]
#[command(name = "matflow", version)]
struct Cli {
    /// Seed for all random draws (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts and manifest.json.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and eigenmatrices of the Laplacian.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Normalized flow from one initial state.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Hilbert–Schmidt stability of a pair of trajectories.
    Stability {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        other: OtherArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Entropy stability of a pair of positive trajectories.
    EntropyStability {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        other: OtherArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Dimension in the Fannes bound (default n).
        #[arg(long)]
        fannes_d: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sampled operator-convexity test of a scalar function.
    Convexity {
        /// identity | square | cube | resolvent:<λ> | loewner:<λ>
        #[arg(long)]
        function: String,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tracks min eig f(a(t)) along the heat flow.
    HeatPositivity {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        function: String,
        /// Follow the normalized flow instead of the heat flow.
        #[arg(long)]
        normalized: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Second-order Leibniz identity on random matrices.
    Bochner {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a JSON experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    n: usize,
    /// clock-shift | custom
    #[arg(long)]
    variant: Option<String>,
    /// Matrix file for X (custom variant).
    #[arg(long)]
    x: Option<PathBuf>,
    /// Matrix file for Y (custom variant).
    #[arg(long)]
    y: Option<PathBuf>,
}

#[derive(Args)]
struct InitArgs {
    /// Preset name, `file:<path>`, or `random:<ensemble>:<seed>`.
    #[arg(long, visible_alias = "u0")]
    init: String,
}

#[derive(Args)]
struct OtherArgs {
    /// Second initial state, same syntax as --init.
    #[arg(long, visible_alias = "v0")]
    other: String,
}

#[derive(Args)]
struct SolverArgs {
    /// spectral | picard | rk4
    #[arg(long)]
    solver: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Project back to the unit sphere after every RK4 step.
    #[arg(long)]
    renormalize: bool,
}

#[derive(Args)]
struct CommonArgs {
    /// Check to assert (repeatable).
    #[arg(long = "check")]
    checks: Vec<String>,
    /// Artifact format, csv or json (repeatable); written as <kind>.<format>.
    #[arg(long = "format")]
    formats: Vec<String>,
    /// Artifact path (repeatable), format taken from the extension.
    #[arg(long = "out")]
    outs: Vec<PathBuf>,
}

impl ModelArgs {
    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("n".into(), json!(self.n));
        insert_opt(&mut m, "variant", self.variant.as_ref());
        insert_opt(&mut m, "x", self.x.as_ref());
        insert_opt(&mut m, "y", self.y.as_ref());
        Value::Object(m)
    }
}

impl SolverArgs {
    fn to_json(&self) -> Value {
        let mut m = Map::new();
        insert_opt(&mut m, "solver", self.solver.as_ref());
        insert_opt(&mut m, "dt", self.dt.as_ref());
        insert_opt(&mut m, "t_end", self.t_end.as_ref());
        insert_opt(&mut m, "tol", self.tol.as_ref());
        insert_opt(&mut m, "k_max", self.k_max.as_ref());
        if self.renormalize {
            m.insert("renormalize".into(), json!(true));
        }
        Value::Object(m)
    }
}

fn insert_opt<T: serde::Serialize>(m: &mut Map<String, Value>, key: &str, v: Option<&T>) {
    if let Some(v) = v {
        m.insert(key.into(), json!(v));
    }
}

fn init_json(spec: &str) -> Value {
    if let Some(path) = spec.strip_prefix("file:") {
        return json!({ "file": path });
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        if let Some((ensemble, seed)) = rest.rsplit_once(':') {
            // A non-numeric seed is passed through as a string so validation reports it.
            let seed = seed.parse::<u64>().map(Value::from).unwrap_or_else(|_| json!(seed));
            return json!({ "random": { "ensemble": ensemble, "seed": seed } });
        }
        return json!({ "random": { "ensemble": rest } });
    }
    json!({ "preset": spec })
}

fn common_json(m: &mut Map<String, Value>, kind: &str, common: &CommonArgs) {
    if !common.checks.is_empty() {
        m.insert("checks".into(), json!(common.checks));
    }
    let mut paths: Vec<String> = common.formats.iter().map(|f| format!("{kind}.{f}")).collect();
    let mut formats = common.formats.clone();
    for out in &common.outs {
        paths.push(out.to_string_lossy().into_owned());
        let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("");
        formats.push(ext.to_string());
    }
    if !paths.is_empty() {
        m.insert("output".into(), json!({ "paths": paths, "formats": formats }));
    }
}

/// Translates a subcommand into the same JSON document a config file holds.
fn command_json(command: Command) -> Result<(Value, PathBuf), CliError> {
    let cwd = PathBuf::from(".");
    let mut m = Map::new();
    let (kind, common) = match command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::Io {
                path: config.clone(),
                message: e.to_string(),
            })?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(vec![format!("malformed JSON: {e}")]))?;
            let base = config.parent().map(Path::to_path_buf).unwrap_or(cwd);
            return Ok((value, base));
        }
        Command::Spectrum { model, common } => {
            m.insert("model".into(), model.to_json());
            ("spectrum", common)
        }
        Command::Evolve { model, init, solver, common } => {
            m.insert("model".into(), model.to_json());
            m.insert("init".into(), init_json(&init.init));
            m.insert("solver".into(), solver.to_json());
            ("evolve", common)
        }
        Command::Stability { model, init, other, solver, common } => {
            m.insert("model".into(), model.to_json());
            m.insert("init".into(), init_json(&init.init));
            m.insert("init_other".into(), init_json(&other.other));
            m.insert("solver".into(), solver.to_json());
            ("stability", common)
        }
        Command::EntropyStability { model, init, other, solver, fannes_d, common } => {
            m.insert("model".into(), model.to_json());
            m.insert("init".into(), init_json(&init.init));
            m.insert("init_other".into(), init_json(&other.other));
            m.insert("solver".into(), solver.to_json());
            insert_opt(&mut m, "fannes_d", fannes_d.as_ref());
            ("entropy-stability", common)
        }
        Command::Convexity { function, dim, trials, common } => {
            m.insert("function".into(), json!(function));
            m.insert("dim".into(), json!(dim));
            insert_opt(&mut m, "trials", trials.as_ref());
            ("convexity", common)
        }
        Command::HeatPositivity { model, init, solver, function, normalized, common } => {
            m.insert("model".into(), model.to_json());
            m.insert("init".into(), init_json(&init.init));
            m.insert("solver".into(), solver.to_json());
            m.insert("function".into(), json!(function));
            m.insert("normalized".into(), json!(normalized));
            ("heat-positivity", common)
        }
        Command::Bochner { model, samples, common } => {
            m.insert("model".into(), model.to_json());
            insert_opt(&mut m, "samples", samples.as_ref());
            ("bochner", common)
        }
    };
    m.insert("kind".into(), json!(kind));
    common_json(&mut m, kind, &common);
    Ok((Value::Object(m), cwd))
}

fn summarize(manifest: &RunManifest, out_dir: &Path) {
    for path in &manifest.artifacts {
        println!("wrote {}", out_dir.join(path).display());
    }
    for c in &manifest.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let status = match manifest.status {
        RunStatus::Pass => "pass",
        RunStatus::CheckFailure => "check failure",
        RunStatus::Error => "error",
    };
    println!("{} in {:.3}s: {status}", manifest.config.kind, manifest.duration_secs);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = command_json(cli.command).and_then(|(mut value, base)| {
        if let (Some(seed), Value::Object(m)) = (cli.seed, &mut value) {
            m.insert("seed".into(), json!(seed));
        }
        config_from_value(value, &base)
    });
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("matflow: {e}");
            return ExitCode::from(2);
        }
    };
    let manifest = run(&config, &cli.out_dir);
    if let Some(err) = &manifest.error {
        eprintln!("matflow: {err}");
    }
    if !cli.quiet {
        summarize(&manifest, &cli.out_dir);
    }
    ExitCode::from(manifest.exit_code() as u8)
}
