//! Named initial data.

use matflow_core::random::{
    normalize, random_complex_gaussian, random_hermitian, random_pd_unit, random_tracefree_unit,
    rng_from_seed, sub_seed,
};
use matflow_core::{Matrix, TorusModel};

use crate::config::{Ensemble, InitSpec};
use crate::CliError;

pub const PRESETS: [&str; 4] = ["two-mode", "random-tracefree-unit", "random-pd-unit", "eigen:<i>"];
pub const PD_EPSILON: f64 = 1e-2;

/// Validates a preset name; with `n` known, also the `eigen:<i>` index.
pub fn check_preset_name(name: &str, n: Option<usize>) -> Result<(), String> {
    match name {
        "two-mode" | "random-tracefree-unit" | "random-pd-unit" => Ok(()),
        _ => match name.strip_prefix("eigen:") {
            Some(idx) => {
                let i: usize = idx
                    .parse()
                    .map_err(|_| format!("bad eigen index in preset `{name}`"))?;
                match n {
                    Some(n) if i >= n * n => Err(format!(
                        "preset `{name}`: index out of range (n = {n} has {} modes)",
                        n * n
                    )),
                    _ => Ok(()),
                }
            }
            None => Err(format!(
                "unknown preset `{name}` (expected one of {})",
                PRESETS.join(", ")
            )),
        },
    }
}

/// Preset on the clock–shift model of size `n`.
pub fn preset(name: &str, n: usize, seed: u64) -> Result<Matrix, CliError> {
    preset_for(&TorusModel::clock_shift(n)?, name, seed)
}

/// Presets:
/// * `two-mode`: `(φ_p + φ_q)/√2`, `p`, `q` the first modes of the two lowest
///   nonzero levels (`(σx + σy)/2` for n = 2);
/// * `random-tracefree-unit`: Hermitian, trace removed, unit norm;
/// * `random-pd-unit`: `B†B + εI`, ε = 1e-2, unit norm;
/// * `eigen:<i>`: `φ_i`.
pub fn preset_for(model: &TorusModel, name: &str, seed: u64) -> Result<Matrix, CliError> {
    check_preset_name(name, Some(model.n())).map_err(|e| CliError::Config(vec![e]))?;
    let n = model.n();
    let mut rng = rng_from_seed(seed);
    Ok(match name {
        "two-mode" => {
            let basis = model.eigenbasis()?;
            let p = basis.levels[1].start;
            let q = basis.levels[2].start;
            (&basis.eigenmatrices[p] + &basis.eigenmatrices[q]).scale(std::f64::consts::FRAC_1_SQRT_2)
        }
        "random-tracefree-unit" => random_tracefree_unit(&mut rng, n),
        "random-pd-unit" => random_pd_unit(&mut rng, n, PD_EPSILON),
        eigen => {
            let i: usize = eigen["eigen:".len()..].parse().expect("validated");
            model.eigenbasis()?.eigenmatrices[i].clone()
        }
    })
}

pub fn draw(ensemble: Ensemble, n: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    match ensemble {
        Ensemble::TracefreeUnit => random_tracefree_unit(&mut rng, n),
        Ensemble::PdUnit => random_pd_unit(&mut rng, n, PD_EPSILON),
        Ensemble::HermitianUnit => normalize(&random_hermitian(&mut rng, n)),
        Ensemble::GaussianUnit => normalize(&random_complex_gaussian(&mut rng, n)),
    }
}

/// Materializes initial data. Seeded presets use `sub_seed(seed, slot)`, so
/// the two states of a pair differ.
pub fn resolve_init(spec: &InitSpec, model: &TorusModel, seed: u64, slot: u64) -> Result<Matrix, CliError> {
    match spec {
        InitSpec::Preset(name) => preset_for(model, name, sub_seed(seed, slot)),
        InitSpec::File(path) => {
            let m = matflow_core::matrix_io::read_matrix(path)?;
            if m.n() != model.n() {
                return Err(matflow_core::Error::DimensionMismatch {
                    expected: model.n(),
                    found: m.n(),
                }
                .into());
            }
            Ok(m)
        }
        InitSpec::Random { ensemble, seed } => Ok(draw(*ensemble, model.n(), *seed)),
    }
}
