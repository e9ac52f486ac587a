//! Heat flow `b_t = −Δ̂b` and the normalized flow `a_t = −Δ̂a + λ(a)a`.
//!
//! Three solvers for the normalized flow:
//! * [`SpectralFlow`]: closed form through the Laplacian eigenbasis,
//!   `a(t) = b(t)/|b(t)|` with `b(t) = Σ u_i(0) e^{−λ_i t} φ_i`;
//! * [`normalized_flow_picard`]: freeze `λ_k(t)`, solve the linear equation
//!   spectrally, recompute `λ_{k+1}(t)` from the new iterate;
//! * [`normalized_flow_rk4`]: classical fixed-step RK4 on the ODE itself.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, hs_inner, hs_norm_sq, Matrix};
use crate::torus::{EigenBasis, TorusModel};

const UNIT_NORM_TOL: f64 = 1e-9;
/// Spectral coefficients below this fraction of `|a0|` are treated as roundoff.
/// Without the cutoff a roundoff-level kernel component of trace-free data
/// grows like `e^{∫λ}` and eventually takes over the normalized flow.
pub const COEFF_CUTOFF: f64 = 1e-12;
const MIN_DT: f64 = 1e-12;
const TRACE_FREE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Spectral,
    Picard,
    Rk4,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "picard" => Ok(Self::Picard),
            "rk4" => Ok(Self::Rk4),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowObservation {
    pub t: f64,
    pub lambda: f64,
    pub norm_sq: f64,
    pub trace: Complex64,
    pub min_eig: Option<f64>,
    /// `|Δ̂a − λ(a)a|`, the component of `Δ̂a` orthogonal to `a`.
    pub residual: f64,
    pub log_det: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub lambda_inf: f64,
    /// First index of the matched eigenvalue level.
    pub matched_eigenvalue_index: usize,
    /// All indices sharing the matched eigenvalue.
    pub matched_level: Range<usize>,
    pub final_residual: f64,
    pub t_converged: f64,
    pub trace_free_initial: bool,
    /// `λ_∞ ≥ λ_1 − tol`; only meaningful for trace-free initial data.
    pub gap_bound_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConvergenceStatus {
    Converged(ConvergenceReport),
    NotConverged { final_residual: f64, lambda_spread: f64 },
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub observations: Vec<FlowObservation>,
    pub states: Option<Vec<Matrix>>,
    pub solver: SolverKind,
    pub converged: Option<ConvergenceReport>,
}

/// Uniform grid `t_j = j·dt` on `[0, t_end]`; the last step is shortened to
/// land on `t_end` when `dt` does not divide it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_end: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt.is_finite() && t_end.is_finite()) || t_end < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid time grid dt={dt}, t_end={t_end}"
            )));
        }
        if dt < MIN_DT {
            return Err(Error::InvalidArgument(format!("time step {dt} below {MIN_DT}")));
        }
        Ok(Self { dt, t_end })
    }

    pub fn points(&self) -> Vec<f64> {
        let steps = ((self.t_end / self.dt) - 1e-9).ceil().max(0.0) as usize;
        let mut pts: Vec<f64> = (0..=steps).map(|j| (j as f64 * self.dt).min(self.t_end)).collect();
        pts.dedup();
        pts
    }
}

fn require_unit(a0: &Matrix) -> Result<()> {
    let norm_sq = hs_norm_sq(a0);
    if (norm_sq - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(())
}

/// Observables of state `a` at time `t`.
pub fn observe(model: &TorusModel, t: f64, a: &Matrix) -> Result<FlowObservation> {
    let lap = model.laplacian(a)?;
    let lambda = model.rayleigh(a)?;
    let residual = (&lap - &a.scale(lambda)).hs_norm();
    let (min_eig, log_det) = if a.is_hermitian() {
        let eig = hermitian_eig(a)?;
        let min = eig.eigenvalues[0];
        let ld = (min > 0.0).then(|| eig.eigenvalues.iter().map(|l| l.ln()).sum());
        (Some(min), ld)
    } else {
        (None, None)
    };
    Ok(FlowObservation {
        t,
        lambda,
        norm_sq: hs_norm_sq(a),
        trace: a.trace(),
        min_eig,
        residual,
        log_det,
    })
}

/// Closed-form solutions through the eigenbasis for one initial state.
#[derive(Debug, Clone)]
pub struct SpectralFlow<'m> {
    basis: &'m EigenBasis,
    n: usize,
    coeffs: Vec<Complex64>,
    /// Smallest eigenvalue carrying a non-negligible coefficient; factored out
    /// of the normalized solution so long horizons do not underflow.
    lambda_ref: f64,
}

impl<'m> SpectralFlow<'m> {
    pub fn new(model: &'m TorusModel, a0: &Matrix) -> Result<Self> {
        let basis = model.eigenbasis()?;
        let mut coeffs = model.decompose(a0)?.coeffs;
        let total = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in coeffs.iter_mut() {
            if c.norm() <= COEFF_CUTOFF * total {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        let lambda_ref = coeffs
            .iter()
            .zip(&basis.eigenvalues)
            .filter(|(c, _)| c.norm() > 0.0)
            .map(|(_, &l)| l)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            basis,
            n: model.n(),
            coeffs,
            lambda_ref: if lambda_ref.is_finite() { lambda_ref } else { 0.0 },
        })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn combine(&self, weight: impl Fn(f64) -> f64) -> Matrix {
        let mut out = Matrix::zeros(self.n);
        for ((c, phi), &l) in self
            .coeffs
            .iter()
            .zip(&self.basis.eigenmatrices)
            .zip(&self.basis.eigenvalues)
        {
            if c.norm() == 0.0 {
                continue;
            }
            let w = weight(l);
            if w != 0.0 {
                out.axpy(c * w, phi);
            }
        }
        out
    }

    /// `b(t) = Σ u_i(0) e^{−λ_i t} φ_i`, cutoff-filtered coefficients.
    pub fn heat_at(&self, t: f64) -> Matrix {
        self.combine(|l| (-l * t).exp())
    }

    /// `b(t)/|b(t)|`
    pub fn normalized_at(&self, t: f64) -> Matrix {
        let b = self.combine(|l| (-(l - self.lambda_ref) * t).exp());
        let norm = b.hs_norm();
        b.scale(1.0 / norm)
    }
}

/// Exact heat-flow solution `Σ u_i(0) e^{−λ_i t} φ_i`.
pub fn heat_flow_spectral(model: &TorusModel, a0: &Matrix, t: f64) -> Result<Matrix> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let basis = model.eigenbasis()?;
    let coeffs = model.decompose(a0)?;
    let mut out = Matrix::zeros(model.n());
    for ((c, phi), &l) in coeffs.coeffs.iter().zip(&basis.eigenmatrices).zip(&basis.eigenvalues) {
        out.axpy(c * (-l * t).exp(), phi);
    }
    Ok(out)
}

/// Normalized-flow solution at time `t` for unit-norm `a0`.
pub fn normalized_flow_spectral(model: &TorusModel, a0: &Matrix, t: f64) -> Result<Matrix> {
    require_unit(a0)?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    Ok(SpectralFlow::new(model, a0)?.normalized_at(t))
}

/// Spectral normalized flow sampled on `grid`.
pub fn spectral_trace(
    model: &TorusModel,
    a0: &Matrix,
    grid: TimeGrid,
    keep_states: bool,
) -> Result<FlowTrace> {
    require_unit(a0)?;
    let flow = SpectralFlow::new(model, a0)?;
    let mut observations = Vec::new();
    let mut states = keep_states.then(Vec::new);
    for t in grid.points() {
        let a = if t == 0.0 { a0.clone() } else { flow.normalized_at(t) };
        observations.push(observe(model, t, &a)?);
        if let Some(s) = states.as_mut() {
            s.push(a);
        }
    }
    Ok(FlowTrace {
        observations,
        states,
        solver: SolverKind::Spectral,
        converged: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardParams {
    pub t_end: f64,
    pub dt: f64,
    pub k_max: usize,
    pub tol: f64,
}

impl Default for PicardParams {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 1e-3,
            k_max: 50,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// Observations of the last iterate.
    pub trace: FlowTrace,
    /// Index `k` of the last iterate `a_k`.
    pub iterations: usize,
    /// `sup_t |a_{k+1} − a_k|` for each completed iteration.
    pub distances: Vec<f64>,
    pub converged: bool,
    pub sup_distance_to_spectral: f64,
}

fn trapezoid_cumulative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(times.len());
    let mut s = 0.0;
    acc.push(0.0);
    for j in 1..times.len() {
        s += 0.5 * (values[j] + values[j - 1]) * (times[j] - times[j - 1]);
        acc.push(s);
    }
    acc
}

/// Cumulative trapezoid rule with the endpoint-derivative correction
/// `h²/12·(f'_0 − f'_1)` per step, fourth order for smooth `f`.
fn hermite_cumulative(times: &[f64], values: &[f64], slopes: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(times.len());
    let mut s = 0.0;
    acc.push(0.0);
    for j in 1..times.len() {
        let h = times[j] - times[j - 1];
        s += 0.5 * h * (values[j] + values[j - 1]) + h * h / 12.0 * (slopes[j - 1] - slopes[j]);
        acc.push(s);
    }
    acc
}

/// `λ(a)` and its time derivative `−2|Δ̂â − λâ|²`, `â = a/|a|`, along the flow.
fn rayleigh_and_slope(model: &TorusModel, a: &Matrix) -> Result<(f64, f64)> {
    let lambda = model.rayleigh(a)?;
    let r = (&model.laplacian(a)? - &a.scale(lambda)).hs_norm();
    Ok((lambda, -2.0 * r * r / hs_norm_sq(a)))
}

/// Picard iteration for the normalized flow.
///
/// `a_1` solves the linear equation with `λ_0 ≡ λ(a0)`; `a_{k+1}(t) =
/// e^{∫₀ᵗλ_k} b(t)` with `λ_k(t) = λ(a_k(t))`. The integral uses the
/// trapezoid rule with endpoint-derivative correction on the grid. Stops when `sup_t |a_{k+1} − a_k| ≤ tol`;
/// otherwise returns the last iterate with `converged == false`.
pub fn normalized_flow_picard(
    model: &TorusModel,
    a0: &Matrix,
    params: PicardParams,
) -> Result<PicardOutcome> {
    require_unit(a0)?;
    if params.t_end <= 0.0 || params.tol <= 0.0 || params.k_max == 0 {
        return Err(Error::InvalidArgument(format!(
            "Picard needs t_end > 0, tol > 0, k_max >= 1 (got {params:?})"
        )));
    }
    let grid = TimeGrid::new(params.dt, params.t_end)?;
    let times = grid.points();
    let flow = SpectralFlow::new(model, a0)?;
    let heat: Vec<Matrix> = times.iter().map(|&t| flow.heat_at(t)).collect();

    let lambda0 = model.rayleigh(a0)?;
    let lambdas = vec![lambda0; times.len()];
    let mut iterate = scaled_iterate(&heat, &trapezoid_cumulative(&times, &lambdas));
    let mut k = 1;
    let mut distances = Vec::new();
    let mut converged = false;
    while k < params.k_max {
        let (lambdas, slopes): (Vec<f64>, Vec<f64>) = iterate
            .iter()
            .map(|a| rayleigh_and_slope(model, a))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let next = scaled_iterate(&heat, &hermite_cumulative(&times, &lambdas, &slopes));
        let dist = next
            .iter()
            .zip(&iterate)
            .map(|(a, b)| a.hs_distance(b))
            .fold(0.0, f64::max);
        distances.push(dist);
        iterate = next;
        k += 1;
        if dist <= params.tol {
            converged = true;
            break;
        }
    }

    let mut observations = Vec::with_capacity(times.len());
    let mut sup_dist: f64 = 0.0;
    for (&t, a) in times.iter().zip(&iterate) {
        observations.push(observe(model, t, a)?);
        sup_dist = sup_dist.max(a.hs_distance(&flow.normalized_at(t)));
    }
    Ok(PicardOutcome {
        trace: FlowTrace {
            observations,
            states: Some(iterate),
            solver: SolverKind::Picard,
            converged: None,
        },
        iterations: k,
        distances,
        converged,
        sup_distance_to_spectral: sup_dist,
    })
}

fn scaled_iterate(heat: &[Matrix], integral: &[f64]) -> Vec<Matrix> {
    heat.iter().zip(integral).map(|(b, s)| b.scale(s.exp())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk4Params {
    pub dt: f64,
    pub t_end: f64,
    pub renormalize_each_step: bool,
    pub keep_states: bool,
}

fn normalized_rhs(model: &TorusModel, a: &Matrix) -> Result<Matrix> {
    let lap = model.laplacian(a)?;
    let lambda = hs_inner(a, &lap)?.re / hs_norm_sq(a);
    Ok(&a.scale(lambda) - &lap)
}

/// Fixed-step classical RK4 on `a_t = −Δ̂a + λ(a)a`, observed at every step.
pub fn normalized_flow_rk4(model: &TorusModel, a0: &Matrix, params: Rk4Params) -> Result<FlowTrace> {
    require_unit(a0)?;
    if params.dt < MIN_DT {
        return Err(Error::InvalidArgument(format!(
            "time step {} below {MIN_DT}",
            params.dt
        )));
    }
    if params.dt > params.t_end {
        return Err(Error::InvalidArgument(format!(
            "time step {} exceeds t_end {}",
            params.dt, params.t_end
        )));
    }
    let times = TimeGrid::new(params.dt, params.t_end)?.points();
    let mut a = a0.clone();
    let mut observations = vec![observe(model, 0.0, &a)?];
    let mut states = params.keep_states.then(|| vec![a.clone()]);
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let k1 = normalized_rhs(model, &a)?;
        let mut s = a.clone();
        s.axpy(Complex64::new(0.5 * h, 0.0), &k1);
        let k2 = normalized_rhs(model, &s)?;
        let mut s = a.clone();
        s.axpy(Complex64::new(0.5 * h, 0.0), &k2);
        let k3 = normalized_rhs(model, &s)?;
        let mut s = a.clone();
        s.axpy(Complex64::new(h, 0.0), &k3);
        let k4 = normalized_rhs(model, &s)?;
        a.axpy(Complex64::new(h / 6.0, 0.0), &k1);
        a.axpy(Complex64::new(h / 3.0, 0.0), &k2);
        a.axpy(Complex64::new(h / 3.0, 0.0), &k3);
        a.axpy(Complex64::new(h / 6.0, 0.0), &k4);
        if params.renormalize_each_step {
            a = a.scale(1.0 / a.hs_norm());
        }
        observations.push(observe(model, w[1], &a)?);
        if let Some(st) = states.as_mut() {
            st.push(a.clone());
        }
    }
    Ok(FlowTrace {
        observations,
        states,
        solver: SolverKind::Rk4,
        converged: None,
    })
}

/// Decides whether a trajectory has settled on an eigen-matrix: final residual
/// `≤ tol` and `λ` varying by at most `tol` over the last 10% of samples.
pub fn detect_convergence(trace: &FlowTrace, basis: &EigenBasis, tol: f64) -> Result<ConvergenceStatus> {
    let obs = &trace.observations;
    let last = obs
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty flow trace".into()))?;
    let window = (obs.len() / 10).max(2).min(obs.len());
    let tail = &obs[obs.len() - window..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.lambda), hi.max(o.lambda)));
    let spread = hi - lo;

    let lambda_inf = last.lambda;
    let nearest = basis.nearest(lambda_inf);
    let level = basis.level_of(nearest);
    let matches = (lambda_inf - basis.eigenvalues[level.start]).abs() <= tol.max(last.residual);
    if last.residual > tol || spread > tol || !matches {
        return Ok(ConvergenceStatus::NotConverged {
            final_residual: last.residual,
            lambda_spread: spread,
        });
    }

    let settled_from = obs
        .iter()
        .rposition(|o| o.residual > tol)
        .map(|i| i + 1)
        .unwrap_or(0);
    let trace_free_initial = obs[0].trace.norm() <= TRACE_FREE_TOL;
    Ok(ConvergenceStatus::Converged(ConvergenceReport {
        lambda_inf,
        matched_eigenvalue_index: level.start,
        matched_level: level,
        final_residual: last.residual,
        t_converged: obs[settled_from].t,
        trace_free_initial,
        gap_bound_holds: trace_free_initial.then_some(lambda_inf >= basis.gap - tol),
    }))
}

impl FlowTrace {
    pub fn final_observation(&self) -> Option<&FlowObservation> {
        self.observations.last()
    }

    pub fn times_strictly_increasing(&self) -> bool {
        self.observations.windows(2).all(|w| w[1].t > w[0].t)
    }

    /// Largest single-step increase of `λ` (≤ 0 for a monotone trajectory).
    pub fn max_rayleigh_increase(&self) -> f64 {
        self.observations
            .windows(2)
            .map(|w| w[1].lambda - w[0].lambda)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.observations
            .iter()
            .map(|o| (o.norm_sq - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest single-step decrease of `log det`, over steps where both ends are PD.
    /// `None` when some recorded state is not positive definite.
    pub fn max_log_det_decrease(&self) -> Option<f64> {
        let mut worst = f64::NEG_INFINITY;
        for w in self.observations.windows(2) {
            let (a, b) = (w[0].log_det?, w[1].log_det?);
            worst = worst.max(a - b);
        }
        Some(worst)
    }

    pub fn min_state_eigenvalue(&self) -> Option<f64> {
        self.observations
            .iter()
            .map(|o| o.min_eig)
            .try_fold(f64::INFINITY, |m, e| e.map(|e| m.min(e)))
    }

    /// `max_t |σ(a(t)) − σ(a0)·exp(∫₀ᵗλ)|` with the integral by the trapezoid
    /// rule on the recorded samples.
    pub fn trace_law_error(&self) -> f64 {
        let times: Vec<f64> = self.observations.iter().map(|o| o.t).collect();
        let lambdas: Vec<f64> = self.observations.iter().map(|o| o.lambda).collect();
        let integral = trapezoid_cumulative(&times, &lambdas);
        let tr0 = self.observations[0].trace;
        self.observations
            .iter()
            .zip(integral)
            .map(|(o, s)| (o.trace - tr0 * s.exp()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_trace(&self) -> f64 {
        self.observations.iter().map(|o| o.trace.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_tracefree_unit, rng_from_seed};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sx() -> Matrix {
        Matrix::from_row_major(vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap()
    }

    fn sy() -> Matrix {
        Matrix::from_row_major(vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap()
    }

    fn two_mode() -> Matrix {
        (&sx() + &sy()).scale(0.5)
    }

    #[test]
    fn grid_points() {
        assert_eq!(TimeGrid::new(0.25, 1.0).unwrap().points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(TimeGrid::new(0.4, 1.0).unwrap().points(), vec![0.0, 0.4, 0.8, 1.0]);
        assert!(TimeGrid::new(1e-13, 1.0).is_err());
    }

    #[test]
    fn heat_flow_examples() {
        let m = TorusModel::clock_shift(2).unwrap();
        let a0 = two_mode();
        assert!(heat_flow_spectral(&m, &a0, 0.0).unwrap().max_abs_diff(&a0) < 1e-10);
        let expected = (&sx().scale((-1f64).exp()) + &sy().scale((-2f64).exp())).scale(0.5);
        assert!(heat_flow_spectral(&m, &a0, 1.0).unwrap().max_abs_diff(&expected) < 1e-12);

        let phi = &m.eigenbasis().unwrap().eigenmatrices[3];
        let decayed = heat_flow_spectral(&m, phi, 0.7).unwrap();
        assert!(decayed.max_abs_diff(&phi.scale((-2.0 * 0.7f64).exp())) < 1e-12);
        assert!(heat_flow_spectral(&m, &a0, -1.0).is_err());
    }

    #[test]
    fn normalized_flow_examples() {
        let m = TorusModel::clock_shift(2).unwrap();
        let b = m.eigenbasis().unwrap();
        for phi in &b.eigenmatrices {
            for t in [0.0, 1.0, 50.0] {
                let a = normalized_flow_spectral(&m, phi, t).unwrap();
                assert!(a.max_abs_diff(phi) < 1e-12);
            }
        }
        let limit = normalized_flow_spectral(&m, &two_mode(), 60.0).unwrap();
        assert!(limit.max_abs_diff(&sx().scale(std::f64::consts::FRAC_1_SQRT_2)) < 1e-12);
        assert!((m.rayleigh(&limit).unwrap() - 1.0).abs() < 1e-12);

        // closed form: a(t) = (e^{-t}σx + e^{-2t}σy) / sqrt(2(e^{-2t} + e^{-4t}))
        for t in [0.3f64, 1.0, 2.5] {
            let (p, q) = ((-t).exp(), (-2.0 * t).exp());
            let norm = (2.0 * (p * p + q * q)).sqrt();
            let expected = (&sx().scale(p / norm) + &sy().scale(q / norm)).clone();
            let got = normalized_flow_spectral(&m, &two_mode(), t).unwrap();
            assert!(got.max_abs_diff(&expected) < 1e-12);
            assert!((hs_norm_sq(&got) - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            normalized_flow_spectral(&m, &sx(), 1.0),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn observe_examples() {
        let m = TorusModel::clock_shift(2).unwrap();
        let o = observe(&m, 0.0, &two_mode()).unwrap();
        assert!((o.lambda - 1.5).abs() < 1e-12);
        assert!((o.residual - 0.5).abs() < 1e-12);
        assert!((o.norm_sq - 1.0).abs() < 1e-12);
        assert!(o.min_eig.is_some() && o.log_det.is_none());

        let id = Matrix::identity(3).scale(1.0 / 3f64.sqrt());
        let m3 = TorusModel::clock_shift(3).unwrap();
        let o = observe(&m3, 0.0, &id).unwrap();
        assert!(o.lambda.abs() < 1e-14 && o.residual < 1e-14);
        assert!((o.log_det.unwrap() - 3.0 * (1.0 / 3f64.sqrt()).ln()).abs() < 1e-12);

        let phi = &m3.eigenbasis().unwrap().eigenmatrices[4];
        assert!(observe(&m3, 0.0, phi).unwrap().residual < 1e-8);

        let non_herm = Matrix::unit(2, 0, 1);
        let o = observe(&m, 0.0, &non_herm).unwrap();
        assert!(o.min_eig.is_none() && o.log_det.is_none());
    }

    #[test]
    fn picard_fixed_point_on_eigenmatrix() {
        let m = TorusModel::clock_shift(3).unwrap();
        let phi = m.eigenbasis().unwrap().eigenmatrices[2].clone();
        let out = normalized_flow_picard(&m, &phi, PicardParams { t_end: 0.5, dt: 1e-2, ..Default::default() }).unwrap();
        assert!(out.converged);
        assert!(out.distances[0] < 1e-12);
        let states = out.trace.states.as_ref().unwrap();
        assert!(states.iter().all(|a| a.max_abs_diff(&phi) < 1e-12));
    }

    #[test]
    fn picard_matches_spectral_two_mode() {
        let m = TorusModel::clock_shift(2).unwrap();
        let out = normalized_flow_picard(&m, &two_mode(), PicardParams::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 50);
        assert!(out.sup_distance_to_spectral <= 1e-6, "{}", out.sup_distance_to_spectral);
    }

    #[test]
    fn picard_reports_nonconvergence() {
        let m = TorusModel::clock_shift(2).unwrap();
        let params = PicardParams { k_max: 1, ..Default::default() };
        let out = normalized_flow_picard(&m, &two_mode(), params).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.trace.observations.len(), 1001);
    }

    #[test]
    fn picard_distances_decrease_after_warmup() {
        let m = TorusModel::clock_shift(3).unwrap();
        let a0 = random_tracefree_unit(&mut rng_from_seed(21), 3);
        let out = normalized_flow_picard(&m, &a0, PicardParams { tol: 1e-10, ..Default::default() }).unwrap();
        assert!(out.converged);
        let tail = &out.distances[out.distances.len().min(3)..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rk4_stationary_and_fourth_order() {
        let m = TorusModel::clock_shift(3).unwrap();
        let phi = m.eigenbasis().unwrap().eigenmatrices[1].clone();
        let tr = normalized_flow_rk4(
            &m,
            &phi,
            Rk4Params { dt: 1e-2, t_end: 1.0, renormalize_each_step: false, keep_states: true },
        )
        .unwrap();
        assert!(tr.states.unwrap().last().unwrap().max_abs_diff(&phi) < 1e-8);

        let m = TorusModel::clock_shift(2).unwrap();
        let err = |dt: f64| {
            let tr = normalized_flow_rk4(
                &m,
                &two_mode(),
                Rk4Params { dt, t_end: 1.0, renormalize_each_step: false, keep_states: true },
            )
            .unwrap();
            let flow = SpectralFlow::new(&m, &two_mode()).unwrap();
            tr.observations
                .iter()
                .zip(tr.states.unwrap())
                .map(|(o, a)| a.hs_distance(&flow.normalized_at(o.t)))
                .fold(0.0, f64::max)
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_rejects_bad_steps() {
        let m = TorusModel::clock_shift(2).unwrap();
        let p = Rk4Params { dt: 1e-13, t_end: 1.0, renormalize_each_step: false, keep_states: false };
        assert!(normalized_flow_rk4(&m, &two_mode(), p).is_err());
        let p = Rk4Params { dt: 2.0, t_end: 1.0, ..p };
        assert!(normalized_flow_rk4(&m, &two_mode(), p).is_err());
    }

    #[test]
    fn convergence_examples() {
        let m = TorusModel::clock_shift(3).unwrap();
        let basis = m.eigenbasis().unwrap();
        let phi2 = basis.eigenmatrices[2].clone();
        let tr = spectral_trace(&m, &phi2, TimeGrid::new(0.1, 2.0).unwrap(), false).unwrap();
        match detect_convergence(&tr, basis, 1e-8).unwrap() {
            ConvergenceStatus::Converged(r) => {
                assert_eq!(r.matched_level, basis.level_of(2));
                assert_eq!(r.t_converged, 0.0);
            }
            other => panic!("{other:?}"),
        }

        let m2 = TorusModel::clock_shift(2).unwrap();
        let b2 = m2.eigenbasis().unwrap();
        let tr = spectral_trace(&m2, &two_mode(), TimeGrid::new(0.5, 40.0).unwrap(), false).unwrap();
        match detect_convergence(&tr, b2, 1e-8).unwrap() {
            ConvergenceStatus::Converged(r) => {
                assert!((r.lambda_inf - 1.0).abs() < 1e-8);
                assert_eq!(r.matched_eigenvalue_index, 1);
                assert_eq!(r.matched_level, 1..3);
                assert_eq!(r.gap_bound_holds, Some(true));
            }
            other => panic!("{other:?}"),
        }

        let id = Matrix::identity(3).scale(1.0 / 3f64.sqrt());
        let tr = spectral_trace(&m, &id, TimeGrid::new(0.5, 5.0).unwrap(), false).unwrap();
        match detect_convergence(&tr, basis, 1e-8).unwrap() {
            ConvergenceStatus::Converged(r) => {
                assert_eq!(r.matched_eigenvalue_index, 0);
                assert!(!r.trace_free_initial);
                assert_eq!(r.gap_bound_holds, None);
            }
            other => panic!("{other:?}"),
        }

        let tr = spectral_trace(&m2, &two_mode(), TimeGrid::new(0.5, 2.0).unwrap(), false).unwrap();
        assert!(matches!(
            detect_convergence(&tr, b2, 1e-8).unwrap(),
            ConvergenceStatus::NotConverged { .. }
        ));
    }
}
