//! Entropy, trace distance, the Fannes continuity bound, and two-trajectory
//! stability experiments on the normalized flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{SpectralFlow, TimeGrid};
use crate::linalg::{hermitian_eig, hs_norm_sq, trace_norm, Matrix};
use crate::torus::TorusModel;

const INV_E: f64 = 1.0 / std::f64::consts::E;
const UNIT_NORM_TOL: f64 = 1e-9;
const HS_BOUND_SLACK: f64 = 1e-8;
const FANNES_SLACK: f64 = 1e-10;
const SPECTRUM_SLACK: f64 = 1e-12;

/// `η(s) = −s·ln s` on `[0, 1]`, `η(0) = 0`.
pub fn eta(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("eta needs s in [0, 1], got {s}")));
    }
    Ok(if s == 0.0 { 0.0 } else { -s * s.ln() })
}

/// `S(u) = −τ(u log u)` for Hermitian positive-definite `u`.
pub fn von_neumann_entropy(u: &Matrix) -> Result<f64> {
    let eig = hermitian_eig(u)?;
    let mut s = 0.0;
    for &l in &eig.eigenvalues {
        if l <= 0.0 {
            return Err(Error::Domain { eigenvalue: l });
        }
        s -= l * l.ln();
    }
    Ok(s)
}

/// Trace norm of `u − v`.
pub fn trace_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.n() != v.n() {
        return Err(Error::DimensionMismatch {
            expected: u.n(),
            found: v.n(),
        });
    }
    trace_norm(&(u - v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FannesCheck {
    InRegime {
        omega: f64,
        gap: f64,
        bound: f64,
        holds: bool,
    },
    OutOfRegime {
        omega: f64,
        reason: String,
    },
}

impl FannesCheck {
    pub fn holds(&self) -> Option<bool> {
        match self {
            Self::InRegime { holds, .. } => Some(*holds),
            Self::OutOfRegime { .. } => None,
        }
    }
}

/// `Ω log d + η(Ω)` with `Ω = T(u, v)`.
pub fn fannes_rhs(omega: f64, d: usize) -> Result<f64> {
    Ok(omega * (d as f64).ln() + eta(omega)?)
}

/// Evaluates the Fannes bound for a PD pair and checks `|S(u) − S(v)| ≤ bound`.
///
/// The bound is asserted only when `Ω ≤ 1/e` and both spectra lie in `(0, 1]`.
pub fn fannes_bound(u: &Matrix, v: &Matrix, d: usize) -> Result<FannesCheck> {
    if d == 0 {
        return Err(Error::InvalidArgument("Fannes dimension d must be positive".into()));
    }
    let omega = trace_distance(u, v)?;
    if omega > INV_E {
        return Ok(FannesCheck::OutOfRegime {
            omega,
            reason: format!("trace distance {omega:.6} exceeds 1/e"),
        });
    }
    for m in [u, v] {
        let eig = hermitian_eig(m)?;
        let (lo, hi) = (eig.eigenvalues[0], *eig.eigenvalues.last().unwrap());
        if lo <= 0.0 || hi > 1.0 + SPECTRUM_SLACK {
            return Ok(FannesCheck::OutOfRegime {
                omega,
                reason: format!("spectrum [{lo:.3e}, {hi:.3e}] not inside (0, 1]"),
            });
        }
    }
    let gap = (von_neumann_entropy(u)? - von_neumann_entropy(v)?).abs();
    let bound = fannes_rhs(omega, d)?;
    Ok(FannesCheck::InRegime {
        omega,
        gap,
        bound,
        holds: gap <= bound + FANNES_SLACK,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self { t_end: 2.0, dt: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// `|u − v|²(t)`
    pub hs_dist_sq: Vec<f64>,
    /// `T(u, v)(t)`; absent when either state is not Hermitian.
    pub trace_dist: Vec<Option<f64>>,
    /// `|S(u_t) − S(v_t)|`; absent outside the entropy experiment or for non-PD states.
    pub entropy_gap: Vec<Option<f64>>,
    /// Right-hand side of the entropy bound; absent when not asserted.
    pub fannes_rhs: Vec<Option<f64>>,
    /// Largest discrete log-derivative of `|u − v|²`, clipped at 0.
    pub estimated_c1: f64,
    /// `max_t T(t)/T(0)`, the observed trace-norm growth factor.
    pub trace_growth: Option<f64>,
    pub fannes_d: Option<usize>,
    pub in_regime: bool,
    pub regime_note: Option<String>,
    pub all_bounds_hold: bool,
}

struct PairEvolution {
    times: Vec<f64>,
    u: Vec<Matrix>,
    v: Vec<Matrix>,
}

fn evolve_pair(model: &TorusModel, u0: &Matrix, v0: &Matrix, params: StabilityParams) -> Result<PairEvolution> {
    for a in [u0, v0] {
        let norm_sq = hs_norm_sq(a);
        if (norm_sq - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
    }
    let times = TimeGrid::new(params.dt, params.t_end)?.points();
    let fu = SpectralFlow::new(model, u0)?;
    let fv = SpectralFlow::new(model, v0)?;
    let at = |flow: &SpectralFlow, a0: &Matrix, t: f64| if t == 0.0 { a0.clone() } else { flow.normalized_at(t) };
    Ok(PairEvolution {
        u: times.iter().map(|&t| at(&fu, u0, t)).collect(),
        v: times.iter().map(|&t| at(&fv, v0, t)).collect(),
        times,
    })
}

fn log_derivative_max(times: &[f64], dist_sq: &[f64]) -> f64 {
    let mut c1: f64 = 0.0;
    for j in 0..times.len().saturating_sub(1) {
        let (a, b) = (dist_sq[j], dist_sq[j + 1]);
        if a > 0.0 && b > 0.0 {
            c1 = c1.max((b.ln() - a.ln()) / (times[j + 1] - times[j]));
        }
    }
    c1
}

fn hs_bound_holds(times: &[f64], dist_sq: &[f64], c1: f64) -> bool {
    let d0 = dist_sq[0];
    times
        .iter()
        .zip(dist_sq)
        .all(|(&t, &d)| d <= (c1 * t).exp() * d0 * (1.0 + HS_BOUND_SLACK))
}

fn optional_trace_distance(u: &Matrix, v: &Matrix) -> Option<f64> {
    if u.is_hermitian() && v.is_hermitian() {
        trace_distance(u, v).ok()
    } else {
        None
    }
}

/// Evolves `u0`, `v0` by the spectral normalized flow and certifies
/// `|u − v|²(t) ≤ e^{C₁t}|u − v|²(0)` with the estimated `C₁`.
pub fn hs_stability_experiment(
    model: &TorusModel,
    u0: &Matrix,
    v0: &Matrix,
    params: StabilityParams,
) -> Result<StabilityReport> {
    if u0.hs_distance(v0) == 0.0 {
        return Err(Error::InvalidArgument(
            "identical initial data: log-derivative of |u - v|^2 undefined".into(),
        ));
    }
    let ev = evolve_pair(model, u0, v0, params)?;
    let dist_sq: Vec<f64> = ev.u.iter().zip(&ev.v).map(|(a, b)| hs_norm_sq(&(a - b))).collect();
    let c1 = log_derivative_max(&ev.times, &dist_sq);
    let trace_dist: Vec<Option<f64>> = ev.u.iter().zip(&ev.v).map(|(a, b)| optional_trace_distance(a, b)).collect();
    let trace_growth = trace_growth(&trace_dist);
    let len = ev.times.len();
    Ok(StabilityReport {
        all_bounds_hold: hs_bound_holds(&ev.times, &dist_sq, c1),
        times: ev.times,
        hs_dist_sq: dist_sq,
        trace_dist,
        entropy_gap: vec![None; len],
        fannes_rhs: vec![None; len],
        estimated_c1: c1,
        trace_growth,
        fannes_d: None,
        in_regime: true,
        regime_note: None,
    })
}

fn trace_growth(trace_dist: &[Option<f64>]) -> Option<f64> {
    let t0 = trace_dist.first().copied().flatten()?;
    if t0 <= 0.0 {
        return Some(1.0);
    }
    trace_dist
        .iter()
        .map(|t| t.map(|t| t / t0))
        .try_fold(0.0_f64, |m, r| r.map(|r| m.max(r)))
}

fn entropy_hypotheses(u0: &Matrix, v0: &Matrix) -> Result<Option<String>> {
    for (name, m) in [("u0", u0), ("v0", v0)] {
        if !m.is_hermitian() {
            return Ok(Some(format!("{name} is not Hermitian")));
        }
        let min = hermitian_eig(m)?.eigenvalues[0];
        if min <= 0.0 {
            return Ok(Some(format!("{name} is not positive definite (min eigenvalue {min:.3e})")));
        }
    }
    let t0 = trace_distance(u0, v0)?;
    if t0 > INV_E {
        return Ok(Some(format!("T(u0, v0) = {t0:.6} exceeds 1/e")));
    }
    Ok(None)
}

/// Evolves a PD pair and checks, at every grid time,
/// `|S(u_t) − S(v_t)| ≤ K·T(0)·log d + η(K·T(0))` with `K = max_t T(t)/T(0)`.
///
/// When the hypotheses fail (non-PD data, `T(0) > 1/e`, or `K·T(0) > 1/e`)
/// the report is marked out of regime and the raw curves are still recorded.
pub fn entropy_stability_experiment(
    model: &TorusModel,
    u0: &Matrix,
    v0: &Matrix,
    params: StabilityParams,
    d: usize,
) -> Result<StabilityReport> {
    if d == 0 {
        return Err(Error::InvalidArgument("Fannes dimension d must be positive".into()));
    }
    let mut note = entropy_hypotheses(u0, v0)?;
    let ev = evolve_pair(model, u0, v0, params)?;
    let dist_sq: Vec<f64> = ev.u.iter().zip(&ev.v).map(|(a, b)| hs_norm_sq(&(a - b))).collect();
    let c1 = log_derivative_max(&ev.times, &dist_sq);
    let hs_ok = dist_sq[0] == 0.0 || hs_bound_holds(&ev.times, &dist_sq, c1);

    let trace_dist: Vec<Option<f64>> = ev.u.iter().zip(&ev.v).map(|(a, b)| optional_trace_distance(a, b)).collect();
    let entropy_gap: Vec<Option<f64>> = ev
        .u
        .iter()
        .zip(&ev.v)
        .map(|(a, b)| match (von_neumann_entropy(a), von_neumann_entropy(b)) {
            (Ok(x), Ok(y)) => Some((x - y).abs()),
            _ => None,
        })
        .collect();
    let growth = trace_growth(&trace_dist);

    let mut rhs = None;
    if note.is_none() {
        let t0 = trace_dist[0].unwrap_or(f64::NAN);
        let k = growth.unwrap_or(f64::NAN);
        let scaled = k * t0;
        if scaled.is_nan() || scaled > INV_E {
            note = Some(format!("C1*T(0) = {scaled:.6} exceeds 1/e"));
        } else if entropy_gap.iter().any(Option::is_none) {
            note = Some("evolved state left the positive-definite cone".into());
        } else if ev.u.iter().chain(&ev.v).any(|m| {
            hermitian_eig(m).map(|e| *e.eigenvalues.last().unwrap() > 1.0 + SPECTRUM_SLACK).unwrap_or(true)
        }) {
            note = Some("evolved spectrum exceeds 1".into());
        } else {
            rhs = Some(fannes_rhs(scaled, d)?);
        }
    }

    let len = ev.times.len();
    let entropy_ok = match rhs {
        Some(r) => entropy_gap.iter().all(|g| g.is_some_and(|g| g <= r + FANNES_SLACK)),
        None => true,
    };
    Ok(StabilityReport {
        times: ev.times,
        hs_dist_sq: dist_sq,
        trace_dist,
        entropy_gap,
        fannes_rhs: vec![rhs; len],
        estimated_c1: c1,
        trace_growth: growth,
        fannes_d: Some(d),
        in_regime: note.is_none(),
        regime_note: note,
        all_bounds_hold: hs_ok && entropy_ok,
    })
}
