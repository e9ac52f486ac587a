//! The clock–shift matrix geometry: generators, derivations, the Laplacian
//! and its eigen-matrices.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, hs_inner, hs_norm_sq, unitary_exp, Matrix};

/// Eigenvalues closer than this (relative to `max(1, λ_max)`) share an eigenspace.
const LEVEL_GAP: f64 = 1e-9;
/// Eigenvalues below this (relative) count toward the kernel.
const KERNEL_TOL: f64 = 1e-8;
const MIN_MASS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantTag {
    ClockShift,
    Custom,
}

#[derive(Debug, Clone)]
pub enum GeneratorVariant {
    /// `X = diag(0, …, n−1)`, `Y = F X F†` with `F` the unitary DFT matrix.
    ClockShift,
    Custom { x: Matrix, y: Matrix },
}

#[derive(Debug, Clone)]
pub struct TorusModel {
    n: usize,
    variant: VariantTag,
    x: Matrix,
    y: Matrix,
    u: Matrix,
    v: Matrix,
    basis: OnceLock<EigenBasis>,
}

/// Ascending eigenvalues of the Laplacian with HS-orthonormal Hermitian
/// eigen-matrices.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub eigenvalues: Vec<f64>,
    pub eigenmatrices: Vec<Matrix>,
    /// Smallest nonzero eigenvalue.
    pub gap: f64,
    /// Index ranges of (numerically) equal eigenvalues, in ascending order.
    pub levels: Vec<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub coeffs: Vec<Complex64>,
}

/// The unitary DFT matrix `F_{jk} = e^{2πijk/n}/√n`.
pub fn fourier_matrix(n: usize) -> Matrix {
    let norm = 1.0 / (n as f64).sqrt();
    Matrix::from_fn(n, |j, k| {
        let phase = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
        Complex64::from_polar(norm, phase)
    })
}

impl TorusModel {
    pub fn build(n: usize, variant: GeneratorVariant) -> Result<Self> {
        match variant {
            GeneratorVariant::ClockShift => Self::clock_shift(n),
            GeneratorVariant::Custom { x, y } => {
                if x.n() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: x.n(),
                    });
                }
                Self::custom(x, y)
            }
        }
    }

    pub fn clock_shift(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("model needs n >= 2, got {n}")));
        }
        let x = Matrix::diag_real(&(0..n).map(|j| j as f64).collect::<Vec<_>>());
        let f = fourier_matrix(n);
        let y = f.matmul(&x).matmul(&f.adjoint()).hermitian_part();
        Self::assemble(VariantTag::ClockShift, x, y)
    }

    /// User-supplied Hermitian generators. A degenerate pair (joint commutant
    /// larger than `CI`) is reported by [`TorusModel::eigenbasis`].
    pub fn custom(x: Matrix, y: Matrix) -> Result<Self> {
        let n = x.n();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("model needs n >= 2, got {n}")));
        }
        if y.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.n(),
            });
        }
        for g in [&x, &y] {
            if !g.is_hermitian() {
                return Err(Error::NotHermitian {
                    asymmetry: g.hermitian_defect(),
                });
            }
        }
        Self::assemble(VariantTag::Custom, x.hermitian_part(), y.hermitian_part())
    }

    fn assemble(variant: VariantTag, x: Matrix, y: Matrix) -> Result<Self> {
        let n = x.n();
        let theta = 2.0 * PI / n as f64;
        let u = unitary_exp(&x, theta)?;
        let v = unitary_exp(&y, theta)?;
        Ok(Self {
            n,
            variant,
            x,
            y,
            u,
            v,
            basis: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> VariantTag {
        self.variant
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    fn check_dim(&self, a: &Matrix) -> Result<()> {
        if a.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: a.n(),
            });
        }
        Ok(())
    }

    /// `δ₁(a) = [Y, a]`
    pub fn delta1(&self, a: &Matrix) -> Result<Matrix> {
        self.check_dim(a)?;
        Ok(self.y.commutator(a))
    }

    /// `δ₂(a) = −[X, a]`
    pub fn delta2(&self, a: &Matrix) -> Result<Matrix> {
        self.check_dim(a)?;
        Ok(a.commutator(&self.x))
    }

    /// `Δ̂a = [Y,[Y,a]] + [X,[X,a]]`, positive semidefinite under the HS product.
    pub fn laplacian(&self, a: &Matrix) -> Result<Matrix> {
        self.check_dim(a)?;
        let yy = self.y.commutator(&self.y.commutator(a));
        let xx = self.x.commutator(&self.x.commutator(a));
        Ok(&yy + &xx)
    }

    /// `L = L₁†L₁ + L₂†L₂` acting on column-stacked matrices.
    pub fn superoperator(&self) -> Matrix {
        let id = Matrix::identity(self.n);
        // vec(Za − aZ) = (I ⊗ Z − Zᵀ ⊗ I) vec(a)
        let l1 = &id.kron(&self.y) - &self.y.transpose().kron(&id);
        let l2 = &self.x.transpose().kron(&id) - &id.kron(&self.x);
        let out = &l1.adjoint().matmul(&l1) + &l2.adjoint().matmul(&l2);
        out.hermitian_part()
    }

    /// The full eigenbasis, computed once and cached.
    pub fn eigenbasis(&self) -> Result<&EigenBasis> {
        if let Some(b) = self.basis.get() {
            return Ok(b);
        }
        let basis = EigenBasis::compute(self)?;
        Ok(self.basis.get_or_init(|| basis))
    }

    /// `D(c) = |δ₁c|² + |δ₂c|²`
    pub fn dirichlet_energy(&self, c: &Matrix) -> Result<f64> {
        Ok(hs_norm_sq(&self.delta1(c)?) + hs_norm_sq(&self.delta2(c)?))
    }

    /// `λ(c) = D(c)/M(c)`
    pub fn rayleigh(&self, c: &Matrix) -> Result<f64> {
        let mass = hs_norm_sq(c);
        if mass <= MIN_MASS {
            return Err(Error::InvalidArgument(format!(
                "Rayleigh quotient of near-zero matrix (|c|^2 = {mass:.3e})"
            )));
        }
        Ok(self.dirichlet_energy(c)? / mass)
    }

    pub fn decompose(&self, a: &Matrix) -> Result<SpectralCoefficients> {
        self.check_dim(a)?;
        let basis = self.eigenbasis()?;
        let coeffs = basis
            .eigenmatrices
            .iter()
            .map(|phi| hs_inner(phi, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralCoefficients { coeffs })
    }

    pub fn reconstruct(&self, coeffs: &SpectralCoefficients) -> Result<Matrix> {
        let basis = self.eigenbasis()?;
        if coeffs.coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: coeffs.coeffs.len(),
            });
        }
        let mut out = Matrix::zeros(self.n);
        for (c, phi) in coeffs.coeffs.iter().zip(&basis.eigenmatrices) {
            out.axpy(*c, phi);
        }
        Ok(out)
    }
}

impl SpectralCoefficients {
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

impl EigenBasis {
    fn compute(model: &TorusModel) -> Result<Self> {
        let n = model.n;
        let dim = n * n;
        let eig = hermitian_eig(&model.superoperator())?;
        let raw = &eig.eigenvalues;
        let scale = raw.last().copied().unwrap_or(0.0).abs().max(1.0);

        let kernel_dim = raw.iter().filter(|l| l.abs() <= KERNEL_TOL * scale).count();
        if kernel_dim != 1 {
            return Err(Error::DegenerateModel { kernel_dim });
        }

        let mut levels = Vec::new();
        let mut start = 0;
        while start < dim {
            let mut end = start + 1;
            while end < dim && raw[end] - raw[end - 1] < LEVEL_GAP * scale {
                end += 1;
            }
            levels.push(start..end);
            start = end;
        }

        let mut eigenvalues = Vec::with_capacity(dim);
        let mut eigenmatrices = Vec::with_capacity(dim);
        for (li, level) in levels.iter().enumerate() {
            let value = if li == 0 {
                0.0
            } else {
                raw[level.clone()].iter().sum::<f64>() / level.len() as f64
            };
            let columns: Vec<Vec<Complex64>> = level.clone().map(|i| eig.eigenvector(i)).collect();
            for phi in hermitian_level_basis(n, &columns) {
                eigenvalues.push(value);
                eigenmatrices.push(phi);
            }
        }
        let gap = eigenvalues[1];
        Ok(Self {
            eigenvalues,
            eigenmatrices,
            gap,
            levels,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Index range of the eigenvalue level containing mode `i`.
    pub fn level_of(&self, i: usize) -> Range<usize> {
        self.levels
            .iter()
            .find(|r| r.contains(&i))
            .cloned()
            .unwrap_or(i..i + 1)
    }

    /// Index of the eigenvalue nearest to `lambda` (first in its level).
    pub fn nearest(&self, lambda: f64) -> usize {
        let mut best = 0;
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            if (l - lambda).abs() < (self.eigenvalues[best] - lambda).abs() {
                best = i;
            }
        }
        best
    }
}

/// Canonical Hermitian orthonormal basis of the eigenspace spanned by
/// `columns` (vectorized eigen-matrices).
///
/// The eigenspace is closed under `a ↦ a†`, so projecting the fixed Hermitian
/// basis `h_m` of `M_n` onto it gives Hermitian matrices. Pivoted
/// Gram–Schmidt over those projections (largest residual first, ties to the
/// lowest `m`) depends only on the subspace, not on the solver's rotation
/// inside it.
fn hermitian_level_basis(n: usize, columns: &[Vec<Complex64>]) -> Vec<Matrix> {
    let k = columns.len();
    let dim = n * n;
    let s = std::f64::consts::FRAC_1_SQRT_2;

    // Coordinates of P·h_m in the column basis: w_m = Q† vec(h_m).
    let coords: Vec<Vec<Complex64>> = (0..dim)
        .map(|m| {
            let (j, col) = (m % n, m / n);
            let t = col + j * n; // transpose position
            (0..k)
                .map(|c| {
                    let q = &columns[c];
                    if j == col {
                        q[m].conj()
                    } else if j < col {
                        (q[m].conj() + q[t].conj()) * s
                    } else {
                        (q[m].conj() - q[t].conj()) * Complex64::new(0.0, s)
                    }
                })
                .collect()
        })
        .collect();

    let mut chosen: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    while chosen.len() < k {
        let residuals: Vec<Vec<Complex64>> = coords
            .iter()
            .map(|w| {
                let mut r = w.clone();
                for e in &chosen {
                    let p: Complex64 = e.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
                    for (x, y) in r.iter_mut().zip(e) {
                        *x -= p * y;
                    }
                }
                r
            })
            .collect();
        let norms: Vec<f64> = residuals
            .iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let best = norms.iter().cloned().fold(0.0, f64::max);
        let pick = norms
            .iter()
            .position(|&v| v >= best * (1.0 - 1e-8))
            .expect("nonempty");
        let e: Vec<Complex64> = residuals[pick].iter().map(|z| z / norms[pick]).collect();
        chosen.push(e);
    }

    chosen
        .iter()
        .map(|e| {
            let v: Vec<Complex64> = (0..dim)
                .map(|r| (0..k).map(|c| columns[c][r] * e[c]).sum())
                .collect();
            let phi = Matrix::devectorize(&v).expect("square").hermitian_part();
            phi.scale(1.0 / phi.hs_norm())
        })
        .collect()
}
