//! Dense complex matrices, the Hilbert–Schmidt inner product and Hermitian
//! spectral calculus.
//!
//! Everything here works on small dense matrices (n up to a few hundred for
//! super-operators), so storage is a flat row-major `Vec<Complex64>`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 50;
const CLUSTER_GAP: f64 = 1e-9;

/// A square complex matrix, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.n, self.n)?;
        for j in 0..self.n {
            write!(f, "  ")?;
            for k in 0..self.n {
                let z = self[(j, k)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            m[(j, j)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                data.push(f(j, k));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from row-major entries; `data.len()` must be a perfect square.
    pub fn from_row_major(data: Vec<Complex64>) -> Result<Self> {
        let n = (data.len() as f64).sqrt().round() as usize;
        if n * n != data.len() {
            return Err(Error::Format(format!(
                "{} entries do not form a square matrix",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Format("ragged or non-square rows".into()));
        }
        Ok(Self::from_fn(n, |j, k| Complex64::new(rows[j][k], 0.0)))
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for (j, &v) in values.iter().enumerate() {
            m[(j, j)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Single-entry matrix `E_{jk}`.
    pub fn unit(n: usize, j: usize, k: usize) -> Self {
        let mut m = Self::zeros(n);
        m[(j, k)] = Complex64::new(1.0, 0.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |j, k| self[(k, j)].conj())
    }

    /// Unnormalized trace, `tr(I) = n`.
    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|j| self[(j, j)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Complex64, other: &Matrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for j in 0..n {
            let row = &self.data[j * n..(j + 1) * n];
            let out_row = &mut out.data[j * n..(j + 1) * n];
            for (l, &a) in row.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let other_row = &other.data[l * n..(l + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `[self, other] = self·other − other·self`
    pub fn commutator(&self, other: &Matrix) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// Column-stacking vectorization: entry `(j, k)` lands at `j + k·n`.
    pub fn vectorize(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut v = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                v[j + k * n] = self[(j, k)];
            }
        }
        v
    }

    pub fn devectorize(v: &[Complex64]) -> Result<Self> {
        let n = (v.len() as f64).sqrt().round() as usize;
        if n * n != v.len() {
            return Err(Error::Format(format!(
                "vector of length {} is not a vectorized square matrix",
                v.len()
            )));
        }
        Ok(Self::from_fn(n, |j, k| v[j + k * n]))
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        let n = self.n;
        (0..n)
            .map(|j| {
                self.data[j * n..(j + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `A ⊗ B` with the usual block layout.
    pub fn kron(&self, other: &Matrix) -> Self {
        let (p, q) = (self.n, other.n);
        Self::from_fn(p * q, |r, c| {
            self[(r / q, c / q)] * other[(r % q, c % q)]
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |j, k| self[(k, j)])
    }

    /// `max_{jk} |a_{jk} − conj(a_{kj})|`
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j..n {
                worst = worst.max((self[(j, k)] - self[(k, j)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL * self.max_abs().max(1.0)
    }

    /// `(a + a†)/2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.n, |j, k| (self[(j, k)] + self[(k, j)].conj()) * 0.5)
    }

    pub fn hs_norm(&self) -> f64 {
        hs_norm_sq(self).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hs_distance(&self, other: &Matrix) -> f64 {
        (self - other).hs_norm()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Complex64;
    fn index(&self, (j, k): (usize, usize)) -> &Complex64 {
        &self.data[j * self.n + k]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (j, k): (usize, usize)) -> &mut Complex64 {
        &mut self.data[j * self.n + k]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "add dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "sub dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

fn check_same_dim(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    Ok(())
}

fn require_hermitian(h: &Matrix) -> Result<()> {
    if h.is_hermitian() {
        Ok(())
    } else {
        Err(Error::NotHermitian {
            asymmetry: h.hermitian_defect(),
        })
    }
}

/// Hilbert–Schmidt inner product `τ(a†b)`, conjugate-linear in `a`.
pub fn hs_inner(a: &Matrix, b: &Matrix) -> Result<Complex64> {
    check_same_dim(a, b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
}

pub fn hs_norm_sq(a: &Matrix) -> f64 {
    a.data.iter().map(|z| z.norm_sqr()).sum()
}

/// Spectral decomposition `H = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    pub eigenvectors: Matrix,
}

impl EigDecomposition {
    pub fn eigenvector(&self, i: usize) -> Vec<Complex64> {
        let n = self.eigenvectors.n;
        (0..n).map(|r| self.eigenvectors[(r, i)]).collect()
    }

    /// `V diag(values) V†`
    pub fn reconstruct_with(&self, values: &[f64]) -> Matrix {
        let n = self.eigenvectors.n;
        let v = &self.eigenvectors;
        let mut out = Matrix::zeros(n);
        for j in 0..n {
            for k in j..n {
                let mut s = Complex64::new(0.0, 0.0);
                for (i, &lam) in values.iter().enumerate() {
                    s += v[(j, i)] * v[(k, i)].conj() * lam;
                }
                out[(j, k)] = s;
                out[(k, j)] = s.conj();
            }
            out[(j, j)].im = 0.0;
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.eigenvalues)
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Output ordering is deterministic: eigenvalues ascending, eigenvectors in a
/// near-degenerate cluster ordered by the index of their largest-magnitude
/// component, and every eigenvector's first nonzero component made real
/// positive.
pub fn hermitian_eig(h: &Matrix) -> Result<EigDecomposition> {
    require_hermitian(h)?;
    let n = h.n;
    let mut a = h.hermitian_part();
    let mut v = Matrix::identity(n);

    let scale = hs_norm_sq(&a).sqrt().max(1.0);
    let threshold = JACOBI_OFF_TOL * scale;
    let skip = threshold / (n.max(1) as f64);

    let mut off = off_diagonal_norm(&a);
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= skip {
                    continue;
                }
                jacobi_rotate(&mut a, &mut v, p, q, apq, r);
            }
        }
        off = off_diagonal_norm(&a);
    }
    if off > threshold {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            off_norm: off,
        });
    }

    let diag: Vec<f64> = (0..n).map(|j| a[(j, j)].re).collect();
    Ok(order_decomposition(&diag, &v))
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.n;
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                s += a[(j, k)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

// Annihilates a[p,q] with J = [[c, s·e^{iφ}], [−s·e^{−iφ}, c]] where a[p,q] = r·e^{iφ}.
fn jacobi_rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, apq: Complex64, r: f64) {
    let n = a.n;
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let zeta = (aqq - app) / (2.0 * r);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + zeta.hypot(1.0))
    } else {
        -1.0 / (-zeta + zeta.hypot(1.0))
    };
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;
    let s_fwd = phase * s; // s·e^{iφ}
    let s_bwd = phase.conj() * s; // s·e^{−iφ}

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - s_bwd * akq;
        a[(k, q)] = s_fwd * akp + akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - s_fwd * aqk;
        a[(q, k)] = s_bwd * apk + aqk * c;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(app - t * r, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * r, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - s_bwd * vkq;
        v[(k, q)] = s_fwd * vkp + vkq * c;
    }
}

fn order_decomposition(diag: &[f64], v: &Matrix) -> EigDecomposition {
    let n = diag.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]).then(i.cmp(&j)));

    let column = |i: usize| -> Vec<Complex64> { (0..n).map(|r| v[(r, i)]).collect() };
    let dominant_index = |col: &[Complex64]| -> usize {
        let mut best = 0;
        for (r, z) in col.iter().enumerate() {
            if z.norm() > col[best].norm() {
                best = r;
            }
        }
        best
    };

    let scale = diag.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut ordered: Vec<usize> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && diag[idx[end]] - diag[idx[end - 1]] < CLUSTER_GAP * scale {
            end += 1;
        }
        let mut cluster: Vec<(usize, usize)> = idx[start..end]
            .iter()
            .map(|&i| (dominant_index(&column(i)), i))
            .collect();
        cluster.sort();
        ordered.extend(cluster.into_iter().map(|(_, i)| i));
        start = end;
    }

    let mut vectors = Matrix::zeros(n);
    let mut values = Vec::with_capacity(n);
    for (new_col, &i) in ordered.iter().enumerate() {
        let mut col = column(i);
        fix_phase(&mut col);
        for (r, z) in col.into_iter().enumerate() {
            vectors[(r, new_col)] = z;
        }
        values.push(diag[i]);
    }
    EigDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    }
}

/// Rotates `v` so its first component above 1e-8 in magnitude is real positive.
pub(crate) fn fix_phase(v: &mut [Complex64]) {
    if let Some(z) = v.iter().copied().find(|z| z.norm() > 1e-8) {
        let rot = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= rot;
        }
    }
}

/// `f(h) = V diag(f(λ_i)) V†` for Hermitian `h`.
///
/// A non-finite `f(λ_i)` is reported as a domain error at that eigenvalue.
pub fn matrix_function(h: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let eig = hermitian_eig(h)?;
    apply_spectral(&eig, f)
}

pub(crate) fn apply_spectral(eig: &EigDecomposition, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let mut values = Vec::with_capacity(eig.eigenvalues.len());
    for &lam in &eig.eigenvalues {
        let y = f(lam);
        if !y.is_finite() {
            return Err(Error::Domain { eigenvalue: lam });
        }
        values.push(y);
    }
    Ok(eig.reconstruct_with(&values))
}

/// `exp(i·θ·h)` for Hermitian `h`; unitary.
pub fn unitary_exp(h: &Matrix, theta: f64) -> Result<Matrix> {
    let eig = hermitian_eig(h)?;
    let n = h.n;
    let v = &eig.eigenvectors;
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&lam| Complex64::from_polar(1.0, theta * lam))
        .collect();
    Ok(Matrix::from_fn(n, |j, k| {
        (0..n).map(|i| v[(j, i)] * phases[i] * v[(k, i)].conj()).sum()
    }))
}

/// `Σ |λ_i|` for Hermitian `a`.
pub fn trace_norm(a: &Matrix) -> Result<f64> {
    let eig = hermitian_eig(a)?;
    Ok(eig.eigenvalues.iter().map(|x| x.abs()).sum())
}

pub fn min_eigenvalue(h: &Matrix) -> Result<f64> {
    let eig = hermitian_eig(h)?;
    Ok(eig.eigenvalues.first().copied().unwrap_or(f64::NAN))
}

/// `log det h` for Hermitian positive-definite `h`.
pub fn log_det(h: &Matrix) -> Result<f64> {
    let eig = hermitian_eig(h)?;
    let mut s = 0.0;
    for &lam in &eig.eigenvalues {
        if lam <= 0.0 {
            return Err(Error::Domain { eigenvalue: lam });
        }
        s += lam.ln();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, rng_from_seed};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_x() -> Matrix {
        Matrix::from_row_major(vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap()
    }

    fn sigma_y() -> Matrix {
        Matrix::from_row_major(vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap()
    }

    #[test]
    fn hs_inner_examples() {
        let i3 = Matrix::identity(3);
        assert_eq!(hs_inner(&i3, &i3).unwrap(), c(3.0, 0.0));
        assert_eq!(hs_inner(&sigma_x(), &sigma_y()).unwrap(), c(0.0, 0.0));
        let e01 = Matrix::unit(3, 0, 1);
        assert_eq!(hs_inner(&e01, &e01).unwrap(), c(1.0, 0.0));
        assert!(matches!(
            hs_inner(&i3, &Matrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eig_of_diagonal_and_pauli() {
        let d = Matrix::diag_real(&[3.0, 1.0, 2.0]);
        let e = hermitian_eig(&d).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0]);

        let e = hermitian_eig(&sigma_x()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = Matrix::unit(2, 0, 1);
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian { .. })));
        assert!(matches!(trace_norm(&m), Err(Error::NotHermitian { .. })));
        assert!(matches!(min_eigenvalue(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_reconstruction_on_random_hermitian() {
        let mut rng = rng_from_seed(7);
        for trial in 0..100 {
            let n = 1 + trial % 8;
            let h = random_hermitian(&mut rng, n);
            let e = hermitian_eig(&h).unwrap();
            let v = &e.eigenvectors;
            let gram = v.adjoint().matmul(v);
            assert!(gram.max_abs_diff(&Matrix::identity(n)) <= 1e-10);
            let resid = e.reconstruct().max_abs_diff(&h);
            assert!(resid <= 1e-9 * h.max_abs().max(1.0), "residual {resid}");
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_is_deterministic_and_phase_fixed() {
        let mut rng = rng_from_seed(11);
        let h = random_hermitian(&mut rng, 6);
        let a = hermitian_eig(&h).unwrap();
        let b = hermitian_eig(&h).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
        for i in 0..6 {
            let col = a.eigenvector(i);
            let first = col.iter().find(|z| z.norm() > 1e-8).unwrap();
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
    }

    #[test]
    fn degenerate_cluster_ordered_by_dominant_component() {
        // eigenvalue 1 twice; dominant components at rows 2 and 0
        let d = Matrix::diag_real(&[1.0, 5.0, 1.0]);
        let e = hermitian_eig(&d).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 5.0]);
        assert!((e.eigenvectors[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((e.eigenvectors[(2, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_function_examples() {
        let h = Matrix::diag_real(&[0.0, 2f64.ln()]);
        let e = matrix_function(&h, f64::exp).unwrap();
        assert!(e.max_abs_diff(&Matrix::diag_real(&[1.0, 2.0])) < 1e-14);

        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let h = random_hermitian(&mut rng, 5);
            let id = matrix_function(&h, |x| x).unwrap();
            assert!(id.max_abs_diff(&h) <= 1e-12 * h.max_abs().max(1.0));
            let sq = matrix_function(&h, |x| x * x).unwrap();
            let direct = h.matmul(&h);
            assert!(sq.max_abs_diff(&direct) <= 1e-10 * direct.max_abs().max(1.0));
            assert!(sq.is_hermitian());
        }
    }

    #[test]
    fn matrix_function_domain_error_names_eigenvalue() {
        let h = Matrix::diag_real(&[-0.5, 1.0]);
        match matrix_function(&h, f64::ln) {
            Err(Error::Domain { eigenvalue }) => assert_eq!(eigenvalue, -0.5),
            other => panic!("expected domain error, got {other:?}"),
        }
        let h = Matrix::diag_real(&[0.0, 1.0]);
        assert!(matches!(matrix_function(&h, f64::ln), Err(Error::Domain { .. })));
    }

    #[test]
    fn trace_norm_examples() {
        let d = &Matrix::diag_real(&[1.0, 0.0]) - &Matrix::diag_real(&[0.0, 1.0]);
        assert!((trace_norm(&d).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(trace_norm(&Matrix::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn trace_norm_is_sum_of_positive_and_negative_parts() {
        let mut rng = rng_from_seed(5);
        for _ in 0..30 {
            let h = random_hermitian(&mut rng, 5);
            let pos = matrix_function(&h, |x| x.max(0.0)).unwrap();
            let neg = matrix_function(&h, |x| (-x).max(0.0)).unwrap();
            let split = pos.trace().re + neg.trace().re;
            assert!((trace_norm(&h).unwrap() - split).abs() < 1e-10);
        }
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&Matrix::identity(4)).unwrap() - 1.0).abs() < 1e-15);
        let d = Matrix::diag_real(&[5.0, -2.0, 0.0]);
        assert_eq!(min_eigenvalue(&d).unwrap(), -2.0);
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let b = crate::random::random_complex_gaussian(&mut rng, 5);
            let g = &b.adjoint().matmul(&b) + &Matrix::identity(5).scale(1e-3);
            assert!(min_eigenvalue(&g).unwrap() >= 1e-3 - 1e-10);
        }
    }

    #[test]
    fn unitary_exp_of_diagonal() {
        let u = unitary_exp(&Matrix::diag_real(&[0.0, 1.0]), std::f64::consts::PI).unwrap();
        assert!(u.max_abs_diff(&Matrix::diag_real(&[1.0, -1.0])) < 1e-14);
    }

    #[test]
    fn vectorization_is_column_stacking() {
        let m = Matrix::from_row_major(vec![c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)]).unwrap();
        let v: Vec<f64> = m.vectorize().iter().map(|z| z.re).collect();
        assert_eq!(v, vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(Matrix::devectorize(&m.vectorize()).unwrap(), m);
    }
}
