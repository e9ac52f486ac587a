//! Seeded sampling of test matrices.
//!
//! All randomness goes through ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! so a `(seed, trial)` pair reproduces the same matrices on every platform.
//! Complex Gaussian entries have independent real and imaginary parts drawn
//! from N(0, 1/2), so `E|z|² = 1`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{hs_norm_sq, Matrix};

pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic per-trial seed (SplitMix64 finalizer over `seed` and `index`).
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    Matrix::from_fn(n, |_, _| complex_gaussian(rng))
}

/// `(G + G†)/2`
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    random_complex_gaussian(rng, n).hermitian_part()
}

/// `B†B`
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let b = random_complex_gaussian(rng, n);
    b.adjoint().matmul(&b).hermitian_part()
}

/// Unitary from Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = random_complex_gaussian(rng, n);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<Complex64> = (0..n).map(|j| g[(j, k)]).collect();
        for _ in 0..2 {
            for q in &cols {
                let proj: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= proj * y;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    Matrix::from_fn(n, |j, k| cols[k][j])
}

pub fn normalize(a: &Matrix) -> Matrix {
    a.scale(1.0 / hs_norm_sq(a).sqrt())
}

/// Random Hermitian with its trace projected out, unit HS norm.
pub fn random_tracefree_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let h = random_hermitian(rng, n);
    let shift = h.trace() / n as f64;
    let mut a = h;
    for j in 0..n {
        a[(j, j)] -= shift;
    }
    normalize(&a)
}

/// `B†B + εI`, unit HS norm.
pub fn random_pd_unit<R: Rng + ?Sized>(rng: &mut R, n: usize, eps: f64) -> Matrix {
    let mut g = random_psd(rng, n);
    for j in 0..n {
        g[(j, j)] += eps;
    }
    normalize(&g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..100).map(|i| sub_seed(42, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| sub_seed(42, i)).collect();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 100);
        assert_ne!(sub_seed(1, 0), sub_seed(2, 0));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = rng_from_seed(1);
        let u = random_unitary(&mut rng, 6);
        assert!(u.adjoint().matmul(&u).max_abs_diff(&Matrix::identity(6)) < 1e-13);
    }

    #[test]
    fn presets_meet_their_construction() {
        let mut rng = rng_from_seed(2);
        let a = random_tracefree_unit(&mut rng, 5);
        assert!(a.trace().norm() < 1e-12);
        assert!((hs_norm_sq(&a) - 1.0).abs() < 1e-12);
        assert!(a.is_hermitian());
        let p = random_pd_unit(&mut rng, 4, 1e-2);
        assert!((hs_norm_sq(&p) - 1.0).abs() < 1e-12);
        assert!(crate::linalg::min_eigenvalue(&p).unwrap() > 0.0);
    }
}
