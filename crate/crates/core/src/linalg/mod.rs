//! Dense kernels sized for desk-scale problems.

mod dense;
pub mod eigen;
pub mod expm;
pub mod lu;
pub mod power;
pub mod svd;

pub use dense::DenseMatrix;
pub use eigen::{is_symmetric, symmetric_eigen, SymmetricEigen};
pub use expm::expm;
pub use lu::{BandLu, Factorization, LuFactorization};
pub use power::{spectral_norm, LinearMap, PowerReport};
pub use svd::{small_svd, SingularValues};

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    norm2_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(v: &mut [f64], alpha: f64) {
    for x in v {
        *x *= alpha;
    }
}

/// `a ⊗ b`, indexed so that entry `j * b.len() + i` is `a[j] * b[i]`.
pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &aj in a {
        out.extend(b.iter().map(|bi| aj * bi));
    }
    out
}

/// Unstack a length `n̂·ñ` vector column by column into an `n̂ × ñ` matrix,
/// so that `x̃ ⊗ x̂` maps to `x̂ x̃ᵀ`.
pub fn reshape_vec_to_mat(v: &[f64], n_hat: usize, n_tilde: usize) -> Result<DenseMatrix> {
    if v.len() != n_hat * n_tilde {
        return Err(Error::mismatch("reshape_vec_to_mat", n_hat * n_tilde, v.len()));
    }
    Ok(DenseMatrix::from_fn(n_hat, n_tilde, |i, j| v[j * n_hat + i]))
}

/// Inverse of [`reshape_vec_to_mat`].
pub fn reshape_mat_to_vec(m: &DenseMatrix) -> Vec<f64> {
    let (r, c) = (m.rows(), m.cols());
    let mut out = vec![0.0; r * c];
    for j in 0..c {
        for i in 0..r {
            out[j * r + i] = m.get(i, j);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::rng::CounterRng;
    use proptest::prelude::*;

    #[test]
    fn reshape_kron_identity() {
        let x = kron(&[1.0, 0.0], &[0.0, 1.0]);
        let m = reshape_vec_to_mat(&x, 2, 2).unwrap();
        assert_eq!(m.data(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(reshape_mat_to_vec(&m), x);
        assert!(reshape_vec_to_mat(&x, 3, 2).is_err());
    }

    #[test]
    fn reshape_preserves_norm() {
        let mut r = CounterRng::new(1, 0, 0);
        let v: Vec<f64> = (0..12).map(|_| r.next_gaussian()).collect();
        let m = reshape_vec_to_mat(&v, 3, 4).unwrap();
        assert!((m.frobenius_norm() - norm2(&v)).abs() <= 1e-14 * norm2(&v));
    }

    proptest! {
        #[test]
        fn kron_reshape_is_outer_product(
            t in prop::collection::vec(-10.0f64..10.0, 1..6),
            h in prop::collection::vec(-10.0f64..10.0, 1..6),
        ) {
            let m = reshape_vec_to_mat(&kron(&t, &h), h.len(), t.len()).unwrap();
            prop_assert_eq!(m, DenseMatrix::outer(&h, &t));
        }

        #[test]
        fn kron_norm_is_multiplicative(
            t in prop::collection::vec(-10.0f64..10.0, 1..6),
            h in prop::collection::vec(-10.0f64..10.0, 1..6),
        ) {
            let lhs = norm2(&kron(&t, &h));
            let rhs = norm2(&t) * norm2(&h);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn reshape_round_trip(v in prop::collection::vec(-1.0f64..1.0, 12)) {
            let m = reshape_vec_to_mat(&v, 4, 3).unwrap();
            prop_assert_eq!(reshape_mat_to_vec(&m), v);
        }
    }
}
