//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use super::DenseMatrix;
use crate::error::{Error, Result};

pub const EIGEN_LIMIT: usize = 512;

/// `A = Q diag(λ) Qᵀ` for symmetric `A`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: DenseMatrix,
}

pub fn is_symmetric(a: &DenseMatrix, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.max_abs();
    (0..a.rows()).all(|i| (0..i).all(|j| (a.get(i, j) - a.get(j, i)).abs() <= rel_tol * scale))
}

pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            what: "symmetric_eigen",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n > EIGEN_LIMIT {
        return Err(Error::SizeGuard {
            what: "dimension for symmetric_eigen",
            value: n,
            limit: EIGEN_LIMIT,
        });
    }
    if !is_symmetric(a, 1e-12) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let mut m = a.data().to_vec();
    let mut q = DenseMatrix::identity(n).into_data();
    let idx = |i: usize, j: usize| i * n + j;

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[idx(i, j)] * m[idx(i, j)])
            .sum();
        let total: f64 = m.iter().map(|v| v * v).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = m[idx(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let (app, arr) = (m[idx(p, p)], m[idx(r, r)]);
                let tau = (arr - app) / (2.0 * apr);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkr) = (m[idx(k, p)], m[idx(k, r)]);
                    m[idx(k, p)] = c * mkp - s * mkr;
                    m[idx(k, r)] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let (mpk, mrk) = (m[idx(p, k)], m[idx(r, k)]);
                    m[idx(p, k)] = c * mpk - s * mrk;
                    m[idx(r, k)] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let (qkp, qkr) = (q[idx(k, p)], q[idx(k, r)]);
                    q[idx(k, p)] = c * qkp - s * qkr;
                    q[idx(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[idx(i, i)]).collect();
    Ok(SymmetricEigen {
        values,
        vectors: DenseMatrix::new(n, n, q)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::rng::CounterRng;

    #[test]
    fn reconstructs_random_symmetric() {
        let n = 9;
        let mut r = CounterRng::new(2, 0, 0);
        let b = DenseMatrix::from_fn(n, n, |_, _| r.next_gaussian());
        let a = b.add(&b.transpose()).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        let q = &e.vectors;
        let qtq = q.transpose().matmul(q).unwrap();
        assert!(qtq.sub(&DenseMatrix::identity(n)).unwrap().frobenius_norm() < 1e-12);
        let rec = q
            .matmul(&DenseMatrix::from_diag(&e.values))
            .unwrap()
            .matmul(&q.transpose())
            .unwrap();
        assert!(rec.sub(&a).unwrap().frobenius_norm() < 1e-11 * a.frobenius_norm());
    }

    #[test]
    fn second_difference_spectrum() {
        // eigenvalues of tridiag(-1, 2, -1) are 2 - 2 cos(kπ/(m+1))
        let m = 12;
        let t = DenseMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let mut vals = symmetric_eigen(&t).unwrap().values;
        vals.sort_by(f64::total_cmp);
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (m + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_nonsymmetric() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(symmetric_eigen(&a).is_err());
    }
}
