//! Singular values by one-sided Jacobi rotations.

use super::DenseMatrix;
use crate::error::{Error, Result};

pub const SVD_LIMIT: usize = 512;

/// Nonincreasing singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularValues(Vec<f64>);

impl SingularValues {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn largest(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    /// `(Σ σᵢᵖ)^{1/p}`
    pub fn schatten(&self, p: f64) -> f64 {
        self.0.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().map(|s| s * s).sum()
    }
}

pub fn small_svd(q: &DenseMatrix) -> Result<SingularValues> {
    let (m, n) = (q.rows(), q.cols());
    if m.min(n) > SVD_LIMIT {
        return Err(Error::SizeGuard {
            what: "min(rows, cols) for small_svd",
            value: m.min(n),
            limit: SVD_LIMIT,
        });
    }
    // Rotate the columns of the taller orientation.
    let a = if m >= n { q.transpose() } else { q.clone() };
    // rows of `a` are the columns being orthogonalized
    let (k, len) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<f64>> = (0..k).map(|i| a.row(i).to_vec()).collect();

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for r in p + 1..k {
                let (alpha, beta, gamma) = {
                    let (cp, cr) = (&cols[p], &cols[r]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for i in 0..len {
                        al += cp[i] * cp[i];
                        be += cr[i] * cr[i];
                        ga += cp[i] * cr[i];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(r);
                let (cp, cr) = (&mut lo[p], &mut hi[0]);
                for i in 0..len {
                    let x = cp[i];
                    let y = cr[i];
                    cp[i] = c * x - s * y;
                    cr[i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut values: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SingularValues(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::rng::CounterRng;

    #[test]
    fn trivial_cases() {
        let s = small_svd(&DenseMatrix::identity(2).scaled(0.5f64.sqrt())).unwrap();
        for v in s.values() {
            assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        }
        let mut e = DenseMatrix::zeros(4, 4);
        e.set(0, 0, 1.0);
        assert_eq!(small_svd(&e).unwrap().values(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn frobenius_identity() {
        for (m, n) in [(5, 3), (3, 5), (7, 7)] {
            let mut r = CounterRng::new(m as u64, n as u64, 0);
            let q = DenseMatrix::from_fn(m, n, |_, _| r.next_gaussian());
            let s = small_svd(&q).unwrap();
            let f2 = q.frobenius_norm().powi(2);
            assert!((s.frobenius_sq() - f2).abs() <= 1e-10 * f2);
            assert!(s.values().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn known_spectrum() {
        // diag(3, 2, 1) conjugated by a permutation and sign flips
        let q = DenseMatrix::from_rows(&[&[0.0, -2.0, 0.0], &[0.0, 0.0, 1.0], &[3.0, 0.0, 0.0]])
            .unwrap();
        let s = small_svd(&q).unwrap();
        assert_eq!(s.values(), &[3.0, 2.0, 1.0]);
        assert!((s.schatten(4.0) - 98f64.powf(0.25)).abs() < 1e-14);
    }
}
