//! LU factorizations with partial pivoting: a dense one and a banded one
//! (LAPACK `gbtrf` storage) for the Kronecker-sum discretizations, whose
//! bandwidth is only `n̂`.

use super::DenseMatrix;
use crate::error::{Error, Result};

fn singular_threshold(n: usize, max_abs: f64) -> f64 {
    n as f64 * f64::EPSILON * max_abs
}

/// Dense `PA = LU`, packed in place.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactorization {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                what: "LU factorization",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.data().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = singular_threshold(n, a.max_abs());

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmax <= tiny {
                return Err(Error::Singular {
                    step: k,
                    pivot: pmax,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let m = lu[i * n + k] / pivot;
                lu[i * n + k] = m;
                if m != 0.0 {
                    let (upper, lower) = lu.split_at_mut(i * n);
                    let krow = &upper[k * n + k + 1..k * n + n];
                    for (x, u) in lower[k + 1..n].iter_mut().zip(krow) {
                        *x -= m * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A y = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::mismatch("lu_solve", n, b.len()));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        Ok(y)
    }

    /// Solve `Aᵀ y = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::mismatch("lu_solve_transpose", n, b.len()));
        }
        // Aᵀ = Uᵀ Lᵀ P
        let mut z = b.to_vec();
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            for j in i + 1..n {
                z[j] -= self.lu[i * n + j] * zi;
            }
        }
        for i in (0..n).rev() {
            let zi = z[i];
            for j in 0..i {
                z[j] -= self.lu[i * n + j] * zi;
            }
        }
        let mut y = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            y[p] = z[k];
        }
        Ok(y)
    }

    /// Solve `A Y = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != self.n {
            return Err(Error::mismatch("lu_solve_matrix", self.n, b.rows()));
        }
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve(&b.column(j))?;
            for (i, v) in col.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }
}

/// Banded `PA = LU` with partial pivoting. Fill-in widens the upper band to
/// `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let (kl, ku) = a.bandwidths();
        Self::with_bandwidths(a, kl, ku)
    }

    pub fn with_bandwidths(a: &DenseMatrix, kl: usize, ku: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                what: "banded LU factorization",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let entries = (0..n).flat_map(|i| {
            (i.saturating_sub(kl)..(i + ku + 1).min(n)).map(move |j| (i, j, a.get(i, j)))
        });
        Self::from_entries(n, kl, ku, entries)
    }

    /// Factor an `n × n` matrix given by its nonzero entries, all of which
    /// must lie inside the band. Duplicate entries are summed.
    pub fn from_entries(
        n: usize,
        kl: usize,
        ku: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let ldab = 2 * kl + ku + 1;
        let kv = kl + ku;
        let mut f = Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
            ipiv: vec![0; n],
        };
        let mut max_abs = 0.0f64;
        for (i, j, v) in entries {
            if i >= n || j >= n || i > j + kl || j > i + ku {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) lies outside the band ({kl}, {ku}) of an {n}x{n} matrix"
                )));
            }
            let slot = j * ldab + kv + i - j;
            f.ab[slot] += v;
            max_abs = max_abs.max(f.ab[slot].abs());
        }
        let tiny = singular_threshold(n, max_abs);

        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let (jp, pmax) = (0..=km)
                .map(|r| (r, f.ab[col + r].abs()))
                .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmax <= tiny {
                return Err(Error::Singular {
                    step: j,
                    pivot: pmax,
                });
            }
            f.ipiv[j] = j + jp;
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a1 = f.idx(j, c);
                    let a2 = f.idx(j + jp, c);
                    f.ab.swap(a1, a2);
                }
            }
            if km > 0 {
                let pivot = f.ab[col];
                for r in 1..=km {
                    f.ab[col + r] /= pivot;
                }
                for c in j + 1..=ju {
                    let ajc = f.ab[f.idx(j, c)];
                    if ajc == 0.0 {
                        continue;
                    }
                    let base = f.idx(j, c);
                    for r in 1..=km {
                        let l = f.ab[col + r];
                        f.ab[base + r] -= l * ajc;
                    }
                }
            }
        }
        Ok(f)
    }

    #[inline(always)]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::mismatch("band_lu_solve", self.n, b.len()));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n.saturating_sub(1) {
            let l = self.ipiv[j];
            if l != j {
                x.swap(l, j);
            }
            let xj = x[j];
            if xj != 0.0 {
                let km = self.kl.min(n - 1 - j);
                let col = j * self.ldab + kv;
                for r in 1..=km {
                    x[j + r] -= self.ab[col + r] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * self.ldab + kv;
            x[j] /= self.ab[col];
            let xj = x[j];
            if xj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    x[i] -= self.ab[col + i - j] * xj;
                }
            }
        }
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::mismatch("band_lu_solve_transpose", self.n, b.len()));
        }
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut x = b.to_vec();
        for j in 0..n {
            let col = j * self.ldab + kv;
            let lo = j.saturating_sub(kv);
            let mut s = x[j];
            for i in lo..j {
                s -= self.ab[col + i - j] * x[i];
            }
            x[j] = s / self.ab[col];
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let km = self.kl.min(n - 1 - j);
            let col = j * self.ldab + kv;
            let mut s = x[j];
            for r in 1..=km {
                s -= self.ab[col + r] * x[j + r];
            }
            x[j] = s;
            let l = self.ipiv[j];
            if l != j {
                x.swap(l, j);
            }
        }
        Ok(x)
    }
}

/// A square factorization, dense or banded.
#[derive(Debug, Clone)]
pub enum Factorization {
    Dense(LuFactorization),
    Banded(BandLu),
}

impl Factorization {
    /// Picks the banded path when the band storage is well below `n²`.
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let (kl, ku) = a.bandwidths();
        if a.is_square() && 4 * (2 * kl + ku + 1) <= a.rows() {
            Ok(Factorization::Banded(BandLu::with_bandwidths(a, kl, ku)?))
        } else {
            Ok(Factorization::Dense(LuFactorization::new(a)?))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Factorization::Dense(f) => f.dim(),
            Factorization::Banded(f) => f.dim(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factorization::Dense(f) => f.solve(b),
            Factorization::Banded(f) => f.solve(b),
        }
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factorization::Dense(f) => f.solve_transpose(b),
            Factorization::Banded(f) => f.solve_transpose(b),
        }
    }

    /// Rough multiply-add count of one solve.
    pub fn solve_cost(&self) -> u64 {
        match self {
            Factorization::Dense(f) => (f.dim() * f.dim()) as u64,
            Factorization::Banded(f) => (f.dim() * (2 * f.kl + f.ku)) as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::probes::rng::CounterRng;

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut r = CounterRng::new(seed, 0, 99);
        DenseMatrix::from_fn(n, n, |_, _| r.next_gaussian())
    }

    fn residual(a: &DenseMatrix, y: &[f64], b: &[f64]) -> f64 {
        let ay = a.mat_vec(y).unwrap();
        let r: Vec<f64> = ay.iter().zip(b).map(|(p, q)| p - q).collect();
        norm2(&r) / norm2(b)
    }

    #[test]
    fn trivial_solves() {
        let f = LuFactorization::new(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(f.solve(&[4.0, 5.0]).unwrap(), vec![4.0, 5.0]);
        let f = LuFactorization::new(&DenseMatrix::from_diag(&[2.0, 4.0])).unwrap();
        assert_eq!(f.solve(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn random_round_trip() {
        for seed in 0..5 {
            let a = random_matrix(8, seed);
            let f = LuFactorization::new(&a).unwrap();
            let b: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 0.5).collect();
            assert!(residual(&a, &f.solve(&b).unwrap(), &b) < 1e-10);
            let yt = f.solve_transpose(&b).unwrap();
            assert!(residual(&a.transpose(), &yt, &b) < 1e-10);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(
            LuFactorization::new(&a),
            Err(Error::Singular { .. })
        ));
        assert!(matches!(
            LuFactorization::new(&DenseMatrix::zeros(3, 3)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn banded_matches_dense() {
        // nonsymmetric banded matrix that forces pivoting
        let n = 30;
        let mut r = CounterRng::new(3, 0, 7);
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            if (j as isize - i as isize) >= -2 && (j as isize - i as isize) <= 3 {
                r.next_gaussian()
            } else {
                0.0
            }
        });
        let band = BandLu::new(&a).unwrap();
        assert_eq!(band.bandwidths(), (2, 3));
        let dense = LuFactorization::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let yb = band.solve(&b).unwrap();
        let yd = dense.solve(&b).unwrap();
        for (p, q) in yb.iter().zip(&yd) {
            assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
        assert!(residual(&a, &yb, &b) < 1e-10);
        let yt = band.solve_transpose(&b).unwrap();
        assert!(residual(&a.transpose(), &yt, &b) < 1e-10);
    }

    #[test]
    fn factorization_picks_band_path() {
        let n = 40;
        let a = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        assert!(matches!(Factorization::new(&a).unwrap(), Factorization::Banded(_)));
        let small = DenseMatrix::identity(3);
        assert!(matches!(
            Factorization::new(&small).unwrap(),
            Factorization::Dense(_)
        ));
    }
}
