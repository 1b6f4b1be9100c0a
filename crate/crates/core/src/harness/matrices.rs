use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::operators::{LinearOperator, SparseCsr};
use crate::probes::rng::{derive_seed, streams, CounterRng};
use crate::probes::ProbeShape;

use super::io::read_matrix_market;

/// Largest order for which Haar sampling and the dense synthetic matrices
/// are built.
pub const HAAR_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatrixKind {
    /// `U₁ e₁e₁ᵀ`
    A1,
    /// `U₂ e₁e₁ᵀ V₂ᵀ`
    A2,
    /// `U₃ D`, `Dᵢᵢ = e^{-i/2}`
    A3,
    /// `U₄ D V₄ᵀ`, `Dᵢᵢ = e^{-i/2}`
    A4,
    /// `U₅ D`, `Dᵢᵢ = i²`
    A5,
    /// Haar orthogonal.
    A6,
    /// Standard Gaussian entries.
    A7,
    /// All ones.
    Ones,
    /// `vvᵀ` with `v = vec(I)`.
    RankOneVecIdentity,
    /// Five-point Laplacian on the unit square, `T ⊕ T` with
    /// `T = h⁻² tridiag(-1, 2, -1)`, `h = 1/(m+1)`.
    Laplace2D,
    /// Laplacian plus centered first-order convection with unit speed in
    /// both directions.
    ConvDiff,
    /// `-0.01 (I ⊗ T + T ⊗ I)` with `T = (m-1)² tridiag(-1, 2, -1)`.
    FrechetGrid,
    MatrixMarket(PathBuf),
}

impl MatrixKind {
    pub const SYNTHETIC: [MatrixKind; 7] = [
        MatrixKind::A1,
        MatrixKind::A2,
        MatrixKind::A3,
        MatrixKind::A4,
        MatrixKind::A5,
        MatrixKind::A6,
        MatrixKind::A7,
    ];

    pub fn tag(&self) -> String {
        match self {
            MatrixKind::A1 => "A1".into(),
            MatrixKind::A2 => "A2".into(),
            MatrixKind::A3 => "A3".into(),
            MatrixKind::A4 => "A4".into(),
            MatrixKind::A5 => "A5".into(),
            MatrixKind::A6 => "A6".into(),
            MatrixKind::A7 => "A7".into(),
            MatrixKind::Ones => "ones".into(),
            MatrixKind::RankOneVecIdentity => "rank-one".into(),
            MatrixKind::Laplace2D => "laplace".into(),
            MatrixKind::ConvDiff => "convdiff".into(),
            MatrixKind::FrechetGrid => "frechet-grid".into(),
            MatrixKind::MatrixMarket(p) => format!("mm:{}", p.display()),
        }
    }

    fn synthetic_index(&self) -> Option<u64> {
        MatrixKind::SYNTHETIC.iter().position(|k| k == self).map(|i| i as u64 + 1)
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(p) = s.strip_prefix("mm:") {
            return Ok(MatrixKind::MatrixMarket(PathBuf::from(p)));
        }
        let lower = s.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "a1" => MatrixKind::A1,
            "a2" => MatrixKind::A2,
            "a3" => MatrixKind::A3,
            "a4" => MatrixKind::A4,
            "a5" => MatrixKind::A5,
            "a6" => MatrixKind::A6,
            "a7" => MatrixKind::A7,
            "ones" => MatrixKind::Ones,
            "rank-one" | "rank1" => MatrixKind::RankOneVecIdentity,
            "laplace" => MatrixKind::Laplace2D,
            "convdiff" => MatrixKind::ConvDiff,
            "frechet-grid" => MatrixKind::FrechetGrid,
            _ => return Err(Error::InvalidArgument(format!("unknown matrix `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatrixTarget {
    TraceOfA,
    TraceOfInvA,
    FrobSqOfInvA,
    SpectralNorm,
    FrobeniusNorm,
}

impl MatrixTarget {
    pub fn is_trace(self) -> bool {
        matches!(self, MatrixTarget::TraceOfA | MatrixTarget::TraceOfInvA | MatrixTarget::FrobSqOfInvA)
    }

    pub fn name(self) -> &'static str {
        match self {
            MatrixTarget::TraceOfA => "trace",
            MatrixTarget::TraceOfInvA => "trace-inv",
            MatrixTarget::FrobSqOfInvA => "frob-sq-inv",
            MatrixTarget::SpectralNorm => "norm2",
            MatrixTarget::FrobeniusNorm => "normF",
        }
    }
}

impl FromStr for MatrixTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            MatrixTarget::TraceOfA,
            MatrixTarget::TraceOfInvA,
            MatrixTarget::FrobSqOfInvA,
            MatrixTarget::SpectralNorm,
            MatrixTarget::FrobeniusNorm,
        ]
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown target `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestMatrixSpec {
    pub kind: MatrixKind,
    pub shape: ProbeShape,
    pub target: MatrixTarget,
}

impl TestMatrixSpec {
    pub fn new(kind: MatrixKind, n_hat: usize, n_tilde: usize, target: MatrixTarget) -> Result<Self> {
        Ok(Self { kind, shape: ProbeShape::new(n_hat, n_tilde)?, target })
    }

    /// The sizes and targets of the trace-estimation test set: `n = 2500`
    /// with `n̂ = ñ = 50`.
    pub fn trace_suite(kind: MatrixKind) -> Result<Self> {
        let target = match kind {
            MatrixKind::Ones | MatrixKind::RankOneVecIdentity => MatrixTarget::TraceOfA,
            MatrixKind::Laplace2D => MatrixTarget::TraceOfInvA,
            MatrixKind::ConvDiff => MatrixTarget::FrobSqOfInvA,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{other} has no default trace-estimation setup"
                )))
            }
        };
        Self::new(kind, 50, 50, target)
    }

    /// A synthetic matrix at `n = m²` with probes of shape `m × m`.
    pub fn synthetic(kind: MatrixKind, m: usize, target: MatrixTarget) -> Result<Self> {
        Self::new(kind, m, m, target)
    }

    pub fn tag(&self) -> String {
        self.kind.tag()
    }

    pub fn n(&self) -> usize {
        self.shape.len()
    }
}

/// Haar-distributed orthogonal matrix: Gram–Schmidt (applied twice) on a
/// Gaussian matrix, which gives the QR factor with positive `R` diagonal.
pub fn haar_orthogonal(n: usize, seed: u64) -> Result<DenseMatrix> {
    if n == 0 || n > HAAR_LIMIT {
        return Err(Error::SizeGuard { what: "order for haar_orthogonal", value: n, limit: HAAR_LIMIT });
    }
    let mut rng = CounterRng::new(seed, 0, streams::MATRIX);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = vec![0.0; n];
        rng.fill_gaussian(&mut v);
        for _pass in 0..2 {
            for q in &cols {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    Ok(DenseMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

fn second_difference(m: usize, scale: f64) -> SparseCsr {
    let mut t = Vec::with_capacity(3 * m);
    for i in 0..m {
        t.push((i, i, 2.0 * scale));
        if i > 0 {
            t.push((i, i - 1, -scale));
            t.push((i - 1, i, -scale));
        }
    }
    SparseCsr::from_triplets(m, m, t).expect("in-range entries")
}

/// `h⁻² tridiag(-1, 2, -1) + (2h)⁻¹ tridiag(-1, 0, 1)`, `h = 1/(m+1)`.
fn convection_diffusion_1d(m: usize) -> SparseCsr {
    let h = 1.0 / (m as f64 + 1.0);
    let (d, c) = (1.0 / (h * h), 1.0 / (2.0 * h));
    let mut t = Vec::with_capacity(3 * m);
    for i in 0..m {
        t.push((i, i, 2.0 * d));
        if i > 0 {
            t.push((i, i - 1, -d - c));
        }
        if i + 1 < m {
            t.push((i, i + 1, -d + c));
        }
    }
    SparseCsr::from_triplets(m, m, t).expect("in-range entries")
}

fn laplace_factor(m: usize) -> SparseCsr {
    let h = 1.0 / (m as f64 + 1.0);
    second_difference(m, 1.0 / (h * h))
}

fn synthetic_dense(kind: &MatrixKind, n: usize, seed: u64) -> Result<DenseMatrix> {
    let idx = kind.synthetic_index().expect("synthetic kind");
    let u = || haar_orthogonal(n, derive_seed(seed, 2 * idx));
    let v = || haar_orthogonal(n, derive_seed(seed, 2 * idx + 1));
    let decay: Vec<f64> = (1..=n).map(|i| (-(i as f64) / 2.0).exp()).collect();
    let growth: Vec<f64> = (1..=n).map(|i| (i * i) as f64).collect();
    let col_scaled = |q: DenseMatrix, d: &[f64]| DenseMatrix::from_fn(n, n, |i, j| q.get(i, j) * d[j]);
    Ok(match kind {
        MatrixKind::A1 => {
            let q = u()?;
            DenseMatrix::from_fn(n, n, |i, j| if j == 0 { q.get(i, 0) } else { 0.0 })
        }
        MatrixKind::A2 => {
            let (q, w) = (u()?, v()?);
            DenseMatrix::outer(&q.column(0), &w.column(0))
        }
        MatrixKind::A3 => col_scaled(u()?, &decay),
        MatrixKind::A4 => col_scaled(u()?, &decay).matmul(&v()?.transpose())?,
        MatrixKind::A5 => col_scaled(u()?, &growth),
        MatrixKind::A6 => u()?,
        MatrixKind::A7 => {
            let mut rng = CounterRng::new(derive_seed(seed, 2 * idx), 1, streams::MATRIX);
            DenseMatrix::from_fn(n, n, |_, _| rng.next_gaussian())
        }
        _ => unreachable!("not a synthetic kind"),
    })
}

/// The matrix `A` described by `spec`. Seeded kinds draw from `seed`.
pub fn generate_matrix(spec: &TestMatrixSpec, seed: u64) -> Result<LinearOperator> {
    let shape = spec.shape;
    let (nh, nt) = (shape.n_hat(), shape.n_tilde());
    let n = shape.len();
    match &spec.kind {
        k if k.synthetic_index().is_some() => {
            if n > HAAR_LIMIT {
                return Err(Error::SizeGuard { what: "order of a synthetic matrix", value: n, limit: HAAR_LIMIT });
            }
            LinearOperator::dense(synthetic_dense(k, n, seed)?, shape)
        }
        MatrixKind::Ones => {
            let ones = DenseMatrix::from_fn(n, 1, |_, _| 1.0);
            LinearOperator::low_rank(ones.clone(), ones, shape)
        }
        MatrixKind::RankOneVecIdentity => {
            if nh != nt {
                return Err(Error::InvalidArgument("vec(I) needs n_hat = n_tilde".into()));
            }
            let v = DenseMatrix::from_fn(n, 1, |r, _| if r % nh == r / nh { 1.0 } else { 0.0 });
            LinearOperator::low_rank(v.clone(), v, shape)
        }
        MatrixKind::Laplace2D => LinearOperator::kronecker_sum_sparse(laplace_factor(nt), laplace_factor(nh)),
        MatrixKind::ConvDiff => {
            LinearOperator::kronecker_sum_sparse(convection_diffusion_1d(nt), convection_diffusion_1d(nh))
        }
        MatrixKind::FrechetGrid => {
            let factor = |m: usize| {
                let s = ((m as f64) - 1.0).powi(2);
                second_difference(m, -0.01 * s)
            };
            LinearOperator::kronecker_sum_sparse(factor(nt), factor(nh))
        }
        MatrixKind::MatrixMarket(path) => {
            let csr = read_matrix_market(path)?;
            if csr.nrows() != csr.ncols() || csr.ncols() != n {
                return Err(Error::InvalidFactorization { n: csr.ncols(), n_hat: nh, n_tilde: nt });
            }
            LinearOperator::sparse(csr, shape)
        }
        _ => unreachable!("all kinds covered"),
    }
}

fn is_spd_kind(kind: &MatrixKind) -> bool {
    matches!(kind, MatrixKind::Laplace2D | MatrixKind::Ones | MatrixKind::RankOneVecIdentity)
}

/// The PSD operator whose trace is the spec's target: `A`, `A⁻¹`, or
/// `A⁻ᵀA⁻¹`. Symmetric Matrix Market inputs are taken to be positive
/// definite.
pub fn trace_operator(spec: &TestMatrixSpec, a: LinearOperator) -> Result<LinearOperator> {
    let symmetric_input = match a.kind() {
        crate::operators::OperatorKind::SparseCsr(c) => c.is_symmetric(),
        _ => false,
    };
    let spd = is_spd_kind(&spec.kind) || symmetric_input;
    match spec.target {
        MatrixTarget::TraceOfA if a.is_psd() => Ok(a),
        MatrixTarget::TraceOfA if spd => Ok(a.assert_psd()),
        MatrixTarget::TraceOfInvA if spd => Ok(LinearOperator::inverse(&a)?.assert_psd()),
        MatrixTarget::TraceOfA | MatrixTarget::TraceOfInvA => Err(Error::PsdNotAsserted),
        MatrixTarget::FrobSqOfInvA => Ok(LinearOperator::gram(LinearOperator::inverse(&a)?)),
        t => Err(Error::InvalidArgument(format!("{} is not a trace target", t.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::small_svd;

    #[test]
    fn haar_is_orthogonal_with_unit_determinant() {
        for n in [1, 5, 30] {
            let u = haar_orthogonal(n, 3).unwrap();
            let e = u.transpose().matmul(&u).unwrap().sub(&DenseMatrix::identity(n)).unwrap();
            assert!(e.frobenius_norm() < 1e-10);
            // |det U| = Π σᵢ
            let det: f64 = small_svd(&u).unwrap().values().iter().product();
            assert!((det - 1.0).abs() < 1e-8);
        }
        assert!(haar_orthogonal(HAAR_LIMIT + 1, 0).is_err());
    }

    #[test]
    fn haar_first_coordinate_variance() {
        // a Haar column is uniform on the sphere, so each coordinate has variance 1/n
        let n = 8;
        let draws = 10_000;
        let s: f64 = (0..draws)
            .map(|seed| haar_orthogonal(n, seed).unwrap().get(0, 0).powi(2))
            .sum();
        let var = s / draws as f64;
        assert!((var * n as f64 - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn trace_suite_references() {
        let ones = TestMatrixSpec::trace_suite(MatrixKind::Ones).unwrap();
        assert_eq!(generate_matrix(&ones, 0).unwrap().exact_trace(), Some(2500.0));
        let r1 = TestMatrixSpec::trace_suite(MatrixKind::RankOneVecIdentity).unwrap();
        assert_eq!(generate_matrix(&r1, 0).unwrap().exact_trace(), Some(50.0));

        let lap = TestMatrixSpec::trace_suite(MatrixKind::Laplace2D).unwrap();
        let inv = trace_operator(&lap, generate_matrix(&lap, 0).unwrap()).unwrap();
        let t = inv.exact_trace().unwrap();
        assert!((t - 0.61).abs() < 0.01, "{t}");
    }

    #[test]
    fn laplace_matches_five_point_stencil() {
        let spec = TestMatrixSpec::new(MatrixKind::Laplace2D, 3, 3, MatrixTarget::TraceOfA).unwrap();
        let a = generate_matrix(&spec, 0).unwrap().to_dense().unwrap();
        let h2 = 16.0;
        assert_eq!(a.get(4, 4), 4.0 * h2);
        assert_eq!(a.get(4, 1), -h2);
        assert_eq!(a.get(4, 3), -h2);
        assert_eq!(a.get(2, 3), 0.0);
    }

    #[test]
    fn convdiff_is_a_perturbed_laplacian() {
        let spec = TestMatrixSpec::trace_suite(MatrixKind::ConvDiff).unwrap();
        let a = generate_matrix(&spec, 0).unwrap();
        let lap = generate_matrix(&TestMatrixSpec::trace_suite(MatrixKind::Laplace2D).unwrap(), 0).unwrap();
        assert_eq!(a.exact_trace(), lap.exact_trace());
        let inv = trace_operator(&spec, a).unwrap();
        assert!(inv.is_psd());
    }

    #[test]
    fn synthetic_singular_values() {
        let n = 16;
        let sv = |k: MatrixKind| {
            let spec = TestMatrixSpec::synthetic(k, 4, MatrixTarget::SpectralNorm).unwrap();
            small_svd(&generate_matrix(&spec, 5).unwrap().to_dense().unwrap()).unwrap()
        };
        for k in [MatrixKind::A1, MatrixKind::A2] {
            let s = sv(k);
            assert!((s.largest() - 1.0).abs() < 1e-12);
            assert!(s.frobenius_sq() - 1.0 < 1e-12);
        }
        let s = sv(MatrixKind::A4);
        assert!((s.largest() - (-0.5f64).exp()).abs() < 1e-12);
        let s = sv(MatrixKind::A5);
        assert!((s.largest() - (n * n) as f64).abs() < 1e-9);
        let s = sv(MatrixKind::A6);
        assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("ones".parse::<MatrixKind>().unwrap(), MatrixKind::Ones);
        assert_eq!("A3".parse::<MatrixKind>().unwrap(), MatrixKind::A3);
        assert_eq!(
            "mm:/tmp/x.mtx".parse::<MatrixKind>().unwrap(),
            MatrixKind::MatrixMarket(PathBuf::from("/tmp/x.mtx"))
        );
        assert!("cube".parse::<MatrixKind>().is_err());
        assert_eq!("trace-inv".parse::<MatrixTarget>().unwrap(), MatrixTarget::TraceOfInvA);
    }
}
