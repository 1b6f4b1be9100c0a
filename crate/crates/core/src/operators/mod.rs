//! Matrix-free linear operators with a fast path for rank-one inputs.
//!
//! Every operator acts on vectors of length `n = n̂·ñ` and carries that
//! factorization, so a probe `x̃ ⊗ x̂` can be applied without forming it when
//! the structure allows. A Kronecker sum `C₁ ⊗ I + I ⊗ C₂` maps `x̃ ⊗ x̂` to
//! `x̃ ⊗ C₂x̂ + C₁x̃ ⊗ x̂` in `O(nnz(C₁) + nnz(C₂) + n)`.

mod sparse;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use sparse::SparseCsr;

use crate::error::{Error, Result};
use crate::linalg::{
    dot, kron, norm2_sq, spectral_norm, symmetric_eigen, BandLu, DenseMatrix,
    Factorization, LinearMap, LuFactorization,
};
use crate::probes::{Probe, ProbeShape};

/// Largest `rows·cols` that [`LinearOperator::to_dense`] will materialize.
pub const DENSE_LIMIT: usize = 1 << 24;
/// Largest dimension factored by dense LU when no narrow band is found.
pub const DENSE_LU_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdStatus {
    Unknown,
    /// Gram products and `vvᵀ` are PSD whatever the data.
    ByConstruction,
    /// The caller vouches for it.
    Asserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseMethod {
    /// Eigenbasis of a symmetric Kronecker sum when available, LU otherwise.
    #[default]
    Auto,
    Lu,
}

#[derive(Debug, Clone)]
pub enum InverseSolver {
    Lu(Factorization),
    /// `A = (Q₁⊗Q₂)(Λ₁⊕Λ₂)(Q₁⊗Q₂)ᵀ`; `inv[j·n̂+i] = 1/(λ₁ⱼ + λ₂ᵢ)`.
    KroneckerEigen {
        q1: DenseMatrix,
        q2: DenseMatrix,
        inv: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StableRankKind {
    /// `‖B‖_F² / ‖B‖₂²`
    FrobeniusSq,
    /// `trace B / ‖B‖₂`
    TraceOverNorm,
}

#[derive(Debug, Clone)]
pub enum OperatorKind {
    Dense(DenseMatrix),
    SparseCsr(SparseCsr),
    /// `C₁ ⊗ I_n̂ + I_ñ ⊗ C₂` with `C₁` of order `ñ` and `C₂` of order `n̂`.
    KroneckerSum { c1: SparseCsr, c2: SparseCsr },
    /// `L Rᵀ`
    LowRank { left: DenseMatrix, right: DenseMatrix },
    FactorizedInverse(InverseSolver),
    /// `AᵀA`
    Gram(Arc<LinearOperator>),
    Transpose(Arc<LinearOperator>),
}

#[derive(Debug)]
pub struct LinearOperator {
    kind: OperatorKind,
    rows: usize,
    cols: usize,
    shape: ProbeShape,
    psd: PsdStatus,
    work: AtomicU64,
}

impl Clone for LinearOperator {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind.clone(),
            rows: self.rows,
            cols: self.cols,
            shape: self.shape,
            psd: self.psd,
            work: AtomicU64::new(0),
        }
    }
}

fn check_len(context: &'static str, expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::mismatch(context, expected, v.len()))
    }
}

fn col_major(v: &[f64], rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |i, j| v[j * rows + i])
}

fn to_col_major(m: &DenseMatrix) -> Vec<f64> {
    crate::linalg::reshape_mat_to_vec(m)
}

impl LinearOperator {
    fn build(kind: OperatorKind, rows: usize, cols: usize, shape: ProbeShape, psd: PsdStatus) -> Result<Self> {
        if shape.len() != cols {
            return Err(Error::InvalidFactorization {
                n: cols,
                n_hat: shape.n_hat(),
                n_tilde: shape.n_tilde(),
            });
        }
        Ok(Self {
            kind,
            rows,
            cols,
            shape,
            psd,
            work: AtomicU64::new(0),
        })
    }

    pub fn dense(a: DenseMatrix, shape: ProbeShape) -> Result<Self> {
        let (r, c) = (a.rows(), a.cols());
        Self::build(OperatorKind::Dense(a), r, c, shape, PsdStatus::Unknown)
    }

    /// A dense operator whose probes are unstructured (`ñ = 1`).
    pub fn dense_unstructured(a: DenseMatrix) -> Self {
        let shape = ProbeShape::trivial(a.cols().max(1));
        Self::dense(a, shape).expect("trivial shape always fits")
    }

    pub fn sparse(a: SparseCsr, shape: ProbeShape) -> Result<Self> {
        let (r, c) = (a.nrows(), a.ncols());
        Self::build(OperatorKind::SparseCsr(a), r, c, shape, PsdStatus::Unknown)
    }

    /// `C₁ ⊗ I + I ⊗ C₂`; the probe shape is `(n̂, ñ) = (dim C₂, dim C₁)`.
    pub fn kronecker_sum(c1: &DenseMatrix, c2: &DenseMatrix) -> Result<Self> {
        Self::kronecker_sum_sparse(SparseCsr::from_dense(c1), SparseCsr::from_dense(c2))
    }

    pub fn kronecker_sum_sparse(c1: SparseCsr, c2: SparseCsr) -> Result<Self> {
        for (m, what) in [(&c1, "Kronecker-sum factor C1"), (&c2, "Kronecker-sum factor C2")] {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare { what, rows: m.nrows(), cols: m.ncols() });
            }
        }
        let shape = ProbeShape::new(c2.nrows(), c1.nrows())?;
        let n = shape.len();
        Self::build(OperatorKind::KroneckerSum { c1, c2 }, n, n, shape, PsdStatus::Unknown)
    }

    /// `L Rᵀ`; positive semi-definite by construction when `L = R`.
    pub fn low_rank(left: DenseMatrix, right: DenseMatrix, shape: ProbeShape) -> Result<Self> {
        if left.cols() != right.cols() {
            return Err(Error::mismatch("low_rank factors", left.cols(), right.cols()));
        }
        let psd = if left == right { PsdStatus::ByConstruction } else { PsdStatus::Unknown };
        let (r, c) = (left.rows(), right.rows());
        Self::build(OperatorKind::LowRank { left, right }, r, c, shape, psd)
    }

    pub fn inverse(op: &LinearOperator) -> Result<Self> {
        Self::inverse_with(op, InverseMethod::Auto)
    }

    /// Factor `op` once so that applying the result solves with it.
    pub fn inverse_with(op: &LinearOperator, method: InverseMethod) -> Result<Self> {
        if op.rows != op.cols {
            return Err(Error::NotSquare { what: "inverse", rows: op.rows, cols: op.cols });
        }
        let n = op.rows;
        let solver = match (&op.kind, method) {
            (OperatorKind::KroneckerSum { c1, c2 }, InverseMethod::Auto)
                if c1.is_symmetric() && c2.is_symmetric() =>
            {
                kronecker_eigen_solver(c1, c2)?
            }
            (OperatorKind::Dense(a), _) => InverseSolver::Lu(Factorization::new(a)?),
            _ => {
                let csr = op.to_csr()?;
                let (kl, ku) = csr.bandwidths();
                if 4 * (2 * kl + ku + 1) <= n {
                    InverseSolver::Lu(Factorization::Banded(BandLu::from_entries(n, kl, ku, csr.triplets())?))
                } else if n <= DENSE_LU_LIMIT {
                    InverseSolver::Lu(Factorization::Dense(LuFactorization::new(&csr.to_dense())?))
                } else {
                    return Err(Error::SizeGuard {
                        what: "dimension for dense LU",
                        value: n,
                        limit: DENSE_LU_LIMIT,
                    });
                }
            }
        };
        let psd = if op.is_psd() { PsdStatus::ByConstruction } else { PsdStatus::Unknown };
        Self::build(OperatorKind::FactorizedInverse(solver), n, n, op.shape, psd)
    }

    /// `AᵀA`, sharing `A`.
    pub fn gram(op: impl Into<Arc<LinearOperator>>) -> Self {
        let op = op.into();
        let (n, shape) = (op.cols, op.shape);
        Self::build(OperatorKind::Gram(op), n, n, shape, PsdStatus::ByConstruction)
            .expect("shape carried over from the inner operator")
    }

    pub fn transpose(op: impl Into<Arc<LinearOperator>>) -> Self {
        let op = op.into();
        let shape = if op.rows == op.cols { op.shape } else { ProbeShape::trivial(op.rows.max(1)) };
        let psd = op.psd;
        let (r, c) = (op.cols, op.rows);
        Self::build(OperatorKind::Transpose(op), r, c, shape, psd).expect("valid transpose shape")
    }

    /// Replace the probe factorization.
    pub fn with_shape(mut self, shape: ProbeShape) -> Result<Self> {
        if shape.len() != self.cols {
            return Err(Error::InvalidFactorization {
                n: self.cols,
                n_hat: shape.n_hat(),
                n_tilde: shape.n_tilde(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Record the caller's assurance that the operator is symmetric PSD.
    pub fn assert_psd(mut self) -> Self {
        if self.psd == PsdStatus::Unknown {
            self.psd = PsdStatus::Asserted;
        }
        self
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> ProbeShape {
        self.shape
    }

    pub fn psd_status(&self) -> PsdStatus {
        self.psd
    }

    pub fn is_psd(&self) -> bool {
        self.psd != PsdStatus::Unknown
    }

    /// Multiply-adds spent by applications so far, including inner operators
    /// of compositions.
    pub fn work_count(&self) -> u64 {
        let own = self.work.load(Ordering::Relaxed);
        match &self.kind {
            OperatorKind::Gram(a) | OperatorKind::Transpose(a) => own + a.work_count(),
            _ => own,
        }
    }

    pub fn reset_work(&self) {
        self.work.store(0, Ordering::Relaxed);
        if let OperatorKind::Gram(a) | OperatorKind::Transpose(a) = &self.kind {
            a.reset_work();
        }
    }

    #[inline]
    fn charge(&self, ops: usize) {
        self.work.fetch_add(ops as u64, Ordering::Relaxed);
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("apply", self.cols, v)?;
        self.apply_unchecked(v)
    }

    fn apply_unchecked(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.kind {
            OperatorKind::Dense(a) => {
                self.charge(a.rows() * a.cols());
                a.mat_vec_unchecked(v)
            }
            OperatorKind::SparseCsr(a) => {
                self.charge(a.nnz());
                let mut y = vec![0.0; a.nrows()];
                a.mul_into(v, &mut y);
                y
            }
            OperatorKind::KroneckerSum { c1, c2 } => {
                self.charge(self.shape.n_tilde() * c2.nnz() + self.shape.n_hat() * c1.nnz());
                kron_sum_apply(c1, c2, self.shape, v, false)
            }
            OperatorKind::LowRank { left, right } => {
                self.charge((left.rows() + right.rows()) * left.cols());
                left.mat_vec_unchecked(&right.mat_vec_transpose_unchecked(v))
            }
            OperatorKind::FactorizedInverse(s) => self.inverse_apply(s, v, false)?,
            OperatorKind::Gram(a) => a.apply_transpose_unchecked(&a.apply_unchecked(v)?)?,
            OperatorKind::Transpose(a) => a.apply_transpose_unchecked(v)?,
        })
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_transpose", self.rows, v)?;
        self.apply_transpose_unchecked(v)
    }

    fn apply_transpose_unchecked(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.kind {
            OperatorKind::Dense(a) => {
                self.charge(a.rows() * a.cols());
                a.mat_vec_transpose_unchecked(v)
            }
            OperatorKind::SparseCsr(a) => {
                self.charge(a.nnz());
                let mut y = vec![0.0; a.ncols()];
                a.mul_transpose_into(v, &mut y);
                y
            }
            OperatorKind::KroneckerSum { c1, c2 } => {
                self.charge(self.shape.n_tilde() * c2.nnz() + self.shape.n_hat() * c1.nnz());
                kron_sum_apply(c1, c2, self.shape, v, true)
            }
            OperatorKind::LowRank { left, right } => {
                self.charge((left.rows() + right.rows()) * left.cols());
                right.mat_vec_unchecked(&left.mat_vec_transpose_unchecked(v))
            }
            OperatorKind::FactorizedInverse(s) => self.inverse_apply(s, v, true)?,
            OperatorKind::Gram(_) => self.apply_unchecked(v)?,
            OperatorKind::Transpose(a) => a.apply_unchecked(v)?,
        })
    }

    fn inverse_apply(&self, s: &InverseSolver, v: &[f64], transpose: bool) -> Result<Vec<f64>> {
        match s {
            InverseSolver::Lu(f) => {
                self.charge(f.solve_cost() as usize);
                if transpose {
                    f.solve_transpose(v)
                } else {
                    f.solve(v)
                }
            }
            InverseSolver::KroneckerEigen { q1, q2, inv } => {
                let (nh, nt) = (q2.rows(), q1.rows());
                self.charge(2 * (nh * nh * nt + nh * nt * nt) + nh * nt);
                // Z = Q₂ᵀ X Q₁, scale, then X = Q₂ Z Q₁ᵀ
                let x = col_major(v, nh, nt);
                let mut z = q2.transpose().matmul(&x)?.matmul(q1)?;
                for j in 0..nt {
                    for i in 0..nh {
                        z.set(i, j, z.get(i, j) * inv[j * nh + i]);
                    }
                }
                Ok(to_col_major(&q2.matmul(&z)?.matmul(&q1.transpose())?))
            }
        }
    }

    /// `op · (x̃ ⊗ x̂)`.
    pub fn apply_rank_one(&self, x_tilde: &[f64], x_hat: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_rank_one (x_tilde)", self.shape.n_tilde(), x_tilde)?;
        check_len("apply_rank_one (x_hat)", self.shape.n_hat(), x_hat)?;
        self.apply_rank_one_unchecked(x_tilde, x_hat)
    }

    fn apply_rank_one_unchecked(&self, xt: &[f64], xh: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            OperatorKind::KroneckerSum { c1, c2 } => {
                let n_hat = xh.len();
                self.charge(c1.nnz() + c2.nnz() + 2 * self.cols);
                let mut c2x = vec![0.0; n_hat];
                c2.mul_into(xh, &mut c2x);
                let mut c1x = vec![0.0; xt.len()];
                c1.mul_into(xt, &mut c1x);
                let mut y = Vec::with_capacity(self.cols);
                for (&t, &ct) in xt.iter().zip(&c1x) {
                    y.extend(c2x.iter().zip(xh).map(|(&c2h, &h)| t * c2h + ct * h));
                }
                Ok(y)
            }
            OperatorKind::FactorizedInverse(InverseSolver::KroneckerEigen { q1, q2, inv }) => {
                let (a, b) = self.eigen_coords(q1, q2, xt, xh);
                let (nh, nt) = (a.len(), b.len());
                self.charge(nh * nh + nt * nt + 2 * (nh * nh * nt + nh * nt));
                let z = DenseMatrix::from_fn(nh, nt, |i, j| a[i] * b[j] * inv[j * nh + i]);
                Ok(to_col_major(&q2.matmul(&z)?.matmul(&q1.transpose())?))
            }
            OperatorKind::Gram(a) => {
                let y = a.apply_rank_one_unchecked(xt, xh)?;
                a.apply_transpose_unchecked(&y)
            }
            _ => self.apply_unchecked(&kron(xt, xh)),
        }
    }

    /// `(Q₂ᵀx̂, Q₁ᵀx̃)`
    fn eigen_coords(&self, q1: &DenseMatrix, q2: &DenseMatrix, xt: &[f64], xh: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (q2.mat_vec_transpose_unchecked(xh), q1.mat_vec_transpose_unchecked(xt))
    }

    /// `‖op · (x̃ ⊗ x̂)‖₂²`
    pub fn image_norm_sq_rank_one(&self, x_tilde: &[f64], x_hat: &[f64]) -> Result<f64> {
        check_len("image_norm_sq_rank_one (x_tilde)", self.shape.n_tilde(), x_tilde)?;
        check_len("image_norm_sq_rank_one (x_hat)", self.shape.n_hat(), x_hat)?;
        if let OperatorKind::FactorizedInverse(InverseSolver::KroneckerEigen { q1, q2, inv }) = &self.kind {
            let (a, b) = self.eigen_coords(q1, q2, x_tilde, x_hat);
            self.charge(a.len() * a.len() + b.len() * b.len() + self.cols);
            return Ok(weighted_outer_sum(&a, &b, inv, true));
        }
        Ok(norm2_sq(&self.apply_rank_one_unchecked(x_tilde, x_hat)?))
    }

    /// `(x̃ ⊗ x̂)ᵀ op (x̃ ⊗ x̂)`; for a Gram operator `AᵀA` this is `‖A(x̃ ⊗ x̂)‖₂²`.
    pub fn quadratic_form_rank_one(&self, x_tilde: &[f64], x_hat: &[f64]) -> Result<f64> {
        check_len("quadratic_form_rank_one (x_tilde)", self.shape.n_tilde(), x_tilde)?;
        check_len("quadratic_form_rank_one (x_hat)", self.shape.n_hat(), x_hat)?;
        match &self.kind {
            OperatorKind::Gram(a) => a.image_norm_sq_rank_one(x_tilde, x_hat),
            OperatorKind::FactorizedInverse(InverseSolver::KroneckerEigen { q1, q2, inv }) => {
                let (a, b) = self.eigen_coords(q1, q2, x_tilde, x_hat);
                self.charge(a.len() * a.len() + b.len() * b.len() + self.cols);
                Ok(weighted_outer_sum(&a, &b, inv, false))
            }
            OperatorKind::LowRank { left, right } if left == right => {
                // Σ_r (x ⋅ l_r)²
                let x = kron(x_tilde, x_hat);
                self.charge(left.rows() * left.cols());
                let c = left.mat_vec_transpose_unchecked(&x);
                Ok(norm2_sq(&c))
            }
            _ => {
                let y = self.apply_rank_one_unchecked(x_tilde, x_hat)?;
                // xᵀy without materializing x
                let nh = x_hat.len();
                Ok(x_tilde
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| t * dot(x_hat, &y[j * nh..(j + 1) * nh]))
                    .sum())
            }
        }
    }

    /// `xᵀ op x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        check_len("quadratic_form", self.cols, x)?;
        match &self.kind {
            OperatorKind::Gram(a) => Ok(norm2_sq(&a.apply_unchecked(x)?)),
            OperatorKind::FactorizedInverse(InverseSolver::KroneckerEigen { q1, q2, inv }) => {
                let (nh, nt) = (q2.rows(), q1.rows());
                self.charge(nh * nh * nt + nh * nt * nt + nh * nt);
                let z = q2.transpose().matmul(&col_major(x, nh, nt))?.matmul(q1)?;
                Ok((0..nt)
                    .flat_map(|j| (0..nh).map(move |i| (i, j)))
                    .map(|(i, j)| z.get(i, j) * z.get(i, j) * inv[j * nh + i])
                    .sum())
            }
            OperatorKind::LowRank { left, right } if left == right => {
                self.charge(left.rows() * left.cols());
                Ok(norm2_sq(&left.mat_vec_transpose_unchecked(x)))
            }
            _ => Ok(dot(x, &self.apply_unchecked(x)?)),
        }
    }

    /// `‖op · x‖₂`, taking the rank-one path when possible.
    pub fn norm_of_probe(&self, probe: &Probe) -> Result<f64> {
        match probe {
            Probe::RankOne(p) => Ok(self.image_norm_sq_rank_one(&p.tilde, &p.hat)?.sqrt()),
            Probe::Full { x, .. } => Ok(norm2_sq(&self.apply(x)?).sqrt()),
        }
    }

    pub fn quadratic_form_of_probe(&self, probe: &Probe) -> Result<f64> {
        match probe {
            Probe::RankOne(p) => self.quadratic_form_rank_one(&p.tilde, &p.hat),
            Probe::Full { x, .. } => self.quadratic_form(x),
        }
    }

    pub fn apply_probe(&self, probe: &Probe) -> Result<Vec<f64>> {
        match probe {
            Probe::RankOne(p) => self.apply_rank_one(&p.tilde, &p.hat),
            Probe::Full { x, .. } => self.apply(x),
        }
    }

    /// Sparse form of the structured variants.
    fn to_csr(&self) -> Result<SparseCsr> {
        match &self.kind {
            OperatorKind::SparseCsr(a) => Ok(a.clone()),
            OperatorKind::KroneckerSum { c1, c2 } => {
                let (nh, nt) = (self.shape.n_hat(), self.shape.n_tilde());
                let mut t = Vec::with_capacity(nh * c1.nnz() + nt * c2.nnz());
                for (j, l, v) in c1.triplets() {
                    t.extend((0..nh).map(|i| (j * nh + i, l * nh + i, v)));
                }
                for j in 0..nt {
                    t.extend(c2.triplets().map(|(i, k, v)| (j * nh + i, j * nh + k, v)));
                }
                SparseCsr::from_triplets(self.rows, self.cols, t)
            }
            _ => Ok(SparseCsr::from_dense(&self.to_dense()?)),
        }
    }

    /// Materialize the operator, up to [`DENSE_LIMIT`] entries.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if self.rows.saturating_mul(self.cols) > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                what: "entries of a materialized operator",
                value: self.rows.saturating_mul(self.cols),
                limit: DENSE_LIMIT,
            });
        }
        match &self.kind {
            OperatorKind::Dense(a) => Ok(a.clone()),
            OperatorKind::SparseCsr(a) => Ok(a.to_dense()),
            OperatorKind::KroneckerSum { .. } => Ok(self.to_csr()?.to_dense()),
            _ => {
                let mut out = DenseMatrix::zeros(self.rows, self.cols);
                let mut e = vec![0.0; self.cols];
                for j in 0..self.cols {
                    e[j] = 1.0;
                    let col = self.apply_unchecked(&e)?;
                    e[j] = 0.0;
                    for (i, v) in col.into_iter().enumerate() {
                        out.set(i, j, v);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Trace when it has a closed form for this variant.
    pub fn exact_trace(&self) -> Option<f64> {
        if self.rows != self.cols {
            return None;
        }
        match &self.kind {
            OperatorKind::Dense(a) => Some(a.trace()),
            OperatorKind::SparseCsr(a) => Some(a.trace()),
            OperatorKind::KroneckerSum { c1, c2 } => {
                Some(self.shape.n_hat() as f64 * c1.trace() + self.shape.n_tilde() as f64 * c2.trace())
            }
            OperatorKind::LowRank { left, right } => Some(
                (0..left.cols())
                    .map(|r| dot(&left.column(r), &right.column(r)))
                    .sum(),
            ),
            OperatorKind::FactorizedInverse(InverseSolver::KroneckerEigen { inv, .. }) => {
                Some(inv.iter().sum())
            }
            OperatorKind::FactorizedInverse(InverseSolver::Lu(_)) => None,
            OperatorKind::Gram(a) => a.exact_frobenius_norm_sq(),
            OperatorKind::Transpose(a) => a.exact_trace(),
        }
    }

    /// `‖op‖_F²` when it has a closed form for this variant.
    pub fn exact_frobenius_norm_sq(&self) -> Option<f64> {
        match &self.kind {
            OperatorKind::Dense(a) => Some(a.frobenius_norm().powi(2)),
            OperatorKind::SparseCsr(a) => Some(a.frobenius_norm_sq()),
            OperatorKind::KroneckerSum { c1, c2 } => {
                let (nh, nt) = (self.shape.n_hat() as f64, self.shape.n_tilde() as f64);
                Some(nh * c1.frobenius_norm_sq() + nt * c2.frobenius_norm_sq() + 2.0 * c1.trace() * c2.trace())
            }
            OperatorKind::LowRank { left, right } => {
                let ll = left.transpose().matmul(left).ok()?;
                let rr = right.transpose().matmul(right).ok()?;
                Some(ll.data().iter().zip(rr.data()).map(|(a, b)| a * b).sum())
            }
            OperatorKind::FactorizedInverse(InverseSolver::KroneckerEigen { inv, .. }) => {
                Some(inv.iter().map(|v| v * v).sum())
            }
            OperatorKind::Transpose(a) => a.exact_frobenius_norm_sq(),
            _ => None,
        }
    }

    pub fn trace(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::NotSquare { what: "trace", rows: self.rows, cols: self.cols });
        }
        match self.exact_trace() {
            Some(t) => Ok(t),
            None => Ok(self.to_dense()?.trace()),
        }
    }

    pub fn frobenius_norm_sq(&self) -> Result<f64> {
        match self.exact_frobenius_norm_sq() {
            Some(f) => Ok(f),
            None => Ok(self.to_dense()?.frobenius_norm().powi(2)),
        }
    }

    /// Power-iteration estimate of `‖op‖₂` (seed 0); errors if it does not
    /// settle within the iteration budget.
    pub fn spectral_norm(&self, tol: f64) -> Result<f64> {
        spectral_norm(self, tol, 200_000, 0)?.require_converged()
    }

    pub fn stable_rank(&self, kind: StableRankKind, tol: f64) -> Result<f64> {
        let norm = self.spectral_norm(tol)?;
        if norm == 0.0 {
            return Err(Error::InvalidArgument("stable rank of the zero operator".into()));
        }
        match kind {
            StableRankKind::FrobeniusSq => Ok(self.frobenius_norm_sq()? / (norm * norm)),
            StableRankKind::TraceOverNorm => Ok(self.trace()? / norm),
        }
    }
}

impl LinearMap for LinearOperator {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        LinearOperator::apply(self, v)
    }
    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        LinearOperator::apply_transpose(self, v)
    }
}

/// `Σᵢⱼ aᵢ² bⱼ² w[j·n̂+i]`, or with `w²` when `squared`.
fn weighted_outer_sum(a: &[f64], b: &[f64], w: &[f64], squared: bool) -> f64 {
    let nh = a.len();
    let a2: Vec<f64> = a.iter().map(|v| v * v).collect();
    b.iter()
        .enumerate()
        .map(|(j, bj)| {
            let col = &w[j * nh..(j + 1) * nh];
            let s: f64 = if squared {
                a2.iter().zip(col).map(|(x, c)| x * c * c).sum()
            } else {
                a2.iter().zip(col).map(|(x, c)| x * c).sum()
            };
            bj * bj * s
        })
        .sum()
}

/// `(C₁⊗I + I⊗C₂) v`, or with both factors transposed.
fn kron_sum_apply(c1: &SparseCsr, c2: &SparseCsr, shape: ProbeShape, v: &[f64], transpose: bool) -> Vec<f64> {
    let (nh, nt) = (shape.n_hat(), shape.n_tilde());
    let mut y = vec![0.0; nh * nt];
    for j in 0..nt {
        let (xin, yout) = (&v[j * nh..(j + 1) * nh], &mut y[j * nh..(j + 1) * nh]);
        if transpose {
            c2.mul_transpose_into(xin, yout);
        } else {
            c2.mul_into(xin, yout);
        }
    }
    // X C₁ᵀ: column j gathers Σ_l C₁[j,l] X[:,l]; transposed: Σ_l C₁[l,j] X[:,l]
    for (r, l, c) in c1.triplets() {
        let (dst, src) = if transpose { (l, r) } else { (r, l) };
        for i in 0..nh {
            y[dst * nh + i] += c * v[src * nh + i];
        }
    }
    y
}

fn kronecker_eigen_solver(c1: &SparseCsr, c2: &SparseCsr) -> Result<InverseSolver> {
    let e1 = symmetric_eigen(&c1.to_dense())?;
    let e2 = symmetric_eigen(&c2.to_dense())?;
    let (nt, nh) = (e1.values.len(), e2.values.len());
    let scale = e1.values.iter().chain(&e2.values).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut inv = Vec::with_capacity(nh * nt);
    for (j, l1) in e1.values.iter().enumerate() {
        for l2 in &e2.values {
            let s = l1 + l2;
            if s.abs() <= (nh * nt) as f64 * f64::EPSILON * scale {
                return Err(Error::Singular { step: j, pivot: s });
            }
            inv.push(1.0 / s);
        }
    }
    Ok(InverseSolver::KroneckerEigen {
        q1: e1.vectors,
        q2: e2.vectors,
        inv,
    })
}

#[cfg(test)]
mod tests;
