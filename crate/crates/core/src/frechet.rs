//! Fréchet derivatives of matrix functions: dense block evaluation, a Krylov
//! method for rank-one directions, and the two ways of sizing `‖Df{A}‖`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, expm, norm2, DenseMatrix};
use crate::operators::LinearOperator;
use crate::probes::rng::{streams, CounterRng};
use crate::probes::{draw_rank_one, Distribution, ProbeShape};

/// Largest `n` for which the `2n × 2n` block evaluation is attempted.
pub const FRECHET_DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixFunction {
    #[default]
    Exp,
}

impl MatrixFunction {
    pub fn evaluate(self, m: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            MatrixFunction::Exp => expm(m),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatrixFunction::Exp => "exp",
        }
    }
}

fn check_dense_size(n: usize) -> Result<()> {
    if n > FRECHET_DENSE_LIMIT {
        return Err(Error::SizeGuard {
            what: "dimension for dense Frechet evaluation",
            value: n,
            limit: FRECHET_DENSE_LIMIT,
        });
    }
    Ok(())
}

/// `Df{A}(X)`, read off the top-right block of `f([[A, X], [0, A]])`.
pub fn frechet_apply_dense(f: MatrixFunction, a: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::NotSquare { what: "frechet_apply_dense", rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    if x.rows() != n || x.cols() != n {
        return Err(Error::mismatch("frechet_apply_dense direction", n, x.rows().max(x.cols())));
    }
    check_dense_size(n)?;
    let mut big = DenseMatrix::zeros(2 * n, 2 * n);
    big.set_block(0, 0, a);
    big.set_block(0, n, x);
    big.set_block(n, n, a);
    Ok(f.evaluate(&big)?.block(0, n, n, n))
}

/// Arnoldi process for `K_ℓ(A, c)` with one reorthogonalization pass.
#[derive(Debug, Clone)]
pub struct KrylovState {
    basis: Vec<Vec<f64>>,
    /// Columns of the `(ℓ+1) × ℓ` Hessenberg matrix.
    hess: Vec<Vec<f64>>,
    next: Option<Vec<f64>>,
    start_norm: f64,
    scale: f64,
    transpose: bool,
    broken_down: bool,
}

const BREAKDOWN_TOL: f64 = 1e-12;

impl KrylovState {
    pub fn new(start: &[f64], transpose: bool) -> Result<Self> {
        let s = norm2(start);
        if s == 0.0 || !s.is_finite() {
            return Err(Error::InvalidArgument("Krylov start vector must be nonzero and finite".into()));
        }
        Ok(Self {
            basis: Vec::new(),
            hess: Vec::new(),
            next: Some(start.iter().map(|v| v / s).collect()),
            start_norm: s,
            scale: 0.0,
            transpose,
            broken_down: false,
        })
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn broken_down(&self) -> bool {
        self.broken_down
    }

    /// Add one basis vector and complete the matching Hessenberg column.
    /// Does nothing once the subspace is invariant.
    pub fn step(&mut self, op: &LinearOperator) -> Result<()> {
        let Some(u) = self.next.take() else {
            return Ok(());
        };
        let mut w = if self.transpose { op.apply_transpose(&u)? } else { op.apply(&u)? };
        self.basis.push(u);
        self.scale = self.scale.max(norm2(&w));
        let mut h = vec![0.0; self.basis.len() + 1];
        for _pass in 0..2 {
            let coeffs: Vec<f64> = self.basis.iter().map(|b| dot(b, &w)).collect();
            for (b, c) in self.basis.iter().zip(&coeffs) {
                axpy(-c, b, &mut w);
            }
            for (hi, c) in h.iter_mut().zip(coeffs) {
                *hi += c;
            }
        }
        let beta = norm2(&w);
        *h.last_mut().expect("nonempty") = beta;
        self.hess.push(h);
        if beta <= BREAKDOWN_TOL * self.scale || beta == 0.0 || self.basis.len() == w.len() {
            self.broken_down = true;
        } else {
            w.iter_mut().for_each(|v| *v /= beta);
            self.next = Some(w);
        }
        Ok(())
    }

    /// `G_ℓ = U_ℓᵀ A U_ℓ` (or with `Aᵀ`).
    pub fn projected(&self) -> DenseMatrix {
        let l = self.dimension();
        DenseMatrix::from_fn(l, l, |i, j| if i < self.hess[j].len() { self.hess[j][i] } else { 0.0 })
    }

    /// `U_ℓᵀ c`, which is `‖c‖ e₁`.
    pub fn projected_start(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dimension()];
        if let Some(c0) = c.first_mut() {
            *c0 = self.start_norm;
        }
        c
    }

    /// `U_ℓ` as an `n × ℓ` matrix.
    pub fn basis(&self) -> DenseMatrix {
        let n = self.basis.first().map_or(0, Vec::len);
        DenseMatrix::from_fn(n, self.dimension(), |i, j| self.basis[j][i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArnoldiOptions {
    pub tol: f64,
    pub max_dim: usize,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_dim: 200 }
    }
}

/// `Df{A}(cdᵀ) ≈ U X Vᵀ`.
#[derive(Debug, Clone)]
pub struct RankOneFrechet {
    pub u: DenseMatrix,
    pub x: DenseMatrix,
    pub v: DenseMatrix,
    pub converged: bool,
    /// Largest Krylov dimension reached on either side.
    pub dimension: usize,
}

impl RankOneFrechet {
    /// `‖U X Vᵀ‖_F`, equal to `‖X‖_F` since both bases are orthonormal.
    pub fn frobenius_norm(&self) -> f64 {
        self.x.frobenius_norm()
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        self.u.matmul(&self.x)?.matmul(&self.v.transpose())
    }
}

/// Difference of `X_ℓ` and `X_{ℓ-1}` after padding the latter with zeros.
fn padded_change(new: &DenseMatrix, old: &DenseMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..new.rows() {
        for j in 0..new.cols() {
            let o = if i < old.rows() && j < old.cols() { old.get(i, j) } else { 0.0 };
            s += (new.get(i, j) - o).powi(2);
        }
    }
    s.sqrt()
}

/// Krylov approximation of `Df{A}(cdᵀ)`, grown one dimension at a time on
/// `K_ℓ(A, c)` and `K_ℓ(Aᵀ, d)` until the projected derivative settles.
///
/// The stopping test measures the Frobenius change of the `X` block between
/// steps. Once both subspaces are invariant the result is exact up to the
/// dense evaluation, so the run ends as converged.
pub fn arnoldi_frechet_rank_one(
    f: MatrixFunction,
    op: &LinearOperator,
    c: &[f64],
    d: &[f64],
    opts: ArnoldiOptions,
) -> Result<RankOneFrechet> {
    if op.nrows() != op.ncols() {
        return Err(Error::NotSquare { what: "arnoldi_frechet_rank_one", rows: op.nrows(), cols: op.ncols() });
    }
    if !(opts.tol > 0.0) || opts.max_dim == 0 {
        return Err(Error::InvalidArgument("tolerance and max_dim must be positive".into()));
    }
    let n = op.nrows();
    if c.len() != n || d.len() != n {
        return Err(Error::mismatch("arnoldi_frechet_rank_one", n, if c.len() != n { c.len() } else { d.len() }));
    }
    // a zero factor gives Df{A}(0) = 0
    if norm2(c) == 0.0 || norm2(d) == 0.0 {
        return Ok(RankOneFrechet {
            u: DenseMatrix::zeros(n, 0),
            x: DenseMatrix::zeros(0, 0),
            v: DenseMatrix::zeros(n, 0),
            converged: true,
            dimension: 0,
        });
    }
    let mut left = KrylovState::new(c, false)?;
    let mut right = KrylovState::new(d, true)?;
    let mut prev: Option<DenseMatrix> = None;
    loop {
        left.step(op)?;
        right.step(op)?;
        let (lu, lv) = (left.dimension(), right.dimension());
        let mut big = DenseMatrix::zeros(lu + lv, lu + lv);
        big.set_block(0, 0, &left.projected());
        big.set_block(0, lu, &DenseMatrix::outer(&left.projected_start(), &right.projected_start()));
        big.set_block(lu, lu, &right.projected().transpose());
        let x = f.evaluate(&big)?.block(0, lu, lu, lv);

        let exact = left.broken_down() && right.broken_down();
        let settled = prev.as_ref().is_some_and(|p| padded_change(&x, p) < opts.tol);
        let exhausted = lu.max(lv) >= opts.max_dim;
        if exact || settled || exhausted {
            return Ok(RankOneFrechet {
                u: left.basis(),
                v: right.basis(),
                x,
                converged: exact || settled,
                dimension: lu.max(lv),
            });
        }
        prev = Some(x);
    }
}

/// Power iteration on `K_Aᵀ K_A`, alternating `Df{A}` and `Df{Aᵀ}` from a
/// seeded Gaussian direction. Returns `‖Df{A}(X)‖_F` for the final unit `X`.
pub fn frechet_norm_power_method(f: MatrixFunction, op: &LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    if iters == 0 {
        return Err(Error::InvalidArgument("power method needs at least one iteration".into()));
    }
    if op.nrows() != op.ncols() {
        return Err(Error::NotSquare { what: "frechet_norm_power_method", rows: op.nrows(), cols: op.ncols() });
    }
    check_dense_size(op.nrows())?;
    let a = op.to_dense()?;
    let at = a.transpose();
    let n = a.rows();
    let mut rng = CounterRng::new(seed, 0, streams::POWER_START);
    let mut x = DenseMatrix::from_fn(n, n, |_, _| rng.next_gaussian());
    x = x.scaled(1.0 / x.frobenius_norm());
    let mut estimate = 0.0;
    for _ in 0..iters {
        let y = frechet_apply_dense(f, &a, &x)?;
        estimate = y.frobenius_norm();
        let z = frechet_apply_dense(f, &at, &y)?;
        let zn = z.frobenius_norm();
        if zn == 0.0 {
            return Ok(0.0);
        }
        x = z.scaled(1.0 / zn);
    }
    // one more forward application evaluates the last normalized iterate
    let last = frechet_apply_dense(f, &a, &x)?.frobenius_norm();
    Ok(last.max(estimate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetMaxReport {
    /// `θ · Max_k`.
    pub upper_bound: f64,
    pub max_norm: f64,
    pub max_dimension: usize,
    pub all_converged: bool,
}

/// `θ · max_j ‖Df{A}(x̂_j x̃_jᵀ)‖_F` over `k` rank-one Gaussian directions,
/// each evaluated by [`arnoldi_frechet_rank_one`] on `(x̂_j, x̃_j)`.
pub fn frechet_norm_max_estimator(
    f: MatrixFunction,
    op: &LinearOperator,
    k: u64,
    theta: f64,
    seed: u64,
    opts: ArnoldiOptions,
) -> Result<FrechetMaxReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(theta > 1.0) {
        return Err(Error::InvalidArgument(format!("theta must exceed 1, got {theta}")));
    }
    let shape = ProbeShape::square(op.nrows());
    let runs: Vec<RankOneFrechet> = (0..k)
        .into_par_iter()
        .map(|j| {
            let p = draw_rank_one(Distribution::RankOneGaussian, shape, seed, j);
            arnoldi_frechet_rank_one(f, op, &p.hat, &p.tilde, opts)
        })
        .collect::<Result<_>>()?;
    let max_norm = runs.iter().map(RankOneFrechet::frobenius_norm).fold(0.0, f64::max);
    Ok(FrechetMaxReport {
        upper_bound: theta * max_norm,
        max_norm,
        max_dimension: runs.iter().map(|r| r.dimension).max().unwrap_or(0),
        all_converged: runs.iter().all(|r| r.converged),
    })
}
