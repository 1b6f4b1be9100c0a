//! Closed-form failure-probability bounds for randomized norm and trace
//! estimates, together with a few analytic quantities of Gaussian chaos.
//!
//! Every bound is evaluated in log space and clamped to `[0, 1]` at the end,
//! so sample counts in the millions neither underflow nor overflow. Parameters
//! outside a bound's validity region are errors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{small_svd, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    /// One unstructured Gaussian probe: `‖A‖₂ ≤ θ‖Ax‖₂` fails w.p. `≤ √(2/π)/θ`.
    /// With `k` it is the max-estimator version, `(√(2/π)/θ)^k`.
    GaussNormUpper,
    GrattonTraceUpper,
    GrattonTraceLower,
    RoostaTraceBound,
    CortinovisJoint,
    /// `‖A‖₂ ≤ θ‖A(x̃⊗x̂)‖₂` for rank-one Gaussian probes.
    RankOneGaussNormUpper,
    /// `‖A‖₂ ≥ n^{-1/2} θ^{-1} ‖A(x̃⊗x̂)‖₂`.
    RankOneGaussNormLower,
    /// `‖A‖_F ≤ θ√ρ ‖A(x̃⊗x̂)‖₂`.
    RankOneGaussFrobUpper,
    /// `‖A‖_F ≥ √ρ n^{-1/2} θ^{-1} ‖A(x̃⊗x̂)‖₂`.
    RankOneGaussFrobLowerStableRank,
    /// `‖A‖_F ≥ θ^{-1} ‖A(x̃⊗x̂)‖₂`; with `k`, the same for `Max_k`.
    RankOneGaussFrobLower,
    /// `‖A‖₂ ≤ θ Max_k`.
    MaxEstimatorUpper,
    /// `trace B ≤ Est_k / (1-ε)`.
    TraceUpper,
    /// `trace B ≥ Est_k / (1+ε)` for rank-one Rademacher probes.
    TraceLowerRademacherBernstein,
    TraceLowerGauss,
    TraceLowerRademacherChaos,
    /// `P{χ²_k > kθ}`.
    ChiSquareTail,
    /// Bound on `E exp(tZ)` for unit-Frobenius decoupled Gaussian chaos.
    ChaosMgfBound,
}

impl BoundKind {
    pub const ALL: [BoundKind; 17] = [
        BoundKind::GaussNormUpper,
        BoundKind::GrattonTraceUpper,
        BoundKind::GrattonTraceLower,
        BoundKind::RoostaTraceBound,
        BoundKind::CortinovisJoint,
        BoundKind::RankOneGaussNormUpper,
        BoundKind::RankOneGaussNormLower,
        BoundKind::RankOneGaussFrobUpper,
        BoundKind::RankOneGaussFrobLowerStableRank,
        BoundKind::RankOneGaussFrobLower,
        BoundKind::MaxEstimatorUpper,
        BoundKind::TraceUpper,
        BoundKind::TraceLowerRademacherBernstein,
        BoundKind::TraceLowerGauss,
        BoundKind::TraceLowerRademacherChaos,
        BoundKind::ChiSquareTail,
        BoundKind::ChaosMgfBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::GaussNormUpper => "gauss-norm-upper",
            BoundKind::GrattonTraceUpper => "gratton-trace-upper",
            BoundKind::GrattonTraceLower => "gratton-trace-lower",
            BoundKind::RoostaTraceBound => "roosta-trace",
            BoundKind::CortinovisJoint => "cortinovis-joint",
            BoundKind::RankOneGaussNormUpper => "rank1-gauss-norm-upper",
            BoundKind::RankOneGaussNormLower => "rank1-gauss-norm-lower",
            BoundKind::RankOneGaussFrobUpper => "rank1-gauss-frob-upper",
            BoundKind::RankOneGaussFrobLowerStableRank => "rank1-gauss-frob-lower-stable-rank",
            BoundKind::RankOneGaussFrobLower => "rank1-gauss-frob-lower",
            BoundKind::MaxEstimatorUpper => "max-estimator-upper",
            BoundKind::TraceUpper => "trace-upper",
            BoundKind::TraceLowerRademacherBernstein => "trace-lower-rademacher-bernstein",
            BoundKind::TraceLowerGauss => "trace-lower-gauss",
            BoundKind::TraceLowerRademacherChaos => "trace-lower-rademacher-chaos",
            BoundKind::ChiSquareTail => "chi-square-tail",
            BoundKind::ChaosMgfBound => "chaos-mgf",
        }
    }

    /// Bounds whose only free parameter of interest is a factor `θ`.
    pub fn is_theta_kind(self) -> bool {
        matches!(
            self,
            BoundKind::GaussNormUpper
                | BoundKind::RankOneGaussNormUpper
                | BoundKind::RankOneGaussNormLower
                | BoundKind::RankOneGaussFrobUpper
                | BoundKind::RankOneGaussFrobLowerStableRank
                | BoundKind::RankOneGaussFrobLower
                | BoundKind::MaxEstimatorUpper
                | BoundKind::ChiSquareTail
        )
    }

    /// Bounds parameterized by a relative accuracy `ε`.
    pub fn is_epsilon_kind(self) -> bool {
        matches!(
            self,
            BoundKind::GrattonTraceUpper
                | BoundKind::GrattonTraceLower
                | BoundKind::RoostaTraceBound
                | BoundKind::CortinovisJoint
                | BoundKind::TraceUpper
                | BoundKind::TraceLowerRademacherBernstein
                | BoundKind::TraceLowerGauss
                | BoundKind::TraceLowerRademacherChaos
        )
    }

    /// Open interval of admissible `θ`, or of `ε` for the trace kinds. Further
    /// conditions that couple parameters are checked on evaluation.
    pub fn region(self) -> (f64, f64) {
        match self {
            BoundKind::RankOneGaussFrobLower => (2.0, f64::INFINITY),
            BoundKind::RankOneGaussNormLower | BoundKind::RankOneGaussFrobLowerStableRank => {
                (1.0, f64::INFINITY)
            }
            k if k.is_theta_kind() => (1.0, f64::INFINITY),
            BoundKind::GrattonTraceUpper | BoundKind::RoostaTraceBound | BoundKind::TraceUpper => {
                (0.0, 1.0)
            }
            BoundKind::TraceLowerGauss => (0.0, 25.0 / 16.0),
            BoundKind::TraceLowerRademacherChaos => (0.0, 13.0 / 4.0),
            BoundKind::ChaosMgfBound => (-1.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bound kind `{s}`")))
    }
}

/// Parameters of a bound; each kind reads the subset it needs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundParams {
    pub theta: Option<f64>,
    pub eps: Option<f64>,
    pub k: Option<u64>,
    pub n: Option<usize>,
    pub n_hat: Option<usize>,
    pub n_tilde: Option<usize>,
    pub rho: Option<f64>,
    pub t: Option<f64>,
}

impl BoundParams {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn theta(mut self, v: f64) -> Self {
        self.theta = Some(v);
        self
    }
    pub fn eps(mut self, v: f64) -> Self {
        self.eps = Some(v);
        self
    }
    pub fn k(mut self, v: u64) -> Self {
        self.k = Some(v);
        self
    }
    pub fn n(mut self, v: usize) -> Self {
        self.n = Some(v);
        self
    }
    /// Sets both factor dimensions and `n = n̂·ñ`.
    pub fn dims(mut self, n_hat: usize, n_tilde: usize) -> Self {
        self.n_hat = Some(n_hat);
        self.n_tilde = Some(n_tilde);
        self.n = Some(n_hat * n_tilde);
        self
    }
    pub fn rho(mut self, v: f64) -> Self {
        self.rho = Some(v);
        self
    }
    pub fn t(mut self, v: f64) -> Self {
        self.t = Some(v);
        self
    }
}

fn need<T>(v: Option<T>, kind: BoundKind, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingParameter { kind, name })
}

fn check(ok: bool, kind: BoundKind, condition: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfValidityRegion { kind, condition })
    }
}

fn need_k(p: &BoundParams, kind: BoundKind) -> Result<f64> {
    let k = need(p.k, kind, "k")?;
    check(k >= 1, kind, "k >= 1")?;
    Ok(k as f64)
}

fn need_rho(p: &BoundParams, kind: BoundKind) -> Result<f64> {
    let rho = need(p.rho, kind, "rho")?;
    check(rho.is_finite() && rho > 0.0, kind, "rho > 0")?;
    Ok(rho)
}

fn need_theta(p: &BoundParams, kind: BoundKind) -> Result<f64> {
    let th = need(p.theta, kind, "theta")?;
    check(!th.is_nan(), kind, "theta is a number")?;
    Ok(th)
}

fn need_eps(p: &BoundParams, kind: BoundKind) -> Result<f64> {
    let e = need(p.eps, kind, "eps")?;
    check(!e.is_nan(), kind, "eps is a number")?;
    Ok(e)
}

/// `(smaller, larger)` of the two factor dimensions.
fn factor_dims(p: &BoundParams, kind: BoundKind) -> Result<(f64, f64)> {
    let a = need(p.n_hat, kind, "n_hat")?;
    let b = need(p.n_tilde, kind, "n_tilde")?;
    check(a >= 1 && b >= 1, kind, "n_hat >= 1 and n_tilde >= 1")?;
    Ok((a.min(b) as f64, a.max(b) as f64))
}

/// `ln P{failure}` before clamping.
fn log_failure(kind: BoundKind, p: &BoundParams) -> Result<f64> {
    use BoundKind::*;
    let two_over_pi = 2.0 / std::f64::consts::PI;
    match kind {
        GaussNormUpper => {
            let th = need_theta(p, kind)?;
            check(th > 1.0, kind, "theta > 1")?;
            let k = p.k.unwrap_or(1).max(1) as f64;
            Ok(k * (0.5 * two_over_pi.ln() - th.ln()))
        }
        RankOneGaussNormUpper | RankOneGaussFrobUpper | MaxEstimatorUpper => {
            let th = need_theta(p, kind)?;
            check(th > 1.0, kind, "theta > 1")?;
            let k = if kind == MaxEstimatorUpper {
                need_k(p, kind)?
            } else {
                1.0
            };
            Ok(k * (two_over_pi * (2.0 + (2.0 * th).ln_1p()) / th).ln())
        }
        RankOneGaussNormLower | RankOneGaussFrobLowerStableRank => {
            let th = need_theta(p, kind)?;
            check(th >= 1.0, kind, "theta >= 1")?;
            let (small, _) = factor_dims(p, kind)?;
            Ok(std::f64::consts::LN_2 - small * (th - th.ln() - 1.0) / 2.0)
        }
        RankOneGaussFrobLower => {
            let th = need_theta(p, kind)?;
            check(th > 2.0, kind, "theta > 2")?;
            let log_p = 0.5 * (2.0 * th).ln() - th + 2.0;
            let k = p.k.unwrap_or(1).max(1) as f64;
            if k == 1.0 {
                Ok(log_p)
            } else {
                // 1 - (1 - p)^k
                let pp = log_p.exp().min(1.0);
                Ok((-(k * (-pp).ln_1p()).exp_m1()).ln())
            }
        }
        ChiSquareTail => {
            let th = need_theta(p, kind)?;
            check(th > 1.0, kind, "theta > 1")?;
            let k = need_k(p, kind)?;
            Ok(k / 2.0 * (th.ln() + 1.0 - th))
        }
        GrattonTraceUpper => {
            let e = need_eps(p, kind)?;
            check(e > 0.0 && e < 1.0, kind, "0 < eps < 1")?;
            Ok(-need_k(p, kind)? * need_rho(p, kind)? * e * e / 4.0)
        }
        GrattonTraceLower => {
            let e = need_eps(p, kind)?;
            check(e > 0.0, kind, "eps > 0")?;
            Ok(-need_k(p, kind)? * need_rho(p, kind)? * e * e / 2.0)
        }
        RoostaTraceBound => {
            let e = need_eps(p, kind)?;
            check(e > 0.0 && e < 1.0, kind, "0 < eps < 1")?;
            Ok(-need_k(p, kind)? * (e * e / 4.0 - e * e * e / 6.0))
        }
        CortinovisJoint => {
            let e = need_eps(p, kind)?;
            check(e > 0.0, kind, "eps > 0")?;
            let (k, rho) = (need_k(p, kind)?, need_rho(p, kind)?);
            Ok(std::f64::consts::LN_2 - k * rho * e * e / (1.0 + e) / 8.0)
        }
        TraceUpper => {
            let e = need_eps(p, kind)?;
            check(e > 0.0 && e < 1.0, kind, "0 < eps < 1")?;
            Ok(-need_k(p, kind)? * e * e / 18.0)
        }
        TraceLowerRademacherBernstein => {
            let e = need_eps(p, kind)?;
            check(e > 0.0, kind, "eps > 0")?;
            let n = need(p.n, kind, "n")?;
            check(n >= 2 && (n - 1) as f64 >= 48.0 / e, kind, "n - 1 >= 48 / eps")?;
            Ok(-need_k(p, kind)? * e / (n - 1) as f64)
        }
        TraceLowerGauss => {
            let e = need_eps(p, kind)?;
            check(e > 0.0 && e < 25.0 / 16.0, kind, "0 < eps < 25/16")?;
            let (k, rho) = (need_k(p, kind)?, need_rho(p, kind)?);
            let (_, n_hat) = factor_dims(p, kind)?;
            let a = -k * rho * e * e / (50.0 * n_hat);
            let b = k.ln() - n_hat / 2.0 * 5f64.ln();
            // ln(e^a + e^b)
            let m = a.max(b);
            Ok(m + ((a - m).exp() + (b - m).exp()).ln())
        }
        TraceLowerRademacherChaos => {
            let e = need_eps(p, kind)?;
            check(e > 0.0 && e < 13.0 / 4.0, kind, "0 < eps < 13/4")?;
            let (k, rho) = (need_k(p, kind)?, need_rho(p, kind)?);
            let (_, n_hat) = factor_dims(p, kind)?;
            Ok(-k * rho * e * e / (52.0 * n_hat))
        }
        ChaosMgfBound => Err(Error::NotAProbability { kind }),
    }
}

/// The bound's failure probability, clamped to `[0, 1]`.
pub fn failure_probability(kind: BoundKind, params: &BoundParams) -> Result<f64> {
    let lp = log_failure(kind, params)?;
    Ok(if lp >= 0.0 { 1.0 } else { lp.exp() })
}

/// Raw value of a bound expression. For probability kinds this is the
/// unclamped failure probability; for [`BoundKind::ChaosMgfBound`] it is
/// `1/√(1-t²)`.
pub fn bound_value(kind: BoundKind, params: &BoundParams) -> Result<f64> {
    if kind == BoundKind::ChaosMgfBound {
        let t = need(params.t, kind, "t")?;
        return chaos_mgf_bound(t);
    }
    Ok(log_failure(kind, params)?.exp())
}

const BISECTION_TOL: f64 = 1e-9;

fn check_target(target: f64) -> Result<()> {
    if target > 0.0 && target < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "target failure probability must lie in (0, 1), got {target}"
        )))
    }
}

/// Smallest `x` in `(lo, hi)` with `fail(x) <= target`, for `fail`
/// nonincreasing. Returns `hi`-side bracket points only, so the result always
/// satisfies the target.
fn bisect(
    kind: BoundKind,
    target: f64,
    lo: f64,
    hi: f64,
    fail: impl Fn(f64) -> Result<Option<f64>>,
) -> Result<f64> {
    let unreachable = || Error::Unreachable { kind, target };
    // first admissible point just inside the lower boundary
    let start = if lo == 0.0 { f64::MIN_POSITIVE } else { lo * (1.0 + 1e-12) };
    if let Some(f) = fail(start)? {
        if f <= target {
            return Ok(start);
        }
    }
    let mut a = start;
    let mut b;
    if hi.is_finite() {
        b = hi * (1.0 - 1e-12);
        match fail(b)? {
            Some(f) if f <= target => {}
            _ => return Err(unreachable()),
        }
    } else {
        b = (2.0 * lo).max(lo + 1.0);
        loop {
            match fail(b)? {
                Some(f) if f <= target => break,
                _ => {
                    a = b;
                    b *= 2.0;
                    if b > 1e300 {
                        return Err(unreachable());
                    }
                }
            }
        }
    }
    for _ in 0..400 {
        if b - a <= BISECTION_TOL {
            break;
        }
        let m = 0.5 * (a + b);
        match fail(m)? {
            Some(f) if f <= target => b = m,
            _ => a = m,
        }
    }
    Ok(b)
}

/// Wrap an evaluation so points violating a coupled precondition count as
/// "target not met" rather than aborting the search.
fn soft(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::OutOfValidityRegion { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Smallest `θ` with `failure_probability ≤ target`, to absolute 1e-9.
pub fn invert_for_theta(kind: BoundKind, params: &BoundParams, target: f64) -> Result<f64> {
    check_target(target)?;
    if !kind.is_theta_kind() {
        return Err(Error::InvalidArgument(format!(
            "{kind} is not parameterized by theta"
        )));
    }
    let (lo, hi) = kind.region();
    bisect(kind, target, lo, hi, |th| {
        soft(failure_probability(kind, &params.theta(th)))
    })
}

/// Smallest `ε` with `failure_probability ≤ target`, to absolute 1e-9.
pub fn invert_for_epsilon(kind: BoundKind, params: &BoundParams, target: f64) -> Result<f64> {
    check_target(target)?;
    if !kind.is_epsilon_kind() {
        return Err(Error::InvalidArgument(format!(
            "{kind} is not parameterized by eps"
        )));
    }
    let (lo, hi) = kind.region();
    // Roosta's exponent stops increasing at eps = 1, which is the region edge
    bisect(kind, target, lo, hi, |e| {
        soft(failure_probability(kind, &params.eps(e)))
    })
}

/// `(E Z², E Z⁴)` for `Z = x̂ᵀ Q x̃` with independent standard Gaussian
/// vectors: `‖Q‖_F²` and `3(2‖Q‖₍₄₎⁴ + ‖Q‖_F⁴)`.
pub fn chaos_moments(q: &DenseMatrix) -> Result<(f64, f64)> {
    let s = small_svd(q)?;
    let f2 = s.frobenius_sq();
    let s4: f64 = s.values().iter().map(|v| v.powi(4)).sum();
    Ok((f2, 3.0 * (2.0 * s4 + f2 * f2)))
}

pub const CHAOS_MOMENT_MAX_ORDER: u32 = 20;

/// Upper bound on `E Z^k`: `((k-1)!!)² ‖Q‖_F^k` for even `k`, and `0` for odd
/// `k` where the moment vanishes by symmetry.
pub fn chaos_moment_bound(frobenius_norm: f64, k: u32) -> Result<f64> {
    if k > CHAOS_MOMENT_MAX_ORDER {
        return Err(Error::SizeGuard {
            what: "chaos moment order",
            value: k as usize,
            limit: CHAOS_MOMENT_MAX_ORDER as usize,
        });
    }
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let dfact: f64 = (1..k).step_by(2).map(|j| j as f64).product();
    Ok(dfact * dfact * frobenius_norm.powi(k as i32))
}

/// `1/√(1-t²)` for `|t| < 1`.
pub fn chaos_mgf_bound(t: f64) -> Result<f64> {
    if t.is_nan() || t.abs() >= 1.0 {
        return Err(Error::OutOfValidityRegion {
            kind: BoundKind::ChaosMgfBound,
            condition: "|t| < 1",
        });
    }
    Ok(1.0 / (1.0 - t * t).sqrt())
}
