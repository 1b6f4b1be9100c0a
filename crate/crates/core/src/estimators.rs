//! One-sample norm estimates, `Max_k`, `Est_k`, and certified error factors.

use rayon::prelude::*;

use crate::bounds::{invert_for_epsilon, invert_for_theta, BoundKind, BoundParams};
use crate::error::{Error, Result};
use crate::operators::LinearOperator;
use crate::probes::{draw_probe, Distribution, Probe, ProbeShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    OneSampleNorm,
    MaxK,
    TraceEstK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    SpectralNorm,
    FrobeniusNorm,
    Trace,
}

/// One side of a certificate: the true quantity lies within `factor` of the
/// estimate, except with probability at most `1 - confidence`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideCertificate {
    pub factor: f64,
    pub kind: BoundKind,
}

/// `value / lower.factor ≤ truth ≤ value · upper.factor`, each side holding
/// with the stated confidence. A side is `None` when no bound applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub confidence: f64,
    pub upper: Option<SideCertificate>,
    pub lower: Option<SideCertificate>,
}

impl Certificate {
    pub fn interval(&self, value: f64) -> (Option<f64>, Option<f64>) {
        (
            self.lower.as_ref().map(|s| value / s.factor),
            self.upper.as_ref().map(|s| value * s.factor),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub k: u64,
    pub distribution: Distribution,
    pub seed: u64,
    pub target: Target,
    pub shape: ProbeShape,
    pub certified: Option<Certificate>,
}

impl EstimateReport {
    /// Read a norm estimate as an estimate of `‖A‖_F` instead of `‖A‖₂`.
    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self.certified = None;
        self
    }
}

/// `‖op · x‖₂`, via the rank-one path when the probe is rank-one.
pub fn norm_sample(op: &LinearOperator, probe: &Probe) -> Result<f64> {
    op.norm_of_probe(probe)
}

fn samples<F>(k: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    (0..k).into_par_iter().map(f).collect()
}

pub fn one_sample_norm(op: &LinearOperator, dist: Distribution, seed: u64) -> Result<EstimateReport> {
    let value = norm_sample(op, &draw_probe(dist, op.shape(), seed, 0))?;
    Ok(EstimateReport {
        value,
        estimator: EstimatorKind::OneSampleNorm,
        k: 1,
        distribution: dist,
        seed,
        target: Target::SpectralNorm,
        shape: op.shape(),
        certified: None,
    })
}

/// `Max_k`: the largest of `k` norm samples on indices `0..k`.
pub fn max_estimator(op: &LinearOperator, k: u64, dist: Distribution, seed: u64) -> Result<EstimateReport> {
    let shape = op.shape();
    let vals = samples(k, |i| norm_sample(op, &draw_probe(dist, shape, seed, i)))?;
    Ok(EstimateReport {
        value: vals.into_iter().fold(0.0, f64::max),
        estimator: EstimatorKind::MaxK,
        k,
        distribution: dist,
        seed,
        target: Target::SpectralNorm,
        shape,
        certified: None,
    })
}

/// `Est_k = (1/k) Σ xᵢᵀ B xᵢ` over sample indices `0..k`. For a Gram operator
/// `AᵀA` each term is `‖A xᵢ‖₂²`.
pub fn trace_estimator(op_psd: &LinearOperator, k: u64, dist: Distribution, seed: u64) -> Result<EstimateReport> {
    if !op_psd.is_psd() {
        return Err(Error::PsdNotAsserted);
    }
    let shape = op_psd.shape();
    let vals = samples(k, |i| op_psd.quadratic_form_of_probe(&draw_probe(dist, shape, seed, i)))?;
    // summed in index order so the result does not depend on scheduling
    let sum: f64 = vals.iter().sum();
    Ok(EstimateReport {
        value: sum / k as f64,
        estimator: EstimatorKind::TraceEstK,
        k,
        distribution: dist,
        seed,
        target: Target::Trace,
        shape,
        certified: None,
    })
}

/// Per-sample failure budget that keeps `1 - (1 - p)^k ≤ delta`.
fn per_sample_union(delta: f64, k: u64) -> f64 {
    -((-delta).ln_1p() / k as f64).exp_m1()
}

fn theta_side(kind: BoundKind, params: BoundParams, delta: f64, scale: f64) -> Result<SideCertificate> {
    Ok(SideCertificate {
        factor: scale * invert_for_theta(kind, &params, delta)?,
        kind,
    })
}

/// Lower-side refusals that leave the upper side usable.
fn optional(side: Result<SideCertificate>) -> Result<Option<SideCertificate>> {
    match side {
        Ok(s) => Ok(Some(s)),
        Err(
            Error::MissingParameter { .. }
            | Error::OutOfValidityRegion { .. }
            | Error::Unreachable { .. }
            | Error::IncompatibleCertificate(_),
        ) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Attach the smallest factors the bounds guarantee at `confidence`.
///
/// The upper side must be certifiable or the call fails; the lower side is
/// left empty when its bound does not apply. `rho` is the stable rank the
/// chosen bound asks for (`‖A‖_F²/‖A‖₂²` for Frobenius norms and Gaussian
/// trace bounds, `trace B/‖B‖₂` for the rank-one trace lower bounds).
pub fn certify(report: &EstimateReport, confidence: f64, rho: Option<f64>) -> Result<EstimateReport> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let delta = 1.0 - confidence;
    let (upper, lower) = match report.target {
        Target::SpectralNorm => certify_spectral(report, delta)?,
        Target::FrobeniusNorm => certify_frobenius(report, delta, rho)?,
        Target::Trace => certify_trace(report, delta, rho)?,
    };
    let mut out = report.clone();
    out.certified = Some(Certificate { confidence, upper: Some(upper), lower });
    Ok(out)
}

type Sides = (SideCertificate, Option<SideCertificate>);

fn norm_estimator_k(report: &EstimateReport) -> Result<u64> {
    match report.estimator {
        EstimatorKind::OneSampleNorm => Ok(1),
        EstimatorKind::MaxK => Ok(report.k),
        EstimatorKind::TraceEstK => Err(Error::IncompatibleCertificate(
            "a trace estimate cannot certify a norm".into(),
        )),
    }
}

fn certify_spectral(report: &EstimateReport, delta: f64) -> Result<Sides> {
    use BoundKind::*;
    let k = norm_estimator_k(report)?;
    let (nh, nt) = (report.shape.n_hat(), report.shape.n_tilde());
    let n = report.shape.len();
    let sqrt_n = (n as f64).sqrt();
    let per_sample = per_sample_union(delta, k);
    match report.distribution {
        Distribution::Rademacher | Distribution::RankOneRademacher => Err(Error::IncompatibleCertificate(
            "Rademacher probes admit no upper bound on the spectral norm".into(),
        )),
        Distribution::Gaussian => {
            let upper = theta_side(GaussNormUpper, BoundParams::new().k(k), delta, 1.0)?;
            // ‖Ax‖² ≤ ‖A‖²‖x‖² and ‖x‖² ~ χ²_n
            let lower = optional(
                invert_for_theta(ChiSquareTail, &BoundParams::new().k(n as u64), per_sample).map(|th| {
                    SideCertificate { factor: (n as f64 * th).sqrt(), kind: ChiSquareTail }
                }),
            )?;
            Ok((upper, lower))
        }
        Distribution::RankOneGaussian => {
            let upper = if k == 1 {
                theta_side(RankOneGaussNormUpper, BoundParams::new(), delta, 1.0)?
            } else {
                theta_side(MaxEstimatorUpper, BoundParams::new().k(k), delta, 1.0)?
            };
            let lower = optional(theta_side(
                RankOneGaussNormLower,
                BoundParams::new().dims(nh, nt),
                per_sample,
                sqrt_n,
            ))?;
            Ok((upper, lower))
        }
    }
}

fn certify_frobenius(report: &EstimateReport, delta: f64, rho: Option<f64>) -> Result<Sides> {
    use BoundKind::*;
    let k = norm_estimator_k(report)?;
    if report.distribution != Distribution::RankOneGaussian {
        return Err(Error::IncompatibleCertificate(format!(
            "no Frobenius-norm bound for {} probes",
            report.distribution
        )));
    }
    let rho = rho.ok_or(Error::MissingParameter { kind: RankOneGaussFrobUpper, name: "rho" })?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::OutOfValidityRegion { kind: RankOneGaussFrobUpper, condition: "rho > 0" });
    }
    // the max fails only if every sample does
    let upper = theta_side(RankOneGaussFrobUpper, BoundParams::new(), delta.powf(1.0 / k as f64), rho.sqrt())?;
    let lower = optional(theta_side(RankOneGaussFrobLower, BoundParams::new().k(k), delta, 1.0))?;
    Ok((upper, lower))
}

fn certify_trace(report: &EstimateReport, delta: f64, rho: Option<f64>) -> Result<Sides> {
    use BoundKind::*;
    if report.estimator != EstimatorKind::TraceEstK {
        return Err(Error::IncompatibleCertificate(
            "a norm estimate cannot certify a trace".into(),
        ));
    }
    let k = report.k;
    let base = BoundParams::new().k(k).dims(report.shape.n_hat(), report.shape.n_tilde());
    let eps_side = |kind: BoundKind, params: BoundParams, lower: bool| -> Result<SideCertificate> {
        let e = invert_for_epsilon(kind, &params, delta)?;
        let factor = if lower { 1.0 + e } else { 1.0 / (1.0 - e) };
        Ok(SideCertificate { factor, kind })
    };
    let upper = eps_side(TraceUpper, base, false)?;
    let with_rho = |kind| match rho {
        Some(r) => Ok(base.rho(r)),
        None => Err(Error::MissingParameter { kind, name: "rho" }),
    };
    let lower = match report.distribution {
        Distribution::RankOneRademacher => {
            match optional(eps_side(TraceLowerRademacherBernstein, base, true))? {
                Some(s) => Some(s),
                None => optional(with_rho(TraceLowerRademacherChaos).and_then(|p| eps_side(TraceLowerRademacherChaos, p, true)))?,
            }
        }
        Distribution::RankOneGaussian => {
            optional(with_rho(TraceLowerGauss).and_then(|p| eps_side(TraceLowerGauss, p, true)))?
        }
        Distribution::Gaussian => {
            optional(with_rho(GrattonTraceLower).and_then(|p| eps_side(GrattonTraceLower, p, true)))?
        }
        Distribution::Rademacher => None,
    };
    Ok((upper, lower))
}
