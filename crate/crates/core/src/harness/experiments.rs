use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::trace_estimator;
use crate::linalg::small_svd;
use crate::operators::LinearOperator;
use crate::probes::rng::derive_seed;
use crate::probes::{draw_probe, Distribution};

use super::matrices::{generate_matrix, trace_operator, MatrixTarget, TestMatrixSpec};

/// Samples in the high-accuracy reference estimate.
pub const REFERENCE_SAMPLES: u64 = 1000;
const REFERENCE_TAG: u64 = 0x5245_4645;
const TRIALS_TAG: u64 = 0x5452_4941;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub matrix: String,
    pub distribution: Distribution,
    pub k: u64,
    /// `θ` for estimator tables, `τ` for failure curves.
    pub theta: f64,
    pub upper_fail: f64,
    pub lower_fail: f64,
    pub trials: u64,
    pub seed: u64,
}

impl ExperimentRow {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.matrix
            .cmp(&other.matrix)
            .then_with(|| self.distribution.tag().cmp(other.distribution.tag()))
            .then_with(|| self.k.cmp(&other.k))
            .then_with(|| self.theta.total_cmp(&other.theta))
    }

    /// Binomial standard error `√(p̂(1-p̂)/trials)`.
    pub fn std_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentTable {
    rows: Vec<ExperimentRow>,
}

impl ExperimentTable {
    pub fn push(&mut self, row: ExperimentRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ExperimentTable) {
        self.rows.extend(other.rows);
    }

    pub fn rows(&self) -> &[ExperimentRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sorted(&self) -> ExperimentTable {
        let mut rows = self.rows.clone();
        rows.sort_by(ExperimentRow::key_cmp);
        ExperimentTable { rows }
    }

    pub fn get(&self, matrix: &str, dist: Distribution, k: u64, theta: f64) -> Option<&ExperimentRow> {
        self.rows
            .iter()
            .find(|r| r.matrix == matrix && r.distribution == dist && r.k == k && r.theta == theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Spectral,
    Frobenius,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::Spectral => "norm2",
            NormKind::Frobenius => "normF",
        }
    }
}

/// `n` points from `lo` to `hi`, evenly spaced in `log τ`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

pub fn exact_norm(op: &LinearOperator, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::Spectral => Ok(small_svd(&op.to_dense()?)?.largest()),
        NormKind::Frobenius => Ok(op.frobenius_norm_sq()?.sqrt()),
    }
}

fn fraction(count: usize, trials: u64) -> f64 {
    count as f64 / trials as f64
}

/// Empirical frequencies of `‖A‖ > τ‖Ax‖` (upper) and `‖A‖ < ‖Ax‖/τ`
/// (lower), one probe per trial shared across the grid. Rows are labelled
/// `<matrix>/<norm>` with `k = 1` and the `τ` value in the theta column.
pub fn failure_curve(
    spec: &TestMatrixSpec,
    norm_kind: NormKind,
    dists: &[Distribution],
    taus: &[f64],
    trials: u64,
    seed: u64,
) -> Result<ExperimentTable> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if let Some(t) = taus.iter().find(|t| !(**t >= 1.0)) {
        return Err(Error::InvalidArgument(format!("tau values must be at least 1, got {t}")));
    }
    let a = generate_matrix(spec, seed)?;
    let norm = exact_norm(&a, norm_kind)?;
    let base = derive_seed(seed, TRIALS_TAG);
    let label = format!("{}/{}", spec.tag(), norm_kind.name());
    let mut table = ExperimentTable::default();
    for &dist in dists {
        let samples: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| a.norm_of_probe(&draw_probe(dist, a.shape(), base, t)))
            .collect::<Result<_>>()?;
        for &tau in taus {
            let upper = samples.iter().filter(|&&s| norm > tau * s).count();
            let lower = samples.iter().filter(|&&s| norm < s / tau).count();
            table.push(ExperimentRow {
                matrix: label.clone(),
                distribution: dist,
                k: 1,
                theta: tau,
                upper_fail: fraction(upper, trials),
                lower_fail: fraction(lower, trials),
                trials,
                seed,
            });
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Exact,
    Estimate { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValue {
    pub matrix: String,
    pub target: MatrixTarget,
    pub value: f64,
    pub provenance: Provenance,
}

/// The value estimates are compared against: the exact trace of `A` when
/// it is the target, otherwise `Est₁₀₀₀` with unstructured Gaussian probes.
pub fn reference_value(spec: &TestMatrixSpec, b: &LinearOperator, seed: u64) -> Result<ReferenceValue> {
    if !spec.target.is_trace() {
        return Err(Error::MissingReference(format!(
            "{} is not a trace target",
            spec.target.name()
        )));
    }
    let (value, provenance) = match (spec.target, b.exact_trace()) {
        (MatrixTarget::TraceOfA, Some(t)) => (t, Provenance::Exact),
        _ => {
            let s = derive_seed(seed, REFERENCE_TAG);
            let est = trace_estimator(b, REFERENCE_SAMPLES, Distribution::Gaussian, s)?;
            (est.value, Provenance::Estimate { samples: REFERENCE_SAMPLES, seed: s })
        }
    };
    Ok(ReferenceValue { matrix: spec.tag(), target: spec.target, value, provenance })
}

/// Seed of the `Est_k` computed in trial `t`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    derive_seed(derive_seed(seed, TRIALS_TAG), trial)
}

/// Over `trials` independent `Est_k`, the fraction with `Exact > θ·Est_k`
/// (upper) and with `Exact < Est_k/θ` (lower). The trace operator and
/// reference come from the spec.
pub fn estimator_table(
    spec: &TestMatrixSpec,
    dists: &[Distribution],
    ks: &[u64],
    thetas: &[f64],
    trials: u64,
    seed: u64,
) -> Result<ExperimentTable> {
    let b = trace_operator(spec, generate_matrix(spec, seed)?)?;
    let reference = reference_value(spec, &b, seed)?;
    estimator_table_with(spec, &b, &reference, dists, ks, thetas, trials, seed)
}

/// [`estimator_table`] with a prepared trace operator and reference.
#[allow(clippy::too_many_arguments)]
pub fn estimator_table_with(
    spec: &TestMatrixSpec,
    b: &LinearOperator,
    reference: &ReferenceValue,
    dists: &[Distribution],
    ks: &[u64],
    thetas: &[f64],
    trials: u64,
    seed: u64,
) -> Result<ExperimentTable> {
    if trials == 0 || ks.contains(&0) {
        return Err(Error::InvalidArgument("trials and k must be at least 1".into()));
    }
    let k_max = ks.iter().copied().max().unwrap_or(0);
    let exact = reference.value;
    let mut table = ExperimentTable::default();
    for &dist in dists {
        // every trial's estimates for all requested k, from one pass of k_max samples
        let estimates: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = trial_seed(seed, t);
                let mut sum = 0.0;
                let mut out = Vec::with_capacity(ks.len());
                let mut q = Vec::with_capacity(k_max as usize);
                for i in 0..k_max {
                    q.push(b.quadratic_form_of_probe(&draw_probe(dist, b.shape(), s, i))?);
                }
                let mut done = 0usize;
                let mut sorted: Vec<(usize, u64)> = ks.iter().copied().enumerate().collect();
                sorted.sort_by_key(|p| p.1);
                out.resize(ks.len(), 0.0);
                for (pos, k) in sorted {
                    while done < k as usize {
                        sum += q[done];
                        done += 1;
                    }
                    out[pos] = sum / k as f64;
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (ki, &k) in ks.iter().enumerate() {
            for &theta in thetas {
                let upper = estimates.iter().filter(|e| exact > theta * e[ki]).count();
                let lower = estimates.iter().filter(|e| exact < e[ki] / theta).count();
                table.push(ExperimentRow {
                    matrix: spec.tag(),
                    distribution: dist,
                    k,
                    theta,
                    upper_fail: fraction(upper, trials),
                    lower_fail: fraction(lower, trials),
                    trials,
                    seed,
                });
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::matrices::MatrixKind;
    use crate::probes::rng::normal_cdf;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 100.0, 20);
        assert_eq!((g[0], g[19], g.len()), (1.0, 100.0, 20));
        assert!((g[1] / g[0] - g[19] / g[18]).abs() < 1e-12);
    }

    #[test]
    fn rademacher_never_fails_upper_on_orthogonal() {
        // ‖Qx‖ = ‖x‖ = √n ≥ ‖Q‖₂ = 1, so the upper event never occurs
        let spec = TestMatrixSpec::synthetic(MatrixKind::A6, 4, MatrixTarget::SpectralNorm).unwrap();
        let t = failure_curve(&spec, NormKind::Spectral, &[Distribution::RankOneRademacher], &log_grid(1.0, 100.0, 5), 2000, 3)
            .unwrap();
        assert!(t.rows().iter().all(|r| r.upper_fail == 0.0));
    }

    #[test]
    fn rank_one_upper_failure_matches_quadrature() {
        // ‖A₁(x̃⊗x̂)‖ = |x̃₀ x̂₀|, so the upper event at τ is |g₁g₂| < 1/τ
        let spec = TestMatrixSpec::synthetic(MatrixKind::A1, 4, MatrixTarget::SpectralNorm).unwrap();
        let taus = [1.0, 3.0, 10.0];
        let trials = 100_000;
        let t = failure_curve(&spec, NormKind::Spectral, &[Distribution::RankOneGaussian], &taus, trials, 8).unwrap();
        for r in t.rows() {
            let c = 1.0 / r.theta;
            // P{|g₁g₂| < c} = ∫ (2Φ(c/|y|) - 1) φ(y) dy, Simpson on y ∈ (0, 10]
            let m = 20_000;
            let h = 10.0 / m as f64;
            let g = |y: f64| {
                if y == 0.0 {
                    0.0
                } else {
                    2.0 * (2.0 * normal_cdf(c / y) - 1.0) * (-y * y / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
                }
            };
            let p: f64 = (0..=m)
                .map(|i| {
                    let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * g(i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((r.upper_fail - p).abs() < 4.0 * se, "tau {}: {} vs {p}", r.theta, r.upper_fail);
        }
    }

    #[test]
    fn table_estimates_match_trace_estimator() {
        let spec = TestMatrixSpec::new(MatrixKind::Ones, 3, 4, MatrixTarget::TraceOfA).unwrap();
        let b = trace_operator(&spec, generate_matrix(&spec, 0).unwrap()).unwrap();
        let reference = reference_value(&spec, &b, 0).unwrap();
        assert_eq!((reference.value, reference.provenance), (12.0, Provenance::Exact));
        // a reference just below one trial's estimate flips exactly that trial
        let est = trace_estimator(&b, 3, Distribution::RankOneGaussian, trial_seed(5, 0)).unwrap().value;
        let r = ReferenceValue { value: est * (1.0 - 1e-15), ..reference.clone() };
        let t = estimator_table_with(&spec, &b, &r, &[Distribution::RankOneGaussian], &[3], &[1.0], 1, 5).unwrap();
        assert_eq!(t.rows()[0].lower_fail, 1.0);
        let r = ReferenceValue { value: est, ..reference };
        let t = estimator_table_with(&spec, &b, &r, &[Distribution::RankOneGaussian], &[3], &[1.0], 1, 5).unwrap();
        assert_eq!((t.rows()[0].lower_fail, t.rows()[0].upper_fail), (0.0, 0.0));
    }

    #[test]
    fn tables_are_deterministic_and_vanish_for_large_theta() {
        let spec = TestMatrixSpec::new(MatrixKind::RankOneVecIdentity, 6, 6, MatrixTarget::TraceOfA).unwrap();
        let dists = Distribution::ALL;
        let a = estimator_table(&spec, &dists, &[2, 5], &[2.0, 1e12], 500, 9).unwrap();
        let b = estimator_table(&spec, &dists, &[5, 2], &[1e12, 2.0], 500, 9).unwrap();
        assert_eq!(a.sorted(), b.sorted());
        let far: Vec<_> = a.rows().iter().filter(|r| r.theta == 1e12).collect();
        assert!(far.iter().all(|r| r.lower_fail == 0.0));
        // sign probes can hit vᵀx = 0 exactly, which no θ repairs
        assert!(far.iter().filter(|r| r.distribution.is_gaussian()).all(|r| r.upper_fail == 0.0));
    }

    #[test]
    fn ones_with_sign_probes_gives_integer_multiples() {
        let spec = TestMatrixSpec::new(MatrixKind::Ones, 4, 4, MatrixTarget::TraceOfA).unwrap();
        let b = trace_operator(&spec, generate_matrix(&spec, 0).unwrap()).unwrap();
        for dist in [Distribution::Rademacher, Distribution::RankOneRademacher] {
            for seed in 0..20 {
                let v = trace_estimator(&b, 3, dist, seed).unwrap().value * 3.0;
                assert_eq!(v, v.round());
            }
        }
    }

    #[test]
    fn non_trace_targets_have_no_reference() {
        let spec = TestMatrixSpec::synthetic(MatrixKind::A6, 3, MatrixTarget::SpectralNorm).unwrap();
        let a = generate_matrix(&spec, 0).unwrap();
        assert!(matches!(reference_value(&spec, &a, 0), Err(Error::MissingReference(_))));
    }
}
