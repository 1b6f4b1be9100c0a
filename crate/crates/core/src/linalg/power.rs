//! Largest singular value by power iteration on `AᵀA`.

use super::{norm2, scale, DenseMatrix};
use crate::error::{Error, Result};
use crate::probes::rng::{streams, CounterRng};

/// Anything that can multiply by itself and its transpose.
pub trait LinearMap {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>>;
}

impl LinearMap for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.mat_vec(v)
    }
    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.mat_vec_transpose(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerReport {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl PowerReport {
    /// The estimate, or `NotConverged` carrying it.
    pub fn require_converged(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                estimate: self.value,
            })
        }
    }
}

/// Estimate `‖op‖₂`, stopping once the relative change between consecutive
/// estimates drops below `tol`.
pub fn spectral_norm<M: LinearMap + ?Sized>(
    op: &M,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<PowerReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let n = op.ncols();
    let mut rng = CounterRng::new(seed, 0, streams::POWER_START);
    let mut v = vec![0.0; n];
    rng.fill_gaussian(&mut v);
    let nv = norm2(&v);
    if n == 0 || nv == 0.0 {
        return Ok(PowerReport { value: 0.0, iterations: 0, converged: true, seed });
    }
    scale(&mut v, 1.0 / nv);

    let mut sigma = 0.0;
    for it in 1..=max_iters.max(1) {
        let av = op.apply(&v)?;
        let next = norm2(&av);
        if next == 0.0 {
            return Ok(PowerReport { value: 0.0, iterations: it, converged: true, seed });
        }
        let done = it > 1 && (next - sigma).abs() <= tol * next;
        sigma = next;
        if done {
            return Ok(PowerReport { value: sigma, iterations: it, converged: true, seed });
        }
        v = op.apply_transpose(&av)?;
        let nw = norm2(&v);
        if nw == 0.0 {
            return Ok(PowerReport { value: sigma, iterations: it, converged: true, seed });
        }
        scale(&mut v, 1.0 / nw);
    }
    Ok(PowerReport {
        value: sigma,
        iterations: max_iters,
        converged: false,
        seed,
    })
}
