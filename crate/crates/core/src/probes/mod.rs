//! Random probe vectors: unstructured Gaussian / Rademacher vectors and
//! rank-one probes `x = x̃ ⊗ x̂` built from two shorter independent vectors.
//!
//! Probes are addressed by `(seed, sample_index)`. Generation is stateless, so
//! estimators can evaluate samples in any order (or in parallel) and still see
//! the same sample set.

pub mod rng;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::kron;
use rng::{streams, CounterRng};

/// Probe distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Distribution {
    Gaussian,
    Rademacher,
    RankOneGaussian,
    RankOneRademacher,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::Gaussian,
        Distribution::RankOneGaussian,
        Distribution::Rademacher,
        Distribution::RankOneRademacher,
    ];

    pub fn is_rank_one(self) -> bool {
        matches!(
            self,
            Distribution::RankOneGaussian | Distribution::RankOneRademacher
        )
    }

    pub fn is_gaussian(self) -> bool {
        matches!(
            self,
            Distribution::Gaussian | Distribution::RankOneGaussian
        )
    }

    /// Command-line / CSV tag.
    pub fn tag(self) -> &'static str {
        match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Rademacher => "rademacher",
            Distribution::RankOneGaussian => "rank1-gaussian",
            Distribution::RankOneRademacher => "rank1-rademacher",
        }
    }

    /// Short legend label (G, R, G1, R1).
    pub fn label(self) -> &'static str {
        match self {
            Distribution::Gaussian => "G",
            Distribution::Rademacher => "R",
            Distribution::RankOneGaussian => "G1",
            Distribution::RankOneRademacher => "R1",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "G" => Ok(Distribution::Gaussian),
            "rademacher" | "R" => Ok(Distribution::Rademacher),
            "rank1-gaussian" | "G1" => Ok(Distribution::RankOneGaussian),
            "rank1-rademacher" | "R1" => Ok(Distribution::RankOneRademacher),
            other => Err(Error::InvalidArgument(format!(
                "unknown distribution `{other}` (expected gaussian, rademacher, rank1-gaussian or rank1-rademacher)"
            ))),
        }
    }
}

/// Integer factorization `n = n̂ · ñ` of a probe length.
///
/// Index convention: `(x̃ ⊗ x̂)[j·n̂ + i] = x̃[j]·x̂[i]`, i.e. the vector is the
/// column-major stacking of the `n̂ × ñ` matrix `x̂ x̃ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProbeShape {
    n_hat: usize,
    n_tilde: usize,
}

impl ProbeShape {
    pub fn new(n_hat: usize, n_tilde: usize) -> Result<Self> {
        if n_hat == 0 || n_tilde == 0 {
            return Err(Error::InvalidFactorization {
                n: n_hat * n_tilde,
                n_hat,
                n_tilde,
            });
        }
        Ok(Self { n_hat, n_tilde })
    }

    /// Validate that `n = n̂ · ñ`.
    pub fn with_len(n: usize, n_hat: usize, n_tilde: usize) -> Result<Self> {
        if n_hat == 0 || n_tilde == 0 || n_hat.checked_mul(n_tilde) != Some(n) {
            return Err(Error::InvalidFactorization { n, n_hat, n_tilde });
        }
        Ok(Self { n_hat, n_tilde })
    }

    /// The trivial factorization `n = n · 1`.
    pub fn trivial(n: usize) -> Self {
        assert!(n > 0, "empty probe shape");
        Self { n_hat: n, n_tilde: 1 }
    }

    pub fn square(m: usize) -> Self {
        assert!(m > 0, "empty probe shape");
        Self {
            n_hat: m,
            n_tilde: m,
        }
    }

    pub fn n_hat(&self) -> usize {
        self.n_hat
    }

    pub fn n_tilde(&self) -> usize {
        self.n_tilde
    }

    pub fn len(&self) -> usize {
        self.n_hat * self.n_tilde
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `min(n̂, ñ)`; the bounds are stated for the smaller factor.
    pub fn smaller(&self) -> usize {
        self.n_hat.min(self.n_tilde)
    }

    pub fn larger(&self) -> usize {
        self.n_hat.max(self.n_tilde)
    }
}

/// A rank-one probe `x = x̃ ⊗ x̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneProbe {
    pub tilde: Vec<f64>,
    pub hat: Vec<f64>,
    pub distribution: Distribution,
    pub seed: u64,
    pub sample_index: u64,
}

impl RankOneProbe {
    /// Materialize `x̃ ⊗ x̂`.
    pub fn to_vector(&self) -> Vec<f64> {
        kron(&self.tilde, &self.hat)
    }

    /// `‖x̃‖₂² · ‖x̂‖₂²`.
    pub fn norm_sq(&self) -> f64 {
        let t: f64 = self.tilde.iter().map(|v| v * v).sum();
        let h: f64 = self.hat.iter().map(|v| v * v).sum();
        t * h
    }
}

/// A probe vector, either unstructured or rank-one.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Full {
        x: Vec<f64>,
        distribution: Distribution,
        seed: u64,
        sample_index: u64,
    },
    RankOne(RankOneProbe),
}

impl Probe {
    pub fn len(&self) -> usize {
        match self {
            Probe::Full { x, .. } => x.len(),
            Probe::RankOne(p) => p.tilde.len() * p.hat.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn distribution(&self) -> Distribution {
        match self {
            Probe::Full { distribution, .. } => *distribution,
            Probe::RankOne(p) => p.distribution,
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            Probe::Full { x, .. } => x.clone(),
            Probe::RankOne(p) => p.to_vector(),
        }
    }
}

/// Draw sample `sample_index` of the probe stream `(dist, seed)`.
pub fn draw_probe(dist: Distribution, shape: ProbeShape, seed: u64, sample_index: u64) -> Probe {
    match dist {
        Distribution::Gaussian | Distribution::Rademacher => {
            let mut x = vec![0.0; shape.len()];
            let mut rng = CounterRng::new(seed, sample_index, streams::FULL);
            if dist == Distribution::Gaussian {
                rng.fill_gaussian(&mut x);
            } else {
                rng.fill_signs(&mut x);
            }
            Probe::Full {
                x,
                distribution: dist,
                seed,
                sample_index,
            }
        }
        Distribution::RankOneGaussian | Distribution::RankOneRademacher => {
            Probe::RankOne(draw_rank_one(dist, shape, seed, sample_index))
        }
    }
}

/// Rank-one variant of [`draw_probe`]. Panics on unstructured distributions.
pub fn draw_rank_one(
    dist: Distribution,
    shape: ProbeShape,
    seed: u64,
    sample_index: u64,
) -> RankOneProbe {
    assert!(dist.is_rank_one(), "{dist} is not a rank-one distribution");
    let mut tilde = vec![0.0; shape.n_tilde()];
    let mut hat = vec![0.0; shape.n_hat()];
    let mut rt = CounterRng::new(seed, sample_index, streams::TILDE);
    let mut rh = CounterRng::new(seed, sample_index, streams::HAT);
    if dist == Distribution::RankOneGaussian {
        rt.fill_gaussian(&mut tilde);
        rh.fill_gaussian(&mut hat);
    } else {
        rt.fill_signs(&mut tilde);
        rh.fill_signs(&mut hat);
    }
    RankOneProbe {
        tilde,
        hat,
        distribution: dist,
        seed,
        sample_index,
    }
}

/// Largest `n̂ + ñ` accepted by [`enumerate_rademacher_rank_one`].
pub const ENUMERATION_LIMIT: usize = 24;

/// Every rank-one Rademacher probe for the given shape, each sign pattern of
/// `(x̃, x̂)` exactly once (`2^(n̂+ñ)` probes). The mask bits `0..ñ` encode
/// `x̃` and bits `ñ..ñ+n̂` encode `x̂`; a set bit is `-1`.
pub fn enumerate_rademacher_rank_one(
    n_hat: usize,
    n_tilde: usize,
) -> Result<impl Iterator<Item = RankOneProbe>> {
    let total = n_hat + n_tilde;
    if total > ENUMERATION_LIMIT {
        return Err(Error::SizeGuard {
            what: "n_hat + n_tilde",
            value: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    ProbeShape::new(n_hat, n_tilde)?;
    let sign = |mask: u64, bit: usize| if mask >> bit & 1 == 1 { -1.0 } else { 1.0 };
    Ok((0..1u64 << total).map(move |mask| RankOneProbe {
        tilde: (0..n_tilde).map(|j| sign(mask, j)).collect(),
        hat: (0..n_hat).map(|i| sign(mask, n_tilde + i)).collect(),
        distribution: Distribution::RankOneRademacher,
        seed: 0,
        sample_index: mask,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn shape_validation() {
        assert!(ProbeShape::with_len(12, 4, 3).is_ok());
        assert!(matches!(
            ProbeShape::with_len(12, 5, 3),
            Err(Error::InvalidFactorization { .. })
        ));
        assert!(ProbeShape::new(0, 3).is_err());
        let s = ProbeShape::new(3, 5).unwrap();
        assert_eq!((s.smaller(), s.larger(), s.len()), (3, 5, 15));
    }

    #[test]
    fn rank_one_rademacher_has_exact_norm() {
        let shape = ProbeShape::new(7, 5).unwrap();
        for idx in 0..50 {
            let p = draw_rank_one(Distribution::RankOneRademacher, shape, 123, idx);
            let x = p.to_vector();
            assert!(x.iter().all(|&v| v == 1.0 || v == -1.0));
            let nsq: f64 = x.iter().map(|v| v * v).sum();
            assert_eq!(nsq, 35.0);
        }
    }

    #[test]
    fn redraw_is_bitwise_identical() {
        let shape = ProbeShape::new(6, 4).unwrap();
        for dist in Distribution::ALL {
            let a = draw_probe(dist, shape, 99, 17).to_vector();
            let b = draw_probe(dist, shape, 99, 17).to_vector();
            let bits_a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
            let c = draw_probe(dist, shape, 99, 18).to_vector();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn draw_order_does_not_matter() {
        let shape = ProbeShape::new(5, 5).unwrap();
        let forward: Vec<_> = (0..20)
            .map(|i| draw_probe(Distribution::RankOneGaussian, shape, 5, i))
            .collect();
        let backward: Vec<_> = (0..20)
            .rev()
            .map(|i| draw_probe(Distribution::RankOneGaussian, shape, 5, i))
            .collect();
        for (i, p) in forward.iter().enumerate() {
            assert_eq!(p, &backward[19 - i]);
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_rademacher_rank_one(1, 1).unwrap().count(), 4);
        let all: Vec<_> = enumerate_rademacher_rank_one(2, 1).unwrap().collect();
        assert_eq!(all.len(), 8);
        let distinct: HashSet<Vec<i8>> = all
            .iter()
            .map(|p| p.tilde.iter().chain(&p.hat).map(|&v| v as i8).collect())
            .collect();
        assert_eq!(distinct.len(), 8);
        assert!(matches!(
            enumerate_rademacher_rank_one(13, 12),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn enumerated_orthogonality_probability() {
        // u = e / 4 with n̂ = ñ = 4: xᵀu = 0 iff either factor sums to zero.
        let mut zero = 0usize;
        let mut total = 0usize;
        for p in enumerate_rademacher_rank_one(4, 4).unwrap() {
            let dot: f64 = p.to_vector().iter().sum::<f64>() / 4.0;
            if dot == 0.0 {
                zero += 1;
            }
            total += 1;
        }
        assert_eq!(total, 256);
        assert_eq!(zero as f64 / total as f64, 0.609375);
    }

    #[test]
    fn parse_tags() {
        for d in Distribution::ALL {
            assert_eq!(d.tag().parse::<Distribution>().unwrap(), d);
            assert_eq!(d.label().parse::<Distribution>().unwrap(), d);
        }
        assert!("uniform".parse::<Distribution>().is_err());
    }
}
