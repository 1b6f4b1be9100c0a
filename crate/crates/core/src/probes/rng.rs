//! Counter-based keyed random streams.
//!
//! A stream is identified by `(seed, index, stream_id)`. The three words are
//! hashed into a 64-bit key and the `j`-th output is `mix(key + (j + 1) * γ)`,
//! the SplitMix64 construction. Any sample can therefore be regenerated on its
//! own, in any order and on any thread, with bitwise-identical results.
//!
//! Gaussian variates use the inverse normal CDF on the uniform stream. Only
//! `libm` routines are used so that outputs do not depend on the platform's
//! math library.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 / Stafford variant 13 finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash `(seed, index, stream)` into a stream key.
#[inline]
pub fn stream_key(seed: u64, index: u64, stream: u64) -> u64 {
    let a = mix64(seed.wrapping_add(GOLDEN_GAMMA));
    let b = mix64(a ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03).wrapping_add(1));
    mix64(b ^ stream.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7).wrapping_add(2))
}

/// Derive a child seed from a parent seed and a tag; used to give each part
/// of an experiment its own independent family of streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    stream_key(seed, tag, 0x5EED)
}

/// Well-known stream identifiers.
pub mod streams {
    pub const TILDE: u64 = 1;
    pub const HAT: u64 = 2;
    pub const FULL: u64 = 3;
    pub const POWER_START: u64 = 4;
    pub const MATRIX: u64 = 5;
}

/// A keyed counter stream. Cheap to construct; holds two words.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, index: u64, stream: u64) -> Self {
        Self {
            key: stream_key(seed, index, stream),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_gaussian(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }

    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_gaussian();
        }
    }

    pub fn fill_signs(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_sign();
        }
    }
}

// Acklam's rational approximation; relative error of the quantile below 1.15e-9.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;
const P_HIGH: f64 = 1.0 - P_LOW;

/// Standard normal quantile for `p` in (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= P_HIGH {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
