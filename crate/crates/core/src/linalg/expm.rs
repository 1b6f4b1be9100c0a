//! Matrix exponential by scaling and squaring with the degree-13 Padé
//! approximant (Higham 2005 coefficients).

use super::{DenseMatrix, LuFactorization};
use crate::error::{Error, Result};

const THETA_13: f64 = 5.371_920_351_148_152;

const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn add_scaled_identity(m: &mut DenseMatrix, c: f64) {
    for i in 0..m.rows() {
        m.set(i, i, m.get(i, i) + c);
    }
}

fn lin_comb(terms: &[(f64, &DenseMatrix)], n: usize) -> DenseMatrix {
    let mut data = vec![0.0; n * n];
    for (c, m) in terms {
        if *c == 0.0 {
            continue;
        }
        for (d, v) in data.iter_mut().zip(m.data()) {
            *d += c * v;
        }
    }
    DenseMatrix::new(n, n, data).expect("finite linear combination")
}

/// Number of squarings used for `M`.
pub fn squaring_count(m: &DenseMatrix) -> u32 {
    let norm = m.norm1();
    if norm <= THETA_13 {
        0
    } else {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    }
}

pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            what: "expm",
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let s = squaring_count(m);
    let a = m.scaled(0.5f64.powi(s as i32));

    let a2 = a.matmul(&a)?;
    let a4 = a2.matmul(&a2)?;
    let a6 = a4.matmul(&a2)?;

    let b = &B13;
    let mut u_inner = lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    u_inner = a6.matmul(&u_inner)?;
    let mut u_tail = lin_comb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], n);
    add_scaled_identity(&mut u_tail, b[1]);
    let u = a.matmul(&u_inner.add(&u_tail)?)?;

    let mut v_inner = lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    v_inner = a6.matmul(&v_inner)?;
    let mut v = lin_comb(&[(1.0, &v_inner), (b[6], &a6), (b[4], &a4), (b[2], &a2)], n);
    add_scaled_identity(&mut v, b[0]);

    // (V - U) R = V + U
    let p = v.add(&u)?;
    let q = v.sub(&u)?;
    let mut r = LuFactorization::new(&q)?.solve_matrix(&p)?;
    for _ in 0..s {
        r = r.matmul(&r)?;
    }
    Ok(r)
}
