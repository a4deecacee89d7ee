//! Dense complex matrix helpers shared by the propagator, the spectral
//! diagnostics and the dilation oracle.

use faer::Mat;

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

// Higham's backward-error thresholds for the diagonal Pade approximants.
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_230e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
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

pub fn norm_one(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn to_faer(a: &CMatrix) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// `A = U diag(s) V^dagger` with `s` descending.
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

/// Full SVD of a square matrix. nalgebra's complex SVD can leave a
/// reconstruction error far above rounding on graded 2x2 blocks, so this
/// goes through faer.
pub fn svd(a: &CMatrix) -> Result<Svd> {
    if !is_finite(a) {
        return Err(Error::Eigen("SVD of a non-finite matrix".into()));
    }
    let f = to_faer(a).svd().map_err(|e| Error::Eigen(format!("SVD: {e:?}")))?;
    let (u, v) = (f.U(), f.V());
    let n = a.nrows();
    Ok(Svd {
        u: CMatrix::from_fn(n, n, |i, j| u[(i, j)]),
        s: (0..n).map(|k| f.S()[k].re).collect(),
        v: CMatrix::from_fn(n, n, |i, j| v[(i, j)]),
    })
}

/// Largest singular value; NaN for a non-finite matrix.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    match svd(a) {
        Ok(d) => d.s.iter().copied().fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

/// `(A + A^dagger) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::from(0.5)
}

fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

fn pade_odd_even(a: &CMatrix, b: &[f64]) -> (CMatrix, CMatrix) {
    // b has even length m + 1 with m odd; u collects odd, v even coefficients.
    let n = a.nrows();
    let a2 = a * a;
    let mut power = identity(n);
    let mut u = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for k in 0..b.len() / 2 {
        v += &power * C64::from(b[2 * k]);
        u += &power * C64::from(b[2 * k + 1]);
        if 2 * k + 2 < b.len() {
            power = &power * &a2;
        }
    }
    (a * u, v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let b = B13.map(C64::from);
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Pade
/// approximant whose degree is picked from the 1-norm. Defective input is
/// handled like any other; no eigendecomposition is involved.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite { steps: 0 });
    }
    let norm = norm_one(a);
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_odd_even(a, &B3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_odd_even(a, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_odd_even(a, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_odd_even(a, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = a * C64::from(2f64.powi(-s));
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Eigen("singular Pade denominator".into()))?;
    for _ in 0..squarings {
        x = &x * &x;
    }
    Ok(x)
}

/// Natural log of `sum(exp(x))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, scale: f64, seed: u64) -> CMatrix {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()) * scale)
    }

    #[test]
    fn matches_nalgebra_exp_across_pade_degrees() {
        for (k, scale) in [1e-3, 0.02, 0.1, 0.4, 0.8, 3.0, 40.0].into_iter().enumerate() {
            let a = sample(6, scale, k as u64 + 1);
            let ours = expm(&a).unwrap();
            let theirs = a.clone().exp();
            let rel = frobenius(&(&ours - &theirs)) / frobenius(&theirs);
            assert!(rel < 1e-12, "scale {scale}: rel {rel:e}");
        }
    }

    #[test]
    fn exact_on_defective_jordan_block() {
        // exp([[l, 1], [0, l]]) = e^l [[1, 1], [0, 1]]
        let l = C64::new(-0.3, 0.7);
        let a = CMatrix::from_row_slice(2, 2, &[l, C64::from(1.0), C64::from(0.0), l]);
        let x = expm(&a).unwrap();
        let e = l.exp();
        assert!((x[(0, 0)] - e).norm() < 1e-14);
        assert!((x[(0, 1)] - e).norm() < 1e-14);
        assert!(x[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn anti_hermitian_exponential_is_unitary() {
        let a = sample(5, 2.0, 9);
        let h = hermitian_part(&a);
        let u = expm(&(h * C64::new(0.0, -1.0))).unwrap();
        let defect = max_abs(&(u.adjoint() * &u - CMatrix::identity(5, 5)));
        assert!(defect < 1e-13);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [-1000.0, -1001.0];
        let want = -1000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((log_sum_exp(v) - want).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn svd_reconstructs_a_graded_kernel() {
        // sigma = (1, 3.3e-7); nalgebra's SVD misses this by 2.5e-10
        let k = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(3.825_538_649_995_373_6e-1, 0.0),
                C64::new(0.0, -9.099_105_140_253_678e-1),
                C64::new(0.0, 6.215_043_199_604_531e-2),
                C64::new(1.478_266_574_161_074e-1, 0.0),
            ],
        );
        let d = svd(&k).unwrap();
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, d.s.iter().map(|&x| C64::from(x))));
        assert!(max_abs(&(&d.u * s * d.v.adjoint() - &k)) < 1e-15);
        assert!(d.s[0] >= d.s[1]);
    }
}
