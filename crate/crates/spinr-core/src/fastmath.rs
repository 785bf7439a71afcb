//! Branch-free trigonometry for hot loops.
//!
//! Sine-activated networks spend a large share of training time inside
//! `sin`/`cos`. The libm versions are accurate to the last bit but branch on
//! argument magnitude, which defeats autovectorization. This module provides
//! a branch-free `sin_cos` the compiler vectorizes: Cody–Waite argument
//! reduction by multiples of pi/2 followed by minimax polynomials on
//! [-pi/4, pi/4], with the quadrant folded back in arithmetically. The
//! quadrant parities are computed in the float domain (`floor`/multiply,
//! both single instructions) rather than through integer casts, and the
//! nearest-integer step uses ties-to-even rounding — the one rounding mode
//! with a direct vector encoding; at a tie both neighboring quadrants
//! reduce the argument equally well, so accuracy is unaffected.
//!
//! Absolute error stays below 1e-13 for |x| <= 1e6, far tighter than any
//! tolerance used elsewhere in the crate (training is noisy at the 1e-8
//! level simply from summation order).

#![allow(clippy::excessive_precision)] // coefficient tables keep their full published digits

const TWO_OVER_PI: f64 = std::f64::consts::FRAC_2_PI;
/// High 33 bits of pi/2; products with |k| < 2^20 are exact.
const PIO2_HI: f64 = 1.570_796_326_734_125_614_17;
/// pi/2 - PIO2_HI to full precision.
const PIO2_LO: f64 = 6.077_100_506_506_192_249_32e-11;

// Minimax coefficients for sin(r)/r - 1 and cos(r) on [-pi/4, pi/4]
// (Cephes cephes/sin.c lineage, standard double-precision set).
const S1: f64 = -1.666_666_666_666_663_072_95e-1;
const S2: f64 = 8.333_333_333_322_118_588_78e-3;
const S3: f64 = -1.984_126_982_958_953_859_96e-4;
const S4: f64 = 2.755_731_362_138_572_452_13e-6;
const S5: f64 = -2.505_074_776_285_780_728_66e-8;
const S6: f64 = 1.589_623_015_765_465_680_60e-10;

const C1: f64 = 4.166_666_666_666_659_292_18e-2;
const C2: f64 = -1.388_888_888_887_305_641_16e-3;
const C3: f64 = 2.480_158_728_885_171_799_54e-5;
const C4: f64 = -2.755_731_417_929_673_881_12e-7;
const C5: f64 = 2.087_570_084_197_473_167_78e-9;
const C6: f64 = -1.135_853_652_138_768_173_00e-11;

/// Parity of an integer-valued f64 (exact for |m| well below 2^52).
#[inline(always)]
fn parity(m: f64) -> f64 {
    (-2.0f64).mul_add((m * 0.5).floor(), m)
}

/// Simultaneous sine and cosine, branch-free.
#[inline(always)]
pub fn sin_cos(x: f64) -> (f64, f64) {
    // Nearest multiple of pi/2. Ties-to-even is the vector-friendly mode;
    // k stays exactly integer-valued for the whole supported range.
    let k = (x * TWO_OVER_PI).round_ties_even();

    // Two-step Cody-Waite reduction: r = x - k*pi/2, |r| <= pi/4.
    let r = (-k).mul_add(PIO2_HI, x);
    let r = (-k).mul_add(PIO2_LO, r);
    let z = r * r;

    // sin(r) = r + r*z*P(z)
    let ps = S6.mul_add(z, S5);
    let ps = ps.mul_add(z, S4);
    let ps = ps.mul_add(z, S3);
    let ps = ps.mul_add(z, S2);
    let ps = ps.mul_add(z, S1);
    let s = (r * z).mul_add(ps, r);

    // cos(r) = 1 - z/2 + z^2*Q(z)
    let pc = C6.mul_add(z, C5);
    let pc = pc.mul_add(z, C4);
    let pc = pc.mul_add(z, C3);
    let pc = pc.mul_add(z, C2);
    let pc = pc.mul_add(z, C1);
    let c = (z * z).mul_add(pc, z.mul_add(-0.5, 1.0));

    // Quadrant k mod 4 maps (s, c) to the true (sin, cos):
    //   0: ( s,  c)   1: ( c, -s)   2: (-s, -c)   3: (-c,  s)
    // swap when k is odd; the sign flips follow the parities of
    // floor(k/2) and floor((k+1)/2). floor performs the same flooring
    // division on negatives that an arithmetic shift would.
    let swap = parity(k);
    let ssign = (-2.0f64).mul_add(parity((k * 0.5).floor()), 1.0);
    let csign = (-2.0f64).mul_add(parity(((k + 1.0) * 0.5).floor()), 1.0);

    let sin = ssign * (s + swap * (c - s));
    let cos = csign * (c + swap * (s - c));
    (sin, cos)
}

/// Sine alone (same accuracy and cost profile as [`sin_cos`]).
#[inline(always)]
pub fn sin(x: f64) -> f64 {
    sin_cos(x).0
}

/// `out_s[i] = sin(scale * x[i])`, `out_c[i] = scale * cos(scale * x[i])`.
///
/// This is the fused form sine layers need in one pass: the activation and
/// the local derivative of `sin(scale * x)` with respect to `x`. The loop
/// body is straight-line float arithmetic, so it compiles to packed
/// vector code.
pub fn sin_and_dsin(scale: f64, x: &[f64], out_s: &mut [f64], out_c: &mut [f64]) {
    assert_eq!(x.len(), out_s.len());
    assert_eq!(x.len(), out_c.len());
    for ((so, co), &xi) in out_s.iter_mut().zip(out_c.iter_mut()).zip(x) {
        let (s, c) = sin_cos(scale * xi);
        *so = s;
        *co = scale * c;
    }
}
