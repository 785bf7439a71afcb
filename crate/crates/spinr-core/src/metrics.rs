//! Fidelity and compression metrics: PSNR, SSIM, compression factor, and
//! multi-run aggregation.

use crate::image::Image;

/// Peak signal-to-noise ratio in dB against a peak value of 1.0.
///
/// Both inputs are clamped to [0, 1] first (renders are raw network
/// outputs; what a viewer would display is the clamped image), and the MSE
/// averages over all pixels and channels. Identical images return the
/// `+inf` sentinel.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    let mse = mse(a, b);
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Mean squared error over all pixels and channels, after clamping.
pub fn mse(a: &Image, b: &Image) -> f64 {
    assert_eq!(
        (a.height, a.width),
        (b.height, b.width),
        "shape mismatch"
    );
    let mut acc = 0.0;
    for (x, y) in a.data.iter().zip(&b.data) {
        let d = x.clamp(0.0, 1.0) - y.clamp(0.0, 1.0);
        acc += d * d;
    }
    acc / a.data.len() as f64
}

/// Side length of the SSIM window; images smaller than this in either
/// dimension cannot be scored.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean structural similarity with the standard 11x11 Gaussian window
/// (sigma 1.5, K1 = 0.01, K2 = 0.03, data range 1.0), computed over the
/// valid region (windows fully inside the image) and averaged over
/// channels, then pixels.
///
/// Panics if either dimension is smaller than the window.
pub fn ssim(a: &Image, b: &Image) -> f64 {
    assert_eq!((a.height, a.width), (b.height, b.width), "shape mismatch");
    assert!(
        a.height >= SSIM_WINDOW && a.width >= SSIM_WINDOW,
        "image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
    );
    let kernel = gaussian_kernel();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);

    let vh = a.height - SSIM_WINDOW + 1;
    let vw = a.width - SSIM_WINDOW + 1;
    let mut total = 0.0;
    for c in 0..3 {
        let pa = channel_plane(a, c);
        let pb = channel_plane(b, c);
        let mu_a = blur(&pa, a.height, a.width, &kernel);
        let mu_b = blur(&pb, a.height, a.width, &kernel);
        let aa = blur(&mul(&pa, &pa), a.height, a.width, &kernel);
        let bb = blur(&mul(&pb, &pb), a.height, a.width, &kernel);
        let ab = blur(&mul(&pa, &pb), a.height, a.width, &kernel);
        for idx in 0..vh * vw {
            let (ma, mb) = (mu_a[idx], mu_b[idx]);
            let va = aa[idx] - ma * ma;
            let vb = bb[idx] - mb * mb;
            let cov = ab[idx] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    total / (vh * vw * 3) as f64
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

fn channel_plane(img: &Image, c: usize) -> Vec<f64> {
    img.data.iter().skip(c).step_by(3).copied().collect()
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Separable valid-mode convolution of an `h x w` plane with the 1-D
/// kernel in both directions; output is `(h-10) x (w-10)`.
fn blur(plane: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let vw = w - SSIM_WINDOW + 1;
    let vh = h - SSIM_WINDOW + 1;
    // Horizontal pass: h x vw.
    let mut tmp = vec![0.0; h * vw];
    for i in 0..h {
        let row = &plane[i * w..(i + 1) * w];
        for j in 0..vw {
            let mut s = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                s += kv * row[j + t];
            }
            tmp[i * vw + j] = s;
        }
    }
    // Vertical pass: vh x vw.
    let mut out = vec![0.0; vh * vw];
    for i in 0..vh {
        for j in 0..vw {
            let mut s = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                s += kv * tmp[(i + t) * vw + j];
            }
            out[i * vw + j] = s;
        }
    }
    out
}

/// `image_bytes / model_bytes`, where image bytes count the raw 8-bit
/// raster (`H*W*3`) and model bytes count the serialized chunk payloads.
pub fn compression_factor(image_bytes: usize, model_bytes: usize) -> f64 {
    assert!(image_bytes > 0 && model_bytes > 0, "sizes must be positive");
    image_bytes as f64 / model_bytes as f64
}

/// Mean and standard deviation of a set of metric values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample (n-1) standard deviation; 0 for a single value.
    pub std: f64,
    /// Number of finite values aggregated.
    pub n: usize,
    /// Number of non-finite values (PSNR +inf on perfect trials) excluded.
    pub excluded_infinite: usize,
}

/// Aggregate metric values with the sample (n-1) std convention.
/// Non-finite entries (PSNR of identical images) are excluded and counted.
/// Panics on an empty list; if every entry is non-finite, the mean is
/// `+inf` with `n = 0`.
pub fn aggregate(values: &[f64]) -> Aggregate {
    assert!(!values.is_empty(), "cannot aggregate an empty list");
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded = values.len() - finite.len();
    if finite.is_empty() {
        return Aggregate { mean: f64::INFINITY, std: 0.0, n: 0, excluded_infinite: excluded };
    }
    let n = finite.len();
    let mean = finite.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    };
    Aggregate { mean, std, n, excluded_infinite: excluded }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // oracle constants keep full digits
mod tests {
    use super::*;

    fn constant(h: usize, w: usize, v: f64) -> Image {
        Image::from_vec(h, w, vec![v; h * w * 3])
    }

    #[test]
    fn psnr_examples() {
        let a = constant(4, 4, 0.5);
        assert_eq!(psnr(&a, &a), f64::INFINITY);

        // MSE = 1 => 0 dB (constant 1 vs constant 0).
        let one = constant(4, 4, 1.0);
        let zero = constant(4, 4, 0.0);
        assert!(psnr(&one, &zero).abs() < 1e-12);

        // Constant 0.5 vs 0.0: MSE = 0.25 => 10*log10(4) ~ 6.0206.
        let half = constant(4, 4, 0.5);
        assert!((psnr(&half, &zero) - 10.0 * 4.0f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn psnr_is_symmetric_and_monotone_in_mse() {
        let a = constant(4, 4, 0.3);
        let b = constant(4, 4, 0.5);
        let c = constant(4, 4, 0.8);
        assert_eq!(psnr(&a, &b), psnr(&b, &a));
        assert!(psnr(&a, &b) > psnr(&a, &c));
    }

    #[test]
    fn psnr_clamps_before_comparing() {
        // A render overshooting to 1.4 is displayed as 1.0.
        let over = constant(4, 4, 1.4);
        let one = constant(4, 4, 1.0);
        assert_eq!(psnr(&over, &one), f64::INFINITY);
    }

    fn ssim_oracle_pair() -> (Image, Image) {
        // Deterministic 16x16 pattern; expected value computed with an
        // independent SSIM implementation (same window convention) in
        // double precision.
        let mut a = Image::new(16, 16);
        let mut b = Image::new(16, 16);
        for i in 0..16 {
            for j in 0..16 {
                let base = (i * 16 + j) as f64 / 255.0;
                let wobble = 0.05 * (0.7 * i as f64).sin() * (1.3 * j as f64).cos();
                for c in 0..3 {
                    a.set(i, j, c, base);
                    b.set(i, j, c, (base + wobble).clamp(0.0, 1.0));
                }
            }
        }
        (a, b)
    }

    #[test]
    fn ssim_identity_and_constant_limits() {
        let (a, _) = ssim_oracle_pair();
        assert!((ssim(&a, &a) - 1.0).abs() < 1e-12);
        // Equal-mean constants hit the zero-variance limit exactly.
        let c1 = constant(12, 12, 0.4);
        let c2 = constant(12, 12, 0.4);
        assert!((ssim(&c1, &c2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_independent_reference() {
        let (a, b) = ssim_oracle_pair();
        let got = ssim(&a, &b);
        assert!(
            (got - 0.96818548635685553).abs() < 1e-6,
            "ssim {got} vs reference"
        );
        assert_eq!(ssim(&a, &b).to_bits(), ssim(&b, &a).to_bits(), "symmetry");
    }

    #[test]
    #[should_panic(expected = "smaller than")]
    fn ssim_rejects_small_images() {
        let a = constant(8, 8, 0.1);
        ssim(&a, &a);
    }

    #[test]
    fn compression_factor_examples() {
        assert_eq!(compression_factor(1000, 500), 2.0);
        let cf = compression_factor(512 * 512 * 3, 66_819 * 4);
        assert!((cf - 786_432.0 / 267_276.0).abs() < 1e-12);
        assert!((cf - 2.94).abs() < 0.01);
        // Scale covariance: doubling model bytes halves CF exactly.
        assert_eq!(compression_factor(1000, 250), 2.0 * compression_factor(1000, 500));
    }

    #[test]
    fn aggregate_follows_sample_std_convention() {
        let single = aggregate(&[42.0]);
        assert_eq!((single.mean, single.std, single.n), (42.0, 0.0, 1));

        // Sample (n-1) convention: [30, 32] gives std sqrt(2), not 1.
        let two = aggregate(&[30.0, 32.0]);
        assert_eq!(two.mean, 31.0);
        assert!((two.std - 2.0f64.sqrt()).abs() < 1e-12);

        let with_inf = aggregate(&[10.0, f64::INFINITY, 14.0]);
        assert_eq!(with_inf.mean, 12.0);
        assert_eq!(with_inf.excluded_infinite, 1);
        assert_eq!(with_inf.n, 2);
    }

    #[test]
    fn aggregate_all_infinite_is_flagged() {
        let agg = aggregate(&[f64::INFINITY, f64::INFINITY]);
        assert_eq!(agg.n, 0);
        assert_eq!(agg.excluded_infinite, 2);
        assert_eq!(agg.mean, f64::INFINITY);
    }
}
