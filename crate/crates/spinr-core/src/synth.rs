//! Deterministic synthetic test images.
//!
//! Images combine a shared fractal luminance field, per-channel chroma
//! fields, fine texture bands, pixel-scale grain, and two hard-edged
//! shapes (a disc whose position and palette follow the variant, and a
//! fixed blue rectangle). The mix gives a fitting problem with both
//! smooth structure and detail that saturates small networks, so metric
//! regressions show up as dB shifts instead of noise. All randomness
//! comes from the dedicated synthesis stream; a `(variant, size)` pair
//! always produces the same pixels.

use rand::distributions::Uniform;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::image::Image;
use crate::rng::{stream_rng, STREAM_SYNTH};

/// Default fine-texture weight.
pub const DEFAULT_TEXTURE: f64 = 1.0;
/// Default per-pixel grain level.
pub const DEFAULT_GRAIN: f64 = 0.02;
/// Base seed for the synthesis stream; the variant index offsets it.
const SEED_BASE: u64 = 4242;

/// Bilinearly upsampled random control grid in [-1, 1), `grid`×`grid`
/// cells, sampled at pixel centers.
fn value_noise(height: usize, width: usize, grid: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let span = Uniform::new(-1.0f64, 1.0);
    let ctrl: Vec<f64> = (0..(grid + 1) * (grid + 1)).map(|_| rng.sample(span)).collect();
    let axis = |len: usize| -> (Vec<usize>, Vec<f64>) {
        let mut cell = vec![0usize; len];
        let mut frac = vec![0.0f64; len];
        for (k, (c, f)) in cell.iter_mut().zip(frac.iter_mut()).enumerate() {
            let t = (k as f64 + 0.5) / len as f64 * grid as f64;
            *c = (t as usize).min(grid - 1);
            *f = t - *c as f64;
        }
        (cell, frac)
    };
    let (y0, fy) = axis(height);
    let (x0, fx) = axis(width);
    let mut field = vec![0.0f64; height * width];
    for i in 0..height {
        let top = &ctrl[y0[i] * (grid + 1)..];
        let bottom = &ctrl[(y0[i] + 1) * (grid + 1)..];
        let row = &mut field[i * width..(i + 1) * width];
        for (j, out) in row.iter_mut().enumerate() {
            let (c00, c01) = (top[x0[j]], top[x0[j] + 1]);
            let (c10, c11) = (bottom[x0[j]], bottom[x0[j] + 1]);
            let top_mix = c00 + fx[j] * (c01 - c00);
            let bot_mix = c10 + fx[j] * (c11 - c10);
            *out = top_mix + fy[i] * (bot_mix - top_mix);
        }
    }
    field
}

/// Synthesize a test image with default texture and grain.
pub fn synth_image(height: usize, width: usize, variant: u32) -> Image {
    synth_image_with(height, width, variant, DEFAULT_TEXTURE, DEFAULT_GRAIN)
}

/// Synthesize a test image.
///
/// `texture` scales the fine bands (0 removes them), `grain` is the σ of
/// per-pixel Gaussian grain. Both default knobs leave the underlying
/// random fields untouched, so two calls with the same variant but
/// different knobs differ only in the blend weights.
pub fn synth_image_with(
    height: usize,
    width: usize,
    variant: u32,
    texture: f64,
    grain: f64,
) -> Image {
    assert!(height > 0 && width > 0, "image must be non-empty");
    assert!(grain >= 0.0, "grain must be non-negative");
    let mut rng = stream_rng(SEED_BASE + variant as u64, STREAM_SYNTH);
    let px = height * width;

    // Shared fractal luminance: five octaves with halving amplitudes.
    let octaves = [2usize, 4, 8, 16, 32];
    let amps = [1.0, 0.5, 0.25, 0.125, 0.0625];
    let amp_total: f64 = amps.iter().sum();
    let mut lum = vec![0.0f64; px];
    for (&g, &a) in octaves.iter().zip(&amps) {
        for (l, v) in lum.iter_mut().zip(value_noise(height, width, g, &mut rng)) {
            *l += a * v;
        }
    }
    let lum_scale = 1.0 / amp_total;

    let mut data = vec![0.0f64; px * 3];
    let chroma_total: f64 = amps[..3].iter().sum();
    let tex_grids = [16usize, 32, 48];
    let tex_amps = [0.12, 0.08, 0.05];
    for c in 0..3 {
        // Per-channel chroma: the three coarse octaves only.
        let mut chroma = vec![0.0f64; px];
        for (&g, &a) in octaves[..3].iter().zip(&amps[..3]) {
            for (l, v) in chroma.iter_mut().zip(value_noise(height, width, g, &mut rng)) {
                *l += a * v;
            }
        }
        // Fine texture bands, scaled by the texture knob.
        let mut tex = vec![0.0f64; px];
        for (&g, &a) in tex_grids.iter().zip(&tex_amps) {
            for (l, v) in tex.iter_mut().zip(value_noise(height, width, g, &mut rng)) {
                *l += a * texture * v;
            }
        }
        for p in 0..px {
            data[p * 3 + c] = 0.5 + 0.28 * lum[p] * lum_scale + 0.18 * chroma[p] / chroma_total
                + tex[p];
        }
    }

    // Pixel-scale grain: detail no small model can absorb.
    if grain > 0.0 {
        for v in data.iter_mut() {
            *v += grain * rng.sample::<f64, _>(StandardNormal);
        }
    }

    // Hard-edged shapes in unit coordinates (x rightward, y downward).
    let disc_cx = 0.3 + 0.1 * (variant % 3) as f64;
    let (disc_cy, disc_r) = (0.4, 0.17);
    let palette = [[0.85, 0.25, 0.2], [0.2, 0.7, 0.35], [0.9, 0.75, 0.2]];
    let disc_col = palette[(variant % 3) as usize];
    let rect_col = [0.15, 0.45, 0.85];
    for i in 0..height {
        let y = (i as f64 + 0.5) / height as f64;
        for j in 0..width {
            let x = (j as f64 + 0.5) / width as f64;
            let p = (i * width + j) * 3;
            if (x - disc_cx).powi(2) + (y - disc_cy).powi(2) < disc_r * disc_r {
                for c in 0..3 {
                    data[p + c] = 0.6 * disc_col[c] + 0.4 * data[p + c];
                }
            }
            if x > 0.58 && x < 0.86 && y > 0.55 && y < 0.88 {
                for c in 0..3 {
                    data[p + c] = 0.65 * rect_col[c] + 0.35 * data[p + c];
                }
            }
        }
    }

    for v in data.iter_mut() {
        *v = v.clamp(0.02, 0.98);
    }
    Image::from_vec(height, width, data)
}
