//! In-memory raster images and the coordinate grids networks consume.

use crate::linalg::Mat;

/// RGB image with f64 samples in `[0, 1]`, interleaved row-major:
/// `data[(i * width + j) * 3 + c]` for row `i`, column `j`, channel `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize) -> Self {
        Image { height, width, data: vec![0.0; height * width * 3] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width * 3, "shape/data mismatch");
        Image { height, width, data }
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[(i * self.width + j) * 3 + c]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        self.data[(i * self.width + j) * 3 + c] = v;
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    /// Clamp every sample into `[0, 1]` in place.
    pub fn clamp(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Clamped copy.
    pub fn clamped(&self) -> Image {
        let mut out = self.clone();
        out.clamp();
        out
    }

    /// Axis-aligned crop with top-left corner `(i0, j0)`.
    pub fn crop(&self, i0: usize, j0: usize, height: usize, width: usize) -> Image {
        assert!(i0 + height <= self.height && j0 + width <= self.width, "crop out of bounds");
        let mut out = Image::new(height, width);
        for i in 0..height {
            let src = ((i0 + i) * self.width + j0) * 3;
            let dst = i * width * 3;
            out.data[dst..dst + width * 3].copy_from_slice(&self.data[src..src + width * 3]);
        }
        out
    }

    /// Pixel values as a `(H*W) x 3` matrix in the same row-major pixel
    /// order as [`coord_grid`] — the regression target for training.
    pub fn to_target(&self) -> Mat {
        Mat::from_vec(self.pixel_count(), 3, self.data.clone())
    }

    /// Rebuild an image from a `(H*W) x 3` prediction matrix.
    pub fn from_mat(height: usize, width: usize, m: &Mat) -> Image {
        assert_eq!(m.rows, height * width);
        assert_eq!(m.cols, 3);
        Image::from_vec(height, width, m.data.clone())
    }

    /// 8-bit interleaved samples, rounding half away from zero.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Image from 8-bit interleaved samples (`v / 255`).
    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Image {
        assert_eq!(bytes.len(), height * width * 3);
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        Image::from_vec(height, width, data)
    }
}

/// Normalized pixel-center coordinates as a `(H*W) x 2` matrix of
/// `(x, y)` pairs in row-major pixel order:
/// `x = 2*(j + 0.5)/W - 1`, `y = 2*(i + 0.5)/H - 1`.
///
/// Centers rather than corners keep the grid symmetric about the origin,
/// so no pixel ever sits exactly on the domain boundary.
pub fn coord_grid(height: usize, width: usize) -> Mat {
    let mut m = Mat::zeros(height * width, 2);
    grid_rows_into(&mut m, height, width, 0, height);
    m
}

/// Fill `m` (shape `(i1-i0)*W x 2`) with the coordinate rows for pixel
/// rows `[i0, i1)` — the block form render paths use to bound memory.
pub fn grid_rows_into(m: &mut Mat, height: usize, width: usize, i0: usize, i1: usize) {
    assert_eq!(m.rows, (i1 - i0) * width);
    assert_eq!(m.cols, 2);
    let (h, w) = (height as f64, width as f64);
    let mut p = 0;
    for i in i0..i1 {
        let y = 2.0 * (i as f64 + 0.5) / h - 1.0;
        for j in 0..width {
            let x = 2.0 * (j as f64 + 0.5) / w - 1.0;
            m.data[p] = x;
            m.data[p + 1] = y;
            p += 2;
        }
    }
}
