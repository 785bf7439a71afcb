//! The two INR families: sine-activated MLPs and Fourier-feature ReLU MLPs.
//!
//! Both map a normalized pixel coordinate (x, y) to an RGB triple through
//! `n + 2` dense layers: an input layer `L0`, hidden layers `L1..Ln`, and a
//! linear output layer. The sine family feeds raw coordinates into `L0`
//! and activates every non-output layer with `sin(omega0 * z)`; the Fourier
//! family first lifts coordinates through a frozen random projection
//! (`[sin(2*pi*B*x); cos(2*pi*B*x)]`) and uses ReLU hidden layers. Output
//! activations are identity in both cases — values are only clamped to
//! [0, 1] at image export.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::image::{grid_rows_into, Image};
use crate::linalg::{matmul, Mat};
use crate::nn;
use crate::rng::{stream_rng, STREAM_INIT};

/// Model family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Siren,
    Fourier,
}

/// Architecture descriptor. Everything needed to size, initialize, and
/// serialize a model is derivable from this struct alone.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    /// Hidden width `h` (neurons per non-output layer).
    pub hidden_width: usize,
    /// Number of hidden layers `n` (layers strictly between L0 and output).
    pub hidden_layers: usize,
    /// Sine frequency scale; used by the sine family only.
    pub omega0: f64,
    /// Number of Fourier frequencies `m`; used by the Fourier family only.
    pub fourier_m: usize,
    /// Frequency standard deviation for sampling `B`; Fourier family only.
    pub fourier_sigma: f64,
}

/// Default sine frequency scale.
pub const DEFAULT_OMEGA0: f64 = 30.0;
/// Default Fourier frequency count.
pub const DEFAULT_FOURIER_M: usize = 128;
/// Default Fourier frequency scale.
pub const DEFAULT_FOURIER_SIGMA: f64 = 10.0;

impl ModelSpec {
    pub fn siren(hidden_width: usize, hidden_layers: usize, omega0: f64) -> Self {
        assert!(hidden_width >= 1 && hidden_layers >= 1);
        assert!(omega0 > 0.0, "omega0 must be positive");
        ModelSpec {
            family: Family::Siren,
            hidden_width,
            hidden_layers,
            omega0,
            fourier_m: 0,
            fourier_sigma: 0.0,
        }
    }

    pub fn fourier(hidden_width: usize, hidden_layers: usize, m: usize, sigma: f64) -> Self {
        assert!(hidden_width >= 1 && hidden_layers >= 1 && m >= 1);
        ModelSpec {
            family: Family::Fourier,
            hidden_width,
            hidden_layers,
            omega0: 0.0,
            fourier_m: m,
            fourier_sigma: sigma,
        }
    }

    /// Dimension of the vector actually entering `L0`.
    pub fn input_dim(&self) -> usize {
        match self.family {
            Family::Siren => 2,
            Family::Fourier => 2 * self.fourier_m,
        }
    }

    /// Total number of dense layers (`L0`, hidden, output).
    pub fn layer_count(&self) -> usize {
        self.hidden_layers + 2
    }

    /// `(out_dim, in_dim)` for each dense layer in forward order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let h = self.hidden_width;
        let mut dims = Vec::with_capacity(self.layer_count());
        dims.push((h, self.input_dim()));
        for _ in 0..self.hidden_layers {
            dims.push((h, h));
        }
        dims.push((3, h));
        dims
    }

    /// Total parameter count: `sum(out * (in + 1))` over dense layers, plus
    /// the `2m` frozen projection entries for the Fourier family.
    pub fn param_count(&self) -> usize {
        let dense: usize = self.layer_dims().iter().map(|&(o, i)| o * (i + 1)).sum();
        match self.family {
            Family::Siren => dense,
            Family::Fourier => dense + 2 * self.fourier_m,
        }
    }
}

/// One dense layer: weight matrix (`out x in`, row per output neuron) and
/// bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn out_dim(&self) -> usize {
        self.w.rows
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols
    }
}

/// A fully materialized model: spec, optional frozen Fourier projection,
/// and the dense layers in forward order (`layers[0]` is L0, the last entry
/// is the output layer).
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    /// `m x 2` frozen frequency matrix; `None` for the sine family.
    pub fourier_b: Option<Mat>,
    pub layers: Vec<Layer>,
}

impl Model {
    pub fn param_count(&self) -> usize {
        let dense: usize = self.layers.iter().map(|l| l.w.data.len() + l.b.len()).sum();
        dense + self.fourier_b.as_ref().map_or(0, |b| b.data.len())
    }

    /// Index of the output layer within `layers`.
    pub fn output_index(&self) -> usize {
        self.layers.len() - 1
    }
}

/// Build and initialize a model.
///
/// Draw order is pinned (and therefore reproducible across releases):
/// the Fourier projection first when present (row-major), then each layer
/// in forward order, weights row-major before biases.
///
/// Scales follow the usual conventions for each family: the sine family's
/// first layer is uniform in `(-1/in, 1/in)` and later layers uniform in
/// `(-sqrt(6/in)/omega0, sqrt(6/in)/omega0)` so pre-activations stay
/// unit-scale under the `omega0` multiplier; the Fourier family uses
/// fan-in uniform `(-sqrt(6/in), sqrt(6/in))` everywhere. Biases are
/// uniform in `(-1/sqrt(in), 1/sqrt(in))` in both families.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Model {
    let mut rng = stream_rng(seed, STREAM_INIT);

    let fourier_b = match spec.family {
        Family::Siren => None,
        Family::Fourier => {
            let normal = Normal::new(0.0, spec.fourier_sigma).expect("sigma must be finite");
            let data = (0..spec.fourier_m * 2).map(|_| normal.sample(&mut rng)).collect();
            Some(Mat::from_vec(spec.fourier_m, 2, data))
        }
    };

    let dims = spec.layer_dims();
    let mut layers = Vec::with_capacity(dims.len());
    for (idx, &(out, inp)) in dims.iter().enumerate() {
        let w_bound = match spec.family {
            Family::Siren if idx == 0 => 1.0 / inp as f64,
            Family::Siren => (6.0 / inp as f64).sqrt() / spec.omega0,
            Family::Fourier => (6.0 / inp as f64).sqrt(),
        };
        let b_bound = 1.0 / (inp as f64).sqrt();
        let wdist = Uniform::new(-w_bound, w_bound);
        let bdist = Uniform::new(-b_bound, b_bound);
        let w = Mat::from_vec(out, inp, (0..out * inp).map(|_| rng.sample(wdist)).collect());
        let b = (0..out).map(|_| rng.sample(bdist)).collect();
        layers.push(Layer { w, b });
    }

    Model { spec: spec.clone(), fourier_b, layers }
}

/// Fourier feature encoding: rows of `coords` (`P x 2`) become rows
/// `[sin(2*pi*B*x); cos(2*pi*B*x)]` of length `2m`.
pub fn fourier_encode(b: &Mat, coords: &Mat) -> Mat {
    assert_eq!(b.cols, 2);
    assert_eq!(coords.cols, 2);
    let m = b.rows;
    let phase = matmul(coords, &b.transpose()); // P x m
    let mut out = Mat::zeros(coords.rows, 2 * m);
    let tau = 2.0 * core::f64::consts::PI;
    for p in 0..coords.rows {
        let ph = phase.row(p);
        let row = out.row_mut(p);
        for (j, &v) in ph.iter().enumerate() {
            let (s, c) = crate::fastmath::sin_cos(tau * v);
            row[j] = s;
            row[m + j] = c;
        }
    }
    out
}

/// Render the model on an `height x width` pixel-center grid.
///
/// Evaluation is blocked by pixel rows so memory stays bounded at any
/// resolution; the output is the raw network value (not clamped).
pub fn render(model: &Model, height: usize, width: usize) -> Image {
    let mut img = Image::new(height, width);
    render_into(model, &mut img, None);
    img
}

/// Render with an explicit active-layer set (`None` = all layers), writing
/// into a preallocated image. Partial sets are how progressively decoded
/// prefixes and per-stage snapshots are rendered; see [`nn::forward`] for
/// the composition rule.
pub fn render_into(model: &Model, img: &mut Image, active: Option<&[usize]>) {
    let (height, width) = (img.height, img.width);
    // ~16k pixels per block keeps activation buffers around 16 MB at the
    // widest supported layers.
    let rows_per_block = (16_384 / width.max(1)).max(1);
    let mut i0 = 0;
    while i0 < height {
        let i1 = (i0 + rows_per_block).min(height);
        let mut coords = Mat::zeros((i1 - i0) * width, 2);
        grid_rows_into(&mut coords, height, width, i0, i1);
        let block = nn::forward(model, &coords, active);
        let dst = i0 * width * 3;
        img.data[dst..dst + block.data.len()].copy_from_slice(&block.data);
        i0 = i1;
    }
}
