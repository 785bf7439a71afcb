//! Attack harness: parameter noise, lost neurons, layer corruption, and
//! repeated-trial evaluation.
//!
//! All perturbations are pure — they return a modified copy and never
//! touch the input model. Losing a neuron zeroes its incoming weight row
//! and bias (not its outgoing column), so the unit's post-activation
//! output becomes exactly α(0), which is 0 for both sine and relu; the
//! outgoing-column alternative would be a one-line change in
//! [`lose_neurons_with`]. Neurons are sampled uniformly over the union of
//! hidden layers without per-layer stratification; the first and output
//! layers can only be hit wholesale through [`corrupt_layer`]. Noise is
//! applied to every dense weight and bias but not to a Fourier feature
//! matrix, which is frozen architecture rather than a fitted parameter.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::image::Image;
use crate::metrics::{aggregate, psnr, ssim, Aggregate, SSIM_WINDOW};
use crate::models::{render, Model};
use crate::rng::{stream_rng, trial_rng, STREAM_ATTACK};

/// One attack family with its strength parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttackKind {
    /// Add N(0, σ²) noise to every dense weight and bias.
    ParamNoise { sigma: f64 },
    /// Zero the incoming row and bias of `k` distinct hidden neurons.
    LoseNeurons { k: usize },
    /// Zero one whole dense layer (weights and biases).
    CorruptLayer { layer: usize },
}

/// An attack plus its evaluation protocol.
#[derive(Clone, Copy, Debug)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub trials: usize,
    pub seed: u64,
}

/// Total number of neurons eligible for [`lose_neurons`]: the units of
/// hidden layers 1..=n (the first layer's units are excluded).
pub fn hidden_neuron_count(model: &Model) -> usize {
    model.spec.hidden_layers * model.spec.hidden_width
}

/// Perturb all dense parameters with Gaussian noise of standard
/// deviation `sigma`. `sigma = 0` returns an exact copy.
pub fn add_param_noise(model: &Model, sigma: f64, seed: u64) -> Model {
    add_param_noise_with(model, sigma, &mut stream_rng(seed, STREAM_ATTACK))
}

fn add_param_noise_with(model: &Model, sigma: f64, rng: &mut ChaCha8Rng) -> Model {
    assert!(sigma >= 0.0, "noise level must be non-negative");
    let mut out = model.clone();
    if sigma == 0.0 {
        return out;
    }
    for layer in &mut out.layers {
        for w in layer.w.data.iter_mut().chain(layer.b.iter_mut()) {
            *w += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

/// Zero `k` distinct hidden neurons chosen uniformly at random.
///
/// Panics if `k` exceeds the hidden-neuron count.
pub fn lose_neurons(model: &Model, k: usize, seed: u64) -> Model {
    lose_neurons_with(model, k, &mut stream_rng(seed, STREAM_ATTACK))
}

fn lose_neurons_with(model: &Model, k: usize, rng: &mut ChaCha8Rng) -> Model {
    let total = hidden_neuron_count(model);
    assert!(k <= total, "cannot lose {k} of {total} hidden neurons");
    let h = model.spec.hidden_width;
    let mut out = model.clone();
    for idx in rand::seq::index::sample(rng, total, k) {
        let layer = &mut out.layers[1 + idx / h];
        let unit = idx % h;
        layer.w.row_mut(unit).fill(0.0);
        layer.b[unit] = 0.0;
    }
    out
}

/// Zero one dense layer outright (weights and biases).
///
/// Panics on an out-of-range layer index.
pub fn corrupt_layer(model: &Model, layer: usize) -> Model {
    assert!(layer < model.layers.len(), "layer index out of range");
    let mut out = model.clone();
    out.layers[layer].w.fill_zero();
    out.layers[layer].b.fill(0.0);
    out
}

/// Per-trial metrics and their aggregates for one attack.
#[derive(Clone, Debug)]
pub struct AttackOutcome {
    /// PSNR of the clean render against the target.
    pub base_psnr: f64,
    pub base_ssim: Option<f64>,
    /// One entry per trial, in trial order.
    pub psnr: Vec<f64>,
    pub ssim: Option<Vec<f64>>,
    pub psnr_stats: Aggregate,
    pub ssim_stats: Option<Aggregate>,
}

/// Run `attack.trials` independent perturbations of `model`, rendering
/// each and scoring it against `image`. Every trial draws from its own
/// RNG substream, so outcomes are reproducible and order-independent.
/// SSIM is reported only when the image fits at least one 11×11 window.
pub fn run_trials(model: &Model, image: &Image, attack: &AttackSpec) -> AttackOutcome {
    assert!(attack.trials >= 1, "at least one trial required");
    let with_ssim = image.height >= SSIM_WINDOW && image.width >= SSIM_WINDOW;
    let clean = render(model, image.height, image.width);
    let base_psnr = psnr(image, &clean);
    let base_ssim = with_ssim.then(|| ssim(image, &clean));

    let mut psnrs = Vec::with_capacity(attack.trials);
    let mut ssims = with_ssim.then(|| Vec::with_capacity(attack.trials));
    for t in 0..attack.trials {
        let mut rng = trial_rng(attack.seed, STREAM_ATTACK, t as u64);
        let perturbed = match attack.kind {
            AttackKind::ParamNoise { sigma } => add_param_noise_with(model, sigma, &mut rng),
            AttackKind::LoseNeurons { k } => lose_neurons_with(model, k, &mut rng),
            AttackKind::CorruptLayer { layer } => corrupt_layer(model, layer),
        };
        let rendered = render(&perturbed, image.height, image.width);
        psnrs.push(psnr(image, &rendered));
        if let Some(s) = ssims.as_mut() {
            s.push(ssim(image, &rendered));
        }
    }
    let psnr_stats = aggregate(&psnrs);
    let ssim_stats = ssims.as_deref().map(aggregate);
    AttackOutcome { base_psnr, base_ssim, psnr: psnrs, ssim: ssims, psnr_stats, ssim_stats }
}
