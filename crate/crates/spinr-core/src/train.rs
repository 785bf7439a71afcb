//! Fitting loops: the standard full-batch loop and the multi-stage
//! (progressive) procedure, plus the finite-difference gradient audit.
//!
//! Both loops are full-batch — the loss sums over every pixel and channel,
//! so one step sees the whole image — and bit-deterministic for a fixed
//! seed. The multi-stage procedure grows the network stage by stage:
//! stage 1 trains only the smallest possible mapping `{L0, L_out}`;
//! stage `s > 1` splices hidden layer `L_{s-1}` into the forward path and
//! trains *only* that layer, leaving everything already trained frozen.
//! The output layer therefore stops training after stage 1 and acts as a
//! fixed read-out that every later layer must refine through.

use crate::adam::{Adam, AdamConfig};
use crate::error::TrainError;
use crate::image::{coord_grid, Image};
use crate::linalg::Mat;
use crate::models::{build_model, render_into, Family, Model, ModelSpec};
use crate::nn::{alloc_grads, forward, full_active, lowest_position, Workspace};

/// Default learning rate per family.
pub fn default_lr(family: Family) -> f64 {
    match family {
        Family::Siren => 1e-4,
        Family::Fourier => 1e-3,
    }
}

/// Default step budget.
pub const DEFAULT_TOTAL_STEPS: usize = 2000;

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Record a PSNR snapshot every this many steps (0 = never). Snapshots
    /// are derived from the training loss of the step's forward pass.
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn for_family(family: Family, seed: u64) -> Self {
        TrainConfig {
            total_steps: DEFAULT_TOTAL_STEPS,
            lr: default_lr(family),
            seed,
            eval_every: 0,
        }
    }
}

/// Sum-of-squares reconstruction loss over all pixels and channels; the
/// gradient `2 * (pred - target)` is written into `grad` (on the hot path,
/// the workspace's output-gradient buffer).
pub fn l2_loss_and_grad_into(pred: &Mat, target: &Mat, grad: &mut Mat) -> f64 {
    assert_eq!((pred.rows, pred.cols), (target.rows, target.cols), "shape mismatch");
    assert_eq!((grad.rows, grad.cols), (pred.rows, pred.cols), "shape mismatch");
    let mut loss = 0.0;
    for i in 0..pred.data.len() {
        let d = pred.data[i] - target.data[i];
        loss += d * d;
        grad.data[i] = 2.0 * d;
    }
    loss
}

/// Fresh-allocation convenience wrapper around [`l2_loss_and_grad_into`].
pub fn l2_loss_and_grad(pred: &Mat, target: &Mat) -> (f64, Mat) {
    let mut grad = Mat::zeros(pred.rows, pred.cols);
    let loss = l2_loss_and_grad_into(pred, target, &mut grad);
    (loss, grad)
}

/// Loss only (used where the gradient is not needed).
pub fn l2_loss(pred: &Mat, target: &Mat) -> f64 {
    assert_eq!((pred.rows, pred.cols), (target.rows, target.cols), "shape mismatch");
    pred.data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| (p - t) * (p - t))
        .sum()
}

/// Result of a single-phase fit.
pub struct FitResult {
    pub model: Model,
    /// `loss_curve[k]` is the loss after `k` updates; index 0 is the loss
    /// at initialization, so the curve has `total_steps + 1` entries.
    pub loss_curve: Vec<f64>,
    /// `(step, psnr)` snapshots at the configured cadence.
    pub evals: Vec<(usize, f64)>,
}

/// One stage of the progressive schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    /// Layers updated during this stage.
    pub trainable: Vec<usize>,
    /// Layers composed in the forward path during this stage.
    pub active: Vec<usize>,
    /// Optimization steps allotted to this stage.
    pub budget: usize,
}

/// The per-stage plan: which layers are spliced in and trained when.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSchedule {
    pub stages: Vec<Stage>,
}

impl StageSchedule {
    /// The canonical `n + 1`-stage schedule with an equal split of
    /// `total_steps` (any remainder goes to the last stage): stage 1
    /// trains `{L0, L_out}`, stage `s > 1` trains `{L_{s-1}}` with active
    /// set `{L0..L_{s-1}, L_out}`.
    pub fn equal_split(spec: &ModelSpec, total_steps: usize) -> StageSchedule {
        let n = spec.hidden_layers;
        let out = spec.layer_count() - 1;
        let stages_n = n + 1;
        let base = total_steps / stages_n;
        let mut stages = Vec::with_capacity(stages_n);
        for s in 1..=stages_n {
            let trainable = if s == 1 { vec![0, out] } else { vec![s - 1] };
            let mut active: Vec<usize> = (0..s).collect();
            active.push(out);
            let budget = if s == stages_n { total_steps - base * n } else { base };
            stages.push(Stage { trainable, active, budget });
        }
        StageSchedule { stages }
    }

    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.budget).sum()
    }
}

/// Result of a multi-stage fit.
pub struct SpinrResult {
    pub model: Model,
    /// Concatenated per-step losses across stages (each measured through
    /// that stage's active set), with the post-final-update loss appended;
    /// `total_steps + 1` entries.
    pub loss_curve: Vec<f64>,
    /// Render through each stage's active set after the stage completes,
    /// at the training resolution (raw values, not clamped).
    pub stage_renders: Vec<Image>,
    /// Cumulative step count at each stage boundary.
    pub stage_ends: Vec<usize>,
}

fn psnr_from_loss(loss: f64, samples: usize) -> f64 {
    let mse = loss / samples as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Train all dense layers jointly for `cfg.total_steps` steps. The Fourier
/// projection `B` is not a dense layer and never trains.
pub fn fit(spec: &ModelSpec, image: &Image, cfg: &TrainConfig) -> Result<FitResult, TrainError> {
    let mut model = build_model(spec, cfg.seed);
    let coords = coord_grid(image.height, image.width);
    let target = image.to_target();
    let active = full_active(&model);
    let trainable = active.clone();
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr), &model, &trainable);
    let mut ws = Workspace::new(&model, &coords, &active);
    let mut grads = alloc_grads(&model, &trainable);

    let mut loss_curve = Vec::with_capacity(cfg.total_steps + 1);
    let mut evals = Vec::new();
    for step in 0..cfg.total_steps {
        ws.forward(&model);
        let (y, dy) = ws.y_dy_mut();
        let loss = l2_loss_and_grad_into(y, &target, dy);
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { step: step as u32 });
        }
        loss_curve.push(loss);
        if cfg.eval_every > 0 && step % cfg.eval_every == 0 {
            evals.push((step, psnr_from_loss(loss, target.data.len())));
        }
        ws.backward(&model, &trainable, &mut grads);
        opt.step(&mut model, &grads);
    }
    ws.forward(&model);
    let final_loss = l2_loss(ws.y(), &target);
    if !final_loss.is_finite() {
        return Err(TrainError::NonFinite { step: cfg.total_steps as u32 });
    }
    loss_curve.push(final_loss);
    Ok(FitResult { model, loss_curve, evals })
}

/// Run the multi-stage procedure under `schedule`.
///
/// Every stage gets a fresh optimizer (moment estimates from one stage's
/// landscape mean nothing on the next) and updates exactly the stage's
/// trainable layers; all other parameters are bit-identical before and
/// after the stage. Freezing also pays for itself: below a stage's lowest
/// trainable layer the activations cannot change, so after the stage's
/// first step each forward pass restarts at that layer instead of
/// recomputing the frozen prefix.
pub fn fit_spinr(
    spec: &ModelSpec,
    image: &Image,
    cfg: &TrainConfig,
    schedule: &StageSchedule,
) -> Result<SpinrResult, TrainError> {
    let mut model = build_model(spec, cfg.seed);
    let coords = coord_grid(image.height, image.width);
    let target = image.to_target();

    let total: usize = schedule.total_steps();
    let mut loss_curve = Vec::with_capacity(total + 1);
    let mut stage_renders = Vec::with_capacity(schedule.stages.len());
    let mut stage_ends = Vec::with_capacity(schedule.stages.len());
    let mut done = 0usize;

    for stage in &schedule.stages {
        let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr), &model, &stage.trainable);
        let mut ws = Workspace::new(&model, &coords, &stage.active);
        let mut grads = alloc_grads(&model, &stage.trainable);
        let restart = lowest_position(&stage.active, &stage.trainable);
        for k in 0..stage.budget {
            if k == 0 {
                ws.forward(&model);
            } else {
                ws.forward_from(&model, restart);
            }
            let (y, dy) = ws.y_dy_mut();
            let loss = l2_loss_and_grad_into(y, &target, dy);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { step: (done + k) as u32 });
            }
            loss_curve.push(loss);
            ws.backward(&model, &stage.trainable, &mut grads);
            opt.step(&mut model, &grads);
        }
        done += stage.budget;
        stage_ends.push(done);
        let mut snap = Image::new(image.height, image.width);
        render_into(&model, &mut snap, Some(&stage.active));
        stage_renders.push(snap);
    }

    let final_active = schedule.stages.last().expect("non-empty schedule").active.clone();
    let final_loss = l2_loss(&forward(&model, &coords, Some(&final_active)), &target);
    if !final_loss.is_finite() {
        return Err(TrainError::NonFinite { step: total as u32 });
    }
    loss_curve.push(final_loss);
    Ok(SpinrResult { model, loss_curve, stage_renders, stage_ends })
}

/// Maximum relative error between analytic gradients and central finite
/// differences of the summed L2 loss, over every parameter of every layer.
///
/// Uses step `h` on each parameter in turn; the relative denominator is
/// floored at 1e-3 so parameters whose true gradient is tiny are compared
/// at that absolute scale instead of dividing finite-difference noise by
/// a near-zero number.
pub fn grad_check_max_rel_err(model: &Model, coords: &Mat, target: &Mat, h: f64) -> f64 {
    let active = full_active(model);
    let mut ws = Workspace::new(model, coords, &active);
    ws.forward(model);
    let (y, dy) = ws.y_dy_mut();
    l2_loss_and_grad_into(y, target, dy);
    let mut grads = alloc_grads(model, &active);
    ws.backward(model, &active, &mut grads);

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut check = |analytic: f64, fd: f64| {
        let denom = analytic.abs().max(fd.abs()).max(1e-3);
        worst = worst.max((analytic - fd).abs() / denom);
    };
    let eval = |m: &Model| l2_loss(&forward(m, coords, None), target);

    for (li, grad) in grads.iter().enumerate() {
        let g = grad.as_ref().expect("all layers trainable here");
        for idx in 0..model.layers[li].w.data.len() {
            let orig = probe.layers[li].w.data[idx];
            probe.layers[li].w.data[idx] = orig + h;
            let up = eval(&probe);
            probe.layers[li].w.data[idx] = orig - h;
            let dn = eval(&probe);
            probe.layers[li].w.data[idx] = orig;
            check(g.dw.data[idx], (up - dn) / (2.0 * h));
        }
        for idx in 0..model.layers[li].b.len() {
            let orig = probe.layers[li].b[idx];
            probe.layers[li].b[idx] = orig + h;
            let up = eval(&probe);
            probe.layers[li].b[idx] = orig - h;
            let dn = eval(&probe);
            probe.layers[li].b[idx] = orig;
            check(g.db[idx], (up - dn) / (2.0 * h));
        }
    }
    worst
}

/// Smallest absolute ReLU pre-activation across the forward pass (Fourier
/// family). Finite differences are only trustworthy when no unit sits
/// within the probe step of its kink; callers assert this margin before
/// trusting [`grad_check_max_rel_err`] on ReLU networks.
pub fn min_relu_margin(model: &Model, coords: &Mat) -> f64 {
    assert_eq!(model.spec.family, Family::Fourier);
    let active = full_active(model);
    let mut a = crate::models::fourier_encode(model.fourier_b.as_ref().unwrap(), coords);
    let mut margin = f64::INFINITY;
    for (c, &li) in active.iter().enumerate() {
        let layer = &model.layers[li];
        let mut z = crate::linalg::matmul(&a, &layer.w.transpose());
        for r in 0..z.rows {
            for (zi, bi) in z.row_mut(r).iter_mut().zip(&layer.b) {
                *zi += bi;
            }
        }
        if c + 1 == active.len() {
            break;
        }
        for &v in &z.data {
            margin = margin.min(v.abs());
        }
        for v in &mut z.data {
            *v = v.max(0.0);
        }
        a = z;
    }
    margin
}
