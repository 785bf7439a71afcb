//! Forward and reverse-mode passes over an active subset of layers.
//!
//! Multi-stage training and progressive decoding both evaluate a model
//! through a *subset* of its layers: the composition of the active layers
//! in forward order, with the usual activation after every active layer
//! except the output. The canonical subsets are a contiguous prefix
//! `{L0..Ls}` plus the output layer — the minimal set `{L0, L_out}` is the
//! smallest mapping the format can express — but any dimensionally
//! composable set is accepted.
//!
//! Training runs thousands of full-batch steps over one fixed coordinate
//! grid, so the hot path is built around a [`Workspace`]: every buffer a
//! step touches (per-position inputs, activation derivatives, output,
//! output gradient, two propagation scratches) is allocated once and
//! overwritten in place. A step performs no heap allocation, and the GEMM
//! calls read transposed operands through strides instead of materializing
//! transposes. The workspace also exploits the structure of staged
//! training: when every layer below chain position `p` is frozen, the
//! inputs at positions `<= p` cannot change between steps, and
//! [`Workspace::forward_from`] restarts the pass at `p` instead of
//! recomputing them.
//!
//! Gradients are exact reverse-mode derivatives of whatever scalar the
//! caller differentiates (the trainer fills d(loss)/d(output) into the
//! workspace). Layers outside the trainable set get no gradient entry at
//! all, which is what makes frozen-layer purity trivially auditable: the
//! optimizer never sees them.

use crate::fastmath::sin_and_dsin;
use crate::linalg::{col_sums_into, matmul_into, matmul_nt_into, matmul_tn_into, Mat};
use crate::models::{Family, Model};

/// Gradient of one layer's parameters.
#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub dw: Mat,
    pub db: Vec<f64>,
}

/// Per-layer gradients, indexed like `model.layers`; `None` for layers
/// that are frozen (or inactive).
pub type Grads = Vec<Option<LayerGrads>>;

/// The full-model active set `[0, 1, .., n+1]`.
pub fn full_active(model: &Model) -> Vec<usize> {
    (0..model.layers.len()).collect()
}

/// Zeroed gradient buffers with a slot for exactly the `trainable` layers.
/// Allocate once and pass to [`Workspace::backward`] every step.
pub fn alloc_grads(model: &Model, trainable: &[usize]) -> Grads {
    (0..model.layers.len())
        .map(|li| {
            if trainable.contains(&li) {
                let layer = &model.layers[li];
                Some(LayerGrads {
                    dw: Mat::zeros(layer.w.rows, layer.w.cols),
                    db: vec![0.0; layer.b.len()],
                })
            } else {
                None
            }
        })
        .collect()
}

/// Chain position (index into `active`) of the lowest trainable layer:
/// the position a staged trainer can restart its forward passes from,
/// because everything below it is frozen.
pub fn lowest_position(active: &[usize], trainable: &[usize]) -> usize {
    active
        .iter()
        .position(|li| trainable.contains(li))
        .expect("at least one trainable layer must be active")
}

fn check_active(model: &Model, active: &[usize]) {
    assert!(!active.is_empty(), "active set is empty");
    assert_eq!(active[0], 0, "active set must start at L0");
    assert_eq!(
        *active.last().unwrap(),
        model.output_index(),
        "active set must end at the output layer"
    );
    assert!(
        active.windows(2).all(|w| w[0] < w[1]),
        "active set must be strictly increasing"
    );
}

/// Encode raw `P x 2` coordinates into the model's input space.
fn encode(model: &Model, coords: &Mat) -> Mat {
    match model.spec.family {
        Family::Siren => coords.clone(),
        Family::Fourier => {
            crate::models::fourier_encode(model.fourier_b.as_ref().unwrap(), coords)
        }
    }
}

/// Activation + derivative for a non-output layer, from pre-activations
/// `z` into caller-owned buffers.
fn activate_into(model: &Model, z: &Mat, a: &mut Mat, d: &mut Mat) {
    debug_assert_eq!((z.rows, z.cols), (a.rows, a.cols));
    debug_assert_eq!((z.rows, z.cols), (d.rows, d.cols));
    match model.spec.family {
        Family::Siren => {
            sin_and_dsin(model.spec.omega0, &z.data, &mut a.data, &mut d.data);
        }
        Family::Fourier => {
            for i in 0..z.data.len() {
                let v = z.data[i];
                let mask = if v > 0.0 { 1.0 } else { 0.0 };
                a.data[i] = v * mask;
                d.data[i] = mask;
            }
        }
    }
}

fn add_bias(z: &mut Mat, b: &[f64]) {
    debug_assert_eq!(z.cols, b.len());
    for r in 0..z.rows {
        for (zi, bi) in z.row_mut(r).iter_mut().zip(b) {
            *zi += bi;
        }
    }
}

/// All state a training step reads and writes, allocated once per
/// (coordinate batch, active set) pair.
///
/// The contract with the trainer: call [`forward`](Workspace::forward)
/// (or [`forward_from`](Workspace::forward_from) when the prefix is
/// provably unchanged), fill the output gradient via
/// [`y_dy_mut`](Workspace::y_dy_mut), then call
/// [`backward`](Workspace::backward). Weights live in the `Model`; the
/// workspace only caches activations, so the same workspace stays valid
/// across weight updates as long as the batch and active set are fixed.
pub struct Workspace {
    active: Vec<usize>,
    /// Input to each chain position; `inputs[0]` is the encoded coordinate
    /// batch, fixed at construction.
    inputs: Vec<Mat>,
    /// Elementwise d(activation)/d(pre-activation) per non-output
    /// position, aligned with `inputs[1..]`.
    dacts: Vec<Mat>,
    /// Raw network output, `P x 3`.
    y: Mat,
    /// d(scalar)/d(output), filled by the caller between passes.
    dy: Mat,
    /// `P x h` scratch: pre-activations on the way up, one parity of the
    /// propagated sensitivity on the way down.
    ping: Mat,
    /// `P x h` scratch: the other parity on the way down.
    pong: Mat,
    /// Highest chain position whose input is populated; guards
    /// [`forward_from`](Workspace::forward_from) against a cold start.
    ready: usize,
}

impl Workspace {
    pub fn new(model: &Model, coords: &Mat, active: &[usize]) -> Workspace {
        check_active(model, active);
        assert_eq!(coords.cols, 2, "coordinates must be P x 2");
        let p = coords.rows;
        let h = model.spec.hidden_width;
        let positions = active.len();
        let mut inputs = Vec::with_capacity(positions);
        inputs.push(encode(model, coords));
        for _ in 1..positions {
            inputs.push(Mat::zeros(p, h));
        }
        let dacts = (0..positions - 1).map(|_| Mat::zeros(p, h)).collect();
        Workspace {
            active: active.to_vec(),
            inputs,
            dacts,
            y: Mat::zeros(p, 3),
            dy: Mat::zeros(p, 3),
            ping: Mat::zeros(p, h),
            pong: Mat::zeros(p, h),
            ready: 0,
        }
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// The output of the last completed forward pass.
    pub fn y(&self) -> &Mat {
        &self.y
    }

    /// Split borrow of the output and the output-gradient buffer, so the
    /// caller can compute d(loss)/d(output) from one into the other.
    pub fn y_dy_mut(&mut self) -> (&Mat, &mut Mat) {
        (&self.y, &mut self.dy)
    }

    /// Full forward pass.
    pub fn forward(&mut self, model: &Model) {
        self.forward_from(model, 0);
    }

    /// Forward pass starting at chain position `from`, reusing the cached
    /// inputs below it. Sound only when no layer at a position `< from`
    /// has changed since the pass that populated those inputs — the staged
    /// trainer guarantees this by construction (the optimizer cannot touch
    /// frozen layers). A position whose input was never populated is
    /// rejected.
    pub fn forward_from(&mut self, model: &Model, from: usize) {
        let last = self.active.len() - 1;
        assert!(from <= last, "start position {from} out of range");
        assert!(
            from <= self.ready,
            "start position {from} not populated yet (ready through {})",
            self.ready
        );
        for c in from..=last {
            let layer = &model.layers[self.active[c]];
            if c == last {
                matmul_nt_into(&mut self.y, &self.inputs[c], &layer.w);
                add_bias(&mut self.y, &layer.b);
            } else {
                matmul_nt_into(&mut self.ping, &self.inputs[c], &layer.w);
                add_bias(&mut self.ping, &layer.b);
                let (ping, inputs, dacts) = (&self.ping, &mut self.inputs, &mut self.dacts);
                activate_into(model, ping, &mut inputs[c + 1], &mut dacts[c]);
            }
        }
        self.ready = last;
    }

    /// Reverse-mode pass from the gradient in `dy` (see
    /// [`y_dy_mut`](Workspace::y_dy_mut)), filling `grads` — which must
    /// come from [`alloc_grads`] for the same `trainable` set — in place.
    /// Propagation stops below the lowest trainable layer: everything
    /// under it is frozen, so its upstream sensitivities are never needed.
    pub fn backward(&mut self, model: &Model, trainable: &[usize], grads: &mut Grads) {
        assert!(
            trainable.iter().all(|t| self.active.contains(t)),
            "trainable layers must be active"
        );
        assert_eq!(grads.len(), model.layers.len(), "gradient slots misshapen");
        let last = self.active.len() - 1;
        assert_eq!(self.ready, last, "backward requires a completed forward pass");
        let lowest = lowest_position(&self.active, trainable);

        // Output position: its incoming sensitivity is `dy` itself.
        let li = self.active[last];
        if trainable.contains(&li) {
            let g = grads[li].as_mut().expect("trainable layer without a gradient slot");
            matmul_tn_into(&mut g.dw, &self.dy, &self.inputs[last]);
            col_sums_into(&self.dy, &mut g.db);
        }
        if last == lowest {
            return;
        }
        // d(pre-activation of the position below) = (dz * W) ⊙ dact.
        matmul_into(&mut self.ping, &self.dy, &model.layers[li].w);
        for (v, d) in self.ping.data.iter_mut().zip(&self.dacts[last - 1].data) {
            *v *= d;
        }

        // Now the sensitivity for position c always sits in `ping`.
        for c in (lowest..last).rev() {
            let li = self.active[c];
            if trainable.contains(&li) {
                let g = grads[li].as_mut().expect("trainable layer without a gradient slot");
                matmul_tn_into(&mut g.dw, &self.ping, &self.inputs[c]);
                col_sums_into(&self.ping, &mut g.db);
            }
            if c == lowest {
                break;
            }
            matmul_into(&mut self.pong, &self.ping, &model.layers[li].w);
            for (v, d) in self.pong.data.iter_mut().zip(&self.dacts[c - 1].data) {
                *v *= d;
            }
            std::mem::swap(&mut self.ping, &mut self.pong);
        }
    }
}

/// Inference-only forward pass with fresh, rolling buffers (peak memory is
/// a few `P x h` matrices regardless of depth, which matters when
/// rendering large grids). `active = None` means all layers.
pub fn forward(model: &Model, coords: &Mat, active: Option<&[usize]>) -> Mat {
    let full;
    let active = match active {
        Some(a) => a,
        None => {
            full = full_active(model);
            &full
        }
    };
    check_active(model, active);
    let p = coords.rows;
    let h = model.spec.hidden_width;
    let mut a = encode(model, coords);
    let mut z = Mat::zeros(p, h);
    let mut d = Mat::zeros(p, h);
    for (c, &li) in active.iter().enumerate() {
        let layer = &model.layers[li];
        if c + 1 == active.len() {
            let mut y = Mat::zeros(p, layer.w.rows);
            matmul_nt_into(&mut y, &a, &layer.w);
            add_bias(&mut y, &layer.b);
            return y;
        }
        matmul_nt_into(&mut z, &a, &layer.w);
        add_bias(&mut z, &layer.b);
        if a.cols != h {
            // The encoding width differs from the hidden width; swap in a
            // correctly shaped activation buffer after the first layer.
            a = Mat::zeros(p, h);
        }
        activate_into(model, &z, &mut a, &mut d);
    }
    unreachable!("active set is non-empty");
}
