//! Bias-free GRU cell, its backward pass, layer stacking and unrolling.
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1})
//! r_t = σ(W_r x_t + U_r h_{t-1})
//! ĥ_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}))
//! h_t = (1 - z_t) ⊙ h_{t-1} + z_t ⊙ ĥ_t
//! ```

use crate::error::{check_dim, Error, Result};
use crate::numerics::{sigmoid_scalar, Matrix, Vector};

pub const GATE_NAMES: [&str; 6] = ["w_z", "u_z", "w_r", "u_r", "w_h", "u_h"];

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub w_h: Matrix,
    pub u_h: Matrix,
}

/// Forward intermediates of one step, needed by the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vector,
    pub h_prev: Vector,
    pub z: Vector,
    pub r: Vector,
    pub candidate: Vector,
    pub h: Vector,
}

impl GruLayer {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let wx = || Matrix::zeros(hidden_dim, input_dim);
        let uh = || Matrix::zeros(hidden_dim, hidden_dim);
        Self {
            w_z: wx(),
            u_z: uh(),
            w_r: wx(),
            u_r: uh(),
            w_h: wx(),
            u_h: uh(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn tensors(&self) -> [&Matrix; 6] {
        [&self.w_z, &self.u_z, &self.w_r, &self.u_r, &self.w_h, &self.u_h]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.w_h,
            &mut self.u_h,
        ]
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vector> {
        self.check_inputs(x, h_prev)?;
        Ok(self.forward(x.to_vec(), h_prev.to_vec()).h)
    }

    pub fn check_inputs(&self, x: &[f64], h_prev: &[f64]) -> Result<()> {
        check_dim("gru_step input", self.input_dim(), x.len())?;
        check_dim("gru_step state", self.hidden_dim(), h_prev.len())
    }

    /// Unchecked forward step keeping every intermediate.
    pub(crate) fn forward(&self, x: Vector, h_prev: Vector) -> StepCache {
        let n = self.hidden_dim();
        let mut z = vec![0.0; n];
        self.w_z.matvec_acc(&x, &mut z);
        self.u_z.matvec_acc(&h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

        let mut r = vec![0.0; n];
        self.w_r.matvec_acc(&x, &mut r);
        self.u_r.matvec_acc(&h_prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

        let rh: Vector = r.iter().zip(&h_prev).map(|(a, b)| a * b).collect();
        let mut candidate = vec![0.0; n];
        self.w_h.matvec_acc(&x, &mut candidate);
        self.u_h.matvec_acc(&rh, &mut candidate);
        candidate.iter_mut().for_each(|v| *v = v.tanh());

        let h = (0..n)
            .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
            .collect();
        StepCache {
            x,
            h_prev,
            z,
            r,
            candidate,
            h,
        }
    }

    /// Backpropagates `grad_h` through one step. Parameter gradients are
    /// accumulated into `grads`; input and previous-state gradients are
    /// accumulated into `grad_x` and `grad_h_prev`.
    pub(crate) fn backward(
        &self,
        cache: &StepCache,
        grad_h: &[f64],
        grads: &mut GruLayer,
        grad_x: &mut [f64],
        grad_h_prev: &mut [f64],
    ) {
        let n = self.hidden_dim();
        let StepCache {
            x,
            h_prev,
            z,
            r,
            candidate,
            ..
        } = cache;

        let mut d_cand_pre = vec![0.0; n];
        let mut d_z_pre = vec![0.0; n];
        for i in 0..n {
            let g = grad_h[i];
            grad_h_prev[i] += g * (1.0 - z[i]);
            d_z_pre[i] = g * (candidate[i] - h_prev[i]) * z[i] * (1.0 - z[i]);
            d_cand_pre[i] = g * z[i] * (1.0 - candidate[i] * candidate[i]);
        }

        let rh: Vector = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        grads.w_h.outer_acc(&d_cand_pre, x);
        grads.u_h.outer_acc(&d_cand_pre, &rh);
        self.w_h.matvec_t_acc(&d_cand_pre, grad_x);
        let mut d_rh = vec![0.0; n];
        self.u_h.matvec_t_acc(&d_cand_pre, &mut d_rh);

        let mut d_r_pre = vec![0.0; n];
        for i in 0..n {
            grad_h_prev[i] += d_rh[i] * r[i];
            d_r_pre[i] = d_rh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
        }

        grads.w_r.outer_acc(&d_r_pre, x);
        grads.u_r.outer_acc(&d_r_pre, h_prev);
        self.w_r.matvec_t_acc(&d_r_pre, grad_x);
        self.u_r.matvec_t_acc(&d_r_pre, grad_h_prev);

        grads.w_z.outer_acc(&d_z_pre, x);
        grads.u_z.outer_acc(&d_z_pre, h_prev);
        self.w_z.matvec_t_acc(&d_z_pre, grad_x);
        self.u_z.matvec_t_acc(&d_z_pre, grad_h_prev);
    }
}

/// One GRU step, `h_t` from `x_t` and `h_{t-1}`.
pub fn gru_step(params: &GruLayer, x_t: &[f64], h_prev: &[f64]) -> Result<Vector> {
    params.step(x_t, h_prev)
}

/// Runs one step keeping the intermediates for [`gru_step_backward`].
pub fn gru_step_cached(params: &GruLayer, x_t: &[f64], h_prev: &[f64]) -> Result<StepCache> {
    params.check_inputs(x_t, h_prev)?;
    Ok(params.forward(x_t.to_vec(), h_prev.to_vec()))
}

/// Returns `(∂L/∂x_t, ∂L/∂h_{t-1}, ∂L/∂params)` for upstream `grad_h = ∂L/∂h_t`.
pub fn gru_step_backward(
    params: &GruLayer,
    cache: &StepCache,
    grad_h: &[f64],
) -> Result<(Vector, Vector, GruLayer)> {
    check_dim("gru_step_backward", params.hidden_dim(), grad_h.len())?;
    let mut grads = GruLayer::zeros(params.input_dim(), params.hidden_dim());
    let mut gx = vec![0.0; params.input_dim()];
    let mut gh = vec![0.0; params.hidden_dim()];
    params.backward(cache, grad_h, &mut grads, &mut gx, &mut gh);
    Ok((gx, gh, grads))
}

/// Layers of GRUs where layer `i` consumes the hidden sequence of layer `i-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStack {
    pub layers: Vec<GruLayer>,
}

impl GruStack {
    pub fn zeros(input_dim: usize, hidden_dim: usize, num_layers: usize) -> Result<Self> {
        if num_layers == 0 {
            return Err(Error::InvalidInput("a GRU stack needs at least one layer".into()));
        }
        let layers = (0..num_layers)
            .map(|i| GruLayer::zeros(if i == 0 { input_dim } else { hidden_dim }, hidden_dim))
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<GruLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("a GRU stack needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_dim("GruStack chaining", pair[0].hidden_dim(), pair[1].input_dim())?;
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers.last().map_or(0, GruLayer::hidden_dim)
    }
}

/// Per-layer, per-step forward caches of an unrolled stack.
#[derive(Debug, Clone)]
pub struct Unrolled {
    pub layers: Vec<Vec<StepCache>>,
}

impl Unrolled {
    pub fn states(&self, layer: usize) -> impl Iterator<Item = &Vector> + '_ {
        self.layers[layer].iter().map(|c| &c.h)
    }

    pub fn top_states(&self) -> Vec<Vector> {
        self.layers
            .last()
            .map(|l| l.iter().map(|c| c.h.clone()).collect())
            .unwrap_or_default()
    }

    pub fn top_final(&self) -> &Vector {
        &self.layers.last().and_then(|l| l.last()).expect("non-empty unroll").h
    }

    pub fn len(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Unrolls `stack` over `inputs`. `h0` gives each layer's initial state and
/// defaults to zeros.
pub fn unroll(stack: &GruStack, inputs: &[Vector], h0: Option<&[Vector]>) -> Result<Unrolled> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("cannot unroll an empty sequence".into()));
    }
    for x in inputs {
        check_dim("unroll input", stack.input_dim(), x.len())?;
    }
    if let Some(h0) = h0 {
        check_dim("unroll h0 layers", stack.layers.len(), h0.len())?;
        for (layer, h) in stack.layers.iter().zip(h0) {
            check_dim("unroll h0", layer.hidden_dim(), h.len())?;
        }
    }
    Ok(unroll_unchecked(stack, inputs.to_vec(), h0))
}

pub(crate) fn unroll_unchecked(
    stack: &GruStack,
    inputs: Vec<Vector>,
    h0: Option<&[Vector]>,
) -> Unrolled {
    let mut layers = Vec::with_capacity(stack.layers.len());
    let mut seq = inputs;
    for (l, layer) in stack.layers.iter().enumerate() {
        let h = h0.map_or_else(|| vec![0.0; layer.hidden_dim()], |h0| h0[l].clone());
        let caches = run_layer(layer, seq, h);
        seq = caches.iter().map(|c| c.h.clone()).collect();
        layers.push(caches);
    }
    Unrolled { layers }
}

/// Runs a single layer over `inputs` from initial state `h0`.
pub(crate) fn run_layer(layer: &GruLayer, inputs: Vec<Vector>, h0: Vector) -> Vec<StepCache> {
    let mut h = h0;
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let c = layer.forward(x, h);
        h = c.h.clone();
        caches.push(c);
    }
    caches
}

/// BPTT through one layer. `upstream[t]` is consumed as `∂L/∂h_t` (excluding
/// the recurrent path). Returns the input gradients and `∂L/∂h0`.
pub(crate) fn layer_backward(
    layer: &GruLayer,
    caches: &[StepCache],
    mut upstream: Vec<Vector>,
    grads: &mut GruLayer,
) -> (Vec<Vector>, Vector) {
    let mut carry = vec![0.0; layer.hidden_dim()];
    let mut grad_in = vec![vec![0.0; layer.input_dim()]; caches.len()];
    for t in (0..caches.len()).rev() {
        let mut gh = std::mem::take(&mut upstream[t]);
        crate::numerics::add_assign(&mut gh, &carry);
        let mut next_carry = vec![0.0; layer.hidden_dim()];
        layer.backward(&caches[t], &gh, grads, &mut grad_in[t], &mut next_carry);
        carry = next_carry;
    }
    (grad_in, carry)
}

/// Backpropagation through time. `grad_top[t]` is `∂L/∂h_{top,t}`. Returns the
/// gradients of the inputs and of each layer's initial state; parameter
/// gradients are accumulated into `grads`.
pub fn unroll_backward(
    stack: &GruStack,
    unrolled: &Unrolled,
    grad_top: &[Vector],
    grads: &mut GruStack,
) -> (Vec<Vector>, Vec<Vector>) {
    let (grad_in, grad_h0) = stack_backward(stack, unrolled, grad_top.to_vec(), grads);
    (grad_in, grad_h0)
}

pub(crate) fn stack_backward(
    stack: &GruStack,
    unrolled: &Unrolled,
    grad_top: Vec<Vector>,
    grads: &mut GruStack,
) -> (Vec<Vector>, Vec<Vector>) {
    let mut upstream = grad_top;
    let mut grad_h0 = vec![Vec::new(); stack.layers.len()];
    for l in (0..stack.layers.len()).rev() {
        let (grad_in, gh0) =
            layer_backward(&stack.layers[l], &unrolled.layers[l], upstream, &mut grads.layers[l]);
        grad_h0[l] = gh0;
        upstream = grad_in;
    }
    (upstream, grad_h0)
}
