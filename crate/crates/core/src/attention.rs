//! Additive attention over the word-level states of the most recent context
//! sentence.
//!
//! `e_j = v_a · tanh(W_a h_dec + U_a h_j)`, `a = softmax(e)`, `s_t = Σ a_j h_j`.

use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, softmax, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `attn_dim × dec_hidden`
    pub w_a: Matrix,
    /// `attn_dim × word_hidden`
    pub u_a: Matrix,
    /// `attn_dim × 1`
    pub v_a: Matrix,
}

impl AttentionParams {
    pub fn zeros(attn_dim: usize, dec_hidden: usize, word_hidden: usize) -> Self {
        Self {
            w_a: Matrix::zeros(attn_dim, dec_hidden),
            u_a: Matrix::zeros(attn_dim, word_hidden),
            v_a: Matrix::zeros(attn_dim, 1),
        }
    }

    pub fn attn_dim(&self) -> usize {
        self.w_a.rows()
    }

    pub fn dec_hidden(&self) -> usize {
        self.w_a.cols()
    }

    pub fn word_hidden(&self) -> usize {
        self.u_a.cols()
    }

    pub fn tensors(&self) -> [&Matrix; 3] {
        [&self.w_a, &self.u_a, &self.v_a]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.w_a, &mut self.u_a, &mut self.v_a]
    }

    /// `U_a h_j` for every encoder state; constant across decoding steps.
    pub(crate) fn keys(&self, enc_states: &[Vector]) -> Vec<Vector> {
        enc_states
            .iter()
            .map(|h| {
                let mut k = vec![0.0; self.attn_dim()];
                self.u_a.matvec_acc(h, &mut k);
                k
            })
            .collect()
    }

    pub(crate) fn forward(&self, h_dec: &[f64], enc_states: &[Vector], keys: &[Vector]) -> AttentionStep {
        let mut query = vec![0.0; self.attn_dim()];
        self.w_a.matvec_acc(h_dec, &mut query);
        let v = self.v_a.data();
        let hidden: Vec<Vector> = keys
            .iter()
            .map(|k| query.iter().zip(k).map(|(q, k)| (q + k).tanh()).collect())
            .collect();
        let scores: Vector = hidden.iter().map(|u| dot(v, u)).collect();
        let weights = softmax(&scores);
        let context = weighted_sum(&weights, enc_states);
        AttentionStep {
            hidden,
            weights,
            context,
        }
    }

    /// Backward through one attention step given `∂L/∂context`. Gradients of
    /// the keys are accumulated into `grad_keys` and folded into `U_a` and the
    /// encoder states by [`AttentionParams::finish_keys_backward`].
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward(
        &self,
        step: &AttentionStep,
        h_dec: &[f64],
        enc_states: &[Vector],
        grad_context: &[f64],
        grads: &mut AttentionParams,
        grad_h_dec: &mut [f64],
        grad_enc: &mut [Vector],
        grad_keys: &mut [Vector],
    ) {
        let a = &step.weights;
        let mut grad_weights = Vec::with_capacity(a.len());
        for (j, h) in enc_states.iter().enumerate() {
            grad_weights.push(dot(grad_context, h));
            crate::numerics::axpy(a[j], grad_context, &mut grad_enc[j]);
        }
        let grad_scores = crate::numerics::softmax_backward(a, &grad_weights);

        let v = self.v_a.data();
        let mut grad_query = vec![0.0; self.attn_dim()];
        for (j, u) in step.hidden.iter().enumerate() {
            let ge = grad_scores[j];
            if ge == 0.0 {
                continue;
            }
            crate::numerics::axpy(ge, u, grads.v_a.data_mut());
            for i in 0..u.len() {
                let d = ge * v[i] * (1.0 - u[i] * u[i]);
                grad_query[i] += d;
                grad_keys[j][i] += d;
            }
        }
        grads.w_a.outer_acc(&grad_query, h_dec);
        self.w_a.matvec_t_acc(&grad_query, grad_h_dec);
    }

    pub(crate) fn finish_keys_backward(
        &self,
        enc_states: &[Vector],
        grad_keys: &[Vector],
        grads: &mut AttentionParams,
        grad_enc: &mut [Vector],
    ) {
        for ((h, gk), ge) in enc_states.iter().zip(grad_keys).zip(grad_enc.iter_mut()) {
            grads.u_a.outer_acc(gk, h);
            self.u_a.matvec_t_acc(gk, ge);
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionStep {
    pub hidden: Vec<Vector>,
    pub weights: Vector,
    pub context: Vector,
}

fn weighted_sum(weights: &[f64], states: &[Vector]) -> Vector {
    let mut out = vec![0.0; states[0].len()];
    for (w, h) in weights.iter().zip(states) {
        crate::numerics::axpy(*w, h, &mut out);
    }
    out
}

fn check_states(params: &AttentionParams, enc_states: &[Vector]) -> Result<()> {
    if enc_states.is_empty() {
        return Err(Error::InvalidInput("attention over an empty state sequence".into()));
    }
    for h in enc_states {
        check_dim("attention encoder state", params.word_hidden(), h.len())?;
    }
    Ok(())
}

/// Attention weights of the decoder state `h_dec_prev` over `enc_states`.
pub fn attention_scores(
    params: &AttentionParams,
    h_dec_prev: &[f64],
    enc_states: &[Vector],
) -> Result<Vector> {
    check_states(params, enc_states)?;
    check_dim("attention decoder state", params.dec_hidden(), h_dec_prev.len())?;
    let keys = params.keys(enc_states);
    Ok(params.forward(h_dec_prev, enc_states, &keys).weights)
}

/// Convex combination `Σ_j weights[j] · enc_states[j]`.
pub fn attention_context(weights: &[f64], enc_states: &[Vector]) -> Result<Vector> {
    if enc_states.is_empty() {
        return Err(Error::InvalidInput("attention over an empty state sequence".into()));
    }
    check_dim("attention_context", enc_states.len(), weights.len())?;
    let dim = enc_states[0].len();
    for h in enc_states {
        check_dim("attention_context state", dim, h.len())?;
    }
    Ok(weighted_sum(weights, enc_states))
}

/// Gradients of `L` given `∂L/∂context` for one full attention read:
/// returns `(grads, ∂L/∂h_dec_prev, ∂L/∂enc_states)`.
pub fn attention_backward(
    params: &AttentionParams,
    h_dec_prev: &[f64],
    enc_states: &[Vector],
    grad_context: &[f64],
) -> Result<(AttentionParams, Vector, Vec<Vector>)> {
    check_states(params, enc_states)?;
    check_dim("attention decoder state", params.dec_hidden(), h_dec_prev.len())?;
    check_dim("attention grad", params.word_hidden(), grad_context.len())?;
    let keys = params.keys(enc_states);
    let step = params.forward(h_dec_prev, enc_states, &keys);
    let mut grads = AttentionParams::zeros(params.attn_dim(), params.dec_hidden(), params.word_hidden());
    let mut grad_h = vec![0.0; params.dec_hidden()];
    let mut grad_enc = vec![vec![0.0; params.word_hidden()]; enc_states.len()];
    let mut grad_keys = vec![vec![0.0; params.attn_dim()]; enc_states.len()];
    params.backward(
        &step,
        h_dec_prev,
        enc_states,
        grad_context,
        &mut grads,
        &mut grad_h,
        &mut grad_enc,
        &mut grad_keys,
    );
    params.finish_keys_backward(enc_states, &grad_keys, &mut grads, &mut grad_enc);
    Ok((grads, grad_h, grad_enc))
}
