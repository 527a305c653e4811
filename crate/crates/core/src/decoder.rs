//! GRU decoder conditioned on the encoded context.
//!
//! At step `t` the conditioning vector `c_t` is the attention read over the
//! last context sentence (attention variant) or the fixed sentence-level state
//! `s` (other variants). The GRU consumes `[embed(w_{t-1}); c_t]` and the
//! output layer scores `W_out [h_t; c_t] + b_out`. The initial state is `s`.

use crate::attention::AttentionStep;
use crate::corpus::{TokenId, TrainingExample, GO};
use crate::encoder::{self, EncodedContext};
use crate::error::{check_dim, Error, Result};
use crate::gru::StepCache;
use crate::model::Model;
use crate::numerics::{add_assign, cross_entropy, Vector};

/// Output of one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    pub h: Vector,
    pub logits: Vector,
    /// Attention weights; empty for variants without attention.
    pub weights: Vector,
}

/// An encoded context prepared for repeated decoder steps.
#[derive(Debug, Clone)]
pub struct DecodingContext<'m> {
    model: &'m Model,
    pub encoded: EncodedContext,
    keys: Vec<Vector>,
}

impl<'m> DecodingContext<'m> {
    pub fn new(model: &'m Model, encoded: EncodedContext) -> Result<Self> {
        check_dim("decoder initial state", model.decoder.layer.hidden_dim(), encoded.s.len())?;
        let keys = match &model.attention {
            Some(a) => {
                if encoded.last_sentence_states.is_empty() {
                    return Err(Error::InvalidInput("attention needs at least one encoder state".into()));
                }
                for h in &encoded.last_sentence_states {
                    check_dim("attention encoder state", a.word_hidden(), h.len())?;
                }
                a.keys(&encoded.last_sentence_states)
            }
            None => Vec::new(),
        };
        Ok(Self {
            model,
            encoded,
            keys,
        })
    }

    /// Encodes `context` (a window of framed sentences) with `model`.
    pub fn encode(model: &'m Model, context: &[Vec<TokenId>]) -> Result<Self> {
        let input = model.encoder_input(context);
        let encoded = encoder::encode_context(&model.encoder, &input)?;
        Self::new(model, encoded)
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn initial_state(&self) -> Vector {
        self.encoded.s.clone()
    }

    pub fn step(&self, h_prev: &[f64], w_prev: TokenId) -> Result<DecoderOutput> {
        check_dim("decoder state", self.model.decoder.layer.hidden_dim(), h_prev.len())?;
        if w_prev >= self.model.vocab_size() {
            return Err(Error::InvalidInput(format!(
                "token id {w_prev} out of range for vocabulary of {}",
                self.model.vocab_size()
            )));
        }
        let s = self.forward_step(h_prev, w_prev);
        Ok(DecoderOutput {
            h: s.gru.h,
            logits: s.logits,
            weights: s.attention.map(|a| a.weights).unwrap_or_default(),
        })
    }

    fn forward_step(&self, h_prev: &[f64], w_prev: TokenId) -> StepTrace {
        let model = self.model;
        let attention = model.attention.as_ref().map(|a| {
            a.forward(h_prev, &self.encoded.last_sentence_states, &self.keys)
        });
        let cond = match &attention {
            Some(a) => a.context.clone(),
            None => self.encoded.s.clone(),
        };
        let mut x = model.encoder.embedding.row(w_prev).to_vec();
        x.extend_from_slice(&cond);
        let gru = model.decoder.layer.forward(x, h_prev.to_vec());
        let mut out = gru.h.clone();
        out.extend_from_slice(&cond);
        let mut logits = model.decoder.b_out.data().to_vec();
        model.decoder.w_out.matvec_acc(&out, &mut logits);
        StepTrace {
            attention,
            gru,
            out,
            logits,
        }
    }
}

struct StepTrace {
    attention: Option<AttentionStep>,
    gru: StepCache,
    out: Vector,
    logits: Vector,
}

/// One decoder step: attention read keyed by `h_prev` (if any), GRU update on
/// `[embed(w_prev); c_t]`, and the output logits.
pub fn decoder_step(
    model: &Model,
    h_prev: &[f64],
    w_prev: TokenId,
    ctx: &EncodedContext,
) -> Result<DecoderOutput> {
    DecodingContext::new(model, ctx.clone())?.step(h_prev, w_prev)
}

fn check_example(model: &Model, example: &TrainingExample) -> Result<()> {
    if example.target.len() < 2 || example.target[0] != GO {
        return Err(Error::InvalidInput(
            "target must be framed as (go, ..., eos)".into(),
        ));
    }
    let v = model.vocab_size();
    if let Some(&bad) = example.target.iter().find(|&&t| t >= v) {
        return Err(Error::InvalidInput(format!("target token {bad} out of range")));
    }
    Ok(())
}

/// Mean per-token cross-entropy of the gold target under teacher forcing.
pub fn teacher_forced_loss_value(model: &Model, example: &TrainingExample) -> Result<f64> {
    check_example(model, example)?;
    let ctx = DecodingContext::encode(model, &example.context)?;
    let mut h = ctx.initial_state();
    let steps = example.target.len() - 1;
    let mut total = 0.0;
    for t in 0..steps {
        let s = ctx.forward_step(&h, example.target[t]);
        total += cross_entropy(&s.logits, example.target[t + 1])?.0;
        h = s.gru.h;
    }
    Ok(total / steps as f64)
}

/// Number of target positions whose argmax prediction equals the gold token
/// under teacher forcing, and the number of positions.
pub fn teacher_forced_accuracy(model: &Model, example: &TrainingExample) -> Result<(usize, usize)> {
    check_example(model, example)?;
    let ctx = DecodingContext::encode(model, &example.context)?;
    let mut h = ctx.initial_state();
    let steps = example.target.len() - 1;
    let mut correct = 0;
    for t in 0..steps {
        let s = ctx.forward_step(&h, example.target[t]);
        if argmax(&s.logits) == example.target[t + 1] {
            correct += 1;
        }
        h = s.gru.h;
    }
    Ok((correct, steps))
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Loss and full gradient for one example.
pub fn teacher_forced_loss(model: &Model, example: &TrainingExample) -> Result<(f64, Model)> {
    let mut grads = model.zeros_like();
    let loss = accumulate_gradients(model, example, 1.0, &mut grads)?;
    Ok((loss, grads))
}

/// Adds `scale · ∂loss/∂params` into `grads` and returns the (unscaled) loss.
pub fn accumulate_gradients(
    model: &Model,
    example: &TrainingExample,
    scale: f64,
    grads: &mut Model,
) -> Result<f64> {
    check_example(model, example)?;
    let input = model.encoder_input(&example.context);
    let trace = encoder::forward(&model.encoder, &input)?;
    let ctx = DecodingContext::new(model, trace.encoded())?;

    let steps = example.target.len() - 1;
    let mut traces = Vec::with_capacity(steps);
    let mut h = ctx.initial_state();
    let mut total = 0.0;
    let mut grad_logits = Vec::with_capacity(steps);
    for t in 0..steps {
        let s = ctx.forward_step(&h, example.target[t]);
        let (loss, g) = cross_entropy(&s.logits, example.target[t + 1])?;
        total += loss;
        grad_logits.push(g);
        h = s.gru.h.clone();
        traces.push(s);
    }
    let step_scale = scale / steps as f64;

    let dims = model.dims();
    let dec_hidden = dims.dec_hidden;
    let embed_dim = dims.embed_dim;
    let last_states = &ctx.encoded.last_sentence_states;
    let mut grad_s = vec![0.0; dims.sent_hidden];
    let mut grad_last = vec![vec![0.0; dims.word_hidden]; last_states.len()];
    let mut grad_keys = vec![vec![0.0; dims.attn_dim]; last_states.len()];
    let mut carry = vec![0.0; dec_hidden];

    for t in (0..steps).rev() {
        let s = &traces[t];
        let mut dlogits = std::mem::take(&mut grad_logits[t]);
        dlogits.iter_mut().for_each(|g| *g *= step_scale);

        grads.decoder.w_out.outer_acc(&dlogits, &s.out);
        add_assign(grads.decoder.b_out.data_mut(), &dlogits);
        let mut dout = vec![0.0; s.out.len()];
        model.decoder.w_out.matvec_t_acc(&dlogits, &mut dout);

        let mut dh = dout[..dec_hidden].to_vec();
        add_assign(&mut dh, &carry);
        let mut dcond = dout[dec_hidden..].to_vec();

        let mut dx = vec![0.0; s.gru.x.len()];
        let mut dh_prev = vec![0.0; dec_hidden];
        model
            .decoder
            .layer
            .backward(&s.gru, &dh, &mut grads.decoder.layer, &mut dx, &mut dh_prev);
        add_assign(grads.encoder.embedding.row_mut(example.target[t]), &dx[..embed_dim]);
        add_assign(&mut dcond, &dx[embed_dim..]);

        match (&model.attention, &s.attention) {
            (Some(attn), Some(step)) => {
                let ga = grads.attention.as_mut().expect("gradient layout matches model");
                attn.backward(
                    step,
                    &s.gru.h_prev,
                    last_states,
                    &dcond,
                    ga,
                    &mut dh_prev,
                    &mut grad_last,
                    &mut grad_keys,
                );
            }
            _ => add_assign(&mut grad_s, &dcond),
        }
        carry = dh_prev;
    }
    add_assign(&mut grad_s, &carry);

    let grad_last = match &model.attention {
        Some(attn) => {
            let ga = grads.attention.as_mut().expect("gradient layout matches model");
            attn.finish_keys_backward(last_states, &grad_keys, ga, &mut grad_last);
            Some(grad_last)
        }
        None => None,
    };
    encoder::backward(
        &model.encoder,
        &trace,
        &grad_s,
        grad_last.as_deref(),
        &mut grads.encoder,
    );
    Ok(total / steps as f64)
}
