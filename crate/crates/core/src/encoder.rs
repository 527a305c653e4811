//! Hierarchical recurrent encoder: a word-level GRU stack turns each context
//! sentence into a vector (its top layer's final state), and a sentence-level
//! GRU runs over those vectors. Both start from zero state.

use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::gru::{layer_backward, run_layer, stack_backward, unroll_unchecked, StepCache, Unrolled};
use crate::model::EncoderParams;
use crate::numerics::{add_assign, Vector};

/// What the decoder needs from the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedContext {
    /// Final sentence-level state; the decoder's initial state.
    pub s: Vector,
    /// Top-layer word states of the most recent context sentence.
    pub last_sentence_states: Vec<Vector>,
}

/// Forward intermediates for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct EncoderTrace {
    pub sentences: Vec<(Vec<TokenId>, Unrolled)>,
    pub sent_steps: Vec<StepCache>,
}

impl EncoderTrace {
    pub fn encoded(&self) -> EncodedContext {
        let last = &self.sentences.last().expect("non-empty context").1;
        EncodedContext {
            s: self.sent_steps.last().expect("non-empty context").h.clone(),
            last_sentence_states: last.top_states(),
        }
    }
}

fn check_tokens(params: &EncoderParams, tokens: &[TokenId]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("cannot encode an empty sentence".into()));
    }
    let v = params.embedding.rows();
    if let Some(&bad) = tokens.iter().find(|&&t| t >= v) {
        return Err(Error::InvalidInput(format!(
            "token id {bad} out of range for vocabulary of {v}"
        )));
    }
    Ok(())
}

fn embed(params: &EncoderParams, tokens: &[TokenId]) -> Vec<Vector> {
    tokens
        .iter()
        .map(|&t| params.embedding.row(t).to_vec())
        .collect()
}

/// Encodes one sentence: returns its vector and the top layer's per-step states.
pub fn encode_sentence_vec(params: &EncoderParams, tokens: &[TokenId]) -> Result<(Vector, Vec<Vector>)> {
    check_tokens(params, tokens)?;
    let u = unroll_unchecked(&params.word_stack, embed(params, tokens), None);
    Ok((u.top_final().clone(), u.top_states()))
}

/// Encodes a window of sentences, oldest first.
pub fn encode_context(params: &EncoderParams, context: &[Vec<TokenId>]) -> Result<EncodedContext> {
    Ok(forward(params, context)?.encoded())
}

pub(crate) fn forward(params: &EncoderParams, context: &[Vec<TokenId>]) -> Result<EncoderTrace> {
    if context.is_empty() {
        return Err(Error::InvalidInput("empty context".into()));
    }
    let mut sentences = Vec::with_capacity(context.len());
    for tokens in context {
        check_tokens(params, tokens)?;
        let u = unroll_unchecked(&params.word_stack, embed(params, tokens), None);
        sentences.push((tokens.clone(), u));
    }
    let vectors: Vec<Vector> = sentences.iter().map(|(_, u)| u.top_final().clone()).collect();
    let sent_steps = run_layer(
        &params.sent_layer,
        vectors,
        vec![0.0; params.sent_layer.hidden_dim()],
    );
    Ok(EncoderTrace {
        sentences,
        sent_steps,
    })
}

/// Backpropagates `∂L/∂s` and `∂L/∂last_sentence_states` into `grads`.
pub(crate) fn backward(
    params: &EncoderParams,
    trace: &EncoderTrace,
    grad_s: &[f64],
    grad_last_states: Option<&[Vector]>,
    grads: &mut EncoderParams,
) {
    let k = trace.sent_steps.len();
    let sent_dim = params.sent_layer.hidden_dim();
    let mut upstream = vec![vec![0.0; sent_dim]; k];
    upstream[k - 1].copy_from_slice(grad_s);
    let (grad_vectors, _) = layer_backward(&params.sent_layer, &trace.sent_steps, upstream, &mut grads.sent_layer);

    let word_dim = params.word_stack.hidden_dim();
    for (i, ((tokens, unrolled), gv)) in trace.sentences.iter().zip(grad_vectors).enumerate() {
        let n = tokens.len();
        let mut top = match grad_last_states {
            Some(g) if i == k - 1 => g.to_vec(),
            _ => vec![vec![0.0; word_dim]; n],
        };
        add_assign(&mut top[n - 1], &gv);
        let (grad_inputs, _) = stack_backward(&params.word_stack, unrolled, top, &mut grads.word_stack);
        for (&t, g) in tokens.iter().zip(&grad_inputs) {
            add_assign(grads.embedding.row_mut(t), g);
        }
    }
}
