//! Parameter containers for the three model variants and the wiring that
//! distinguishes them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::attention::AttentionParams;
use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::gru::{GruLayer, GruStack, GATE_NAMES};
use crate::numerics::Matrix;

/// Which encoder/decoder wiring to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Flat encoder over the concatenated context window, no attention.
    Seq2Seq,
    /// Word-level then sentence-level encoder; the decoder sees the final
    /// sentence-level state at every step.
    Hred,
    /// As [`Variant::Hred`], plus per-step attention over the word states of the
    /// most recent context sentence.
    HredAttention,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Seq2Seq, Variant::Hred, Variant::HredAttention];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Seq2Seq => "seq2seq",
            Variant::Hred => "hred",
            Variant::HredAttention => "hred_attention",
        }
    }

    pub fn has_attention(self) -> bool {
        self == Variant::HredAttention
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq2seq" => Ok(Variant::Seq2Seq),
            "hred" => Ok(Variant::Hred),
            "hred_attention" | "hred-attention" => Ok(Variant::HredAttention),
            other => Err(Error::InvalidInput(format!(
                "unknown variant {other:?} (expected seq2seq, hred or hred_attention)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub word_hidden: usize,
    pub word_layers: usize,
    pub sent_hidden: usize,
    pub dec_hidden: usize,
    pub attn_dim: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("word_hidden", self.word_hidden),
            ("word_layers", self.word_layers),
            ("sent_hidden", self.sent_hidden),
            ("dec_hidden", self.dec_hidden),
            ("attn_dim", self.attn_dim),
        ];
        if let Some((name, _)) = all.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidInput(format!("{name} must be positive")));
        }
        if self.dec_hidden != self.sent_hidden {
            return Err(Error::InvalidInput(format!(
                "dec_hidden ({}) must equal sent_hidden ({}): the decoder starts from the sentence-level state",
                self.dec_hidden, self.sent_hidden
            )));
        }
        if self.vocab_size <= crate::corpus::NUM_RESERVED {
            return Err(Error::InvalidInput("vocabulary has no ordinary tokens".into()));
        }
        Ok(())
    }

    /// Width of the per-step conditioning vector fed to the decoder.
    pub fn cond_dim(&self, variant: Variant) -> usize {
        if variant.has_attention() {
            self.word_hidden
        } else {
            self.sent_hidden
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `vocab_size × embed_dim`, shared with the decoder input.
    pub embedding: Matrix,
    pub word_stack: GruStack,
    pub sent_layer: GruLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// Input is `[embed(w_{t-1}); c_t]`.
    pub layer: GruLayer,
    /// `vocab_size × (dec_hidden + cond_dim)`, applied to `[h_t; c_t]`.
    pub w_out: Matrix,
    /// `vocab_size × 1`
    pub b_out: Matrix,
}

/// All trainable tensors of one model. The same type doubles as the gradient
/// accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub variant: Variant,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub attention: Option<AttentionParams>,
}

impl Model {
    pub fn zeros(variant: Variant, dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let cond = dims.cond_dim(variant);
        Ok(Self {
            variant,
            encoder: EncoderParams {
                embedding: Matrix::zeros(dims.vocab_size, dims.embed_dim),
                word_stack: GruStack::zeros(dims.embed_dim, dims.word_hidden, dims.word_layers)?,
                sent_layer: GruLayer::zeros(dims.word_hidden, dims.sent_hidden),
            },
            decoder: DecoderParams {
                layer: GruLayer::zeros(dims.embed_dim + cond, dims.dec_hidden),
                w_out: Matrix::zeros(dims.vocab_size, dims.dec_hidden + cond),
                b_out: Matrix::zeros(dims.vocab_size, 1),
            },
            attention: variant
                .has_attention()
                .then(|| AttentionParams::zeros(dims.attn_dim, dims.dec_hidden, dims.word_hidden)),
        })
    }

    /// Every weight i.i.d. uniform on `[-init_range, init_range]`, output bias
    /// zero. Tensors are filled in [`Model::tensors`] order.
    pub fn random<R: Rng>(variant: Variant, dims: ModelDims, init_range: f64, rng: &mut R) -> Result<Self> {
        if !(init_range >= 0.0 && init_range.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid init range {init_range}")));
        }
        let mut model = Self::zeros(variant, dims)?;
        let names = model.tensor_names();
        for (name, t) in names.iter().zip(model.tensors_mut()) {
            if name == "out.b" {
                continue;
            }
            for v in t.data_mut() {
                *v = if init_range == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-init_range..=init_range)
                };
            }
        }
        Ok(model)
    }

    pub fn zeros_like(&self) -> Self {
        let mut m = self.clone();
        m.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        m
    }

    pub fn dims(&self) -> ModelDims {
        let enc = &self.encoder;
        ModelDims {
            vocab_size: enc.embedding.rows(),
            embed_dim: enc.embedding.cols(),
            word_hidden: enc.word_stack.hidden_dim(),
            word_layers: enc.word_stack.layers.len(),
            sent_hidden: enc.sent_layer.hidden_dim(),
            dec_hidden: self.decoder.layer.hidden_dim(),
            attn_dim: self
                .attention
                .as_ref()
                .map_or(self.decoder.layer.hidden_dim(), AttentionParams::attn_dim),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.encoder.embedding.rows()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for l in 0..self.encoder.word_stack.layers.len() {
            names.extend(GATE_NAMES.iter().map(|g| format!("word.{l}.{g}")));
        }
        names.extend(GATE_NAMES.iter().map(|g| format!("sent.{g}")));
        names.extend(GATE_NAMES.iter().map(|g| format!("dec.{g}")));
        if self.attention.is_some() {
            names.extend(["attn.w_a", "attn.u_a", "attn.v_a"].map(String::from));
        }
        names.extend(["out.w", "out.b"].map(String::from));
        names
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = vec![&self.encoder.embedding];
        for l in &self.encoder.word_stack.layers {
            out.extend(l.tensors());
        }
        out.extend(self.encoder.sent_layer.tensors());
        out.extend(self.decoder.layer.tensors());
        if let Some(a) = &self.attention {
            out.extend(a.tensors());
        }
        out.push(&self.decoder.w_out);
        out.push(&self.decoder.b_out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.encoder.embedding];
        for l in &mut self.encoder.word_stack.layers {
            out.extend(l.tensors_mut());
        }
        out.extend(self.encoder.sent_layer.tensors_mut());
        out.extend(self.decoder.layer.tensors_mut());
        if let Some(a) = &mut self.attention {
            out.extend(a.tensors_mut());
        }
        out.push(&mut self.decoder.w_out);
        out.push(&mut self.decoder.b_out);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        crate::error::check_dim("Model::set_flat", self.num_params(), flat.len())?;
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.data().len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Arranges a context window into the encoder's input sentences. The flat
    /// baseline only sees the adjacent (most recent) sentence.
    pub fn encoder_input(&self, context: &[Vec<TokenId>]) -> Vec<Vec<TokenId>> {
        match self.variant {
            Variant::Seq2Seq => context.last().cloned().into_iter().collect(),
            Variant::Hred | Variant::HredAttention => context.to_vec(),
        }
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Model, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::numerics::axpy(scale, b.data(), a.data_mut());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum()
    }
}
