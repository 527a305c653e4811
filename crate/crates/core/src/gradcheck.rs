//! Finite-difference verification of the analytic teacher-forced gradient.

use rand::Rng;

use crate::corpus::{TokenId, TrainingExample, EOS, GO, NUM_RESERVED};
use crate::decoder::{teacher_forced_loss, teacher_forced_loss_value};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::relative_error;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub params: usize,
    pub max_relative_error: f64,
}

/// Compares every analytic partial derivative against a central difference
/// with step `epsilon`, reporting the worst relative error per tensor.
pub fn check_gradients(model: &Model, example: &TrainingExample, epsilon: f64) -> Result<Vec<TensorCheck>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let (_, grads) = teacher_forced_loss(model, example)?;
    let mut probe = model.clone();
    let names = model.tensor_names();
    let mut out = Vec::with_capacity(names.len());
    for (ti, (name, analytic)) in names.into_iter().zip(grads.tensors()).enumerate() {
        let mut worst: f64 = 0.0;
        for j in 0..analytic.data().len() {
            let orig = model.tensors()[ti].data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = orig + epsilon;
            let plus = teacher_forced_loss_value(&probe, example)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig - epsilon;
            let minus = teacher_forced_loss_value(&probe, example)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic.data()[j], numeric));
        }
        out.push(TensorCheck {
            name,
            params: analytic.data().len(),
            max_relative_error: worst,
        });
    }
    Ok(out)
}

/// A random framed example over the non-reserved ids of `vocab_size`.
pub fn random_example<R: Rng>(vocab_size: usize, context_sentences: usize, max_len: usize, rng: &mut R) -> TrainingExample {
    let sentence = |rng: &mut R| -> Vec<TokenId> {
        let len = rng.gen_range(1..=max_len.max(1));
        let mut s = vec![GO];
        s.extend((0..len).map(|_| rng.gen_range(NUM_RESERVED..vocab_size)));
        s.push(EOS);
        s
    };
    TrainingExample {
        context: (0..context_sentences.max(1)).map(|_| sentence(rng)).collect(),
        target: sentence(rng),
    }
}
