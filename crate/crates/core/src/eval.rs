//! Corpus-level BLEU and next-sentence evaluation.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use crate::corpus::{TokenId, TrainingExample, EOS, GO};
use crate::error::{Error, Result};
use crate::inference::{predict_next_sentence, InferenceConfig};
use crate::model::Model;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuReport {
    pub bleu: f64,
    /// Modified n-gram precisions for n = 1..=4.
    pub precisions: [f64; MAX_ORDER],
    /// Clipped n-gram matches, summed over the corpus.
    pub matches: [u64; MAX_ORDER],
    /// Candidate n-gram counts, summed over the corpus.
    pub totals: [u64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub candidate_len: u64,
    pub reference_len: u64,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with one reference per candidate, n-grams up to 4, clipped
/// counts and no smoothing: any zero precision gives a score of 0.
pub fn bleu<T: Eq + Hash, C: AsRef<[T]>, R: AsRef<[T]>>(candidates: &[C], references: &[R]) -> Result<BleuReport> {
    if candidates.len() != references.len() {
        return Err(Error::InvalidInput(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidInput("BLEU needs at least one candidate".into()));
    }
    let mut matches = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let (mut c, mut r) = (0u64, 0u64);
    for (cand, reference) in candidates.iter().zip(references) {
        let (cand, reference) = (cand.as_ref(), reference.as_ref());
        c += cand.len() as u64;
        r += reference.len() as u64;
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(cand, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                totals[n - 1] += count;
            }
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if c == 0 {
        0.0
    } else if c <= r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let bleu = if precisions.iter().all(|&p| p > 0.0) {
        brevity_penalty * (precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64).exp()
    } else {
        0.0
    };
    Ok(BleuReport {
        bleu,
        precisions,
        matches,
        totals,
        brevity_penalty,
        candidate_len: c,
        reference_len: r,
    })
}

/// The target's words without `go` / `eos`.
pub fn gold_sentence(example: &TrainingExample) -> &[TokenId] {
    let t = example.target.as_slice();
    let t = t.strip_prefix(&[GO]).unwrap_or(t);
    t.strip_suffix(&[EOS]).unwrap_or(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: BleuReport,
    pub predictions: Vec<Vec<TokenId>>,
}

/// Scores `predict`'s output for every example against its gold next sentence.
pub fn evaluate_with<F>(examples: &[TrainingExample], mut predict: F) -> Result<Evaluation>
where
    F: FnMut(&TrainingExample) -> Result<Vec<TokenId>>,
{
    if examples.is_empty() {
        return Err(Error::InvalidInput("no test examples".into()));
    }
    let predictions = examples.iter().map(&mut predict).collect::<Result<Vec<_>>>()?;
    let references: Vec<&[TokenId]> = examples.iter().map(gold_sentence).collect();
    Ok(Evaluation {
        report: bleu(&predictions, &references)?,
        predictions,
    })
}

/// Beam-search decodes the next sentence of every example and scores it.
pub fn evaluate_model(model: &Model, examples: &[TrainingExample], cfg: &InferenceConfig) -> Result<Evaluation> {
    evaluate_with(examples, |ex| predict_next_sentence(model, &ex.context, cfg))
}

/// One `name<TAB>value` line per metric.
pub fn write_report<W: Write>(mut sink: W, report: &BleuReport, extra: &[(&str, String)]) -> Result<()> {
    writeln!(sink, "bleu\t{}", report.bleu)?;
    for n in 0..MAX_ORDER {
        writeln!(sink, "precision_{}\t{}", n + 1, report.precisions[n])?;
    }
    writeln!(sink, "brevity_penalty\t{}", report.brevity_penalty)?;
    writeln!(sink, "candidate_length\t{}", report.candidate_len)?;
    writeln!(sink, "reference_length\t{}", report.reference_len)?;
    for (k, v) in extra {
        writeln!(sink, "{k}\t{v}")?;
    }
    Ok(())
}
