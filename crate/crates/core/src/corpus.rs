//! Corpus ingestion, vocabulary construction and training-example extraction.
//!
//! Text format: UTF-8, one sentence per line, paragraphs separated by blank
//! lines, tokens separated by whitespace (or one token per character with
//! [`Tokenizer::Chars`]).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type TokenId = usize;

pub const UNK: TokenId = 0;
pub const GO: TokenId = 1;
pub const EOS: TokenId = 2;
pub const NUM_RESERVED: usize = 3;

pub const UNK_TOKEN: &str = "<unk>";
pub const GO_TOKEN: &str = "<go>";
pub const EOS_TOKEN: &str = "<eos>";

/// Longest sentence (in tokens) kept by the loader.
pub const DEFAULT_MAX_SENTENCE_LEN: usize = 20;
/// Minimum corpus frequency for a token to enter the vocabulary.
pub const DEFAULT_MIN_COUNT: usize = 10;

pub type Sentence = Vec<String>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Paragraph {
    pub sentences: Vec<Sentence>,
}

impl Paragraph {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Self { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tokenizer {
    #[default]
    Whitespace,
    Chars,
}

impl Tokenizer {
    pub fn tokenize(self, line: &str) -> Sentence {
        match self {
            Tokenizer::Whitespace => line.split_whitespace().map(str::to_owned).collect(),
            Tokenizer::Chars => line
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(String::from)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub tokenizer: Tokenizer,
    pub max_sentence_len: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            tokenizer: Tokenizer::Whitespace,
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
        }
    }
}

/// Reads paragraphs from `source`. Over-long sentences are dropped, and so are
/// paragraphs left empty.
pub fn load_corpus<R: BufRead>(mut source: R, opts: LoadOptions) -> Result<Vec<Paragraph>> {
    let mut paragraphs = Vec::new();
    let mut current = Vec::new();
    let mut raw = Vec::new();
    let mut lineno = 0;
    loop {
        raw.clear();
        if source.read_until(b'\n', &mut raw)? == 0 {
            break;
        }
        lineno += 1;
        let line = std::str::from_utf8(&raw).map_err(|e| Error::Parse {
            line: lineno,
            message: format!("invalid UTF-8: {e}"),
        })?;
        let tokens = opts.tokenizer.tokenize(line);
        if tokens.is_empty() {
            flush_paragraph(&mut current, &mut paragraphs);
        } else if tokens.len() <= opts.max_sentence_len {
            current.push(tokens);
        }
    }
    flush_paragraph(&mut current, &mut paragraphs);
    Ok(paragraphs)
}

fn flush_paragraph(current: &mut Vec<Sentence>, out: &mut Vec<Paragraph>) {
    if !current.is_empty() {
        out.push(Paragraph::new(std::mem::take(current)));
    }
}

/// Writes paragraphs in the format [`load_corpus`] reads (whitespace-joined).
pub fn write_corpus<W: Write>(mut sink: W, paragraphs: &[Paragraph]) -> Result<()> {
    for (i, p) in paragraphs.iter().enumerate() {
        if i > 0 {
            writeln!(sink)?;
        }
        for s in &p.sentences {
            writeln!(sink, "{}", s.join(" "))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Builds a vocabulary from raw counts. Retained tokens are numbered from 3
    /// by descending frequency, ties in lexicographic order.
    pub fn from_counts(counts: &HashMap<String, u64>, min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidInput("min_count must be at least 1".into()));
        }
        let mut kept: Vec<(&String, u64)> = counts
            .iter()
            .filter(|(t, &c)| c >= min_count as u64 && !is_reserved(t))
            .map(|(t, &c)| (t, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens: Vec<String> = [UNK_TOKEN, GO_TOKEN, EOS_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut freq = vec![0; NUM_RESERVED];
        for (t, c) in kept {
            tokens.push(t.clone());
            freq.push(c);
        }
        Ok(Self::from_parts(tokens, freq))
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens,
            index,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Corpus frequency recorded at build time (zero for reserved symbols and
    /// for vocabularies read back from a file).
    pub fn count(&self, id: TokenId) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps ids back to surface tokens, dropping framing symbols.
    pub fn decode(&self, ids: &[TokenId]) -> Sentence {
        ids.iter()
            .filter(|&&id| id != GO && id != EOS)
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN).to_owned())
            .collect()
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        for t in &self.tokens {
            writeln!(sink, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            tokens.push(line.trim_end_matches('\r').to_owned());
        }
        let expected = [UNK_TOKEN, GO_TOKEN, EOS_TOKEN];
        for (i, want) in expected.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*want) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected reserved symbol {want}"),
                });
            }
        }
        let mut seen = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if seen.insert(t.as_str(), i).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate token {t:?}"),
                });
            }
        }
        let counts = vec![0; tokens.len()];
        Ok(Self::from_parts(tokens, counts))
    }
}

fn is_reserved(token: &str) -> bool {
    matches!(token, UNK_TOKEN | GO_TOKEN | EOS_TOKEN)
}

pub fn count_tokens(paragraphs: &[Paragraph]) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for s in paragraphs.iter().flat_map(|p| &p.sentences) {
        for t in s {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn build_vocab(paragraphs: &[Paragraph], min_count: usize) -> Result<Vocabulary> {
    Vocabulary::from_counts(&count_tokens(paragraphs), min_count)
}

/// `[go] + ids + [eos]`, unknown tokens mapped to `unk`.
pub fn encode_sentence<S: AsRef<str>>(vocab: &Vocabulary, sentence: &[S]) -> Vec<TokenId> {
    let mut ids = Vec::with_capacity(sentence.len() + 2);
    ids.push(GO);
    ids.extend(sentence.iter().map(|t| vocab.id(t.as_ref())));
    ids.push(EOS);
    ids
}

/// Frames an already-encoded sentence as `[go] + ids + [eos]`.
pub fn encode_sentence_ids(ids: &[TokenId]) -> Vec<TokenId> {
    let mut out = Vec::with_capacity(ids.len() + 2);
    out.push(GO);
    out.extend_from_slice(ids);
    out.push(EOS);
    out
}

/// Deterministically shuffles and splits paragraphs; the first
/// `round(train_fraction * n)` go to training.
pub fn split_corpus(
    paragraphs: &[Paragraph],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<Paragraph>, Vec<Paragraph>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut shuffled = paragraphs.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * paragraphs.len() as f64).round() as usize;
    let test = shuffled.split_off(n_train.min(shuffled.len()));
    Ok((shuffled, test))
}

/// One next-sentence prediction instance: framed context sentences (oldest
/// first) and the framed target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub context: Vec<Vec<TokenId>>,
    pub target: Vec<TokenId>,
}

/// Window of at most `num_window` sentences immediately before index `m`
/// (0-based), i.e. `max(0, m - num_window)..m`.
pub fn context_range(m: usize, num_window: usize) -> std::ops::Range<usize> {
    m.saturating_sub(num_window)..m
}

pub fn make_training_examples(
    paragraph: &Paragraph,
    num_window: usize,
    vocab: &Vocabulary,
) -> Vec<TrainingExample> {
    let encoded: Vec<Vec<TokenId>> = paragraph
        .sentences
        .iter()
        .map(|s| encode_sentence(vocab, s))
        .collect();
    (1..encoded.len())
        .map(|m| TrainingExample {
            context: encoded[context_range(m, num_window.max(1))].to_vec(),
            target: encoded[m].clone(),
        })
        .collect()
}

pub fn examples_from_corpus(
    paragraphs: &[Paragraph],
    num_window: usize,
    vocab: &Vocabulary,
) -> Vec<TrainingExample> {
    paragraphs
        .iter()
        .flat_map(|p| make_training_examples(p, num_window, vocab))
        .collect()
}
