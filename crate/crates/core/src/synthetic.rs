//! Deterministic toy corpora with known sentence-to-sentence structure, used
//! to check that the models learn what they should.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Paragraph, Sentence};

fn word(prefix: &str, i: usize) -> String {
    format!("{prefix}{i:02}")
}

fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Paragraphs where each sentence is a fixed word-for-word mapping of the
/// previous one. The first sentence of each paragraph is random, with length
/// in `min_len..=max_len`.
#[derive(Debug, Clone)]
pub struct SuccessorCorpus {
    pub paragraphs: usize,
    pub sentences: usize,
    pub words: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SuccessorCorpus {
    fn default() -> Self {
        Self {
            paragraphs: 200,
            sentences: 6,
            words: 20,
            min_len: 3,
            max_len: 6,
        }
    }
}

impl SuccessorCorpus {
    pub fn generate(&self, seed: u64) -> Vec<Paragraph> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = permutation(self.words, &mut rng);
        (0..self.paragraphs)
            .map(|_| {
                let len = rng.gen_range(self.min_len..=self.max_len);
                let mut ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..self.words)).collect();
                let mut sentences = Vec::with_capacity(self.sentences);
                for _ in 0..self.sentences {
                    sentences.push(ids.iter().map(|&i| word("w", i)).collect());
                    ids.iter_mut().for_each(|i| *i = map[*i]);
                }
                Paragraph::new(sentences)
            })
            .collect()
    }
}

/// Paragraphs whose sentences are `[content..., topic...]`, the topic word
/// written `topic_len` times. The topic repeats
/// with period `period` (so sentence m shares its topic with sentence
/// m - period), while the content is a fixed word-for-word mapping of the
/// previous sentence's content. A model that only sees the previous sentence
/// can predict the content but not the topic.
#[derive(Debug, Clone)]
pub struct LongRangeCorpus {
    pub paragraphs: usize,
    pub sentences: usize,
    pub topics: usize,
    pub words: usize,
    pub content_len: usize,
    pub topic_len: usize,
    pub period: usize,
}

impl Default for LongRangeCorpus {
    fn default() -> Self {
        Self {
            paragraphs: 200,
            sentences: 8,
            topics: 6,
            words: 12,
            content_len: 4,
            topic_len: 1,
            period: 3,
        }
    }
}

impl LongRangeCorpus {
    pub fn generate(&self, seed: u64) -> Vec<Paragraph> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = permutation(self.words, &mut rng);
        (0..self.paragraphs)
            .map(|_| {
                let topics: Vec<usize> = (0..self.period).map(|_| rng.gen_range(0..self.topics)).collect();
                let mut content: Vec<usize> = (0..self.content_len).map(|_| rng.gen_range(0..self.words)).collect();
                let mut sentences = Vec::with_capacity(self.sentences);
                for m in 0..self.sentences {
                    let mut s: Sentence = content.iter().map(|&i| word("w", i)).collect();
                    let topic = word("t", topics[m % self.period]);
                    s.extend(std::iter::repeat(topic).take(self.topic_len));
                    sentences.push(s);
                    content.iter_mut().for_each(|i| *i = map[*i]);
                }
                Paragraph::new(sentences)
            })
            .collect()
    }
}

/// Random text whose word frequencies fall off roughly as 1/rank, so a
/// frequency cut-off splits the vocabulary somewhere in the middle.
pub fn zipf_corpus(paragraphs: usize, words: usize, seed: u64) -> Vec<Paragraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=words).map(|r| 1.0 / r as f64).collect();
    let dist = rand::distributions::WeightedIndex::new(&weights).expect("positive weights");
    (0..paragraphs)
        .map(|_| {
            let n = rng.gen_range(1..=6);
            Paragraph::new(
                (0..n)
                    .map(|_| {
                        let len = rng.gen_range(1..=10);
                        (0..len).map(|_| word("z", rng.sample(&dist))).collect()
                    })
                    .collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn successor_structure() {
        let corpus = SuccessorCorpus::default();
        let ps = corpus.generate(1);
        assert_eq!(ps, corpus.generate(1));
        assert_eq!(ps.len(), 200);
        let mut map: HashMap<&str, &str> = HashMap::new();
        let mut vocab = HashSet::new();
        for p in &ps {
            assert_eq!(p.len(), 6);
            for pair in p.sentences.windows(2) {
                assert_eq!(pair[0].len(), pair[1].len());
                for (a, b) in pair[0].iter().zip(&pair[1]) {
                    assert_eq!(*map.entry(a).or_insert(b), b.as_str(), "mapping is a function");
                }
            }
            vocab.extend(p.sentences.iter().flatten().cloned());
        }
        assert!(vocab.len() <= 20);
    }

    #[test]
    fn long_range_structure() {
        let corpus = LongRangeCorpus::default();
        let ps = corpus.generate(2);
        assert_eq!(ps, corpus.generate(2));
        let mut adjacent_topic_matches = 0;
        let mut pairs = 0;
        for p in &ps {
            for m in 0..p.len() {
                assert_eq!(p.sentences[m].len(), corpus.topic_len + corpus.content_len);
                let topic = |i: usize| p.sentences[i].last().unwrap();
                if m >= 3 {
                    assert_eq!(topic(m), topic(m - 3));
                }
                if m >= 1 {
                    pairs += 1;
                    adjacent_topic_matches += (topic(m) == topic(m - 1)) as usize;
                }
            }
        }
        // the previous sentence says little about the topic
        assert!((adjacent_topic_matches as f64) < 0.4 * pairs as f64);
    }

    #[test]
    fn zipf_frequencies_decay() {
        let ps = zipf_corpus(500, 50, 3);
        let mut counts: HashMap<String, usize> = HashMap::new();
        for w in ps.iter().flat_map(|p| p.sentences.iter().flatten()) {
            *counts.entry(w.clone()).or_default() += 1;
        }
        assert!(counts["z00"] > 5 * counts.get("z30").copied().unwrap_or(0));
        assert!(ps.iter().all(|p| !p.is_empty()));
    }
}
