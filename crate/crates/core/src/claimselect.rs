//! Sentence selectors for locating claim passages in unsectioned documents.
//!
//! Two selectors are provided. The LDA selector fits a topic model over the
//! document's sentences, takes the topic that dominates sentences carrying
//! proposal cue words, and ranks sentences by their share of that topic. The
//! moving-average selector scores each sentence by how far its embedding
//! centroid lies from the document centroid and smooths that signal with a
//! centered window, favoring contiguous passages.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use crate::textprep::{normalize_and_tokenize, StopwordList};

pub const DEFAULT_CUES: [&str; 8] = [
    "propose",
    "proposes",
    "proposed",
    "introduce",
    "introduces",
    "new",
    "novel",
    "index",
];

/// Tokens ending in one of these, followed by a period, do not end a sentence.
const ABBREVIATIONS: [&str; 15] = [
    "al", "fig", "figs", "eq", "eqs", "e.g", "i.e", "cf", "vs", "etc", "ref", "refs", "dr", "prof",
    "sec",
];

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("no sentence has any token left after preprocessing")]
    NoTokens,
    #[error(
        "no sentence contains a cue word; supply cue words or use the moving-average selector"
    )]
    NoCueSentence,
    #[error("no sentence has an in-vocabulary token")]
    NoVocabulary,
    #[error("document centroid is the zero vector")]
    ZeroCentroid,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub score: f64,
}

fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits at `.`, `?` or `!` followed by whitespace and an uppercase letter or digit.
pub fn split_sentences(raw: &str) -> Vec<SentenceRecord> {
    let chars: Vec<(usize, char)> = raw.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        let mut next = k + 1;
        if next >= chars.len() || !chars[next].1.is_whitespace() {
            continue;
        }
        while next < chars.len() && chars[next].1.is_whitespace() {
            next += 1;
        }
        let Some(&(next_pos, next_char)) = chars.get(next) else {
            continue;
        };
        if !(next_char.is_uppercase() || next_char.is_ascii_digit()) {
            continue;
        }
        if c == '.' && ends_with_abbreviation(&raw[start..pos]) {
            continue;
        }
        pieces.push(&raw[start..pos + c.len_utf8()]);
        start = next_pos;
    }
    pieces.push(&raw[start..]);

    pieces
        .into_iter()
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(index, text)| SentenceRecord {
            index,
            tokens: normalize_and_tokenize(&text),
            text,
            score: 0.0,
        })
        .collect()
}

/// Drops stopwords from every sentence's tokens.
pub fn filter_sentence_tokens(sentences: &mut [SentenceRecord], stopwords: &StopwordList) {
    for s in sentences {
        s.tokens.retain(|t| !stopwords.contains(t));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: 5,
            alpha: 0.1,
            beta: 0.01,
            iterations: 500,
            seed: 42,
        }
    }
}

/// Final state of a collapsed Gibbs chain over sentences-as-documents.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub config: LdaConfig,
    vocab: Vec<String>,
    /// `[sentence][position]` word ids
    docs: Vec<Vec<usize>>,
    /// `[sentence][position]` topic assignments
    assignments: Vec<Vec<usize>>,
    /// `[sentence][topic]`
    doc_topic: Vec<Vec<u32>>,
    /// `[topic][word]`
    topic_word: Vec<Vec<u32>>,
    /// `[topic]`
    topic_total: Vec<u32>,
}

impl LdaModel {
    pub fn topics(&self) -> usize {
        self.config.topics
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn doc_topic(&self) -> &[Vec<u32>] {
        &self.doc_topic
    }

    pub fn topic_word(&self) -> &[Vec<u32>] {
        &self.topic_word
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.topic_total
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Highest-count words of a topic; ties by vocabulary order.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<&str> {
        let mut ids: Vec<usize> = (0..self.vocab.len()).collect();
        ids.sort_by(|&a, &b| {
            self.topic_word[topic][b]
                .cmp(&self.topic_word[topic][a])
                .then(a.cmp(&b))
        });
        ids.into_iter()
            .take(n)
            .filter(|&w| self.topic_word[topic][w] > 0)
            .map(|w| self.vocab[w].as_str())
            .collect()
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng, weights: &mut [f64]) {
        let k = self.config.topics;
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let v_beta = self.vocab.len() as f64 * beta;
        for d in 0..self.docs.len() {
            for pos in 0..self.docs[d].len() {
                let w = self.docs[d][pos];
                let old = self.assignments[d][pos];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut acc = 0.0;
                for (t, slot) in weights.iter_mut().enumerate().take(k) {
                    acc += (f64::from(self.doc_topic[d][t]) + alpha)
                        * (f64::from(self.topic_word[t][w]) + beta)
                        / (f64::from(self.topic_total[t]) + v_beta);
                    *slot = acc;
                }
                let u = rng.gen::<f64>() * acc;
                let new = weights[..k].iter().position(|&c| u < c).unwrap_or(k - 1);

                self.assignments[d][pos] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }
}

/// Fits LDA by collapsed Gibbs sampling, one document per sentence.
pub fn fit_lda(sentences: &[SentenceRecord], config: LdaConfig) -> Result<LdaModel, SelectError> {
    if config.topics == 0 {
        return Err(SelectError::InvalidParameter(
            "topic count must be at least 1".into(),
        ));
    }
    if config.iterations == 0 {
        return Err(SelectError::InvalidParameter(
            "iterations must be at least 1".into(),
        ));
    }
    if !(config.alpha > 0.0 && config.beta > 0.0) {
        return Err(SelectError::InvalidParameter(
            "alpha and beta must be positive".into(),
        ));
    }
    if sentences.iter().all(|s| s.tokens.is_empty()) {
        return Err(SelectError::NoTokens);
    }

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut vocab = Vec::new();
    let docs: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(|t| {
                    *ids.entry(t.as_str()).or_insert_with(|| {
                        vocab.push(t.clone());
                        vocab.len() - 1
                    })
                })
                .collect()
        })
        .collect();

    let k = config.topics;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LdaModel {
        config,
        doc_topic: vec![vec![0; k]; docs.len()],
        topic_word: vec![vec![0; vocab.len()]; k],
        topic_total: vec![0; k],
        assignments: Vec::with_capacity(docs.len()),
        vocab,
        docs: Vec::new(),
    };
    for (d, doc) in docs.iter().enumerate() {
        let mut z = Vec::with_capacity(doc.len());
        for &w in doc {
            let t = rng.gen_range(0..k);
            model.doc_topic[d][t] += 1;
            model.topic_word[t][w] += 1;
            model.topic_total[t] += 1;
            z.push(t);
        }
        model.assignments.push(z);
    }
    model.docs = docs;

    let mut weights = vec![0.0; k];
    for _ in 0..config.iterations {
        model.sweep(&mut rng, &mut weights);
    }
    Ok(model)
}

fn top_by_score(mut sentences: Vec<SentenceRecord>, top_k: usize) -> Vec<SentenceRecord> {
    sentences.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    sentences.truncate(top_k);
    sentences
}

/// Topic most assigned across sentences that contain at least one cue word.
pub fn claim_topic(
    model: &LdaModel,
    sentences: &[SentenceRecord],
    cues: &HashSet<String>,
) -> Result<usize, SelectError> {
    let mut totals = vec![0u64; model.topics()];
    let mut any = false;
    for (d, s) in sentences.iter().enumerate() {
        if s.tokens.iter().any(|t| cues.contains(t)) {
            any = true;
            for (t, &c) in model.doc_topic[d].iter().enumerate() {
                totals[t] += u64::from(c);
            }
        }
    }
    if !any {
        return Err(SelectError::NoCueSentence);
    }
    let mut best = 0;
    for t in 1..totals.len() {
        if totals[t] > totals[best] {
            best = t;
        }
    }
    Ok(best)
}

/// Ranks sentences by their share of the claim topic and keeps the best `top_k`.
pub fn lda_select(
    model: &LdaModel,
    sentences: &[SentenceRecord],
    cues: &HashSet<String>,
    top_k: usize,
) -> Result<Vec<SentenceRecord>, SelectError> {
    if top_k == 0 {
        return Err(SelectError::InvalidParameter(
            "top_k must be at least 1".into(),
        ));
    }
    if sentences.len() != model.doc_topic.len() {
        return Err(SelectError::InvalidParameter(
            "model was fitted on a different sentence list".into(),
        ));
    }
    let topic = claim_topic(model, sentences, cues)?;
    let scored = sentences
        .iter()
        .zip(&model.doc_topic)
        .map(|(s, counts)| {
            let len: u32 = counts.iter().sum();
            let score = if len == 0 {
                0.0
            } else {
                f64::from(counts[topic]) / f64::from(len)
            };
            SentenceRecord { score, ..s.clone() }
        })
        .collect();
    Ok(top_by_score(scored, top_k))
}

/// Centered moving average; windows are truncated at the edges.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn centroid(tokens: &[String], table: &EmbeddingTable, into: &mut [f64]) -> usize {
    into.iter_mut().for_each(|x| *x = 0.0);
    let mut count = 0;
    for t in tokens {
        if let Some(v) = table.vector_of(t) {
            for (acc, &x) in into.iter_mut().zip(v.values()) {
                *acc += f64::from(x);
            }
            count += 1;
        }
    }
    if count > 0 {
        into.iter_mut().for_each(|x| *x /= count as f64);
    }
    count
}

fn cosine64(u: &[f64], v: &[f64]) -> Option<f64> {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (nu > 0.0 && nv > 0.0).then(|| (dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Raw divergence of each sentence centroid from the document centroid.
/// Sentences without in-vocabulary tokens score 0.
pub fn centroid_divergence(
    sentences: &[SentenceRecord],
    table: &EmbeddingTable,
) -> Result<Vec<f64>, SelectError> {
    let dim = table.dim();
    let all: Vec<String> = sentences
        .iter()
        .flat_map(|s| s.tokens.iter().cloned())
        .collect();
    let mut doc = vec![0.0; dim];
    if centroid(&all, table, &mut doc) == 0 {
        return Err(SelectError::NoVocabulary);
    }
    if doc.iter().all(|&x| x == 0.0) {
        return Err(SelectError::ZeroCentroid);
    }
    let mut buf = vec![0.0; dim];
    Ok(sentences
        .iter()
        .map(|s| {
            if centroid(&s.tokens, table, &mut buf) == 0 {
                return 0.0;
            }
            cosine64(&buf, &doc).map_or(0.0, |c| 1.0 - c)
        })
        .collect())
}

pub fn ma_select(
    sentences: &[SentenceRecord],
    table: &EmbeddingTable,
    window: usize,
    top_k: usize,
) -> Result<Vec<SentenceRecord>, SelectError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(SelectError::InvalidParameter(format!(
            "window must be odd and positive, got {window}"
        )));
    }
    if top_k == 0 {
        return Err(SelectError::InvalidParameter(
            "top_k must be at least 1".into(),
        ));
    }
    let raw = centroid_divergence(sentences, table)?;
    let smoothed = moving_average(&raw, window);
    let scored = sentences
        .iter()
        .zip(smoothed)
        .map(|(s, score)| SentenceRecord { score, ..s.clone() })
        .collect();
    Ok(top_by_score(scored, top_k))
}
