//! Tokenization, stopword filtering and normalized bag-of-words construction.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embeddings::{hex, EmbeddingTable};

const SNOWBALL_ENGLISH: &str = include_str!("../data/snowball_english.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("document has no in-vocabulary tokens ({dropped} out-of-vocabulary tokens dropped)")]
    EmptyDocument { dropped: usize },
    #[error("word {0:?} is not in the embedding vocabulary")]
    OutOfVocabulary(String),
    #[error("word weights must be positive and finite")]
    InvalidWeight,
    #[error("cannot read stopword file {path}: {source}")]
    StopwordFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercases, splits on every non-alphanumeric character and drops empty fragments.
pub fn normalize_and_tokenize(raw: &str) -> Vec<String> {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Named stopword set; the name and content hash are echoed into reports.
#[derive(Debug, Clone)]
pub struct StopwordList {
    name: String,
    sha256: String,
    words: HashSet<String>,
}

impl StopwordList {
    /// The bundled Snowball English list.
    pub fn snowball_english() -> Self {
        Self::parse("snowball-english", SNOWBALL_ENGLISH)
    }

    /// One word per line; blank lines ignored, entries lowercased.
    pub fn parse(name: impl Into<String>, text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        StopwordList {
            name: name.into(),
            sha256: hex(&Sha256::digest(text.as_bytes())),
            words,
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TextError::StopwordFile {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(path.display().to_string(), &text))
    }

    pub fn empty() -> Self {
        Self::parse("none", "")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        Self::snowball_english()
    }
}

/// Order-preserving filter.
pub fn remove_stopwords(tokens: &[String], stopwords: &StopwordList) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stopwords.contains(t))
        .cloned()
        .collect()
}

/// Full preprocessing of a raw text.
pub fn preprocess(raw: &str, stopwords: &StopwordList) -> Vec<String> {
    let mut tokens = normalize_and_tokenize(raw);
    tokens.retain(|t| !stopwords.contains(t));
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub id: String,
    pub group: String,
    pub tokens: Vec<String>,
}

/// Normalized bag-of-words over an embedding vocabulary.
///
/// Words keep first-appearance order; weights are relative frequencies of the
/// in-vocabulary tokens and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NBow {
    words: Vec<String>,
    rows: Vec<usize>,
    weights: Vec<f64>,
    dropped: usize,
}

impl NBow {
    /// Bag with explicit weights, normalized to sum to one. Repeated words are merged.
    pub fn from_weights<S: AsRef<str>>(
        pairs: &[(S, f64)],
        table: &EmbeddingTable,
    ) -> Result<Self, TextError> {
        let mut words: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (word, weight) in pairs {
            let word = word.as_ref();
            if !(weight.is_finite() && *weight > 0.0) {
                return Err(TextError::InvalidWeight);
            }
            let row = table
                .row_of(word)
                .ok_or_else(|| TextError::OutOfVocabulary(word.to_string()))?;
            match words.iter().position(|w| w == word) {
                Some(i) => weights[i] += weight,
                None => {
                    words.push(word.to_string());
                    rows.push(row);
                    weights.push(*weight);
                }
            }
        }
        if words.is_empty() {
            return Err(TextError::EmptyDocument { dropped: 0 });
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(NBow {
            words,
            rows,
            weights,
            dropped: 0,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Row indices into the table the bag was built against.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of out-of-vocabulary tokens dropped while building.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn weight_of(&self, word: &str) -> Option<f64> {
        self.words
            .iter()
            .position(|w| w == word)
            .map(|i| self.weights[i])
    }
}

pub fn build_nbow<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Result<NBow, TextError> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut words = Vec::new();
    let mut rows = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut dropped = 0;
    for token in tokens {
        let token = token.as_ref();
        let Some(row) = table.row_of(token) else {
            dropped += 1;
            continue;
        };
        match slot.get(token) {
            Some(&i) => counts[i] += 1,
            None => {
                slot.insert(token, words.len());
                words.push(token.to_string());
                rows.push(row);
                counts.push(1);
            }
        }
    }
    if words.is_empty() {
        return Err(TextError::EmptyDocument { dropped });
    }
    let total: u64 = counts.iter().sum();
    let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(NBow {
        words,
        rows,
        weights,
        dropped,
    })
}
