//! Pretrained word vectors in GloVe text format.
//!
//! Rows are stored as `f32` (the precision the text files carry) with their
//! Euclidean norms cached in `f64`. Every similarity computed from a table goes
//! through [`EmbeddingTable::cosine_rows`], so the pairwise, matrix and batched
//! paths produce bit-identical values.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use log::warn;
use ndarray::Array2;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("embedding source contains no usable vectors")]
    Empty,
    #[error("expected dimension {expected}, file has dimension {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("word {0:?} is not in the embedding vocabulary")]
    OutOfVocabulary(String),
}

/// Counters collected while loading a file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub header_skipped: bool,
    pub duplicates: usize,
    pub zero_rows_dropped: usize,
}

/// A borrowed view of one stored row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordVector<'a>(&'a [f32]);

impl<'a> WordVector<'a> {
    pub fn new(values: &'a [f32]) -> Self {
        WordVector(values)
    }

    pub fn values(&self) -> &'a [f32] {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(self.0)
    }
}

/// Immutable vocabulary-to-vector table.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    data: Vec<f32>,
    norms: Vec<f64>,
    stats: LoadStats,
    sha256: Option<String>,
}

fn l2_norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum()
}

#[inline]
fn cosine_from_parts(dot: f64, norm_u: f64, norm_v: f64) -> f64 {
    (dot / (norm_u * norm_v)).clamp(-1.0, 1.0)
}

/// Cosine of the angle between two vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: WordVector<'_>, v: WordVector<'_>) -> Result<f64, EmbeddingError> {
    if u.dim() != v.dim() {
        return Err(EmbeddingError::LengthMismatch(u.dim(), v.dim()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok(cosine_from_parts(dot(u.0, v.0), nu, nv))
}

fn looks_like_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())
}

impl EmbeddingTable {
    /// Parses a GloVe text stream. A leading `count dim` header line is skipped.
    pub fn load<R: BufRead>(
        source: R,
        expected_dim: Option<usize>,
    ) -> Result<Self, EmbeddingError> {
        let mut dim: Option<usize> = None;
        let mut index = HashMap::new();
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut norms = Vec::new();
        let mut stats = LoadStats::default();
        let mut row = Vec::new();
        let mut seen_content = false;

        for (lineno, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let line = line.trim_end_matches('\r');
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if !seen_content {
                seen_content = true;
                if looks_like_header(&fields) {
                    stats.header_skipped = true;
                    continue;
                }
            }
            if fields.len() < 2 {
                return Err(EmbeddingError::Parse {
                    line: lineno,
                    message: "expected a token followed by at least one value".into(),
                });
            }
            let token = fields[0];
            row.clear();
            for field in &fields[1..] {
                let value: f32 = field.parse().map_err(|_| EmbeddingError::Parse {
                    line: lineno,
                    message: format!("non-numeric value {field:?}"),
                })?;
                if !value.is_finite() {
                    return Err(EmbeddingError::Parse {
                        line: lineno,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                row.push(value);
            }
            match dim {
                None => {
                    if let Some(expected) = expected_dim {
                        if expected != row.len() {
                            return Err(EmbeddingError::DimensionMismatch {
                                expected,
                                found: row.len(),
                            });
                        }
                    }
                    dim = Some(row.len());
                }
                Some(d) if d != row.len() => {
                    return Err(EmbeddingError::Parse {
                        line: lineno,
                        message: format!("dimension {} differs from {d}", row.len()),
                    });
                }
                Some(_) => {}
            }
            if index.contains_key(token) {
                warn!("line {lineno}: duplicate token {token:?} ignored");
                stats.duplicates += 1;
                continue;
            }
            let norm = l2_norm(&row);
            if norm == 0.0 {
                warn!("line {lineno}: zero vector for {token:?} dropped");
                stats.zero_rows_dropped += 1;
                continue;
            }
            index.insert(token.to_string(), words.len());
            words.push(token.to_string());
            data.extend_from_slice(&row);
            norms.push(norm);
        }

        let dim = dim.ok_or(EmbeddingError::Empty)?;
        if words.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        Ok(EmbeddingTable {
            dim,
            index,
            words,
            data,
            norms,
            stats,
            sha256: None,
        })
    }

    /// Loads a file and records its SHA-256 for report provenance.
    pub fn from_path(
        path: impl AsRef<Path>,
        expected_dim: Option<usize>,
    ) -> Result<Self, EmbeddingError> {
        let mut reader = HashingReader {
            inner: File::open(path.as_ref())?,
            hasher: Sha256::new(),
        };
        let mut table = Self::load(BufReader::with_capacity(1 << 20, &mut reader), expected_dim)?;
        // drain anything the line reader left behind so the digest covers the whole file
        std::io::copy(&mut reader, &mut std::io::sink())?;
        table.sha256 = Some(hex(&reader.hasher.finalize()));
        Ok(table)
    }

    /// Builds a table directly from rows, applying the same duplicate and zero-row rules as [`load`](Self::load).
    pub fn from_rows<S: Into<String>>(
        rows: impl IntoIterator<Item = (S, Vec<f32>)>,
    ) -> Result<Self, EmbeddingError> {
        let mut text = String::new();
        for (word, values) in rows {
            text.push_str(&word.into());
            for v in values {
                text.push(' ');
                text.push_str(&v.to_string());
            }
            text.push('\n');
        }
        Self::load(text.as_bytes(), None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn stats(&self) -> &LoadStats {
        &self.stats
    }

    /// Hex SHA-256 of the source file, when loaded from disk.
    pub fn sha256(&self) -> Option<&str> {
        self.sha256.as_deref()
    }

    pub fn row_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, row: usize) -> &str {
        &self.words[row]
    }

    pub fn row(&self, row: usize) -> WordVector<'_> {
        WordVector(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn row_norm(&self, row: usize) -> f64 {
        self.norms[row]
    }

    /// Exact-match lookup; out-of-vocabulary words give `None`.
    pub fn vector_of(&self, word: &str) -> Option<WordVector<'_>> {
        self.row_of(word).map(|r| self.row(r))
    }

    /// Cosine between two stored rows using the cached norms. A row against
    /// itself is exactly 1.
    #[inline]
    pub fn cosine_rows(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        cosine_from_parts(
            dot(self.row(a).0, self.row(b).0),
            self.norms[a],
            self.norms[b],
        )
    }

    fn rows_for(&self, words: &[&str]) -> Result<Vec<usize>, EmbeddingError> {
        words
            .iter()
            .map(|w| {
                self.row_of(w)
                    .ok_or_else(|| EmbeddingError::OutOfVocabulary(w.to_string()))
            })
            .collect()
    }

    /// `|A| x |B|` matrix of word-pair cosines. All words must be in the vocabulary.
    pub fn similarity_matrix(
        &self,
        words_a: &[&str],
        words_b: &[&str],
    ) -> Result<Array2<f64>, EmbeddingError> {
        let ra = self.rows_for(words_a)?;
        let rb = self.rows_for(words_b)?;
        Ok(self.similarity_matrix_rows(&ra, &rb))
    }

    pub fn similarity_matrix_rows(&self, rows_a: &[usize], rows_b: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows_a.len(), rows_b.len()), |(i, j)| {
            self.cosine_rows(rows_a[i], rows_b[j])
        })
    }
}

struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
