use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::claimselect::{LdaConfig, DEFAULT_CUES};
use crate::textprep::{preprocess, StopwordList, TokenizedDoc};
use crate::transport::Variant;

/// Experiment definition, read from TOML.
///
/// ```toml
/// [query]
/// id = "query"
/// path = "texts/query.txt"
///
/// [query.selector]        # optional
/// kind = "ma"             # or "lda"
/// top_k = 10
/// window = 3
///
/// [embedding]
/// path = "glove.6B.300d.txt"
/// expected_dim = 300
///
/// [options]
/// variant = "symmetric-max"
/// stopwords = "stop.txt"  # optional, bundled Snowball list otherwise
/// seed = 42
///
/// [[documents]]
/// id = "1"
/// group = "h-index"
/// path = "texts/h-index/1.txt"
/// ```
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub query: QuerySpec,
    pub embedding: EmbeddingSpec,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub documents: Vec<DocumentSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub selector: Option<SelectorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub expected_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            variant: default_variant(),
            stopwords: None,
            seed: default_seed(),
        }
    }
}

fn default_variant() -> Variant {
    Variant::SymmetricMax
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentSpec {
    pub id: String,
    pub group: String,
    pub path: PathBuf,
}

/// Claim-sentence selection applied to the query text before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SelectorConfig {
    Lda {
        top_k: usize,
        #[serde(default = "default_topics")]
        topics: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_cues")]
        cues: Vec<String>,
    },
    Ma {
        top_k: usize,
        #[serde(default = "default_window")]
        window: usize,
    },
}

impl SelectorConfig {
    pub fn lda_config(&self, seed: u64) -> Option<LdaConfig> {
        match *self {
            SelectorConfig::Lda {
                topics,
                alpha,
                beta,
                iterations,
                ..
            } => Some(LdaConfig {
                topics,
                alpha,
                beta,
                iterations,
                seed,
            }),
            SelectorConfig::Ma { .. } => None,
        }
    }
}

fn default_topics() -> usize {
    LdaConfig::default().topics
}
fn default_alpha() -> f64 {
    LdaConfig::default().alpha
}
fn default_beta() -> f64 {
    LdaConfig::default().beta
}
fn default_iterations() -> usize {
    LdaConfig::default().iterations
}
fn default_cues() -> Vec<String> {
    DEFAULT_CUES.iter().map(|s| s.to_string()).collect()
}
fn default_window() -> usize {
    3
}

impl CorpusManifest {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest = Self::from_toml(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    /// Parses and validates; relative paths resolve against the working directory.
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let manifest: CorpusManifest =
            toml::from_str(text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if self.documents.is_empty() {
            return Err(PipelineError::NoDocuments);
        }
        let mut ids = HashSet::new();
        ids.insert(self.query.id.as_str());
        for d in &self.documents {
            if d.group.trim().is_empty() {
                return Err(PipelineError::EmptyGroupLabel { id: d.id.clone() });
            }
            if !ids.insert(d.id.as_str()) {
                return Err(PipelineError::DuplicateId(d.id.clone()));
            }
        }
        if self.options.variant == Variant::Exact {
            return Err(PipelineError::Manifest(
                "corpus scoring uses a relaxed variant, not exact".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Group labels in order of first appearance.
    pub fn group_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for d in &self.documents {
            if !labels.contains(&d.group) {
                labels.push(d.group.clone());
            }
        }
        labels
    }

    pub fn stopword_list(&self) -> Result<StopwordList, PipelineError> {
        match &self.options.stopwords {
            Some(p) => Ok(StopwordList::from_path(self.resolve(p))?),
            None => Ok(StopwordList::snowball_english()),
        }
    }
}

/// Query text plus every document, tokenized and stopword-filtered.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub query_id: String,
    pub query_text: String,
    pub query: TokenizedDoc,
    /// Documents per group, groups in manifest order.
    pub groups: Vec<(String, Vec<TokenizedDoc>)>,
}

impl Corpus {
    pub fn document_count(&self) -> usize {
        self.groups.iter().map(|(_, d)| d.len()).sum()
    }
}

fn read_text(id: &str, path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::MissingFile {
        id: id.to_string(),
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|_| PipelineError::NotUtf8 {
        id: id.to_string(),
        path: path.to_path_buf(),
    })
}

pub fn load_corpus(
    manifest: &CorpusManifest,
    stopwords: &StopwordList,
) -> Result<Corpus, PipelineError> {
    let query_path = manifest.resolve(&manifest.query.path);
    let query_text = read_text(&manifest.query.id, &query_path)?;
    let query = TokenizedDoc {
        id: manifest.query.id.clone(),
        group: "query".into(),
        tokens: preprocess(&query_text, stopwords),
    };
    let mut groups: Vec<(String, Vec<TokenizedDoc>)> = manifest
        .group_labels()
        .into_iter()
        .map(|g| (g, Vec::new()))
        .collect();
    for d in &manifest.documents {
        let text = read_text(&d.id, &manifest.resolve(&d.path))?;
        let doc = TokenizedDoc {
            id: d.id.clone(),
            group: d.group.clone(),
            tokens: preprocess(&text, stopwords),
        };
        let slot = groups
            .iter_mut()
            .find(|(g, _)| *g == d.group)
            .expect("group listed");
        slot.1.push(doc);
    }
    Ok(Corpus {
        query_id: manifest.query.id.clone(),
        query_text,
        query,
        groups,
    })
}
