//! Corpus ingestion, experiment orchestration, reports and the scaling benchmark.

mod bench;
mod manifest;
mod report;

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claimselect::{self, SelectError};
use crate::embeddings::{EmbeddingError, EmbeddingTable};
use crate::stats::{self, GroupSummary, HypothesisTestResult, StatsError};
use crate::textprep::{build_nbow, StopwordList, TextError};
use crate::transport::{rank_against_query, Candidate, RankedDoc, TransportError, Variant};

pub use bench::{bench_scaling, random_nbow, random_table, BenchReport, BenchRow, BENCH_DIM};
pub use manifest::{
    load_corpus, Corpus, CorpusManifest, DocumentSpec, EmbeddingSpec, Options, QuerySpec,
    SelectorConfig,
};
pub use report::{emit_report, ReportFormat};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest lists no documents")]
    NoDocuments,
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {id:?} has an empty group label")]
    EmptyGroupLabel { id: String },
    #[error("document {id:?}: cannot read {path}: {source}")]
    MissingFile {
        id: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("document {id:?}: {path} is not valid UTF-8")]
    NotUtf8 { id: String, path: PathBuf },
    #[error("group {0:?} has no scoreable documents")]
    EmptyGroup(String),
    #[error("query {id:?} cannot be scored: {source}")]
    QueryUnscoreable {
        id: String,
        #[source]
        source: TextError,
    },
    #[error("embeddings: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("claim selection: {0}")]
    Select(#[from] SelectError),
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("benchmark: {0}")]
    Bench(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl PipelineError {
    /// 1 for usage/config errors, 2 for data errors, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Manifest(_)
            | PipelineError::NoDocuments
            | PipelineError::DuplicateId(_)
            | PipelineError::EmptyGroupLabel { .. }
            | PipelineError::Bench(_) => 1,
            PipelineError::Io { .. }
            | PipelineError::MissingFile { .. }
            | PipelineError::NotUtf8 { .. }
            | PipelineError::EmptyGroup(_)
            | PipelineError::QueryUnscoreable { .. }
            | PipelineError::Embedding(_)
            | PipelineError::Text(_)
            | PipelineError::Select(_) => 2,
            PipelineError::Stats(_) | PipelineError::Transport(_) | PipelineError::Invariant(_) => {
                3
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub embedding_path: String,
    pub embedding_sha256: String,
    pub embedding_dim: usize,
    pub embedding_vocabulary: usize,
    pub stopwords_name: String,
    pub stopwords_sha256: String,
    pub variant: Variant,
    pub seed: u64,
    pub selector: Option<SelectorConfig>,
    pub similarity_mapping: String,
    pub ground_cost: String,
    pub quantile_convention: String,
    pub test_sidedness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInfo {
    pub id: String,
    pub tokens: usize,
    pub unique_words: usize,
    pub oov_dropped: usize,
    /// Sentence indices kept by the selector, in document order.
    pub selected_sentences: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub ranking: Vec<RankedDoc>,
    pub summary: GroupSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDoc {
    pub id: String,
    pub group: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub query: QueryInfo,
    pub groups: Vec<GroupReport>,
    pub omnibus: Option<HypothesisTestResult>,
    pub pairwise: Vec<HypothesisTestResult>,
    pub skipped: Vec<SkippedDoc>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn group(&self, label: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn scored_count(&self) -> usize {
        self.groups.iter().map(|g| g.ranking.len()).sum()
    }
}

/// Loaded resources for one experiment; tests and the CLI can inject their own.
pub struct Experiment<'a> {
    pub manifest: &'a CorpusManifest,
    pub table: &'a EmbeddingTable,
    pub stopwords: &'a StopwordList,
}

/// Loads everything the manifest names and runs the experiment.
pub fn run_experiment(manifest: &CorpusManifest) -> Result<ExperimentReport, PipelineError> {
    let stopwords = manifest.stopword_list()?;
    let table = EmbeddingTable::from_path(
        manifest.resolve(&manifest.embedding.path),
        manifest.embedding.expected_dim,
    )?;
    Experiment {
        manifest,
        table: &table,
        stopwords: &stopwords,
    }
    .run()
}

impl Experiment<'_> {
    pub fn run(&self) -> Result<ExperimentReport, PipelineError> {
        let manifest = self.manifest;
        let table = self.table;
        let corpus = load_corpus(manifest, self.stopwords)?;

        let (query_tokens, selected) = self.query_tokens(&corpus)?;
        let query =
            build_nbow(&query_tokens, table).map_err(|source| PipelineError::QueryUnscoreable {
                id: corpus.query_id.clone(),
                source,
            })?;

        let mut group_of: HashMap<String, String> = HashMap::new();
        let mut candidates = Vec::new();
        for (label, docs) in &corpus.groups {
            for d in docs {
                group_of.insert(d.id.clone(), label.clone());
                candidates.push(Candidate {
                    id: d.id.clone(),
                    nbow: build_nbow(&d.tokens, table),
                });
            }
        }
        let ranking = rank_against_query(&query, candidates, table, manifest.options.variant)?;
        let label_for = |id: &str| {
            group_of
                .get(id)
                .cloned()
                .ok_or_else(|| PipelineError::Invariant(format!("ranked id {id:?} not in corpus")))
        };

        let mut groups = Vec::new();
        for (label, _) in &corpus.groups {
            let mut entries = Vec::new();
            for e in &ranking.entries {
                if label_for(&e.id)? == *label {
                    entries.push(e.clone());
                }
            }
            if entries.is_empty() {
                return Err(PipelineError::EmptyGroup(label.clone()));
            }
            let sims: Vec<f64> = entries.iter().map(|e| e.similarity).collect();
            groups.push(GroupReport {
                label: label.clone(),
                summary: stats::median_iqr(&sims)?,
                ranking: entries,
            });
        }
        let skipped = ranking
            .skipped
            .iter()
            .map(|s| {
                Ok(SkippedDoc {
                    id: s.id.clone(),
                    group: label_for(&s.id)?,
                    reason: s.reason.clone(),
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;

        let mut notes = Vec::new();
        let (omnibus, pairwise) = if groups.len() < 2 {
            notes.push("significance tests omitted: fewer than two groups".to_string());
            (None, Vec::new())
        } else {
            let samples: Vec<Vec<f64>> = groups
                .iter()
                .map(|g| g.ranking.iter().map(|e| e.similarity).collect())
                .collect();
            let labels: Vec<&str> = groups.iter().map(|g| g.label.as_str()).collect();
            let omnibus = stats::kruskal_wallis(&samples)?.with_groups(labels.iter().copied());
            let mut pairwise = Vec::new();
            for i in 0..samples.len() {
                for j in i + 1..samples.len() {
                    pairwise.push(
                        stats::wilcoxon_rank_sum_exact(&samples[i], &samples[j])?
                            .with_groups([labels[i], labels[j]]),
                    );
                }
            }
            (Some(omnibus), pairwise)
        };

        let report = ExperimentReport {
            provenance: self.provenance(),
            query: QueryInfo {
                id: corpus.query_id.clone(),
                tokens: query_tokens.len(),
                unique_words: query.len(),
                oov_dropped: query.dropped(),
                selected_sentences: selected,
            },
            groups,
            omnibus,
            pairwise,
            skipped,
            notes,
        };
        if report.scored_count() + report.skipped.len() != corpus.document_count() {
            return Err(PipelineError::Invariant(
                "scored + skipped documents do not match the manifest".into(),
            ));
        }
        Ok(report)
    }

    /// Query tokens, restricted to the selected sentences when a selector is configured.
    fn query_tokens(
        &self,
        corpus: &Corpus,
    ) -> Result<(Vec<String>, Option<Vec<usize>>), PipelineError> {
        let Some(selector) = &self.manifest.query.selector else {
            return Ok((corpus.query.tokens.clone(), None));
        };
        let mut sentences = claimselect::split_sentences(&corpus.query_text);
        claimselect::filter_sentence_tokens(&mut sentences, self.stopwords);
        let picked = match selector {
            SelectorConfig::Lda { top_k, cues, .. } => {
                let config = selector
                    .lda_config(self.manifest.options.seed)
                    .expect("lda selector");
                let model = claimselect::fit_lda(&sentences, config)?;
                let cues: HashSet<String> = cues.iter().map(|c| c.to_lowercase()).collect();
                claimselect::lda_select(&model, &sentences, &cues, *top_k)?
            }
            SelectorConfig::Ma { top_k, window } => {
                claimselect::ma_select(&sentences, self.table, *window, *top_k)?
            }
        };
        let mut indices: Vec<usize> = picked.iter().map(|s| s.index).collect();
        indices.sort_unstable();
        let tokens = indices
            .iter()
            .flat_map(|&i| sentences[i].tokens.iter().cloned())
            .collect();
        Ok((tokens, Some(indices)))
    }

    fn provenance(&self) -> Provenance {
        let m = self.manifest;
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            embedding_path: m.embedding.path.display().to_string(),
            embedding_sha256: self.table.sha256().unwrap_or("unhashed").to_string(),
            embedding_dim: self.table.dim(),
            embedding_vocabulary: self.table.len(),
            stopwords_name: self.stopwords.name().to_string(),
            stopwords_sha256: self.stopwords.sha256().to_string(),
            variant: m.options.variant,
            seed: m.options.seed,
            selector: m.query.selector.clone(),
            similarity_mapping: "similarity = 1 - distance".into(),
            ground_cost: "1 - max(0, cosine)".into(),
            quantile_convention: stats::QUANTILE_CONVENTION.into(),
            test_sidedness: "two-sided".into(),
        }
    }
}
