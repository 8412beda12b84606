use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use claimdist::claimselect::{self, LdaConfig, SelectError, DEFAULT_CUES};
use claimdist::embeddings::{EmbeddingError, EmbeddingTable};
use claimdist::pipeline::{
    bench_scaling, emit_report, run_experiment, CorpusManifest, PipelineError, ReportFormat,
};
use claimdist::textprep::{build_nbow, preprocess, StopwordList, TextError};
use claimdist::transport::{compare_ids, rwmd_distance, wmd_exact, TransportError, Variant};

#[derive(Parser)]
#[command(
    name = "claimdist",
    version,
    about = "Relaxed Word Mover's Distance scoring of knowledge claims"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a manifest end to end and emit the report.
    Run {
        manifest: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print every scored document ranked by similarity to the query.
    Rank { manifest: PathBuf },
    /// Distance between two text files.
    Dist {
        query: PathBuf,
        candidate: PathBuf,
        #[command(flatten)]
        emb: EmbeddingArgs,
        #[arg(long, default_value = "symmetric-max")]
        variant: Variant,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Select claim sentences from a text file.
    Extract(ExtractArgs),
    /// Show tokens (and bag-of-words weights when embeddings are given).
    Preprocess {
        file: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Embedding file utilities.
    Embeddings {
        #[command(subcommand)]
        command: EmbeddingsCommand,
    },
    /// Time exact WMD against batched RWMD on random documents.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        pairs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EmbeddingsCommand {
    /// Dimension, vocabulary size and load diagnostics.
    Info {
        path: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
    },
}

#[derive(Args)]
struct EmbeddingArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorKind {
    Lda,
    Ma,
}

#[derive(Args)]
struct ExtractArgs {
    file: PathBuf,
    #[arg(long)]
    selector: SelectorKind,
    #[arg(long = "top-k")]
    top_k: usize,
    /// Number of LDA topics.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated cue words for the LDA claim topic.
    #[arg(long, value_delimiter = ',')]
    cues: Vec<String>,
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<TextError> for Failure {
    fn from(e: TextError) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<TransportError> for Failure {
    fn from(e: TransportError) -> Self {
        let code = match e {
            TransportError::TooLarge(..) | TransportError::UnsupportedVariant(_) => 1,
            TransportError::Text(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SelectError> for Failure {
    fn from(e: SelectError) -> Self {
        let code = if matches!(e, SelectError::InvalidParameter(_)) {
            1
        } else {
            2
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn write_output(bytes: &[u8], out: Option<&Path>) -> Result<(), Failure> {
    let result = match out {
        Some(p) => fs::write(p, bytes),
        None => std::io::stdout().write_all(bytes),
    };
    result.map_err(|e| Failure {
        code: 2,
        message: format!("cannot write output: {e}"),
    })
}

fn print_json(value: &serde_json::Value) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("json value serializes");
    bytes.push(b'\n');
    write_output(&bytes, None)
}

fn stopword_list(path: Option<&Path>) -> Result<StopwordList, Failure> {
    Ok(match path {
        Some(p) => StopwordList::from_path(p)?,
        None => StopwordList::snowball_english(),
    })
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            manifest,
            format,
            out,
        } => {
            let report = run_experiment(&CorpusManifest::from_path(&manifest)?)?;
            let format = match format {
                Format::Text => ReportFormat::Text,
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            write_output(&emit_report(&report, format), out.as_deref())
        }
        Command::Rank { manifest } => {
            let report = run_experiment(&CorpusManifest::from_path(&manifest)?)?;
            let mut rows: Vec<(&str, &str, f64)> = report
                .groups
                .iter()
                .flat_map(|g| {
                    g.ranking
                        .iter()
                        .map(move |e| (g.label.as_str(), e.id.as_str(), e.similarity))
                })
                .collect();
            rows.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| compare_ids(a.1, b.1)));
            let mut out = format!("Query {}\nrank  id  group  similarity\n", report.query.id);
            for (i, (group, id, sim)) in rows.iter().enumerate() {
                out.push_str(&format!("{}  {}  {}  {:.4}\n", i + 1, id, group, sim));
            }
            for s in &report.skipped {
                out.push_str(&format!("skipped  {}  {}  {}\n", s.id, s.group, s.reason));
            }
            write_output(out.as_bytes(), None)
        }
        Command::Dist {
            query,
            candidate,
            emb,
            variant,
            stopwords,
        } => {
            let stop = stopword_list(stopwords.as_deref())?;
            let table = EmbeddingTable::from_path(&emb.embeddings, emb.dim)?;
            let a = build_nbow(&preprocess(&read_text(&query)?, &stop), &table)?;
            let b = build_nbow(&preprocess(&read_text(&candidate)?, &stop), &table)?;
            let result = match variant {
                Variant::Exact => wmd_exact(&a, &b, &table)?.0,
                v => rwmd_distance(&a, &b, &table, v)?,
            };
            print_json(&json!({
                "distance": result.distance,
                "similarity": result.similarity,
                "variant": result.variant,
            }))
        }
        Command::Extract(args) => extract(args),
        Command::Preprocess {
            file,
            embeddings,
            dim,
            stopwords,
        } => {
            let stop = stopword_list(stopwords.as_deref())?;
            let tokens = preprocess(&read_text(&file)?, &stop);
            let mut value = json!({ "stopwords": stop.name(), "tokens": tokens });
            if let Some(path) = embeddings {
                let table = EmbeddingTable::from_path(path, dim)?;
                let nbow = build_nbow(&tokens, &table)?;
                let weights: Vec<_> = nbow
                    .words()
                    .iter()
                    .zip(nbow.weights())
                    .map(|(w, x)| json!([w, x]))
                    .collect();
                value["nbow"] = json!(weights);
                value["oov_dropped"] = json!(nbow.dropped());
            }
            print_json(&value)
        }
        Command::Embeddings {
            command: EmbeddingsCommand::Info { path, dim },
        } => {
            let table = EmbeddingTable::from_path(&path, dim)?;
            let stats = table.stats();
            print_json(&json!({
                "path": path.display().to_string(),
                "sha256": table.sha256(),
                "dimension": table.dim(),
                "vocabulary": table.len(),
                "header_skipped": stats.header_skipped,
                "duplicates": stats.duplicates,
                "zero_rows_dropped": stats.zero_rows_dropped,
            }))
        }
        Command::Bench {
            sizes,
            pairs,
            seed,
            out,
        } => {
            let report = bench_scaling(&sizes, pairs, seed)?;
            write_output(report.to_csv().as_bytes(), out.as_deref())
        }
    }
}

fn extract(args: ExtractArgs) -> Result<(), Failure> {
    let stop = stopword_list(args.stopwords.as_deref())?;
    let mut sentences = claimselect::split_sentences(&read_text(&args.file)?);
    claimselect::filter_sentence_tokens(&mut sentences, &stop);
    let (picked, settings) = match args.selector {
        SelectorKind::Lda => {
            let d = LdaConfig::default();
            let config = LdaConfig {
                topics: args.k.unwrap_or(d.topics),
                alpha: args.alpha.unwrap_or(d.alpha),
                beta: args.beta.unwrap_or(d.beta),
                iterations: args.iters.unwrap_or(d.iterations),
                seed: args.seed,
            };
            let cues: HashSet<String> = if args.cues.is_empty() {
                DEFAULT_CUES.iter().map(|c| c.to_string()).collect()
            } else {
                args.cues.iter().map(|c| c.to_lowercase()).collect()
            };
            let model = claimselect::fit_lda(&sentences, config)?;
            let picked = claimselect::lda_select(&model, &sentences, &cues, args.top_k)?;
            let mut cue_list: Vec<_> = cues.into_iter().collect();
            cue_list.sort();
            (
                picked,
                json!({ "selector": "lda", "lda": config, "cues": cue_list, "top_k": args.top_k }),
            )
        }
        SelectorKind::Ma => {
            let path = args
                .embeddings
                .as_deref()
                .ok_or_else(|| Failure::usage("the ma selector needs --embeddings"))?;
            let table = EmbeddingTable::from_path(path, args.dim)?;
            let picked = claimselect::ma_select(&sentences, &table, args.window, args.top_k)?;
            (
                picked,
                json!({ "selector": "ma", "window": args.window, "top_k": args.top_k }),
            )
        }
    };
    let selected: Vec<_> = picked
        .iter()
        .map(|s| json!({ "index": s.index, "score": s.score, "text": s.text }))
        .collect();
    print_json(&json!({ "settings": settings, "sentences": selected }))
}
