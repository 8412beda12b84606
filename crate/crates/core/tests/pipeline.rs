use std::fs;
use std::path::{Path, PathBuf};

use claimdist::pipeline::{
    emit_report, run_experiment, CorpusManifest, ExperimentReport, PipelineError, ReportFormat,
};
use claimdist::stats::{median_iqr, TestMethod};

// 2-d vectors; "q" is the query direction and w1..w4 sit at falling cosines to it.
const GLOVE: &str = "\
q 1 0
w1 0.9 0.43588989
w2 0.8 0.6
w3 0.7 0.71414284
w4 0.6 0.8
near 0.95 0.31224990
far 0.1 0.99498744
";

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("vectors.txt"), GLOVE).unwrap();
        fs::write(root.join("query.txt"), "The q.").unwrap();
        Fixture { _dir: dir, root }
    }

    fn text(&self, name: &str, body: &str) -> &Self {
        fs::write(self.root.join(name), body).unwrap();
        self
    }

    fn manifest(&self, docs: &[(&str, &str, &str)], extra: &str) -> PathBuf {
        let mut m = String::from(
            "[query]\nid = \"query\"\npath = \"query.txt\"\n\n[embedding]\npath = \"vectors.txt\"\nexpected_dim = 2\n\n",
        );
        m.push_str(extra);
        for (id, group, path) in docs {
            m.push_str(&format!(
                "\n[[documents]]\nid = \"{id}\"\ngroup = \"{group}\"\npath = \"{path}\"\n"
            ));
        }
        let p = self.root.join("manifest.toml");
        fs::write(&p, m).unwrap();
        p
    }

    fn standard(&self) -> PathBuf {
        self.text("1.txt", "w1 w1 near")
            .text("2.txt", "w4 far")
            .text("3.txt", "w2")
            .text("4.txt", "far far w3");
        self.manifest(
            &[
                ("1", "A", "1.txt"),
                ("2", "A", "2.txt"),
                ("3", "B", "3.txt"),
                ("4", "B", "4.txt"),
            ],
            "",
        )
    }
}

fn run(path: &Path) -> Result<ExperimentReport, PipelineError> {
    run_experiment(&CorpusManifest::from_path(path)?)
}

#[test]
fn duplicate_id_is_named() {
    let f = Fixture::new();
    f.text("1.txt", "w1");
    let err = run(&f.manifest(&[("1", "A", "1.txt"), ("1", "B", "1.txt")], "")).unwrap_err();
    assert!(matches!(&err, PipelineError::DuplicateId(id) if id == "1"));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn missing_file_names_id_and_path() {
    let f = Fixture::new();
    let err = run(&f.manifest(&[("7", "A", "nope.txt")], "")).unwrap_err();
    match &err {
        PipelineError::MissingFile { id, path, .. } => {
            assert_eq!(id, "7");
            assert!(path.ends_with("nope.txt"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn empty_group_label_rejected() {
    let f = Fixture::new();
    f.text("1.txt", "w1");
    let err = run(&f.manifest(&[("1", " ", "1.txt")], "")).unwrap_err();
    assert!(matches!(err, PipelineError::EmptyGroupLabel { .. }));
}

#[test]
fn unknown_manifest_fields_rejected() {
    let f = Fixture::new();
    f.text("1.txt", "w1");
    let err = run(&f.manifest(
        &[("1", "A", "1.txt")],
        "[options]\nvariant = \"symmetric-max\"\ncolour = 3\n",
    ))
    .unwrap_err();
    assert!(matches!(err, PipelineError::Manifest(_)));
}

#[test]
fn single_group_corpus_omits_tests() {
    let f = Fixture::new();
    f.text("1.txt", "w1");
    let report = run(&f.manifest(&[("1", "only", "1.txt")], "")).unwrap();
    assert_eq!(report.groups.len(), 1);
    assert!(report.omnibus.is_none() && report.pairwise.is_empty());
    assert!(report.notes.iter().any(|n| n.contains("omitted")));
    let text = String::from_utf8(emit_report(&report, ReportFormat::Text)).unwrap();
    assert!(text.contains("omitted"));
    assert!(!text.contains("Kruskal"));
}

#[test]
fn group_emptied_by_oov_is_an_error() {
    let f = Fixture::new();
    f.text("1.txt", "w1").text("2.txt", "zzz unknown");
    let err = run(&f.manifest(&[("1", "A", "1.txt"), ("2", "B", "2.txt")], "")).unwrap_err();
    assert!(matches!(&err, PipelineError::EmptyGroup(g) if g == "B"));
}

#[test]
fn unscoreable_query_is_fatal() {
    let f = Fixture::new();
    f.text("query.txt", "nothing known here")
        .text("1.txt", "w1");
    let err = run(&f.manifest(&[("1", "A", "1.txt")], "")).unwrap_err();
    assert!(matches!(err, PipelineError::QueryUnscoreable { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn partition_and_skips() {
    let f = Fixture::new();
    f.text("1.txt", "w1")
        .text("2.txt", "w2")
        .text("3.txt", "only oov words")
        .text("4.txt", "w3");
    let report = run(&f.manifest(
        &[
            ("1", "A", "1.txt"),
            ("2", "A", "2.txt"),
            ("3", "A", "3.txt"),
            ("4", "B", "4.txt"),
        ],
        "",
    ))
    .unwrap();
    assert_eq!(report.scored_count() + report.skipped.len(), 4);
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].id, "3");
    assert_eq!(report.skipped[0].group, "A");
    let mut seen: Vec<&str> = report
        .groups
        .iter()
        .flat_map(|g| g.ranking.iter().map(|e| e.id.as_str()))
        .collect();
    seen.sort();
    assert_eq!(seen, ["1", "2", "4"]);
    let text = String::from_utf8(emit_report(&report, ReportFormat::Text)).unwrap();
    assert!(text.contains("Skipped documents"));
}

#[test]
fn rankings_sorted_and_scores_match_geometry() {
    let f = Fixture::new();
    let report = run(&f.standard()).unwrap();
    for g in &report.groups {
        assert!(g
            .ranking
            .windows(2)
            .all(|w| w[0].similarity >= w[1].similarity));
    }
    // Single-word bags: similarity is the cosine to the query word.
    let b = report.group("B").unwrap();
    let three = b.ranking.iter().find(|e| e.id == "3").unwrap();
    assert!((three.similarity - 0.8).abs() < 1e-6);
    assert!((three.distance + three.similarity - 1.0).abs() < 1e-12);
}

#[test]
fn provenance_is_complete() {
    let f = Fixture::new();
    let report = run(&f.standard()).unwrap();
    let p = &report.provenance;
    assert_eq!(p.embedding_sha256.len(), 64);
    assert_eq!(p.stopwords_sha256.len(), 64);
    assert!(!p.stopwords_name.is_empty() && !p.tool_version.is_empty());
    assert_eq!(p.embedding_dim, 2);
    assert_eq!(p.seed, 42);
    assert_eq!(p.variant.to_string(), "symmetric-max");
}

#[test]
fn json_round_trip_is_byte_identical() {
    let f = Fixture::new();
    let report = run(&f.standard()).unwrap();
    let json = emit_report(&report, ReportFormat::Json);
    let parsed: ExperimentReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(parsed, report);
    assert_eq!(emit_report(&parsed, ReportFormat::Json), json);
}

#[test]
fn repeated_runs_identical() {
    let f = Fixture::new();
    let path = f.standard();
    assert_eq!(
        emit_report(&run(&path).unwrap(), ReportFormat::Json),
        emit_report(&run(&path).unwrap(), ReportFormat::Json)
    );
}

#[test]
fn text_footer_median_matches_values() {
    let f = Fixture::new();
    let report = run(&f.standard()).unwrap();
    let text = String::from_utf8(emit_report(&report, ReportFormat::Text)).unwrap();
    assert!(text.contains("Doc ID - Distance"));
    assert!(!text.contains("Skipped"));
    let median_line = text.lines().find(|l| l.starts_with("Median")).unwrap();
    let printed: Vec<f64> = median_line
        .split_whitespace()
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    for (g, m) in report.groups.iter().zip(&printed) {
        let values: Vec<f64> = g.ranking.iter().map(|e| e.similarity).collect();
        let recomputed = median_iqr(&values).unwrap().median;
        assert_eq!(format!("{recomputed:.4}"), format!("{m:.4}"));
    }
    assert!(text.lines().any(|l| l.starts_with("[IQR]")));
    assert!(text.contains("Kruskal-Wallis"));
}

#[test]
fn csv_layout() {
    let f = Fixture::new();
    let report = run(&f.standard()).unwrap();
    let csv = String::from_utf8(emit_report(&report, ReportFormat::Csv)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "group,id,similarity");
    assert_eq!(lines.len(), 5);
    assert!(!csv.contains('\r'));
    for l in &lines[1..] {
        let value = l.rsplit(',').next().unwrap();
        assert_eq!(value.split('.').nth(1).unwrap().len(), 6);
    }
}

#[test]
fn symmetric_groups_give_unit_p() {
    // Ranks {1,4} against {2,3}: both rank-sum distributions coincide by symmetry.
    let f = Fixture::new();
    f.text("1.txt", "w1")
        .text("2.txt", "w4")
        .text("3.txt", "w2")
        .text("4.txt", "w3");
    let report = run(&f.manifest(
        &[
            ("1", "A", "1.txt"),
            ("2", "A", "2.txt"),
            ("3", "B", "3.txt"),
            ("4", "B", "4.txt"),
        ],
        "",
    ))
    .unwrap();
    let w = &report.pairwise[0];
    assert_eq!(w.method, TestMethod::Exact);
    assert!((w.p_value - 1.0).abs() < 1e-12);
    assert!(w.stars.is_empty());
}

#[test]
fn selector_is_recorded() {
    let f = Fixture::new();
    f.text(
        "query.txt",
        "We propose w1 near. Unrelated far far. We show q w2.",
    )
    .text("1.txt", "w1")
    .text("2.txt", "far");
    let path = f.manifest(
        &[("1", "A", "1.txt"), ("2", "B", "2.txt")],
        "[query.selector]\nkind = \"ma\"\ntop_k = 2\nwindow = 1\n",
    );
    let report = run(&path).unwrap();
    let selected = report.query.selected_sentences.clone().unwrap();
    assert_eq!(selected.len(), 2);
    assert!(selected.windows(2).all(|w| w[0] < w[1]));
    assert!(report.provenance.selector.is_some());
}
