use std::fmt::Write as _;
use std::str::FromStr;

use super::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "text-table" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => text_table(report).into_bytes(),
        ReportFormat::Csv => csv(report).into_bytes(),
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
    }
}

fn csv(report: &ExperimentReport) -> String {
    let mut out = String::from("group,id,similarity\n");
    for g in &report.groups {
        for e in &g.ranking {
            let _ = writeln!(
                out,
                "{},{},{:.6}",
                csv_field(&g.label),
                csv_field(&e.id),
                e.similarity
            );
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.4}")
    }
}

fn push_row(out: &mut String, cells: &[String], widths: &[usize]) {
    let line: Vec<String> = cells
        .iter()
        .zip(widths)
        .map(|(c, &w)| format!("{c:<w$}"))
        .collect();
    out.push_str(line.join("  ").trim_end());
    out.push('\n');
}

fn text_table(report: &ExperimentReport) -> String {
    let p = &report.provenance;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Query {} | variant {} | embedding {} (d={}, sha256 {}) | stopwords {} (sha256 {})",
        report.query.id,
        p.variant,
        p.embedding_path,
        p.embedding_dim,
        short(&p.embedding_sha256),
        p.stopwords_name,
        short(&p.stopwords_sha256),
    );
    let _ = writeln!(
        out,
        "Values are relaxed similarities ({}).",
        p.similarity_mapping
    );
    out.push('\n');

    let rows = report
        .groups
        .iter()
        .map(|g| g.ranking.len())
        .max()
        .unwrap_or(0);
    let mut table: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend(report.groups.iter().map(|g| g.label.clone()));
    table.push(header);
    let mut sub = vec![String::new()];
    sub.extend(
        report
            .groups
            .iter()
            .map(|_| "Doc ID - Distance".to_string()),
    );
    table.push(sub);
    for r in 0..rows {
        let mut row = vec![String::new()];
        for g in &report.groups {
            row.push(
                g.ranking
                    .get(r)
                    .map(|e| format!("{} - {:.4}", e.id, e.similarity))
                    .unwrap_or_default(),
            );
        }
        table.push(row);
    }
    let mut median = vec!["Median".to_string()];
    median.extend(
        report
            .groups
            .iter()
            .map(|g| format!("{:.4}", g.summary.median)),
    );
    table.push(median);
    let mut iqr = vec!["[IQR]".to_string()];
    iqr.extend(
        report
            .groups
            .iter()
            .map(|g| format!("[{:.4}-{:.4}]", g.summary.q1, g.summary.q3)),
    );
    table.push(iqr);

    let cols = report.groups.len() + 1;
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            table
                .iter()
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    for row in &table {
        push_row(&mut out, row, &widths);
    }

    out.push('\n');
    if let Some(kw) = &report.omnibus {
        let mut sig = vec![vec![
            "Kruskal-Wallis test".to_string(),
            format!("H = {:.4}", kw.statistic),
            format!("p = {}", format_p(kw.p_value)),
            kw.stars.clone(),
            kw.method.to_string(),
        ]];
        sig.push(vec![
            "Pairwise comparisons using Wilcoxon rank sum exact test".to_string(),
        ]);
        for t in &report.pairwise {
            sig.push(vec![
                t.groups.join(" vs "),
                format!("W = {:.4}", t.statistic),
                format!("p = {}", format_p(t.p_value)),
                t.stars.clone(),
                t.method.to_string(),
            ]);
        }
        let width = |c: usize| {
            sig.iter()
                .filter(|r| r.len() > 1)
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..5).map(width).collect();
        for row in &sig {
            if row.len() == 1 {
                out.push_str(&row[0]);
                out.push('\n');
            } else {
                push_row(&mut out, row, &widths);
            }
        }
        out.push_str("*Significant 0.01 < p <= 0.05, **Significant p <= 0.01\n");
    }
    for note in &report.notes {
        let _ = writeln!(out, "Note: {note}");
    }
    if !report.skipped.is_empty() {
        out.push_str("\nSkipped documents\n");
        for s in &report.skipped {
            let _ = writeln!(out, "{} ({}): {}", s.id, s.group, s.reason);
        }
    }
    out
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}
