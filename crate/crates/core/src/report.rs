//! Rendering of result sets into per-bundle tables (markdown or CSV) and a
//! textual summary.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critics::EqVerdict;
use crate::pipeline::{CellResult, ResultSet, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(format!(
                "unknown table format '{other}' (expected md or csv)"
            )),
        }
    }
}

/// One rendered row. The same values feed both output formats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub specification_type_label: String,
    pub compiled: String,
    pub eq_check: String,
    pub verified: String,
    pub loc: String,
    pub fully_proved_flag: bool,
}

impl TableRow {
    /// A row that did not compile carries no downstream values.
    pub fn na_propagation_holds(&self) -> bool {
        self.compiled != "No"
            || (self.eq_check == "n/a" && self.verified == "n/a" && self.loc == "n/a")
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no cells for bundle '{requested}'; available bundles: {available}")]
    UnknownBundle {
        requested: String,
        available: String,
    },
}

fn row_for(cell: &CellResult) -> TableRow {
    let compiled = match &cell.compile {
        Some(c) if c.success => "Yes",
        Some(_) => "No",
        // never reached the compiler (extraction or infrastructure failure)
        None => "No",
    }
    .to_string();
    let eq_check = if compiled == "No" {
        "n/a".to_string()
    } else {
        match cell.equivalence.as_ref().map(|e| e.verdict) {
            Some(EqVerdict::Equivalent) => "Eq".to_string(),
            Some(EqVerdict::NotShown) => "Not Eq".to_string(),
            Some(EqVerdict::ToolUnavailable) => "—".to_string(),
            None => "n/a".to_string(),
        }
    };
    let verified = if compiled == "No" {
        "n/a".to_string()
    } else {
        match &cell.verification {
            Some(v) => format!("{} / {}", v.proved, v.total),
            None => "n/a".to_string(),
        }
    };
    let loc = if compiled == "No" {
        "n/a".to_string()
    } else {
        match &cell.quality {
            Some(q) => q.loc.to_string(),
            None => "n/a".to_string(),
        }
    };
    TableRow {
        model: cell.model_id.clone(),
        specification_type_label: cell.combination_label.clone(),
        compiled,
        eq_check,
        verified,
        loc,
        fully_proved_flag: cell.fully_proved(),
    }
}

/// Rows for one bundle, in the canonical order of the result set.
pub fn table_rows(results: &ResultSet, bundle: &str) -> Result<Vec<TableRow>, ReportError> {
    let rows: Vec<TableRow> = results
        .cells
        .iter()
        .filter(|c| c.bundle_name == bundle)
        .map(row_for)
        .collect();
    if rows.is_empty() {
        let available: BTreeSet<&str> = results
            .cells
            .iter()
            .map(|c| c.bundle_name.as_str())
            .collect();
        return Err(ReportError::UnknownBundle {
            requested: bundle.to_string(),
            available: available.into_iter().collect::<Vec<_>>().join(", "),
        });
    }
    Ok(rows)
}

const HEADERS: [&str; 5] = [
    "Model",
    "Specification Type",
    "Compiled",
    "Eq. Check",
    "Verified (Proved Goals)",
];

/// Render the per-bundle results table. Fully proved cells are emphasized:
/// bold verified value plus a check mark in markdown, a `fully_proved`
/// column in CSV.
pub fn render_results_table(
    results: &ResultSet,
    bundle: &str,
    format: TableFormat,
) -> Result<String, ReportError> {
    let rows = table_rows(results, bundle)?;
    Ok(match format {
        TableFormat::Markdown => render_markdown(&rows),
        TableFormat::Csv => render_csv(&rows),
    })
}

fn render_markdown(rows: &[TableRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} | LoC |\n", HEADERS.join(" | ")));
    out.push_str(&"| --- ".repeat(HEADERS.len() + 1));
    out.push_str("|\n");
    for row in rows {
        let verified = if row.fully_proved_flag {
            format!("**{}** ✔", row.verified)
        } else {
            row.verified.clone()
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            row.model, row.specification_type_label, row.compiled, row.eq_check, verified, row.loc
        ));
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn render_csv(rows: &[TableRow]) -> String {
    let mut out = String::new();
    out.push_str("model,specification_type,compiled,eq_check,verified,loc,fully_proved\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_escape(&row.model),
            csv_escape(&row.specification_type_label),
            csv_escape(&row.compiled),
            csv_escape(&row.eq_check),
            csv_escape(&row.verified),
            csv_escape(&row.loc),
            row.fully_proved_flag
        ));
    }
    out
}

/// Per-model counts across the whole result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub cells: usize,
    pub evaluable_cells: usize,
    pub compiled: usize,
    pub fully_verified: usize,
    pub pass_at_1: f64,
    pub mean_loc: Option<f64>,
}

/// Aggregate counts per model: compiled cells, fully verified cells, pass@1,
/// and mean LoC over cells where the metric exists.
pub fn summarize(results: &ResultSet) -> Vec<ModelSummary> {
    let mut models: Vec<String> = Vec::new();
    for cell in &results.cells {
        if !models.contains(&cell.model_id) {
            models.push(cell.model_id.clone());
        }
    }
    models
        .into_iter()
        .map(|model| {
            let cells: Vec<&CellResult> = results
                .cells
                .iter()
                .filter(|c| c.model_id == model)
                .collect();
            let evaluable = cells
                .iter()
                .filter(|c| c.verdict != Verdict::InfraError)
                .count();
            let compiled = cells
                .iter()
                .filter(|c| c.compile.as_ref().is_some_and(|r| r.success))
                .count();
            let fully_verified = cells.iter().filter(|c| c.fully_proved()).count();
            let passed = cells.iter().filter(|c| c.verdict == Verdict::Pass).count();
            let locs: Vec<f64> = cells
                .iter()
                .filter_map(|c| c.quality.as_ref().map(|q| q.loc as f64))
                .collect();
            ModelSummary {
                cells: cells.len(),
                evaluable_cells: evaluable,
                compiled,
                fully_verified,
                pass_at_1: if evaluable == 0 {
                    0.0
                } else {
                    passed as f64 / evaluable as f64
                },
                mean_loc: if locs.is_empty() {
                    None
                } else {
                    Some(locs.iter().sum::<f64>() / locs.len() as f64)
                },
                model,
            }
        })
        .collect()
}

/// Human-readable rendering of [`summarize`].
pub fn render_summary(results: &ResultSet) -> String {
    let summaries = summarize(results);
    if summaries.is_empty() {
        return "0 evaluable cells\n".to_string();
    }
    let mut out = String::new();
    for s in summaries {
        if s.evaluable_cells == 0 {
            out.push_str(&format!("{}: 0 evaluable cells\n", s.model));
            continue;
        }
        let loc = s
            .mean_loc
            .map(|v| format!("{v:.1}"))
            .unwrap_or_else(|| "n/a".to_string());
        out.push_str(&format!(
            "{}: {} cells, {} compiled, {} fully verified, pass@1 = {}/{} ({:.2}), mean LoC {}\n",
            s.model,
            s.evaluable_cells,
            s.compiled,
            s.fully_verified,
            (s.pass_at_1 * s.evaluable_cells as f64).round() as usize,
            s.evaluable_cells,
            s.pass_at_1,
            loc
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::{CompileReport, EquivalenceResult, VerificationReport};
    use crate::gateway::{GeneratedCandidate, RawResponse};
    use crate::prompt::PromptPair;
    use crate::quality::QualityReport;

    fn base_cell(model: &str, label: &str) -> CellResult {
        CellResult {
            bundle_name: "sfld".into(),
            model_id: model.into(),
            combination_label: label.into(),
            sample_index: 0,
            iterations_used: 0,
            compile: None,
            verification: None,
            equivalence: None,
            quality: None,
            candidate: None,
            failure_detail: None,
            verdict: Verdict::CompileFail,
            prompt_fingerprint: "fp".into(),
            prompt: PromptPair {
                system_text: String::new(),
                user_text: String::new(),
            },
        }
    }

    fn verified_cell(model: &str, label: &str, proved: u32, total: u32, loc: usize) -> CellResult {
        let mut cell = base_cell(model, label);
        cell.compile = Some(CompileReport {
            success: true,
            warnings: vec![],
            errors: vec![],
            tool_version: "gcc".into(),
        });
        cell.verification = Some(VerificationReport {
            proved,
            total,
            goals: vec![],
            solver_log_path: String::new(),
            tool_version: String::new(),
        });
        cell.equivalence = Some(EquivalenceResult {
            verdict: EqVerdict::NotShown,
            detail: String::new(),
        });
        cell.quality = Some(QualityReport {
            loc,
            findings: vec![],
            compiler_warning_count: 0,
            conforms: true,
        });
        cell.candidate = Some(GeneratedCandidate {
            source: "void f(void){}".into(),
            origin: RawResponse {
                text: "void f(void){}".into(),
                model_id: model.into(),
                request_fingerprint: "fp".into(),
                latency: std::time::Duration::ZERO,
                truncated: false,
            },
            sample_index: 0,
        });
        cell.verdict = if proved == total {
            Verdict::Pass
        } else {
            Verdict::VerifyFail
        };
        cell
    }

    fn failed_compile_cell(model: &str, label: &str) -> CellResult {
        let mut cell = base_cell(model, label);
        cell.compile = Some(CompileReport {
            success: false,
            warnings: vec![],
            errors: vec![],
            tool_version: "gcc".into(),
        });
        cell
    }

    fn set(cells: Vec<CellResult>) -> ResultSet {
        ResultSet {
            cells,
            created_at: chrono::Utc::now(),
            config_snapshot: serde_json::Value::Null,
        }
    }

    #[test]
    fn fully_proved_row_matches_the_expected_shape() {
        let results = set(vec![verified_cell("GPT-4-turbo", "ACSL", 33, 33, 35)]);
        let md = render_results_table(&results, "sfld", TableFormat::Markdown).unwrap();
        assert!(
            md.contains("| GPT-4-turbo | ACSL | Yes | Not Eq | **33 / 33** ✔ | 35 |"),
            "{md}"
        );
    }

    #[test]
    fn compile_failure_renders_na_everywhere() {
        let results = set(vec![failed_compile_cell("GPT-3.5", "LLNL")]);
        let md = render_results_table(&results, "sfld", TableFormat::Markdown).unwrap();
        assert!(
            md.contains("| GPT-3.5 | LLNL | No | n/a | n/a | n/a |"),
            "{md}"
        );
        let rows = table_rows(&results, "sfld").unwrap();
        assert!(rows.iter().all(TableRow::na_propagation_holds));
    }

    #[test]
    fn tool_unavailable_renders_as_a_dash_not_na() {
        let mut cell = verified_cell("m", "ACSL", 8, 8, 12);
        cell.equivalence = Some(EquivalenceResult {
            verdict: EqVerdict::ToolUnavailable,
            detail: "not on PATH".into(),
        });
        let results = set(vec![cell]);
        let rows = table_rows(&results, "sfld").unwrap();
        assert_eq!(rows[0].eq_check, "—");
    }

    #[test]
    fn csv_and_markdown_agree_cell_for_cell() {
        let results = set(vec![
            verified_cell("A", "ACSL", 33, 33, 35),
            verified_cell("A", "HLNL", 5, 23, 40),
            failed_compile_cell("B", "LLNL"),
        ]);
        let rows = table_rows(&results, "sfld").unwrap();
        let csv = render_results_table(&results, "sfld", TableFormat::Csv).unwrap();
        let md = render_results_table(&results, "sfld", TableFormat::Markdown).unwrap();
        let csv_lines: Vec<&str> = csv.lines().skip(1).collect();
        let md_lines: Vec<&str> = md.lines().skip(2).collect();
        assert_eq!(csv_lines.len(), rows.len());
        assert_eq!(md_lines.len(), rows.len());
        for (row, (csv_line, md_line)) in rows.iter().zip(csv_lines.iter().zip(md_lines)) {
            for value in [
                &row.model,
                &row.specification_type_label,
                &row.compiled,
                &row.eq_check,
                &row.verified,
                &row.loc,
            ] {
                assert!(csv_line.contains(value.as_str()), "{csv_line} vs {value}");
                assert!(md_line.contains(value.as_str()), "{md_line} vs {value}");
            }
        }
    }

    #[test]
    fn unknown_bundle_lists_available_ones() {
        let results = set(vec![verified_cell("A", "ACSL", 1, 1, 3)]);
        let err = render_results_table(&results, "nope", TableFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("sfld"), "{err}");
    }

    #[test]
    fn summary_counts_and_pass_rate() {
        let mut cells = vec![verified_cell("A", "ACSL", 33, 33, 30)];
        for label in ["HLNL", "LLNL", "ACSL,HLNL,LLNL", "HLNL,LLNL", "ACSL,LLNL"] {
            cells.push(verified_cell("A", label, 5, 23, 30));
        }
        cells.push(failed_compile_cell("A", "ACSL,HLNL"));
        let summaries = summarize(&set(cells));
        assert_eq!(summaries.len(), 1);
        let s = &summaries[0];
        assert_eq!(s.evaluable_cells, 7);
        assert_eq!(s.compiled, 6);
        assert_eq!(s.fully_verified, 1);
        assert!((s.pass_at_1 - 1.0 / 7.0).abs() < 1e-9);
        assert_eq!(s.mean_loc, Some(30.0));
    }

    #[test]
    fn all_infra_errors_summarize_to_zero_evaluable() {
        let mut cell = base_cell("A", "ACSL");
        cell.verdict = Verdict::InfraError;
        let text = render_summary(&set(vec![cell]));
        assert!(text.contains("0 evaluable cells"), "{text}");
    }

    #[test]
    fn mean_loc_uses_only_cells_with_the_metric() {
        let cells = vec![
            verified_cell("A", "ACSL", 1, 1, 10),
            verified_cell("A", "HLNL", 1, 2, 20),
            failed_compile_cell("A", "LLNL"),
        ];
        let s = &summarize(&set(cells))[0];
        // Oracle: (10 + 20) / 2, ignoring the cell without the metric.
        assert_eq!(s.mean_loc, Some(15.0));
    }
}
