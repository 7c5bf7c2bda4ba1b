//! Fine-tuning dataset emission: supervised records from verified cells,
//! feedback records from failed cells, and preference pairs across samples
//! that share a prompt.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{CellResult, ResultSet, Verdict};
use crate::prompt::PromptPair;

/// Bumped whenever a record schema changes shape.
pub const SCHEMA_VERSION: u32 = 1;

/// Where a record came from, enough to locate the cell in a run directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub bundle: String,
    pub model: String,
    pub combination_label: String,
    pub sample_index: u32,
    pub iteration: u32,
}

impl CellKey {
    fn of(cell: &CellResult) -> Self {
        CellKey {
            bundle: cell.bundle_name.clone(),
            model: cell.model_id.clone(),
            combination_label: cell.combination_label.clone(),
            sample_index: cell.sample_index,
            iteration: cell.iterations_used,
        }
    }
}

/// One verified, compiling sample: the supervised fine-tuning unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub schema_version: u32,
    pub prompt: PromptPair,
    pub spec_combination_label: String,
    pub code: String,
    /// (proved, total) — equal by construction.
    pub verification: (u32, u32),
    /// Compiler warnings on the successful build, kept for provenance.
    pub compiler_warnings: Vec<String>,
    pub provenance: CellKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    Compile,
    Verify,
    Extract,
}

/// Critic findings grouped by source, mirroring the feedback prompt.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriticOutputs {
    pub compiler: Vec<String>,
    pub unproved_goals: Vec<String>,
    pub quality: Vec<String>,
}

/// One failed sample with the critic evidence that rejected it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub schema_version: u32,
    pub prompt: PromptPair,
    pub code: String,
    pub failure_class: FailureClass,
    pub critic_outputs: CriticOutputs,
    /// Reviewer notes merged from the optional annotation sidecar.
    pub human_annotations: Vec<String>,
    pub provenance: CellKey,
}

/// A (chosen, rejected) code pair over the identical prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub schema_version: u32,
    pub prompt: PromptPair,
    pub chosen: String,
    pub rejected: String,
    pub chosen_evidence: (u32, u32),
    pub rejected_evidence: FailureClass,
}

impl PreferencePair {
    pub fn well_formed(&self) -> bool {
        self.chosen_evidence.0 == self.chosen_evidence.1 && self.chosen_evidence.1 > 0
    }
}

/// Reviewer note attached to a specific cell, loaded from a sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAnnotation {
    pub bundle: String,
    pub model: String,
    pub combination_label: String,
    pub sample_index: u32,
    pub note: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed writing {path} after {written} record(s): {source}")]
    Write {
        path: String,
        written: usize,
        source: std::io::Error,
    },
    #[error("failed reading {1}: {0}")]
    Read(std::io::Error, String),
    #[error("{path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("annotation sidecar {path}: {detail}")]
    Sidecar { path: String, detail: String },
}

fn failure_class(cell: &CellResult) -> Option<FailureClass> {
    match cell.verdict {
        Verdict::CompileFail => Some(FailureClass::Compile),
        Verdict::VerifyFail => Some(FailureClass::Verify),
        Verdict::ExtractFail => Some(FailureClass::Extract),
        Verdict::Pass | Verdict::InfraError => None,
    }
}

/// Partition the run into supervised and feedback records. Pass cells become
/// SFT records, failed cells become feedback records, infrastructure errors
/// yield nothing.
pub fn collect(results: &ResultSet) -> (Vec<SftRecord>, Vec<FeedbackRecord>) {
    collect_with_annotations(results, &[])
}

pub fn collect_with_annotations(
    results: &ResultSet,
    annotations: &[HumanAnnotation],
) -> (Vec<SftRecord>, Vec<FeedbackRecord>) {
    let mut sft = Vec::new();
    let mut feedback = Vec::new();
    for cell in &results.cells {
        match cell.verdict {
            Verdict::Pass => {
                let verification = cell
                    .verification
                    .as_ref()
                    .map(|v| (v.proved, v.total))
                    .unwrap_or((0, 0));
                sft.push(SftRecord {
                    schema_version: SCHEMA_VERSION,
                    prompt: cell.prompt.clone(),
                    spec_combination_label: cell.combination_label.clone(),
                    code: cell
                        .candidate
                        .as_ref()
                        .map(|c| c.source.clone())
                        .unwrap_or_default(),
                    verification,
                    compiler_warnings: cell
                        .compile
                        .as_ref()
                        .map(|c| c.warnings.iter().map(|d| d.text.clone()).collect())
                        .unwrap_or_default(),
                    provenance: CellKey::of(cell),
                });
            }
            Verdict::InfraError => {}
            _ => {
                let class = failure_class(cell).expect("non-pass, non-infra");
                let mut outputs = CriticOutputs::default();
                if let Some(compile) = &cell.compile {
                    outputs.compiler = compile
                        .errors
                        .iter()
                        .map(|d| format!("line {}: {}", d.line, d.text))
                        .collect();
                }
                if let Some(verification) = &cell.verification {
                    outputs.unproved_goals = verification.unproved_goal_names();
                }
                if let Some(quality) = &cell.quality {
                    outputs.quality = quality
                        .violations()
                        .map(|f| format!("rule {} line {}: {}", f.rule_id, f.line, f.message))
                        .collect();
                }
                if let Some(detail) = &cell.failure_detail {
                    if class == FailureClass::Extract {
                        outputs.compiler.push(detail.clone());
                    }
                }
                let notes = annotations
                    .iter()
                    .filter(|a| {
                        a.bundle == cell.bundle_name
                            && a.model == cell.model_id
                            && a.combination_label == cell.combination_label
                            && a.sample_index == cell.sample_index
                    })
                    .map(|a| a.note.clone())
                    .collect();
                feedback.push(FeedbackRecord {
                    schema_version: SCHEMA_VERSION,
                    prompt: cell.prompt.clone(),
                    code: cell
                        .candidate
                        .as_ref()
                        .map(|c| c.source.clone())
                        .unwrap_or_default(),
                    failure_class: class,
                    critic_outputs: outputs,
                    human_annotations: notes,
                    provenance: CellKey::of(cell),
                });
            }
        }
    }
    (sft, feedback)
}

/// Cartesian chosen × rejected pairing within each prompt-fingerprint group.
pub fn build_preference_pairs(results: &ResultSet) -> Vec<PreferencePair> {
    let mut groups: BTreeMap<&str, Vec<&CellResult>> = BTreeMap::new();
    for cell in &results.cells {
        if !cell.prompt_fingerprint.is_empty() {
            groups
                .entry(cell.prompt_fingerprint.as_str())
                .or_default()
                .push(cell);
        }
    }
    let mut pairs = Vec::new();
    for cells in groups.values() {
        let chosen: Vec<&&CellResult> = cells
            .iter()
            .filter(|c| c.verdict == Verdict::Pass && c.candidate.is_some())
            .collect();
        let rejected: Vec<(&&CellResult, FailureClass)> = cells
            .iter()
            .filter_map(|c| failure_class(c).map(|class| (c, class)))
            .collect();
        for good in &chosen {
            let evidence = good
                .verification
                .as_ref()
                .map(|v| (v.proved, v.total))
                .unwrap_or((0, 0));
            for (bad, class) in &rejected {
                pairs.push(PreferencePair {
                    schema_version: SCHEMA_VERSION,
                    prompt: good.prompt.clone(),
                    chosen: good.candidate.as_ref().expect("filtered").source.clone(),
                    rejected: bad
                        .candidate
                        .as_ref()
                        .map(|c| c.source.clone())
                        .unwrap_or_default(),
                    chosen_evidence: evidence,
                    rejected_evidence: *class,
                });
            }
        }
    }
    pairs
}

/// Append records to `path` as JSON Lines. Returns the number written; on
/// failure, the error carries how many lines landed before it.
pub fn write_records<T: Serialize>(records: &[T], path: &Path) -> Result<usize, DatasetError> {
    let display = path.display().to_string();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| DatasetError::Write {
            path: display.clone(),
            written: 0,
            source,
        })?;
    let mut written = 0;
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| DatasetError::Write {
            path: display.clone(),
            written,
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        writeln!(file, "{line}").map_err(|source| DatasetError::Write {
            path: display.clone(),
            written,
            source,
        })?;
        written += 1;
    }
    Ok(written)
}

/// Parse a JSON Lines file written by [`write_records`].
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Read(e, display.clone()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| DatasetError::Parse {
                path: display.clone(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

/// Load the optional reviewer-annotation sidecar (a JSON array).
pub fn load_annotations(path: &Path) -> Result<Vec<HumanAnnotation>, DatasetError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Read(e, display.clone()))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Sidecar {
        path: display,
        detail: e.to_string(),
    })
}

/// Emit all three dataset files into `dir`; returns (sft, feedback, pairs)
/// counts.
pub fn write_datasets(
    results: &ResultSet,
    annotations: &[HumanAnnotation],
    dir: &Path,
) -> Result<(usize, usize, usize), DatasetError> {
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::Read(e, dir.display().to_string()))?;
    let (sft, feedback) = collect_with_annotations(results, annotations);
    let pairs = build_preference_pairs(results);
    let a = write_records(&sft, &dir.join("sft.jsonl"))?;
    let b = write_records(&feedback, &dir.join("feedback.jsonl"))?;
    let c = write_records(&pairs, &dir.join("preference_pairs.jsonl"))?;
    Ok((a, b, c))
}
