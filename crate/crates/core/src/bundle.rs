//! Case-study bundles: specification items, interface context, and the
//! manifest format that packages them on disk.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three specification tiers, ordered for deterministic rendering.
///
/// `Hlnl < Llnl < Acsl` is the prompt rendering order (general to specific);
/// table row labels use the order ACSL, HLNL, LLNL instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpecKind {
    #[serde(rename = "HLNL")]
    Hlnl,
    #[serde(rename = "LLNL")]
    Llnl,
    #[serde(rename = "ACSL")]
    Acsl,
}

impl SpecKind {
    pub const ALL: [SpecKind; 3] = [SpecKind::Hlnl, SpecKind::Llnl, SpecKind::Acsl];

    /// Order used when joining kinds into a combination label.
    pub const LABEL_ORDER: [SpecKind; 3] = [SpecKind::Acsl, SpecKind::Hlnl, SpecKind::Llnl];

    pub fn label(self) -> &'static str {
        match self {
            SpecKind::Hlnl => "HLNL",
            SpecKind::Llnl => "LLNL",
            SpecKind::Acsl => "ACSL",
        }
    }
}

impl fmt::Display for SpecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One specification unit within a bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecItem {
    pub id: String,
    pub kind: SpecKind,
    pub text: String,
}

/// The C interface surrounding the function to be generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceContext {
    /// Typedefs, macros, and extern declarations.
    pub header_source: String,
    /// Input/output/concrete variable declarations.
    pub globals_source: String,
    /// Prototype of the single function to implement, e.g. `void Brak_10ms(void);`.
    pub function_signature: String,
    /// Execution context description (scheduler period).
    pub scheduler_note: String,
}

impl InterfaceContext {
    /// Name of the function declared by `function_signature`.
    pub fn function_name(&self) -> Option<&str> {
        // Last identifier before the first '('.
        let open = self.function_signature.find('(')?;
        let head = &self.function_signature[..open];
        let start = head
            .rfind(|c: char| !(c.is_alphanumeric() || c == '_'))
            .map(|i| i + 1)
            .unwrap_or(0);
        let name = head[start..].trim();
        if name.is_empty() {
            None
        } else {
            Some(name)
        }
    }
}

/// A full case-study package.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseBundle {
    pub name: String,
    pub interface: InterfaceContext,
    pub specs: Vec<SpecItem>,
    /// Verified handwritten program, when available.
    pub reference_source: Option<String>,
    /// Full ACSL function contract used for verification.
    pub acsl_contract: String,
}

impl CaseBundle {
    pub fn specs_of_kind(&self, kind: SpecKind) -> impl Iterator<Item = &SpecItem> {
        self.specs.iter().filter(move |s| s.kind == kind)
    }
}

/// A non-empty subset of the three specification kinds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecCombination {
    kinds: BTreeSet<SpecKind>,
}

impl SpecCombination {
    pub fn new<I: IntoIterator<Item = SpecKind>>(kinds: I) -> Option<Self> {
        let kinds: BTreeSet<_> = kinds.into_iter().collect();
        if kinds.is_empty() {
            None
        } else {
            Some(SpecCombination { kinds })
        }
    }

    pub fn contains(&self, kind: SpecKind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = SpecKind> + '_ {
        self.kinds.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Canonical row label, kinds joined by " + " in ACSL, HLNL, LLNL order.
    pub fn label(&self) -> String {
        SpecKind::LABEL_ORDER
            .iter()
            .filter(|k| self.kinds.contains(k))
            .map(|k| k.label())
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Parse a label such as "ACSL + HLNL" back into a combination.
    pub fn parse_label(label: &str) -> Option<Self> {
        let mut kinds = BTreeSet::new();
        for part in label.split('+') {
            let kind = match part.trim() {
                "HLNL" => SpecKind::Hlnl,
                "LLNL" => SpecKind::Llnl,
                "ACSL" => SpecKind::Acsl,
                _ => return None,
            };
            kinds.insert(kind);
        }
        if kinds.is_empty() {
            None
        } else {
            Some(SpecCombination { kinds })
        }
    }
}

impl fmt::Display for SpecCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The 7 non-empty subsets of {ACSL, HLNL, LLNL} in canonical table order.
pub fn enumerate_combinations() -> Vec<SpecCombination> {
    use SpecKind::*;
    [
        vec![Acsl],
        vec![Hlnl],
        vec![Llnl],
        vec![Acsl, Hlnl, Llnl],
        vec![Hlnl, Llnl],
        vec![Acsl, Llnl],
        vec![Acsl, Hlnl],
    ]
    .into_iter()
    .map(|ks| SpecCombination::new(ks).expect("non-empty"))
    .collect()
}

/// Index of a combination within the canonical table order, for row sorting.
pub fn combination_rank(combo: &SpecCombination) -> usize {
    enumerate_combinations()
        .iter()
        .position(|c| c == combo)
        .expect("every non-empty subset is enumerated")
}

/// Select the bundle's items matching `combo`, kind-major (HLNL, LLNL, ACSL),
/// preserving bundle order within each kind.
pub fn select_specs<'a>(bundle: &'a CaseBundle, combo: &SpecCombination) -> Vec<&'a SpecItem> {
    let mut out = Vec::new();
    for kind in SpecKind::ALL {
        if combo.contains(kind) {
            out.extend(bundle.specs_of_kind(kind));
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("manifest not found: {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("missing file for key '{key}': {path}")]
    MissingFile { key: String, path: PathBuf },
    #[error("i/o error for key '{key}': {source}")]
    Io { key: String, source: std::io::Error },
    #[error("duplicate spec item id '{0}'")]
    DuplicateId(String),
    #[error("spec item '{id}': exactly one of 'text' or 'file' must be given")]
    SpecSource { id: String },
    #[error("manifest declares no spec items")]
    EmptySpecs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    name: String,
    interface: ManifestInterface,
    contract: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[serde(rename = "specs")]
    specs: Vec<ManifestSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestInterface {
    header: String,
    globals: String,
    function_signature: String,
    scheduler_note: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestSpec {
    id: String,
    kind: SpecKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
}

fn normalize_newlines(s: &str) -> String {
    s.replace("\r\n", "\n").replace('\r', "\n")
}

fn read_keyed(dir: &Path, key: &str, rel: &str) -> Result<String, LoadError> {
    let path = dir.join(rel);
    if !path.is_file() {
        return Err(LoadError::MissingFile {
            key: key.to_string(),
            path,
        });
    }
    std::fs::read_to_string(&path)
        .map(|s| normalize_newlines(&s))
        .map_err(|source| LoadError::Io {
            key: key.to_string(),
            source,
        })
}

/// Load a bundle from a directory containing `manifest.toml` and the files it
/// references. File contents are read verbatim except for LF normalization.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<CaseBundle, LoadError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.toml");
    if !manifest_path.is_file() {
        return Err(LoadError::MissingManifest(manifest_path));
    }
    let raw = std::fs::read_to_string(&manifest_path).map_err(|source| LoadError::Io {
        key: "manifest".to_string(),
        source,
    })?;
    let manifest: Manifest = toml::from_str(&raw).map_err(|source| LoadError::Manifest {
        path: manifest_path,
        source,
    })?;

    if manifest.specs.is_empty() {
        return Err(LoadError::EmptySpecs);
    }

    let interface = InterfaceContext {
        header_source: read_keyed(dir, "header", &manifest.interface.header)?,
        globals_source: read_keyed(dir, "globals", &manifest.interface.globals)?,
        function_signature: manifest.interface.function_signature.clone(),
        scheduler_note: manifest.interface.scheduler_note.clone(),
    };
    let acsl_contract = read_keyed(dir, "contract", &manifest.contract)?;
    let reference_source = manifest
        .reference
        .as_deref()
        .map(|rel| read_keyed(dir, "reference", rel))
        .transpose()?;

    let mut seen = BTreeSet::new();
    let mut specs = Vec::with_capacity(manifest.specs.len());
    for item in &manifest.specs {
        if !seen.insert(item.id.clone()) {
            return Err(LoadError::DuplicateId(item.id.clone()));
        }
        let text = match (&item.text, &item.file) {
            (Some(text), None) => normalize_newlines(text),
            (None, Some(rel)) => read_keyed(dir, &format!("specs.{}", item.id), rel)?,
            _ => {
                return Err(LoadError::SpecSource {
                    id: item.id.clone(),
                })
            }
        };
        specs.push(SpecItem {
            id: item.id.clone(),
            kind: item.kind,
            text,
        });
    }

    Ok(CaseBundle {
        name: manifest.name,
        interface,
        specs,
        reference_source,
        acsl_contract,
    })
}

/// Write a bundle back out as a manifest directory. Inverse of [`load_bundle`]
/// up to file naming.
pub fn save_bundle(bundle: &CaseBundle, dir: impl AsRef<Path>) -> std::io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("specs"))?;
    std::fs::write(dir.join("header.h"), &bundle.interface.header_source)?;
    std::fs::write(dir.join("globals.c"), &bundle.interface.globals_source)?;
    std::fs::write(dir.join("contract.acsl"), &bundle.acsl_contract)?;
    if let Some(reference) = &bundle.reference_source {
        std::fs::write(dir.join("reference.c"), reference)?;
    }
    let specs = bundle
        .specs
        .iter()
        .map(|s| ManifestSpec {
            id: s.id.clone(),
            kind: s.kind,
            text: Some(s.text.clone()),
            file: None,
        })
        .collect();
    let manifest = Manifest {
        name: bundle.name.clone(),
        interface: ManifestInterface {
            header: "header.h".to_string(),
            globals: "globals.c".to_string(),
            function_signature: bundle.interface.function_signature.clone(),
            scheduler_note: bundle.interface.scheduler_note.clone(),
        },
        contract: "contract.acsl".to_string(),
        reference: bundle
            .reference_source
            .as_ref()
            .map(|_| "reference.c".to_string()),
        specs,
    };
    let raw = toml::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.toml"), raw)
}

/// A single validation finding: which field broke which rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationFinding {
    pub field: String,
    pub message: String,
}

const ACSL_CLAUSE_KEYWORDS: [&str; 5] = ["requires", "ensures", "assigns", "ghost", "behavior"];

/// Check the bundle's structural invariants. Empty result means valid.
pub fn validate_bundle(bundle: &CaseBundle) -> Vec<ValidationFinding> {
    let mut findings = Vec::new();
    let finding = |field: &str, message: String| ValidationFinding {
        field: field.to_string(),
        message,
    };

    for kind in SpecKind::ALL {
        if bundle.specs_of_kind(kind).next().is_none() {
            findings.push(finding("specs", format!("no item of kind {kind}")));
        }
    }
    let mut seen = BTreeSet::new();
    for item in &bundle.specs {
        if item.text.trim().is_empty() {
            findings.push(finding(
                "specs",
                format!("item '{}' has empty text", item.id),
            ));
        }
        if !seen.insert(&item.id) {
            findings.push(finding("specs", format!("duplicate item id '{}'", item.id)));
        }
        if item.kind == SpecKind::Acsl
            && !ACSL_CLAUSE_KEYWORDS.iter().any(|kw| item.text.contains(kw))
        {
            findings.push(finding(
                "specs",
                format!("ACSL item '{}' contains no ACSL clause keyword", item.id),
            ));
        }
    }

    let sig = &bundle.interface.function_signature;
    let declared = sig.split(';').filter(|part| part.contains('(')).count();
    if declared != 1 {
        findings.push(finding(
            "function_signature",
            format!("must declare exactly one function, found {declared}"),
        ));
    }
    if bundle.interface.scheduler_note.trim().is_empty() {
        findings.push(finding("scheduler_note", "must not be empty".to_string()));
    }
    findings
}

#[derive(Debug, Error)]
pub enum GhostError {
    #[error("line {line}: unterminated annotation comment")]
    Unterminated { line: usize },
}

/// Rewrite ghost *declaration* annotations into concrete declarations.
///
/// `//@ ghost <decl>;` and `/*@ ghost <decl>; */` both become `<decl>;`.
/// Ghost statements inside function bodies and all other text are left
/// byte-identical. String and character literals are protected.
pub fn degrade_ghosts(source: &str) -> Result<String, GhostError> {
    let bytes = source.as_bytes();
    let mut out = String::with_capacity(source.len());
    let mut i = 0;
    let mut line = 1;

    fn skip_ghost_prefix(rest: &str) -> Option<usize> {
        // Matches `@<ws>ghost<ws>` after the comment opener; returns the
        // offset where the declaration text begins.
        let rest = rest.strip_prefix('@')?;
        let trimmed = rest.trim_start_matches([' ', '\t']);
        let ws1 = rest.len() - trimmed.len();
        let after = trimmed.strip_prefix("ghost")?;
        // Require a separator so identifiers like `ghostly` do not match.
        let after_trim = after.trim_start_matches([' ', '\t']);
        if after.len() == after_trim.len() {
            return None;
        }
        Some(1 + ws1 + 5 + (after.len() - after_trim.len()))
    }

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                line += 1;
                out.push('\n');
                i += 1;
            }
            b'"' | b'\'' => {
                // Copy the literal verbatim.
                let quote = c;
                let start = i;
                i += 1;
                while i < bytes.len() {
                    let b = bytes[i];
                    i += 1;
                    if b == b'\\' && i < bytes.len() {
                        i += 1;
                    } else if b == quote {
                        break;
                    } else if b == b'\n' {
                        line += 1;
                    }
                }
                out.push_str(&source[start..i]);
            }
            b'/' if i + 1 < bytes.len() && bytes[i + 1] == b'/' => {
                let eol = source[i..]
                    .find('\n')
                    .map(|off| i + off)
                    .unwrap_or(bytes.len());
                let comment = &source[i..eol];
                if let Some(decl_start) = skip_ghost_prefix(&comment[2..]) {
                    out.push_str(comment[2 + decl_start..].trim_end());
                } else {
                    out.push_str(comment);
                }
                i = eol;
            }
            b'/' if i + 1 < bytes.len() && bytes[i + 1] == b'*' => {
                let close = source[i + 2..]
                    .find("*/")
                    .map(|off| i + 2 + off)
                    .ok_or(GhostError::Unterminated { line })?;
                let comment = &source[i..close + 2];
                if let Some(decl_start) = skip_ghost_prefix(&comment[2..]) {
                    let decl = &comment[2 + decl_start..comment.len() - 2];
                    out.push_str(decl.trim_end());
                } else {
                    out.push_str(comment);
                }
                line += comment.matches('\n').count();
                i = close + 2;
            }
            _ => {
                // Copy verbatim up to the next byte that could open a
                // literal, comment, or newline.
                let start = i;
                i += 1;
                while i < bytes.len() && !matches!(bytes[i], b'\n' | b'"' | b'\'' | b'/') {
                    i += 1;
                }
                out.push_str(&source[start..i]);
            }
        }
    }
    Ok(out)
}
