//! Run configuration: a TOML file plus command-line overrides, resolved into
//! one fully-explicit [`RunConfig`] that is echoed into the run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{enumerate_combinations, SpecCombination};
use crate::critics::ToolConfig;
use crate::gateway::GenerationParams;

/// The fully-resolved configuration a run executes with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub bundles: Vec<PathBuf>,
    pub models: Vec<String>,
    /// Combinations to run; defaults to all seven.
    pub combinations: Vec<SpecCombination>,
    pub max_iterations: u32,
    pub params: GenerationParams,
    pub cot: bool,
    pub tools: ToolConfig,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    /// Replay scenario for the mock backend; required in offline mode.
    pub mock_scenario: Option<PathBuf>,
    pub offline: bool,
}

/// The TOML file shape. Every field is optional; flags fill the gaps.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    bundles: Vec<PathBuf>,
    models: Vec<String>,
    combinations: Option<Vec<String>>,
    max_iterations: Option<u32>,
    samples: Option<u32>,
    max_tokens: Option<u32>,
    temperature: Option<f64>,
    top_p: Option<f64>,
    presence_penalty: Option<f64>,
    frequency_penalty: Option<f64>,
    cot: Option<bool>,
    parallelism: Option<usize>,
    output_dir: Option<PathBuf>,
    mock_scenario: Option<PathBuf>,
    offline: Option<bool>,
    tools: Option<ToolConfig>,
}

/// Values supplied on the command line; each one beats the file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub bundles: Vec<PathBuf>,
    pub models: Vec<String>,
    pub combinations: Option<Vec<String>>,
    pub max_iterations: Option<u32>,
    pub samples: Option<u32>,
    pub temperature: Option<f64>,
    pub cot: Option<bool>,
    pub parallelism: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub mock_scenario: Option<PathBuf>,
    pub offline: bool,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("missing required value: {key}")]
    Missing { key: &'static str },
    #[error("invalid value for {key}: {detail}")]
    Invalid { key: &'static str, detail: String },
}

/// Make a relative tool path absolute, trying the invocation directory
/// first and the config file's directory second. Bare command names
/// (no path separator) and absolute paths are returned unchanged.
fn resolve_tool_path(command: &str, config_dir: Option<&Path>) -> String {
    let path = Path::new(command);
    if path.is_absolute() || path.components().count() < 2 {
        return command.to_string();
    }
    let candidates =
        std::iter::once(path.to_path_buf()).chain(config_dir.map(|dir| dir.join(path)));
    for candidate in candidates {
        if candidate.exists() {
            if let Ok(absolute) = candidate.canonicalize() {
                return absolute.display().to_string();
            }
        }
    }
    command.to_string()
}

/// Resolve file + flags into a [`RunConfig`]. Precedence: flag, then file,
/// then built-in default.
pub fn parse_config(
    file_path: Option<&Path>,
    cli: &CliOverrides,
) -> Result<RunConfig, ConfigError> {
    let file = match file_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.display().to_string(),
                source,
            })?;
            toml::from_str::<FileConfig>(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?
        }
        None => FileConfig::default(),
    };

    let bundles = if cli.bundles.is_empty() {
        file.bundles
    } else {
        cli.bundles.clone()
    };
    if bundles.is_empty() {
        return Err(ConfigError::Missing { key: "bundles" });
    }
    let models = if cli.models.is_empty() {
        file.models
    } else {
        cli.models.clone()
    };
    if models.is_empty() {
        return Err(ConfigError::Missing { key: "models" });
    }

    let combo_labels = cli.combinations.clone().or(file.combinations);
    let combinations = match combo_labels {
        None => enumerate_combinations(),
        Some(labels) => labels
            .iter()
            .map(|label| {
                SpecCombination::parse_label(label).ok_or_else(|| ConfigError::Invalid {
                    key: "combinations",
                    detail: format!("unknown combination label '{label}'"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
    };

    let mut params = GenerationParams::new("");
    if let Some(v) = file.max_tokens {
        params.max_tokens = v;
    }
    if let Some(v) = file.temperature {
        params.temperature = v;
    }
    if let Some(v) = cli.temperature {
        params.temperature = v;
    }
    if let Some(v) = file.top_p {
        params.top_p = v;
    }
    if let Some(v) = file.presence_penalty {
        params.presence_penalty = v;
    }
    if let Some(v) = file.frequency_penalty {
        params.frequency_penalty = v;
    }
    if let Some(v) = cli.samples.or(file.samples) {
        params.samples = v;
    }
    params.validate().map_err(|e| ConfigError::Invalid {
        key: "params",
        detail: e.to_string(),
    })?;

    let parallelism = cli.parallelism.or(file.parallelism).unwrap_or(1);
    if parallelism < 1 {
        return Err(ConfigError::Invalid {
            key: "parallelism",
            detail: "must be >= 1".to_string(),
        });
    }

    let offline = cli.offline || file.offline.unwrap_or(false);
    let mock_scenario = cli.mock_scenario.clone().or(file.mock_scenario);
    if offline && mock_scenario.is_none() {
        return Err(ConfigError::Missing {
            key: "mock_scenario (required in offline mode)",
        });
    }

    let mut tools = file.tools.unwrap_or_default();
    // Tool subprocesses run with a cell directory as their working
    // directory, so relative tool paths are pinned down here, while the
    // invocation directory is still known. Bare command names stay
    // untouched for PATH lookup.
    let config_dir = file_path.and_then(Path::parent);
    for command in [&mut tools.compiler, &mut tools.verifier]
        .into_iter()
        .chain(tools.equivalence_tool.as_mut())
    {
        *command = resolve_tool_path(command, config_dir);
    }

    Ok(RunConfig {
        bundles,
        models,
        combinations,
        max_iterations: cli.max_iterations.or(file.max_iterations).unwrap_or(0),
        params,
        cot: cli.cot.or(file.cot).unwrap_or(true),
        tools,
        parallelism,
        output_dir: cli
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("runs")),
        mock_scenario,
        offline,
    })
}
