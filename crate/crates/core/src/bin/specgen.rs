//! Command-line entry point.
//!
//! Exit status taxonomy:
//!   0 — success
//!   1 — evaluated failure (check found violations, verify not fully proved,
//!       a run whose cells all failed)
//!   2 — usage or infrastructure error

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use specgen::bundle::{load_bundle, InterfaceContext};
use specgen::config::{parse_config, CliOverrides};
use specgen::critics::{self, CriticError, ToolConfig};
use specgen::dataset;
use specgen::gateway::{Backend, Gateway, MockBackend};
use specgen::pipeline::{run_matrix, MatrixDefaults, PipelineEnv, ResultSet, Verdict};
use specgen::quality;
use specgen::report::{render_results_table, render_summary, TableFormat};

#[derive(Parser)]
#[command(
    name = "specgen",
    version,
    about = "Generate and verify embedded C from natural-language and ACSL specifications"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment matrix and write a run directory.
    Run(RunArgs),
    /// Run the code-quality critic on a C file.
    Check {
        /// C source file to check.
        file: PathBuf,
    },
    /// Run the deductive verifier on a C file with an ACSL contract.
    Verify {
        /// C source file containing the function definition.
        file: PathBuf,
        /// File holding the ACSL function contract.
        #[arg(long)]
        contract: PathBuf,
        /// Verifier executable to use.
        #[arg(long)]
        verifier: Option<String>,
    },
    /// Render the results table for a finished run.
    Report {
        /// Run directory produced by `run`.
        run_dir: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
        /// Bundle to report on; defaults to every bundle in the run.
        #[arg(long)]
        bundle: Option<String>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit fine-tuning datasets from a finished run.
    Datasets {
        /// Run directory produced by `run`.
        run_dir: PathBuf,
        /// Optional JSON sidecar of reviewer annotations.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Output directory; defaults to RUN_DIR/datasets.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundle directory (repeatable).
    #[arg(long = "bundle")]
    bundles: Vec<PathBuf>,
    /// Model identifier (repeatable).
    #[arg(long = "model")]
    models: Vec<String>,
    /// Specification combination label, e.g. "ACSL + HLNL" (repeatable).
    #[arg(long = "combination")]
    combinations: Vec<String>,
    #[arg(long)]
    max_iterations: Option<u32>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Disable the chain-of-thought trigger line.
    #[arg(long)]
    no_cot: bool,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Run directory to create.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replay scenario file for the mock backend.
    #[arg(long)]
    mock_scenario: Option<PathBuf>,
    /// Forbid network access; requires --mock-scenario.
    #[arg(long)]
    offline: bool,
    /// Chat-completions endpoint for live runs.
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    endpoint: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Check { file } => cmd_check(&file),
        Command::Verify {
            file,
            contract,
            verifier,
        } => cmd_verify(&file, &contract, verifier),
        Command::Report {
            run_dir,
            format,
            bundle,
            out,
        } => cmd_report(&run_dir, &format, bundle.as_deref(), out.as_deref()),
        Command::Datasets {
            run_dir,
            annotations,
            out,
        } => cmd_datasets(&run_dir, annotations.as_deref(), out.as_deref()),
    };
    match status {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let overrides = CliOverrides {
        bundles: args.bundles,
        models: args.models,
        combinations: if args.combinations.is_empty() {
            None
        } else {
            Some(args.combinations)
        },
        max_iterations: args.max_iterations,
        samples: args.samples,
        temperature: args.temperature,
        cot: if args.no_cot { Some(false) } else { None },
        parallelism: args.parallelism,
        output_dir: args.out,
        mock_scenario: args.mock_scenario,
        offline: args.offline,
    };
    let cfg = parse_config(args.config.as_deref(), &overrides).map_err(|e| e.to_string())?;

    let mut bundles = Vec::new();
    for path in &cfg.bundles {
        bundles.push(load_bundle(path).map_err(|e| format!("{}: {e}", path.display()))?);
    }

    let backend: Box<dyn Backend> = match &cfg.mock_scenario {
        Some(path) => Box::new(MockBackend::from_file(path).map_err(|e| e.to_string())?),
        None => {
            if cfg.offline {
                return Err("offline mode requires a mock scenario".to_string());
            }
            #[cfg(feature = "http")]
            {
                Box::new(
                    specgen::gateway::HttpBackend::new(
                        args.endpoint.clone(),
                        Duration::from_secs(120),
                    )
                    .map_err(|e| e.to_string())?,
                )
            }
            #[cfg(not(feature = "http"))]
            {
                return Err("built without HTTP support; use --mock-scenario".to_string());
            }
        }
    };

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| format!("{}: {e}", cfg.output_dir.display()))?;
    // Echo the fully resolved configuration into the run directory.
    let echoed = toml::to_string_pretty(&cfg).map_err(|e| e.to_string())?;
    std::fs::write(cfg.output_dir.join("config.toml"), echoed).map_err(|e| e.to_string())?;

    let env = PipelineEnv {
        gateway: Gateway::new(backend),
        tools: cfg.tools.clone(),
        workdir: cfg.output_dir.join("cells"),
    };
    let defaults = MatrixDefaults {
        max_iterations: cfg.max_iterations,
        params: cfg.params.clone(),
        critics: Default::default(),
        cot: cfg.cot,
        parallelism: cfg.parallelism,
    };
    let results = run_matrix(&bundles, &cfg.models, &cfg.combinations, &defaults, &env);

    let json = serde_json::to_string_pretty(&results).map_err(|e| e.to_string())?;
    std::fs::write(cfg.output_dir.join("results.json"), json).map_err(|e| e.to_string())?;
    for bundle in &bundles {
        for (format, ext) in [(TableFormat::Markdown, "md"), (TableFormat::Csv, "csv")] {
            let table =
                render_results_table(&results, &bundle.name, format).map_err(|e| e.to_string())?;
            let name = format!("table_{}.{ext}", bundle.name.to_lowercase());
            std::fs::write(cfg.output_dir.join(name), table).map_err(|e| e.to_string())?;
        }
    }
    let summary = render_summary(&results);
    std::fs::write(cfg.output_dir.join("summary.txt"), &summary).map_err(|e| e.to_string())?;
    print!("{summary}");

    let infra = results
        .cells
        .iter()
        .filter(|c| c.verdict == Verdict::InfraError)
        .count();
    if infra > 0 {
        eprintln!("warning: {infra} cell(s) hit infrastructure errors");
    }
    println!("run directory: {}", cfg.output_dir.display());
    let any_pass = results.cells.iter().any(|c| c.verdict == Verdict::Pass);
    Ok(if any_pass || results.cells.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn standalone_interface() -> InterfaceContext {
    InterfaceContext {
        header_source: String::new(),
        globals_source: String::new(),
        function_signature: String::new(),
        scheduler_note: String::new(),
    }
}

fn cmd_check(file: &Path) -> Result<ExitCode, String> {
    let source = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let tools = ToolConfig::default();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let interface = standalone_interface();
    let compile =
        critics::run_compile(&source, &interface, dir.path(), &tools).map_err(|e| e.to_string())?;
    if !compile.success {
        for d in &compile.errors {
            println!("{}:{}: error: {}", file.display(), d.line, d.text);
        }
        println!("{}: does not compile", file.display());
        return Ok(ExitCode::from(1));
    }
    let report =
        quality::check_power_of_10(&source, &interface, &compile).map_err(|e| e.to_string())?;
    for finding in &report.findings {
        println!(
            "{}:{}: {:?} rule {}: {}",
            file.display(),
            finding.line,
            finding.severity,
            finding.rule_id,
            finding.message
        );
    }
    println!(
        "{}: LoC {}, {} finding(s), conforms: {}",
        file.display(),
        report.loc,
        report.findings.len(),
        report.conforms
    );
    Ok(if report.conforms {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify(file: &Path, contract: &Path, verifier: Option<String>) -> Result<ExitCode, String> {
    let source = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let contract_text =
        std::fs::read_to_string(contract).map_err(|e| format!("{}: {e}", contract.display()))?;
    let mut tools = ToolConfig::default();
    if let Some(v) = verifier {
        tools.verifier = v;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = critics::run_verify(
        &source,
        &contract_text,
        &standalone_interface(),
        dir.path(),
        &tools,
    )
    .map_err(|e| match e {
        CriticError::Environment { tool, detail } => format!("{tool}: {detail}"),
        other => other.to_string(),
    })?;
    println!("Proved goals: {} / {}", report.proved, report.total);
    for name in report.unproved_goal_names() {
        println!("unproved: {name}");
    }
    Ok(if report.fully_proved() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn load_results(run_dir: &Path) -> Result<ResultSet, String> {
    let path = run_dir.join("results.json");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_report(
    run_dir: &Path,
    format: &str,
    bundle: Option<&str>,
    out: Option<&Path>,
) -> Result<ExitCode, String> {
    let results = load_results(run_dir)?;
    let format: TableFormat = format.parse()?;
    let bundles: Vec<String> = match bundle {
        Some(name) => vec![name.to_string()],
        None => {
            let mut names = Vec::new();
            for cell in &results.cells {
                if !names.contains(&cell.bundle_name) {
                    names.push(cell.bundle_name.clone());
                }
            }
            names
        }
    };
    let mut output = String::new();
    for name in &bundles {
        if bundles.len() > 1 {
            output.push_str(&format!("## {name}\n\n"));
        }
        output.push_str(&render_results_table(&results, name, format).map_err(|e| e.to_string())?);
        output.push('\n');
    }
    match out {
        Some(path) => {
            std::fs::write(path, output).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => print!("{output}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_datasets(
    run_dir: &Path,
    annotations: Option<&Path>,
    out: Option<&Path>,
) -> Result<ExitCode, String> {
    let results = load_results(run_dir)?;
    let notes = match annotations {
        Some(path) => dataset::load_annotations(path).map_err(|e| e.to_string())?,
        None => Vec::new(),
    };
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run_dir.join("datasets"));
    let (sft, feedback, pairs) =
        dataset::write_datasets(&results, &notes, &out_dir).map_err(|e| e.to_string())?;
    println!(
        "wrote {sft} sft, {feedback} feedback, {pairs} preference pair record(s) to {}",
        out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}
