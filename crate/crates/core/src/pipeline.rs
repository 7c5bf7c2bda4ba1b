//! Orchestration of experiment cells: generate → compile → verify →
//! equivalence → quality, with optional backprompt iterations, and the full
//! (bundle × model × combination) matrix.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundle::{combination_rank, select_specs, CaseBundle, SpecCombination};
use crate::critics::{
    self, CompileReport, CriticError, EquivalenceResult, ToolConfig, VerificationReport,
};
use crate::gateway::{extract_code, ChatMessage, Gateway, GeneratedCandidate, GenerationParams};
use crate::prompt::{
    build_feedback_prompt, build_system_prompt, build_user_prompt, FeedbackBundle, PromptPair,
};
use crate::quality::{self, QualityReport};

/// Which critics run. Disabled critics report nothing (their stage is n/a).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticSet {
    pub compile: bool,
    pub verify: bool,
    pub equivalence: bool,
    pub quality: bool,
}

impl Default for CriticSet {
    fn default() -> Self {
        CriticSet {
            compile: true,
            verify: true,
            equivalence: true,
            quality: true,
        }
    }
}

impl CriticSet {
    /// Everything off: generation and extraction only.
    pub fn none() -> Self {
        CriticSet {
            compile: false,
            verify: false,
            equivalence: false,
            quality: false,
        }
    }
}

/// Configuration of a single experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub model_id: String,
    pub combination: SpecCombination,
    /// 0 is the minimalist mode: no backprompting.
    pub max_iterations: u32,
    pub params: GenerationParams,
    pub critics: CriticSet,
    /// Chain-of-thought trigger in the user prompt.
    pub cot: bool,
}

impl CellConfig {
    pub fn new(model_id: impl Into<String>, combination: SpecCombination) -> Self {
        let model_id = model_id.into();
        CellConfig {
            params: GenerationParams::new(&model_id),
            model_id,
            combination,
            max_iterations: 0,
            critics: CriticSet::default(),
            cot: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    CompileFail,
    VerifyFail,
    ExtractFail,
    InfraError,
}

/// Outcome of one experiment cell. Stages after a failed stage stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub bundle_name: String,
    pub model_id: String,
    pub combination_label: String,
    pub sample_index: u32,
    pub iterations_used: u32,
    pub compile: Option<CompileReport>,
    pub verification: Option<VerificationReport>,
    pub equivalence: Option<EquivalenceResult>,
    pub quality: Option<QualityReport>,
    pub candidate: Option<GeneratedCandidate>,
    /// Why extraction or infrastructure failed, when it did.
    pub failure_detail: Option<String>,
    pub verdict: Verdict,
    /// Fingerprint of the initial prompt request; preference pairs group on it.
    pub prompt_fingerprint: String,
    pub prompt: PromptPair,
}

impl CellResult {
    pub fn fully_proved(&self) -> bool {
        self.verification
            .as_ref()
            .is_some_and(VerificationReport::fully_proved)
    }

    /// Verdict algebra: Pass ⇔ compile success ∧ all goals proved.
    pub fn verdict_consistent(&self) -> bool {
        let pass = self.compile.as_ref().is_some_and(|c| c.success) && self.fully_proved();
        (self.verdict == Verdict::Pass) == pass
    }

    /// Skip-on-failure: a missing stage implies every later stage missing.
    pub fn skip_chain_consistent(&self) -> bool {
        let stages = [
            self.candidate.is_some(),
            self.compile.is_some(),
            self.verification.is_some(),
        ];
        // once a stage is absent, later core stages must be absent
        let mut seen_gap = false;
        for present in stages {
            if seen_gap && present {
                return false;
            }
            if !present {
                seen_gap = true;
            }
        }
        // equivalence and quality hang off a successful compile
        if self.compile.as_ref().map(|c| c.success) != Some(true)
            && (self.equivalence.is_some() || self.quality.is_some())
        {
            return false;
        }
        true
    }
}

/// The full experiment matrix outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub cells: Vec<CellResult>,
    pub created_at: chrono::DateTime<chrono::Utc>,
    pub config_snapshot: serde_json::Value,
}

impl ResultSet {
    /// Canonical order: bundle (input order), model (input order),
    /// combination (table order), sample index.
    pub fn canonicalize(&mut self, bundle_order: &[String], model_order: &[String]) {
        let pos = |list: &[String], v: &str| list.iter().position(|x| x == v).unwrap_or(usize::MAX);
        self.cells.sort_by_key(|c| {
            (
                pos(bundle_order, &c.bundle_name),
                pos(model_order, &c.model_id),
                SpecCombination::parse_label(&c.combination_label)
                    .map(|combo| combination_rank(&combo))
                    .unwrap_or(usize::MAX),
                c.sample_index,
            )
        });
    }
}

/// Shared environment for cell execution.
pub struct PipelineEnv {
    pub gateway: Gateway,
    pub tools: ToolConfig,
    /// Root for per-cell working directories.
    pub workdir: PathBuf,
}

fn slugify(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn cell_dir(
    env: &PipelineEnv,
    bundle: &str,
    cfg: &CellConfig,
    sample: u32,
    iteration: u32,
) -> PathBuf {
    env.workdir
        .join(slugify(bundle))
        .join(slugify(&cfg.model_id))
        .join(slugify(&cfg.combination.label()))
        .join(format!("sample_{sample}"))
        .join(format!("iter_{iteration}"))
}

fn persist(dir: &Path, name: &str, contents: &str) {
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = std::fs::write(dir.join(name), contents);
    }
}

/// Run one experiment cell: build prompts, generate, then run the critic
/// chain with skip-on-failure; backprompt while iterations remain.
/// Environment problems yield `Verdict::InfraError`, never a panic or `Err`.
pub fn run_cell(
    bundle: &CaseBundle,
    cfg: &CellConfig,
    sample_index: u32,
    env: &PipelineEnv,
) -> CellResult {
    let selection = select_specs(bundle, &cfg.combination);
    let system_text = build_system_prompt();
    let user_text = match build_user_prompt(&selection, &bundle.interface, cfg.cot) {
        Ok(text) => text,
        Err(e) => {
            return failed_cell(
                bundle,
                cfg,
                sample_index,
                Verdict::InfraError,
                e.to_string(),
            )
        }
    };
    let prompt = PromptPair {
        system_text: system_text.clone(),
        user_text: user_text.clone(),
    };
    let function_name = bundle
        .interface
        .function_name()
        .unwrap_or("function")
        .to_string();

    let mut conversation = vec![
        ChatMessage::system(&system_text),
        ChatMessage::user(&user_text),
    ];
    let mut params = cfg.params.clone();
    params.model_id = cfg.model_id.clone();
    params.samples = 1;

    let mut result = CellResult {
        bundle_name: bundle.name.clone(),
        model_id: cfg.model_id.clone(),
        combination_label: cfg.combination.label(),
        sample_index,
        iterations_used: 0,
        compile: None,
        verification: None,
        equivalence: None,
        quality: None,
        candidate: None,
        failure_detail: None,
        verdict: Verdict::InfraError,
        prompt_fingerprint: String::new(),
        prompt,
    };

    for iteration in 0..=cfg.max_iterations {
        let dir = cell_dir(env, &bundle.name, cfg, sample_index, iteration);
        result.iterations_used = iteration;
        // reset per-iteration stages
        result.compile = None;
        result.verification = None;
        result.equivalence = None;
        result.quality = None;
        result.candidate = None;
        result.failure_detail = None;

        persist(&dir, "prompt_system.txt", &system_text);
        if let Some(last_user) = conversation
            .iter()
            .rev()
            .find(|m| matches!(m.role, crate::gateway::Role::User))
        {
            persist(&dir, "prompt_user.txt", &last_user.content);
        }

        let responses = match env.gateway.generate_chat(&conversation, &params) {
            Ok(r) => r,
            Err(e) => {
                result.verdict = Verdict::InfraError;
                result.failure_detail = Some(e.to_string());
                return result;
            }
        };
        let response = responses.into_iter().next().expect("samples >= 1");
        if iteration == 0 {
            result.prompt_fingerprint = response.request_fingerprint.clone();
        }
        persist(&dir, "response.txt", &response.text);

        let feedback = match extract_code(&response, &function_name, sample_index) {
            Err(e) => {
                result.verdict = Verdict::ExtractFail;
                result.failure_detail = Some(e.to_string());
                FeedbackBundle {
                    prior_code: response.text.clone(),
                    compile_findings: vec![format!(
                        "no complete definition of '{function_name}' could be extracted from the response"
                    )],
                    unproved_goals: vec![],
                    quality_findings: vec![],
                    iteration: iteration + 1,
                }
            }
            Ok(candidate) => {
                persist(&dir, "candidate.c", &candidate.source);
                let source = candidate.source.clone();
                result.candidate = Some(candidate);
                match run_critics(bundle, cfg, &source, &dir, env, &mut result) {
                    Ok(feedback) => feedback,
                    Err(infra) => {
                        result.verdict = Verdict::InfraError;
                        result.failure_detail = Some(infra);
                        return result;
                    }
                }
            }
        };

        if result.verdict == Verdict::Pass || iteration == cfg.max_iterations {
            return result;
        }
        // Backprompt: keep the conversation, add the model turn and the
        // critic feedback as a new user turn.
        conversation.push(ChatMessage::assistant(&response.text));
        conversation.push(ChatMessage::user(build_feedback_prompt(&feedback)));
    }
    result
}

/// Critic chain for one candidate. Returns the feedback bundle that a
/// follow-up iteration would send; `Err` carries an infrastructure failure.
fn run_critics(
    bundle: &CaseBundle,
    cfg: &CellConfig,
    source: &str,
    dir: &Path,
    env: &PipelineEnv,
    result: &mut CellResult,
) -> Result<FeedbackBundle, String> {
    let mut feedback = FeedbackBundle {
        prior_code: source.to_string(),
        compile_findings: vec![],
        unproved_goals: vec![],
        quality_findings: vec![],
        iteration: result.iterations_used + 1,
    };

    if !cfg.critics.compile {
        result.verdict = Verdict::CompileFail;
        feedback
            .compile_findings
            .push("compile critic disabled".into());
        return Ok(feedback);
    }
    let compile = match critics::run_compile(source, &bundle.interface, dir, &env.tools) {
        Ok(report) => report,
        Err(e @ CriticError::Environment { .. }) => return Err(e.to_string()),
        Err(e) => return Err(e.to_string()),
    };
    let compiled = compile.success;
    feedback.compile_findings = compile
        .errors
        .iter()
        .map(|d| format!("line {}: {}", d.line, d.text))
        .collect();
    result.compile = Some(compile);
    if !compiled {
        result.verdict = Verdict::CompileFail;
        return Ok(feedback);
    }

    if cfg.critics.verify {
        match critics::run_verify(
            source,
            &bundle.acsl_contract,
            &bundle.interface,
            dir,
            &env.tools,
        ) {
            Ok(report) => {
                feedback.unproved_goals = report.unproved_goal_names();
                result.verification = Some(report);
            }
            Err(e @ CriticError::Environment { .. }) => return Err(e.to_string()),
            Err(e) => return Err(e.to_string()),
        }
    }

    // Observational critics: results recorded, verdict unaffected.
    if cfg.critics.equivalence {
        if let Some(reference) = &bundle.reference_source {
            match critics::run_equivalence(source, reference, &bundle.interface, dir, &env.tools) {
                Ok(eq) => result.equivalence = Some(eq),
                Err(e) => return Err(e.to_string()),
            }
        }
    }
    if cfg.critics.quality {
        if let Some(compile) = &result.compile {
            match quality::check_power_of_10(source, &bundle.interface, compile) {
                Ok(report) => {
                    feedback.quality_findings = report
                        .violations()
                        .map(|f| format!("rule {} line {}: {}", f.rule_id, f.line, f.message))
                        .collect();
                    result.quality = Some(report);
                }
                Err(e) => return Err(e.to_string()),
            }
        }
    }

    result.verdict = if result.fully_proved() {
        Verdict::Pass
    } else {
        Verdict::VerifyFail
    };
    Ok(feedback)
}

fn failed_cell(
    bundle: &CaseBundle,
    cfg: &CellConfig,
    sample_index: u32,
    verdict: Verdict,
    detail: String,
) -> CellResult {
    CellResult {
        bundle_name: bundle.name.clone(),
        model_id: cfg.model_id.clone(),
        combination_label: cfg.combination.label(),
        sample_index,
        iterations_used: 0,
        compile: None,
        verification: None,
        equivalence: None,
        quality: None,
        candidate: None,
        failure_detail: Some(detail),
        verdict,
        prompt_fingerprint: String::new(),
        prompt: PromptPair {
            system_text: String::new(),
            user_text: String::new(),
        },
    }
}

/// Defaults applied to every cell of a matrix run.
#[derive(Debug, Clone)]
pub struct MatrixDefaults {
    pub max_iterations: u32,
    pub params: GenerationParams,
    pub critics: CriticSet,
    pub cot: bool,
    pub parallelism: usize,
}

impl Default for MatrixDefaults {
    fn default() -> Self {
        MatrixDefaults {
            max_iterations: 0,
            params: GenerationParams::new(""),
            critics: CriticSet::default(),
            cot: true,
            parallelism: 1,
        }
    }
}

/// Execute every (bundle × model × combination × sample) cell. Cells are
/// independent; one cell's infrastructure error never aborts its siblings.
/// The returned set is in canonical order regardless of scheduling.
pub fn run_matrix(
    bundles: &[CaseBundle],
    models: &[String],
    combos: &[SpecCombination],
    defaults: &MatrixDefaults,
    env: &PipelineEnv,
) -> ResultSet {
    let mut jobs: Vec<(&CaseBundle, CellConfig, u32)> = Vec::new();
    for bundle in bundles {
        for model in models {
            for combo in combos {
                let cfg = CellConfig {
                    model_id: model.clone(),
                    combination: combo.clone(),
                    max_iterations: defaults.max_iterations,
                    params: defaults.params.clone(),
                    critics: defaults.critics,
                    cot: defaults.cot,
                };
                for sample in 0..defaults.params.samples.max(1) {
                    jobs.push((bundle, cfg.clone(), sample));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(defaults.parallelism.max(1))
        .build()
        .expect("thread pool");
    let cells: Vec<CellResult> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(bundle, cfg, sample)| run_cell(bundle, cfg, *sample, env))
            .collect()
    });

    let mut set = ResultSet {
        cells,
        created_at: chrono::Utc::now(),
        config_snapshot: serde_json::json!({
            "models": models,
            "bundles": bundles.iter().map(|b| b.name.clone()).collect::<Vec<_>>(),
            "combinations": combos.iter().map(|c| c.label()).collect::<Vec<_>>(),
            "max_iterations": defaults.max_iterations,
            "samples": defaults.params.samples,
        }),
    };
    let bundle_order: Vec<String> = bundles.iter().map(|b| b.name.clone()).collect();
    set.canonicalize(&bundle_order, models);
    set
}

/// pass@k: did any of the first `k` samples pass?
pub fn compute_pass_at_k(samples: &[CellResult], k: usize) -> Result<bool, String> {
    if k == 0 {
        return Err("k must be >= 1".to_string());
    }
    if k > samples.len() {
        return Err(format!("k = {k} exceeds sample count {}", samples.len()));
    }
    Ok(samples[..k].iter().any(|c| c.verdict == Verdict::Pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_cell(verdict: Verdict) -> CellResult {
        CellResult {
            bundle_name: "B".into(),
            model_id: "m".into(),
            combination_label: "ACSL".into(),
            sample_index: 0,
            iterations_used: 0,
            compile: None,
            verification: None,
            equivalence: None,
            quality: None,
            candidate: None,
            failure_detail: None,
            verdict,
            prompt_fingerprint: "fp".into(),
            prompt: PromptPair {
                system_text: String::new(),
                user_text: String::new(),
            },
        }
    }

    #[test]
    fn pass_at_k_tabulated_cases() {
        let pass = dummy_cell(Verdict::Pass);
        let fail = dummy_cell(Verdict::CompileFail);
        assert_eq!(compute_pass_at_k(std::slice::from_ref(&pass), 1), Ok(true));
        assert_eq!(
            compute_pass_at_k(&[fail.clone(), pass.clone()], 1),
            Ok(false)
        );
        assert_eq!(compute_pass_at_k(&[fail, pass], 2), Ok(true));
    }

    #[test]
    fn pass_at_zero_is_a_contract_error() {
        assert!(compute_pass_at_k(&[dummy_cell(Verdict::Pass)], 0).is_err());
    }

    #[test]
    fn skip_chain_consistency_detects_out_of_order_stages() {
        let mut cell = dummy_cell(Verdict::CompileFail);
        assert!(cell.skip_chain_consistent());
        cell.verification = Some(crate::critics::VerificationReport {
            proved: 0,
            total: 1,
            goals: vec![],
            solver_log_path: String::new(),
            tool_version: String::new(),
        });
        // verification present without compile present is inconsistent
        assert!(!cell.skip_chain_consistent());
    }
}
