//! Prompt assembly: system prompt, user prompt, and backprompt feedback
//! turns. All outputs are byte-stable for identical inputs; specification
//! text is never reformatted, every item appears verbatim.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{InterfaceContext, SpecItem, SpecKind};

/// A system/user prompt pair for one generation request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system_text: String,
    pub user_text: String,
}

/// The rationale trigger appended when chain-of-thought prompting is on.
pub const COT_TRIGGER: &str = "Let's think step by step";

const SYSTEM_PROMPT: &str = "\
You are an experienced verification engineer with expertise in safe embedded C programming and writing ANSI/ISO C Specification Language (ACSL) specifications for safety-critical systems. Your role is to analyze C programs with accompanying ACSL and natural language specifications. Produce complete C functions that satisfy the given specifications by following these guidelines:

- Do not alter the provided specifications.
- Do not explain or comment on the code you produce.
- Do not modify any provided header files.

When given a task, focus only on implementing the required C function that meet the specifications. Prioritize safety and correctness in your implementations, ensuring that your code not only meets the given specifications but also adheres to best practices for safety-critical systems by following the 10 Rules for Developing Safety-Critical Code.

- Avoid complex flow constructs, such as goto and recursion.
- All loops must have fixed bounds.
- Do not use dynamic memory allocation after initialization.
- Restrict size of function to around 60 LOC.
- (Use a minimum of two runtime assertions per function.)
- Restrict the scope of data to the smallest possible.
- Check the return value of all non-void functions, or cast to void to indicate the return value is useless.
- Use the preprocessor sparingly.
- Limit pointer use to a single dereference, and do not use function pointers.
- Compile with all possible warnings active; all warnings should then be addressed before release of the software.
";

/// The fixed system prompt: role paragraph, the three guidelines, and the
/// coding rule list with rule 5 parenthesized (not enforced).
pub fn build_system_prompt() -> String {
    SYSTEM_PROMPT.to_string()
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("specification selection must not be empty")]
    EmptySelection,
}

fn kind_phrase(kind: SpecKind) -> &'static str {
    match kind {
        SpecKind::Hlnl => "high-level",
        SpecKind::Llnl => "low-level",
        SpecKind::Acsl => "ACSL",
    }
}

fn join_kind_names(kinds: &[SpecKind]) -> String {
    let names: Vec<&str> = kinds.iter().map(|k| kind_phrase(*k)).collect();
    match names.len() {
        1 => names[0].to_string(),
        2 => format!("{} and {}", names[0], names[1]),
        _ => {
            let (last, init) = names.split_last().expect("non-empty");
            format!("{}, and {}", init.join(", "), last)
        }
    }
}

/// Assemble the user prompt: task sentence, selected specifications (natural
/// language as bullets, ACSL as fenced blocks), then the interface context
/// verbatim, and finally the chain-of-thought trigger when `cot` is set.
pub fn build_user_prompt(
    selection: &[&SpecItem],
    interface: &InterfaceContext,
    cot: bool,
) -> Result<String, PromptError> {
    if selection.is_empty() {
        return Err(PromptError::EmptySelection);
    }

    let mut kinds_present: Vec<SpecKind> = Vec::new();
    for kind in SpecKind::ALL {
        if selection.iter().any(|s| s.kind == kind) {
            kinds_present.push(kind);
        }
    }
    let noun = if selection.len() == 1 {
        "specification"
    } else {
        "specifications"
    };

    let mut out = String::new();
    out.push_str(&format!(
        "Generate the C code for a function that implements the following {} {}.\n",
        join_kind_names(&kinds_present),
        noun
    ));

    // Natural-language items as bullets, ACSL items as fenced blocks,
    // kind-major in the selection's order.
    for item in selection {
        match item.kind {
            SpecKind::Hlnl | SpecKind::Llnl => {
                out.push_str(&format!("- {}\n", item.text.trim_end_matches('\n')));
            }
            SpecKind::Acsl => {
                out.push_str("```acsl\n");
                out.push_str(item.text.trim_end_matches('\n'));
                out.push_str("\n```\n");
            }
        }
    }

    out.push('\n');
    out.push_str(&format!(
        "{}\n",
        interface.scheduler_note.trim_end_matches('\n')
    ));
    out.push('\n');
    out.push_str("```c\n");
    out.push_str("//Header\n");
    out.push_str(interface.header_source.trim_end_matches('\n'));
    out.push_str("\n\n");
    out.push_str(interface.globals_source.trim_end_matches('\n'));
    out.push_str("\n\n");
    out.push_str("//Function\n");
    out.push_str(interface.function_signature.trim_end_matches('\n'));
    out.push_str("\n```\n");

    if cot {
        out.push('\n');
        out.push_str(COT_TRIGGER);
        out.push('\n');
    }
    Ok(out)
}

/// Findings carried back into the conversation for one refinement turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub prior_code: String,
    pub compile_findings: Vec<String>,
    pub unproved_goals: Vec<String>,
    pub quality_findings: Vec<String>,
    pub iteration: u32,
}

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("feedback bundle must carry at least one finding")]
    NoFindings,
    #[error("iteration must be >= 1, got {0}")]
    BadIteration(u32),
}

impl FeedbackBundle {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.compile_findings.is_empty()
            && self.unproved_goals.is_empty()
            && self.quality_findings.is_empty()
        {
            return Err(FeedbackError::NoFindings);
        }
        if self.iteration < 1 {
            return Err(FeedbackError::BadIteration(self.iteration));
        }
        Ok(())
    }
}

/// Render the backprompt turn: prior code, critic findings grouped by
/// critic (verbatim, order preserved), and the correction instruction.
pub fn build_feedback_prompt(feedback: &FeedbackBundle) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "This is iteration {} of the refinement loop. The previous implementation did not pass all critics.\n\n",
        feedback.iteration
    ));
    out.push_str("Previous code:\n```c\n");
    out.push_str(feedback.prior_code.trim_end_matches('\n'));
    out.push_str("\n```\n\n");
    out.push_str("Critic feedback:\n");
    let mut group = |title: &str, findings: &[String]| {
        if !findings.is_empty() {
            out.push_str(&format!("{title}:\n"));
            for finding in findings {
                out.push_str(&format!("- {finding}\n"));
            }
        }
    };
    group("Compiler", &feedback.compile_findings);
    group("Verifier unproved goals", &feedback.unproved_goals);
    group("Code quality", &feedback.quality_findings);
    out.push_str(
        "\nProduce a corrected, complete definition of the function only. Do not alter the provided specifications or header.\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::select_specs;

    fn interface() -> InterfaceContext {
        InterfaceContext {
            header_source: "typedef unsigned char tB;\n#define TRUE 1\n".to_string(),
            globals_source: "//Input variables\nstatic tB rtdb_req;\n\n//Output variables\nstatic tB rtdb_truck;\n".to_string(),
            function_signature: "void Brak_10ms(void);".to_string(),
            scheduler_note: "The function is called by a static scheduler once every 10 ms.".to_string(),
        }
    }

    fn item(id: &str, kind: SpecKind, text: &str) -> SpecItem {
        SpecItem {
            id: id.to_string(),
            kind,
            text: text.to_string(),
        }
    }

    #[test]
    fn system_prompt_opens_with_the_role_sentence() {
        let prompt = build_system_prompt();
        assert!(prompt.starts_with(
            "You are an experienced verification engineer with expertise in safe embedded C programming"
        ));
    }

    #[test]
    fn system_prompt_parenthesizes_rule_5() {
        let prompt = build_system_prompt();
        assert!(prompt.contains("- (Use a minimum of two runtime assertions per function.)"));
    }

    #[test]
    fn system_prompt_is_deterministic() {
        assert_eq!(build_system_prompt(), build_system_prompt());
    }

    #[test]
    fn system_prompt_lists_the_other_nine_rules() {
        let prompt = build_system_prompt();
        for needle in [
            "goto and recursion",
            "fixed bounds",
            "dynamic memory allocation",
            "around 60 LOC",
            "smallest possible",
            "non-void functions",
            "preprocessor sparingly",
            "single dereference",
            "warnings active",
        ] {
            assert!(prompt.contains(needle), "missing rule text: {needle}");
        }
    }

    #[test]
    fn user_prompt_contains_spec_and_signature_verbatim() {
        let hlnl = item(
            "hlnl-1",
            SpecKind::Hlnl,
            "If there is a brake light request, then the truck and trailer lights shall be activated.",
        );
        let iface = interface();
        let prompt = build_user_prompt(&[&hlnl], &iface, false).unwrap();
        assert!(prompt.contains(&hlnl.text));
        assert!(prompt.contains("void Brak_10ms(void);"));
        assert!(prompt.contains("high-level specification."));
    }

    #[test]
    fn user_prompt_cot_trigger_is_the_last_line() {
        let hlnl = item("hlnl-1", SpecKind::Hlnl, "A spec.");
        let prompt = build_user_prompt(&[&hlnl], &interface(), true).unwrap();
        assert_eq!(prompt.lines().last().unwrap(), COT_TRIGGER);
    }

    #[test]
    fn user_prompt_is_deterministic() {
        let hlnl = item("hlnl-1", SpecKind::Hlnl, "A spec.");
        let a = build_user_prompt(&[&hlnl], &interface(), true).unwrap();
        let b = build_user_prompt(&[&hlnl], &interface(), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn user_prompt_rejects_empty_selection() {
        assert!(matches!(
            build_user_prompt(&[], &interface(), false),
            Err(PromptError::EmptySelection)
        ));
    }

    #[test]
    fn acsl_items_are_fenced_nl_items_are_bullets() {
        let hlnl = item("h", SpecKind::Hlnl, "NL text.");
        let acsl = item("a", SpecKind::Acsl, "ensures x == 1;");
        let prompt = build_user_prompt(&[&hlnl, &acsl], &interface(), false).unwrap();
        assert!(prompt.contains("- NL text.\n"));
        assert!(prompt.contains("```acsl\nensures x == 1;\n```\n"));
        assert!(prompt.contains("high-level and ACSL specifications."));
    }

    #[test]
    fn every_selected_item_appears_as_contiguous_substring() {
        let bundle = crate::bundle::CaseBundle {
            name: "T".into(),
            interface: interface(),
            specs: vec![
                item("h1", SpecKind::Hlnl, "High level one."),
                item("l1", SpecKind::Llnl, "Low level one."),
                item("l2", SpecKind::Llnl, "Low level two."),
                item("a1", SpecKind::Acsl, "ensures a == 1;"),
            ],
            reference_source: None,
            acsl_contract: String::new(),
        };
        for combo in crate::bundle::enumerate_combinations() {
            let selection = select_specs(&bundle, &combo);
            let prompt = build_user_prompt(&selection, &bundle.interface, true).unwrap();
            for item in &selection {
                assert!(
                    prompt.contains(&item.text),
                    "item {} missing from prompt for {}",
                    item.id,
                    combo.label()
                );
            }
        }
    }

    #[test]
    fn prompt_length_is_monotone_in_selection_size() {
        let items: Vec<SpecItem> = (0..5)
            .map(|i| {
                item(
                    &format!("l{i}"),
                    SpecKind::Llnl,
                    &format!("Requirement {i}."),
                )
            })
            .collect();
        let iface = interface();
        let mut prev = 0usize;
        for n in 1..=items.len() {
            let sel: Vec<&SpecItem> = items[..n].iter().collect();
            let len = build_user_prompt(&sel, &iface, false).unwrap().len();
            assert!(len > prev);
            prev = len;
        }
    }

    #[test]
    fn feedback_prompt_quotes_findings_verbatim_and_in_order() {
        let fb = FeedbackBundle {
            prior_code: "void f(void) { }".to_string(),
            compile_findings: vec!["undeclared identifier 'foo'".to_string()],
            unproved_goals: vec!["goal_a".into(), "goal_b".into(), "goal_c".into()],
            quality_findings: vec![],
            iteration: 2,
        };
        fb.validate().unwrap();
        let prompt = build_feedback_prompt(&fb);
        assert!(prompt.contains("undeclared identifier 'foo'"));
        assert!(prompt.contains("iteration 2"));
        let a = prompt.find("goal_a").unwrap();
        let b = prompt.find("goal_b").unwrap();
        let c = prompt.find("goal_c").unwrap();
        assert!(a < b && b < c);
        assert!(prompt.contains("void f(void) { }"));
    }

    #[test]
    fn feedback_bundle_requires_a_finding_and_iteration_ge_1() {
        let empty = FeedbackBundle {
            prior_code: String::new(),
            compile_findings: vec![],
            unproved_goals: vec![],
            quality_findings: vec![],
            iteration: 1,
        };
        assert!(matches!(empty.validate(), Err(FeedbackError::NoFindings)));
        let bad_iter = FeedbackBundle {
            iteration: 0,
            compile_findings: vec!["x".into()],
            ..empty
        };
        assert!(matches!(
            bad_iter.validate(),
            Err(FeedbackError::BadIteration(0))
        ));
    }
}
