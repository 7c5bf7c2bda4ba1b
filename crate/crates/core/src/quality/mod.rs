//! Internal code-quality critic: C lexing, the LoC metric, and the adapted
//! power-of-10 rule checks.

mod lexer;
mod rules;

pub use lexer::{
    count_loc, extract_function, find_function_defs, lex, strip_comments_and_blanks, LexError,
    MetricError, Token, TokenKind, TokenStream,
};
pub use rules::{check_power_of_10, QualityError, QualityReport, RuleFinding, Severity};

/// Name of the first function defined in `source`, if any. Used by the
/// standalone `check` command when no interface is supplied.
pub fn first_function_name(source: &str) -> Option<String> {
    let stream = lex(source).ok()?;
    find_function_defs(source, &stream)
        .first()
        .map(|d| d.name.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::InterfaceContext;
    use crate::critics::{CompileReport, Diagnostic};

    fn interface() -> InterfaceContext {
        InterfaceContext {
            header_source:
                "typedef unsigned char tB;\nextern void writeOut(tB v);\nextern tB readIn(void);\n"
                    .to_string(),
            globals_source: "static tB flag;\n".to_string(),
            function_signature: "void F_10ms(void);".to_string(),
            scheduler_note: "Called every 10 ms.".to_string(),
        }
    }

    fn ok_compile() -> CompileReport {
        CompileReport {
            success: true,
            warnings: vec![],
            errors: vec![],
            tool_version: "test".to_string(),
        }
    }

    fn check(source: &str) -> QualityReport {
        check_power_of_10(source, &interface(), &ok_compile()).unwrap()
    }

    fn violated_rules(report: &QualityReport) -> Vec<u8> {
        report.violations().map(|f| f.rule_id).collect()
    }

    #[test]
    fn clean_function_conforms() {
        let report = check("void F_10ms(void)\n{\n    flag = 1U;\n    writeOut(flag);\n}\n");
        assert!(report.conforms, "findings: {:?}", report.findings);
        assert!(report.findings.is_empty());
        assert_eq!(report.loc, 5);
    }

    #[test]
    fn rule1_goto() {
        let report = check("void F_10ms(void)\n{\n    goto end;\nend:\n    flag = 1U;\n}\n");
        assert_eq!(violated_rules(&report), vec![1]);
        assert_eq!(report.violations().next().unwrap().line, 3);
    }

    #[test]
    fn rule1_recursion_cycle() {
        let src = "void F_10ms(void)\n{\n    F_10ms();\n}\n";
        let report = check(src);
        assert_eq!(violated_rules(&report), vec![1]);
    }

    #[test]
    fn rule1_mutual_recursion() {
        let src = "void a(void);\nvoid b(void)\n{\n    a();\n}\nvoid a(void)\n{\n    b();\n}\n";
        let report = check(src);
        assert!(violated_rules(&report).iter().all(|&r| r == 1));
        assert_eq!(report.violations().count(), 2);
    }

    #[test]
    fn rule2_while_flagged() {
        let report = check("void F_10ms(void)\n{\n    while (flag) { flag = 0U; }\n}\n");
        assert_eq!(violated_rules(&report), vec![2]);
    }

    #[test]
    fn rule2_bounded_for_passes() {
        let src =
            "void F_10ms(void)\n{\n    tB i;\n    for (i = 0U; i < 10U; i++) { flag = i; }\n}\n";
        let report = check(src);
        assert_eq!(violated_rules(&report), Vec::<u8>::new());
    }

    #[test]
    fn rule2_macro_bounded_for_passes() {
        let src = "void F_10ms(void)\n{\n    tB i;\n    for (i = 0U; i < MAX_COUNT; i++) { flag = i; }\n}\n";
        assert_eq!(violated_rules(&check(src)), Vec::<u8>::new());
    }

    #[test]
    fn rule2_unbounded_for_flagged() {
        let src = "void F_10ms(void)\n{\n    tB i;\n    for (i = 0U; i < flag; i++) { writeOut(i); }\n}\n";
        assert_eq!(violated_rules(&check(src)), vec![2]);
    }

    #[test]
    fn rule3_malloc() {
        let src = "void F_10ms(void)\n{\n    flag = 1U;\n    p = malloc(4U);\n}\n";
        assert_eq!(violated_rules(&check(src)), vec![3]);
    }

    #[test]
    fn rule4_sixty_one_lines() {
        let mut body = String::from("void F_10ms(void)\n{\n");
        for i in 0..59 {
            body.push_str(&format!("    flag = {i}U;\n"));
        }
        body.push_str("}\n");
        // 62 effective lines.
        let report = check(&body);
        assert_eq!(violated_rules(&report), vec![4]);

        // Exactly 60 passes: signature + brace + 57 statements + brace.
        let mut ok = String::from("void F_10ms(void)\n{\n");
        for i in 0..57 {
            ok.push_str(&format!("    flag = {i}U;\n"));
        }
        ok.push_str("}\n");
        let report = check(&ok);
        assert_eq!(report.loc, 60);
        assert_eq!(violated_rules(&report), Vec::<u8>::new());
    }

    #[test]
    fn rule6_single_use_file_scope_variable_is_advisory() {
        let src = "tB helper_state;\nvoid F_10ms(void)\n{\n    helper_state = 1U;\n}\nvoid G_10ms(void)\n{\n    flag = 2U;\n}\n";
        let report = check(src);
        let advisories: Vec<&RuleFinding> = report
            .findings
            .iter()
            .filter(|f| f.severity == Severity::Advisory)
            .collect();
        assert!(advisories.iter().any(|f| f.rule_id == 6));
        // Advisory only: still conforms.
        assert!(report.conforms);
    }

    #[test]
    fn rule7_ignored_return_value() {
        let src = "void F_10ms(void)\n{\n    readIn();\n}\n";
        assert_eq!(violated_rules(&check(src)), vec![7]);
    }

    #[test]
    fn rule7_void_cast_passes() {
        let src = "void F_10ms(void)\n{\n    (void)readIn();\n}\n";
        assert_eq!(violated_rules(&check(src)), Vec::<u8>::new());
    }

    #[test]
    fn rule7_consumed_value_passes() {
        let src = "void F_10ms(void)\n{\n    flag = readIn();\n}\n";
        assert_eq!(violated_rules(&check(src)), Vec::<u8>::new());
    }

    #[test]
    fn rule8_function_like_macro_is_advisory() {
        let src = "#define SQ(x) ((x) * (x))\nvoid F_10ms(void)\n{\n    flag = SQ(2U);\n}\n";
        let report = check(src);
        assert!(report
            .findings
            .iter()
            .any(|f| f.rule_id == 8 && f.severity == Severity::Advisory));
        assert!(report.conforms);
    }

    #[test]
    fn rule9_arrow_chain() {
        let src = "void F_10ms(void)\n{\n    a->b->c = 1U;\n}\n";
        assert_eq!(violated_rules(&check(src)), vec![9]);
    }

    #[test]
    fn rule9_double_deref() {
        let src = "void F_10ms(void)\n{\n    flag = **pp;\n}\n";
        assert_eq!(violated_rules(&check(src)), vec![9]);
    }

    #[test]
    fn rule9_multiplication_by_deref_is_fine() {
        let src = "void F_10ms(void)\n{\n    flag = a * *p;\n}\n";
        assert_eq!(violated_rules(&check(src)), Vec::<u8>::new());
    }

    #[test]
    fn rule9_function_pointer() {
        let src = "void F_10ms(void)\n{\n    void (*fp)(void) = 0;\n    fp();\n}\n";
        assert!(violated_rules(&check(src)).contains(&9));
    }

    #[test]
    fn rule10_compiler_warnings_block_conformance() {
        let compile = CompileReport {
            success: true,
            warnings: vec![Diagnostic {
                file: "unit.c".into(),
                line: 3,
                text: "unused variable".into(),
            }],
            errors: vec![],
            tool_version: "test".into(),
        };
        let report = check_power_of_10(
            "void F_10ms(void)\n{\n    flag = 1U;\n}\n",
            &interface(),
            &compile,
        )
        .unwrap();
        assert!(!report.conforms);
        assert!(report.violations().any(|f| f.rule_id == 10));
        assert_eq!(report.compiler_warning_count, 1);
    }

    #[test]
    fn precondition_requires_successful_compile() {
        let compile = CompileReport {
            success: false,
            warnings: vec![],
            errors: vec![],
            tool_version: "test".into(),
        };
        assert!(matches!(
            check_power_of_10("void F_10ms(void){}", &interface(), &compile),
            Err(QualityError::NotCompiled)
        ));
    }

    #[test]
    fn rule5_never_appears() {
        let sources = [
            "void F_10ms(void)\n{\n    goto x;\nx:\n    p = malloc(1U);\n    a->b->c = 1U;\n    while (1) { }\n    readIn();\n}\n",
            "void F_10ms(void)\n{\n    flag = 1U;\n}\n",
        ];
        for src in sources {
            let report = check(src);
            assert!(report.findings.iter().all(|f| f.rule_id != 5));
        }
    }

    #[test]
    fn single_violation_corpus_reports_exactly_the_intended_rule() {
        // One fixture per checkable rule: the rule id it must trigger, and
        // no other violation-severity finding.
        let corpus: Vec<(u8, &str)> = vec![
            (
                1,
                "void F_10ms(void)\n{\n    goto end;\nend:\n    flag = 1U;\n}\n",
            ),
            (
                2,
                "void F_10ms(void)\n{\n    while (flag) { flag = 0U; }\n}\n",
            ),
            (3, "void F_10ms(void)\n{\n    p = malloc(4U);\n}\n"),
            (7, "void F_10ms(void)\n{\n    readIn();\n}\n"),
            (9, "void F_10ms(void)\n{\n    a->b->c = 1U;\n}\n"),
        ];
        for (rule, src) in corpus {
            let report = check(src);
            let rules = violated_rules(&report);
            assert_eq!(rules, vec![rule], "fixture for rule {rule}: {rules:?}");
        }
        // Advisory rules 6 and 8 on their own fixtures, with no violations.
        let r6 = check("tB lonely;\nvoid F_10ms(void)\n{\n    lonely = 1U;\n}\nvoid G(void)\n{\n    flag = 1U;\n}\n");
        assert!(r6.findings.iter().any(|f| f.rule_id == 6));
        assert!(r6.violations().count() == 0);
        let r8 =
            check("#define TWICE(x) ((x) + (x))\nvoid F_10ms(void)\n{\n    flag = TWICE(1U);\n}\n");
        assert!(r8.findings.iter().any(|f| f.rule_id == 8));
        assert!(r8.violations().count() == 0);
    }

    #[test]
    fn conforms_is_monotone_when_the_offending_line_is_removed() {
        let with = "void F_10ms(void)\n{\n    flag = 1U;\n    goto end;\nend:\n    flag = 2U;\n}\n";
        let without = "void F_10ms(void)\n{\n    flag = 1U;\nend:\n    flag = 2U;\n}\n";
        assert!(!check(with).conforms);
        assert!(check(without).conforms);
    }

    #[test]
    fn first_function_name_finds_the_definition() {
        assert_eq!(
            first_function_name("void f(void);\nint g(int a)\n{\n    return a;\n}\n"),
            Some("g".to_string())
        );
        assert_eq!(first_function_name("int x;"), None);
    }
}
