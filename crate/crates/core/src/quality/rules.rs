//! Token-level checks for the adapted safety-critical coding rules.
//! Rule 5 (runtime assertions) is deliberately not part of the set; rules 6
//! and 8 are advisory, the rest are conformance-blocking violations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::{
    count_loc, find_function_defs, lex, FunctionDef, LexError, MetricError, Token, TokenKind,
    TokenStream,
};
use crate::bundle::InterfaceContext;
use crate::critics::CompileReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Violation,
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleFinding {
    /// 1..10, never 5.
    pub rule_id: u8,
    pub severity: Severity,
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Effective lines of the checked function.
    pub loc: usize,
    pub findings: Vec<RuleFinding>,
    /// Imported from the compile report for rule 10.
    pub compiler_warning_count: usize,
    pub conforms: bool,
}

impl QualityReport {
    pub fn violations(&self) -> impl Iterator<Item = &RuleFinding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Violation)
    }
}

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("quality analysis requires a successful compile")]
    NotCompiled,
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn finding(rule_id: u8, severity: Severity, line: u32, message: impl Into<String>) -> RuleFinding {
    debug_assert!((1..=10).contains(&rule_id) && rule_id != 5);
    RuleFinding {
        rule_id,
        severity,
        line,
        message: message.into(),
    }
}

/// True for the constant-spelling convention: macro or enum constants are
/// all caps with digits and underscores.
fn is_constant_style(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

const ALLOC_FUNCTIONS: &[&str] = &["malloc", "calloc", "realloc", "free", "alloca", "strdup"];

/// Function declarations in the interface header, mapped to whether they
/// return void (for the unused-return-value rule).
fn interface_function_returns(interface: &InterfaceContext) -> BTreeMap<String, bool> {
    let mut map = BTreeMap::new();
    let Ok(stream) = lex(&interface.header_source) else {
        return map;
    };
    let toks = &stream.tokens;
    let mut depth = 0i32;
    for i in 0..toks.len() {
        match toks[i].text.as_str() {
            "{" | "(" => depth += 1,
            "}" | ")" => depth -= 1,
            _ => {}
        }
        if depth == 0
            && toks[i].kind == TokenKind::Identifier
            && toks.get(i + 1).is_some_and(|n| n.text == "(")
            && i > 0
        {
            let prev = &toks[i - 1];
            let is_type_ish =
                matches!(prev.kind, TokenKind::Keyword | TokenKind::Identifier) || prev.text == "*";
            if !is_type_ish {
                continue;
            }
            let returns_void = prev.text == "void";
            map.insert(toks[i].text.clone(), returns_void);
        }
    }
    map
}

fn check_rule1_flow(stream: &TokenStream, defs: &[FunctionDef], findings: &mut Vec<RuleFinding>) {
    for t in &stream.tokens {
        if t.text == "goto" && t.kind == TokenKind::Keyword {
            findings.push(finding(1, Severity::Violation, t.line, "use of goto"));
        }
        if matches!(t.text.as_str(), "setjmp" | "longjmp") && t.kind == TokenKind::Identifier {
            findings.push(finding(
                1,
                Severity::Violation,
                t.line,
                format!("use of {}", t.text),
            ));
        }
    }

    // Recursion: cycle in the intra-unit call graph.
    let names: BTreeSet<&str> = defs.iter().map(|d| d.name.as_str()).collect();
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for def in defs {
        let body = &stream.tokens[def.body_tokens.clone()];
        let callees: BTreeSet<&str> = body
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                t.kind == TokenKind::Identifier
                    && names.contains(t.text.as_str())
                    && body.get(i + 1).is_some_and(|n| n.text == "(")
            })
            .map(|(_, t)| t.text.as_str())
            .collect();
        edges.insert(def.name.as_str(), callees);
    }
    fn reaches(
        edges: &BTreeMap<&str, BTreeSet<&str>>,
        from: &str,
        target: &str,
        seen: &mut BTreeSet<String>,
    ) -> bool {
        if !seen.insert(from.to_string()) {
            return false;
        }
        edges.get(from).is_some_and(|cs| {
            cs.contains(target) || cs.iter().any(|c| reaches(edges, c, target, seen))
        })
    }
    for def in defs {
        if reaches(&edges, &def.name, &def.name, &mut BTreeSet::new()) {
            findings.push(finding(
                1,
                Severity::Violation,
                def.line,
                format!("function '{}' is part of a recursion cycle", def.name),
            ));
        }
    }
}

fn check_rule2_loops(stream: &TokenStream, findings: &mut Vec<RuleFinding>) {
    let toks = &stream.tokens;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "do" => {
                    findings.push(finding(
                        2,
                        Severity::Violation,
                        t.line,
                        "do-while loop has no syntactically fixed bound",
                    ));
                }
                "while" => {
                    // do-while tails are flagged at the 'do'; a bare while is
                    // flagged here. Both count, so flag every 'while' whose
                    // preceding token is not '}' of a do body... keeping it
                    // conservative: flag all standalone whiles.
                    let is_do_tail = i > 0 && toks[i - 1].text == "}";
                    if !is_do_tail {
                        findings.push(finding(
                            2,
                            Severity::Violation,
                            t.line,
                            "while loop has no syntactically fixed bound",
                        ));
                    }
                }
                "for" => {
                    if let Some(v) = check_for_bound(toks, i) {
                        findings.push(v);
                    }
                }
                _ => {}
            }
        }
        i += 1;
    }
}

/// A for loop passes when its condition compares the loop variable against
/// an integer literal or a constant-style identifier.
fn check_for_bound(toks: &[Token], for_idx: usize) -> Option<RuleFinding> {
    let line = toks[for_idx].line;
    let fail = |msg: &str| Some(finding(2, Severity::Violation, line, msg));
    if toks.get(for_idx + 1)?.text != "(" {
        return fail("malformed for loop header");
    }
    // Collect clause token ranges split on ';' at depth 1.
    let mut depth = 0i32;
    let mut clauses: Vec<Vec<&Token>> = vec![Vec::new()];
    let mut i = for_idx + 1;
    while i < toks.len() {
        match toks[i].text.as_str() {
            "(" => {
                depth += 1;
                if depth > 1 {
                    clauses.last_mut().unwrap().push(&toks[i]);
                }
            }
            ")" => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
                clauses.last_mut().unwrap().push(&toks[i]);
            }
            ";" if depth == 1 => clauses.push(Vec::new()),
            _ => clauses.last_mut().unwrap().push(&toks[i]),
        }
        i += 1;
    }
    if clauses.len() != 3 {
        return fail("for loop header does not have three clauses");
    }
    let loop_var = clauses[0]
        .iter()
        .chain(clauses[1].iter())
        .find(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text.clone());
    let Some(loop_var) = loop_var else {
        return fail("for loop has no identifiable loop variable");
    };
    let cond = &clauses[1];
    let rel = cond
        .iter()
        .position(|t| matches!(t.text.as_str(), "<" | "<=" | ">" | ">=" | "!="));
    let Some(rel) = rel else {
        return fail("for loop condition has no relational bound");
    };
    let lhs = cond[..rel].iter().any(|t| t.text == loop_var);
    let rhs = cond[rel + 1..].iter().any(|t| t.text == loop_var);
    let bound_side: Vec<&&Token> = if lhs {
        cond[rel + 1..].iter().collect()
    } else if rhs {
        cond[..rel].iter().collect()
    } else {
        return fail("for loop condition does not involve the loop variable");
    };
    let bounded = bound_side.iter().any(|t| {
        t.kind == TokenKind::Literal
            || (t.kind == TokenKind::Identifier && is_constant_style(&t.text))
    });
    if bounded {
        None
    } else {
        fail("for loop bound is neither an integer literal nor a constant")
    }
}

fn check_rule3_alloc(stream: &TokenStream, findings: &mut Vec<RuleFinding>) {
    let toks = &stream.tokens;
    for (i, t) in toks.iter().enumerate() {
        if t.kind == TokenKind::Identifier
            && ALLOC_FUNCTIONS.contains(&t.text.as_str())
            && toks.get(i + 1).is_some_and(|n| n.text == "(")
        {
            findings.push(finding(
                3,
                Severity::Violation,
                t.line,
                format!("dynamic memory management call '{}'", t.text),
            ));
        }
    }
}

fn check_rule4_size(
    source: &str,
    defs: &[FunctionDef],
    findings: &mut Vec<RuleFinding>,
) -> Result<usize, MetricError> {
    let mut primary_loc = 0;
    for (idx, def) in defs.iter().enumerate() {
        let loc = count_loc(source, &def.name)?;
        if idx == 0 {
            primary_loc = loc;
        }
        if loc > 60 {
            findings.push(finding(
                4,
                Severity::Violation,
                def.line,
                format!(
                    "function '{}' is {loc} effective lines (limit 60)",
                    def.name
                ),
            ));
        }
    }
    Ok(primary_loc)
}

fn check_rule6_scope(stream: &TokenStream, defs: &[FunctionDef], findings: &mut Vec<RuleFinding>) {
    // File-scope mutable variables declared in this unit.
    let toks = &stream.tokens;
    let mut depth = 0i32;
    let mut stmt_start = 0usize;
    let mut file_vars: Vec<(String, u32)> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        match toks[i].text.as_str() {
            "{" => {
                depth += 1;
                i += 1;
                continue;
            }
            "}" => {
                depth -= 1;
                stmt_start = i + 1;
                i += 1;
                continue;
            }
            ";" if depth == 0 => {
                let stmt = &toks[stmt_start..i];
                let is_decl = !stmt.is_empty()
                    && matches!(stmt[0].kind, TokenKind::Keyword | TokenKind::Identifier)
                    && !stmt.iter().any(|t| {
                        t.text == "(" || matches!(t.text.as_str(), "typedef" | "extern" | "const")
                    });
                if is_decl {
                    let name = stmt
                        .iter()
                        .take_while(|t| t.text != "=")
                        .filter(|t| t.kind == TokenKind::Identifier)
                        .last();
                    if let Some(name) = name {
                        file_vars.push((name.text.clone(), name.line));
                    }
                }
                stmt_start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }

    for (var, line) in file_vars {
        let referencing: usize = defs
            .iter()
            .filter(|d| {
                stream.tokens[d.body_tokens.clone()]
                    .iter()
                    .any(|t| t.kind == TokenKind::Identifier && t.text == var)
            })
            .count();
        if referencing == 1 {
            findings.push(finding(
                6,
                Severity::Advisory,
                line,
                format!("file-scope variable '{var}' is used by only one function; consider narrowing its scope"),
            ));
        }
    }
}

fn check_rule7_return_values(
    stream: &TokenStream,
    interface: &InterfaceContext,
    findings: &mut Vec<RuleFinding>,
) {
    let returns = interface_function_returns(interface);
    let toks = &stream.tokens;
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Identifier || !toks.get(i + 1).is_some_and(|n| n.text == "(") {
            continue;
        }
        let Some(false) = returns.get(&t.text).copied() else {
            continue; // not an interface function, or returns void
        };
        // Statement-start context: previous token ends a statement or block.
        // A `(void)` cast or any surrounding expression means the value is
        // consumed (or explicitly discarded).
        let stmt_start = i == 0 || matches!(toks[i - 1].text.as_str(), ";" | "{" | "}");
        if !stmt_start {
            continue;
        }
        // Confirm the call is the whole statement: matching ')' then ';'.
        let mut depth = 0i32;
        let mut j = i + 1;
        let mut whole = false;
        while j < toks.len() {
            match toks[j].text.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        whole = toks.get(j + 1).is_some_and(|n| n.text == ";");
                        break;
                    }
                }
                _ => {}
            }
            j += 1;
        }
        if whole {
            findings.push(finding(
                7,
                Severity::Violation,
                t.line,
                format!(
                    "return value of non-void function '{}' is ignored; cast to void or consume it",
                    t.text
                ),
            ));
        }
    }
}

fn check_rule8_preprocessor(stream: &TokenStream, findings: &mut Vec<RuleFinding>) {
    let pp: Vec<&Token> = stream
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::PreprocessorLine)
        .collect();

    // Include-guard pattern: leading #ifndef X / #define X plus one #endif.
    let mut guard_lines: BTreeSet<u32> = BTreeSet::new();
    if pp.len() >= 3 {
        let first = pp[0].text.trim();
        let second = pp[1].text.trim();
        if let Some(sym) = first.strip_prefix("#ifndef").map(str::trim) {
            if second
                .strip_prefix("#define")
                .map(str::trim)
                .is_some_and(|d| d == sym)
            {
                guard_lines.insert(pp[0].line);
                guard_lines.insert(pp[1].line);
                if let Some(last) = pp.last().filter(|t| t.text.trim().starts_with("#endif")) {
                    guard_lines.insert(last.line);
                }
            }
        }
    }

    for t in &pp {
        let text = t.text.trim();
        if guard_lines.contains(&t.line) {
            continue;
        }
        if let Some(rest) = text.strip_prefix("#define") {
            let rest = rest.trim_start();
            let name_len = rest
                .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            if rest[name_len..].starts_with('(') {
                findings.push(finding(
                    8,
                    Severity::Advisory,
                    t.line,
                    "function-like macro definition",
                ));
            }
        }
        if text.contains("##") {
            findings.push(finding(8, Severity::Advisory, t.line, "token pasting"));
        }
        if text.starts_with("#if") || text.starts_with("#elif") {
            findings.push(finding(
                8,
                Severity::Advisory,
                t.line,
                "conditional compilation outside an include guard",
            ));
        }
    }
}

fn check_rule9_pointers(stream: &TokenStream, findings: &mut Vec<RuleFinding>) {
    let toks = &stream.tokens;
    for i in 0..toks.len() {
        // Adjacent '*' '*' not preceded by a value (which would make it
        // multiplication by a dereference).
        if toks[i].text == "*" && toks.get(i + 1).is_some_and(|n| n.text == "*") {
            let prev_is_value = i > 0
                && (matches!(toks[i - 1].kind, TokenKind::Identifier | TokenKind::Literal)
                    || toks[i - 1].text == ")");
            if !prev_is_value {
                findings.push(finding(
                    9,
                    Severity::Violation,
                    toks[i].line,
                    "multi-level pointer dereference or declaration",
                ));
            }
        }
        // a->b->c chains: '->' whose pointee is again dereferenced.
        if toks[i].text == "->"
            && toks
                .get(i + 1)
                .is_some_and(|n| n.kind == TokenKind::Identifier)
            && toks.get(i + 2).is_some_and(|n| n.text == "->")
        {
            findings.push(finding(
                9,
                Severity::Violation,
                toks[i + 2].line,
                "pointer dereference chain deeper than one level",
            ));
        }
        // Function-pointer declarator: ( * name ) (
        if toks[i].text == "("
            && toks.get(i + 1).is_some_and(|n| n.text == "*")
            && toks
                .get(i + 2)
                .is_some_and(|n| n.kind == TokenKind::Identifier)
            && toks.get(i + 3).is_some_and(|n| n.text == ")")
            && toks.get(i + 4).is_some_and(|n| n.text == "(")
        {
            findings.push(finding(
                9,
                Severity::Violation,
                toks[i].line,
                "function pointer declarator",
            ));
        }
    }
}

/// Evaluate the rule set over a compiled candidate.
///
/// `source` is the candidate translation-unit fragment (typically the single
/// generated function); `interface` supplies declared function return types;
/// the compile report contributes the rule-10 warning count.
pub fn check_power_of_10(
    source: &str,
    interface: &InterfaceContext,
    compile_report: &CompileReport,
) -> Result<QualityReport, QualityError> {
    if !compile_report.success {
        return Err(QualityError::NotCompiled);
    }
    let stream = lex(source)?;
    let defs = find_function_defs(source, &stream);
    let mut findings = Vec::new();

    check_rule1_flow(&stream, &defs, &mut findings);
    check_rule2_loops(&stream, &mut findings);
    check_rule3_alloc(&stream, &mut findings);
    let loc = check_rule4_size(source, &defs, &mut findings)?;
    check_rule6_scope(&stream, &defs, &mut findings);
    check_rule7_return_values(&stream, interface, &mut findings);
    check_rule8_preprocessor(&stream, &mut findings);
    check_rule9_pointers(&stream, &mut findings);

    let compiler_warning_count = compile_report.warnings.len();
    if compiler_warning_count > 0 {
        findings.push(finding(
            10,
            Severity::Violation,
            0,
            format!("{compiler_warning_count} compiler warning(s) must be addressed"),
        ));
    }

    findings.sort_by_key(|f| (f.line, f.rule_id));
    let conforms =
        findings.iter().all(|f| f.severity != Severity::Violation) && compiler_warning_count == 0;
    Ok(QualityReport {
        loc,
        findings,
        compiler_warning_count,
        conforms,
    })
}
