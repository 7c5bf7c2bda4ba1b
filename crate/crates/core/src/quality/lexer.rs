//! A small C lexer: enough structure for comment stripping, LoC counting,
//! function extraction, and the token-level rule checks. Not a parser; no
//! preprocessing is performed.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Punctuator,
    Literal,
    /// A whole `#...` logical line, continuations included.
    PreprocessorLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
    /// Byte offsets into the original source.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexError {
    #[error("line {line}: unterminated block comment")]
    UnterminatedComment { line: u32 },
    #[error("line {line}: unterminated string or character literal")]
    UnterminatedLiteral { line: u32 },
}

const KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Complex",
    "_Imaginary",
];

// Longest-match-first multi-character punctuators.
const PUNCTUATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "*=",
    "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##", "[", "]", "(", ")", "{", "}", ".", "&", "*",
    "+", "-", "~", "!", "/", "%", "<", ">", "^", "|", "?", ":", ";", "=", ",", "#",
];

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.bytes.get(self.pos + 1).copied()
    }

    fn bump(&mut self) {
        if let Some(b) = self.peek() {
            self.pos += 1;
            if b == b'\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Tokenize C source. Comments and whitespace are dropped; token line and
/// column positions refer to the original text.
pub fn lex(source: &str) -> Result<TokenStream, LexError> {
    let mut cur = Cursor {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut at_line_start = true;

    while let Some(b) = cur.peek() {
        match b {
            b' ' | b'\t' | b'\r' => cur.bump(),
            b'\n' => {
                cur.bump();
                at_line_start = true;
            }
            b'/' if cur.peek2() == Some(b'/') => {
                while cur.peek().is_some_and(|c| c != b'\n') {
                    cur.bump();
                }
            }
            b'/' if cur.peek2() == Some(b'*') => {
                let line = cur.line;
                cur.bump();
                cur.bump();
                loop {
                    if cur.starts_with("*/") {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    if cur.peek().is_none() {
                        return Err(LexError::UnterminatedComment { line });
                    }
                    cur.bump();
                }
            }
            b'#' if at_line_start => {
                let (line, col, start) = (cur.line, cur.col, cur.pos);
                // Consume the logical line, honoring backslash continuations.
                loop {
                    match cur.peek() {
                        None => break,
                        Some(b'\n') => {
                            if cur.bytes.get(cur.pos.wrapping_sub(1)) == Some(&b'\\') {
                                cur.bump();
                            } else {
                                break;
                            }
                        }
                        Some(_) => cur.bump(),
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::PreprocessorLine,
                    text: source[start..cur.pos].to_string(),
                    line,
                    column: col,
                    start,
                    end: cur.pos,
                });
            }
            b'"' | b'\'' => {
                let (line, col, start) = (cur.line, cur.col, cur.pos);
                let quote = b;
                cur.bump();
                loop {
                    match cur.peek() {
                        None | Some(b'\n') => return Err(LexError::UnterminatedLiteral { line }),
                        Some(b'\\') => {
                            cur.bump();
                            cur.bump();
                        }
                        Some(c) => {
                            cur.bump();
                            if c == quote {
                                break;
                            }
                        }
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Literal,
                    text: source[start..cur.pos].to_string(),
                    line,
                    column: col,
                    start,
                    end: cur.pos,
                });
                at_line_start = false;
            }
            b if is_ident_start(b) => {
                let (line, col, start) = (cur.line, cur.col, cur.pos);
                while cur.peek().is_some_and(is_ident_continue) {
                    cur.bump();
                }
                let text = &source[start..cur.pos];
                tokens.push(Token {
                    kind: if KEYWORDS.contains(&text) {
                        TokenKind::Keyword
                    } else {
                        TokenKind::Identifier
                    },
                    text: text.to_string(),
                    line,
                    column: col,
                    start,
                    end: cur.pos,
                });
                at_line_start = false;
            }
            b if b.is_ascii_digit() => {
                let (line, col, start) = (cur.line, cur.col, cur.pos);
                // Numbers, including suffixes, hex, and simple float forms.
                while cur
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'.' || c == b'_')
                {
                    cur.bump();
                }
                tokens.push(Token {
                    kind: TokenKind::Literal,
                    text: source[start..cur.pos].to_string(),
                    line,
                    column: col,
                    start,
                    end: cur.pos,
                });
                at_line_start = false;
            }
            _ => {
                let (line, col, start) = (cur.line, cur.col, cur.pos);
                let matched = PUNCTUATORS.iter().find(|p| cur.starts_with(p)).copied();
                match matched {
                    Some(p) => {
                        for _ in 0..p.len() {
                            cur.bump();
                        }
                        tokens.push(Token {
                            kind: TokenKind::Punctuator,
                            text: p.to_string(),
                            line,
                            column: col,
                            start,
                            end: cur.pos,
                        });
                    }
                    None => cur.bump(), // skip unknown byte
                }
                at_line_start = false;
            }
        }
    }
    debug_assert!(tokens.windows(2).all(|w| w[0].line <= w[1].line));
    Ok(TokenStream { tokens })
}

/// Remove comments (string/char literals protected), then drop blank lines.
/// Remaining lines keep their original 1-based numbering; trailing
/// whitespace left by comment removal is trimmed.
pub fn strip_comments_and_blanks(source: &str) -> Result<Vec<(usize, String)>, LexError> {
    let bytes = source.as_bytes();
    let mut out = String::with_capacity(source.len());
    let mut i = 0;
    let mut line: u32 = 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\n' => {
                out.push('\n');
                line += 1;
                i += 1;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let open_line = line;
                i += 2;
                loop {
                    if i + 1 < bytes.len() && bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    if i >= bytes.len() {
                        return Err(LexError::UnterminatedComment { line: open_line });
                    }
                    if bytes[i] == b'\n' {
                        out.push('\n');
                        line += 1;
                    }
                    i += 1;
                }
            }
            q @ (b'"' | b'\'') => {
                let open_line = line;
                let start = i;
                i += 1;
                loop {
                    if i >= bytes.len() || bytes[i] == b'\n' {
                        return Err(LexError::UnterminatedLiteral { line: open_line });
                    }
                    if bytes[i] == b'\\' {
                        i += 2;
                        continue;
                    }
                    if bytes[i] == q {
                        i += 1;
                        break;
                    }
                    i += 1;
                }
                out.push_str(&source[start..i]);
            }
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b'\n' | b'/' | b'"' | b'\'') {
                    i += 1;
                }
                if i == start {
                    // lone '/' that opens nothing
                    i += 1;
                    out.push('/');
                } else {
                    out.push_str(&source[start..i]);
                }
            }
        }
    }
    Ok(out
        .lines()
        .enumerate()
        .filter_map(|(idx, text)| {
            let trimmed = text.trim_end();
            if trimmed.trim().is_empty() {
                None
            } else {
                Some((idx + 1, trimmed.to_string()))
            }
        })
        .collect())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("function '{0}' not found in source")]
    FunctionNotFound(String),
    #[error("unbalanced braces in definition of '{0}'")]
    UnbalancedBraces(String),
    #[error(transparent)]
    Lex(#[from] LexError),
}

/// A function definition located in a token stream.
#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    /// Byte range of the definition, signature line start through `}`.
    pub start: usize,
    pub end: usize,
    pub line: u32,
    /// Token index range of the body (inclusive braces).
    pub body_tokens: std::ops::Range<usize>,
    /// Token index where the signature begins.
    pub signature_token: usize,
}

/// All top-level function definitions, in source order.
pub fn find_function_defs(source: &str, stream: &TokenStream) -> Vec<FunctionDef> {
    let toks = &stream.tokens;
    let mut defs = Vec::new();
    let mut depth = 0i32;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        match (&t.kind, t.text.as_str()) {
            (TokenKind::Punctuator, "{") => depth += 1,
            (TokenKind::Punctuator, "}") => depth -= 1,
            (TokenKind::Identifier, _)
                if depth == 0 && toks.get(i + 1).is_some_and(|n| n.text == "(") =>
            {
                // Find the matching ')'.
                let mut pdepth = 0i32;
                let mut j = i + 1;
                let mut close = None;
                while j < toks.len() {
                    match toks[j].text.as_str() {
                        "(" => pdepth += 1,
                        ")" => {
                            pdepth -= 1;
                            if pdepth == 0 {
                                close = Some(j);
                                break;
                            }
                        }
                        _ => {}
                    }
                    j += 1;
                }
                if let Some(close) = close {
                    if toks.get(close + 1).is_some_and(|n| n.text == "{") {
                        // Balanced body.
                        let mut bdepth = 0i32;
                        let mut k = close + 1;
                        let mut body_end = None;
                        while k < toks.len() {
                            match toks[k].text.as_str() {
                                "{" => bdepth += 1,
                                "}" => {
                                    bdepth -= 1;
                                    if bdepth == 0 {
                                        body_end = Some(k);
                                        break;
                                    }
                                }
                                _ => {}
                            }
                            k += 1;
                        }
                        if let Some(body_end) = body_end {
                            // Signature starts after the previous ';',
                            // '}', or preprocessor line.
                            let mut sig = i;
                            while sig > 0 {
                                let prev = &toks[sig - 1];
                                let boundary = prev.kind == TokenKind::PreprocessorLine
                                    || matches!(prev.text.as_str(), ";" | "}" | "{");
                                if boundary {
                                    break;
                                }
                                sig -= 1;
                            }
                            let sig_start = toks[sig].start;
                            let line_start =
                                source[..sig_start].rfind('\n').map(|p| p + 1).unwrap_or(0);
                            defs.push(FunctionDef {
                                name: t.text.clone(),
                                start: line_start,
                                end: toks[body_end].end,
                                line: toks[sig].line,
                                body_tokens: (close + 1)..(body_end + 1),
                                signature_token: sig,
                            });
                            i = body_end + 1;
                            continue;
                        }
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
    defs
}

/// Exact byte range of the named definition: signature line through its
/// balanced closing brace.
pub fn extract_function(source: &str, function_name: &str) -> Result<String, MetricError> {
    let stream = lex(source)?;
    // A located identifier with '(' but no balanced body is the unbalanced
    // case; distinguish it from plain absence for the error message.
    let defs = find_function_defs(source, &stream);
    if let Some(def) = defs.iter().find(|d| d.name == function_name) {
        return Ok(source[def.start..def.end].to_string());
    }
    let mentioned = stream
        .tokens
        .iter()
        .any(|t| t.kind == TokenKind::Identifier && t.text == function_name);
    let opens_body = source.matches('{').count() != source.matches('}').count();
    if mentioned && opens_body {
        Err(MetricError::UnbalancedBraces(function_name.to_string()))
    } else {
        Err(MetricError::FunctionNotFound(function_name.to_string()))
    }
}

/// Effective lines of the named function: stripped, non-blank lines from the
/// signature line through the closing-brace line, both inclusive.
pub fn count_loc(source: &str, function_name: &str) -> Result<usize, MetricError> {
    let body = extract_function(source, function_name)?;
    Ok(strip_comments_and_blanks(&body)?.len())
}
