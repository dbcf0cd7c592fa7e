//! Line-structured tokenization of student-style C.
//!
//! Every physical source line maps to exactly one token list. Comments are
//! dropped, preprocessor lines collapse into a single opaque token, and
//! identifiers naming typedefs or struct/union/enum tags are reclassified as
//! [`TokenKind::TypeName`] in a second pass.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_LINES: usize = 400;
pub const MAX_TOKENS_PER_LINE: usize = 120;

/// The C89/C99 keyword table.
pub const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "_Complex", "_Imaginary",
];

/// Keywords that name (or modify) a type.
pub const TYPE_KEYWORDS: &[&str] = &[
    "char", "double", "float", "int", "long", "short", "signed", "unsigned", "void", "_Bool",
    "_Complex", "const", "volatile", "static", "extern", "register", "auto", "restrict",
];

/// The structural punctuator alphabet.
pub const PUNCTUATORS: &[&str] = &[",", ".", ";", "(", ")", "{", "}", "[", "]"];

const OPERATORS: &[&str] = &[
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "^=", "|=", "+", "-", "*", "/", "%", "=", "<", ">", "!", "~",
    "&", "|", "^", "?", ":",
];

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text)
}

pub fn is_type_keyword(text: &str) -> bool {
    TYPE_KEYWORDS.contains(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Identifier,
    TypeName,
    Operator,
    Punctuator,
    IntLiteral,
    FloatLiteral,
    StringLiteral,
    CharLiteral,
    PreprocessorChunk,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        Self {
            text: text.into(),
            kind,
        }
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punctuator, text)
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.is(TokenKind::Operator, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    /// Identifier-like: plain identifiers and resolved type names.
    pub fn is_name(&self) -> bool {
        matches!(self.kind, TokenKind::Identifier | TokenKind::TypeName)
    }

    /// Starts (or continues) a type specifier.
    pub fn is_type_specifier(&self) -> bool {
        self.kind == TokenKind::TypeName
            || (self.kind == TokenKind::Keyword
                && (is_type_keyword(&self.text)
                    || matches!(self.text.as_str(), "struct" | "union" | "enum")))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// A program as 1-based lines of classified tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedProgram {
    pub source_id: String,
    pub lines: Vec<Vec<Token>>,
}

impl TokenizedProgram {
    pub fn new(source_id: impl Into<String>, lines: Vec<Vec<Token>>) -> Self {
        Self {
            source_id: source_id.into(),
            lines,
        }
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// Tokens of 1-based line `index`.
    pub fn line(&self, index: usize) -> &[Token] {
        &self.lines[index - 1]
    }

    pub fn line_mut(&mut self, index: usize) -> &mut Vec<Token> {
        &mut self.lines[index - 1]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.lines.iter().flatten()
    }

    /// `(1-based line, tokens)` pairs.
    pub fn numbered_lines(&self) -> impl Iterator<Item = (usize, &[Token])> {
        self.lines
            .iter()
            .enumerate()
            .map(|(i, l)| (i + 1, l.as_slice()))
    }

    pub fn to_source(&self) -> String {
        detokenize(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("lex error at {line}:{col}: {reason}")]
    Lex {
        line: usize,
        col: usize,
        reason: String,
    },
    #[error("program too large: {0}")]
    ProgramTooLarge(String),
}

#[derive(Clone, Copy, Debug)]
pub struct TokenizeLimits {
    pub max_lines: usize,
    pub max_tokens_per_line: usize,
}

impl Default for TokenizeLimits {
    fn default() -> Self {
        Self {
            max_lines: MAX_LINES,
            max_tokens_per_line: MAX_TOKENS_PER_LINE,
        }
    }
}

pub fn tokenize(source_id: &str, source: &str) -> Result<TokenizedProgram, TokenizeError> {
    tokenize_with(source_id, source, TokenizeLimits::default())
}

pub fn tokenize_with(
    source_id: &str,
    source: &str,
    limits: TokenizeLimits,
) -> Result<TokenizedProgram, TokenizeError> {
    let physical: Vec<&str> = source.lines().collect();
    if physical.len() > limits.max_lines {
        return Err(TokenizeError::ProgramTooLarge(format!(
            "{} lines exceeds limit of {}",
            physical.len(),
            limits.max_lines
        )));
    }
    let mut lexer = Lexer {
        lines: Vec::with_capacity(physical.len()),
        in_block_comment: None,
    };
    for (i, text) in physical.iter().enumerate() {
        let tokens = lexer.lex_line(i + 1, text)?;
        if tokens.len() > limits.max_tokens_per_line {
            return Err(TokenizeError::ProgramTooLarge(format!(
                "line {} has {} tokens, limit is {}",
                i + 1,
                tokens.len(),
                limits.max_tokens_per_line
            )));
        }
        lexer.lines.push(tokens);
    }
    if let Some((line, col)) = lexer.in_block_comment {
        return Err(TokenizeError::Lex {
            line,
            col,
            reason: "unterminated comment".into(),
        });
    }
    let mut lines = lexer.lines;
    resolve_type_names(&mut lines);
    Ok(TokenizedProgram::new(source_id, lines))
}

/// One physical line per token list, tokens separated by single spaces.
pub fn detokenize(program: &TokenizedProgram) -> String {
    let mut out = String::new();
    for line in &program.lines {
        out.push_str(&line_text(line));
        out.push('\n');
    }
    out
}

pub fn line_text(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&t.text);
    }
    s
}

struct Lexer {
    lines: Vec<Vec<Token>>,
    /// Start position of an open `/* ... */`.
    in_block_comment: Option<(usize, usize)>,
}

impl Lexer {
    fn lex_line(&mut self, line_no: usize, text: &str) -> Result<Vec<Token>, TokenizeError> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        let err = |col: usize, reason: &str| TokenizeError::Lex {
            line: line_no,
            col: col + 1,
            reason: reason.to_string(),
        };

        if self.in_block_comment.is_some() {
            match find_comment_end(&chars, 0) {
                Some(end) => {
                    self.in_block_comment = None;
                    i = end;
                }
                None => return Ok(tokens),
            }
        }

        // preprocessor lines are opaque
        if self.in_block_comment.is_none() && i == 0 {
            let first = chars.iter().position(|c| !c.is_whitespace());
            if let Some(p) = first {
                if chars[p] == '#' {
                    let body: String = chars[p..].iter().collect();
                    let body = strip_line_comment(&body);
                    let collapsed = body.split_whitespace().collect::<Vec<_>>().join(" ");
                    tokens.push(Token::new(collapsed, TokenKind::PreprocessorChunk));
                    return Ok(tokens);
                }
            }
        }

        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '/' && chars.get(i + 1) == Some(&'/') {
                break;
            }
            if c == '/' && chars.get(i + 1) == Some(&'*') {
                match find_comment_end(&chars, i + 2) {
                    Some(end) => {
                        i = end;
                        continue;
                    }
                    None => {
                        self.in_block_comment = Some((line_no, i + 1));
                        break;
                    }
                }
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let kind = if is_keyword(&word) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                };
                tokens.push(Token::new(word, kind));
                continue;
            }
            if c.is_ascii_digit()
                || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
            {
                let start = i;
                let hex = c == '0' && matches!(chars.get(i + 1), Some('x' | 'X'));
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exponent = if hex {
                        matches!(d, 'p' | 'P')
                    } else {
                        matches!(d, 'e' | 'E')
                    };
                    if exponent && matches!(chars.get(i + 1), Some('+' | '-')) {
                        i += 2;
                    } else if d.is_ascii_alphanumeric() || d == '_' || d == '.' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let is_float = lit.contains('.')
                    || (!hex && lit.contains(['e', 'E']))
                    || (hex && lit.contains(['p', 'P']));
                let kind = if is_float {
                    TokenKind::FloatLiteral
                } else {
                    TokenKind::IntLiteral
                };
                tokens.push(Token::new(lit, kind));
                continue;
            }
            if c == '"' || c == '\'' {
                let start = i;
                i += 1;
                let mut closed = false;
                while i < chars.len() {
                    match chars[i] {
                        '\\' => i += 2,
                        q if q == c => {
                            i += 1;
                            closed = true;
                            break;
                        }
                        _ => i += 1,
                    }
                }
                if !closed {
                    let what = if c == '"' {
                        "unterminated string"
                    } else {
                        "unterminated char literal"
                    };
                    return Err(err(start, what));
                }
                let lit: String = chars[start..i].iter().collect();
                let kind = if c == '"' {
                    TokenKind::StringLiteral
                } else {
                    TokenKind::CharLiteral
                };
                tokens.push(Token::new(lit, kind));
                continue;
            }
            if let Some(p) = PUNCTUATORS.iter().find(|p| p.starts_with(c)) {
                // "..." is an operator and must win over "."
                if !(c == '.' && chars.get(i + 1) == Some(&'.') && chars.get(i + 2) == Some(&'.'))
                {
                    tokens.push(Token::new(*p, TokenKind::Punctuator));
                    i += 1;
                    continue;
                }
            }
            if let Some(op) = OPERATORS.iter().find(|op| {
                let n = op.len();
                i + n <= chars.len() && chars[i..i + n].iter().copied().eq(op.chars())
            }) {
                tokens.push(Token::new(*op, TokenKind::Operator));
                i += op.len();
                continue;
            }
            return Err(err(i, &format!("illegal character {c:?}")));
        }
        Ok(tokens)
    }
}

fn find_comment_end(chars: &[char], from: usize) -> Option<usize> {
    let mut i = from;
    while i + 1 < chars.len() {
        if chars[i] == '*' && chars[i + 1] == '/' {
            return Some(i + 2);
        }
        i += 1;
    }
    None
}

fn strip_line_comment(body: &str) -> &str {
    // "//" inside <...> or "..." of an #include is not a comment; those are rare
    // enough in the supported subset that a quote-aware scan suffices
    let bytes = body.as_bytes();
    let mut in_str = false;
    for i in 0..bytes.len() {
        match bytes[i] {
            b'"' => in_str = !in_str,
            b'/' if !in_str && (bytes.get(i + 1) == Some(&b'/') || bytes.get(i + 1) == Some(&b'*')) => {
                return &body[..i];
            }
            _ => {}
        }
    }
    body
}

/// Names introduced by `typedef` or as struct/union/enum tags.
pub fn collect_type_names(lines: &[Vec<Token>]) -> HashSet<String> {
    let flat: Vec<&Token> = lines.iter().flatten().collect();
    let mut names = HashSet::new();
    for (i, t) in flat.iter().enumerate() {
        if t.kind == TokenKind::Keyword && matches!(t.text.as_str(), "struct" | "union" | "enum") {
            if let Some(next) = flat.get(i + 1) {
                if next.is_name() {
                    names.insert(next.text.clone());
                }
            }
        }
        if t.is_keyword("typedef") {
            let mut depth = 0i32;
            for (j, u) in flat.iter().enumerate().skip(i + 1) {
                match u.text.as_str() {
                    "{" | "(" if u.kind == TokenKind::Punctuator => depth += 1,
                    "}" | ")" if u.kind == TokenKind::Punctuator => depth -= 1,
                    _ => {}
                }
                if depth == 0 && u.is_name() {
                    let follow = flat.get(j + 1);
                    if follow.is_some_and(|f| f.is_punct(";") || f.is_punct(",") || f.is_punct("[")) {
                        names.insert(u.text.clone());
                    }
                }
                if depth <= 0 && u.is_punct(";") {
                    break;
                }
            }
        }
    }
    names
}

fn resolve_type_names(lines: &mut [Vec<Token>]) {
    let names = collect_type_names(lines);
    if names.is_empty() {
        return;
    }
    for t in lines.iter_mut().flatten() {
        if t.kind == TokenKind::Identifier && names.contains(&t.text) {
            t.kind = TokenKind::TypeName;
        }
    }
}

/// Re-derives TypeName classification after token edits.
pub fn reclassify(program: &mut TokenizedProgram) {
    for t in program.lines.iter_mut().flatten() {
        if t.kind == TokenKind::TypeName {
            t.kind = TokenKind::Identifier;
        }
    }
    resolve_type_names(&mut program.lines);
}
