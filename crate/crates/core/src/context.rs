//! Per-line declare/use context extraction.
//!
//! For every line the analyzer records which program symbols the line
//! declares and which it uses, then links the line to the nearest
//! declaration of each used symbol and to the nearest other line using any
//! of its symbols.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::program::{Token, TokenKind, TokenizedProgram};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTables {
    pub var_set: BTreeSet<String>,
    pub func_set: BTreeSet<String>,
    pub type_set: BTreeSet<String>,
}

impl SymbolTables {
    pub fn contains(&self, name: &str) -> bool {
        self.var_set.contains(name) || self.func_set.contains(name) || self.type_set.contains(name)
    }

    pub fn is_empty(&self) -> bool {
        self.var_set.is_empty() && self.func_set.is_empty() && self.type_set.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occurrence {
    Declare,
    Use,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineContext {
    pub line: usize,
    pub vars_declare: Vec<String>,
    pub vars_use: Vec<String>,
    pub context_lines: Vec<usize>,
    #[serde(skip)]
    pub context_tokens: Vec<Token>,
}

/// Token indices of names declared (as variables, parameters or functions)
/// on this line.
pub fn declared_positions(line: &[Token]) -> Vec<usize> {
    let mut declared = Vec::new();
    let mut stmt_is_decl = false;
    let mut at_stmt_start = true;
    let mut depth: i32 = 0;
    let mut in_initializer = false;

    for (i, tok) in line.iter().enumerate() {
        if at_stmt_start {
            stmt_is_decl = tok.is_type_specifier() || tok.is_keyword("typedef");
            depth = 0;
            in_initializer = false;
            at_stmt_start = false;
        }
        match (tok.kind, tok.text.as_str()) {
            (TokenKind::Punctuator, ";" | "{" | "}") => {
                at_stmt_start = true;
                continue;
            }
            (TokenKind::Punctuator, "(" | "[") => depth += 1,
            (TokenKind::Punctuator, ")" | "]") => depth -= 1,
            (TokenKind::Operator, "=") if depth == 0 => in_initializer = true,
            (TokenKind::Punctuator, ",") if depth == 0 => in_initializer = false,
            _ => {}
        }
        if tok.kind != TokenKind::Identifier {
            continue;
        }
        let prev = line[..i]
            .iter()
            .rev()
            .find(|t| !(t.is_op("*") || t.is_keyword("const")));
        let after_type = prev.is_some_and(|p| p.is_type_specifier());
        let after_decl_comma = stmt_is_decl
            && depth == 0
            && !in_initializer
            && prev.is_some_and(|p| p.is_punct(","));
        if after_type || after_decl_comma {
            declared.push(i);
        }
    }
    declared
}

/// TypeName tokens defined on this line: a tag followed by `{`, or the name
/// introduced by a `typedef`.
fn type_definition_positions(line: &[Token]) -> Vec<usize> {
    let is_typedef = line.iter().any(|t| t.is_keyword("typedef"));
    line.iter()
        .enumerate()
        .filter(|(i, t)| {
            if t.kind != TokenKind::TypeName {
                return false;
            }
            let next = line.get(i + 1);
            let tagged_body = *i > 0
                && matches!(line[i - 1].text.as_str(), "struct" | "union" | "enum")
                && line[i - 1].kind == TokenKind::Keyword
                && next.is_some_and(|n| n.is_punct("{"));
            let typedef_name =
                is_typedef && next.is_some_and(|n| n.is_punct(";") || n.is_punct(","));
            tagged_body || typedef_name
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn analyzer(program: &TokenizedProgram) -> SymbolTables {
    let mut tables = SymbolTables::default();
    for (_, line) in program.numbered_lines() {
        for i in declared_positions(line) {
            let name = &line[i].text;
            if line.get(i + 1).is_some_and(|t| t.is_punct("(")) {
                tables.func_set.insert(name.clone());
            } else {
                tables.var_set.insert(name.clone());
            }
        }
        for t in line.iter().filter(|t| t.kind == TokenKind::TypeName) {
            tables.type_set.insert(t.text.clone());
        }
    }
    let funcs = tables.func_set.clone();
    let types = tables.type_set.clone();
    tables
        .var_set
        .retain(|v| !funcs.contains(v) && !types.contains(v));
    tables.func_set.retain(|f| !types.contains(f));
    tables
}

/// Declare iff some occurrence of `name` on the line sits in a declarator
/// position, or it is a type name defined there.
pub fn classify_occurrence(line: &[Token], name: &str) -> Occurrence {
    let declared = declared_positions(line)
        .into_iter()
        .chain(type_definition_positions(line))
        .any(|i| line[i].text == name);
    if declared {
        Occurrence::Declare
    } else {
        Occurrence::Use
    }
}

/// Splits the symbols appearing on a line into declared and used, in order
/// of first appearance.
pub fn line_symbols(line: &[Token], tables: &SymbolTables) -> (Vec<String>, Vec<String>) {
    let mut seen = HashSet::new();
    let mut declare = Vec::new();
    let mut used = Vec::new();
    for t in line.iter().filter(|t| t.is_name()) {
        if !tables.contains(&t.text) || !seen.insert(t.text.as_str()) {
            continue;
        }
        match classify_occurrence(line, &t.text) {
            Occurrence::Declare => declare.push(t.text.clone()),
            Occurrence::Use => used.push(t.text.clone()),
        }
    }
    (declare, used)
}

/// Nearest line strictly before `line` declaring `name`.
fn nearest_declaration(per_line: &[(Vec<String>, Vec<String>)], line: usize, name: &str) -> Option<usize> {
    (1..line)
        .rev()
        .find(|&j| per_line[j - 1].0.iter().any(|d| d == name))
}

/// Nearest other line using `name`; equal distances resolve to the earlier line.
fn nearest_use(per_line: &[(Vec<String>, Vec<String>)], line: usize, name: &str) -> Option<usize> {
    let n = per_line.len();
    let uses = |j: usize| per_line[j - 1].1.iter().any(|u| u == name);
    for dist in 1..n {
        if dist < line && uses(line - dist) {
            return Some(line - dist);
        }
        if line + dist <= n && uses(line + dist) {
            return Some(line + dist);
        }
    }
    None
}

pub fn get_context(program: &TokenizedProgram, tables: &SymbolTables) -> Vec<LineContext> {
    get_context_with_budget(program, tables, usize::MAX)
}

/// Like [`get_context`], with `context_tokens` capped at `token_budget`.
pub fn get_context_with_budget(
    program: &TokenizedProgram,
    tables: &SymbolTables,
    token_budget: usize,
) -> Vec<LineContext> {
    let per_line: Vec<(Vec<String>, Vec<String>)> = program
        .lines
        .iter()
        .map(|l| line_symbols(l, tables))
        .collect();

    per_line
        .iter()
        .enumerate()
        .map(|(idx, (declare, used))| {
            let line = idx + 1;
            let mut ctx = BTreeSet::new();
            for name in used {
                if let Some(j) = nearest_declaration(&per_line, line, name) {
                    ctx.insert(j);
                }
            }
            for name in declare.iter().chain(used) {
                if let Some(j) = nearest_use(&per_line, line, name) {
                    ctx.insert(j);
                }
            }
            ctx.remove(&line);
            let context_lines: Vec<usize> = ctx.into_iter().collect();
            let context_tokens = materialize(program, line, &context_lines, token_budget);
            LineContext {
                line,
                vars_declare: declare.clone(),
                vars_use: used.clone(),
                context_lines,
                context_tokens,
            }
        })
        .collect()
}

/// Concatenates context lines in program order, dropping the farthest lines
/// (later line first on ties) until the budget fits.
pub fn materialize(
    program: &TokenizedProgram,
    line: usize,
    context_lines: &[usize],
    token_budget: usize,
) -> Vec<Token> {
    let mut kept: Vec<usize> = context_lines.to_vec();
    let total = |kept: &[usize]| kept.iter().map(|&j| program.line(j).len()).sum::<usize>();
    while total(&kept) > token_budget && kept.len() > 1 {
        let (pos, _) = kept
            .iter()
            .enumerate()
            .max_by_key(|(_, &j)| (j.abs_diff(line), j))
            .expect("non-empty");
        kept.remove(pos);
    }
    let mut tokens: Vec<Token> = kept
        .iter()
        .flat_map(|&j| program.line(j).iter().cloned())
        .collect();
    tokens.truncate(token_budget);
    tokens
}
