//! Rule-based injection of labeled compilation errors.
//!
//! Five error categories, each restricted to a subset of the three token
//! edits (add, delete, replace). Replacement tokens are always copied from
//! elsewhere in the program being corrupted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{analyzer, declared_positions};
use crate::diagnostics::{Compiler, DiagnosticsError};
use crate::par::{self, Parallelism};
use crate::program::{detokenize, Token, TokenKind, TokenizedProgram, PUNCTUATORS};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    #[serde(rename = "struct")]
    Struct,
    #[serde(rename = "stmt")]
    Stmt,
    #[serde(rename = "decl")]
    Decl,
    #[serde(rename = "tm")]
    TypeMismatch,
    #[serde(rename = "im")]
    IdentifierMisuse,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Struct,
        ErrorCategory::Stmt,
        ErrorCategory::Decl,
        ErrorCategory::TypeMismatch,
        ErrorCategory::IdentifierMisuse,
    ];

    pub fn allowed_ops(self) -> &'static [MutationOp] {
        use MutationOp::*;
        match self {
            ErrorCategory::Struct | ErrorCategory::Stmt => &[Add, Del, Rep],
            ErrorCategory::Decl => &[Add],
            ErrorCategory::TypeMismatch => &[Add, Del],
            ErrorCategory::IdentifierMisuse => &[Add, Rep],
        }
    }

    pub fn allows(self, op: MutationOp) -> bool {
        self.allowed_ops().contains(&op)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCategory::Struct => "struct",
            ErrorCategory::Stmt => "stmt",
            ErrorCategory::Decl => "decl",
            ErrorCategory::TypeMismatch => "tm",
            ErrorCategory::IdentifierMisuse => "im",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOp {
    #[serde(rename = "ADD")]
    Add,
    #[serde(rename = "DEL")]
    Del,
    #[serde(rename = "REP")]
    Rep,
}

impl MutationOp {
    pub const ALL: [MutationOp; 3] = [MutationOp::Add, MutationOp::Del, MutationOp::Rep];
}

impl fmt::Display for MutationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MutationOp::Add => "ADD",
            MutationOp::Del => "DEL",
            MutationOp::Rep => "REP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub line: usize,
    pub category: ErrorCategory,
    pub op: MutationOp,
    pub operand_kind: TokenKind,
    pub original_line: Vec<Token>,
    pub mutated_line: Vec<Token>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokenProgram {
    pub parent_id: String,
    pub variant_id: usize,
    pub seed: u64,
    pub program: TokenizedProgram,
    pub corruptions: Vec<CorruptionRecord>,
}

impl BrokenProgram {
    /// Puts every original line back.
    pub fn restore(&self) -> TokenizedProgram {
        let mut p = self.program.clone();
        for r in &self.corruptions {
            *p.line_mut(r.line) = r.original_line.clone();
        }
        p.source_id = self.parent_id.clone();
        p
    }
}

#[derive(Debug, Error)]
pub enum CorruptError {
    #[error("operation {op} is not allowed for category {category}")]
    DisallowedOp {
        category: ErrorCategory,
        op: MutationOp,
    },
    #[error("no eligible site for {category}/{op}")]
    NoEligibleSite {
        category: ErrorCategory,
        op: MutationOp,
    },
    #[error("source {0} does not compile")]
    SourceDoesNotCompile(String),
    #[error("retry budget exhausted for every variant of {0}")]
    ExhaustedRetries(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Compiler(#[from] DiagnosticsError),
}

enum Edit {
    Insert(usize, Token),
    Delete(usize),
    Replace(usize, Token),
}

/// A site on one line plus the tokens that may be placed there.
struct Site {
    line: usize,
    pos: usize,
    options: Vec<Token>,
}

/// Distinct tokens of the program, per kind, in deterministic order.
struct TokenPool {
    by_kind: BTreeMap<TokenKind, Vec<Token>>,
    variables: Vec<Token>,
    type_tokens: Vec<Token>,
}

impl TokenPool {
    fn new(program: &TokenizedProgram) -> Self {
        let mut by_kind: BTreeMap<TokenKind, BTreeSet<String>> = BTreeMap::new();
        for t in program.tokens() {
            if t.kind != TokenKind::PreprocessorChunk {
                by_kind.entry(t.kind).or_default().insert(t.text.clone());
            }
        }
        let tables = analyzer(program);
        let variables = tables
            .var_set
            .iter()
            .filter(|v| program.tokens().any(|t| t.kind == TokenKind::Identifier && &t.text == *v))
            .map(|v| Token::new(v.clone(), TokenKind::Identifier))
            .collect();
        let type_tokens = program
            .tokens()
            .filter(|t| {
                t.kind == TokenKind::TypeName
                    || (t.kind == TokenKind::Keyword
                        && matches!(
                            t.text.as_str(),
                            "int" | "char" | "float" | "double" | "long" | "short" | "void" | "unsigned" | "signed"
                        ))
            })
            .map(|t| t.text.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|text| {
                let kind = if crate::program::is_keyword(&text) {
                    TokenKind::Keyword
                } else {
                    TokenKind::TypeName
                };
                Token::new(text, kind)
            })
            .collect();
        Self {
            by_kind: by_kind
                .into_iter()
                .map(|(k, set)| (k, set.into_iter().map(|t| Token::new(t, k)).collect()))
                .collect(),
            variables,
            type_tokens,
        }
    }

    fn of_kind(&self, kind: TokenKind) -> &[Token] {
        self.by_kind.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Same-kind tokens from the program with different text.
    fn alternatives(&self, current: &Token) -> Vec<Token> {
        self.of_kind(current.kind)
            .iter()
            .filter(|t| t.text != current.text)
            .cloned()
            .collect()
    }
}

fn stmt_operand(t: &Token) -> bool {
    matches!(
        t.kind,
        TokenKind::Keyword
            | TokenKind::Operator
            | TokenKind::TypeName
            | TokenKind::Identifier
            | TokenKind::IntLiteral
            | TokenKind::FloatLiteral
    )
}

fn eligible_lines<'a>(
    program: &'a TokenizedProgram,
    excluded: &'a BTreeSet<usize>,
) -> impl Iterator<Item = (usize, &'a [Token])> + 'a {
    program.numbered_lines().filter(move |(i, l)| {
        !excluded.contains(i)
            && !l.is_empty()
            && l.iter().all(|t| t.kind != TokenKind::PreprocessorChunk)
    })
}

/// `(open, close)` token index pairs of call argument lists on a line.
fn call_argument_spans(line: &[Token]) -> Vec<(usize, usize)> {
    let declared: BTreeSet<usize> = declared_positions(line).into_iter().collect();
    let mut spans = Vec::new();
    for i in 0..line.len().saturating_sub(1) {
        if line[i].kind != TokenKind::Identifier || !line[i + 1].is_punct("(") || declared.contains(&i) {
            continue;
        }
        let mut depth = 0;
        for (j, t) in line.iter().enumerate().skip(i + 1) {
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth -= 1;
                if depth == 0 {
                    spans.push((i + 1, j));
                    break;
                }
            }
        }
    }
    spans
}

fn sites_for(
    program: &TokenizedProgram,
    category: ErrorCategory,
    op: MutationOp,
    excluded: &BTreeSet<usize>,
) -> Vec<Site> {
    let pool = TokenPool::new(program);
    let var_names: BTreeSet<&str> = pool.variables.iter().map(|t| t.text.as_str()).collect();
    let mut sites = Vec::new();
    let punct_alphabet: Vec<Token> = PUNCTUATORS
        .iter()
        .map(|p| Token::new(*p, TokenKind::Punctuator))
        .collect();
    let stmt_tokens: Vec<Token> = pool
        .by_kind
        .iter()
        .filter(|(k, _)| {
            matches!(
                k,
                TokenKind::Keyword | TokenKind::Operator | TokenKind::TypeName | TokenKind::Identifier
            )
        })
        .flat_map(|(_, v)| v.iter().cloned())
        .collect();

    for (ln, line) in eligible_lines(program, excluded) {
        match (category, op) {
            (ErrorCategory::Struct, MutationOp::Del) => {
                for (p, t) in line.iter().enumerate() {
                    if t.kind == TokenKind::Punctuator {
                        sites.push(Site { line: ln, pos: p, options: vec![] });
                    }
                }
            }
            (ErrorCategory::Struct, MutationOp::Add) => {
                let mut positions = BTreeSet::new();
                for (p, t) in line.iter().enumerate() {
                    if t.kind == TokenKind::Punctuator {
                        positions.insert(p);
                        positions.insert(p + 1);
                    }
                }
                for p in positions {
                    sites.push(Site { line: ln, pos: p, options: punct_alphabet.clone() });
                }
            }
            (ErrorCategory::Struct, MutationOp::Rep) => {
                for (p, t) in line.iter().enumerate() {
                    if t.kind == TokenKind::Punctuator {
                        let mut options = pool.alternatives(t);
                        if options.is_empty() {
                            options = punct_alphabet.iter().filter(|a| a.text != t.text).cloned().collect();
                        }
                        sites.push(Site { line: ln, pos: p, options });
                    }
                }
            }
            (ErrorCategory::Stmt, MutationOp::Del) => {
                for (p, t) in line.iter().enumerate() {
                    if stmt_operand(t) {
                        sites.push(Site { line: ln, pos: p, options: vec![] });
                    }
                }
            }
            (ErrorCategory::Stmt, MutationOp::Add) => {
                if line.iter().any(stmt_operand) && !stmt_tokens.is_empty() {
                    for p in 0..=line.len() {
                        sites.push(Site { line: ln, pos: p, options: stmt_tokens.clone() });
                    }
                }
            }
            (ErrorCategory::Stmt, MutationOp::Rep) => {
                for (p, t) in line.iter().enumerate() {
                    if stmt_operand(t) {
                        let options = pool.alternatives(t);
                        if !options.is_empty() {
                            sites.push(Site { line: ln, pos: p, options });
                        }
                    }
                }
            }
            (ErrorCategory::Decl, MutationOp::Add) => {
                // template 1: an extra type before a type specifier of a declaration
                let declared = declared_positions(line);
                if !declared.is_empty() && !pool.type_tokens.is_empty() {
                    for (p, t) in line.iter().enumerate() {
                        if t.is_type_specifier() && p < declared[0] {
                            sites.push(Site { line: ln, pos: p, options: pool.type_tokens.clone() });
                        }
                    }
                }
                // template 2: an extra variable name after a variable occurrence
                for (p, t) in line.iter().enumerate() {
                    if t.kind == TokenKind::Identifier && var_names.contains(t.text.as_str()) {
                        sites.push(Site { line: ln, pos: p + 1, options: pool.variables.clone() });
                    }
                }
            }
            (ErrorCategory::TypeMismatch, MutationOp::Del) => {
                for (open, close) in call_argument_spans(line) {
                    for p in open + 1..close {
                        let t = &line[p];
                        if t.kind == TokenKind::Identifier || t.kind == TokenKind::TypeName || t.is_type_specifier() {
                            sites.push(Site { line: ln, pos: p, options: vec![] });
                        }
                    }
                }
            }
            (ErrorCategory::TypeMismatch, MutationOp::Add) => {
                let options: Vec<Token> = pool.variables.iter().chain(&pool.type_tokens).cloned().collect();
                if !options.is_empty() {
                    for (open, close) in call_argument_spans(line) {
                        for p in open + 1..=close {
                            sites.push(Site { line: ln, pos: p, options: options.clone() });
                        }
                    }
                }
            }
            (ErrorCategory::IdentifierMisuse, MutationOp::Add) => {
                let declared = declared_positions(line);
                let operators = pool.of_kind(TokenKind::Operator);
                if !declared.is_empty() && !operators.is_empty() {
                    for (p, t) in line.iter().enumerate() {
                        if t.kind == TokenKind::Identifier && var_names.contains(t.text.as_str()) {
                            sites.push(Site { line: ln, pos: p, options: operators.to_vec() });
                            sites.push(Site { line: ln, pos: p + 1, options: operators.to_vec() });
                        }
                    }
                }
            }
            (ErrorCategory::IdentifierMisuse, MutationOp::Rep) => {
                if declared_positions(line).is_empty() {
                    continue;
                }
                for (p, t) in line.iter().enumerate() {
                    let options: Vec<Token> = if t.kind == TokenKind::Identifier && var_names.contains(t.text.as_str()) {
                        pool.variables.iter().filter(|v| v.text != t.text).cloned().collect()
                    } else if t.kind == TokenKind::Operator {
                        pool.alternatives(t)
                    } else {
                        continue;
                    };
                    if !options.is_empty() {
                        sites.push(Site { line: ln, pos: p, options });
                    }
                }
            }
            _ => unreachable!("disallowed pairs are rejected earlier"),
        }
    }
    sites
}

fn apply(program: &TokenizedProgram, line: usize, edit: Edit) -> (TokenizedProgram, Vec<Token>, TokenKind) {
    let mut out = program.clone();
    let tokens = out.line_mut(line);
    let kind = match edit {
        Edit::Insert(p, t) => {
            let k = t.kind;
            tokens.insert(p, t);
            k
        }
        Edit::Delete(p) => tokens.remove(p).kind,
        Edit::Replace(p, t) => {
            let k = tokens[p].kind;
            tokens[p] = t;
            k
        }
    };
    let mutated = tokens.clone();
    (out, mutated, kind)
}

pub fn corrupt_once<R: Rng + ?Sized>(
    program: &TokenizedProgram,
    category: ErrorCategory,
    op: MutationOp,
    rng: &mut R,
) -> Result<(TokenizedProgram, CorruptionRecord), CorruptError> {
    corrupt_once_excluding(program, category, op, rng, &BTreeSet::new())
}

/// As [`corrupt_once`], never touching the lines in `excluded`.
pub fn corrupt_once_excluding<R: Rng + ?Sized>(
    program: &TokenizedProgram,
    category: ErrorCategory,
    op: MutationOp,
    rng: &mut R,
    excluded: &BTreeSet<usize>,
) -> Result<(TokenizedProgram, CorruptionRecord), CorruptError> {
    if !category.allows(op) {
        return Err(CorruptError::DisallowedOp { category, op });
    }
    let sites = sites_for(program, category, op, excluded);
    let site = sites
        .choose(rng)
        .ok_or(CorruptError::NoEligibleSite { category, op })?;
    let edit = match op {
        MutationOp::Del => Edit::Delete(site.pos),
        MutationOp::Add => Edit::Insert(site.pos, site.options.choose(rng).expect("non-empty options").clone()),
        MutationOp::Rep => Edit::Replace(site.pos, site.options.choose(rng).expect("non-empty options").clone()),
    };
    let original_line = program.line(site.line).to_vec();
    let (out, mutated_line, operand_kind) = apply(program, site.line, edit);
    debug_assert_ne!(original_line, mutated_line);
    Ok((
        out,
        CorruptionRecord {
            line: site.line,
            category,
            op,
            operand_kind,
            original_line,
            mutated_line,
        },
    ))
}

/// Relative category weights, normalized on use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryMix {
    pub weights: [f64; 5],
}

impl Default for CategoryMix {
    /// Average frequency of each category across the three studied datasets.
    fn default() -> Self {
        Self {
            weights: [21.28, 51.52, 21.43, 2.17, 3.60],
        }
    }
}

impl CategoryMix {
    pub fn probabilities(&self) -> [f64; 5] {
        let total: f64 = self.weights.iter().sum();
        self.weights.map(|w| w / total)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ErrorCategory {
        let probs = self.probabilities();
        let mut u: f64 = rng.random();
        for (i, p) in probs.iter().enumerate() {
            if u < *p {
                return ErrorCategory::ALL[i];
            }
            u -= p;
        }
        // rounding leftovers go to the last non-zero weight
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(4);
        ErrorCategory::ALL[last]
    }

    fn validate(&self) -> Result<(), CorruptError> {
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(CorruptError::InvalidConfig(format!("bad category mix {:?}", self.weights)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub variants_per_program: usize,
    pub max_errors: usize,
    pub category_mix: CategoryMix,
    /// Attempts per variant before it is dropped.
    pub retry_budget: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            variants_per_program: 50,
            max_errors: 5,
            category_mix: CategoryMix::default(),
            retry_budget: 20,
            seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub parents: usize,
    pub requested_variants: usize,
    pub emitted_variants: usize,
    /// Candidates rejected because they still compiled.
    pub still_compiling: usize,
    /// Variants dropped after exhausting their retry budget.
    pub exhausted_variants: usize,
    pub category_redraws: usize,
    /// emitted / requested
    pub retention_rate: f64,
}

/// Decides whether a source compiles; the compile-failure filter.
pub trait CompileOracle: Sync {
    fn compiles(&self, source: &str) -> Result<bool, DiagnosticsError>;
}

impl CompileOracle for Compiler {
    fn compiles(&self, source: &str) -> Result<bool, DiagnosticsError> {
        Ok(self.compile(source)?.success)
    }
}

struct ParentOutcome {
    variants: Vec<BrokenProgram>,
    report: SynthesisReport,
}

pub fn synthesize_corpus(
    corpus: &[TokenizedProgram],
    config: &SynthesisConfig,
    oracle: &dyn CompileOracle,
) -> Result<(Vec<BrokenProgram>, SynthesisReport), CorruptError> {
    if config.max_errors == 0 || config.max_errors > 5 {
        return Err(CorruptError::InvalidConfig(format!(
            "max_errors must be in 1..=5, got {}",
            config.max_errors
        )));
    }
    config.category_mix.validate()?;
    let outcomes = par::map_indexed(config.parallelism, corpus, |_, parent| synthesize_parent(parent, config, oracle));
    let mut all = Vec::new();
    let mut report = SynthesisReport::default();
    for outcome in outcomes {
        let outcome = outcome?;
        report.parents += 1;
        report.requested_variants += outcome.report.requested_variants;
        report.emitted_variants += outcome.report.emitted_variants;
        report.still_compiling += outcome.report.still_compiling;
        report.exhausted_variants += outcome.report.exhausted_variants;
        report.category_redraws += outcome.report.category_redraws;
        all.extend(outcome.variants);
    }
    report.retention_rate = if report.requested_variants == 0 {
        1.0
    } else {
        report.emitted_variants as f64 / report.requested_variants as f64
    };
    Ok((all, report))
}

fn synthesize_parent(
    parent: &TokenizedProgram,
    config: &SynthesisConfig,
    oracle: &dyn CompileOracle,
) -> Result<ParentOutcome, CorruptError> {
    let mut report = SynthesisReport {
        requested_variants: config.variants_per_program,
        ..Default::default()
    };
    let mut variants = Vec::new();
    if config.variants_per_program == 0 {
        return Ok(ParentOutcome { variants, report });
    }
    if !oracle.compiles(&detokenize(parent))? {
        return Err(CorruptError::SourceDoesNotCompile(parent.source_id.clone()));
    }
    let usable_lines = eligible_lines(parent, &BTreeSet::new()).count();
    for v in 0..config.variants_per_program {
        let variant_seed = seed::indexed_seed(seed::sub_seed(config.seed, &parent.source_id), v as u64);
        let mut rng = seed::variant_rng(config.seed, &parent.source_id, v);
        let count = rng.random_range(1..=config.max_errors).min(usable_lines.max(1));
        let mut plan: Vec<ErrorCategory> = (0..count).map(|_| config.category_mix.sample(&mut rng)).collect();

        let mut emitted = false;
        for _attempt in 0..config.retry_budget {
            let Some((program, records)) = apply_plan(parent, &mut plan, config, &mut rng, &mut report) else {
                continue;
            };
            if oracle.compiles(&detokenize(&program))? {
                report.still_compiling += 1;
                continue;
            }
            let mut program = program;
            program.source_id = format!("{}#v{}", parent.source_id, v);
            variants.push(BrokenProgram {
                parent_id: parent.source_id.clone(),
                variant_id: v,
                seed: variant_seed,
                program,
                corruptions: records,
            });
            emitted = true;
            break;
        }
        if !emitted {
            report.exhausted_variants += 1;
        }
    }
    if variants.is_empty() {
        return Err(CorruptError::ExhaustedRetries(parent.source_id.clone()));
    }
    report.emitted_variants = variants.len();
    Ok(ParentOutcome { variants, report })
}

/// Applies one corruption per planned category on distinct lines. A
/// category with no eligible site at all is redrawn from the mix.
fn apply_plan<R: Rng + ?Sized>(
    parent: &TokenizedProgram,
    plan: &mut [ErrorCategory],
    config: &SynthesisConfig,
    rng: &mut R,
    report: &mut SynthesisReport,
) -> Option<(TokenizedProgram, Vec<CorruptionRecord>)> {
    let mut program = parent.clone();
    let mut used = BTreeSet::new();
    let mut records = Vec::with_capacity(plan.len());
    for slot in plan.iter_mut() {
        let mut done = false;
        for _redraw in 0..16 {
            let mut ops = slot.allowed_ops().to_vec();
            ops.shuffle(rng);
            for op in ops {
                if let Ok((next, rec)) = corrupt_once_excluding(&program, *slot, op, rng, &used) {
                    used.insert(rec.line);
                    records.push(rec);
                    program = next;
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
            report.category_redraws += 1;
            *slot = config.category_mix.sample(rng);
        }
        if !done {
            return None;
        }
    }
    records.sort_by_key(|r| r.line);
    Some((program, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{line_text, tokenize};
    use crate::seed::Rng as SeededRng;
    use rand::SeedableRng;

    fn prog(src: &str) -> TokenizedProgram {
        tokenize("p", src).unwrap()
    }

    const SRC: &str = "#include <stdio.h>
int add ( int x , int y ) {
return x + y ;
}
int main ( ) {
int a = 1 , b ;
b = add ( a , 2 ) ;
a = a + 1 ;
printf ( \"%d\" , b ) ;
return 0 ;
}";

    #[test]
    fn decl_del_is_disallowed() {
        let mut rng = SeededRng::seed_from_u64(1);
        let err = corrupt_once(&prog(SRC), ErrorCategory::Decl, MutationOp::Del, &mut rng).unwrap_err();
        assert!(matches!(err, CorruptError::DisallowedOp { .. }));
    }

    #[test]
    fn allowed_matrix_shape() {
        let allowed: usize = ErrorCategory::ALL.iter().map(|c| c.allowed_ops().len()).sum();
        assert_eq!(allowed, 11);
        assert!(!ErrorCategory::IdentifierMisuse.allows(MutationOp::Del));
        assert!(!ErrorCategory::TypeMismatch.allows(MutationOp::Rep));
    }

    #[test]
    fn same_seed_same_result() {
        let p = prog(SRC);
        for cat in ErrorCategory::ALL {
            for &op in cat.allowed_ops() {
                let a = corrupt_once(&p, cat, op, &mut SeededRng::seed_from_u64(9)).unwrap();
                let b = corrupt_once(&p, cat, op, &mut SeededRng::seed_from_u64(9)).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn records_satisfy_length_contract() {
        let p = prog(SRC);
        let mut rng = SeededRng::seed_from_u64(3);
        for _ in 0..50 {
            for cat in ErrorCategory::ALL {
                for &op in cat.allowed_ops() {
                    let (out, rec) = corrupt_once(&p, cat, op, &mut rng).unwrap();
                    let (o, m) = (rec.original_line.len() as i64, rec.mutated_line.len() as i64);
                    match op {
                        MutationOp::Add => assert_eq!(m, o + 1),
                        MutationOp::Del => assert_eq!(m, o - 1),
                        MutationOp::Rep => assert_eq!(m, o),
                    }
                    assert_ne!(rec.original_line, rec.mutated_line);
                    let changed: Vec<usize> = (1..=p.line_count()).filter(|&i| p.line(i) != out.line(i)).collect();
                    assert_eq!(changed, vec![rec.line]);
                    assert_eq!(p.line(rec.line), rec.original_line.as_slice());
                    assert!(!p.line(rec.line).iter().any(|t| t.kind == TokenKind::PreprocessorChunk));
                }
            }
        }
    }

    #[test]
    fn no_calls_means_no_type_mismatch_site() {
        let p = prog("int main ( ) {\nint a = 1 ;\nreturn a ;\n}");
        let mut rng = SeededRng::seed_from_u64(3);
        let err = corrupt_once(&p, ErrorCategory::TypeMismatch, MutationOp::Add, &mut rng).unwrap_err();
        assert!(matches!(err, CorruptError::NoEligibleSite { .. }));
    }

    #[test]
    fn identifier_replacements_come_from_program() {
        let p = prog(SRC);
        let names: BTreeSet<String> = p.tokens().filter(|t| t.is_name()).map(|t| t.text.clone()).collect();
        let mut rng = SeededRng::seed_from_u64(5);
        for _ in 0..200 {
            for cat in [ErrorCategory::Stmt, ErrorCategory::IdentifierMisuse] {
                let (_, rec) = corrupt_once(&p, cat, MutationOp::Rep, &mut rng).unwrap();
                for t in rec.mutated_line.iter().filter(|t| t.is_name()) {
                    assert!(names.contains(&t.text), "{} introduced", t.text);
                }
            }
        }
    }

    #[test]
    fn stmt_delete_can_remove_int_literal() {
        let p = prog("a = a + 1 ;");
        let hit = (0..200).find_map(|s| {
            let (out, rec) = corrupt_once(&p, ErrorCategory::Stmt, MutationOp::Del, &mut SeededRng::seed_from_u64(s)).unwrap();
            (rec.operand_kind == TokenKind::IntLiteral).then_some(out)
        });
        assert_eq!(line_text(hit.expect("literal site reachable").line(1)), "a = a + ;");
    }

    #[test]
    fn mix_defaults_normalize() {
        let p = CategoryMix::default().probabilities();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[1] - 0.5152).abs() < 1e-9);
    }

    struct AlwaysFails;
    impl CompileOracle for AlwaysFails {
        fn compiles(&self, _: &str) -> Result<bool, DiagnosticsError> {
            Ok(true)
        }
    }

    #[test]
    fn zero_variants_is_empty() {
        let cfg = SynthesisConfig {
            variants_per_program: 0,
            ..Default::default()
        };
        let (out, report) = synthesize_corpus(&[prog(SRC)], &cfg, &AlwaysFails).unwrap();
        assert!(out.is_empty());
        assert_eq!(report.retention_rate, 1.0);
    }

    #[test]
    fn oracle_that_always_compiles_exhausts_retries() {
        let cfg = SynthesisConfig {
            variants_per_program: 2,
            retry_budget: 3,
            ..Default::default()
        };
        let err = synthesize_corpus(&[prog(SRC)], &cfg, &AlwaysFails).unwrap_err();
        assert!(matches!(err, CorruptError::ExhaustedRetries(_)));
    }
}
