//! Compiler invocation, error-line parsing, and identifier normalization of
//! diagnostic messages.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::context::SymbolTables;

/// Environment variable overriding the compiler binary.
pub const COMPILER_ENV: &str = "CREPAIR_CC";

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("compiler unavailable: {0}")]
    CompilerUnavailable(String),
    #[error("compiler timed out after {0} seconds")]
    CompilerTimeout(f64),
    #[error("unparseable compiler output: {0}")]
    UnparseableOutput(String),
    #[error("unknown placeholder {0}")]
    UnknownPlaceholder(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerConfig {
    pub path: String,
    pub flags: Vec<String>,
    pub timeout_secs: f64,
    /// Upper bound on concurrently running compiler processes.
    pub max_concurrent: usize,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        Self {
            path: std::env::var(COMPILER_ENV).unwrap_or_else(|_| "gcc".to_string()),
            flags: [
                "-fsyntax-only",
                "-std=c99",
                "-w",
                "-fdiagnostics-plain-output",
                "-fno-diagnostics-show-caret",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            timeout_secs: 10.0,
            max_concurrent: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        }
    }
}

/// Placeholder → original identifier, kept in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap(pub Vec<(String, String)>);

impl IdMap {
    pub fn get(&self, placeholder: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(p, _)| p == placeholder)
            .map(|(_, v)| v.as_str())
    }

    pub fn placeholder_for(&self, ident: &str, class: SymbolClass) -> Option<&str> {
        self.0
            .iter()
            .find(|(p, v)| v == ident && p.starts_with(class.prefix()))
            .map(|(p, _)| p.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for IdMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for IdMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = IdMap;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a placeholder map")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<IdMap, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    out.push((k, v));
                }
                Ok(IdMap(out))
            }
        }
        deserializer.deserialize_map(V)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolClass {
    Var,
    Func,
    Type,
}

impl SymbolClass {
    fn prefix(self) -> &'static str {
        match self {
            SymbolClass::Var => "_<var",
            SymbolClass::Func => "_<func",
            SymbolClass::Type => "_<type",
        }
    }

    pub fn placeholder(self, n: usize) -> String {
        format!("{}{}>_", self.prefix(), n)
    }
}

pub fn is_placeholder(token: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^_<(var|func|type)[1-9][0-9]*>_$").unwrap())
        .is_match(token)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub reported_line: usize,
    pub column: Option<usize>,
    pub raw_message: String,
    /// Lossless token split of the (normalized) message; concatenating the
    /// tokens after substituting `id_map` reproduces `raw_message`.
    pub normalized_message: Vec<String>,
    pub id_map: IdMap,
}

impl Diagnostic {
    pub fn new(reported_line: usize, column: Option<usize>, raw_message: impl Into<String>) -> Self {
        let raw_message = raw_message.into();
        let normalized_message = message_tokens(&raw_message);
        Self {
            reported_line,
            column,
            raw_message,
            normalized_message,
            id_map: IdMap::default(),
        }
    }

    /// Replaces program symbols in the message with class placeholders.
    pub fn normalized(mut self, symbols: &SymbolTables) -> Self {
        let (tokens, map) = normalize_message(&self.raw_message, symbols);
        self.normalized_message = tokens;
        self.id_map = map;
        self
    }

    /// Message tokens as fed to the model (whitespace dropped).
    pub fn model_tokens(&self) -> Vec<String> {
        self.normalized_message
            .iter()
            .filter(|t| !t.trim().is_empty())
            .cloned()
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub error_count: usize,
    /// Compiler output lines that matched no known shape.
    pub unparsed: Vec<String>,
}

impl CompileResult {
    pub fn first(&self) -> Option<&Diagnostic> {
        self.diagnostics.first()
    }
}

/// Splits a message into word runs, whitespace runs and single symbols.
pub fn message_tokens(message: &str) -> Vec<String> {
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Word,
        Space,
        Other,
    }
    let class = |c: char| {
        if c.is_alphanumeric() || c == '_' {
            Class::Word
        } else if c.is_whitespace() {
            Class::Space
        } else {
            Class::Other
        }
    };
    let mut out: Vec<String> = Vec::new();
    let mut prev: Option<Class> = None;
    for c in message.chars() {
        let k = class(c);
        match (prev, k) {
            (Some(p), k) if p == k && k != Class::Other => out.last_mut().unwrap().push(c),
            _ => out.push(c.to_string()),
        }
        prev = Some(k);
    }
    out
}

/// Replaces each program-defined identifier with `_<varN>_`, `_<funcN>_` or
/// `_<typeN>_`, numbering per class by first appearance.
pub fn normalize_message(raw: &str, symbols: &SymbolTables) -> (Vec<String>, IdMap) {
    let mut map = IdMap::default();
    let mut counts = [0usize; 3];
    let tokens = message_tokens(raw)
        .into_iter()
        .map(|tok| {
            let class = if symbols.var_set.contains(&tok) {
                SymbolClass::Var
            } else if symbols.func_set.contains(&tok) {
                SymbolClass::Func
            } else if symbols.type_set.contains(&tok) {
                SymbolClass::Type
            } else {
                return tok;
            };
            if let Some(p) = map.placeholder_for(&tok, class) {
                return p.to_string();
            }
            let slot = class as usize;
            counts[slot] += 1;
            let p = class.placeholder(counts[slot]);
            map.0.push((p.clone(), tok));
            p
        })
        .collect();
    (tokens, map)
}

pub fn denormalize(tokens: &[String], id_map: &IdMap) -> Result<String, DiagnosticsError> {
    let mut out = String::new();
    for t in tokens {
        if is_placeholder(t) {
            match id_map.get(t) {
                Some(orig) => out.push_str(orig),
                None => return Err(DiagnosticsError::UnknownPlaceholder(t.clone())),
            }
        } else {
            out.push_str(t);
        }
    }
    Ok(out)
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

fn semaphore(size: usize) -> &'static Semaphore {
    static SEM: OnceLock<Semaphore> = OnceLock::new();
    SEM.get_or_init(|| Semaphore {
        permits: Mutex::new(size.max(1)),
        cv: Condvar::new(),
    })
}

/// Syntax-checks C sources with an external compiler.
#[derive(Clone, Debug, Default)]
pub struct Compiler {
    pub config: CompilerConfig,
}

const SOURCE_NAME: &str = "prog.c";

impl Compiler {
    pub fn new(config: CompilerConfig) -> Self {
        Self { config }
    }

    /// Compiles in a fresh temporary directory.
    pub fn compile(&self, source: &str) -> Result<CompileResult, DiagnosticsError> {
        let dir = tempfile::Builder::new().prefix("crepair-cc").tempdir()?;
        self.compile_in(source, dir.path())
    }

    pub fn compile_in(&self, source: &str, workdir: &Path) -> Result<CompileResult, DiagnosticsError> {
        let file: PathBuf = workdir.join(SOURCE_NAME);
        std::fs::write(&file, source)?;
        let _permit = semaphore(self.config.max_concurrent).acquire();
        let mut child = Command::new(&self.config.path)
            .args(&self.config.flags)
            .arg(SOURCE_NAME)
            .current_dir(workdir)
            .env("LC_ALL", "C")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| DiagnosticsError::CompilerUnavailable(format!("{}: {e}", self.config.path)))?;

        let mut stderr = child.stderr.take().expect("piped stderr");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let deadline = Instant::now() + Duration::from_secs_f64(self.config.timeout_secs);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(DiagnosticsError::CompilerTimeout(self.config.timeout_secs));
            }
            std::thread::sleep(Duration::from_millis(1));
        };
        let output = reader.join().unwrap_or_default();
        let result = parse_compiler_output(&output);
        if !status.success() && result.error_count == 0 {
            let line = result
                .unparsed
                .first()
                .cloned()
                .unwrap_or_else(|| format!("exit status {status} without diagnostics"));
            return Err(DiagnosticsError::UnparseableOutput(line));
        }
        Ok(result)
    }
}

/// Parses `<file>:<line>[:<col>]: error: <message>` lines. Warnings and notes
/// are skipped; unrecognized lines are kept in `unparsed`.
pub fn parse_compiler_output(output: &str) -> CompileResult {
    static DIAG: OnceLock<Regex> = OnceLock::new();
    static CONTEXT: OnceLock<Regex> = OnceLock::new();
    let diag = DIAG.get_or_init(|| {
        Regex::new(r"^(?:[^:]+):(\d+):(?:(\d+):)? ?(fatal error|error|warning|note): (.*)$").unwrap()
    });
    let context = CONTEXT.get_or_init(|| {
        Regex::new(
            r"^(?:[^:]*: (?:In function|At top level|In file included|In member function)|\s+from |compilation terminated|\d+ (?:error|warning)s? generated|In file included)",
        )
        .unwrap()
    });
    let mut result = CompileResult::default();
    for line in output.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(c) = diag.captures(line) {
            let severity = &c[3];
            if severity == "error" || severity == "fatal error" {
                let line_no: usize = c[1].parse().unwrap_or(0);
                let column = c.get(2).and_then(|m| m.as_str().parse().ok());
                result.diagnostics.push(Diagnostic::new(line_no, column, &c[4]));
            }
        } else if !context.is_match(line) {
            result.unparsed.push(line.to_string());
        }
    }
    result.error_count = result.diagnostics.len();
    result.success = result.error_count == 0;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn syms(vars: &[&str], funcs: &[&str], types: &[&str]) -> SymbolTables {
        SymbolTables {
            var_set: vars.iter().map(|s| s.to_string()).collect(),
            func_set: funcs.iter().map(|s| s.to_string()).collect(),
            type_set: types.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn normalizes_quoted_variable() {
        let (toks, map) = normalize_message("'a' undeclared", &syms(&["a"], &[], &[]));
        assert_eq!(toks.concat(), "'_<var1>_' undeclared");
        assert_eq!(map, IdMap(vec![("_<var1>_".into(), "a".into())]));
    }

    #[test]
    fn no_symbols_no_change() {
        let raw = "expected ';' before '}' token";
        let (toks, map) = normalize_message(raw, &syms(&["x"], &["f"], &[]));
        assert_eq!(toks.concat(), raw);
        assert!(map.is_empty());
    }

    #[test]
    fn numbering_by_first_appearance_per_class() {
        let raw = "'c' and 'a' differ from 'b', also 'c' vs 'f' and 'node'";
        let (toks, map) = normalize_message(raw, &syms(&["a", "b", "c"], &["f"], &["node"]));
        assert_eq!(
            toks.concat(),
            "'_<var1>_' and '_<var2>_' differ from '_<var3>_', also '_<var1>_' vs '_<func1>_' and '_<type1>_'"
        );
        assert_eq!(map.get("_<var1>_"), Some("c"));
        assert_eq!(map.get("_<var2>_"), Some("a"));
        assert_eq!(map.get("_<var3>_"), Some("b"));
        assert_eq!(denormalize(&toks, &map).unwrap(), raw);
    }

    #[test]
    fn bare_identifiers_are_matched_on_word_boundaries() {
        let (toks, _) = normalize_message("total undeclared (first use), totals ok", &syms(&["total"], &[], &[]));
        assert_eq!(toks.concat(), "_<var1>_ undeclared (first use), totals ok");
    }

    #[test]
    fn denormalize_edge_cases() {
        assert_eq!(denormalize(&[], &IdMap::default()).unwrap(), "");
        assert!(matches!(
            denormalize(&["_<var2>_".to_string()], &IdMap::default()),
            Err(DiagnosticsError::UnknownPlaceholder(p)) if p == "_<var2>_"
        ));
    }

    #[test]
    fn parses_gcc_output() {
        let out = "prog.c: In function 'main':\n\
                   prog.c:4:9: error: 'x' undeclared (first use in this function)\n\
                   prog.c:4:9: note: each undeclared identifier is reported only once\n\
                   prog.c:5:1: warning: unused\n\
                   prog.c:7: error: expected ';' before '}' token\n\
                   weird line\n";
        let r = parse_compiler_output(out);
        assert_eq!(r.error_count, 2);
        assert!(!r.success);
        assert_eq!(r.diagnostics[0].reported_line, 4);
        assert_eq!(r.diagnostics[0].column, Some(9));
        assert_eq!(r.diagnostics[1].column, None);
        assert_eq!(r.diagnostics[1].raw_message, "expected ';' before '}' token");
        assert_eq!(r.unparsed, vec!["weird line".to_string()]);
    }

    #[test]
    fn id_map_serializes_in_order() {
        let m = IdMap(vec![
            ("_<var1>_".into(), "z".into()),
            ("_<func1>_".into(), "a".into()),
        ]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"_<var1>_":"z","_<func1>_":"a"}"#);
        assert_eq!(serde_json::from_str::<IdMap>(&s).unwrap(), m);
    }

    proptest! {
        #[test]
        fn normalize_round_trips(words in prop::collection::vec(
            prop::sample::select(vec!["a", "b", "cnt", "f", "node", "'", " ", "  ", "expected", ";", "(", "_<var1>_", "x_1"]),
            0..30,
        )) {
            let raw: String = words.concat();
            let s = syms(&["a", "b", "cnt"], &["f"], &["node"]);
            let (toks, map) = normalize_message(&raw, &s);
            prop_assert_eq!(denormalize(&toks, &map).unwrap(), raw);
        }
    }
}
