use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::diagnostics::SymbolClass;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SEP: usize = 4;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const SEP_TOKEN: &str = "<sep>";

/// Placeholders per symbol class that always get an id.
pub const RESERVED_PLACEHOLDERS: usize = 10;

/// Minimum corpus count for a token to get its own id.
pub const MIN_COUNT: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

fn reserved() -> Vec<String> {
    let mut out: Vec<String> = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN, SEP_TOKEN]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for class in [SymbolClass::Var, SymbolClass::Func, SymbolClass::Type] {
        out.extend((1..=RESERVED_PLACEHOLDERS).map(|n| class.placeholder(n)));
    }
    out
}

impl Vocabulary {
    /// Reserved symbols and placeholders, then every token seen at least
    /// [`MIN_COUNT`] times ordered by count (descending) and text.
    pub fn build<I, S>(stream: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::build_limited(stream, usize::MAX)
    }

    /// Like [`Vocabulary::build`], keeping at most `max_size` entries in
    /// total (reserved ones included).
    pub fn build_limited<I, S>(stream: I, max_size: usize) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut any = false;
        for t in stream {
            any = true;
            *counts.entry(t.as_ref().to_string()).or_default() += 1;
        }
        if !any {
            return Err(ModelError::EmptyCorpus);
        }
        let mut tokens = reserved();
        let fixed: std::collections::HashSet<String> = tokens.iter().cloned().collect();
        let mut frequent: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= MIN_COUNT && !fixed.contains(t))
            .collect();
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let room = max_size.saturating_sub(tokens.len());
        tokens.extend(frequent.into_iter().take(room).map(|(t, _)| t));
        Ok(Self::from(tokens))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_and_order() {
        let v = Vocabulary::build(["a", "a", "b", "c", "c", "c", "d", "d"]).unwrap();
        assert_eq!(v.id("b"), UNK);
        let base = reserved().len();
        assert_eq!(v.token(base), "c");
        assert_eq!(v.token(base + 1), "a");
        assert_eq!(v.token(base + 2), "d");
        assert_eq!(v.len(), base + 3);
    }

    #[test]
    fn placeholders_always_present() {
        let v = Vocabulary::build(["x"]).unwrap();
        assert!(v.get("_<var1>_").is_some());
        assert!(v.get("_<type10>_").is_some());
        assert_eq!(v.get(EOS_TOKEN), Some(EOS));
    }

    #[test]
    fn limit_keeps_most_frequent() {
        let v = Vocabulary::build_limited(["a", "a", "c", "c", "c", "d", "d", "d"], reserved().len() + 2).unwrap();
        assert_eq!(v.len(), reserved().len() + 2);
        assert_eq!(v.id("a"), UNK);
        assert_ne!(v.id("c"), UNK);
        assert_ne!(v.id("d"), UNK);
    }

    #[test]
    fn empty_stream_errors() {
        assert!(matches!(
            Vocabulary::build(Vec::<String>::new()),
            Err(ModelError::EmptyCorpus)
        ));
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::build(["a", "a"]).unwrap();
        let back: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(v, back);
    }
}
