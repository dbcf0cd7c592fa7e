use std::collections::{BTreeMap, HashMap};

use crepair::dataset::{canonical_text, dedup_split, DatasetItem, Split, SplitRatios};
use crepair::program::{detokenize, tokenize, TokenKind, TokenizedProgram};
use crepair::samples::sample_corpus;
use proptest::prelude::*;

const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum", "extern",
    "float", "for", "goto", "if", "int", "long", "register", "return", "short", "signed", "sizeof", "static",
    "struct", "switch", "typedef", "union", "unsigned", "void", "volatile", "while",
];

/// Canonical form computed from the raw text alone: every word that is not
/// a keyword, number or inside a string/char literal or directive becomes
/// `v<k>` by first appearance.
fn oracle_canonical(source: &str) -> String {
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for line in source.lines() {
        if line.trim_start().starts_with('#') {
            out.push(line.trim().to_string());
            continue;
        }
        let mut words = Vec::new();
        let mut in_str: Option<char> = None;
        for w in line.split_whitespace() {
            let closes = |q: char| w.ends_with(q) && !w.ends_with(&format!("\\{q}"));
            if let Some(q) = in_str {
                if closes(q) {
                    in_str = None;
                }
                words.push(w.to_string());
                continue;
            }
            if let Some(q) = w.chars().next().filter(|c| *c == '"' || *c == '\'') {
                if !(w.len() > 1 && closes(q)) {
                    in_str = Some(q);
                }
                words.push(w.to_string());
                continue;
            }
            let ident = w.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                && w.chars().all(|c| c.is_alphanumeric() || c == '_');
            if ident && !C_KEYWORDS.contains(&w) {
                let next = names.len() + 1;
                let k = *names.entry(w.to_string()).or_insert(next);
                words.push(format!("v{k}"));
            } else {
                words.push(w.to_string());
            }
        }
        out.push(words.join(" "));
    }
    out.join("\n")
}

/// Renames every identifier token with a suffix.
fn alpha_rename(p: &TokenizedProgram, suffix: &str) -> TokenizedProgram {
    let mut q = p.clone();
    for line in &mut q.lines {
        for t in line {
            if matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName) {
                t.text.push_str(suffix);
            }
        }
    }
    q
}

fn fixture() -> Vec<DatasetItem> {
    let originals: Vec<TokenizedProgram> = sample_corpus(31, 10)
        .into_iter()
        .map(|(id, src)| tokenize(&id, &src).unwrap())
        .collect();
    let mut items = Vec::new();
    for (i, p) in originals.iter().enumerate() {
        items.push(DatasetItem {
            id: format!("orig{i}"),
            parent_id: format!("orig{i}"),
            program: p.clone(),
        });
        items.push(DatasetItem {
            id: format!("copy{i}"),
            parent_id: format!("copy{i}"),
            program: alpha_rename(p, "_z"),
        });
    }
    items
}

#[test]
fn canonical_equality_matches_oracle_on_fixture() {
    let items = fixture();
    assert_eq!(items.len(), 20);
    let mut dup_pairs = 0;
    for a in &items {
        for b in &items {
            let want = oracle_canonical(&detokenize(&a.program)) == oracle_canonical(&detokenize(&b.program));
            let got = canonical_text(&a.program) == canonical_text(&b.program);
            assert_eq!(got, want, "{} vs {}", a.id, b.id);
            dup_pairs += usize::from(want && a.id < b.id);
        }
    }
    assert!(dup_pairs >= 10);
}

#[test]
fn no_duplicates_across_splits() {
    let items = fixture();
    for seed in 0..20 {
        let ratios = SplitRatios {
            train: 0.5,
            validation: 0.25,
            test: 0.25,
        };
        let m = dedup_split(&items, ratios, seed, vec![]).unwrap();
        let by_id: BTreeMap<&str, &DatasetItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
        let kept: Vec<(Split, String)> = m
            .assignments
            .iter()
            .map(|a| (a.split, oracle_canonical(&detokenize(&by_id[a.id.as_str()].program))))
            .collect();
        for (s1, c1) in &kept {
            for (s2, c2) in &kept {
                assert!(s1 == s2 || c1 != c2, "seed {seed}: duplicate across {s1:?}/{s2:?}");
            }
        }
        assert_eq!(m.assignments.len() + m.dedup.pairs_removed, items.len());
        // nothing is removed from test
        let test_before = items
            .iter()
            .filter(|i| crepair::dataset::assign_split(seed, &i.parent_id, &ratios).unwrap() == Split::Test)
            .count();
        assert_eq!(m.ids_in(Split::Test).count(), test_before);
    }
}

#[test]
fn same_seed_same_manifest() {
    let items = fixture();
    let a = dedup_split(&items, SplitRatios::default(), 9, vec!["x".into()]).unwrap();
    let b = dedup_split(&items, SplitRatios::default(), 9, vec!["x".into()]).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn variants_of_one_parent_share_a_split(seed in any::<u64>(), parents in 1usize..12, per in 1usize..5) {
        let base = tokenize("p", "int main ( ) { return 0 ; }").unwrap();
        let items: Vec<DatasetItem> = (0..parents)
            .flat_map(|p| (0..per).map(move |v| (p, v)))
            .map(|(p, v)| {
                let mut program = base.clone();
                program.lines[0][5].text = format!("{}", p * 10 + v);
                DatasetItem { id: format!("p{p}#v{v}"), parent_id: format!("p{p}"), program }
            })
            .collect();
        let m = dedup_split(&items, SplitRatios::default(), seed, vec![]).unwrap();
        let mut split_of: BTreeMap<&str, Split> = BTreeMap::new();
        for a in &m.assignments {
            let s = *split_of.entry(a.parent_id.as_str()).or_insert(a.split);
            prop_assert_eq!(s, a.split);
        }
    }
}

