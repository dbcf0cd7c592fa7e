use crepair::corrupt::{synthesize_corpus, CompileOracle, SynthesisConfig};
use crepair::diagnostics::DiagnosticsError;
use crepair::program::{detokenize, tokenize};
use crepair::samples::sample_corpus;
use crepair::store::{self, SourceRecord, StoreError};

struct ParentsOnly(Vec<String>);

impl CompileOracle for ParentsOnly {
    fn compiles(&self, source: &str) -> Result<bool, DiagnosticsError> {
        Ok(self.0.iter().any(|s| s == source))
    }
}

#[test]
fn broken_corpus_round_trips() {
    let corpus: Vec<_> = sample_corpus(3, 5)
        .into_iter()
        .map(|(id, s)| tokenize(&id, &s).unwrap())
        .collect();
    let oracle = ParentsOnly(corpus.iter().map(detokenize).collect());
    let cfg = SynthesisConfig {
        variants_per_program: 4,
        seed: 3,
        ..Default::default()
    };
    let (broken, _) = synthesize_corpus(&corpus, &cfg, &oracle).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.jsonl");
    store::write_broken(&path, &broken).unwrap();
    assert_eq!(store::read_broken(&path).unwrap(), broken);
    for line in std::fs::read_to_string(&path).unwrap().lines() {
        assert!(line.starts_with("{\"format_version\":1,"));
    }
    // only the artifact itself, no stray temporaries
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn unknown_versions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    std::fs::write(&path, "{\"format_version\":7,\"id\":\"a\",\"source\":\"\"}\n").unwrap();
    assert!(matches!(
        store::read_jsonl::<SourceRecord>(&path),
        Err(StoreError::UnsupportedVersion { found: 7, .. })
    ));
    std::fs::write(&path, "{\"id\":\"a\",\"source\":\"\"}\n").unwrap();
    assert!(matches!(store::read_jsonl::<SourceRecord>(&path), Err(StoreError::Parse { .. })));
    let doc = dir.path().join("d.json");
    std::fs::write(&doc, "{\"format_version\":2}").unwrap();
    assert!(matches!(
        store::read_json::<serde_json::Value>(&doc),
        Err(StoreError::UnsupportedVersion { found: 2, .. })
    ));
}

#[test]
fn sources_from_directory_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.c"), "int b;").unwrap();
    std::fs::write(dir.path().join("a.c"), "int a;").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
    let recs = store::read_sources(dir.path()).unwrap();
    let ids: Vec<&str> = recs.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["a", "b"]);
}
