//! Sequential vs parallel: corpus synthesis against a stub compiler, and
//! per-batch gradient computation.

use std::collections::HashSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crepair::corrupt::{synthesize_corpus, CompileOracle, SynthesisConfig};
use crepair::diagnostics::{CompileResult, Diagnostic, DiagnosticsError};
use crepair::model::{batch_gradients, encode_examples, examples_from_broken, HyperParams, Model, Vocabulary};
use crepair::par::Parallelism;
use crepair::program::{detokenize, tokenize, TokenizedProgram};
use crepair::samples::sample_corpus;

/// Accepts exactly the unmodified parents, so synthesis cost is the
/// corruption work alone.
struct ParentsOnly(HashSet<String>);

impl ParentsOnly {
    fn new(corpus: &[TokenizedProgram]) -> Self {
        Self(corpus.iter().map(detokenize).collect())
    }
}

impl CompileOracle for ParentsOnly {
    fn compiles(&self, source: &str) -> Result<bool, DiagnosticsError> {
        Ok(self.0.contains(source))
    }
}

fn parents(n: usize) -> Vec<TokenizedProgram> {
    sample_corpus(5, n)
        .into_iter()
        .map(|(id, src)| tokenize(&id, &src).unwrap())
        .collect()
}

const MODES: [Parallelism; 2] = [Parallelism::Sequential, Parallelism::Parallel];

fn synthesis(c: &mut Criterion) {
    let corpus = parents(40);
    let oracle = ParentsOnly::new(&corpus);
    let mut group = c.benchmark_group("synthesize");
    for mode in MODES {
        let cfg = SynthesisConfig {
            variants_per_program: 20,
            seed: 1,
            parallelism: mode,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &cfg, |b, cfg| {
            b.iter(|| synthesize_corpus(&corpus, cfg, &oracle).unwrap())
        });
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let corpus = parents(25);
    let cfg = SynthesisConfig {
        variants_per_program: 1,
        max_errors: 1,
        seed: 2,
        ..Default::default()
    };
    let (broken, _) = synthesize_corpus(&corpus, &cfg, &ParentsOnly::new(&corpus)).unwrap();
    let hp = HyperParams::desk();
    // a diagnostic at the corrupted line stands in for the compiler
    let examples: Vec<_> = broken
        .iter()
        .flat_map(|b| {
            let line = b.corruptions[0].line;
            let result = CompileResult {
                success: false,
                diagnostics: vec![Diagnostic::new(line, Some(1), "expected ';' before '}' token")],
                error_count: 1,
                unparsed: Vec::new(),
            };
            examples_from_broken(b, &result, &hp).unwrap()
        })
        .collect();
    let vocab = Vocabulary::build(examples.iter().flat_map(|e| e.token_stream())).unwrap();
    let model = Model::new(hp.clone(), vocab, 3).unwrap();
    let encoded = encode_examples(&examples, &model.vocab, &hp).unwrap();
    let batch: Vec<_> = encoded.iter().take(hp.batch_size).collect();

    let mut group = c.benchmark_group("batch_gradients");
    group.sample_size(10);
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| batch_gradients(&model, &batch, 7, 0, mode))
        });
    }
    group.finish();
}

criterion_group!(benches, synthesis, gradients);
criterion_main!(benches);
