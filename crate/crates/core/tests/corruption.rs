use std::collections::BTreeSet;

use crepair::corrupt::{corrupt_once, synthesize_corpus, CorruptError, ErrorCategory, MutationOp, SynthesisConfig};
use crepair::diagnostics::Compiler;
use crepair::par::Parallelism;
use crepair::program::{detokenize, tokenize, TokenizedProgram};
use crepair::samples::sample_corpus;
use crepair::seed::Rng;
use rand::SeedableRng;

fn parents(n: usize) -> Vec<TokenizedProgram> {
    sample_corpus(11, n)
        .into_iter()
        .map(|(id, src)| tokenize(&id, &src).unwrap())
        .collect()
}

#[test]
fn emitted_variants_fail_and_restore() {
    let compiler = Compiler::default();
    let corpus = parents(14);
    let cfg = SynthesisConfig {
        variants_per_program: 6,
        seed: 5,
        ..Default::default()
    };
    let (variants, report) = synthesize_corpus(&corpus, &cfg, &compiler).unwrap();
    eprintln!("{report:?}");
    assert_eq!(report.emitted_variants, variants.len());
    assert!(report.retention_rate > 0.9);
    for v in &variants {
        assert!((1..=5).contains(&v.corruptions.len()));
        let lines: BTreeSet<usize> = v.corruptions.iter().map(|r| r.line).collect();
        assert_eq!(lines.len(), v.corruptions.len());
        assert!(!compiler.compile(&detokenize(&v.program)).unwrap().success);
        let parent = corpus.iter().find(|p| p.source_id == v.parent_id).unwrap();
        assert_eq!(&v.restore(), parent);
    }
}

#[test]
fn serial_and_parallel_agree() {
    let compiler = Compiler::default();
    let corpus = parents(6);
    let mut cfg = SynthesisConfig {
        variants_per_program: 3,
        seed: 2,
        parallelism: Parallelism::Sequential,
        ..Default::default()
    };
    let (a, _) = synthesize_corpus(&corpus, &cfg, &compiler).unwrap();
    cfg.parallelism = Parallelism::Parallel;
    let (b, _) = synthesize_corpus(&corpus, &cfg, &compiler).unwrap();
    assert_eq!(a, b);
}

#[test]
fn broken_parent_is_rejected() {
    let compiler = Compiler::default();
    let bad = tokenize("bad", "int main ( ) { return 0 }\n").unwrap();
    let err = synthesize_corpus(&[bad], &SynthesisConfig::default(), &compiler).unwrap_err();
    assert!(matches!(err, CorruptError::SourceDoesNotCompile(id) if id == "bad"));
}

#[test]
fn literal_deletion_breaks_compilation() {
    let compiler = Compiler::default();
    let p = tokenize("p", "int main ( ) {\nint a = 0 ;\na = a + 1 ;\nreturn a ;\n}").unwrap();
    let mut seen = false;
    for s in 0..500 {
        let (out, rec) = corrupt_once(&p, ErrorCategory::Stmt, MutationOp::Del, &mut Rng::seed_from_u64(s)).unwrap();
        if rec.line == 3 && rec.operand_kind == crepair::program::TokenKind::IntLiteral {
            assert_eq!(crepair::program::line_text(out.line(3)), "a = a + ;");
            assert!(compiler.compile(&detokenize(&out)).unwrap().error_count >= 1);
            seen = true;
            break;
        }
    }
    assert!(seen);
}

mod props {
    use super::*;
    use crepair::samples::{sample_program, template_count};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn one_line_changes_and_reverts(template in 0usize..64, seed in any::<u64>(), c in 0usize..5, o in 0usize..3) {
            let mut rng = crepair::seed::Rng::seed_from_u64(seed);
            let p = tokenize("p", &sample_program(template % template_count(), &mut rng)).unwrap();
            let cat = ErrorCategory::ALL[c];
            let op = [MutationOp::Add, MutationOp::Del, MutationOp::Rep][o];
            match corrupt_once(&p, cat, op, &mut rng) {
                Err(CorruptError::DisallowedOp { .. }) => prop_assert!(!cat.allows(op)),
                Err(CorruptError::NoEligibleSite { .. }) => prop_assert!(cat.allows(op)),
                Err(e) => prop_assert!(false, "unexpected {e}"),
                Ok((out, rec)) => {
                    prop_assert!(cat.allows(op));
                    let changed: Vec<usize> = (1..=p.line_count()).filter(|&l| out.line(l) != p.line(l)).collect();
                    prop_assert_eq!(changed, vec![rec.line]);
                    let mut back = out.clone();
                    *back.line_mut(rec.line) = rec.original_line.clone();
                    prop_assert_eq!(back, p);
                }
            }
        }
    }
}
