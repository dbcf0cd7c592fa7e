use std::collections::BTreeSet;

use crepair::context::{analyzer, get_context, get_context_with_budget, line_symbols, materialize};
use crepair::corrupt::{corrupt_once, ErrorCategory};
use crepair::program::{tokenize, TokenKind, TokenizedProgram};
use crepair::samples::{sample_program, template_count};
use crepair::seed::Rng;
use proptest::prelude::*;
use rand::SeedableRng;

/// A template program, optionally with one random corruption applied.
fn program(template: usize, seed: u64, corrupt: Option<(usize, usize)>) -> TokenizedProgram {
    let mut rng = Rng::seed_from_u64(seed);
    let p = tokenize("p", &sample_program(template % template_count(), &mut rng)).unwrap();
    match corrupt {
        Some((c, o)) => {
            let cat = ErrorCategory::ALL[c % 5];
            let op = cat.allowed_ops()[o % cat.allowed_ops().len()];
            corrupt_once(&p, cat, op, &mut rng).map(|(q, _)| q).unwrap_or(p)
        }
        None => p,
    }
}

fn rename_all(p: &TokenizedProgram) -> TokenizedProgram {
    let mut q = p.clone();
    for t in q.lines.iter_mut().flatten() {
        if matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName) {
            t.text = format!("r_{}", t.text);
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn context_lines_are_related_other_lines(
        template in 0usize..64, seed in any::<u64>(), corrupt in proptest::option::of((0usize..5, 0usize..3))
    ) {
        let p = program(template, seed, corrupt);
        let tables = analyzer(&p);
        let n = p.line_count();
        for ctx in get_context(&p, &tables) {
            let (declare, used) = line_symbols(p.line(ctx.line), &tables);
            prop_assert!(ctx.context_lines.windows(2).all(|w| w[0] < w[1]));
            for &j in &ctx.context_lines {
                prop_assert!(j >= 1 && j <= n && j != ctx.line);
                let (jd, ju) = line_symbols(p.line(j), &tables);
                let shares = used.iter().any(|u| jd.contains(u))
                    || declare.iter().chain(&used).any(|s| ju.contains(s));
                prop_assert!(shares, "line {} -> {} shares nothing", ctx.line, j);
            }
        }
    }

    #[test]
    fn renaming_identifiers_keeps_context(template in 0usize..64, seed in any::<u64>()) {
        let p = program(template, seed, None);
        let q = rename_all(&p);
        let a: Vec<Vec<usize>> = get_context(&p, &analyzer(&p)).into_iter().map(|c| c.context_lines).collect();
        let b: Vec<Vec<usize>> = get_context(&q, &analyzer(&q)).into_iter().map(|c| c.context_lines).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn budget_is_respected(template in 0usize..64, seed in any::<u64>(), budget in 0usize..40) {
        let p = program(template, seed, None);
        let tables = analyzer(&p);
        let full = get_context(&p, &tables);
        for ctx in get_context_with_budget(&p, &tables, budget) {
            prop_assert!(ctx.context_tokens.len() <= budget);
            let all = &full[ctx.line - 1];
            prop_assert_eq!(&ctx.context_lines, &all.context_lines);
            // unbudgeted context is the lines concatenated in order
            let concat: Vec<_> = all.context_lines.iter().flat_map(|&j| p.line(j).iter().cloned()).collect();
            prop_assert_eq!(&all.context_tokens, &concat);
        }
    }
}

#[test]
fn materialize_drops_farthest_first() {
    let p = tokenize("p", "int a ;\nint b ;\nint c ;\na = b + c ;\nint d ;\nd = a ;").unwrap();
    // lines 1, 2, 3 and 6 around line 4, 3 tokens each: line 1 is farthest,
    // then 2 and 6 tie and the later one goes
    let kept = materialize(&p, 4, &[1, 2, 3, 6], 6);
    let lines: BTreeSet<String> = kept.chunks(3).map(|c| c[1].text.clone()).collect();
    assert_eq!(lines, ["b", "c"].map(String::from).into_iter().collect());
}
