//! Generator of small, correct, student-style C programs.
//!
//! Used as the parent corpus for fixtures, benchmarks and the `sample`
//! CLI subcommand. Every template compiles cleanly as C99.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::seed;

const NAMES: &[&str] = &[
    "a", "b", "c", "n", "m", "x", "y", "z", "k", "t", "num", "val", "cnt", "sum", "res", "tmp",
    "total", "count", "len", "idx", "max", "min", "avg", "left", "right", "first", "second",
    "digit", "rem", "prod", "base", "step", "limit", "score", "item", "key", "low", "high",
];
const LOOP_VARS: &[&str] = &["i", "j", "p", "q", "r", "u", "w"];
const FUNCS: &[&str] = &[
    "add", "compute", "solve", "calc", "find_max", "get_sum", "helper", "process", "check",
    "count_digits", "power", "gcd", "fact", "fib", "is_even", "square", "update",
];
const TYPES: &[&str] = &["point", "pair", "node", "item_t", "record", "cell"];

const TEMPLATES: &[&str] = &[
    // array sum through a helper
    "#include <stdio.h>
int FUNC(int ARR[], int N) {
    int S = 0;
    for (int I = 0; I < N; I++) {
        S = S + ARR[I];
    }
    return S;
}
int main() {
    int A[C1];
    int K;
    for (K = 0; K < C1; K++) {
        scanf(\"%d\", &A[K]);
    }
    printf(\"%d\\n\", FUNC(A, C1));
    return 0;
}",
    // max of two
    "#include <stdio.h>
int FUNC(int X, int Y) {
    if (X > Y)
        return X;
    return Y;
}
int main() {
    int A, B;
    scanf(\"%d %d\", &A, &B);
    int S = FUNC(A, B) OP C1;
    printf(\"%d\\n\", S);
    return 0;
}",
    // factorial loop
    "#include <stdio.h>
int main() {
    int N;
    long S = 1;
    scanf(\"%d\", &N);
    for (int I = 1; I <= N; I++) {
        S = S * I;
    }
    printf(\"%ld\\n\", S);
    return 0;
}",
    // struct with typedef
    "#include <stdio.h>
typedef struct {
    int X;
    int Y;
} TYPE;
int FUNC(TYPE P) {
    return P.X OP P.Y;
}
int main() {
    TYPE A;
    scanf(\"%d %d\", &A.X, &A.Y);
    printf(\"%d\\n\", FUNC(A));
    return 0;
}",
    // digit count
    "#include <stdio.h>
int main() {
    int N, S = 0;
    scanf(\"%d\", &N);
    while (N > 0) {
        N = N / 10;
        S++;
    }
    printf(\"%d\\n\", S);
    return 0;
}",
    // swap through pointers
    "#include <stdio.h>
void FUNC(int *X, int *Y) {
    int T = *X;
    *X = *Y;
    *Y = T;
}
int main() {
    int A = C1, B = C2;
    FUNC(&A, &B);
    printf(\"%d %d\\n\", A, B);
    return 0;
}",
    // bubble sort
    "#include <stdio.h>
int main() {
    int ARR[C1];
    int N = C1;
    for (int I = 0; I < N; I++)
        scanf(\"%d\", &ARR[I]);
    for (int I = 0; I < N - 1; I++) {
        for (int K = 0; K < N - I - 1; K++) {
            if (ARR[K] > ARR[K + 1]) {
                int T = ARR[K];
                ARR[K] = ARR[K + 1];
                ARR[K + 1] = T;
            }
        }
    }
    for (int I = 0; I < N; I++)
        printf(\"%d \", ARR[I]);
    return 0;
}",
    // fibonacci
    "#include <stdio.h>
int FUNC(int N) {
    int A = 0, B = 1;
    for (int I = 0; I < N; I++) {
        int T = A + B;
        A = B;
        B = T;
    }
    return A;
}
int main() {
    int N;
    scanf(\"%d\", &N);
    printf(\"%d\\n\", FUNC(N));
    return 0;
}",
    // parity
    "#include <stdio.h>
int main() {
    int N;
    scanf(\"%d\", &N);
    if (N % 2 == 0) {
        printf(\"even\\n\");
    } else {
        printf(\"odd\\n\");
    }
    return 0;
}",
    // string length
    "#include <stdio.h>
int FUNC(char S[]) {
    int N = 0;
    while (S[N] != '\\0')
        N++;
    return N;
}
int main() {
    char W[C3];
    scanf(\"%s\", W);
    printf(\"%d\\n\", FUNC(W));
    return 0;
}",
    // running average
    "#include <stdio.h>
int main() {
    int N, X;
    double S = 0.0;
    scanf(\"%d\", &N);
    for (int I = 0; I < N; I++) {
        scanf(\"%d\", &X);
        S += X;
    }
    printf(\"%.2f\\n\", S / N);
    return 0;
}",
    // gcd
    "#include <stdio.h>
int FUNC(int X, int Y) {
    while (Y != 0) {
        int T = X % Y;
        X = Y;
        Y = T;
    }
    return X;
}
int main() {
    int A, B;
    scanf(\"%d %d\", &A, &B);
    printf(\"%d\\n\", FUNC(A, B));
    return 0;
}",
    // square helper
    "#include <stdio.h>
int FUNC(int X) {
    return X * X;
}
int main() {
    int A = C1;
    int B = FUNC(A) OP C2;
    printf(\"%d\\n\", B);
    return 0;
}",
    // struct node list walk
    "#include <stdio.h>
struct TYPE {
    int X;
    struct TYPE *Y;
};
int FUNC(struct TYPE *P) {
    int S = 0;
    while (P != 0) {
        S = S + P->X;
        P = P->Y;
    }
    return S;
}
int main() {
    struct TYPE A, B;
    A.X = C1;
    A.Y = &B;
    B.X = C2;
    B.Y = 0;
    printf(\"%d\\n\", FUNC(&A));
    return 0;
}",
];

/// Number of distinct program templates.
pub fn template_count() -> usize {
    TEMPLATES.len()
}

fn pick_distinct<'a, R: Rng>(rng: &mut R, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let mut v: Vec<&str> = pool.to_vec();
    v.shuffle(rng);
    v.truncate(n);
    v
}

fn render(template: &str, rng: &mut impl Rng) -> String {
    // uppercase placeholders map to fresh names; order matters only for
    // overlapping keys (ARR before A)
    let names = pick_distinct(rng, NAMES, 8);
    let loops = pick_distinct(rng, LOOP_VARS, 2);
    let func = *FUNCS.choose(rng).unwrap();
    let ty = *TYPES.choose(rng).unwrap();
    let op = *["+", "-", "*"].choose(rng).unwrap();
    let subs: [(&str, String); 17] = [
        ("FUNC", func.to_string()),
        ("TYPE", ty.to_string()),
        ("ARR", names[0].to_string()),
        ("OP", op.to_string()),
        ("C1", rng.random_range(2..20).to_string()),
        ("C2", rng.random_range(1..50).to_string()),
        ("C3", rng.random_range(20..100).to_string()),
        ("A", names[1].to_string()),
        ("B", names[2].to_string()),
        ("N", names[3].to_string()),
        ("S", names[4].to_string()),
        ("T", names[5].to_string()),
        ("W", names[6].to_string()),
        ("X", names[7].to_string()),
        ("Y", format!("{}2", names[7])),
        ("I", loops[0].to_string()),
        ("K", loops[1].to_string()),
    ];
    let mut out = String::with_capacity(template.len() + 64);
    let bytes = template.as_bytes();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let at_word_start = i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
        if at_word_start && bytes[i].is_ascii_uppercase() {
            for (key, val) in &subs {
                let end = i + key.len();
                let word_end = end >= bytes.len() || !(bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_');
                if template[i..].starts_with(key) && word_end {
                    out.push_str(val);
                    i = end;
                    continue 'outer;
                }
            }
        }
        out.push(bytes[i] as char);
        i += 1;
    }
    out.push('\n');
    out
}

/// One program from template `template % template_count()`.
pub fn sample_program(template: usize, rng: &mut impl Rng) -> String {
    render(TEMPLATES[template % TEMPLATES.len()], rng)
}

/// `count` programs cycling through templates, with source ids
/// `sample-00000`, `sample-00001`, ...
pub fn sample_corpus(root_seed: u64, count: usize) -> Vec<(String, String)> {
    let mut rng = seed::rng_for(root_seed, "samples");
    (0..count)
        .map(|i| (format!("sample-{i:05}"), sample_program(i, &mut rng)))
        .collect()
}

/// Like [`sample_corpus`] but restricted to templates of at most
/// `max_lines` lines.
pub fn sample_corpus_max_lines(root_seed: u64, count: usize, max_lines: usize) -> Vec<(String, String)> {
    let allowed: Vec<usize> = (0..TEMPLATES.len())
        .filter(|&t| TEMPLATES[t].lines().count() <= max_lines)
        .collect();
    assert!(!allowed.is_empty(), "no template fits in {max_lines} lines");
    let mut rng = seed::rng_for(root_seed, "samples");
    (0..count)
        .map(|i| {
            let t = allowed[i % allowed.len()];
            (format!("sample-{i:05}"), sample_program(t, &mut rng))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::tokenize;

    #[test]
    fn every_template_tokenizes() {
        let mut rng = seed::rng_for(1, "t");
        for t in 0..template_count() {
            for _ in 0..5 {
                let src = sample_program(t, &mut rng);
                tokenize("s", &src).unwrap_or_else(|e| panic!("{e}\n{src}"));
                assert!(!src.contains("ARR") && !src.contains("FUNC"), "{src}");
            }
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(sample_corpus(3, 20), sample_corpus(3, 20));
        assert_ne!(sample_corpus(3, 20), sample_corpus(4, 20));
    }
}
