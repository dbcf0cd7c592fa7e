use crepair::diagnostics::Compiler;
use crepair::samples::{sample_program, template_count};
use crepair::seed;

#[test]
fn every_template_compiles_cleanly() {
    let compiler = Compiler::default();
    let mut rng = seed::rng_for(11, "compile-check");
    for t in 0..template_count() {
        for _ in 0..3 {
            let src = sample_program(t, &mut rng);
            let r = compiler.compile(&src).unwrap();
            assert!(r.success, "template {t} failed: {:?}\n{src}", r.diagnostics);
        }
    }
}
