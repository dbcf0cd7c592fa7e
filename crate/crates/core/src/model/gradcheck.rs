use crepair_tensor::{check_gradients, GradCheckReport, Graph};

use super::input::{prepare_program, EncodedExample, TrainingExample};
use super::network::{Dropout, Model};
use super::{HyperParams, ModelError, Vocabulary};
use crate::diagnostics::Diagnostic;
use crate::program::tokenize;

pub const GRADCHECK_EPSILON: f64 = 1e-4;
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;
/// Vocabulary size of the check fixture.
pub const GRADCHECK_VOCAB: usize = 45;

const FIXTURE: &str = "int sq ( int x ) {
return x * x ;
}
int main ( ) {
int total = sq ( 3 )
return total ;
}
";

/// Tiny model and one example whose target mixes vocabulary tokens with
/// out-of-vocabulary tokens reachable only by copying. One input line is
/// padded so the attention masks are exercised.
pub fn tiny_fixture(seed: u64) -> Result<(Model, EncodedExample), ModelError> {
    let hp = HyperParams::tiny();
    let program = tokenize("gradcheck", FIXTURE).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let diag = Diagnostic::new(6, Some(1), "expected ',' or ';' before 'return'");
    let example = TrainingExample {
        program: prepare_program(&program, &diag, &hp)?,
        target_line: 5,
        target: ["int", "total", "=", "sq", "(", "3", ")", ";"].map(String::from).to_vec(),
    };
    let vocab = Vocabulary::build_limited(example.token_stream(), GRADCHECK_VOCAB)?;
    let mut encoded = EncodedExample::new(&example, &vocab, &hp)?;
    let first = encoded.inputs[0].clone();
    let len = first.len();
    encoded.inputs[0] = first.padded(len + 3);
    let model = Model::new(hp, vocab, seed)?;
    Ok((model, encoded))
}

/// Central-difference check of every parameter tensor of the tiny model.
pub fn gradient_check(seed: u64, tolerance: f64) -> Result<GradCheckReport, ModelError> {
    let (model, ex) = tiny_fixture(seed)?;
    let analytic = {
        let mut g = Graph::new(&model.params);
        let loss = model.example_loss(&mut g, &ex, &mut Dropout::off());
        g.backward(loss.total)
    };
    let mut store = model.params.clone();
    let report = check_gradients(&mut store, &analytic, GRADCHECK_EPSILON, |s| {
        let mut g = Graph::new(s);
        let loss = model.example_loss(&mut g, &ex, &mut Dropout::off());
        g.scalar(loss.total)
    });
    if let Some(worst) = report.worst() {
        if worst.max_rel_err.is_nan() || worst.max_rel_err >= tolerance {
            return Err(ModelError::GradientMismatch {
                tensor: worst.name.clone(),
                max_rel_err: worst.max_rel_err,
            });
        }
    }
    Ok(report)
}
