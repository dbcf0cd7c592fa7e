//! Glue between the stages: compiled training examples, vocabulary and
//! model construction, and the epoch loop with optional early stopping.

use thiserror::Error;

use crate::config::TrainingSettings;
use crate::corrupt::BrokenProgram;
use crate::diagnostics::{Compiler, DiagnosticsError};
use crate::model::{
    encode_examples, examples_from_broken, HyperParams, Model, ModelError, Trainer, TrainingExample, Vocabulary,
};
use crate::par::{self, Parallelism};
use crate::program::detokenize;
use crate::repair::{score_example, ExampleScore, Metrics, RepairError, ACC_KS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Compiler(#[from] DiagnosticsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Repair(#[from] RepairError),
}

/// Compiles every broken program and expands it into one example per
/// corrupted line.
pub fn compile_examples(
    broken: &[BrokenProgram],
    compiler: &Compiler,
    hp: &HyperParams,
    parallelism: Parallelism,
) -> Result<Vec<TrainingExample>, PipelineError> {
    let per_program = par::map_indexed(parallelism, broken, |_, b| -> Result<_, PipelineError> {
        let result = compiler.compile(&detokenize(&b.program))?;
        Ok(examples_from_broken(b, &result, hp)?)
    });
    let mut out = Vec::new();
    for r in per_program {
        out.extend(r?);
    }
    Ok(out)
}

pub fn build_model(examples: &[TrainingExample], hp: HyperParams, seed: u64) -> Result<Model, ModelError> {
    let vocab = Vocabulary::build(examples.iter().flat_map(TrainingExample::token_stream))?;
    Model::new(hp, vocab, seed)
}

/// Localization and top-k accuracy of `model` on prepared examples.
pub fn accuracy(
    model: &Model,
    examples: &[TrainingExample],
    beam_width: usize,
    parallelism: Parallelism,
) -> Result<Metrics, RepairError> {
    let scores = par::map_indexed(parallelism, examples, |_, ex| score_example(model, ex, beam_width));
    let scores: Vec<ExampleScore> = scores.into_iter().collect::<Result<_, _>>()?;
    Ok(Metrics::from_scores(&scores))
}

#[derive(Clone, Debug, Default)]
pub struct FitReport {
    pub epochs_run: usize,
    /// Last measured training-set metrics, when any check ran.
    pub last_metrics: Option<Metrics>,
}

/// Runs up to `settings.epochs` epochs. With a target accuracy, acc@1 (and
/// localization) on the training set is checked every `eval_every` epochs
/// and training stops once both reach it.
pub fn fit<F>(
    trainer: &mut Trainer,
    examples: &[TrainingExample],
    settings: &TrainingSettings,
    mut on_epoch: F,
) -> Result<FitReport, PipelineError>
where
    F: FnMut(&Trainer, Option<&Metrics>),
{
    let encoded = encode_examples(examples, &trainer.model.vocab, &trainer.model.hp)?;
    let mut report = FitReport::default();
    let every = settings.eval_every.max(1);
    for e in 0..settings.epochs {
        trainer.train_epoch(&encoded)?;
        report.epochs_run += 1;
        let check = settings.target_acc.is_some() && ((e + 1) % every == 0 || e + 1 == settings.epochs);
        let metrics = if check {
            Some(accuracy(&trainer.model, examples, ACC_KS[0], trainer.parallelism)?)
        } else {
            None
        };
        on_epoch(trainer, metrics.as_ref());
        if let Some(m) = metrics {
            let target = settings.target_acc.expect("checked");
            let done = m.acc_at_1.unwrap_or(0.0) >= target && m.single_localize.unwrap_or(0.0) >= target;
            report.last_metrics = Some(m);
            if done {
                break;
            }
        }
    }
    Ok(report)
}
