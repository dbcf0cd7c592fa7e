use serde::{Deserialize, Serialize};

use super::driver::{beam_decode, rank_lines, repair_program, RepairConfig, RepairStatus};
use super::RepairError;
use crate::diagnostics::Compiler;
use crate::model::{prepare_program, EncoderInput, Model, TrainingExample};
use crate::par::{self, Parallelism};
use crate::program::{detokenize, TokenizedProgram};

/// The `k` values reported for single-line repair accuracy.
pub const ACC_KS: [usize; 3] = [1, 5, 10];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub line: usize,
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    pub program: TokenizedProgram,
    pub truth: Option<GroundTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub localized: bool,
    /// 1-based rank of the exact target among the beam candidates decoded
    /// at the true line.
    pub truth_rank: Option<usize>,
}

/// Localization hit and target rank for one prepared example.
pub fn score_example(model: &Model, ex: &TrainingExample, beam_width: usize) -> Result<ExampleScore, RepairError> {
    let inputs = ex
        .program
        .lines
        .iter()
        .map(|l| EncoderInput::new(l, &model.vocab, &model.hp))
        .collect::<Result<Vec<_>, _>>()?;
    let localized = rank_lines(&model.line_probabilities(&inputs))[0] == ex.target_line;
    let mut states = model.encode_values(&inputs);
    let k = ex.target_line - 1;
    let candidates = beam_decode(
        model,
        std::mem::take(&mut states[k]),
        &inputs[k],
        &ex.program.id_map,
        ex.target_line,
        beam_width,
    );
    let truth_rank = candidates.iter().find(|c| c.tokens == ex.target).map(|c| c.rank);
    Ok(ExampleScore { localized, truth_rank })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub labeled: usize,
    pub single_localize: Option<f64>,
    pub acc_at_1: Option<f64>,
    pub acc_at_5: Option<f64>,
    pub acc_at_10: Option<f64>,
    pub full_repair: f64,
    pub note: Option<String>,
}

impl Metrics {
    pub fn acc_at(&self, k: usize) -> Result<f64, RepairError> {
        let v = match k {
            1 => self.acc_at_1,
            5 => self.acc_at_5,
            10 => self.acc_at_10,
            _ => None,
        };
        v.ok_or(RepairError::MissingGroundTruth)
    }

    /// Fractions from per-example scores; `full_repair` is left at 0.
    pub fn from_scores(scores: &[ExampleScore]) -> Self {
        let n = scores.len();
        let frac = |hits: usize| if n == 0 { None } else { Some(hits as f64 / n as f64) };
        let within = |k: usize| scores.iter().filter(|s| s.truth_rank.is_some_and(|r| r <= k)).count();
        Self {
            samples: n,
            labeled: n,
            single_localize: frac(scores.iter().filter(|s| s.localized).count()),
            acc_at_1: frac(within(1)),
            acc_at_5: frac(within(5)),
            acc_at_10: frac(within(10)),
            full_repair: 0.0,
            note: None,
        }
    }

    /// Aligned two-column text.
    pub fn to_text(&self) -> String {
        let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.4}", x));
        let rows = [
            ("samples", self.samples.to_string()),
            ("labeled", self.labeled.to_string()),
            ("single_localize", show(self.single_localize)),
            ("acc@1", show(self.acc_at_1)),
            ("acc@5", show(self.acc_at_5)),
            ("acc@10", show(self.acc_at_10)),
            ("full_repair", format!("{:.4}", self.full_repair)),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<16} {v:>10}\n"));
        }
        if let Some(note) = &self.note {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

/// Localization and top-k accuracy on labeled cases (the true line is given
/// to the decoder), full repair on all cases.
pub fn evaluate(
    cases: &[EvalCase],
    model: &Model,
    compiler: &Compiler,
    config: &RepairConfig,
    parallelism: Parallelism,
) -> Result<Metrics, RepairError> {
    let width = *ACC_KS.last().expect("non-empty");
    let per_case = par::map_indexed(parallelism, cases, |_, case| -> Result<_, RepairError> {
        let source = detokenize(&case.program);
        let score = match &case.truth {
            Some(truth) => {
                let compiled = compiler.compile(&source)?;
                match compiled.first() {
                    Some(diag) => {
                        let ex = TrainingExample {
                            program: prepare_program(&case.program, diag, &model.hp)?,
                            target_line: truth.line,
                            target: truth.tokens.clone(),
                        };
                        Some(score_example(model, &ex, width)?)
                    }
                    None => Some(ExampleScore {
                        localized: false,
                        truth_rank: None,
                    }),
                }
            }
            None => None,
        };
        let (_, trace) = repair_program(&source, model, compiler, config)?;
        Ok((score, trace.final_status == RepairStatus::FullRepair))
    });
    let mut scores = Vec::new();
    let mut repaired = 0;
    for r in per_case {
        let (score, full) = r?;
        scores.extend(score);
        repaired += usize::from(full);
    }
    let mut m = if scores.is_empty() {
        Metrics {
            samples: 0,
            labeled: 0,
            single_localize: None,
            acc_at_1: None,
            acc_at_5: None,
            acc_at_10: None,
            full_repair: 0.0,
            note: Some("no ground-truth lines; only full_repair computed".to_string()),
        }
    } else {
        Metrics::from_scores(&scores)
    };
    m.samples = cases.len();
    m.full_repair = if cases.is_empty() {
        0.0
    } else {
        repaired as f64 / cases.len() as f64
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(rank: Option<usize>) -> ExampleScore {
        ExampleScore {
            localized: true,
            truth_rank: rank,
        }
    }

    #[test]
    fn half_exact_top_one() {
        let m = Metrics::from_scores(&[score(Some(1)), score(None)]);
        assert_eq!(m.acc_at_1, Some(0.5));
    }

    #[test]
    fn nesting() {
        let m = Metrics::from_scores(&[score(Some(1)), score(Some(3)), score(Some(7)), score(None)]);
        let (a1, a5, a10) = (m.acc_at(1).unwrap(), m.acc_at(5).unwrap(), m.acc_at(10).unwrap());
        assert!(a1 <= a5 && a5 <= a10);
        assert_eq!((a1, a5, a10), (0.25, 0.5, 0.75));
    }

    #[test]
    fn unlabeled_acc_errors() {
        let m = Metrics {
            samples: 3,
            labeled: 0,
            single_localize: None,
            acc_at_1: None,
            acc_at_5: None,
            acc_at_10: None,
            full_repair: 0.3,
            note: None,
        };
        assert!(matches!(m.acc_at(1), Err(RepairError::MissingGroundTruth)));
        assert!(m.to_text().contains("n/a"));
    }
}
