use crepair_tensor::Array2;
use serde::{Deserialize, Serialize};

use super::beam::{beam_search, StepModel};
use super::RepairError;
use crate::diagnostics::{is_placeholder, CompileResult, Compiler, IdMap};
use crate::model::vocab::{self, Vocabulary};
use crate::model::{prepare_program, EncoderInput, Model};
use crate::par::{self, Parallelism};
use crate::program::{detokenize, reclassify, tokenize, Token, TokenizedProgram};

/// Decoder for one encoded line, as a [`StepModel`] over the extended
/// vocabulary of that line.
pub struct LineDecoder<'a> {
    pub model: &'a Model,
    pub states: Array2<f64>,
    pub input: &'a EncoderInput,
}

impl StepModel for LineDecoder<'_> {
    fn vocab_size(&self) -> usize {
        self.input.ext_size(&self.model.vocab)
    }

    fn eos(&self) -> usize {
        vocab::EOS
    }

    fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        self.model
            .next_token_probs(&self.states, self.input, prefix)
            .into_iter()
            .map(f64::ln)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairCandidate {
    pub line: usize,
    pub tokens: Vec<String>,
    pub log_prob: f64,
    /// 1-based.
    pub rank: usize,
}

fn is_special(token: &str) -> bool {
    matches!(
        token,
        vocab::PAD_TOKEN | vocab::UNK_TOKEN | vocab::BOS_TOKEN | vocab::SEP_TOKEN | vocab::EOS_TOKEN
    )
}

/// Beam-decodes replacements for `line`. Hypotheses containing reserved
/// symbols or placeholders missing from `id_map` are dropped.
pub fn beam_decode(
    model: &Model,
    states: Array2<f64>,
    input: &EncoderInput,
    id_map: &IdMap,
    line: usize,
    beam_width: usize,
) -> Vec<RepairCandidate> {
    let decoder = LineDecoder { model, states, input };
    let vocab: &Vocabulary = &model.vocab;
    let mut out = Vec::new();
    for h in beam_search(&decoder, beam_width, model.hp.max_target_len) {
        let mut tokens = Vec::with_capacity(h.body().len());
        let mut valid = true;
        for &id in h.body() {
            let t = input.ext_token(id, vocab);
            if is_special(t) {
                valid = false;
                break;
            }
            if is_placeholder(t) {
                match id_map.get(t) {
                    Some(orig) => tokens.push(orig.to_string()),
                    None => {
                        valid = false;
                        break;
                    }
                }
            } else {
                tokens.push(t.to_string());
            }
        }
        if valid {
            out.push(RepairCandidate {
                line,
                tokens,
                log_prob: h.log_prob,
                rank: out.len() + 1,
            });
        }
    }
    out
}

/// Line numbers by descending localizer probability (lower line on ties).
pub fn rank_lines(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order.into_iter().map(|i| i + 1).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairConfig {
    pub beam_width: usize,
    pub max_iters: usize,
    pub max_line_attempts: usize,
    /// Candidate recompiles run concurrently when parallel.
    pub parallelism: Parallelism,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            beam_width: 5,
            max_iters: 5,
            max_line_attempts: 3,
            parallelism: Parallelism::Sequential,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepairStatus {
    FullRepair,
    Improved,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub input_error_count: usize,
    pub reported_line: usize,
    pub predicted_line: usize,
    pub lines_tried: Vec<usize>,
    pub chosen: Option<RepairCandidate>,
    pub output_error_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub iterations: Vec<IterationRecord>,
    pub final_status: RepairStatus,
    pub iteration_count: usize,
    pub initial_error_count: usize,
    pub final_error_count: usize,
    /// Iterations where the localizer disagreed with the reported line.
    pub localizer_disagreements: usize,
}

impl RepairTrace {
    /// Error counts strictly fall across accepted iterations.
    pub fn is_monotone(&self) -> bool {
        self.iterations
            .iter()
            .filter(|i| i.chosen.is_some())
            .all(|i| i.output_error_count < i.input_error_count)
    }
}

fn splice(program: &TokenizedProgram, line: usize, tokens: &[String]) -> Option<TokenizedProgram> {
    let text = tokens.join(" ");
    let lexed = tokenize("candidate", &text).ok()?;
    let new_line: Vec<Token> = match lexed.line_count() {
        0 => Vec::new(),
        1 => lexed.lines.into_iter().next().expect("one line"),
        _ => return None,
    };
    let mut out = program.clone();
    *out.line_mut(line) = new_line;
    reclassify(&mut out);
    Some(out)
}

fn error_count(r: &CompileResult) -> usize {
    if r.success {
        0
    } else {
        r.error_count.max(1)
    }
}

/// Iteratively repairs `source`. A program that already compiles is
/// returned unchanged with zero iterations.
pub fn repair_program(
    source: &str,
    model: &Model,
    compiler: &Compiler,
    config: &RepairConfig,
) -> Result<(String, RepairTrace), RepairError> {
    if compiler.compile(source)?.success {
        return Ok((
            source.to_string(),
            RepairTrace {
                iterations: Vec::new(),
                final_status: RepairStatus::FullRepair,
                iteration_count: 0,
                initial_error_count: 0,
                final_error_count: 0,
                localizer_disagreements: 0,
            },
        ));
    }
    let mut program = tokenize("input", source)?;
    let mut current = compiler.compile(&detokenize(&program))?;
    let initial = error_count(&current);
    let mut iterations = Vec::new();
    let mut disagreements = 0;

    while iterations.len() < config.max_iters && error_count(&current) > 0 {
        let Some(diag) = current.first().cloned() else {
            break;
        };
        let count = error_count(&current);
        let prepared = prepare_program(&program, &diag, &model.hp)?;
        let inputs = prepared
            .lines
            .iter()
            .map(|l| EncoderInput::new(l, &model.vocab, &model.hp))
            .collect::<Result<Vec<_>, _>>()?;
        let states = model.encode_values(&inputs);
        let ranked = rank_lines(&model.line_probabilities(&inputs));
        let predicted = ranked[0];
        if predicted != diag.reported_line {
            disagreements += 1;
        }

        let mut record = IterationRecord {
            input_error_count: count,
            reported_line: diag.reported_line,
            predicted_line: predicted,
            lines_tried: Vec::new(),
            chosen: None,
            output_error_count: count,
        };
        'lines: for &line in ranked.iter().take(config.max_line_attempts) {
            record.lines_tried.push(line);
            let candidates = beam_decode(
                model,
                states[line - 1].clone(),
                &inputs[line - 1],
                &prepared.id_map,
                line,
                config.beam_width,
            );
            let unchanged: Vec<String> = program.line(line).iter().map(|t| t.text.clone()).collect();
            let spliced: Vec<(RepairCandidate, TokenizedProgram)> = candidates
                .into_iter()
                .filter(|c| c.tokens != unchanged)
                .filter_map(|c| splice(&program, line, &c.tokens).map(|p| (c, p)))
                .collect();
            let accept = |result: &CompileResult| {
                let n = error_count(result);
                n == 0 || n < count
            };
            match config.parallelism.effective() {
                Parallelism::Sequential => {
                    for (cand, next) in spliced {
                        let result = compiler.compile(&detokenize(&next))?;
                        if accept(&result) {
                            record.output_error_count = error_count(&result);
                            record.chosen = Some(cand);
                            program = next;
                            current = result;
                            break 'lines;
                        }
                    }
                }
                Parallelism::Parallel => {
                    let results = par::map_indexed(config.parallelism, &spliced, |_, (_, next)| {
                        compiler.compile(&detokenize(next))
                    });
                    for ((cand, next), result) in spliced.into_iter().zip(results) {
                        let result = result?;
                        if accept(&result) {
                            record.output_error_count = error_count(&result);
                            record.chosen = Some(cand);
                            program = next;
                            current = result;
                            break 'lines;
                        }
                    }
                }
            }
        }
        let accepted = record.chosen.is_some();
        iterations.push(record);
        if !accepted {
            break;
        }
    }

    let final_count = error_count(&current);
    let final_status = if final_count == 0 {
        RepairStatus::FullRepair
    } else if final_count < initial {
        RepairStatus::Improved
    } else {
        RepairStatus::Failed
    };
    let out = detokenize(&program);
    Ok((
        out,
        RepairTrace {
            iteration_count: iterations.len(),
            iterations,
            final_status,
            initial_error_count: initial,
            final_error_count: final_count,
            localizer_disagreements: disagreements,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::line_text;

    #[test]
    fn ranking_breaks_ties_low() {
        assert_eq!(rank_lines(&[0.2, 0.4, 0.4]), vec![2, 3, 1]);
    }

    #[test]
    fn splice_replaces_one_line() {
        let p = tokenize("p", "int main ( ) {\nint a = 1\nreturn a ;\n}").unwrap();
        let fixed = splice(&p, 2, &["int", "a", "=", "1", ";"].map(String::from)).unwrap();
        assert_eq!(line_text(fixed.line(2)), "int a = 1 ;");
        assert_eq!(fixed.line(3), p.line(3));
        assert!(splice(&p, 2, &["\"open".to_string()]).is_none());
    }
}
