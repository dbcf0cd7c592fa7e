use serde::{Deserialize, Serialize};

use super::vocab::{self, Vocabulary};
use super::{HyperParams, ModelError};
use crate::context::{analyzer, get_context_with_budget, materialize};
use crate::corrupt::BrokenProgram;
use crate::diagnostics::{CompileResult, Diagnostic, IdMap};
use crate::program::TokenizedProgram;

/// `BOS line SEP context SEP message EOS` as strings, with the line offset
/// to the reported error line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSequence {
    pub tokens: Vec<String>,
    pub offset: i64,
}

/// Every line of one program, ready for the encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedProgram {
    pub source_id: String,
    pub lines: Vec<LineSequence>,
    pub reported_line: usize,
    pub id_map: IdMap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub program: PreparedProgram,
    /// 1-based line holding the error.
    pub target_line: usize,
    /// Tokens of the repaired line.
    pub target: Vec<String>,
}

impl TrainingExample {
    /// Every string the vocabulary should count for this example.
    pub fn token_stream(&self) -> impl Iterator<Item = &str> {
        self.program
            .lines
            .iter()
            .flat_map(|l| l.tokens.iter())
            .chain(self.target.iter())
            .map(String::as_str)
    }
}

/// Builds the encoder sequences of every line for one diagnostic.
pub fn prepare_program(
    program: &TokenizedProgram,
    diagnostic: &Diagnostic,
    hp: &HyperParams,
) -> Result<PreparedProgram, ModelError> {
    let tables = analyzer(program);
    let diag = diagnostic.clone().normalized(&tables);
    let message = diag.model_tokens();
    let contexts = get_context_with_budget(program, &tables, 0);
    let mut lines = Vec::with_capacity(program.line_count());
    for (i, line) in program.numbered_lines() {
        let room = hp.max_seq_len.checked_sub(4 + line.len()).ok_or(ModelError::SequenceTooLong {
            line: i,
            len: line.len() + 4,
            max: hp.max_seq_len,
        })?;
        let msg_len = message.len().min(room);
        let ctx = materialize(program, i, &contexts[i - 1].context_lines, room - msg_len);
        let mut tokens = Vec::with_capacity(4 + line.len() + ctx.len() + msg_len);
        tokens.push(vocab::BOS_TOKEN.to_string());
        tokens.extend(line.iter().map(|t| t.text.clone()));
        tokens.push(vocab::SEP_TOKEN.to_string());
        tokens.extend(ctx.into_iter().map(|t| t.text));
        tokens.push(vocab::SEP_TOKEN.to_string());
        tokens.extend(message[..msg_len].iter().cloned());
        tokens.push(vocab::EOS_TOKEN.to_string());
        lines.push(LineSequence {
            tokens,
            offset: hp.clamp_offset(diag.reported_line as i64 - i as i64),
        });
    }
    Ok(PreparedProgram {
        source_id: program.source_id.clone(),
        lines,
        reported_line: diag.reported_line,
        id_map: diag.id_map,
    })
}

/// One example per corrupted line, each paired with the diagnostic whose
/// reported line is nearest (earliest diagnostic on ties).
pub fn examples_from_broken(
    broken: &BrokenProgram,
    compiled: &CompileResult,
    hp: &HyperParams,
) -> Result<Vec<TrainingExample>, ModelError> {
    if compiled.diagnostics.is_empty() {
        return Err(ModelError::NoDiagnostic(broken.program.source_id.clone()));
    }
    broken
        .corruptions
        .iter()
        .map(|rec| {
            let diag = compiled
                .diagnostics
                .iter()
                .min_by_key(|d| d.reported_line.abs_diff(rec.line))
                .expect("non-empty");
            Ok(TrainingExample {
                program: prepare_program(&broken.program, diag, hp)?,
                target_line: rec.line,
                target: rec.original_line.iter().map(|t| t.text.clone()).collect(),
            })
        })
        .collect()
}

/// Id form of one line sequence plus its copy table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderInput {
    pub ids: Vec<usize>,
    pub source_tokens: Vec<String>,
    pub offset: i64,
    /// Positions at or after this are padding.
    pub valid_len: usize,
    /// Extended-vocabulary id of each position.
    pub ext_ids: Vec<usize>,
    /// Out-of-vocabulary source tokens, ids `vocab.len()..`.
    pub oov: Vec<String>,
}

impl EncoderInput {
    pub fn new(seq: &LineSequence, vocab: &Vocabulary, hp: &HyperParams) -> Result<Self, ModelError> {
        if seq.tokens.len() > hp.max_seq_len {
            return Err(ModelError::SequenceTooLong {
                line: 0,
                len: seq.tokens.len(),
                max: hp.max_seq_len,
            });
        }
        let mut oov: Vec<String> = Vec::new();
        let mut ids = Vec::with_capacity(seq.tokens.len());
        let mut ext_ids = Vec::with_capacity(seq.tokens.len());
        for t in &seq.tokens {
            match vocab.get(t) {
                Some(id) => {
                    ids.push(id);
                    ext_ids.push(id);
                }
                None => {
                    ids.push(vocab::UNK);
                    let j = match oov.iter().position(|o| o == t) {
                        Some(j) => j,
                        None => {
                            oov.push(t.clone());
                            oov.len() - 1
                        }
                    };
                    ext_ids.push(vocab.len() + j);
                }
            }
        }
        Ok(Self {
            valid_len: ids.len(),
            ids,
            source_tokens: seq.tokens.clone(),
            offset: hp.clamp_offset(seq.offset),
            ext_ids,
            oov,
        })
    }

    /// Appends padding up to `len` positions.
    pub fn padded(mut self, len: usize) -> Self {
        while self.ids.len() < len {
            self.ids.push(vocab::PAD);
            self.ext_ids.push(vocab::PAD);
            self.source_tokens.push(vocab::PAD_TOKEN.to_string());
        }
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn key_mask(&self) -> Vec<bool> {
        (0..self.ids.len()).map(|i| i < self.valid_len).collect()
    }

    pub fn ext_size(&self, vocab: &Vocabulary) -> usize {
        vocab.len() + self.oov.len()
    }

    pub fn ext_id(&self, token: &str, vocab: &Vocabulary) -> Option<usize> {
        vocab
            .get(token)
            .or_else(|| self.oov.iter().position(|o| o == token).map(|j| vocab.len() + j))
    }

    pub fn ext_token<'a>(&'a self, id: usize, vocab: &'a Vocabulary) -> &'a str {
        if id < vocab.len() {
            vocab.token(id)
        } else {
            &self.oov[id - vocab.len()]
        }
    }
}

/// Training form of one example.
#[derive(Clone, Debug)]
pub struct EncodedExample {
    pub inputs: Vec<EncoderInput>,
    pub target_line: usize,
    /// `BOS` then the target tokens (out-of-vocabulary ones as `UNK`).
    pub decoder_in: Vec<usize>,
    /// Target tokens then `EOS`, in extended ids; `None` when neither
    /// generatable nor copyable.
    pub target_ext: Vec<Option<usize>>,
}

impl EncodedExample {
    pub fn new(ex: &TrainingExample, vocab: &Vocabulary, hp: &HyperParams) -> Result<Self, ModelError> {
        if ex.target.len() + 1 > hp.max_target_len {
            return Err(ModelError::TargetTooLong {
                len: ex.target.len() + 1,
                max: hp.max_target_len,
            });
        }
        let inputs = ex
            .program
            .lines
            .iter()
            .map(|l| EncoderInput::new(l, vocab, hp))
            .collect::<Result<Vec<_>, _>>()?;
        let k = &inputs[ex.target_line - 1];
        let mut decoder_in = vec![vocab::BOS];
        decoder_in.extend(ex.target.iter().map(|t| vocab.id(t)));
        let mut target_ext: Vec<Option<usize>> = ex.target.iter().map(|t| k.ext_id(t, vocab)).collect();
        target_ext.push(Some(vocab::EOS));
        Ok(Self {
            inputs,
            target_line: ex.target_line,
            decoder_in,
            target_ext,
        })
    }

    /// True when some target step can be neither generated nor copied.
    pub fn has_unreachable_target(&self) -> bool {
        self.target_ext.iter().any(Option::is_none)
    }
}
