use std::io::{BufRead, Write};

use crepair_tensor::{Adam, Gradients, Graph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::input::{EncodedExample, TrainingExample};
use super::network::{Dropout, Model};
use super::{HyperParams, ModelError, Vocabulary};
use crate::par::{self, Parallelism};
use crate::seed;

pub const LOSS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub epoch: usize,
    pub l_loc: f64,
    pub l_gen: f64,
    pub total: f64,
}

pub fn encode_examples(
    examples: &[TrainingExample],
    vocab: &Vocabulary,
    hp: &HyperParams,
) -> Result<Vec<EncodedExample>, ModelError> {
    examples.iter().map(|e| EncodedExample::new(e, vocab, hp)).collect()
}

/// Mean gradient and losses of one batch.
pub struct BatchResult {
    pub grads: Gradients,
    pub l_loc: f64,
    pub l_gen: f64,
    pub total: f64,
}

fn dropout_for(model: &Model, seed: u64, step: u64, index: usize) -> Dropout {
    if model.hp.dropout == 0.0 {
        return Dropout::off();
    }
    let s = seed::indexed_seed(seed::indexed_seed(seed::sub_seed(seed, "dropout"), step), index as u64);
    Dropout::new(model.hp.dropout, seed::Rng::seed_from_u64(s))
}

/// Per-example gradients, computed in parallel and summed in batch order so
/// the result does not depend on the execution mode.
pub fn batch_gradients(
    model: &Model,
    batch: &[&EncodedExample],
    seed: u64,
    step: u64,
    parallelism: Parallelism,
) -> BatchResult {
    let per_example = par::map_indexed(parallelism, batch, |i, ex| {
        let mut g = Graph::new(&model.params);
        let mut drop = dropout_for(model, seed, step, i);
        let loss = model.example_loss(&mut g, ex, &mut drop);
        let grads = g.backward(loss.total);
        (grads, g.scalar(loss.loc), g.scalar(loss.gen))
    });
    let mut grads = Gradients::zeros_like(&model.params);
    let (mut l_loc, mut l_gen) = (0.0, 0.0);
    for (g, loc, gen) in &per_example {
        grads.accumulate(g);
        l_loc += loc;
        l_gen += gen;
    }
    let n = batch.len().max(1) as f64;
    grads.scale(1.0 / n);
    BatchResult {
        grads,
        l_loc: l_loc / n,
        l_gen: l_gen / n,
        total: (l_loc + l_gen) / n,
    }
}

/// Model plus optimizer state and the loss trace so far.
#[derive(Clone)]
pub struct Trainer {
    pub model: Model,
    pub optimizer: Adam,
    pub seed: u64,
    pub step: u64,
    pub epoch: usize,
    pub trace: Vec<LossRecord>,
    pub parallelism: Parallelism,
}

impl Trainer {
    pub fn new(model: Model, seed: u64) -> Self {
        let optimizer = Adam::new(&model.params, model.hp.lr);
        Self {
            model,
            optimizer,
            seed,
            step: 0,
            epoch: 0,
            trace: Vec::new(),
            parallelism: Parallelism::default(),
        }
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    /// One optimizer step: mean gradient, global-norm clipping, Adam.
    pub fn train_step(&mut self, batch: &[&EncodedExample]) -> Result<LossRecord, ModelError> {
        let step = self.step + 1;
        let mut result = batch_gradients(&self.model, batch, self.seed, step, self.parallelism);
        if !result.total.is_finite() || !result.grads.is_finite() {
            return Err(ModelError::NonFiniteLoss { step });
        }
        result.grads.clip_global_norm(self.model.hp.grad_clip);
        self.optimizer.update(&mut self.model.params, &result.grads);
        self.step = step;
        let record = LossRecord {
            step,
            epoch: self.epoch,
            l_loc: result.l_loc,
            l_gen: result.l_gen,
            total: result.total,
        };
        self.trace.push(record.clone());
        Ok(record)
    }

    /// One pass over `data` in a seeded shuffled order.
    pub fn train_epoch(&mut self, data: &[EncodedExample]) -> Result<(), ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = seed::Rng::seed_from_u64(seed::indexed_seed(seed::sub_seed(self.seed, "epoch"), self.epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(self.model.hp.batch_size) {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| &data[i]).collect();
            self.train_step(&batch)?;
        }
        self.epoch += 1;
        Ok(())
    }
}

pub fn write_loss_csv<W: Write>(trace: &[LossRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# format_version: {LOSS_FORMAT_VERSION}")?;
    writeln!(out, "step,epoch,l_loc,l_gen,total")?;
    for r in trace {
        writeln!(out, "{},{},{},{},{}", r.step, r.epoch, r.l_loc, r.l_gen, r.total)?;
    }
    Ok(())
}

pub fn read_loss_csv<R: BufRead>(input: R) -> Result<Vec<LossRecord>, ModelError> {
    let bad = |m: String| ModelError::Checkpoint(m);
    let mut lines = input.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let version: u32 = first
        .strip_prefix("# format_version: ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad(format!("missing format_version line: {first:?}")))?;
    if version != LOSS_FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let _header = lines.next().transpose()?;
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("bad loss row {line:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}")));
        out.push(LossRecord {
            step: f[0].parse().map_err(|e| bad(format!("{}: {e}", f[0])))?,
            epoch: f[1].parse().map_err(|e| bad(format!("{}: {e}", f[1])))?,
            l_loc: num(f[2])?,
            l_gen: num(f[3])?,
            total: num(f[4])?,
        });
    }
    Ok(out)
}
