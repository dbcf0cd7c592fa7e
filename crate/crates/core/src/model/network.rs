use crepair_tensor::{Array2, AttnSegment, AttnSpec, Graph, ParamId, ParamStore, Var};
use rand::Rng;

use super::input::{EncodedExample, EncoderInput};
use super::vocab::{self, Vocabulary};
use super::{HyperParams, ModelError};
use crate::seed;

/// Probability added to target steps that can be neither generated nor
/// copied, so their log stays finite.
pub const UNREACHABLE_FLOOR: f64 = 1e-10;

struct AttnIds {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
}

struct NormIds {
    gamma: ParamId,
    beta: ParamId,
}

struct FfnIds {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

struct EncLayer {
    attn: AttnIds,
    norm1: NormIds,
    ffn: FfnIds,
    norm2: NormIds,
}

struct DecLayer {
    self_attn: AttnIds,
    norm1: NormIds,
    cross: AttnIds,
    norm2: NormIds,
    ffn: FfnIds,
    norm3: NormIds,
}

struct Ids {
    token_emb: ParamId,
    offset_emb: ParamId,
    enc: Vec<EncLayer>,
    loc_w1: ParamId,
    loc_b1: ParamId,
    loc_w2: ParamId,
    loc_b2: ParamId,
    dec: Vec<DecLayer>,
    ptr_v: ParamId,
    ptr_b: ParamId,
    ptr_v_out: ParamId,
    ptr_b_out: ParamId,
    w_h: ParamId,
    w_s: ParamId,
    w_x: ParamId,
    b_ptr: ParamId,
}

/// Builds or resolves parameters by name so a loaded store maps onto the
/// same handles.
trait Slots {
    fn weight(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError>;
    fn normal(&mut self, name: String, rows: usize, cols: usize, std: f64) -> Result<ParamId, ModelError>;
    fn zeros(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError>;
    fn ones(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError>;
}

struct Init<'a, R: Rng> {
    store: &'a mut ParamStore,
    rng: R,
}

impl<R: Rng> Slots for Init<'_, R> {
    fn weight(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError> {
        Ok(self.store.insert_xavier(name, rows, cols, &mut self.rng))
    }
    fn normal(&mut self, name: String, rows: usize, cols: usize, std: f64) -> Result<ParamId, ModelError> {
        Ok(self.store.insert_normal(name, rows, cols, std, &mut self.rng))
    }
    fn zeros(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError> {
        Ok(self.store.insert_zeros(name, rows, cols))
    }
    fn ones(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError> {
        Ok(self.store.insert_ones(name, rows, cols))
    }
}

struct Resolve<'a>(&'a ParamStore);

impl Resolve<'_> {
    fn find(&self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError> {
        let id = self.0.id(&name)?;
        let shape = self.0.get(id).dim();
        if shape != (rows, cols) {
            return Err(ModelError::Checkpoint(format!(
                "tensor {name} has shape {shape:?}, expected ({rows}, {cols})"
            )));
        }
        Ok(id)
    }
}

impl Slots for Resolve<'_> {
    fn weight(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError> {
        self.find(name, rows, cols)
    }
    fn normal(&mut self, name: String, rows: usize, cols: usize, _std: f64) -> Result<ParamId, ModelError> {
        self.find(name, rows, cols)
    }
    fn zeros(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError> {
        self.find(name, rows, cols)
    }
    fn ones(&mut self, name: String, rows: usize, cols: usize) -> Result<ParamId, ModelError> {
        self.find(name, rows, cols)
    }
}

fn attn_ids(s: &mut dyn Slots, prefix: &str, d: usize) -> Result<AttnIds, ModelError> {
    Ok(AttnIds {
        wq: s.weight(format!("{prefix}.wq"), d, d)?,
        bq: s.zeros(format!("{prefix}.bq"), 1, d)?,
        wk: s.weight(format!("{prefix}.wk"), d, d)?,
        bk: s.zeros(format!("{prefix}.bk"), 1, d)?,
        wv: s.weight(format!("{prefix}.wv"), d, d)?,
        bv: s.zeros(format!("{prefix}.bv"), 1, d)?,
        wo: s.weight(format!("{prefix}.wo"), d, d)?,
        bo: s.zeros(format!("{prefix}.bo"), 1, d)?,
    })
}

fn norm_ids(s: &mut dyn Slots, prefix: &str, d: usize) -> Result<NormIds, ModelError> {
    Ok(NormIds {
        gamma: s.ones(format!("{prefix}.gamma"), 1, d)?,
        beta: s.zeros(format!("{prefix}.beta"), 1, d)?,
    })
}

fn ffn_ids(s: &mut dyn Slots, prefix: &str, d: usize, hidden: usize) -> Result<FfnIds, ModelError> {
    Ok(FfnIds {
        w1: s.weight(format!("{prefix}.w1"), d, hidden)?,
        b1: s.zeros(format!("{prefix}.b1"), 1, hidden)?,
        w2: s.weight(format!("{prefix}.w2"), hidden, d)?,
        b2: s.zeros(format!("{prefix}.b2"), 1, d)?,
    })
}

fn layout(s: &mut dyn Slots, hp: &HyperParams, vocab_len: usize) -> Result<Ids, ModelError> {
    let d = hp.model_dim;
    let token_emb = s.normal("embed.token".into(), vocab_len, d, 1.0)?;
    let offset_emb = s.normal("embed.offset".into(), hp.offset_slots(), d, 1.0)?;
    let mut enc = Vec::with_capacity(hp.layers);
    for l in 0..hp.layers {
        enc.push(EncLayer {
            attn: attn_ids(s, &format!("enc.{l}.attn"), d)?,
            norm1: norm_ids(s, &format!("enc.{l}.norm1"), d)?,
            ffn: ffn_ids(s, &format!("enc.{l}.ffn"), d, hp.ffn_dim)?,
            norm2: norm_ids(s, &format!("enc.{l}.norm2"), d)?,
        });
    }
    let loc_w1 = s.weight("loc.w1".into(), d, d)?;
    let loc_b1 = s.zeros("loc.b1".into(), 1, d)?;
    let loc_w2 = s.weight("loc.w2".into(), d, 1)?;
    let loc_b2 = s.zeros("loc.b2".into(), 1, 1)?;
    let mut dec = Vec::with_capacity(hp.layers);
    for l in 0..hp.layers {
        dec.push(DecLayer {
            self_attn: attn_ids(s, &format!("dec.{l}.self"), d)?,
            norm1: norm_ids(s, &format!("dec.{l}.norm1"), d)?,
            cross: attn_ids(s, &format!("dec.{l}.cross"), d)?,
            norm2: norm_ids(s, &format!("dec.{l}.norm2"), d)?,
            ffn: ffn_ids(s, &format!("dec.{l}.ffn"), d, hp.ffn_dim)?,
            norm3: norm_ids(s, &format!("dec.{l}.norm3"), d)?,
        });
    }
    Ok(Ids {
        token_emb,
        offset_emb,
        enc,
        loc_w1,
        loc_b1,
        loc_w2,
        loc_b2,
        dec,
        ptr_v: s.weight("ptr.v".into(), 2 * d, d)?,
        ptr_b: s.zeros("ptr.b".into(), 1, d)?,
        ptr_v_out: s.weight("ptr.v_out".into(), d, vocab_len)?,
        ptr_b_out: s.zeros("ptr.b_out".into(), 1, vocab_len)?,
        w_h: s.weight("ptr.w_h".into(), d, 1)?,
        w_s: s.weight("ptr.w_s".into(), d, 1)?,
        w_x: s.weight("ptr.w_x".into(), d, 1)?,
        b_ptr: s.zeros("ptr.b_ptr".into(), 1, 1)?,
    })
}

/// Standard sinusoidal position table, `len×d`.
pub fn sinusoid(len: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, d), |(pos, i)| {
        let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let angle = pos as f64 * rate;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Encoder output for a batch of line sequences stacked row-wise.
pub struct Encoded {
    pub states: Var,
    /// `(first row, rows)` of every line.
    pub spans: Vec<(usize, usize)>,
}

/// Decoder tensors of one teacher-forced pass.
pub struct Decoded {
    /// Pointer attention over source positions, `T×m`.
    pub attention: Var,
    pub p_vocab: Var,
    /// `T×1`.
    pub p_gen: Var,
    /// Mixture over the extended vocabulary, `T×E`.
    pub p_ext: Var,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DecodeOptions {
    /// Replaces the learned generation probability.
    pub force_p_gen: Option<f64>,
}

pub struct LossVars {
    pub total: Var,
    pub loc: Var,
    pub gen: Var,
}

/// Plain-value probe of one decoder pass.
#[derive(Clone, Debug)]
pub struct DecodeProbe {
    pub attention: Array2<f64>,
    pub p_vocab: Array2<f64>,
    pub p_gen: Vec<f64>,
    pub p_ext: Array2<f64>,
}

pub struct Model {
    pub hp: HyperParams,
    pub vocab: Vocabulary,
    pub params: ParamStore,
    ids: Ids,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self::from_parts(self.hp.clone(), self.vocab.clone(), self.params.clone()).expect("same layout")
    }
}

impl Model {
    pub fn new(hp: HyperParams, vocab: Vocabulary, seed: u64) -> Result<Self, ModelError> {
        hp.validate()?;
        let mut params = ParamStore::new();
        let ids = layout(
            &mut Init {
                store: &mut params,
                rng: seed::rng_for(seed, "init"),
            },
            &hp,
            vocab.len(),
        )?;
        Ok(Self { hp, vocab, params, ids })
    }

    /// Wraps an existing parameter store; every expected tensor must be
    /// present with the right shape.
    pub fn from_parts(hp: HyperParams, vocab: Vocabulary, params: ParamStore) -> Result<Self, ModelError> {
        hp.validate()?;
        let ids = layout(&mut Resolve(&params), &hp, vocab.len())?;
        if params.len() != count_tensors(&hp) {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                count_tensors(&hp),
                params.len()
            )));
        }
        Ok(Self { hp, vocab, params, ids })
    }

    fn attention_block(
        &self,
        g: &mut Graph,
        xq: Var,
        xkv: Var,
        ids: &AttnIds,
        spec: AttnSpec,
    ) -> Var {
        let (wq, bq, wk, bk, wv, bv, wo, bo) = (
            g.param(ids.wq),
            g.param(ids.bq),
            g.param(ids.wk),
            g.param(ids.bk),
            g.param(ids.wv),
            g.param(ids.bv),
            g.param(ids.wo),
            g.param(ids.bo),
        );
        let q = g.matmul(xq, wq);
        let q = g.add_row(q, bq);
        let k = g.matmul(xkv, wk);
        let k = g.add_row(k, bk);
        let v = g.matmul(xkv, wv);
        let v = g.add_row(v, bv);
        let o = g.attention(q, k, v, spec);
        let o = g.matmul(o, wo);
        g.add_row(o, bo)
    }

    fn ffn(&self, g: &mut Graph, x: Var, ids: &FfnIds) -> Var {
        let (w1, b1, w2, b2) = (g.param(ids.w1), g.param(ids.b1), g.param(ids.w2), g.param(ids.b2));
        let h = g.matmul(x, w1);
        let h = g.add_row(h, b1);
        let h = g.gelu(h);
        let o = g.matmul(h, w2);
        g.add_row(o, b2)
    }

    fn residual_norm(&self, g: &mut Graph, x: Var, sub: Var, ids: &NormIds, drop: &mut Dropout) -> Var {
        let sub = drop.apply(g, sub);
        let sum = g.add(x, sub);
        let (gamma, beta) = (g.param(ids.gamma), g.param(ids.beta));
        g.layer_norm(sum, gamma, beta, self.hp.layer_norm_eps)
    }

    /// Encodes line sequences as independent attention segments of one
    /// stacked matrix.
    pub fn encode(&self, g: &mut Graph, inputs: &[EncoderInput], drop: &mut Dropout) -> Encoded {
        let d = self.hp.model_dim;
        let total: usize = inputs.iter().map(EncoderInput::len).sum();
        let mut ids = Vec::with_capacity(total);
        let mut offsets = Vec::with_capacity(total);
        let mut mask = Vec::with_capacity(total);
        let mut pos = Array2::zeros((total, d));
        let mut spans = Vec::with_capacity(inputs.len());
        let longest = inputs.iter().map(EncoderInput::len).max().unwrap_or(0);
        let table = sinusoid(longest, d);
        let mut start = 0;
        for input in inputs {
            let slot = (input.offset + self.hp.offset_radius as i64) as usize;
            ids.extend_from_slice(&input.ids);
            offsets.extend(std::iter::repeat_n(slot, input.len()));
            mask.extend(input.key_mask());
            pos.slice_mut(ndarray::s![start..start + input.len(), ..])
                .assign(&table.slice(ndarray::s![..input.len(), ..]));
            spans.push((start, input.len()));
            start += input.len();
        }
        let tok = g.param(self.ids.token_emb);
        let off = g.param(self.ids.offset_emb);
        let x = g.embedding(tok, &ids);
        let o = g.embedding(off, &offsets);
        let x = g.add(x, o);
        let p = g.constant(pos);
        let mut x = g.add(x, p);
        x = drop.apply(g, x);
        let segments: Vec<AttnSegment> = spans.iter().map(|&(s, l)| AttnSegment::square(s, l)).collect();
        for layer in &self.ids.enc {
            let spec = AttnSpec {
                heads: self.hp.heads,
                segments: segments.clone(),
                causal: false,
                key_mask: Some(mask.clone()),
            };
            let a = self.attention_block(g, x, x, &layer.attn, spec);
            x = self.residual_norm(g, x, a, &layer.norm1, drop);
            let f = self.ffn(g, x, &layer.ffn);
            x = self.residual_norm(g, x, f, &layer.norm2, drop);
        }
        Encoded { states: x, spans }
    }

    /// One localization logit per line, as a `1×n` row.
    pub fn localize(&self, g: &mut Graph, enc: &Encoded) -> Var {
        let starts: Vec<usize> = enc.spans.iter().map(|&(s, _)| s).collect();
        let h = g.select_rows(enc.states, &starts);
        let (w1, b1, w2, b2) = (
            g.param(self.ids.loc_w1),
            g.param(self.ids.loc_b1),
            g.param(self.ids.loc_w2),
            g.param(self.ids.loc_b2),
        );
        let z = g.matmul(h, w1);
        let z = g.add_row(z, b1);
        let z = g.tanh(z);
        let z = g.matmul(z, w2);
        let z = g.add_row(z, b2);
        g.transpose(z)
    }

    /// Teacher-forced decoder pass over `decoder_in` against the states of
    /// one encoded line.
    pub fn decode(
        &self,
        g: &mut Graph,
        states: Var,
        input: &EncoderInput,
        decoder_in: &[usize],
        options: DecodeOptions,
        drop: &mut Dropout,
    ) -> Decoded {
        let d = self.hp.model_dim;
        let t = decoder_in.len();
        let m = input.len();
        let key_mask = input.key_mask();
        let tok = g.param(self.ids.token_emb);
        let x_emb = g.embedding(tok, decoder_in);
        let p = g.constant(sinusoid(t, d));
        let mut y = g.add(x_emb, p);
        y = drop.apply(g, y);
        for layer in &self.ids.dec {
            let self_spec = AttnSpec {
                heads: self.hp.heads,
                segments: vec![AttnSegment::square(0, t)],
                causal: true,
                key_mask: None,
            };
            let a = self.attention_block(g, y, y, &layer.self_attn, self_spec);
            y = self.residual_norm(g, y, a, &layer.norm1, drop);
            let cross_spec = AttnSpec {
                heads: self.hp.heads,
                segments: vec![AttnSegment {
                    q_start: 0,
                    q_len: t,
                    k_start: 0,
                    k_len: m,
                }],
                causal: false,
                key_mask: Some(key_mask.clone()),
            };
            let c = self.attention_block(g, y, states, &layer.cross, cross_spec);
            y = self.residual_norm(g, y, c, &layer.norm2, drop);
            let f = self.ffn(g, y, &layer.ffn);
            y = self.residual_norm(g, y, f, &layer.norm3, drop);
        }
        let s = y;

        // pointer attention and context vector
        let scores = g.matmul_t(s, states);
        let scores = g.scale(scores, 1.0 / (d as f64).sqrt());
        let mask = Array2::from_shape_fn((t, m), |(_, j)| key_mask[j]);
        let attention = g.masked_softmax_rows(scores, &mask);
        let context = g.matmul(attention, states);

        // vocabulary distribution
        let sc = g.concat_cols(&[s, context]);
        let (v, b, v_out, b_out) = (
            g.param(self.ids.ptr_v),
            g.param(self.ids.ptr_b),
            g.param(self.ids.ptr_v_out),
            g.param(self.ids.ptr_b_out),
        );
        let hidden = g.matmul(sc, v);
        let hidden = g.add_row(hidden, b);
        let logits = g.matmul(hidden, v_out);
        let logits = g.add_row(logits, b_out);
        let p_vocab = g.softmax_rows(logits);

        // generation probability
        let p_gen = match options.force_p_gen {
            Some(value) => g.constant(Array2::from_elem((t, 1), value)),
            None => {
                let (w_h, w_s, w_x, b_ptr) = (
                    g.param(self.ids.w_h),
                    g.param(self.ids.w_s),
                    g.param(self.ids.w_x),
                    g.param(self.ids.b_ptr),
                );
                let zh = g.matmul(context, w_h);
                let zs = g.matmul(s, w_s);
                let zx = g.matmul(x_emb, w_x);
                let z = g.add(zh, zs);
                let z = g.add(z, zx);
                let z = g.add_row(z, b_ptr);
                g.sigmoid(z)
            }
        };

        // mixture over the extended vocabulary
        let vlen = self.vocab.len();
        let ext = input.ext_size(&self.vocab);
        let mut scatter = Array2::zeros((m, ext));
        for (j, &e) in input.ext_ids.iter().enumerate() {
            scatter[[j, e]] = 1.0;
        }
        let scatter = g.constant(scatter);
        let copy = g.matmul(attention, scatter);
        let gen = if ext > vlen {
            let z = g.constant(Array2::zeros((t, ext - vlen)));
            g.concat_cols(&[p_vocab, z])
        } else {
            p_vocab
        };
        let ones = g.constant(Array2::ones((1, ext)));
        let gate = g.matmul(p_gen, ones);
        let not_gate = g.one_minus(gate);
        let gen_part = g.mul(gate, gen);
        let copy_part = g.mul(not_gate, copy);
        let p_ext = g.add(gen_part, copy_part);
        Decoded {
            attention,
            p_vocab,
            p_gen,
            p_ext,
        }
    }

    /// Joint localization and generation loss of one example.
    pub fn example_loss(&self, g: &mut Graph, ex: &EncodedExample, drop: &mut Dropout) -> LossVars {
        let enc = self.encode(g, &ex.inputs, drop);
        let logits = self.localize(g, &enc);
        let log_p = g.log_softmax_rows(logits);
        let picked = g.gather_per_row(log_p, &[Some(ex.target_line - 1)]);
        let loc = g.scale(picked, -1.0);

        let (start, len) = enc.spans[ex.target_line - 1];
        let states = g.slice_rows(enc.states, start, len);
        let dec = self.decode(
            g,
            states,
            &ex.inputs[ex.target_line - 1],
            &ex.decoder_in,
            DecodeOptions::default(),
            drop,
        );
        let p = g.gather_per_row(dec.p_ext, &ex.target_ext);
        let floor = Array2::from_shape_fn((ex.target_ext.len(), 1), |(r, _)| {
            if ex.target_ext[r].is_none() {
                UNREACHABLE_FLOOR
            } else {
                0.0
            }
        });
        let floor = g.constant(floor);
        let p = g.add(p, floor);
        let lp = g.ln(p);
        let mean = g.mean_all(lp);
        let gen = g.scale(mean, -1.0);
        let total = g.add(loc, gen);
        LossVars { total, loc, gen }
    }

    /// Loss values without dropout.
    pub fn loss_values(&self, ex: &EncodedExample) -> (f64, f64, f64) {
        let mut g = Graph::new(&self.params);
        let l = self.example_loss(&mut g, ex, &mut Dropout::off());
        (g.scalar(l.total), g.scalar(l.loc), g.scalar(l.gen))
    }

    /// Line probabilities from the localizer.
    pub fn line_probabilities(&self, inputs: &[EncoderInput]) -> Vec<f64> {
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, inputs, &mut Dropout::off());
        let logits = self.localize(&mut g, &enc);
        let p = g.softmax_rows(logits);
        g.value(p).iter().copied().collect()
    }

    /// Raw localizer logits.
    pub fn line_logits(&self, inputs: &[EncoderInput]) -> Vec<f64> {
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, inputs, &mut Dropout::off());
        let logits = self.localize(&mut g, &enc);
        g.value(logits).iter().copied().collect()
    }

    /// Encoder states of every line, as plain matrices.
    pub fn encode_values(&self, inputs: &[EncoderInput]) -> Vec<Array2<f64>> {
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, inputs, &mut Dropout::off());
        let all = g.value(enc.states);
        enc.spans
            .iter()
            .map(|&(s, l)| all.slice(ndarray::s![s..s + l, ..]).to_owned())
            .collect()
    }

    /// Decoder pass on precomputed states of one line.
    pub fn probe_decoder(
        &self,
        states: &Array2<f64>,
        input: &EncoderInput,
        decoder_in: &[usize],
        options: DecodeOptions,
    ) -> DecodeProbe {
        let mut g = Graph::new(&self.params);
        let s = g.constant(states.clone());
        let dec = self.decode(&mut g, s, input, decoder_in, options, &mut Dropout::off());
        DecodeProbe {
            attention: g.value(dec.attention).clone(),
            p_vocab: g.value(dec.p_vocab).clone(),
            p_gen: g.value(dec.p_gen).iter().copied().collect(),
            p_ext: g.value(dec.p_ext).clone(),
        }
    }

    /// Next-token distribution over the extended vocabulary after `prefix`
    /// (extended ids, without the leading `BOS`).
    pub fn next_token_probs(&self, states: &Array2<f64>, input: &EncoderInput, prefix: &[usize]) -> Vec<f64> {
        let mut decoder_in = Vec::with_capacity(prefix.len() + 1);
        decoder_in.push(vocab::BOS);
        decoder_in.extend(prefix.iter().map(|&id| if id < self.vocab.len() { id } else { vocab::UNK }));
        let probe = self.probe_decoder(states, input, &decoder_in, DecodeOptions::default());
        probe.p_ext.row(decoder_in.len() - 1).to_vec()
    }
}

fn count_tensors(hp: &HyperParams) -> usize {
    2 + hp.layers * (8 + 2 + 4 + 2) + 4 + hp.layers * (8 + 2 + 8 + 2 + 4 + 2) + 8
}

/// Inverted dropout driven by a seeded stream; a no-op when off.
pub struct Dropout {
    rate: f64,
    rng: Option<seed::Rng>,
}

impl Dropout {
    pub fn off() -> Self {
        Self { rate: 0.0, rng: None }
    }

    pub fn new(rate: f64, rng: seed::Rng) -> Self {
        Self { rate, rng: Some(rng) }
    }

    fn apply(&mut self, g: &mut Graph, x: Var) -> Var {
        let Some(rng) = self.rng.as_mut().filter(|_| self.rate > 0.0) else {
            return x;
        };
        let keep = 1.0 - self.rate;
        let (r, c) = g.shape(x);
        let mask = Array2::from_shape_fn((r, c), |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
        g.mul_const(x, mask)
    }
}
