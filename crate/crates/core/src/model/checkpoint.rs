//! Single-file model container.
//!
//! Layout: `b"CRPK"`, a little-endian `u32` header length, a JSON header,
//! then every tensor as little-endian `f64` in row-major order.

use std::io::Write;
use std::path::Path;

use crepair_tensor::{Adam, Array2, ParamStore};
use serde::{Deserialize, Serialize};

use super::network::Model;
use super::train::Trainer;
use super::{HyperParams, ModelError, Vocabulary};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"CRPK";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub step: u64,
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct OptimState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: HyperParams,
    vocab: Vocabulary,
    rng_state: RngState,
    optimizer: Option<OptimState>,
    tensors: Vec<TensorEntry>,
}

pub struct ModelCheckpoint {
    pub model: Model,
    pub optimizer: Option<Adam>,
    pub rng_state: RngState,
}

const OPTIM_M: &str = "optim.m.";
const OPTIM_V: &str = "optim.v.";

impl ModelCheckpoint {
    pub fn from_trainer(t: &Trainer) -> Self {
        Self {
            model: t.model.clone(),
            optimizer: Some(t.optimizer.clone()),
            rng_state: RngState {
                seed: t.seed,
                step: t.step,
                epoch: t.epoch,
            },
        }
    }

    /// Restores a trainer that continues where this checkpoint stopped
    /// (loss trace excluded).
    pub fn into_trainer(self) -> Trainer {
        let mut t = Trainer::new(self.model, self.rng_state.seed);
        if let Some(opt) = self.optimizer {
            t.optimizer = opt;
        }
        t.step = self.rng_state.step;
        t.epoch = self.rng_state.epoch;
        t
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let mut named: Vec<(String, &Array2<f64>)> =
            self.model.params.iter().map(|(n, t)| (n.to_string(), t)).collect();
        if let Some(opt) = &self.optimizer {
            for ((name, _), (m, v)) in self
                .model
                .params
                .iter()
                .zip(opt.first_moment.iter().zip(&opt.second_moment))
            {
                named.push((format!("{OPTIM_M}{name}"), m));
                named.push((format!("{OPTIM_V}{name}"), v));
            }
        }
        let mut offset = 0;
        let tensors = named
            .iter()
            .map(|(name, t)| {
                let e = TensorEntry {
                    name: name.clone(),
                    rows: t.nrows(),
                    cols: t.ncols(),
                    offset,
                };
                offset += t.len();
                e
            })
            .collect();
        let header = Header {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.model.hp.clone(),
            vocab: self.model.vocab.clone(),
            rng_state: self.rng_state,
            optimizer: self.optimizer.as_ref().map(|o| OptimState {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                step: o.step,
            }),
            tensors,
        };
        let json = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(8 + json.len() + offset * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in named {
            for &x in t.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header"))?;
        let probe: serde_json::Value = serde_json::from_slice(body).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let version = probe
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| bad("missing format_version"))? as u32;
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(version));
        }
        let header: Header = serde_json::from_value(probe).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let data = &bytes[8 + hlen..];
        let read = |e: &TensorEntry| -> Result<Array2<f64>, ModelError> {
            let start = e.offset * 8;
            let end = start + e.rows * e.cols * 8;
            let raw = data.get(start..end).ok_or_else(|| bad("truncated tensor data"))?;
            let vals: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Array2::from_shape_vec((e.rows, e.cols), vals).map_err(|e| ModelError::Checkpoint(e.to_string()))
        };
        let mut params = ParamStore::new();
        let mut moments = std::collections::HashMap::new();
        for e in &header.tensors {
            if e.name.starts_with(OPTIM_M) || e.name.starts_with(OPTIM_V) {
                moments.insert(e.name.clone(), read(e)?);
            } else {
                params.insert(e.name.clone(), read(e)?);
            }
        }
        let optimizer = match header.optimizer {
            Some(o) => {
                let mut first = Vec::with_capacity(params.len());
                let mut second = Vec::with_capacity(params.len());
                for (name, _) in params.iter() {
                    first.push(
                        moments
                            .remove(&format!("{OPTIM_M}{name}"))
                            .ok_or_else(|| bad("missing optimizer moment"))?,
                    );
                    second.push(
                        moments
                            .remove(&format!("{OPTIM_V}{name}"))
                            .ok_or_else(|| bad("missing optimizer moment"))?,
                    );
                }
                Some(Adam {
                    lr: o.lr,
                    beta1: o.beta1,
                    beta2: o.beta2,
                    eps: o.eps,
                    step: o.step,
                    first_moment: first,
                    second_moment: second,
                })
            }
            None => None,
        };
        let model = Model::from_parts(header.config, header.vocab, params)?;
        Ok(Self {
            model,
            optimizer,
            rng_state: header.rng_state,
        })
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let bytes = self.to_bytes()?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&bytes)?;
        tmp.flush()?;
        tmp.persist(path).map_err(|e| ModelError::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
