use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    /// Line offsets are clamped to `[-offset_radius, offset_radius]`.
    pub offset_radius: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub grad_clip: f64,
    pub max_seq_len: usize,
    pub max_target_len: usize,
    pub layer_norm_eps: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::desk()
    }
}

impl HyperParams {
    /// Full-size settings: 5 layers, 8 heads, width 256.
    pub fn full() -> Self {
        Self {
            layers: 5,
            heads: 8,
            model_dim: 256,
            ffn_dim: 1024,
            offset_radius: 50,
            lr: 1e-4,
            batch_size: 25,
            dropout: 0.1,
            grad_clip: 10.0,
            max_seq_len: 256,
            max_target_len: 128,
            layer_norm_eps: 1e-5,
        }
    }

    /// CPU-sized settings used by default.
    pub fn desk() -> Self {
        Self {
            layers: 2,
            heads: 4,
            model_dim: 64,
            ffn_dim: 128,
            offset_radius: 50,
            lr: 1e-3,
            batch_size: 25,
            dropout: 0.0,
            grad_clip: 10.0,
            max_seq_len: 96,
            max_target_len: 48,
            layer_norm_eps: 1e-5,
        }
    }

    /// Smallest configuration, for finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            layers: 1,
            heads: 1,
            model_dim: 16,
            ffn_dim: 32,
            offset_radius: 4,
            lr: 1e-3,
            batch_size: 4,
            dropout: 0.0,
            grad_clip: 10.0,
            max_seq_len: 40,
            max_target_len: 16,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.layers == 0 || self.heads == 0 || self.model_dim == 0 || self.ffn_dim == 0 {
            return bad("layers, heads, model_dim and ffn_dim must be positive".into());
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return bad(format!("model_dim {} not divisible by heads {}", self.model_dim, self.heads));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.batch_size == 0 || self.max_seq_len < 8 || self.max_target_len < 2 {
            return bad("batch_size, max_seq_len or max_target_len too small".into());
        }
        if !(self.lr > 0.0 && self.grad_clip > 0.0) {
            return bad("lr and grad_clip must be positive".into());
        }
        Ok(())
    }

    pub fn offset_slots(&self) -> usize {
        2 * self.offset_radius + 1
    }

    pub fn clamp_offset(&self, offset: i64) -> i64 {
        let r = self.offset_radius as i64;
        offset.clamp(-r, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for hp in [HyperParams::full(), HyperParams::desk(), HyperParams::tiny()] {
            hp.validate().unwrap();
        }
        let hp = HyperParams { heads: 3, ..HyperParams::desk() };
        assert!(hp.validate().is_err());
    }

    #[test]
    fn offset_clamp() {
        let hp = HyperParams::full();
        assert_eq!(hp.clamp_offset(-80), -50);
        assert_eq!(hp.clamp_offset(7), 7);
        assert_eq!(hp.offset_slots(), 101);
    }
}
