use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters of the encoder–decoder. Encoder and decoder
/// have the same depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub layers: usize,
    pub embed_dim: usize,
    pub ffn_dim: usize,
    pub heads: usize,
    pub dropout_rate: f64,
    pub label_smoothing: f64,
    /// Longest source sequence, and longest target sequence counting EOS.
    pub max_len: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            layers: 3,
            embed_dim: 512,
            ffn_dim: 2048,
            heads: 8,
            dropout_rate: 0.3,
            label_smoothing: 0.1,
            max_len: 128,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.layers == 0 || self.embed_dim == 0 || self.ffn_dim == 0 || self.heads == 0 || self.max_len == 0 {
            return err("all model dimensions must be positive".into());
        }
        if self.embed_dim % self.heads != 0 {
            return err(format!(
                "embed_dim {} is not divisible by heads {}",
                self.embed_dim, self.heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return err(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return err(format!("label_smoothing {} outside [0, 1)", self.label_smoothing));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TransformerConfig::default();
        assert_eq!((c.embed_dim, c.ffn_dim, c.heads), (512, 2048, 8));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_dimensions() {
        let c = TransformerConfig { embed_dim: 10, heads: 8, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TransformerConfig { layers: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TransformerConfig { dropout_rate: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
