//! Training configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelDims, Variant};

/// Full training recipe. The JSON form uses exactly these field names;
/// unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub variant: Variant,
    pub input_steps: usize,
    pub output_steps: usize,
    pub adjacency_dim: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub gradient_clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Sgru,
            input_steps: 12,
            output_steps: 12,
            adjacency_dim: 2,
            embed_dim: 16,
            hidden_dim: 64,
            batch_size: 64,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 100,
            patience: 15,
            seed: 1,
            gradient_clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_ints = [
            ("input_steps", self.input_steps),
            ("output_steps", self.output_steps),
            ("adjacency_dim", self.adjacency_dim),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ];
        for (name, value) in positive_ints {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        let positive_floats = [
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
            ("gradient_clip_norm", self.gradient_clip_norm),
        ];
        for (name, value) in positive_floats {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        for (name, value) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(value.is_finite() && (0.0..1.0).contains(&value)) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1), got {value}"
                )));
            }
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }

    /// Completes the model shape with the dataset-derived axes.
    pub fn model_dims(&self, num_nodes: usize, input_channels: usize, output_channels: usize) -> ModelDims {
        ModelDims {
            input_steps: self.input_steps,
            output_steps: self.output_steps,
            num_nodes,
            input_channels,
            output_channels,
            adjacency_dim: self.adjacency_dim,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let c = TrainConfig::default();
        assert_eq!(c.input_steps, 12);
        assert_eq!(c.output_steps, 12);
        assert_eq!(c.adjacency_dim, 2);
        assert_eq!(c.hidden_dim, 64);
        assert_eq!(c.batch_size, 64);
        assert_eq!(c.embed_dim, 16);
        assert_eq!(c.learning_rate, 1e-3);
        assert_eq!(c.adam_beta1, 0.9);
        assert_eq!(c.adam_beta2, 0.999);
        assert_eq!(c.adam_eps, 1e-8);
        assert_eq!(c.max_epochs, 100);
        assert_eq!(c.patience, 15);
        assert_eq!(c.gradient_clip_norm, 5.0);
        c.validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = TrainConfig::from_json(r#"{"variant":"simple","hidden_dim":8,"seed":7}"#).unwrap();
        assert_eq!(c.variant, Variant::Simple);
        assert_eq!(c.hidden_dim, 8);
        assert_eq!(c.seed, 7);
        assert_eq!(c.batch_size, 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = TrainConfig::from_json(r#"{"hiden_dim":8}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(TrainConfig::from_json(r#"{"learning_rate":0.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"adam_beta1":1.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"batch_size":0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"patience":200}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"variant":"spiral"}"#).is_err());
    }

    #[test]
    fn roundtrips_through_json() {
        let c = TrainConfig {
            variant: Variant::StructureOnly,
            seed: 42,
            ..TrainConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"w_struct\""));
        let back = TrainConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
    }
}
