//! Experiment configuration: mode, seed and the hyperparameters of both
//! model families, loadable from a TOML file with full defaults.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mol::GraphEncoderKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// What the text-stage classifier consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "text-only")]
    TextOnly,
    #[serde(rename = "text+nfp")]
    TextNfp,
    #[serde(rename = "text+ggnn")]
    TextGgnn,
    #[serde(rename = "mol-only")]
    MolOnly,
    #[serde(rename = "mol-binary")]
    MolBinary,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::TextOnly => "text-only",
            Mode::TextNfp => "text+nfp",
            Mode::TextGgnn => "text+ggnn",
            Mode::MolOnly => "mol-only",
            Mode::MolBinary => "mol-binary",
        }
    }

    /// Encoder implied by the mode; fused modes pin it, the others defer to
    /// the `[mol]` section.
    pub fn implied_encoder(self) -> Option<GraphEncoderKind> {
        match self {
            Mode::TextNfp => Some(GraphEncoderKind::Nfp),
            Mode::TextGgnn => Some(GraphEncoderKind::Ggnn),
            _ => None,
        }
    }

    pub fn uses_text(self) -> bool {
        matches!(self, Mode::TextOnly | Mode::TextNfp | Mode::TextGgnn)
    }

    pub fn uses_molecules(self) -> bool {
        !matches!(self, Mode::TextOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    pub word_dim: usize,
    pub position_dim: usize,
    pub position_clip: usize,
    pub windows: Vec<usize>,
    pub filters: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub epochs: usize,
    /// Fixed offset added to the negative-class logit.
    pub negative_bias: f64,
    /// Sweep the offset on a held-out tenth of the training data after
    /// training and keep the best by micro-F.
    pub tune_negative_bias: bool,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            word_dim: 200,
            position_dim: 20,
            position_clip: 50,
            windows: vec![3, 5, 7],
            filters: 100,
            hidden: 500,
            learning_rate: 0.001,
            batch_size: 50,
            l2: 0.0001,
            epochs: 10,
            negative_bias: 0.0,
            tune_negative_bias: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MolConfig {
    pub encoder: GraphEncoderKind,
    pub vector_dim: usize,
    pub steps: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for MolConfig {
    fn default() -> Self {
        Self {
            encoder: GraphEncoderKind::Nfp,
            vector_dim: 50,
            steps: 4,
            hidden: 1000,
            learning_rate: 0.001,
            batch_size: 100,
            l2: 0.0001,
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub text: TextConfig,
    pub mol: MolConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::TextOnly,
            seed: 42,
            text: TextConfig::default(),
            mol: MolConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// The encoder this experiment uses (mode wins over the `[mol]` field).
    pub fn encoder_kind(&self) -> GraphEncoderKind {
        self.mode.implied_encoder().unwrap_or(self.mol.encoder)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.text.learning_rate <= 0.0 || self.mol.learning_rate <= 0.0 {
            return fail("learning rates must be positive".to_string());
        }
        if self.text.batch_size == 0 || self.mol.batch_size == 0 {
            return fail("batch sizes must be at least 1".to_string());
        }
        if self.text.l2 < 0.0 || self.mol.l2 < 0.0 {
            return fail("L2 coefficients cannot be negative".to_string());
        }
        if self.mode.uses_text() {
            if self.text.windows.is_empty() {
                return fail("text mode needs at least one convolution window".to_string());
            }
            if let Some(w) = self.text.windows.iter().find(|w| **w % 2 == 0 || **w == 0) {
                return fail(format!("convolution windows must be odd, got {w}"));
            }
            if self.text.word_dim == 0
                || self.text.position_dim == 0
                || self.text.filters == 0
                || self.text.hidden == 0
                || self.text.position_clip == 0
            {
                return fail("text dimensions must be positive".to_string());
            }
        }
        if self.mode.uses_molecules() {
            if self.mol.vector_dim == 0 || self.mol.hidden == 0 {
                return fail("molecular dimensions must be positive".to_string());
            }
            if self.mol.steps == 0 {
                return fail("molecular encoders need at least one step".to_string());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_values() {
        let c = ExperimentConfig::default();
        assert_eq!(c.text.word_dim, 200);
        assert_eq!(c.text.position_dim, 20);
        assert_eq!(c.text.windows, vec![3, 5, 7]);
        assert_eq!(c.text.filters, 100);
        assert_eq!(c.text.hidden, 500);
        assert_eq!(c.text.learning_rate, 0.001);
        assert_eq!(c.text.batch_size, 50);
        assert_eq!(c.text.l2, 0.0001);
        assert_eq!(c.mol.vector_dim, 50);
        assert_eq!(c.mol.steps, 4);
        assert_eq!(c.mol.hidden, 1000);
        assert_eq!(c.mol.learning_rate, 0.001);
        assert_eq!(c.mol.batch_size, 100);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_mode_names() {
        let text = r#"
            mode = "text+ggnn"
            seed = 7
            [text]
            epochs = 3
            [mol]
            vector_dim = 16
        "#;
        let c: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(c.mode, Mode::TextGgnn);
        assert_eq!(c.encoder_kind(), GraphEncoderKind::Ggnn);
        assert_eq!(c.text.epochs, 3);
        assert_eq!(c.mol.vector_dim, 16);
        // untouched fields keep their defaults
        assert_eq!(c.text.filters, 100);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ExperimentConfig::default();
        c.text.learning_rate = 0.0;
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::default();
        c.text.windows = vec![4];
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::default();
        c.mode = Mode::MolBinary;
        c.mol.steps = 0;
        assert!(c.validate().is_err());

        let unknown: Result<ExperimentConfig, _> = toml::from_str("bogus_field = 1");
        assert!(unknown.is_err());
    }
}
