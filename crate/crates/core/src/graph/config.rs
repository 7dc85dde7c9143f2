use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Silu,
}

impl Activation {
    /// Value and derivative.
    #[inline]
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                (x * s, s * (1.0 + x * (1.0 - s)))
            }
        }
    }
}

/// Hyperparameters of the graph network.
#[derive(Debug, Clone, PartialEq)]
pub struct GNConfig {
    pub embedding_dimension: usize,
    pub num_layers: usize,
    pub num_rbf: usize,
    pub cutoff_lower: f64,
    pub cutoff_upper: f64,
    /// Size of the embedding table; species codes must be below it.
    pub max_z: usize,
    pub activation: Activation,
    pub trainable_rbf: bool,
    pub static_shapes: bool,
    /// Per-atom standardization: `y_i = head(x_i) * std + mean`.
    pub mean: f64,
    pub std: f64,
}

impl Default for GNConfig {
    fn default() -> Self {
        GNConfig {
            embedding_dimension: 128,
            num_layers: 2,
            num_rbf: 32,
            cutoff_lower: 0.0,
            cutoff_upper: 5.0,
            max_z: 100,
            activation: Activation::Silu,
            trainable_rbf: false,
            static_shapes: false,
            mean: 0.0,
            std: 1.0,
        }
    }
}

impl GNConfig {
    pub fn head_dimension(&self) -> usize {
        (self.embedding_dimension / 2).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dimension == 0 || self.num_rbf == 0 {
            return Err(Error::InvalidConfig(
                "embedding_dimension and num_rbf must be at least 1".into(),
            ));
        }
        if !(self.cutoff_lower >= 0.0 && self.cutoff_lower < self.cutoff_upper) {
            return Err(Error::InvalidConfig(format!(
                "require 0 <= cutoff_lower < cutoff_upper, got [{}, {}]",
                self.cutoff_lower, self.cutoff_upper
            )));
        }
        if self.max_z == 0 {
            return Err(Error::InvalidConfig("max_z must be at least 1".into()));
        }
        if !(self.std.is_finite() && self.mean.is_finite()) {
            return Err(Error::InvalidConfig("standardization must be finite".into()));
        }
        Ok(())
    }
}
