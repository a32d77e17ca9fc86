use std::fmt;
use std::str::FromStr;

use crate::embedding::Variant;
use crate::{Error, Result};

/// Which side of a positive triple gets corrupted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampling {
    /// Head with probability `tph / (tph + hpt)` of the triple's relation.
    #[default]
    Bern,
    /// Fair coin.
    Unif,
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bern" | "bernoulli" => Ok(Sampling::Bern),
            "unif" | "uniform" => Ok(Sampling::Unif),
            other => Err(Error::Config(format!("unknown sampling mode {other:?}"))),
        }
    }
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampling::Bern => "bern",
            Sampling::Unif => "unif",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub margin: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Entity dimension `d`.
    pub dim: usize,
    /// Relation dimension `m`.
    pub rel_dim: usize,
    pub sampling: Sampling,
    /// Negatives drawn per positive triple.
    pub negatives: usize,
    /// Parameters are checkpointed every this many epochs and at the end.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            margin: 2.0,
            batch_size: 4800,
            epochs: 1000,
            seed: 0,
            variant: Variant::TransR,
            dim: 100,
            rel_dim: 100,
            sampling: Sampling::Bern,
            negatives: 1,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return fail(format!("margin must be non-negative, got {}", self.margin));
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.negatives == 0 {
            return fail("at least one negative per positive is required".into());
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint cadence must be at least 1".into());
        }
        if self.dim == 0 || self.rel_dim == 0 {
            return fail("embedding dimensions must be at least 1".into());
        }
        if self.variant.requires_equal_dims() && self.dim != self.rel_dim {
            return fail(format!(
                "{} requires d = m (got d = {}, m = {})",
                self.variant, self.dim, self.rel_dim
            ));
        }
        Ok(())
    }
}
