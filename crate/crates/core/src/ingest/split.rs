use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::index::sample;

use super::CheckIn;
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitLabel {
    Train,
    Validation,
    Test,
    /// Training record dropped by the sparsity reduction.
    Removed,
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLabel::Train => "train",
            SplitLabel::Validation => "validation",
            SplitLabel::Test => "test",
            SplitLabel::Removed => "removed",
        })
    }
}

impl FromStr for SplitLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "validation" => Ok(SplitLabel::Validation),
            "test" => Ok(SplitLabel::Test),
            "removed" => Ok(SplitLabel::Removed),
            other => Err(Error::Format(format!("unknown split label {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    /// Leading fraction of each user's chronologically ordered records used for training.
    pub train_fraction: f64,
    /// Trailing fraction of each user's training records held out for validation.
    pub validation_fraction: f64,
    /// Fraction of training records removed at random (sparsity study).
    pub reduction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            validation_fraction: 0.1,
            reduction: 0.0,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.train_fraction) || !unit(self.validation_fraction) || !unit(self.reduction) {
            return Err(Error::Config("split fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One label per input record, in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub labels: Vec<SplitLabel>,
}

impl Split {
    pub fn indices(&self, label: SplitLabel) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, label: SplitLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn select<'a>(&self, checkins: &'a [CheckIn], label: SplitLabel) -> Vec<&'a CheckIn> {
        checkins
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == label)
            .map(|(c, _)| c)
            .collect()
    }
}

/// Floors `fraction · n`, tolerating representation error such as `0.8 · 10`.
fn floor_fraction(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Per-user chronological split: the first `train_fraction` of each user's
/// records train, the rest test; the last `validation_fraction` of the
/// training part is validation. Timestamp ties keep input order. Users with
/// fewer than two records go entirely to training.
pub fn split_by_user(checkins: &[CheckIn], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut by_user: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (i, c) in checkins.iter().enumerate() {
        by_user
            .entry(c.user.as_str())
            .or_insert_with(|| {
                order.push(c.user.as_str());
                Vec::new()
            })
            .push(i);
    }

    let mut labels = vec![SplitLabel::Train; checkins.len()];
    for user in order {
        let mut records = by_user.remove(user).unwrap_or_default();
        if records.len() < 2 {
            warn!("user {user:?} has fewer than two check-ins; all go to training");
            continue;
        }
        records.sort_by_key(|&i| checkins[i].timestamp);
        let n_train = floor_fraction(spec.train_fraction, records.len());
        let n_valid = floor_fraction(spec.validation_fraction, n_train);
        for &i in &records[n_train - n_valid..n_train] {
            labels[i] = SplitLabel::Validation;
        }
        for &i in &records[n_train..] {
            labels[i] = SplitLabel::Test;
        }
    }

    if spec.reduction > 0.0 {
        let train: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == SplitLabel::Train)
            .map(|(i, _)| i)
            .collect();
        let drop = floor_fraction(spec.reduction, train.len());
        let mut rng = rng_for(spec.seed, "split/reduction");
        for j in sample(&mut rng, train.len(), drop) {
            labels[train[j]] = SplitLabel::Removed;
        }
    }
    Ok(Split { labels })
}
