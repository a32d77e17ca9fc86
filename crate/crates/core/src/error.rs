use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("too many malformed lines ({skipped} of {total}); check the record format")]
    MostlyMalformed { skipped: usize, total: usize },

    #[error("invalid record format: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot fit {k} regions: only {distinct} distinct coordinates")]
    TooFewPoints { k: usize, distinct: usize },

    #[error("{kind} id {id} out of range (size {size})")]
    IdOutOfRange {
        kind: &'static str,
        id: u32,
        size: usize,
    },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("spatiotemporal pattern {slot}:{region} was never observed in training")]
    UnknownPattern {
        slot: u32,
        region: u32,
        fallback: Option<u32>,
    },

    #[error("unknown {kind} key {key:?}")]
    UnknownKey { kind: &'static str, key: String },

    #[error(
        "non-finite loss at epoch {epoch}, batch {batch}; the learning rate is probably too large"
    )]
    Diverged { epoch: usize, batch: usize },

    #[error("content-based cold-start training is inapplicable: {0}")]
    NoContent(String),

    #[error(
        "no cold-start POIs found with fewer than {threshold} visitors; try a larger threshold"
    )]
    NoColdStart { threshold: usize },

    #[error("corrupt model file: {0}")]
    ModelFile(String),
}
