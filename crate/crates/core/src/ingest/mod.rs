//! From raw check-in records to spatiotemporal triples and temporal splits.

mod artifacts;
mod discretize;
mod parse;
mod region;
mod split;
mod time;
mod triples;
mod vocab;

pub use artifacts::{
    read_discretizer, read_split_manifest, read_triples, read_vocab, write_discretizer,
    write_split_manifest, write_triples, write_vocab,
};
pub use discretize::{Discretizer, DiscretizerConfig, RegionLookup, SpaceScheme};
pub use parse::{parse_checkins, parse_timestamp, Field, ParsedCheckIns, RecordFormat};
pub use region::{assign_region, fit_regions, RegionModel, MAX_ITERATIONS};
pub use split::{split_by_user, Split, SplitLabel, SplitSpec};
pub use time::{discretize_time, discretize_time_with_offset, TimeScheme};
pub use triples::{build_triples, build_triples_with, Triple, TripleStore};
pub use vocab::{ContentKey, Interner, Pattern, Vocab};

/// One raw check-in activity: a user visiting a POI at a time and place.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckIn {
    pub user: String,
    pub poi: String,
    /// UTC epoch seconds, never negative.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    /// Lowercased content tokens; empty when the dataset has no content.
    pub words: Vec<String>,
}

impl CheckIn {
    pub fn coord(&self) -> (f64, f64) {
        (self.lat, self.lon)
    }
}
