//! Cold-start extension: POIs that share a `<word, region>` content pattern
//! are linked by POI-POI triples `(v, <word, region>, s)`, trained jointly
//! with the visit triples in alternating batches. A POI with few or no
//! check-ins then inherits a position from the POIs it shares content with.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use rand::seq::index::sample;

use crate::embedding::ModelParams;
use crate::ingest::{CheckIn, ContentKey, Discretizer, Interner, Triple, TripleStore, Vocab};
use crate::seed::rng_for;
use crate::training::{train_with, Resume, TrainConfig, TrainObserver, TrainReport};
use crate::{Error, Result};

/// Default cap on ordered POI pairs emitted per content pattern.
pub const DEFAULT_PAIR_BUDGET: usize = 50;

/// Default visitor threshold: POIs with strictly fewer distinct visitors are cold.
pub const DEFAULT_COLD_THRESHOLD: usize = 5;

/// Content attributes of one POI.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoiContent {
    pub words: BTreeSet<String>,
    pub region: u32,
}

/// Collects per-POI words and regions from check-in records, indexed by POI
/// id. Words are pooled over all records of a POI; the region is that of its
/// first record. POIs without records get no words.
pub fn poi_contents(checkins: &[CheckIn], vocab: &Vocab, disc: &Discretizer) -> Vec<PoiContent> {
    let mut out = vec![PoiContent::default(); vocab.pois.len()];
    let mut located = vec![false; vocab.pois.len()];
    for c in checkins {
        let Some(id) = vocab.pois.id(c.poi.as_str()) else {
            continue;
        };
        let entry = &mut out[id as usize];
        if !located[id as usize] {
            entry.region = disc.region(Some(&c.poi), c.lat, c.lon);
            located[id as usize] = true;
        }
        entry.words.extend(c.words.iter().cloned());
    }
    out
}

/// Reads a POI-content table: `poi-key<TAB>word|word|...` per line. Tokens
/// are lowercased; blank lines are ignored.
pub fn read_poi_content<R: BufRead>(reader: R) -> Result<HashMap<String, Vec<String>>> {
    let mut out: HashMap<String, Vec<String>> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (poi, words) = line.split_once('\t').ok_or_else(|| {
            Error::Format(format!("content line {}: expected two columns", n + 1))
        })?;
        out.entry(poi.trim().to_string()).or_default().extend(
            words
                .split('|')
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty()),
        );
    }
    Ok(out)
}

/// POI-POI triples over content patterns, with the pattern vocabulary.
#[derive(Clone, Debug)]
pub struct ContentTriples {
    pub patterns: Interner<ContentKey>,
    pub store: TripleStore,
}

/// Builds `(v, wl, s)` for every pattern `wl` held by at least two POIs and
/// every ordered pair `v ≠ s` of its holders. Patterns with more than
/// `pair_budget` ordered pairs keep a seeded uniform sample of that many.
pub fn build_content_triples(
    contents: &[PoiContent],
    pair_budget: usize,
    seed: u64,
) -> Result<ContentTriples> {
    if contents.iter().all(|c| c.words.is_empty()) {
        return Err(Error::NoContent(
            "the dataset has no POI content words".into(),
        ));
    }
    let mut holders: Vec<(ContentKey, Vec<u32>)> = Vec::new();
    let mut index: HashMap<ContentKey, usize> = HashMap::new();
    for (poi, c) in contents.iter().enumerate() {
        for word in &c.words {
            let key = ContentKey {
                word: word.clone(),
                region: c.region,
            };
            let i = *index.entry(key.clone()).or_insert_with(|| {
                holders.push((key, Vec::new()));
                holders.len() - 1
            });
            holders[i].1.push(poi as u32);
        }
    }

    let mut rng = rng_for(seed, "coldstart/pairs");
    let mut patterns = Interner::default();
    let mut triples = Vec::new();
    for (key, pois) in holders {
        let n = pois.len();
        if n < 2 {
            continue;
        }
        let relation = patterns.intern(key);
        let total = n * (n - 1);
        let pair = |i: usize| {
            let v = i / (n - 1);
            let mut s = i % (n - 1);
            if s >= v {
                s += 1;
            }
            Triple::new(pois[v], relation, pois[s])
        };
        if total <= pair_budget {
            triples.extend((0..total).map(pair));
        } else {
            let mut chosen = sample(&mut rng, total, pair_budget).into_vec();
            chosen.sort_unstable();
            triples.extend(chosen.into_iter().map(pair));
        }
    }
    let store = TripleStore::new(triples, contents.len(), patterns.len(), contents.len())?;
    Ok(ContentTriples { patterns, store })
}

/// POI keys with strictly fewer than `threshold` distinct visitors.
pub fn cold_start_pois(checkins: &[CheckIn], threshold: usize) -> BTreeSet<String> {
    let mut visitors: HashMap<&str, HashSet<&str>> = HashMap::new();
    for c in checkins {
        visitors.entry(&c.poi).or_default().insert(&c.user);
    }
    visitors
        .into_iter()
        .filter(|(_, users)| users.len() < threshold)
        .map(|(poi, _)| poi.to_string())
        .collect()
}

/// Joint training over visit and content triples: one visit batch, then one
/// content batch, until both are exhausted. POI embeddings are shared; each
/// content pattern has its own relation vector and operator.
pub fn train_coldstart(
    visits: &TripleStore,
    content: &TripleStore,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_coldstart_with(visits, content, config, None, &mut ())
}

pub fn train_coldstart_with(
    visits: &TripleStore,
    content: &TripleStore,
    config: &TrainConfig,
    resume: Option<Resume>,
    observer: &mut dyn TrainObserver,
) -> Result<(ModelParams, TrainReport)> {
    if content.num_heads() != visits.num_tails() || content.num_tails() != visits.num_tails() {
        return Err(Error::Config(
            "content triples must range over the same POI ids as the visits".into(),
        ));
    }
    train_with(visits, Some(content), config, resume, observer)
}
