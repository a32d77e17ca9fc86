//! Raw check-ins to training triples and held-out queries.

use rand::seq::index::sample;

use crate::ingest::{
    build_triples_with, split_by_user, CheckIn, Discretizer, DiscretizerConfig, Split, SplitLabel,
    SplitSpec, TripleStore, Vocab,
};
use crate::recsys::{EvalQuery, Query};
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineConfig {
    pub discretizer: DiscretizerConfig,
    pub split: SplitSpec,
}

/// A dataset ready for training and evaluation.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub split: Split,
    pub discretizer: Discretizer,
    /// Users and POIs cover every record; relations only the training ones.
    pub vocab: Vocab,
    pub train: TripleStore,
    pub validation: Vec<EvalQuery>,
    pub test: Vec<EvalQuery>,
}

impl Prepared {
    /// The training triples thinned by [`reduce_triples`]. Vocabularies and
    /// the discretizer are unchanged.
    pub fn reduced_train(&self, ratio: f64, seed: u64) -> Result<TripleStore> {
        reduce_triples(&self.train, ratio, seed)
    }
}

/// Removes `⌊ratio · |store|⌋` triples chosen by seeded uniform sampling,
/// keeping the id spaces.
pub fn reduce_triples(store: &TripleStore, ratio: f64, seed: u64) -> Result<TripleStore> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!(
            "reduction ratio {ratio} outside [0, 1]"
        )));
    }
    let n = store.len();
    let remove = ((ratio * n as f64) + 1e-9).floor() as usize;
    if remove == 0 {
        return Ok(store.clone());
    }
    let mut rng = rng_for(seed, "split/reduction");
    let mut dropped = vec![false; n];
    for i in sample(&mut rng, n, remove) {
        dropped[i] = true;
    }
    let kept = store
        .triples()
        .iter()
        .zip(&dropped)
        .filter(|(_, d)| !**d)
        .map(|(t, _)| *t)
        .collect();
    store.with_triples(kept)
}

/// Splits per user in time, fits the discretizer on the training portion
/// (training plus validation records) and builds triples and queries.
pub fn prepare(checkins: &[CheckIn], config: &PipelineConfig) -> Result<Prepared> {
    let split = split_by_user(checkins, &config.split)?;
    prepare_with_split(checkins, split, &config.discretizer)
}

/// Like [`prepare`] with externally chosen labels.
pub fn prepare_with_split(
    checkins: &[CheckIn],
    split: Split,
    config: &DiscretizerConfig,
) -> Result<Prepared> {
    if split.labels.len() != checkins.len() {
        return Err(Error::Config(
            "split labels do not match the records".into(),
        ));
    }
    let fit_on = checkins
        .iter()
        .zip(&split.labels)
        .filter(|(_, l)| matches!(l, SplitLabel::Train | SplitLabel::Validation))
        .map(|(c, _)| c);
    let discretizer = Discretizer::fit(fit_on, config)?;

    let mut vocab = Vocab::default();
    for c in checkins {
        vocab.users.intern(c.user.clone());
        vocab.pois.intern(c.poi.clone());
    }
    let train_records: Vec<CheckIn> = split
        .select(checkins, SplitLabel::Train)
        .into_iter()
        .cloned()
        .collect();
    if train_records.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let (vocab, train) = build_triples_with(vocab, &train_records, &discretizer);
    let validation = eval_queries(
        split.select(checkins, SplitLabel::Validation),
        &vocab,
        &discretizer,
    )?;
    let test = eval_queries(
        split.select(checkins, SplitLabel::Test),
        &vocab,
        &discretizer,
    )?;
    Ok(Prepared {
        split,
        discretizer,
        vocab,
        train,
        validation,
        test,
    })
}

/// Queries for held-out check-ins whose user and POI are in the vocabulary.
pub fn eval_queries<'a, I>(records: I, vocab: &Vocab, disc: &Discretizer) -> Result<Vec<EvalQuery>>
where
    I: IntoIterator<Item = &'a CheckIn>,
{
    records
        .into_iter()
        .map(|c| {
            let unknown = |kind: &'static str, key: &str| Error::UnknownKey {
                kind,
                key: key.to_string(),
            };
            let user = vocab
                .users
                .id(c.user.as_str())
                .ok_or_else(|| unknown("user", &c.user))?;
            let truth = vocab
                .pois
                .id(c.poi.as_str())
                .ok_or_else(|| unknown("POI", &c.poi))?;
            let query = Query::new(
                user,
                c.timestamp,
                c.coord(),
                Some(&c.poi),
                &vocab.relations,
                disc,
            );
            Ok(EvalQuery { query, truth })
        })
        .collect()
}
