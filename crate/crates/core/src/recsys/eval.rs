use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::query::{translate, Query};
use super::rank::ProjectedPois;
use crate::embedding::ModelParams;
use crate::{Error, Result};

/// The cut-offs accuracy is reported at by default.
pub const DEFAULT_KS: [usize; 5] = [1, 5, 10, 15, 20];

/// A held-out check-in: the query and the POI actually visited.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalQuery {
    pub query: Query,
    pub truth: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// Fraction of answerable queries whose true POI ranks within the top k.
    pub acc: BTreeMap<usize, f64>,
    /// All queries, answerable or not.
    pub queries: usize,
    pub unanswerable: usize,
    /// Answerable queries that were served through a substitute pattern.
    #[serde(skip)]
    pub fallbacks: usize,
}

impl EvalReport {
    pub fn accuracy(&self, k: usize) -> f64 {
        self.acc.get(&k).copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Fraction of 1-based `ranks` that are at most `k`, for every `k` in `ks`.
/// Empty input gives zero accuracy.
pub fn accuracy_from_ranks(ranks: &[usize], ks: &[usize]) -> BTreeMap<usize, f64> {
    ks.iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            let acc = if ranks.is_empty() {
                0.0
            } else {
                hits as f64 / ranks.len() as f64
            };
            (k, acc)
        })
        .collect()
}

/// 1-based rank of the true POI for every answerable query, in input order;
/// `None` for unanswerable ones.
pub fn query_ranks(params: &ModelParams, queries: &[EvalQuery]) -> Result<Vec<Option<usize>>> {
    let pois = params.sizes().pois;
    for q in queries {
        if q.truth as usize >= pois {
            return Err(Error::IdOutOfRange {
                kind: "POI",
                id: q.truth,
                size: pois,
            });
        }
    }
    let mut by_relation: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, q) in queries.iter().enumerate() {
        if let Some(r) = q.query.resolution.relation() {
            by_relation.entry(r).or_default().push(i);
        }
    }
    let groups: Vec<(u32, Vec<usize>)> = by_relation.into_iter().collect();
    let ranked: Vec<Vec<(usize, usize)>> = groups
        .par_iter()
        .map(|(relation, members)| -> Result<Vec<(usize, usize)>> {
            let projected = ProjectedPois::new(params, *relation)?;
            members
                .iter()
                .map(|&i| {
                    let q = &queries[i];
                    let v_q = translate(params, q.query.user, *relation)?;
                    Ok((i, projected.rank_of(&v_q, q.truth)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![None; queries.len()];
    for (i, rank) in ranked.into_iter().flatten() {
        out[i] = Some(rank);
    }
    Ok(out)
}

/// Accuracy@k over the answerable queries. Parameters are only read.
pub fn evaluate(params: &ModelParams, queries: &[EvalQuery], ks: &[usize]) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let ranks = query_ranks(params, queries)?;
    let answered: Vec<usize> = ranks.iter().flatten().copied().collect();
    let fallbacks = queries
        .iter()
        .filter(|q| matches!(q.query.resolution, super::Resolution::Fallback(_)))
        .count();
    Ok(EvalReport {
        acc: accuracy_from_ranks(&answered, ks),
        queries: queries.len(),
        unanswerable: queries.len() - answered.len(),
        fallbacks,
    })
}
