use std::cmp::Ordering;

use rayon::prelude::*;

use crate::embedding::{EdgeKind, ModelParams};
use crate::linalg::l1_distance;
use crate::{Error, Result};

/// Ordered `(poi id, distance)` list, ascending by distance then id.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedResult {
    pub k: usize,
    pub items: Vec<(u32, f64)>,
}

/// Every POI embedding projected into the space of one relation, so that
/// many queries under that relation can share the projection work.
#[derive(Clone, Debug)]
pub struct ProjectedPois {
    rel_dim: usize,
    data: Vec<f64>,
}

impl ProjectedPois {
    pub fn new(params: &ModelParams, relation: u32) -> Result<Self> {
        let sizes = params.sizes();
        if relation as usize >= sizes.relations {
            return Err(Error::IdOutOfRange {
                kind: "relation",
                id: relation,
                size: sizes.relations,
            });
        }
        let m = params.rel_dim();
        let mut data = vec![0.0; sizes.pois * m];
        for (v, out) in data.chunks_mut(m).enumerate() {
            params.project_into(EdgeKind::Visit, relation as usize, params.pois.row(v), out);
        }
        Ok(ProjectedPois { rel_dim: m, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.rel_dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, v: u32) -> &[f64] {
        let m = self.rel_dim;
        &self.data[v as usize * m..(v as usize + 1) * m]
    }

    /// `‖proj(v) − v_q‖₁`
    pub fn distance(&self, v: u32, v_q: &[f64]) -> f64 {
        l1_distance(self.row(v), v_q)
    }

    pub fn distances(&self, v_q: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.rel_dim)
            .map(|p| l1_distance(p, v_q))
            .collect()
    }

    /// Reference ranking: exact linear scan over every POI.
    pub fn rank(&self, v_q: &[f64], k: usize) -> Result<RankedResult> {
        check_k(k)?;
        self.check_query(v_q)?;
        let mut items: Vec<(u32, f64)> = self
            .distances(v_q)
            .into_iter()
            .enumerate()
            .map(|(v, d)| (v as u32, d))
            .collect();
        let k_eff = k.min(items.len());
        if k_eff < items.len() {
            items.select_nth_unstable_by(k_eff, by_distance_then_id);
            items.truncate(k_eff);
        }
        items.sort_unstable_by(by_distance_then_id);
        Ok(RankedResult { k, items })
    }

    /// Parallel scan over fixed-size blocks of POIs; each block keeps its own
    /// top-k and the blocks are merged by `(distance, id)`, so the result
    /// equals [`ProjectedPois::rank`] for any block size.
    pub fn rank_blocked(&self, v_q: &[f64], k: usize, block: usize) -> Result<RankedResult> {
        check_k(k)?;
        self.check_query(v_q)?;
        let block = block.max(1);
        let m = self.rel_dim;
        let mut items: Vec<(u32, f64)> = self
            .data
            .par_chunks(block * m)
            .enumerate()
            .flat_map_iter(|(b, chunk)| {
                let mut local: Vec<(u32, f64)> = chunk
                    .chunks(m)
                    .enumerate()
                    .map(|(i, p)| ((b * block + i) as u32, l1_distance(p, v_q)))
                    .collect();
                local.sort_unstable_by(by_distance_then_id);
                local.truncate(k);
                local
            })
            .collect();
        items.sort_unstable_by(by_distance_then_id);
        items.truncate(k);
        Ok(RankedResult { k, items })
    }

    /// 1-based rank of `target`: one plus the number of POIs strictly before
    /// it in `(distance, id)` order.
    pub fn rank_of(&self, v_q: &[f64], target: u32) -> usize {
        let d_star = self.distance(target, v_q);
        1 + self
            .data
            .chunks(self.rel_dim)
            .enumerate()
            .filter(|(v, p)| {
                by_distance_then_id(&(*v as u32, l1_distance(p, v_q)), &(target, d_star))
                    == Ordering::Less
            })
            .count()
    }

    fn check_query(&self, v_q: &[f64]) -> Result<()> {
        if v_q.len() != self.rel_dim {
            return Err(Error::Config(format!(
                "query vector has {} components, relation space has {}",
                v_q.len(),
                self.rel_dim
            )));
        }
        Ok(())
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn by_distance_then_id(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Top-k POIs for a translated query under `relation`.
pub fn rank_pois(
    params: &ModelParams,
    v_q: &[f64],
    relation: u32,
    k: usize,
) -> Result<RankedResult> {
    ProjectedPois::new(params, relation)?.rank(v_q, k)
}

/// Same result as [`rank_pois`], computed with a parallel blocked scan.
pub fn rank_pois_blocked(
    params: &ModelParams,
    v_q: &[f64],
    relation: u32,
    k: usize,
    block: usize,
) -> Result<RankedResult> {
    ProjectedPois::new(params, relation)?.rank_blocked(v_q, k, block)
}
