use crate::embedding::{EdgeKind, ModelParams};
use crate::ingest::{Discretizer, Interner, Pattern};
use crate::{Error, Result};

/// How a query's spatiotemporal pattern maps onto a trained relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolution {
    /// The pattern itself was seen in training.
    Observed(u32),
    /// The pattern was unseen; this trained relation stands in for it.
    Fallback(u32),
    /// Neither the pattern nor any stand-in exists.
    Unanswerable,
}

impl Resolution {
    pub fn relation(self) -> Option<u32> {
        match self {
            Resolution::Observed(r) | Resolution::Fallback(r) => Some(r),
            Resolution::Unanswerable => None,
        }
    }
}

/// A recommendation request: who, when, where, and the relation derived from
/// the time and place.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub user: u32,
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub pattern: Pattern,
    pub resolution: Resolution,
}

impl Query {
    /// Discretizes the time and place and resolves the pattern against the
    /// trained relations. `place` is an optional POI key for region-file lookups.
    pub fn new(
        user: u32,
        timestamp: i64,
        (lat, lon): (f64, f64),
        place: Option<&str>,
        relations: &Interner<Pattern>,
        disc: &Discretizer,
    ) -> Self {
        let pattern = Pattern {
            slot: disc.time_slot(timestamp),
            region: disc.region(place, lat, lon),
        };
        Query {
            user,
            timestamp,
            lat,
            lon,
            pattern,
            resolution: resolve_pattern(pattern, relations, disc),
        }
    }
}

/// Unseen patterns fall back to the trained pattern with the same time slot
/// whose region centroid is nearest to the query region's centroid, then to
/// the same region with the circularly nearest time slot. Remaining ties go
/// to the lower region or slot id.
pub fn resolve_pattern(
    pattern: Pattern,
    relations: &Interner<Pattern>,
    disc: &Discretizer,
) -> Resolution {
    if let Some(id) = relations.id(&pattern) {
        return Resolution::Observed(id);
    }
    let centroids = disc.region_model().centroids();
    let centre = centroids.get(pattern.region as usize).copied();
    let region_distance = |region: u32| -> f64 {
        match (centre, centroids.get(region as usize)) {
            (Some(a), Some(b)) => {
                let d = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                if d.is_nan() {
                    f64::INFINITY
                } else {
                    d
                }
            }
            _ => f64::INFINITY,
        }
    };
    let same_slot = relations
        .keys()
        .iter()
        .filter(|p| p.slot == pattern.slot)
        .min_by(|a, b| {
            region_distance(a.region)
                .total_cmp(&region_distance(b.region))
                .then(a.region.cmp(&b.region))
        });
    if let Some(p) = same_slot {
        return Resolution::Fallback(relations.id(p).expect("key from interner"));
    }
    let slots = disc.time_scheme().slots();
    let slot_distance = |slot: u32| {
        let d = slot.abs_diff(pattern.slot) % slots;
        d.min(slots - d)
    };
    let same_region = relations
        .keys()
        .iter()
        .filter(|p| p.region == pattern.region)
        .min_by_key(|p| (slot_distance(p.slot), p.slot));
    match same_region {
        Some(p) => Resolution::Fallback(relations.id(p).expect("key from interner")),
        None => Resolution::Unanswerable,
    }
}

/// `proj_r(u) + r` for a trained relation: the point in relation space the
/// recommended POIs should lie close to.
pub fn translate(params: &ModelParams, user: u32, relation: u32) -> Result<Vec<f64>> {
    let sizes = params.sizes();
    if user as usize >= sizes.users {
        return Err(Error::IdOutOfRange {
            kind: "user",
            id: user,
            size: sizes.users,
        });
    }
    if relation as usize >= sizes.relations {
        return Err(Error::IdOutOfRange {
            kind: "relation",
            id: relation,
            size: sizes.relations,
        });
    }
    let mut out = vec![0.0; params.rel_dim()];
    params.project_into(
        EdgeKind::Visit,
        relation as usize,
        params.users.row(user as usize),
        &mut out,
    );
    let r = params.visits.vectors.row(relation as usize);
    out.iter_mut().zip(r).for_each(|(o, ri)| *o += ri);
    Ok(out)
}

/// Translates a query whose pattern was observed in training. Unseen patterns
/// are reported as [`Error::UnknownPattern`] together with the fallback
/// relation, if any.
pub fn translate_query(params: &ModelParams, query: &Query) -> Result<Vec<f64>> {
    match query.resolution {
        Resolution::Observed(r) => translate(params, query.user, r),
        other => Err(Error::UnknownPattern {
            slot: query.pattern.slot,
            region: query.pattern.region,
            fallback: other.relation(),
        }),
    }
}
