//! Norm constraints: `‖u‖, ‖v‖, ‖r‖ ≤ 1` for every variant, unit TransH
//! normals, and `‖e·M_r‖ ≤ 1` for TransR entities under the relations they
//! were used with.

use std::collections::BTreeSet;

use super::{EdgeKind, ModelParams, Variant};
use crate::ingest::Triple;
use crate::linalg::{clip_to_unit_ball, norm2, vec_mat};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Table {
    Heads,
    Pois,
}

/// Re-imposes the constraints on every row touched by `triples`. Rows already
/// inside the unit ball are left untouched.
pub fn project_constraints(params: &mut ModelParams, kind: EdgeKind, triples: &[Triple]) {
    let mut entities = BTreeSet::new();
    let mut relations = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    for t in triples {
        entities.insert((Table::Heads, t.head));
        entities.insert((Table::Pois, t.tail));
        relations.insert(t.relation);
        pairs.insert((Table::Heads, t.head, t.relation));
        pairs.insert((Table::Pois, t.tail, t.relation));
    }
    for &(table, id) in &entities {
        clip_to_unit_ball(entity_row(params, kind, table, id));
    }
    let variant = params.variant();
    {
        let rs = params.relations_mut(kind);
        for &r in &relations {
            clip_to_unit_ball(rs.vectors.row_mut(r as usize));
            if variant == Variant::TransH {
                let w = rs.normals.row_mut(r as usize);
                let n = norm2(w);
                if n > 0.0 {
                    w.iter_mut().for_each(|x| *x /= n);
                }
            }
        }
    }
    if variant == Variant::TransR {
        // Shrinking an entity never increases ‖e·M‖ for any other relation,
        // so one pass leaves every touched pair feasible.
        let mut projected = vec![0.0; params.rel_dim()];
        for &(table, id, r) in &pairs {
            let row = entity_row(params, kind, table, id).to_vec();
            vec_mat(
                &row,
                &params.relations(kind).projections[r as usize],
                &mut projected,
            );
            let n = norm2(&projected);
            if n > 1.0 {
                entity_row(params, kind, table, id)
                    .iter_mut()
                    .for_each(|x| *x /= n);
            }
        }
    }
}

fn entity_row(params: &mut ModelParams, kind: EdgeKind, table: Table, id: u32) -> &mut [f64] {
    match table {
        Table::Heads => params.heads_mut(kind).row_mut(id as usize),
        Table::Pois => params.pois.row_mut(id as usize),
    }
}

/// Largest constraint violation over the rows touched by `triples`:
/// `max(‖x‖ − 1)` over norm-bounded quantities and `|‖w‖ − 1|` over TransH
/// normals. Non-positive means every constraint holds.
pub fn constraint_excess(params: &ModelParams, kind: EdgeKind, triples: &[Triple]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let rs = params.relations(kind);
    let mut projected = vec![0.0; params.rel_dim()];
    for t in triples {
        let h = params.heads(kind).row(t.head as usize);
        let v = params.pois.row(t.tail as usize);
        let r = t.relation as usize;
        worst = worst
            .max(norm2(h) - 1.0)
            .max(norm2(v) - 1.0)
            .max(norm2(rs.vectors.row(r)) - 1.0);
        match params.variant() {
            Variant::TransR => {
                for e in [h, v] {
                    vec_mat(e, &rs.projections[r], &mut projected);
                    worst = worst.max(norm2(&projected) - 1.0);
                }
            }
            Variant::TransH => worst = worst.max((norm2(rs.normals.row(r)) - 1.0).abs()),
            Variant::TransE => {}
        }
    }
    worst
}
