use super::{EdgeKind, ModelParams};
use crate::ingest::Triple;
use crate::{Error, Result};

/// A score together with the projected head and tail it was composed from:
/// `score = ‖head + r − tail‖₂²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreBreakdown {
    pub score: f64,
    pub head: Vec<f64>,
    pub tail: Vec<f64>,
}

/// Score of a visit triple `(user, relation, poi)`.
pub fn score(params: &ModelParams, user: u32, relation: u32, poi: u32) -> Result<ScoreBreakdown> {
    score_triple(params, EdgeKind::Visit, &Triple::new(user, relation, poi))
}

pub fn score_triple(params: &ModelParams, kind: EdgeKind, t: &Triple) -> Result<ScoreBreakdown> {
    check_ids(params, kind, t)?;
    let m = params.rel_dim();
    let r = t.relation as usize;
    let mut head = vec![0.0; m];
    let mut tail = vec![0.0; m];
    params.project_into(kind, r, params.heads(kind).row(t.head as usize), &mut head);
    params.project_into(kind, r, params.pois.row(t.tail as usize), &mut tail);
    let rel = params.relations(kind).vectors.row(r);
    let score = head
        .iter()
        .zip(rel)
        .zip(&tail)
        .map(|((h, r), t)| {
            let e = h + r - t;
            e * e
        })
        .sum();
    Ok(ScoreBreakdown { score, head, tail })
}

pub(crate) fn check_ids(params: &ModelParams, kind: EdgeKind, t: &Triple) -> Result<()> {
    let (head_kind, head_size) = match kind {
        EdgeKind::Visit => ("user", params.users.rows()),
        EdgeKind::Content => ("poi", params.pois.rows()),
    };
    let checks = [
        (head_kind, t.head, head_size),
        ("relation", t.relation, params.relations(kind).len()),
        ("poi", t.tail, params.pois.rows()),
    ];
    for (kind, id, size) in checks {
        if id as usize >= size {
            return Err(Error::IdOutOfRange { kind, id, size });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::super::{init_params, RelationSet, Variant, VocabSizes};
    use super::*;
    use crate::linalg::{dot, Matrix};

    fn tiny(variant: Variant, u: [f64; 2], r: [f64; 2], v: [f64; 2]) -> ModelParams {
        let rs = RelationSet {
            vectors: Matrix::from_vec(1, 2, r.to_vec()),
            projections: if variant == Variant::TransR {
                vec![Matrix::identity_pattern(2, 2)]
            } else {
                vec![]
            },
            normals: if variant == Variant::TransH {
                Matrix::from_vec(1, 2, vec![0.0, 1.0])
            } else {
                Matrix::zeros(0, 2)
            },
        };
        let empty = RelationSet {
            vectors: Matrix::zeros(0, 2),
            projections: vec![],
            normals: Matrix::zeros(0, 2),
        };
        ModelParams::from_parts(
            variant,
            Matrix::from_vec(1, 2, u.to_vec()),
            Matrix::from_vec(1, 2, v.to_vec()),
            rs,
            empty,
        )
        .unwrap()
    }

    #[test]
    fn exact_translation_scores_zero() {
        let p = tiny(Variant::TransR, [0.6, 0.0], [0.0, 0.8], [0.6, 0.8]);
        let s = score(&p, 0, 0, 0).unwrap();
        assert!(s.score.abs() < 1e-15);
        assert_eq!(s.head, vec![0.6, 0.0]);
    }

    #[test]
    fn transe_identity_case() {
        let p = tiny(Variant::TransE, [0.3, -0.2], [0.0, 0.0], [0.3, -0.2]);
        assert_eq!(score(&p, 0, 0, 0).unwrap().score, 0.0);
    }

    #[test]
    fn out_of_range_ids() {
        let p = tiny(Variant::TransE, [0.0; 2], [0.0; 2], [0.0; 2]);
        assert!(matches!(
            score(&p, 1, 0, 0),
            Err(Error::IdOutOfRange { kind: "user", .. })
        ));
        assert!(score(&p, 0, 0, 3).is_err());
    }

    /// Straight-line re-implementation used as an oracle.
    #[allow(clippy::needless_range_loop)]
    fn oracle_transr(u: &[f64], v: &[f64], r: &[f64], m: &Matrix) -> f64 {
        let mut s = 0.0;
        for j in 0..m.cols() {
            let mut uj = 0.0;
            let mut vj = 0.0;
            for i in 0..m.rows() {
                uj += u[i] * m.get(i, j);
                vj += v[i] * m.get(i, j);
            }
            s += (uj + r[j] - vj).powi(2);
        }
        s
    }

    #[test]
    fn transr_matches_straight_line_oracle() {
        let sizes = VocabSizes {
            users: 3,
            pois: 4,
            relations: 2,
            content: 0,
        };
        let mut p = init_params(sizes, 4, 4, Variant::TransR, 5).unwrap();
        // Perturb projections away from the identity.
        for (k, m) in p.visits.projections.iter_mut().enumerate() {
            for (i, x) in m.as_mut_slice().iter_mut().enumerate() {
                *x += ((i * 7 + k * 3) % 11) as f64 / 20.0 - 0.25;
            }
        }
        for u in 0..3 {
            for r in 0..2 {
                for v in 0..4 {
                    let got = score(&p, u, r, v).unwrap().score;
                    let want = oracle_transr(
                        p.users.row(u as usize),
                        p.pois.row(v as usize),
                        p.visits.vectors.row(r as usize),
                        &p.visits.projections[r as usize],
                    );
                    assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300));
                }
            }
        }
    }

    fn random_params(variant: Variant, seed: u64) -> ModelParams {
        let sizes = VocabSizes {
            users: 4,
            pois: 5,
            relations: 3,
            content: 0,
        };
        init_params(sizes, 5, 5, variant, seed).unwrap()
    }

    proptest! {
        #[test]
        fn scores_are_nonnegative_and_composed(seed in 0u64..1000, u in 0u32..4, r in 0u32..3, v in 0u32..5) {
            for variant in Variant::ALL {
                let p = random_params(variant, seed);
                let s = score(&p, u, r, v).unwrap();
                prop_assert!(s.score >= 0.0);
                let rel = p.visits.vectors.row(r as usize);
                let recomposed: f64 = (0..5).map(|i| (s.head[i] + rel[i] - s.tail[i]).powi(2)).sum();
                prop_assert_eq!(recomposed, s.score);
            }
        }

        #[test]
        fn transe_translation_invariance(seed in 0u64..1000, c in proptest::collection::vec(-0.5f64..0.5, 5)) {
            let mut p = random_params(Variant::TransE, seed);
            let before = score(&p, 0, 1, 2).unwrap().score;
            for (i, ci) in c.iter().enumerate() {
                p.users.row_mut(0)[i] += ci;
                p.pois.row_mut(2)[i] += ci;
            }
            let after = score(&p, 0, 1, 2).unwrap().score;
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn transh_invariance_orthogonal_to_normal(seed in 0u64..1000, c in proptest::collection::vec(-0.5f64..0.5, 5)) {
            let mut p = random_params(Variant::TransH, seed);
            let w = p.visits.normals.row(1).to_vec();
            let a = dot(&c, &w);
            let c_perp: Vec<f64> = c.iter().zip(&w).map(|(ci, wi)| ci - a * wi).collect();
            let before = score(&p, 0, 1, 2).unwrap().score;
            for (i, ci) in c_perp.iter().enumerate() {
                p.users.row_mut(0)[i] += ci;
                p.pois.row_mut(2)[i] += ci;
            }
            let after = score(&p, 0, 1, 2).unwrap().score;
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn transh_reduces_to_transe_for_orthogonal_entities(seed in 0u64..1000) {
            let mut p = random_params(Variant::TransH, seed);
            let w = p.visits.normals.row(0).to_vec();
            for row in [p.users.row_mut(0), p.pois.row_mut(0)] {
                let a = dot(row, &w);
                row.iter_mut().zip(&w).for_each(|(x, wi)| *x -= a * wi);
            }
            let h = score(&p, 0, 0, 0).unwrap().score;
            let e: f64 = (0..5)
                .map(|i| (p.users.get(0, i) + p.visits.vectors.get(0, i) - p.pois.get(0, i)).powi(2))
                .sum();
            prop_assert!((h - e).abs() <= 1e-12 * e.max(1e-12));
        }
    }
}
