//! Closed-form gradients of the margin-ranking hinge
//! `max(0, s(pos) + γ − s(neg))`.

use std::collections::BTreeMap;

use super::score::check_ids;
use super::{EdgeKind, ModelParams, Variant};
use crate::ingest::Triple;
use crate::linalg::{dot, mat_vec, vec_mat};
use crate::Result;

/// Gradient rows for one relation table, keyed by relation id. Operators are
/// the flattened row-major `d × m` projection (TransR) or the `d` normal (TransH).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationGrad {
    pub vectors: BTreeMap<u32, Vec<f64>>,
    pub operators: BTreeMap<u32, Vec<f64>>,
}

/// Sparse gradient touching only the rows involved in the sampled pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGrad {
    pub users: BTreeMap<u32, Vec<f64>>,
    pub pois: BTreeMap<u32, Vec<f64>>,
    pub visits: RelationGrad,
    pub content: RelationGrad,
}

impl SparseGrad {
    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
            && self.pois.is_empty()
            && [&self.visits, &self.content]
                .iter()
                .all(|r| r.vectors.is_empty() && r.operators.is_empty())
    }

    pub fn clear(&mut self) {
        *self = SparseGrad::default();
    }

    fn heads(&mut self, kind: EdgeKind) -> &mut BTreeMap<u32, Vec<f64>> {
        match kind {
            EdgeKind::Visit => &mut self.users,
            EdgeKind::Content => &mut self.pois,
        }
    }

    fn relations(&mut self, kind: EdgeKind) -> &mut RelationGrad {
        match kind {
            EdgeKind::Visit => &mut self.visits,
            EdgeKind::Content => &mut self.content,
        }
    }

    /// Gradient-descent step: `θ ← θ − rate · ∇θ` for every touched row.
    pub fn apply(&self, params: &mut ModelParams, rate: f64) {
        let step = |row: &mut [f64], g: &[f64]| {
            row.iter_mut().zip(g).for_each(|(x, gi)| *x -= rate * gi);
        };
        for (&i, g) in &self.users {
            step(params.users.row_mut(i as usize), g);
        }
        for (&i, g) in &self.pois {
            step(params.pois.row_mut(i as usize), g);
        }
        let variant = params.variant();
        for (kind, rg) in [
            (EdgeKind::Visit, &self.visits),
            (EdgeKind::Content, &self.content),
        ] {
            let rs = params.relations_mut(kind);
            for (&r, g) in &rg.vectors {
                step(rs.vectors.row_mut(r as usize), g);
            }
            for (&r, g) in &rg.operators {
                match variant {
                    Variant::TransR => step(rs.projections[r as usize].as_mut_slice(), g),
                    Variant::TransH => step(rs.normals.row_mut(r as usize), g),
                    Variant::TransE => {}
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairGrad {
    /// `max(0, s(pos) + γ − s(neg))`
    pub hinge: f64,
    pub grad: SparseGrad,
}

/// Gradient of the hinge term for one positive/negative pair. Both triples
/// must share the relation. The gradient is empty when the hinge is inactive.
pub fn grad_pair(
    params: &ModelParams,
    kind: EdgeKind,
    pos: &Triple,
    neg: &Triple,
    margin: f64,
) -> Result<PairGrad> {
    check_ids(params, kind, pos)?;
    check_ids(params, kind, neg)?;
    let mut grad = SparseGrad::default();
    let hinge = accumulate_pair(params, kind, pos, neg, margin, &mut grad);
    Ok(PairGrad { hinge, grad })
}

/// Adds the hinge gradient of one pair into `grad` and returns the hinge
/// value. Ids are assumed valid.
pub(crate) fn accumulate_pair(
    params: &ModelParams,
    kind: EdgeKind,
    pos: &Triple,
    neg: &Triple,
    margin: f64,
    grad: &mut SparseGrad,
) -> f64 {
    debug_assert_eq!(pos.relation, neg.relation);
    let mut ws = Workspace::new(params.dim(), params.rel_dim());
    let s_pos = residual(params, kind, pos, &mut ws);
    let pos_res = ws.clone();
    let s_neg = residual(params, kind, neg, &mut ws);
    let hinge = s_pos + margin - s_neg;
    if hinge <= 0.0 {
        return 0.0;
    }
    add_score_grad(params, kind, pos, &pos_res, 1.0, grad);
    add_score_grad(params, kind, neg, &ws, -1.0, grad);
    hinge
}

#[derive(Clone)]
struct Workspace {
    /// Relation-space residual `e = proj(h) + r − proj(t)`.
    e: Vec<f64>,
    /// `h − t` in entity space.
    delta: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, m: usize) -> Self {
        Workspace {
            e: vec![0.0; m],
            delta: vec![0.0; d],
            scratch: vec![0.0; m],
        }
    }
}

/// Fills the workspace for triple `t` and returns its score `‖e‖²`.
fn residual(params: &ModelParams, kind: EdgeKind, t: &Triple, ws: &mut Workspace) -> f64 {
    let h = params.heads(kind).row(t.head as usize);
    let tl = params.pois.row(t.tail as usize);
    let rs = params.relations(kind);
    let r = rs.vectors.row(t.relation as usize);
    for ((d, hi), ti) in ws.delta.iter_mut().zip(h).zip(tl) {
        *d = hi - ti;
    }
    match params.variant() {
        Variant::TransE => ws.e.copy_from_slice(&ws.delta),
        Variant::TransH => {
            let w = rs.normals.row(t.relation as usize);
            let a = dot(w, &ws.delta);
            for ((e, d), wi) in ws.e.iter_mut().zip(&ws.delta).zip(w) {
                *e = d - a * wi;
            }
        }
        Variant::TransR => {
            // (h − t)·M = h·M − t·M
            vec_mat(
                &ws.delta,
                &rs.projections[t.relation as usize],
                &mut ws.scratch,
            );
            ws.e.copy_from_slice(&ws.scratch);
        }
    }
    ws.e.iter_mut().zip(r).for_each(|(e, ri)| *e += ri);
    dot(&ws.e, &ws.e)
}

fn add_into(map: &mut BTreeMap<u32, Vec<f64>>, id: u32, len: usize, scale: f64, g: &[f64]) {
    let row = map.entry(id).or_insert_with(|| vec![0.0; len]);
    row.iter_mut().zip(g).for_each(|(x, gi)| *x += scale * gi);
}

/// Adds `sign · ∇s(t)` given the residual computed for `t`.
fn add_score_grad(
    params: &ModelParams,
    kind: EdgeKind,
    t: &Triple,
    ws: &Workspace,
    sign: f64,
    grad: &mut SparseGrad,
) {
    let d = params.dim();
    let m = params.rel_dim();
    let two = 2.0 * sign;
    let rs = params.relations(kind);
    let r = t.relation;
    let e = &ws.e;

    // ∂s/∂r = 2e for every variant.
    add_into(&mut grad.relations(kind).vectors, r, m, two, e);

    // Entity-space gradient direction g such that ∂s/∂h = 2g, ∂s/∂t = −2g.
    let mut g = vec![0.0; d];
    match params.variant() {
        Variant::TransE => g.copy_from_slice(e),
        Variant::TransH => {
            let w = rs.normals.row(r as usize);
            let we = dot(w, e);
            let a = dot(w, &ws.delta);
            for ((gi, ei), wi) in g.iter_mut().zip(e).zip(w) {
                *gi = ei - we * wi;
            }
            // ∂s/∂w = −2[(wᵀe)(h − t) + (wᵀ(h − t)) e]
            let gw: Vec<f64> = ws
                .delta
                .iter()
                .zip(e)
                .map(|(di, ei)| -(we * di + a * ei))
                .collect();
            add_into(&mut grad.relations(kind).operators, r, d, two, &gw);
        }
        Variant::TransR => {
            let proj = &rs.projections[r as usize];
            mat_vec(proj, e, &mut g);
            // ∂s/∂M_ij = 2 (h − t)_i e_j
            let op = grad
                .relations(kind)
                .operators
                .entry(r)
                .or_insert_with(|| vec![0.0; d * m]);
            for (i, di) in ws.delta.iter().enumerate() {
                if *di == 0.0 {
                    continue;
                }
                let row = &mut op[i * m..(i + 1) * m];
                row.iter_mut()
                    .zip(e)
                    .for_each(|(x, ej)| *x += two * di * ej);
            }
        }
    }
    add_into(grad.heads(kind), t.head, d, two, &g);
    add_into(&mut grad.pois, t.tail, d, -two, &g);
}

#[cfg(test)]
mod tests {
    use super::super::{init_params, RelationSet, VocabSizes};
    use super::*;
    use crate::linalg::Matrix;

    fn transe_2d() -> ModelParams {
        // users: u = (0,0), u' = (0,0); pois: v = (1,0), v' = (0,0); r = 0.
        let empty = RelationSet {
            vectors: Matrix::zeros(0, 2),
            projections: vec![],
            normals: Matrix::zeros(0, 2),
        };
        ModelParams::from_parts(
            Variant::TransE,
            Matrix::from_vec(2, 2, vec![0.0; 4]),
            Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.0]),
            RelationSet {
                vectors: Matrix::zeros(1, 2),
                projections: vec![],
                normals: Matrix::zeros(0, 2),
            },
            empty,
        )
        .unwrap()
    }

    #[test]
    fn inactive_hinge_has_zero_gradient() {
        // s(pos) = 1, s(neg) = 4, γ = 2 → 1 + 2 − 4 < 0.
        let p = ModelParams::from_parts(
            Variant::TransE,
            Matrix::from_vec(1, 1, vec![0.0]),
            Matrix::from_vec(2, 1, vec![1.0, 2.0]),
            RelationSet {
                vectors: Matrix::zeros(1, 1),
                projections: vec![],
                normals: Matrix::zeros(0, 1),
            },
            RelationSet {
                vectors: Matrix::zeros(0, 1),
                projections: vec![],
                normals: Matrix::zeros(0, 1),
            },
        )
        .unwrap();
        let g = grad_pair(
            &p,
            EdgeKind::Visit,
            &Triple::new(0, 0, 0),
            &Triple::new(0, 0, 1),
            2.0,
        )
        .unwrap();
        assert_eq!(g.hinge, 0.0);
        assert!(g.grad.is_empty());
    }

    #[test]
    fn hand_differentiated_transe_case() {
        let p = transe_2d();
        let pos = Triple::new(0, 0, 0);
        let neg = Triple::new(1, 0, 1);
        let g = grad_pair(&p, EdgeKind::Visit, &pos, &neg, 0.0).unwrap();
        assert_eq!(g.hinge, 1.0);
        // ∂s/∂v = 2(v − u − r) = (2, 0); ∂s/∂u = (−2, 0). The negative has
        // a zero residual so contributes nothing.
        assert_eq!(g.grad.pois[&0], vec![2.0, 0.0]);
        assert_eq!(g.grad.users[&0], vec![-2.0, 0.0]);
        assert_eq!(g.grad.users[&1], vec![0.0, 0.0]);
        // Cross-check by central differences.
        let h = 1e-6;
        let loss = |p: &ModelParams| {
            grad_pair(p, EdgeKind::Visit, &pos, &neg, 0.0)
                .unwrap()
                .hinge
        };
        for i in 0..2 {
            let mut a = p.clone();
            a.pois.row_mut(0)[i] += h;
            let mut b = p.clone();
            b.pois.row_mut(0)[i] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            assert!((fd - g.grad.pois[&0][i]).abs() < 1e-6);
        }
    }

    #[test]
    fn apply_takes_a_descent_step() {
        let mut p = transe_2d();
        let g = grad_pair(
            &p,
            EdgeKind::Visit,
            &Triple::new(0, 0, 0),
            &Triple::new(1, 0, 1),
            0.0,
        )
        .unwrap();
        g.grad.apply(&mut p, 0.1);
        assert_eq!(p.pois.row(0), &[0.8, 0.0]);
        assert_eq!(p.users.row(0), &[0.2, 0.0]);
    }

    #[test]
    fn rejects_out_of_range_ids() {
        let sizes = VocabSizes {
            users: 2,
            pois: 2,
            relations: 1,
            content: 0,
        };
        let p = init_params(sizes, 3, 3, Variant::TransR, 0).unwrap();
        assert!(grad_pair(
            &p,
            EdgeKind::Visit,
            &Triple::new(0, 0, 0),
            &Triple::new(0, 0, 9),
            1.0
        )
        .is_err());
        assert!(grad_pair(
            &p,
            EdgeKind::Content,
            &Triple::new(0, 0, 0),
            &Triple::new(0, 0, 1),
            1.0
        )
        .is_err());
    }
}
