//! Model parameters and the translation score functions.
//!
//! A triple `(h, r, t)` scores `‖proj_r(h) + r − proj_r(t)‖₂²`, where the
//! projection depends on the variant:
//!
//! | variant | `proj_r(e)` |
//! |---------|-------------|
//! | TransE  | `e` |
//! | TransH  | `e − (w_rᵀe) w_r` with unit normal `w_r` |
//! | TransR  | `e · M_r` with `M_r ∈ ℝ^{d×m}` |
//!
//! Two edge kinds share the POI table: visits `(user, <time, region>, poi)`
//! and content links `(poi, <word, region>, poi)`.

mod constraints;
mod grad;
mod score;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use constraints::{constraint_excess, project_constraints};
pub(crate) use grad::accumulate_pair;
pub use grad::{grad_pair, PairGrad, RelationGrad, SparseGrad};
pub use score::{score, score_triple, ScoreBreakdown};

use crate::linalg::{norm2, Matrix};
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Variant {
    TransE,
    TransH,
    #[default]
    TransR,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::TransR, Variant::TransH, Variant::TransE];

    pub(crate) fn code(self) -> u32 {
        match self {
            Variant::TransE => 0,
            Variant::TransH => 1,
            Variant::TransR => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Variant::TransE),
            1 => Some(Variant::TransH),
            2 => Some(Variant::TransR),
            _ => None,
        }
    }

    /// Whether the variant needs the relation space to match the entity space.
    pub fn requires_equal_dims(self) -> bool {
        !matches!(self, Variant::TransR)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transe" | "sta-e" | "e" => Ok(Variant::TransE),
            "transh" | "sta-h" | "h" => Ok(Variant::TransH),
            "transr" | "sta" | "r" => Ok(Variant::TransR),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::TransE => "transE",
            Variant::TransH => "transH",
            Variant::TransR => "transR",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    /// `(user, <time, region>, poi)`
    Visit,
    /// `(poi, <word, region>, poi)`
    Content,
}

/// Relation vectors plus the per-relation operator of the variant.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationSet {
    /// `n × m`
    pub vectors: Matrix,
    /// TransR only: one `d × m` matrix per relation.
    pub projections: Vec<Matrix>,
    /// TransH only: `n × d` unit normals.
    pub normals: Matrix,
}

impl RelationSet {
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VocabSizes {
    pub users: usize,
    pub pois: usize,
    pub relations: usize,
    pub content: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    variant: Variant,
    dim: usize,
    rel_dim: usize,
    pub users: Matrix,
    pub pois: Matrix,
    pub visits: RelationSet,
    pub content: RelationSet,
}

impl ModelParams {
    /// Assembles parameters from raw tables, checking shapes.
    pub fn from_parts(
        variant: Variant,
        users: Matrix,
        pois: Matrix,
        visits: RelationSet,
        content: RelationSet,
    ) -> Result<Self> {
        let dim = users.cols();
        let rel_dim = visits.vectors.cols();
        check_dims(variant, dim, rel_dim)?;
        let bad = |what: &str| Error::Config(format!("inconsistent parameter shapes: {what}"));
        if pois.cols() != dim {
            return Err(bad("poi table"));
        }
        for rs in [&visits, &content] {
            if rs.vectors.cols() != rel_dim {
                return Err(bad("relation vectors"));
            }
            match variant {
                Variant::TransR => {
                    if rs.projections.len() != rs.len()
                        || rs
                            .projections
                            .iter()
                            .any(|m| m.rows() != dim || m.cols() != rel_dim)
                    {
                        return Err(bad("projections"));
                    }
                }
                Variant::TransH => {
                    if rs.normals.rows() != rs.len() || rs.normals.cols() != dim {
                        return Err(bad("normals"));
                    }
                }
                Variant::TransE => {}
            }
        }
        Ok(ModelParams {
            variant,
            dim,
            rel_dim,
            users,
            pois,
            visits,
            content,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Entity dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Relation dimension `m`.
    pub fn rel_dim(&self) -> usize {
        self.rel_dim
    }

    pub fn sizes(&self) -> VocabSizes {
        VocabSizes {
            users: self.users.rows(),
            pois: self.pois.rows(),
            relations: self.visits.len(),
            content: self.content.len(),
        }
    }

    pub fn relations(&self, kind: EdgeKind) -> &RelationSet {
        match kind {
            EdgeKind::Visit => &self.visits,
            EdgeKind::Content => &self.content,
        }
    }

    pub(crate) fn relations_mut(&mut self, kind: EdgeKind) -> &mut RelationSet {
        match kind {
            EdgeKind::Visit => &mut self.visits,
            EdgeKind::Content => &mut self.content,
        }
    }

    pub fn heads(&self, kind: EdgeKind) -> &Matrix {
        match kind {
            EdgeKind::Visit => &self.users,
            EdgeKind::Content => &self.pois,
        }
    }

    pub(crate) fn heads_mut(&mut self, kind: EdgeKind) -> &mut Matrix {
        match kind {
            EdgeKind::Visit => &mut self.users,
            EdgeKind::Content => &mut self.pois,
        }
    }

    /// Maps an entity vector into the relation space of `relation`.
    pub fn project_into(&self, kind: EdgeKind, relation: usize, entity: &[f64], out: &mut [f64]) {
        let rs = self.relations(kind);
        match self.variant {
            Variant::TransE => out.copy_from_slice(entity),
            Variant::TransH => {
                let w = rs.normals.row(relation);
                let a = crate::linalg::dot(w, entity);
                for ((o, e), wi) in out.iter_mut().zip(entity).zip(w) {
                    *o = e - a * wi;
                }
            }
            Variant::TransR => crate::linalg::vec_mat(entity, &rs.projections[relation], out),
        }
    }

    /// Rounds every parameter to `f32` precision, matching what a model file
    /// stores. Rounding is towards zero so no row norm grows.
    pub fn quantize_f32(&mut self) {
        let q = |m: &mut Matrix| {
            m.as_mut_slice()
                .iter_mut()
                .for_each(|x| *x = f64::from(to_f32_towards_zero(*x)))
        };
        q(&mut self.users);
        q(&mut self.pois);
        for rs in [&mut self.visits, &mut self.content] {
            q(&mut rs.vectors);
            q(&mut rs.normals);
            rs.projections.iter_mut().for_each(q);
        }
    }
}

/// Nearest `f32` whose magnitude does not exceed `|x|`.
pub fn to_f32_towards_zero(x: f64) -> f32 {
    let f = x as f32;
    if f.is_finite() && f != 0.0 && f64::from(f).abs() > x.abs() {
        f32::from_bits(f.to_bits() - 1)
    } else {
        f
    }
}

fn check_dims(variant: Variant, dim: usize, rel_dim: usize) -> Result<()> {
    if dim == 0 || rel_dim == 0 {
        return Err(Error::Config(
            "embedding dimensions must be at least 1".into(),
        ));
    }
    if variant.requires_equal_dims() && dim != rel_dim {
        return Err(Error::Config(format!(
            "{variant} requires d = m (got d = {dim}, m = {rel_dim})"
        )));
    }
    Ok(())
}

/// Random initialisation: rows uniform in `[−6/√d, 6/√d]` then scaled to unit
/// norm; TransR projections start as the identity pattern, TransH normals
/// as random unit vectors. Deterministic in `seed`.
pub fn init_params(
    sizes: VocabSizes,
    dim: usize,
    rel_dim: usize,
    variant: Variant,
    seed: u64,
) -> Result<ModelParams> {
    check_dims(variant, dim, rel_dim)?;
    if sizes.users == 0 {
        return Err(Error::Empty("user vocabulary"));
    }
    if sizes.pois == 0 {
        return Err(Error::Empty("POI vocabulary"));
    }
    if sizes.relations == 0 {
        return Err(Error::Empty("relation vocabulary"));
    }
    let mut rng = rng_for(seed, "embedding/init");
    let bound = 6.0 / (dim as f64).sqrt();
    let mut table = |rows: usize, cols: usize| {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let row = m.row_mut(i);
            row.iter_mut()
                .for_each(|x| *x = rng.random_range(-bound..bound));
            let n = norm2(row);
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        m
    };
    let users = table(sizes.users, dim);
    let pois = table(sizes.pois, dim);
    let mut relation_set = |n: usize| {
        let vectors = table(n, rel_dim);
        let normals = if variant == Variant::TransH {
            table(n, dim)
        } else {
            Matrix::zeros(0, dim)
        };
        let projections = if variant == Variant::TransR {
            vec![Matrix::identity_pattern(dim, rel_dim); n]
        } else {
            Vec::new()
        };
        RelationSet {
            vectors,
            projections,
            normals,
        }
    };
    let visits = relation_set(sizes.relations);
    let content = relation_set(sizes.content);
    ModelParams::from_parts(variant, users, pois, visits, content)
}
