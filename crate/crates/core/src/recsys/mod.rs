//! Recommendation: translate a user through a spatiotemporal relation, rank
//! every POI by L1 distance in that relation's space, and measure
//! accuracy@k on held-out check-ins.

mod eval;
pub mod experiments;
mod model_file;
mod query;
mod rank;

pub use eval::{accuracy_from_ranks, evaluate, query_ranks, EvalQuery, EvalReport, DEFAULT_KS};
pub use model_file::{read_model, read_model_file, write_model, write_model_file, Model};
pub use query::{resolve_pattern, translate, translate_query, Query, Resolution};
pub use rank::{rank_pois, rank_pois_blocked, ProjectedPois, RankedResult};
