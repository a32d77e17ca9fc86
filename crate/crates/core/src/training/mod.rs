//! Mini-batch SGD over the margin-ranking objective.
//!
//! Each epoch shuffles the training triples, cuts them into batches, draws
//! negatives for every positive, accumulates the hinge gradients of the whole
//! batch and applies them in one step, then re-imposes the norm constraints on
//! every row the batch touched. All randomness of epoch `n` comes from streams
//! derived from `(seed, n)`, so a run resumed from the parameters after epoch
//! `n` continues exactly like an uninterrupted one.

mod config;
mod negative;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

pub use config::{Sampling, TrainConfig};
pub use negative::{head_probability, sample_negative, MAX_ATTEMPTS};

use crate::embedding::{
    accumulate_pair, constraint_excess, init_params, project_constraints, EdgeKind, ModelParams,
    SparseGrad, VocabSizes,
};
use crate::ingest::{Triple, TripleStore};
use crate::seed::rng_for;
use crate::{Error, Result};

/// Tolerance of the debug-mode constraint audit run after every batch.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// One positive/negative pair and its hinge loss under the parameters the
/// batch gradient was computed from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledPair {
    pub positive: Triple,
    pub negative: Triple,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Pairs with a strictly positive hinge.
    pub violations: u64,
    #[serde(skip)]
    pub pairs: u64,
    pub seconds: f64,
}

impl EpochStats {
    /// One line of the JSON-lines training log.
    pub fn log_line(&self) -> String {
        serde_json::to_string(self).expect("epoch stats serialize")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

/// Hooks into the training loop. Every method has a no-op default.
pub trait TrainObserver {
    /// Called with the pre-update parameters and the sampled pairs of a batch.
    fn before_update(&mut self, _params: &ModelParams, _kind: EdgeKind, _pairs: &[SampledPair]) {}

    /// Called after the update and constraint projection of a batch.
    fn after_update(&mut self, _params: &ModelParams, _kind: EdgeKind, _touched: &[Triple]) {}

    fn epoch_end(&mut self, _params: &ModelParams, _stats: &EpochStats) -> Result<()> {
        Ok(())
    }

    /// Called every `checkpoint_every` epochs and after the last one, with
    /// parameters already rounded to the precision of a model file.
    fn checkpoint(&mut self, _params: &ModelParams, _epochs_done: usize) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Parameters restored from a checkpoint together with the number of epochs
/// they had been trained for.
#[derive(Clone, Debug)]
pub struct Resume {
    pub params: ModelParams,
    pub epochs_done: usize,
}

/// Trains from a fresh initialisation on visit triples only.
pub fn train(store: &TripleStore, config: &TrainConfig) -> Result<(ModelParams, TrainReport)> {
    train_with(store, None, config, None, &mut ())
}

/// One epoch over `store` with an explicit random stream. The returned stats
/// carry epoch number 0.
pub fn train_epoch<R: Rng>(
    params: &mut ModelParams,
    store: &TripleStore,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<EpochStats> {
    config.validate()?;
    check_store(params, EdgeKind::Visit, store)?;
    run_epoch(
        params,
        Source { store, rng },
        None::<Source<'_, R>>,
        config,
        0,
        &mut (),
    )
}

/// General entry point: optional content triples (trained in alternating
/// batches with the visit triples), optional resume state and an observer.
pub fn train_with(
    visits: &TripleStore,
    content: Option<&TripleStore>,
    config: &TrainConfig,
    resume: Option<Resume>,
    observer: &mut dyn TrainObserver,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if visits.is_empty() {
        return Err(Error::Empty("training triple set"));
    }
    let content = content.filter(|c| !c.is_empty());
    let sizes = VocabSizes {
        users: visits.num_heads(),
        pois: visits.num_tails(),
        relations: visits.num_relations(),
        content: content.map_or(0, |c| c.num_relations()),
    };
    let (mut params, start) = match resume {
        None => (
            init_params(
                sizes,
                config.dim,
                config.rel_dim,
                config.variant,
                config.seed,
            )?,
            0,
        ),
        Some(Resume {
            params,
            epochs_done,
        }) => {
            if params.variant() != config.variant
                || params.dim() != config.dim
                || params.rel_dim() != config.rel_dim
            {
                return Err(Error::Config(
                    "checkpoint variant or dimensions differ from the configuration".into(),
                ));
            }
            if epochs_done > config.epochs {
                return Err(Error::Config(format!(
                    "checkpoint has {epochs_done} epochs, more than the configured {}",
                    config.epochs
                )));
            }
            (params, epochs_done)
        }
    };
    check_store(&params, EdgeKind::Visit, visits)?;
    if let Some(c) = content {
        check_store(&params, EdgeKind::Content, c)?;
    }

    let mut report = TrainReport::default();
    for epoch in start + 1..=config.epochs {
        let mut visit_rng = rng_for(config.seed, &format!("epoch/{epoch}/visits"));
        let mut content_rng = rng_for(config.seed, &format!("epoch/{epoch}/content"));
        let stats = run_epoch(
            &mut params,
            Source {
                store: visits,
                rng: &mut visit_rng,
            },
            content.map(|store| Source {
                store,
                rng: &mut content_rng,
            }),
            config,
            epoch,
            observer,
        )?;
        log::debug!(
            "epoch {epoch}: mean loss {:.6}, {} violations",
            stats.mean_loss,
            stats.violations
        );
        observer.epoch_end(&params, &stats)?;
        report.epochs.push(stats);
        if epoch % config.checkpoint_every == 0 || epoch == config.epochs {
            params.quantize_f32();
            observer.checkpoint(&params, epoch)?;
        }
    }
    Ok((params, report))
}

fn check_store(params: &ModelParams, kind: EdgeKind, store: &TripleStore) -> Result<()> {
    let sizes = params.sizes();
    let (heads, relations) = match kind {
        EdgeKind::Visit => (sizes.users, sizes.relations),
        EdgeKind::Content => (sizes.pois, sizes.content),
    };
    if store.num_heads() > heads
        || store.num_tails() > sizes.pois
        || store.num_relations() > relations
    {
        return Err(Error::Config(
            "triple store id spaces exceed the parameter tables".into(),
        ));
    }
    Ok(())
}

struct Source<'a, R> {
    store: &'a TripleStore,
    rng: &'a mut R,
}

struct BatchPlan {
    order: Vec<Triple>,
    batches: usize,
}

fn plan<R: Rng>(source: &mut Source<'_, R>, batch_size: usize) -> BatchPlan {
    let mut order = source.store.triples().to_vec();
    order.shuffle(source.rng);
    let batches = order.len().div_ceil(batch_size);
    BatchPlan { order, batches }
}

fn run_epoch<R: Rng, C: Rng>(
    params: &mut ModelParams,
    mut visits: Source<'_, R>,
    mut content: Option<Source<'_, C>>,
    config: &TrainConfig,
    epoch: usize,
    observer: &mut dyn TrainObserver,
) -> Result<EpochStats> {
    let started = Instant::now();
    let b = config.batch_size;
    let visit_plan = plan(&mut visits, b);
    let content_plan = content.as_mut().map(|c| plan(c, b));
    let content_batches = content_plan.as_ref().map_or(0, |p| p.batches);

    let mut state = BatchState::default();
    let mut batch_index = 0;
    for i in 0..visit_plan.batches.max(content_batches) {
        if i < visit_plan.batches {
            let end = ((i + 1) * b).min(visit_plan.order.len());
            run_batch(
                params,
                EdgeKind::Visit,
                &visit_plan.order[i * b..end],
                visits.store,
                visits.rng,
                config,
                &mut state,
                observer,
            )
            .map_err(|_| Error::Diverged {
                epoch,
                batch: batch_index,
            })?;
            batch_index += 1;
        }
        if let (Some(p), Some(c)) = (&content_plan, content.as_mut()) {
            if i < p.batches {
                let end = ((i + 1) * b).min(p.order.len());
                run_batch(
                    params,
                    EdgeKind::Content,
                    &p.order[i * b..end],
                    c.store,
                    c.rng,
                    config,
                    &mut state,
                    observer,
                )
                .map_err(|_| Error::Diverged {
                    epoch,
                    batch: batch_index,
                })?;
                batch_index += 1;
            }
        }
    }
    Ok(EpochStats {
        epoch,
        mean_loss: if state.pairs == 0 {
            0.0
        } else {
            state.loss / state.pairs as f64
        },
        violations: state.violations,
        pairs: state.pairs,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Default)]
struct BatchState {
    grad: SparseGrad,
    pairs_buf: Vec<SampledPair>,
    touched: Vec<Triple>,
    loss: f64,
    violations: u64,
    pairs: u64,
}

struct NonFinite;

#[allow(clippy::too_many_arguments)]
fn run_batch<R: Rng>(
    params: &mut ModelParams,
    kind: EdgeKind,
    batch: &[Triple],
    store: &TripleStore,
    rng: &mut R,
    config: &TrainConfig,
    state: &mut BatchState,
    observer: &mut dyn TrainObserver,
) -> std::result::Result<(), NonFinite> {
    state.grad.clear();
    state.pairs_buf.clear();
    state.touched.clear();
    let mut batch_loss = 0.0;
    for pos in batch {
        for _ in 0..config.negatives {
            let neg = sample_negative(pos, store, config.sampling, rng);
            let loss = accumulate_pair(params, kind, pos, &neg, config.margin, &mut state.grad);
            batch_loss += loss;
            if loss > 0.0 {
                state.violations += 1;
            }
            state.pairs_buf.push(SampledPair {
                positive: *pos,
                negative: neg,
                loss,
            });
            state.touched.push(neg);
        }
        state.touched.push(*pos);
    }
    if !batch_loss.is_finite() {
        return Err(NonFinite);
    }
    state.loss += batch_loss;
    state.pairs += state.pairs_buf.len() as u64;
    observer.before_update(params, kind, &state.pairs_buf);
    state.grad.apply(params, config.learning_rate);
    project_constraints(params, kind, &state.touched);
    debug_assert!(
        constraint_excess(params, kind, &state.touched) <= AUDIT_TOLERANCE,
        "norm constraints violated after a batch"
    );
    observer.after_update(params, kind, &state.touched);
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::embedding::{grad_pair, score, Variant};
    use crate::linalg::Matrix;

    fn random_store(seed: u64, n: usize, users: u32, relations: u32, pois: u32) -> TripleStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut triples: Vec<Triple> = (0..n)
            .map(|_| {
                Triple::new(
                    rng.random_range(0..users),
                    rng.random_range(0..relations),
                    rng.random_range(0..pois),
                )
            })
            .collect();
        triples.sort();
        triples.dedup();
        TripleStore::new(triples, users as usize, relations as usize, pois as usize).unwrap()
    }

    fn small_config(variant: Variant) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            margin: 1.0,
            batch_size: 16,
            epochs: 20,
            seed: 5,
            variant,
            dim: 8,
            rel_dim: 8,
            ..Default::default()
        }
    }

    #[test]
    fn perfect_params_are_a_fixed_point() {
        // u0 + r0 = v0 exactly; the only other POI is far away.
        let visits = crate::embedding::RelationSet {
            vectors: Matrix::from_vec(1, 2, vec![0.0, 0.5]),
            projections: vec![],
            normals: Matrix::zeros(0, 2),
        };
        let content = crate::embedding::RelationSet {
            vectors: Matrix::zeros(0, 2),
            projections: vec![],
            normals: Matrix::zeros(0, 2),
        };
        let mut params = ModelParams::from_parts(
            Variant::TransE,
            Matrix::from_vec(1, 2, vec![0.5, 0.0]),
            Matrix::from_vec(2, 2, vec![0.5, 0.5, -0.5, -0.5]),
            visits,
            content,
        )
        .unwrap();
        let before = params.clone();
        let store = TripleStore::new(vec![Triple::new(0, 0, 0)], 1, 1, 2).unwrap();
        let config = TrainConfig {
            margin: 0.0,
            dim: 2,
            rel_dim: 2,
            variant: Variant::TransE,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stats = train_epoch(&mut params, &store, &config, &mut rng).unwrap();
        assert_eq!(stats.mean_loss, 0.0);
        assert_eq!(stats.violations, 0);
        assert_eq!(params, before);
        assert!(score(&params, 0, 0, 1).unwrap().score > 0.0);
    }

    #[test]
    fn single_pair_step_is_minus_rate_times_gradient() {
        for variant in Variant::ALL {
            let store = TripleStore::new(vec![Triple::new(0, 0, 1)], 2, 1, 3).unwrap();
            let sizes = VocabSizes {
                users: 2,
                pois: 3,
                relations: 1,
                content: 0,
            };
            let start = init_params(sizes, 3, 3, variant, 11).unwrap();
            let config = TrainConfig {
                learning_rate: 1e-3,
                margin: 5.0,
                batch_size: 1,
                variant,
                dim: 3,
                rel_dim: 3,
                ..Default::default()
            };
            // Replay the random stream to learn which negative was drawn.
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut probe = ReplayProbe::default();
            let mut params = start.clone();
            run_epoch(
                &mut params,
                Source {
                    store: &store,
                    rng: &mut rng,
                },
                None::<Source<'_, ChaCha8Rng>>,
                &config,
                1,
                &mut probe,
            )
            .unwrap();
            let pair = probe.pairs[0];
            let g =
                grad_pair(&start, EdgeKind::Visit, &pair.positive, &pair.negative, 5.0).unwrap();
            let mut expected = start.clone();
            g.grad.apply(&mut expected, 1e-3);
            project_constraints(
                &mut expected,
                EdgeKind::Visit,
                &[pair.negative, pair.positive],
            );
            assert_eq!(params, expected, "{variant}");
        }
    }

    #[derive(Default)]
    struct ReplayProbe {
        pairs: Vec<SampledPair>,
        mismatches: usize,
    }

    impl TrainObserver for ReplayProbe {
        fn before_update(&mut self, params: &ModelParams, kind: EdgeKind, pairs: &[SampledPair]) {
            for p in pairs {
                let s = crate::embedding::score_triple(params, kind, &p.positive)
                    .unwrap()
                    .score;
                let s_neg = crate::embedding::score_triple(params, kind, &p.negative)
                    .unwrap()
                    .score;
                let expected = (s + 1.0 - s_neg).max(0.0);
                if (expected - p.loss).abs() > 1e-12 * expected.abs().max(1.0) {
                    self.mismatches += 1;
                }
            }
            self.pairs.extend_from_slice(pairs);
        }
    }

    #[test]
    fn replayed_losses_match_recorded_losses() {
        let store = random_store(1, 300, 20, 5, 40);
        for variant in Variant::ALL {
            let config = TrainConfig {
                epochs: 3,
                ..small_config(variant)
            };
            let mut probe = ReplayProbe::default();
            train_with(&store, None, &config, None, &mut probe).unwrap();
            assert_eq!(probe.mismatches, 0);
            assert_eq!(probe.pairs.len(), 3 * store.len());
            for p in &probe.pairs {
                assert_eq!(p.positive.relation, p.negative.relation);
                assert!(!store.contains(&p.negative));
            }
        }
    }

    #[test]
    fn loss_decreases_on_synthetic_data() {
        let store = random_store(2, 200, 20, 4, 30);
        for variant in Variant::ALL {
            let (_, report) = train(&store, &small_config(variant)).unwrap();
            let losses = report.losses();
            assert_eq!(losses.len(), 20);
            assert!(losses[19] < losses[0], "{variant}: {losses:?}");
            assert!(losses.iter().all(|l| l.is_finite() && *l >= 0.0));
        }
    }

    #[test]
    fn one_epoch_runs_exactly_once() {
        let store = random_store(3, 50, 5, 2, 10);
        let config = TrainConfig {
            epochs: 1,
            ..small_config(Variant::TransE)
        };
        let (_, report) = train(&store, &config).unwrap();
        assert_eq!(report.epochs.len(), 1);
        assert_eq!(report.epochs[0].epoch, 1);
        assert_eq!(report.epochs[0].pairs, store.len() as u64);
    }

    #[test]
    fn same_seed_same_params() {
        let store = random_store(4, 100, 10, 3, 15);
        let config = small_config(Variant::TransR);
        let (a, ra) = train(&store, &config).unwrap();
        let (b, rb) = train(&store, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.losses(), rb.losses());
    }

    #[derive(Default)]
    struct Checkpoints(Vec<(usize, ModelParams)>);

    impl TrainObserver for Checkpoints {
        fn checkpoint(&mut self, params: &ModelParams, epochs_done: usize) -> Result<()> {
            self.0.push((epochs_done, params.clone()));
            Ok(())
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let store = random_store(5, 120, 10, 3, 15);
        let config = TrainConfig {
            epochs: 9,
            checkpoint_every: 4,
            ..small_config(Variant::TransH)
        };
        let mut cps = Checkpoints::default();
        let (full, _) = train_with(&store, None, &config, None, &mut cps).unwrap();
        let epochs: Vec<usize> = cps.0.iter().map(|c| c.0).collect();
        assert_eq!(epochs, vec![4, 8, 9]);
        let (_, at4) = cps.0[0].clone();
        let resume = Resume {
            params: at4,
            epochs_done: 4,
        };
        let (resumed, report) = train_with(&store, None, &config, Some(resume), &mut ()).unwrap();
        assert_eq!(report.epochs.len(), 5);
        assert_eq!(resumed, full);
    }

    #[test]
    fn huge_learning_rate_is_reported_as_divergence() {
        let store = random_store(6, 100, 10, 3, 15);
        let config = TrainConfig {
            learning_rate: 1e308,
            ..small_config(Variant::TransE)
        };
        let err = train(&store, &config).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn log_line_has_the_four_fields() {
        let stats = EpochStats {
            epoch: 3,
            mean_loss: 0.5,
            violations: 7,
            pairs: 10,
            seconds: 0.25,
        };
        let v: serde_json::Value = serde_json::from_str(&stats.log_line()).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["epoch", "mean_loss", "seconds", "violations"]);
        assert_eq!(obj["epoch"], 3);
    }
}
