use rand::Rng;

use super::Sampling;
use crate::ingest::{Triple, TripleStore};

/// Attempts at drawing a corruption absent from the store before the last
/// candidate is accepted anyway.
pub const MAX_ATTEMPTS: usize = 100;

/// Probability of corrupting the head of a triple with this relation.
pub fn head_probability(store: &TripleStore, relation: u32, mode: Sampling) -> f64 {
    match mode {
        Sampling::Unif => 0.5,
        Sampling::Bern => {
            let tph = store.tph(relation);
            let hpt = store.hpt(relation);
            if tph + hpt > 0.0 {
                tph / (tph + hpt)
            } else {
                0.5
            }
        }
    }
}

/// Corrupts either the head or the tail with a uniformly drawn entity,
/// redrawing while the corruption is a known triple. A side with fewer than
/// two entities is never chosen; if neither side qualifies the triple is
/// returned unchanged.
pub fn sample_negative<R: Rng + ?Sized>(
    triple: &Triple,
    store: &TripleStore,
    mode: Sampling,
    rng: &mut R,
) -> Triple {
    let heads = store.num_heads();
    let tails = store.num_tails();
    let corrupt_head = match (heads >= 2, tails >= 2) {
        (false, false) => return *triple,
        (true, false) => true,
        (false, true) => false,
        (true, true) => rng.random::<f64>() < head_probability(store, triple.relation, mode),
    };
    let mut candidate = *triple;
    for _ in 0..MAX_ATTEMPTS {
        if corrupt_head {
            candidate.head = rng.random_range(0..heads as u32);
        } else {
            candidate.tail = rng.random_range(0..tails as u32);
        }
        if !store.contains(&candidate) {
            break;
        }
    }
    candidate
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn saturated_store_still_returns() {
        // Every (h, 0, t) exists, so every corruption is a known triple.
        let mut triples = Vec::new();
        for h in 0..3 {
            for t in 0..3 {
                triples.push(Triple::new(h, 0, t));
            }
        }
        let store = TripleStore::new(triples, 3, 1, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let n = sample_negative(&Triple::new(0, 0, 0), &store, Sampling::Bern, &mut rng);
            assert_eq!(n.relation, 0);
        }
    }

    #[test]
    fn exactly_one_side_changes() {
        let triples = (0..20).map(|i| Triple::new(i % 5, i % 2, i % 7)).collect();
        let store = TripleStore::new(triples, 5, 2, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in store.triples() {
            for _ in 0..20 {
                let n = sample_negative(t, &store, Sampling::Bern, &mut rng);
                assert_eq!(n.relation, t.relation);
                assert!((n.head == t.head) != (n.tail == t.tail), "{t:?} -> {n:?}");
                assert!(!store.contains(&n));
            }
        }
    }

    #[test]
    fn single_entity_side_is_never_corrupted() {
        let store = TripleStore::new(vec![Triple::new(0, 0, 0)], 1, 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = sample_negative(&Triple::new(0, 0, 0), &store, Sampling::Unif, &mut rng);
            assert_eq!(n.head, 0);
            assert_ne!(n.tail, 0);
        }
    }

    #[test]
    fn bern_probability_follows_relation_statistics() {
        // Relation 0: one head with three tails → tph 3, hpt 1.
        let store = TripleStore::new(
            vec![
                Triple::new(0, 0, 0),
                Triple::new(0, 0, 1),
                Triple::new(0, 0, 2),
            ],
            4,
            2,
            4,
        )
        .unwrap();
        assert_eq!(head_probability(&store, 0, Sampling::Bern), 0.75);
        assert_eq!(head_probability(&store, 0, Sampling::Unif), 0.5);
        assert_eq!(head_probability(&store, 1, Sampling::Bern), 0.5);
    }
}
