use std::collections::{HashMap, HashSet};

use super::discretize::Discretizer;
use super::vocab::Vocab;
use super::CheckIn;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Training triples with per-relation Bernoulli statistics and an O(1)
/// membership index.
#[derive(Clone, Debug)]
pub struct TripleStore {
    triples: Vec<Triple>,
    num_heads: usize,
    num_relations: usize,
    num_tails: usize,
    /// Mean number of distinct tails per head, per relation.
    tph: Vec<f64>,
    /// Mean number of distinct heads per tail, per relation.
    hpt: Vec<f64>,
    members: HashSet<Triple>,
}

impl TripleStore {
    pub fn new(
        triples: Vec<Triple>,
        num_heads: usize,
        num_relations: usize,
        num_tails: usize,
    ) -> Result<Self> {
        for t in &triples {
            check(t.head, num_heads, "head")?;
            check(t.relation, num_relations, "relation")?;
            check(t.tail, num_tails, "tail")?;
        }
        let members: HashSet<Triple> = triples.iter().copied().collect();

        let mut tails_of: HashMap<(u32, u32), usize> = HashMap::new();
        let mut heads_of: HashMap<(u32, u32), usize> = HashMap::new();
        let mut pairs = vec![0usize; num_relations];
        for t in &members {
            *tails_of.entry((t.relation, t.head)).or_default() += 1;
            *heads_of.entry((t.relation, t.tail)).or_default() += 1;
            pairs[t.relation as usize] += 1;
        }
        let mut heads = vec![0usize; num_relations];
        let mut tails = vec![0usize; num_relations];
        for (r, _) in tails_of.keys() {
            heads[*r as usize] += 1;
        }
        for (r, _) in heads_of.keys() {
            tails[*r as usize] += 1;
        }
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let tph = (0..num_relations)
            .map(|r| ratio(pairs[r], heads[r]))
            .collect();
        let hpt = (0..num_relations)
            .map(|r| ratio(pairs[r], tails[r]))
            .collect();

        Ok(TripleStore {
            triples,
            num_heads,
            num_relations,
            num_tails,
            tph,
            hpt,
            members,
        })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_heads(&self) -> usize {
        self.num_heads
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn num_tails(&self) -> usize {
        self.num_tails
    }

    pub fn tph(&self, relation: u32) -> f64 {
        self.tph[relation as usize]
    }

    pub fn hpt(&self, relation: u32) -> f64 {
        self.hpt[relation as usize]
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.members.contains(t)
    }

    /// Same id spaces, different triples.
    pub fn with_triples(&self, triples: Vec<Triple>) -> Result<Self> {
        Self::new(triples, self.num_heads, self.num_relations, self.num_tails)
    }
}

fn check(id: u32, size: usize, kind: &'static str) -> Result<()> {
    if (id as usize) < size {
        Ok(())
    } else {
        Err(Error::IdOutOfRange { kind, id, size })
    }
}

/// Converts check-ins into `(user, pattern, poi)` triples with fresh vocabularies.
pub fn build_triples(checkins: &[CheckIn], disc: &Discretizer) -> (Vocab, TripleStore) {
    build_triples_with(Vocab::default(), checkins, disc)
}

/// Like [`build_triples`], extending an existing vocabulary. Entity
/// vocabularies may be pre-seeded so that ids cover POIs and users that never
/// appear in these check-ins.
pub fn build_triples_with(
    mut vocab: Vocab,
    checkins: &[CheckIn],
    disc: &Discretizer,
) -> (Vocab, TripleStore) {
    let triples: Vec<Triple> = checkins
        .iter()
        .map(|c| {
            let head = vocab.users.observe(c.user.clone());
            let relation = vocab.relations.observe(disc.pattern(c));
            let tail = vocab.pois.observe(c.poi.clone());
            Triple::new(head, relation, tail)
        })
        .collect();
    let store = TripleStore::new(
        triples,
        vocab.users.len(),
        vocab.relations.len(),
        vocab.pois.len(),
    )
    .expect("ids come from the vocabularies");
    (vocab, store)
}
