use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::Error;

/// A `<time-slot, region>` spatiotemporal pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    pub slot: u32,
    pub region: u32,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.slot, self.region)
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Format(format!("bad pattern key {s:?}"));
        let (slot, region) = s.split_once(':').ok_or_else(bad)?;
        Ok(Pattern {
            slot: slot.parse().map_err(|_| bad())?,
            region: region.parse().map_err(|_| bad())?,
        })
    }
}

/// A `<word, region>` content pattern.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentKey {
    pub word: String,
    pub region: u32,
}

impl fmt::Display for ContentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.word, self.region)
    }
}

impl FromStr for ContentKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Format(format!("bad content key {s:?}"));
        let (word, region) = s.rsplit_once(':').ok_or_else(bad)?;
        Ok(ContentKey {
            word: word.to_string(),
            region: region.parse().map_err(|_| bad())?,
        })
    }
}

/// Dense, contiguous ids for keys in first-seen order, with occurrence counts.
#[derive(Clone, Debug)]
pub struct Interner<K> {
    keys: Vec<K>,
    ids: HashMap<K, u32>,
    counts: Vec<u64>,
}

impl<K> Default for Interner<K> {
    fn default() -> Self {
        Interner {
            keys: Vec::new(),
            ids: HashMap::new(),
            counts: Vec::new(),
        }
    }
}

impl<K: Clone + Eq + Hash> PartialEq for Interner<K> {
    fn eq(&self, other: &Self) -> bool {
        self.keys == other.keys && self.counts == other.counts
    }
}

impl<K: Clone + Eq + Hash> Interner<K> {
    pub fn from_keys(keys: Vec<K>) -> Result<Self, Error> {
        let mut it = Interner::default();
        for k in keys {
            if it.ids.contains_key(&k) {
                return Err(Error::Format("duplicate vocabulary key".into()));
            }
            it.intern(k);
        }
        Ok(it)
    }

    /// Id of `key`, allocating the next id if unseen. Does not count.
    pub fn intern(&mut self, key: K) -> u32 {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.keys.len() as u32;
        self.keys.push(key.clone());
        self.ids.insert(key, id);
        self.counts.push(0);
        id
    }

    /// Interns `key` and bumps its count.
    pub fn observe(&mut self, key: K) -> u32 {
        let id = self.intern(key);
        self.counts[id as usize] += 1;
        id
    }

    pub fn id<Q>(&self, key: &Q) -> Option<u32>
    where
        K: std::borrow::Borrow<Q>,
        Q: Hash + Eq + ?Sized,
    {
        self.ids.get(key).copied()
    }

    pub fn key(&self, id: u32) -> Option<&K> {
        self.keys.get(id as usize)
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn keys(&self) -> &[K] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Vocabularies for users, POIs, spatiotemporal patterns and content patterns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocab {
    pub users: Interner<String>,
    pub pois: Interner<String>,
    pub relations: Interner<Pattern>,
    pub content: Interner<ContentKey>,
}
