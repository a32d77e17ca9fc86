//! Synthetic datasets with planted structure, for tests, benchmarks and demos.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{CheckIn, Pattern, Triple, TripleStore};
use crate::linalg::{squared_distance, Matrix};
use crate::recsys::{EvalQuery, Query, Resolution};
use crate::seed::rng_for;

/// Triples generated by a ground-truth translation model: a check-in of user
/// `u` under relation `r` goes to the POI nearest to `u + r + ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub users: usize,
    pub pois: usize,
    pub relations: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of `ε`.
    pub noise: f64,
    /// Per-coordinate standard deviation of the true POI embeddings. Users
    /// and relations use `scale / √2` so that `u + r` matches the POI spread.
    pub scale: f64,
    pub train_triples: usize,
    pub test_queries: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            users: 50,
            pois: 200,
            relations: 20,
            dim: 16,
            noise: 0.05,
            scale: 4.0,
            train_triples: 5000,
            test_queries: 500,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Planted {
    pub train: TripleStore,
    pub test: Vec<EvalQuery>,
    pub true_users: Matrix,
    pub true_pois: Matrix,
    pub true_relations: Matrix,
}

pub fn planted_triples(config: &PlantedConfig) -> Planted {
    let mut rng = rng_for(config.seed, "synth/planted");
    let d = config.dim;
    let mut table = |rows: usize, std: f64| {
        let normal = Normal::new(0.0, std).expect("finite deviation");
        let data = (0..rows * d).map(|_| normal.sample(&mut rng)).collect();
        Matrix::from_vec(rows, d, data)
    };
    let half = config.scale / 2f64.sqrt();
    let users = table(config.users, half);
    let relations = table(config.relations, half);
    let pois = table(config.pois, config.scale);

    let noise = Normal::new(0.0, config.noise).expect("finite noise");
    let mut point = vec![0.0; d];
    let mut draw = |rng: &mut crate::seed::Rng| {
        let u = rng.random_range(0..config.users);
        let r = rng.random_range(0..config.relations);
        for ((p, ui), ri) in point.iter_mut().zip(users.row(u)).zip(relations.row(r)) {
            *p = ui + ri + noise.sample(rng);
        }
        let v = (0..config.pois)
            .min_by(|&a, &b| {
                squared_distance(pois.row(a), &point)
                    .total_cmp(&squared_distance(pois.row(b), &point))
            })
            .expect("at least one POI");
        Triple::new(u as u32, r as u32, v as u32)
    };
    let mut rng = rng_for(config.seed, "synth/planted/samples");
    let train: Vec<Triple> = (0..config.train_triples).map(|_| draw(&mut rng)).collect();
    let test = (0..config.test_queries)
        .map(|_| {
            let t = draw(&mut rng);
            EvalQuery {
                query: Query {
                    user: t.head,
                    timestamp: 0,
                    lat: 0.0,
                    lon: 0.0,
                    pattern: Pattern {
                        slot: t.relation,
                        region: 0,
                    },
                    resolution: Resolution::Observed(t.relation),
                },
                truth: t.tail,
            }
        })
        .collect();
    Planted {
        train: TripleStore::new(train, config.users, config.relations, config.pois)
            .expect("ids drawn in range"),
        test,
        true_users: users,
        true_pois: pois,
        true_relations: relations,
    }
}

/// Check-ins in a small world of geographic regions and POI categories.
///
/// Every POI belongs to one region and one category and carries the category
/// name as its content word. Each user favours one category and visits warm
/// POIs of that category in every region at a handful of hours. Each
/// region/category group also holds cold POIs, visited once by a few fans.
#[derive(Clone, Debug, PartialEq)]
pub struct ContentWorldConfig {
    /// At most 4; region centres sit on a 10° grid.
    pub regions: usize,
    pub categories: usize,
    pub warm_per_group: usize,
    pub cold_per_group: usize,
    pub users: usize,
    pub checkins_per_user: usize,
    /// Distinct visitors of each cold POI.
    pub cold_visitors: usize,
    /// Hours of the day at which check-ins happen.
    pub hours: Vec<u32>,
    pub seed: u64,
}

impl Default for ContentWorldConfig {
    fn default() -> Self {
        ContentWorldConfig {
            regions: 4,
            categories: 6,
            warm_per_group: 3,
            cold_per_group: 1,
            users: 40,
            checkins_per_user: 60,
            cold_visitors: 2,
            hours: vec![9, 13, 18, 21],
            seed: 0,
        }
    }
}

const CATEGORY_WORDS: [&str; 12] = [
    "cafe", "bar", "gym", "museum", "park", "bakery", "cinema", "library", "market", "pizza",
    "theater", "pool",
];

struct Poi {
    key: String,
    lat: f64,
    lon: f64,
    word: String,
}

pub fn content_world(config: &ContentWorldConfig) -> Vec<CheckIn> {
    assert!(config.regions >= 1 && config.regions <= 4, "1 to 4 regions");
    assert!(config.categories >= 1 && config.categories <= CATEGORY_WORDS.len());
    assert!(!config.hours.is_empty() && config.hours.iter().all(|h| *h < 24));
    let mut rng = rng_for(config.seed, "synth/content-world");
    let centres = [(0.0, 0.0), (0.0, 10.0), (10.0, 0.0), (10.0, 10.0)];
    let group = config.warm_per_group + config.cold_per_group;
    let mut pois = Vec::new();
    for (region, centre) in centres.iter().enumerate().take(config.regions) {
        for (category, word) in CATEGORY_WORDS.iter().enumerate().take(config.categories) {
            for j in 0..group {
                pois.push(Poi {
                    key: format!("p{region}-{category}-{j}"),
                    lat: centre.0 + rng.random_range(-0.5..0.5),
                    lon: centre.1 + rng.random_range(-0.5..0.5),
                    word: word.to_string(),
                });
            }
        }
    }
    let poi_at = |region: usize, category: usize, j: usize| {
        (region * config.categories + category) * group + j
    };

    let day0: i64 = 1_300_000_000 - 1_300_000_000 % 86_400;
    let record = |rng: &mut crate::seed::Rng, user: usize, poi: &Poi| {
        let day = rng.random_range(0..90i64);
        let hour = *config.hours.choose(rng).expect("nonempty hours");
        CheckIn {
            user: format!("u{user}"),
            poi: poi.key.clone(),
            timestamp: day0 + day * 86_400 + i64::from(hour) * 3_600 + rng.random_range(0..3_600),
            lat: poi.lat,
            lon: poi.lon,
            words: vec![poi.word.clone()],
        }
    };

    let mut per_user: Vec<Vec<CheckIn>> = vec![Vec::new(); config.users];
    for (user, records) in per_user.iter_mut().enumerate() {
        let category = user % config.categories;
        for _ in 0..config.checkins_per_user {
            let region = rng.random_range(0..config.regions);
            let j = rng.random_range(0..config.warm_per_group);
            records.push(record(&mut rng, user, &pois[poi_at(region, category, j)]));
        }
    }
    for region in 0..config.regions {
        for category in 0..config.categories {
            let mut fans: Vec<usize> = (0..config.users)
                .filter(|u| u % config.categories == category)
                .collect();
            for j in config.warm_per_group..group {
                fans.shuffle(&mut rng);
                for &user in fans.iter().take(config.cold_visitors) {
                    let r = record(&mut rng, user, &pois[poi_at(region, category, j)]);
                    per_user[user].push(r);
                }
            }
        }
    }
    let mut out = Vec::new();
    for mut records in per_user {
        records.sort_by_key(|c| c.timestamp);
        out.extend(records);
    }
    out
}

/// Keys of the POIs generated as cold by [`content_world`].
pub fn content_world_cold_keys(config: &ContentWorldConfig) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for region in 0..config.regions {
        for category in 0..config.categories {
            for j in config.warm_per_group..config.warm_per_group + config.cold_per_group {
                out.insert(format!("p{region}-{category}-{j}"));
            }
        }
    }
    out
}
