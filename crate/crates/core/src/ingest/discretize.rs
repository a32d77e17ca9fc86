use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use super::region::{fit_regions, RegionModel};
use super::time::{discretize_time_with_offset, TimeScheme};
use super::vocab::Pattern;
use super::CheckIn;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum SpaceScheme {
    KMeans {
        regions: usize,
        seed: u64,
    },
    /// Two-column `key<TAB>region` file; keys are POI keys or `lat,lon`.
    RegionFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizerConfig {
    pub time: TimeScheme,
    pub utc_offset_secs: i32,
    pub space: SpaceScheme,
}

impl Default for DiscretizerConfig {
    fn default() -> Self {
        DiscretizerConfig {
            time: TimeScheme::Hourly,
            utc_offset_secs: 0,
            space: SpaceScheme::KMeans {
                regions: 200,
                seed: 0,
            },
        }
    }
}

/// Explicit key → region table loaded from a region file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionLookup {
    names: Vec<String>,
    by_key: HashMap<String, u32>,
}

impl RegionLookup {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(BufReader::new(file))
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut lookup = RegionLookup::default();
        let mut ids: HashMap<String, u32> = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (key, region) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!(
                    "region file line {}: expected key<TAB>region",
                    n + 1
                ))
            })?;
            let next = ids.len() as u32;
            let id = *ids.entry(region.trim().to_string()).or_insert_with(|| {
                lookup.names.push(region.trim().to_string());
                next
            });
            lookup.by_key.insert(key.trim().to_string(), id);
        }
        if lookup.names.is_empty() {
            return Err(Error::Empty("region file"));
        }
        Ok(lookup)
    }

    pub fn from_parts(names: Vec<String>, entries: Vec<(String, u32)>) -> Self {
        RegionLookup {
            names,
            by_key: entries.into_iter().collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Entries sorted by key, for stable serialization.
    pub fn entries(&self) -> Vec<(&str, u32)> {
        let mut v: Vec<_> = self.by_key.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        v.sort_unstable();
        v
    }

    fn get(&self, poi: Option<&str>, lat: f64, lon: f64) -> Option<u32> {
        poi.and_then(|p| self.by_key.get(p))
            .or_else(|| self.by_key.get(&coordinate_key(lat, lon)))
            .copied()
    }
}

pub(crate) fn coordinate_key(lat: f64, lon: f64) -> String {
    format!("{lat},{lon}")
}

/// Fitted time and space discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretizer {
    time: TimeScheme,
    utc_offset_secs: i32,
    regions: RegionModel,
    lookup: Option<RegionLookup>,
}

impl Discretizer {
    pub fn new(
        time: TimeScheme,
        utc_offset_secs: i32,
        regions: RegionModel,
        lookup: Option<RegionLookup>,
    ) -> Self {
        Discretizer {
            time,
            utc_offset_secs,
            regions,
            lookup,
        }
    }

    /// Fits the space model on the training check-ins only. k-means runs on
    /// one coordinate per distinct POI (its first training location).
    pub fn fit<'a, I>(train: I, config: &DiscretizerConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a CheckIn>,
    {
        let train: Vec<&CheckIn> = train.into_iter().collect();
        let (regions, lookup) = match &config.space {
            SpaceScheme::KMeans { regions, seed } => {
                let mut seen = std::collections::HashSet::new();
                let coords: Vec<(f64, f64)> = train
                    .iter()
                    .filter(|c| seen.insert(c.poi.as_str()))
                    .map(|c| c.coord())
                    .collect();
                (fit_regions(&coords, *regions, *seed)?, None)
            }
            SpaceScheme::RegionFile(path) => {
                let lookup = RegionLookup::read(path)?;
                (lookup_centroids(&lookup, &train), Some(lookup))
            }
        };
        Ok(Discretizer {
            time: config.time,
            utc_offset_secs: config.utc_offset_secs,
            regions,
            lookup,
        })
    }

    pub fn time_scheme(&self) -> TimeScheme {
        self.time
    }

    pub fn utc_offset_secs(&self) -> i32 {
        self.utc_offset_secs
    }

    pub fn region_model(&self) -> &RegionModel {
        &self.regions
    }

    pub fn lookup(&self) -> Option<&RegionLookup> {
        self.lookup.as_ref()
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn time_slot(&self, timestamp: i64) -> u32 {
        discretize_time_with_offset(timestamp, self.time, self.utc_offset_secs)
    }

    /// Region of a location. With a region file, the POI key and then the
    /// coordinate key are looked up; unlisted locations fall back to the
    /// nearest region centroid.
    pub fn region(&self, poi: Option<&str>, lat: f64, lon: f64) -> u32 {
        self.lookup
            .as_ref()
            .and_then(|l| l.get(poi, lat, lon))
            .unwrap_or_else(|| self.regions.assign((lat, lon)))
    }

    pub fn pattern(&self, c: &CheckIn) -> Pattern {
        Pattern {
            slot: self.time_slot(c.timestamp),
            region: self.region(Some(&c.poi), c.lat, c.lon),
        }
    }
}

/// Region centroids for a lookup table: the mean training coordinate of each
/// region. Regions with no training coordinate get a NaN centroid, which
/// nearest-centroid assignment never selects.
fn lookup_centroids(lookup: &RegionLookup, train: &[&CheckIn]) -> RegionModel {
    let k = lookup.names.len();
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for c in train {
        if let Some(r) = lookup.get(Some(&c.poi), c.lat, c.lon) {
            sums[r as usize][0] += c.lat;
            sums[r as usize][1] += c.lon;
            counts[r as usize] += 1;
        }
    }
    RegionModel::from_centroids(
        sums.iter()
            .zip(&counts)
            .map(|(s, &n)| {
                if n == 0 {
                    [f64::NAN, f64::NAN]
                } else {
                    [s[0] / n as f64, s[1] / n as f64]
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ci(poi: &str, lat: f64, lon: f64, ts: i64) -> CheckIn {
        CheckIn {
            user: "u".into(),
            poi: poi.into(),
            timestamp: ts,
            lat,
            lon,
            words: vec![],
        }
    }

    #[test]
    fn region_file_lookup_with_centroid_fallback() {
        let lookup =
            RegionLookup::parse("p1\tnorth\np2\tsouth\n10,20\tnorth\n".as_bytes()).unwrap();
        assert_eq!(lookup.names(), &["north".to_string(), "south".to_string()]);
        let train = [ci("p1", 10.0, 20.0, 0), ci("p2", -10.0, 20.0, 0)];
        let refs: Vec<&CheckIn> = train.iter().collect();
        let disc = Discretizer::new(
            TimeScheme::Hourly,
            0,
            lookup_centroids(&lookup, &refs),
            Some(lookup),
        );
        assert_eq!(disc.region(Some("p2"), 0.0, 0.0), 1);
        assert_eq!(disc.region(None, 10.0, 20.0), 0);
        assert_eq!(disc.region(Some("unknown"), -9.0, 21.0), 1);
    }

    #[test]
    fn kmeans_fit_uses_training_pois() {
        let train = [
            ci("a", 0.0, 0.0, 3600 * 9),
            ci("a", 0.0, 0.0, 3600 * 21),
            ci("b", 10.0, 10.0, 0),
        ];
        let cfg = DiscretizerConfig {
            space: SpaceScheme::KMeans {
                regions: 2,
                seed: 1,
            },
            ..Default::default()
        };
        let disc = Discretizer::fit(&train, &cfg).unwrap();
        assert_ne!(disc.pattern(&train[0]), disc.pattern(&train[1]));
        assert_eq!(
            disc.pattern(&train[0]).region,
            disc.pattern(&train[1]).region
        );
        assert_ne!(
            disc.pattern(&train[0]).region,
            disc.pattern(&train[2]).region
        );
    }
}
