//! k-means regions over (lat, lon) degrees.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use crate::linalg::squared_distance;
use crate::seed::rng_for;
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

const PARALLEL_THRESHOLD: usize = 50_000;

/// Fitted region centroids; region ids are centroid indices.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionModel {
    centroids: Vec<[f64; 2]>,
}

impl RegionModel {
    pub fn from_centroids(centroids: Vec<[f64; 2]>) -> Self {
        RegionModel { centroids }
    }

    pub fn centroids(&self) -> &[[f64; 2]] {
        &self.centroids
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Nearest centroid by Euclidean distance, lowest id on ties.
    /// Centroids with non-finite coordinates are never chosen.
    pub fn assign(&self, coord: (f64, f64)) -> u32 {
        let p = [coord.0, coord.1];
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = squared_distance(&p, c);
            if d < best_d {
                best_d = d;
                best = i as u32;
            }
        }
        best
    }
}

pub fn assign_region(coord: (f64, f64), model: &RegionModel) -> u32 {
    model.assign(coord)
}

/// Lloyd's algorithm with seeded k-means++ initialisation.
///
/// Seeding draws from the distinct coordinates, so `k` distinct centres are
/// always available. Clusters that empty out during the iterations are
/// re-seeded with the point farthest from its own centroid, so the result
/// always has exactly `k` non-empty regions over `coords`.
pub fn fit_regions(coords: &[(f64, f64)], k: usize, seed: u64) -> Result<RegionModel> {
    let mut seen = HashSet::new();
    let distinct: Vec<[f64; 2]> = coords
        .iter()
        .filter(|(a, b)| seen.insert((a.to_bits(), b.to_bits())))
        .map(|&(a, b)| [a, b])
        .collect();
    if k == 0 || distinct.len() < k {
        return Err(Error::TooFewPoints {
            k,
            distinct: distinct.len(),
        });
    }
    let points: Vec<[f64; 2]> = coords.iter().map(|&(a, b)| [a, b]).collect();

    let mut centroids = kmeans_plus_plus(&distinct, k, seed);
    let mut assignment = assign_all(&points, &centroids);
    for _ in 0..MAX_ITERATIONS {
        repair_empty(&points, &mut centroids, &mut assignment);
        centroids = means(&points, &assignment, k);
        let next = assign_all(&points, &centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(RegionModel { centroids })
}

fn kmeans_plus_plus(distinct: &[[f64; 2]], k: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = rng_for(seed, "regions/kmeans++");
    let mut centroids = Vec::with_capacity(k);
    centroids.push(distinct[rng.random_range(0..distinct.len())]);
    let mut nearest: Vec<f64> = distinct
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // Fall back to the last point with positive weight if rounding
        // pushes the target past the cumulative sum.
        let mut pick = nearest.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in nearest.iter().enumerate() {
            acc += d;
            if d > 0.0 && acc >= target {
                pick = i;
                break;
            }
        }
        let c = distinct[pick];
        centroids.push(c);
        for (n, p) in nearest.iter_mut().zip(distinct) {
            *n = n.min(squared_distance(p, &c));
        }
    }
    centroids
}

fn assign_all(points: &[[f64; 2]], centroids: &[[f64; 2]]) -> Vec<u32> {
    let model = RegionModel {
        centroids: centroids.to_vec(),
    };
    if points.len() >= PARALLEL_THRESHOLD {
        points
            .par_iter()
            .map(|p| model.assign((p[0], p[1])))
            .collect()
    } else {
        points.iter().map(|p| model.assign((p[0], p[1]))).collect()
    }
}

fn means(points: &[[f64; 2]], assignment: &[u32], k: usize) -> Vec<[f64; 2]> {
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        sums[a as usize][0] += p[0];
        sums[a as usize][1] += p[1];
        counts[a as usize] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64])
        .collect()
}

fn repair_empty(points: &[[f64; 2]], centroids: &mut [[f64; 2]], assignment: &mut [u32]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a as usize] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assignment[i] as usize;
            if counts[a] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[a]);
            if d > 0.0 && far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            counts[assignment[i] as usize] -= 1;
            assignment[i] = empty as u32;
            counts[empty] = 1;
            centroids[empty] = points[i];
        }
    }
}
