//! Lloyd's k-means with k-means++ seeding and best-of-n restarts. Used to pick
//! the number of clusters per subset; the final clustering is done by CURE.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distinct_count, sq_dist, Point, DIM};
use crate::seed;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    pub restarts: usize,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        KMeansParams {
            k,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub centroids: Vec<Point>,
    /// Centroids that ended up with no members.
    pub dead: Vec<bool>,
    pub sse: f64,
    pub iterations: usize,
    /// SSE after each assignment step of the winning restart.
    pub sse_history: Vec<f64>,
}

/// Best-of-10 k-means with default iteration limits.
pub fn kmeans(
    points: &[Point],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Assignment> {
    kmeans_with(
        points,
        &KMeansParams {
            k,
            max_iter,
            tol,
            restarts: DEFAULT_RESTARTS,
        },
        seed,
    )
}

pub fn kmeans_with(points: &[Point], params: &KMeansParams, seed: u64) -> Result<Assignment> {
    if points.is_empty() {
        return Err(Error::domain("k-means on an empty point set"));
    }
    if params.k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if params.max_iter == 0 || params.restarts == 0 || params.tol.is_nan() || params.tol < 0.0 {
        return Err(Error::domain(
            "max_iter and restarts must be positive, tol non-negative",
        ));
    }
    let distinct = distinct_count(points);
    if params.k > distinct {
        return Err(Error::domain(format!(
            "k = {} exceeds the {distinct} distinct points",
            params.k
        )));
    }
    let runs: Vec<Assignment> = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::derive(seed, r as u64));
            single_run(points, params, &mut rng)
        })
        .collect();
    // Lowest SSE, earliest restart on ties.
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.sse < best.sse { run } else { best })
        .expect("at least one restart");
    Ok(best)
}

fn nearest(p: &Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, the rest sampled proportionally
/// to squared distance from the nearest chosen centre.
pub fn plus_plus_init<R: Rng>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut x = rng.gen::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if x < w {
                        break;
                    }
                    x -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            // Only reachable when k exceeds the distinct points.
            rng.gen_range(0..points.len())
        };
        let c = points[pick];
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn single_run<R: Rng>(points: &[Point], params: &KMeansParams, rng: &mut R) -> Assignment {
    let k = params.k;
    let n = points.len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            labels[i] = j;
            dists[i] = d;
            counts[j] += 1;
        }
        // Empty cluster: take the point farthest from its centroid in the
        // largest cluster.
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let largest = (0..k).fold(0, |b, j| if counts[j] > counts[b] { j } else { b });
            if counts[largest] < 2 {
                break;
            }
            let mut far = None;
            for i in 0..n {
                if labels[i] == largest && far.is_none_or(|f: usize| dists[i] > dists[f]) {
                    far = Some(i);
                }
            }
            let i = far.expect("largest cluster has members");
            labels[i] = empty;
            dists[i] = 0.0;
            centroids[empty] = points[i];
            counts[largest] -= 1;
            counts[empty] += 1;
        }
        let sse: f64 = dists.iter().sum();
        if let Some(&prev) = history.last() {
            debug_assert!(
                sse <= prev + 1e-9 * prev.max(1.0),
                "SSE increased from {prev} to {sse}"
            );
        }
        history.push(sse);

        let mut sums = vec![[0.0; DIM]; k];
        for (p, &j) in points.iter().zip(&labels) {
            for (s, v) in sums[j].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let c = sums[j].map(|s| s / counts[j] as f64);
            shift = shift.max(sq_dist(&c, &centroids[j]));
            centroids[j] = c;
        }
        if shift.sqrt() < params.tol {
            break;
        }
    }

    // Final assignment against the last centroids, without repair.
    let mut counts = vec![0usize; k];
    let mut sse = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (j, d) = nearest(p, &centroids);
        labels[i] = j;
        counts[j] += 1;
        sse += d;
    }
    history.push(sse);
    Assignment {
        labels,
        centroids,
        dead: counts.iter().map(|&c| c == 0).collect(),
        sse,
        iterations,
        sse_history: history,
    }
}
