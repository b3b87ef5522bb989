//! Silhouette scores and the k sweep that picks the number of clusters.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dist, distinct_count, Point};
use crate::kmeans::{kmeans_with, KMeansParams};
use crate::seed;

pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 20;

/// Per-point silhouette values.
///
/// `s(i) = (b - a) / max(a, b)` where `a` is the mean distance to the other
/// members of the point's cluster and `b` the smallest mean distance to another
/// non-empty cluster. Points in singleton clusters score 0, as do points with
/// `a = b = 0`. Label values need not be contiguous; unused labels are ignored.
pub fn silhouette_samples(points: &[Point], labels: &[usize]) -> Result<Vec<f64>> {
    if points.len() != labels.len() {
        return Err(Error::domain("points and labels differ in length"));
    }
    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_labels];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::domain(
            "silhouette needs at least two non-empty clusters",
        ));
    }

    Ok(points
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0.0f64; n_labels],
            |sums, (i, p)| {
                sums.iter_mut().for_each(|s| *s = 0.0);
                for (q, &l) in points.iter().zip(labels) {
                    sums[l] += dist(p, q);
                }
                let own = labels[i];
                if sizes[own] == 1 {
                    return 0.0;
                }
                let a = sums[own] / (sizes[own] - 1) as f64;
                let b = (0..n_labels)
                    .filter(|&l| l != own && sizes[l] > 0)
                    .map(|l| sums[l] / sizes[l] as f64)
                    .fold(f64::INFINITY, f64::min);
                let m = a.max(b);
                if m > 0.0 {
                    (b - a) / m
                } else {
                    0.0
                }
            },
        )
        .collect())
}

/// Mean silhouette over all points.
pub fn silhouette_score(points: &[Point], labels: &[usize]) -> Result<f64> {
    let s = silhouette_samples(points, labels)?;
    // Fixed-order sum keeps the result independent of scheduling.
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepResult {
    pub scores: BTreeMap<usize, f64>,
    pub best_k: usize,
    pub best_score: f64,
}

impl KSweepResult {
    /// Argmax over a score map, smallest k on ties.
    pub fn from_scores(scores: BTreeMap<usize, f64>) -> Option<Self> {
        let (&best_k, &best_score) =
            scores
                .iter()
                .fold(None, |best: Option<(&usize, &f64)>, (k, s)| match best {
                    Some((_, bs)) if *s <= *bs => best,
                    _ => Some((k, s)),
                })?;
        Some(KSweepResult {
            scores,
            best_k,
            best_score,
        })
    }

    /// `k,score` rows, the silhouette curve. Scores are written at full
    /// precision so the argmax can be recovered from the file.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "score"])?;
        for (k, s) in &self.scores {
            w.write_record([k.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run k-means for every k in `[k_min, k_max]`, score each assignment by its
/// silhouette and return the best k.
pub fn optimal_k(points: &[Point], k_min: usize, k_max: usize, seed: u64) -> Result<KSweepResult> {
    optimal_k_with(points, k_min, k_max, seed, &KMeansParams::new(k_min))
}

/// As [`optimal_k`], with explicit k-means iteration settings (`k` is ignored).
pub fn optimal_k_with(
    points: &[Point],
    k_min: usize,
    k_max: usize,
    seed: u64,
    base: &KMeansParams,
) -> Result<KSweepResult> {
    if k_min < 2 {
        return Err(Error::domain("k_min must be at least 2"));
    }
    if k_max < k_min {
        return Err(Error::domain(format!("empty k range {k_min}..={k_max}")));
    }
    let distinct = distinct_count(points);
    if distinct < k_max {
        return Err(Error::domain(format!(
            "k_max = {k_max} exceeds the {distinct} distinct points"
        )));
    }
    let scores: Vec<(usize, f64)> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let params = KMeansParams { k, ..*base };
            let a = kmeans_with(points, &params, seed::derive(seed, k as u64))?;
            Ok((k, silhouette_score(points, &a.labels)?))
        })
        .collect::<Result<_>>()?;
    Ok(KSweepResult::from_scores(scores.into_iter().collect()).expect("non-empty k range"))
}
