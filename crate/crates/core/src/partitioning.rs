//! Duration subsets and their per-feature statistics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{InstanceRow, SbInstance, FEATURE_NAMES};
use crate::geometry::{Point, DIM};
use crate::ingestion::{CleanDataset, DurationKey};

/// Instances whose auctions share one bidding duration.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub duration: DurationKey,
    pub instances: Vec<SbInstance>,
}

impl Subset {
    pub fn points(&self) -> Vec<Point> {
        self.instances
            .iter()
            .map(|i| i.features.to_point())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Per-feature mean and population standard deviation of a subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetStats {
    pub per_feature_mean: [f64; DIM],
    pub per_feature_std: [f64; DIM],
    pub avg_means: f64,
    pub avg_stds: f64,
}

impl SubsetStats {
    /// Build stats from per-feature values, deriving the two row averages.
    pub fn from_features(mean: [f64; DIM], std: [f64; DIM]) -> Self {
        SubsetStats {
            per_feature_mean: mean,
            per_feature_std: std,
            avg_means: mean.iter().sum::<f64>() / DIM as f64,
            avg_stds: std.iter().sum::<f64>() / DIM as f64,
        }
    }
}

pub fn partition_by_duration(
    instances: Vec<SbInstance>,
    dataset: &CleanDataset,
) -> Result<BTreeMap<DurationKey, Subset>> {
    let mut out: BTreeMap<DurationKey, Subset> = BTreeMap::new();
    for inst in instances {
        let auction = dataset.auction(&inst.auction_id).ok_or_else(|| {
            Error::Consistency(format!(
                "instance ({}, {}) references unknown auction",
                inst.auction_id, inst.bidder_id
            ))
        })?;
        push(&mut out, auction.duration, inst);
    }
    Ok(out)
}

/// Partition instances read from a file that carries its own durations,
/// falling back to `default` for rows without one.
pub fn partition_rows(
    rows: Vec<InstanceRow>,
    default: Option<DurationKey>,
) -> Result<BTreeMap<DurationKey, Subset>> {
    let mut out = BTreeMap::new();
    for row in rows {
        let d = row.duration.or(default).ok_or_else(|| {
            Error::Consistency(format!(
                "instance ({}, {}) has no duration; supply bids or a default duration",
                row.instance.auction_id, row.instance.bidder_id
            ))
        })?;
        push(&mut out, d, row.instance);
    }
    Ok(out)
}

fn push(out: &mut BTreeMap<DurationKey, Subset>, d: DurationKey, inst: SbInstance) {
    out.entry(d)
        .or_insert_with(|| Subset {
            duration: d,
            instances: Vec::new(),
        })
        .instances
        .push(inst);
}

/// Sum in ascending order so the result does not depend on input order.
fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

pub fn compute_stats(subset: &Subset) -> Result<SubsetStats> {
    stats_of_points(&subset.points())
}

pub fn stats_of_points(points: &[Point]) -> Result<SubsetStats> {
    if points.is_empty() {
        return Err(Error::domain("statistics of an empty subset"));
    }
    let n = points.len() as f64;
    let mut mean = [0.0; DIM];
    let mut std = [0.0; DIM];
    let mut column = vec![0.0; points.len()];
    for j in 0..DIM {
        for (c, p) in column.iter_mut().zip(points) {
            *c = p[j];
        }
        let m = ordered_sum(&mut column) / n;
        for (c, p) in column.iter_mut().zip(points) {
            *c = (p[j] - m) * (p[j] - m);
        }
        mean[j] = m;
        std[j] = (ordered_sum(&mut column) / n).sqrt();
    }
    Ok(SubsetStats::from_features(mean, std))
}

/// Render stats as a table with one column per subset: a row per feature
/// mean, the `avg_means` row, a row per feature std and the `avg_stds` row.
pub fn write_stats_table<W: Write>(
    writer: W,
    stats: &BTreeMap<DurationKey, SubsetStats>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["statistic".to_string()];
    header.extend(stats.keys().map(|k| k.to_string()));
    w.write_record(&header)?;
    let mut row = |name: String, f: &dyn Fn(&SubsetStats) -> f64| {
        let mut r = vec![name];
        r.extend(stats.values().map(|s| format!("{:.6}", f(s))));
        w.write_record(&r)
    };
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        row(format!("mean_{name}"), &|s| s.per_feature_mean[j])?;
    }
    row("avg_means".into(), &|s| s.avg_means)?;
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        row(format!("std_{name}"), &|s| s.per_feature_std[j])?;
    }
    row("avg_stds".into(), &|s| s.avg_stds)?;
    w.flush()?;
    Ok(())
}

pub fn write_stats_csv(
    path: impl AsRef<Path>,
    stats: &BTreeMap<DurationKey, SubsetStats>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_stats_table(std::io::BufWriter::new(file), stats).map_err(|e| Error::csv(path, e))
}
