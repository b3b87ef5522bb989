//! Cluster labeling against a subset's decision line, and the final labeled
//! dataset with its per-subset summary.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::features::{SbInstance, INSTANCE_HEADER};
use crate::ingestion::DurationKey;
use crate::partitioning::SubsetStats;

pub const NORMAL: u8 = 0;
pub const SUSPICIOUS: u8 = 1;

/// `avg_means + avg_stds / 2`.
pub fn decision_line(stats: &SubsetStats) -> f64 {
    stats.avg_means + stats.avg_stds / 2.0
}

/// Grand mean over every feature of every member.
pub fn cluster_mean(members: &[usize], instances: &[SbInstance]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::domain("mean of an empty cluster"));
    }
    let total: f64 = members
        .iter()
        .map(|&m| instances[m].features.to_point().iter().sum::<f64>())
        .sum();
    Ok(total / (members.len() * crate::DIM) as f64)
}

/// 1 when the cluster mean reaches the decision line (inclusive), else 0.
pub fn label_for_mean(mean: f64, threshold: f64) -> u8 {
    if mean >= threshold {
        SUSPICIOUS
    } else {
        NORMAL
    }
}

pub fn label_cluster(
    members: &[usize],
    instances: &[SbInstance],
    stats: &SubsetStats,
) -> Result<u8> {
    Ok(label_for_mean(
        cluster_mean(members, instances)?,
        decision_line(stats),
    ))
}

/// A clustered subset ready for labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredSubset {
    pub duration: DurationKey,
    pub instances: Vec<SbInstance>,
    /// Statistics frozen before clustering.
    pub stats: SubsetStats,
    /// Member indices into `instances`, one list per cluster.
    pub clusters: Vec<Vec<usize>>,
    pub rp: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub instance: SbInstance,
    pub duration: DurationKey,
    /// Unique across subsets.
    pub cluster_id: usize,
    pub label: u8,
}

/// One column of the final results table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub partition: String,
    pub auctions: usize,
    pub instances: usize,
    pub clusters: usize,
    pub rp: Option<usize>,
    pub alpha: Option<f64>,
    pub normal: usize,
    pub suspicious: usize,
}

impl SummaryRow {
    /// Build a row, rejecting counts where normal + suspicious != instances.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        partition: impl Into<String>,
        auctions: usize,
        instances: usize,
        clusters: usize,
        rp: Option<usize>,
        alpha: Option<f64>,
        normal: usize,
        suspicious: usize,
    ) -> Result<Self> {
        let partition = partition.into();
        if normal + suspicious != instances {
            return Err(Error::Consistency(format!(
                "{partition}: normal {normal} + suspicious {suspicious} != instances {instances}"
            )));
        }
        Ok(SummaryRow {
            partition,
            auctions,
            instances,
            clusters,
            rp,
            alpha,
            normal,
            suspicious,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Sum of all rows; RP and alpha are not aggregated.
    pub fn total(&self) -> Result<SummaryRow> {
        let sum = |f: fn(&SummaryRow) -> usize| self.rows.iter().map(f).sum::<usize>();
        SummaryRow::new(
            "total",
            sum(|r| r.auctions),
            sum(|r| r.instances),
            sum(|r| r.clusters),
            None,
            None,
            sum(|r| r.normal),
            sum(|r| r.suspicious),
        )
    }

    /// `partition,auctions,instances,clusters,rp,alpha,normal,suspicious`,
    /// one line per subset and a final `total` line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let to_csv = |e: csv::Error| Error::csv("summary table", e);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "partition",
            "auctions",
            "instances",
            "clusters",
            "rp",
            "alpha",
            "normal",
            "suspicious",
        ])
        .map_err(to_csv)?;
        let total = self.total()?;
        for r in self.rows.iter().chain(std::iter::once(&total)) {
            w.write_record([
                r.partition.clone(),
                r.auctions.to_string(),
                r.instances.to_string(),
                r.clusters.to_string(),
                r.rp.map_or("NA".into(), |v| v.to_string()),
                r.alpha.map_or("NA".into(), |v| v.to_string()),
                r.normal.to_string(),
                r.suspicious.to_string(),
            ])
            .map_err(to_csv)?;
        }
        w.flush().map_err(|e| Error::io("summary table", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
    pub summary: Summary,
}

pub const LABELED_EXTRA: [&str; 3] = ["duration_days", "cluster_id", "label"];

impl LabeledDataset {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let to_csv = |e: csv::Error| Error::csv("labeled table", e);
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> = INSTANCE_HEADER
            .iter()
            .chain(&LABELED_EXTRA)
            .copied()
            .collect();
        w.write_record(&header).map_err(to_csv)?;
        for r in &self.rows {
            let mut row = vec![r.instance.auction_id.clone(), r.instance.bidder_id.clone()];
            row.extend(
                r.instance
                    .features
                    .to_point()
                    .iter()
                    .map(|v| format!("{v:.6}")),
            );
            row.push(r.duration.days_field());
            row.push(r.cluster_id.to_string());
            row.push(r.label.to_string());
            w.write_record(&row).map_err(to_csv)?;
        }
        w.flush().map_err(|e| Error::io("labeled table", e))?;
        Ok(())
    }
}

/// Label every cluster of every subset and assemble the labeled rows in
/// subset order, then instance order. Cluster ids are numbered consecutively
/// across subsets.
pub fn label_dataset(subsets: &[ClusteredSubset]) -> Result<LabeledDataset> {
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut next_id = 0;
    for s in subsets {
        let mut assigned: Vec<Option<(usize, u8)>> = vec![None; s.instances.len()];
        let threshold = decision_line(&s.stats);
        let (mut normal, mut suspicious) = (0, 0);
        for (c, members) in s.clusters.iter().enumerate() {
            let label = label_for_mean(cluster_mean(members, &s.instances)?, threshold);
            for &m in members {
                let slot = assigned.get_mut(m).ok_or_else(|| {
                    Error::Consistency(format!("{}: cluster member {m} out of range", s.duration))
                })?;
                if slot.is_some() {
                    return Err(Error::Consistency(format!(
                        "{}: instance {m} assigned to two clusters",
                        s.duration
                    )));
                }
                *slot = Some((next_id + c, label));
            }
            if label == SUSPICIOUS {
                suspicious += members.len();
            } else {
                normal += members.len();
            }
        }
        for (inst, slot) in s.instances.iter().zip(&assigned) {
            let (cluster_id, label) = slot.ok_or_else(|| {
                Error::Consistency(format!(
                    "{}: instance ({}, {}) has no cluster",
                    s.duration, inst.auction_id, inst.bidder_id
                ))
            })?;
            rows.push(LabeledRow {
                instance: inst.clone(),
                duration: s.duration,
                cluster_id,
                label,
            });
        }
        let auctions = s
            .instances
            .iter()
            .map(|i| i.auction_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        summary.push(SummaryRow::new(
            s.duration.to_string(),
            auctions,
            s.instances.len(),
            s.clusters.len(),
            s.rp,
            s.alpha,
            normal,
            suspicious,
        )?);
        next_id += s.clusters.len();
    }
    Ok(LabeledDataset {
        rows,
        summary: Summary { rows: summary },
    })
}

/// Count normal and suspicious rows per subset directly from labeled rows.
pub fn recount(rows: &[LabeledRow]) -> BTreeMap<DurationKey, (usize, usize)> {
    let mut out: BTreeMap<DurationKey, (usize, usize)> = BTreeMap::new();
    for r in rows {
        let e = out.entry(r.duration).or_default();
        if r.label == SUSPICIOUS {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    out
}
