//! Stage orchestration. Every stage reads its inputs from, and writes its
//! outputs to, one output directory, so any stage can be re-run on its own
//! from the persisted artifacts of the previous ones.
//!
//! | stage | reads | writes |
//! |---|---|---|
//! | ingest | raw bid log | `clean_bids.csv` |
//! | features | `clean_bids.csv` | `instances.csv` |
//! | partition | `instances.csv` + `clean_bids.csv`, or an instance file | `partitioned.csv`, `stats.csv` |
//! | optk | `partitioned.csv` | `optk_<p>.csv` |
//! | sweep | `partitioned.csv`, `optk_<p>.csv` | `sweep_<p>.csv` |
//! | cluster | `partitioned.csv`, `optk_<p>.csv`, `sweep_<p>.csv` | `clusters_<p>.csv`, `cluster_summary_<p>.csv`, `cluster_params_<p>.csv` |
//! | label | `partitioned.csv`, `clusters_<p>.csv`, `cluster_params_<p>.csv` | `labeled.csv`, `summary.csv` |
//! | report | all of the above | `report/*.csv` |
//!
//! `<p>` is the subset tag, e.g. `7d`.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cure::{cure_cluster, CureCluster, CureParams};
use crate::error::{Error, Result};
use crate::features::{
    compute_instances, read_instances_csv, write_instances_csv, InstanceSet, SbInstance,
    INSTANCE_HEADER,
};
use crate::geometry::{distinct_count, DIM};
use crate::ingestion::{
    parse_bids_csv, preprocess, write_bids_csv, CleanDataset, DurationKey, BID_HEADER,
};
use crate::labeling::{label_dataset, ClusteredSubset, LabeledDataset};
use crate::partitioning::{
    compute_stats, partition_by_duration, partition_rows, write_stats_csv, Subset, SubsetStats,
};
use crate::seed;
use crate::silhouette::{optimal_k_with, KSweepResult};
use crate::sweep::{cell_seed, sweep_params_with, SweepOutcome};

pub use config::{CureConfig, InputKind, OptkConfig, OutlierConfig, PipelineConfig, ReportConfig};
pub use report::{report, ReportOutcome};

/// Artifact file names.
pub mod files {
    use crate::ingestion::DurationKey;

    pub const CLEAN_BIDS: &str = "clean_bids.csv";
    pub const INSTANCES: &str = "instances.csv";
    pub const PARTITIONED: &str = "partitioned.csv";
    pub const STATS: &str = "stats.csv";
    pub const LABELED: &str = "labeled.csv";
    pub const SUMMARY: &str = "summary.csv";
    pub const PARTIAL: &str = ".partial";
    pub const REPORT_DIR: &str = "report";

    pub fn optk(d: DurationKey) -> String {
        format!("optk_{d}.csv")
    }
    pub fn sweep(d: DurationKey) -> String {
        format!("sweep_{d}.csv")
    }
    pub fn clusters(d: DurationKey) -> String {
        format!("clusters_{d}.csv")
    }
    pub fn cluster_summary(d: DurationKey) -> String {
        format!("cluster_summary_{d}.csv")
    }
    pub fn cluster_params(d: DurationKey) -> String {
        format!("cluster_params_{d}.csv")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Features,
    Partition,
    Optk,
    Sweep,
    Cluster,
    Label,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Partition => "partition",
            Stage::Optk => "optk",
            Stage::Sweep => "sweep",
            Stage::Cluster => "cluster",
            Stage::Label => "label",
            Stage::Report => "report",
        })
    }
}

/// A failure tagged with the stage (and subset) it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed{}: {source}", .subset.map(|s| format!(" on subset {s}")).unwrap_or_default())]
pub struct StageError {
    pub stage: Stage,
    pub subset: Option<DurationKey>,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn new(stage: Stage, source: Error) -> Self {
        StageError {
            stage,
            subset: None,
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 bad data, 4 any other stage failure.
    pub fn exit_code(&self) -> i32 {
        match (&self.source, self.stage) {
            (Error::Config(_), _) | (_, Stage::Config) => 2,
            (
                Error::Schema { .. }
                | Error::Row { .. }
                | Error::EmptyDataset
                | Error::Consistency(_)
                | Error::Csv { .. },
                _,
            ) => 3,
            _ => 4,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
    fn at_subset(self, stage: Stage, subset: DurationKey) -> Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError::new(stage, source))
    }
    fn at_subset(self, stage: Stage, subset: DurationKey) -> Result<T, StageError> {
        self.map_err(|source| StageError {
            stage,
            subset: Some(subset),
            source,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn require(path: &Path, producer: Stage) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Consistency(format!(
            "missing {}; run the {producer} stage first",
            path.display()
        )))
    }
}

fn subset_seed(master: u64, d: DurationKey) -> u64 {
    seed::derive(master, d.seconds())
}

/// Read `partitioned.csv` into duration subsets.
pub fn load_subsets(out: &Path) -> Result<BTreeMap<DurationKey, Subset>> {
    let path = out.join(files::PARTITIONED);
    require(&path, Stage::Partition)?;
    let rows = read_instances_csv(&path)?;
    if rows.iter().any(|r| r.duration.is_none()) {
        return Err(Error::Schema {
            path,
            message: "partitioned file lacks a duration_days column".into(),
        });
    }
    partition_rows(rows, None)
}

/// Parse and clean a raw bid log, writing `clean_bids.csv`.
pub fn stage_ingest(input: &Path, out: &Path) -> Result<CleanDataset, StageError> {
    let run = || {
        ensure_dir(out)?;
        let clean = preprocess(parse_bids_csv(input)?)?;
        write_bids_csv(out.join(files::CLEAN_BIDS), clean.records())?;
        Ok(clean)
    };
    run().at(Stage::Ingest)
}

fn load_clean(out: &Path) -> Result<CleanDataset> {
    let path = out.join(files::CLEAN_BIDS);
    require(&path, Stage::Ingest)?;
    preprocess(parse_bids_csv(&path)?)
}

/// Compute instances from `clean_bids.csv`, writing `instances.csv`.
pub fn stage_features(out: &Path) -> Result<InstanceSet, StageError> {
    let run = || {
        let clean = load_clean(out)?;
        let set = compute_instances(&clean);
        write_instances_csv(out.join(files::INSTANCES), &set.instances, None)?;
        Ok(set)
    };
    run().at(Stage::Features)
}

/// Where the partition stage takes its instances from.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    /// `instances.csv` in the output directory, with durations looked up in
    /// `clean_bids.csv`.
    Computed,
    /// A precomputed instance file. Rows without a `duration_days` column
    /// take `default_duration`, or the duration from `clean_bids.csv` when that
    /// file exists.
    File {
        path: PathBuf,
        default_duration: Option<DurationKey>,
    },
}

/// Split instances by duration, writing `partitioned.csv` and `stats.csv`.
pub fn stage_partition(
    out: &Path,
    source: &InstanceSource,
) -> Result<BTreeMap<DurationKey, SubsetStats>, StageError> {
    let run = || {
        let subsets = match source {
            InstanceSource::Computed => {
                let path = out.join(files::INSTANCES);
                require(&path, Stage::Features)?;
                let instances: Vec<SbInstance> = read_instances_csv(&path)?
                    .into_iter()
                    .map(|r| r.instance)
                    .collect();
                partition_by_duration(instances, &load_clean(out)?)?
            }
            InstanceSource::File {
                path,
                default_duration,
            } => {
                ensure_dir(out)?;
                let rows = read_instances_csv(path)?;
                let bids = out.join(files::CLEAN_BIDS);
                if rows.iter().any(|r| r.duration.is_none())
                    && default_duration.is_none()
                    && bids.is_file()
                {
                    partition_by_duration(
                        rows.into_iter().map(|r| r.instance).collect(),
                        &load_clean(out)?,
                    )?
                } else {
                    partition_rows(rows, *default_duration)?
                }
            }
        };
        if subsets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut instances = Vec::new();
        let mut durations = Vec::new();
        let mut stats = BTreeMap::new();
        for (d, s) in &subsets {
            stats.insert(*d, compute_stats(s)?);
            instances.extend(s.instances.iter().cloned());
            durations.extend(std::iter::repeat_n(*d, s.len()));
        }
        write_instances_csv(out.join(files::PARTITIONED), &instances, Some(&durations))?;
        write_stats_csv(out.join(files::STATS), &stats)?;
        Ok(stats)
    };
    run().at(Stage::Partition)
}

/// Cluster count chosen for one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct KChoice {
    pub k: usize,
    /// Silhouette curve; `None` when the subset has fewer distinct points than
    /// `k_min` and k falls back to the distinct count.
    pub curve: Option<KSweepResult>,
}

fn choose_k(subset: &Subset, cfg: &PipelineConfig, seed: u64) -> Result<KChoice> {
    let points = subset.points();
    let distinct = distinct_count(&points);
    if distinct < cfg.optk.k_min {
        return Ok(KChoice {
            k: distinct,
            curve: None,
        });
    }
    let k_max = cfg.optk.k_max.min(distinct);
    let curve = optimal_k_with(
        &points,
        cfg.optk.k_min,
        k_max,
        seed,
        &cfg.optk.kmeans_params(),
    )?;
    Ok(KChoice {
        k: curve.best_k,
        curve: Some(curve),
    })
}

/// Sweep k per subset, writing `optk_<p>.csv`.
pub fn stage_optk(
    out: &Path,
    cfg: &PipelineConfig,
) -> Result<BTreeMap<DurationKey, KChoice>, StageError> {
    let master = cfg.seed().at(Stage::Optk)?;
    let subsets = load_subsets(out).at(Stage::Optk)?;
    subsets
        .par_iter()
        .map(|(&d, s)| {
            let run = || {
                let choice = choose_k(s, cfg, subset_seed(master, d))?;
                let path = out.join(files::optk(d));
                let mut w = create(&path)?;
                match &choice.curve {
                    Some(c) => c.write_csv(&mut w).map_err(|e| Error::csv(&path, e))?,
                    None => writeln!(w, "k,score").map_err(|e| Error::io(&path, e))?,
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
                Ok((d, choice))
            };
            run().at_subset(Stage::Optk, d)
        })
        .collect()
}

/// Chosen k for a subset, recovered from its `optk_<p>.csv`.
pub fn read_k_choice(out: &Path, d: DurationKey, subset: &Subset) -> Result<usize> {
    let path = out.join(files::optk(d));
    require(&path, Stage::Optk)?;
    let mut rdr = csv_reader(&path)?;
    let mut scores = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let bad = || Error::Row {
            path: path.clone(),
            row: i as u64 + 1,
            message: "expected `k,score`".into(),
        };
        let k: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let s: f64 = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        scores.insert(k, s);
    }
    Ok(match KSweepResult::from_scores(scores) {
        Some(r) => r.best_k,
        None => distinct_count(&subset.points()),
    })
}

fn sweep_one(
    out: &Path,
    cfg: &PipelineConfig,
    master: u64,
    d: DurationKey,
    s: &Subset,
) -> Result<SweepOutcome> {
    let k = read_k_choice(out, d, s)?;
    let outcome = sweep_params_with(
        &s.points(),
        k,
        &cfg.grid(),
        &cfg.sweep_settings(),
        subset_seed(master, d),
    )?;
    let path = out.join(files::sweep(d));
    let mut w = create(&path)?;
    outcome.write_csv(&mut w, cfg.cure.min_cluster_size)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(outcome)
}

/// Grid-search CURE per subset, writing `sweep_<p>.csv`.
pub fn stage_sweep(
    out: &Path,
    cfg: &PipelineConfig,
) -> Result<BTreeMap<DurationKey, SweepOutcome>, StageError> {
    let master = cfg.seed().at(Stage::Sweep)?;
    let subsets = load_subsets(out).at(Stage::Sweep)?;
    subsets
        .par_iter()
        .map(|(&d, s)| {
            sweep_one(out, cfg, master, d, s)
                .map(|o| (d, o))
                .at_subset(Stage::Sweep, d)
        })
        .collect()
}

/// Explicit CURE settings for the cluster stage; unset fields come from the
/// sweep and optk artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterOverrides {
    pub rp: Option<usize>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
}

/// The chosen `(rp, alpha)` row of `sweep_<p>.csv`.
pub fn read_sweep_choice(out: &Path, d: DurationKey) -> Result<(usize, f64)> {
    let path = out.join(files::sweep(d));
    require(&path, Stage::Sweep)?;
    let mut rdr = csv_reader(&path)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        if rec.get(rec.len().saturating_sub(1)) == Some("1") {
            let bad = || Error::Row {
                path: path.clone(),
                row: i as u64 + 1,
                message: "unreadable rp/alpha".into(),
            };
            let rp = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let alpha = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            return Ok((rp, alpha));
        }
    }
    Err(Error::Consistency(format!(
        "{} has no chosen row",
        path.display()
    )))
}

fn write_cluster_artifacts(
    out: &Path,
    d: DurationKey,
    subset: &Subset,
    clusters: &[CureCluster],
    rp: usize,
    alpha: f64,
) -> Result<()> {
    let labels = crate::cure::labels_of(clusters, subset.len());

    let path = out.join(files::clusters(d));
    let mut w = csv::Writer::from_writer(create(&path)?);
    let to_csv = |e| Error::csv(&path, e);
    w.write_record(["auction_id", "bidder_id", "cluster_id"])
        .map_err(to_csv)?;
    for (inst, l) in subset.instances.iter().zip(&labels) {
        w.write_record([
            inst.auction_id.as_str(),
            inst.bidder_id.as_str(),
            &l.to_string(),
        ])
        .map_err(to_csv)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join(files::cluster_summary(d));
    let mut w = csv::Writer::from_writer(create(&path)?);
    let to_csv = |e| Error::csv(&path, e);
    let mut header = vec!["cluster_id".to_string(), "size".to_string()];
    header.extend((0..DIM).map(|j| format!("centroid_{j}")));
    w.write_record(&header).map_err(to_csv)?;
    for (c, cl) in clusters.iter().enumerate() {
        let mut row = vec![c.to_string(), cl.len().to_string()];
        row.extend(cl.centroid.iter().map(|v| format!("{v:.6}")));
        w.write_record(&row).map_err(to_csv)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join(files::cluster_params(d));
    let mut w = create(&path)?;
    writeln!(w, "rp,alpha,k\n{rp},{alpha},{}", clusters.len()).map_err(|e| Error::io(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn cluster_one(
    out: &Path,
    cfg: &PipelineConfig,
    master: u64,
    d: DurationKey,
    s: &Subset,
    overrides: &ClusterOverrides,
) -> Result<Vec<CureCluster>> {
    let (rp, alpha) = match (overrides.rp, overrides.alpha) {
        (Some(rp), Some(alpha)) => (rp, alpha),
        (rp, alpha) => {
            let (srp, salpha) = read_sweep_choice(out, d)?;
            (rp.unwrap_or(srp), alpha.unwrap_or(salpha))
        }
    };
    let k = match overrides.k {
        Some(k) => k,
        None => read_k_choice(out, d, s)?,
    };
    let params = CureParams {
        num_reps: rp,
        alpha,
        target_k: k,
        sample_fraction: cfg.cure.sample_fraction,
        outlier_elimination: cfg.outliers.enabled,
        outlier_min_size: cfg.outliers.min_size,
    };
    let clusters = cure_cluster(
        &s.points(),
        &params,
        cell_seed(subset_seed(master, d), rp, alpha),
    )?;
    write_cluster_artifacts(out, d, s, &clusters, rp, alpha)?;
    Ok(clusters)
}

/// Run CURE per subset with the chosen settings, writing `clusters_<p>.csv`,
/// `cluster_summary_<p>.csv` and `cluster_params_<p>.csv`.
pub fn stage_cluster(
    out: &Path,
    cfg: &PipelineConfig,
    overrides: &ClusterOverrides,
) -> Result<BTreeMap<DurationKey, Vec<CureCluster>>, StageError> {
    let master = cfg.seed().at(Stage::Cluster)?;
    let subsets = load_subsets(out).at(Stage::Cluster)?;
    subsets
        .par_iter()
        .map(|(&d, s)| {
            cluster_one(out, cfg, master, d, s, overrides)
                .map(|c| (d, c))
                .at_subset(Stage::Cluster, d)
        })
        .collect()
}

/// Persist the chosen clustering of each sweep without re-running CURE. The
/// cell seeds make this identical to [`stage_cluster`] with no overrides.
fn stage_cluster_from_sweep(
    out: &Path,
    sweeps: &BTreeMap<DurationKey, SweepOutcome>,
) -> Result<(), StageError> {
    let subsets = load_subsets(out).at(Stage::Cluster)?;
    for (d, s) in &subsets {
        let o = sweeps
            .get(d)
            .ok_or_else(|| Error::Consistency(format!("no sweep for subset {d}")))
            .at_subset(Stage::Cluster, *d)?;
        write_cluster_artifacts(out, *d, s, &o.clusters, o.rp, o.alpha)
            .at_subset(Stage::Cluster, *d)?;
    }
    Ok(())
}

fn read_cluster_params(out: &Path, d: DurationKey) -> Result<(usize, f64)> {
    let path = out.join(files::cluster_params(d));
    require(&path, Stage::Cluster)?;
    let mut rdr = csv_reader(&path)?;
    let rec = rdr
        .records()
        .next()
        .ok_or_else(|| Error::Consistency(format!("{} is empty", path.display())))?
        .map_err(|e| Error::csv(&path, e))?;
    let bad = || Error::Row {
        path: path.clone(),
        row: 1,
        message: "expected `rp,alpha,k`".into(),
    };
    let rp = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let alpha = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    Ok((rp, alpha))
}

fn read_cluster_members(out: &Path, d: DurationKey, subset: &Subset) -> Result<Vec<Vec<usize>>> {
    let path = out.join(files::clusters(d));
    require(&path, Stage::Cluster)?;
    let mut rdr = csv_reader(&path)?;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let row = i as u64 + 1;
        let inst = subset.instances.get(i).ok_or_else(|| {
            Error::Consistency(format!("{} has more rows than subset {d}", path.display()))
        })?;
        if rec.get(0) != Some(inst.auction_id.as_str())
            || rec.get(1) != Some(inst.bidder_id.as_str())
        {
            return Err(Error::Row {
                path: path.clone(),
                row,
                message: format!(
                    "expected ({}, {}); cluster file is out of step with {}",
                    inst.auction_id,
                    inst.bidder_id,
                    files::PARTITIONED
                ),
            });
        }
        let c: usize = rec
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Row {
                path: path.clone(),
                row,
                message: "bad cluster_id".into(),
            })?;
        if clusters.len() <= c {
            clusters.resize(c + 1, Vec::new());
        }
        clusters[c].push(i);
        n += 1;
    }
    if n != subset.len() {
        return Err(Error::Consistency(format!(
            "{} covers {n} of {} instances",
            path.display(),
            subset.len()
        )));
    }
    if clusters.iter().any(|c| c.is_empty()) {
        return Err(Error::Consistency(format!(
            "{} has an empty cluster id",
            path.display()
        )));
    }
    Ok(clusters)
}

/// Label all clusters, writing `labeled.csv` and `summary.csv`.
pub fn stage_label(out: &Path) -> Result<LabeledDataset, StageError> {
    let subsets = load_subsets(out).at(Stage::Label)?;
    let mut clustered = Vec::with_capacity(subsets.len());
    for (d, s) in subsets {
        let run = || {
            let stats = compute_stats(&s)?;
            let clusters = read_cluster_members(out, d, &s)?;
            let (rp, alpha) = read_cluster_params(out, d)?;
            Ok(ClusteredSubset {
                duration: d,
                instances: s.instances.clone(),
                stats,
                clusters,
                rp: Some(rp),
                alpha: Some(alpha),
            })
        };
        clustered.push(run().at_subset(Stage::Label, d)?);
    }
    let run = || {
        let labeled = label_dataset(&clustered)?;
        let path = out.join(files::LABELED);
        let mut w = create(&path)?;
        labeled.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        let path = out.join(files::SUMMARY);
        let mut w = create(&path)?;
        labeled.summary.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(labeled)
    };
    run().at(Stage::Label)
}

/// Decide the input kind from the file's header line.
pub fn detect_input_kind(path: &Path) -> Result<InputKind> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = line.trim_end().split(',').map(str::trim).collect();
    if cols == BID_HEADER {
        Ok(InputKind::Bids)
    } else if cols.len() >= INSTANCE_HEADER.len()
        && cols[..INSTANCE_HEADER.len()] == INSTANCE_HEADER
    {
        Ok(InputKind::Instances)
    } else {
        Err(Error::Schema {
            path: path.to_path_buf(),
            message: "header matches neither the bid-log nor the instance layout".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub labeled: LabeledDataset,
    pub report: ReportOutcome,
}

fn guard_input(input: &Path, out: &Path) -> Result<()> {
    let (Ok(input), Ok(out)) = (input.canonicalize(), out.canonicalize()) else {
        return Ok(());
    };
    if input.starts_with(&out) {
        return Err(Error::Config(format!(
            "input {} lies inside the output directory and could be overwritten",
            input.display()
        )));
    }
    Ok(())
}

fn run_stages(cfg: &PipelineConfig, out: &Path) -> Result<RunOutput, StageError> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input file given".into()))
        .at(Stage::Config)?;
    guard_input(input, out).at(Stage::Config)?;
    let kind = match cfg.input_kind {
        InputKind::Auto => detect_input_kind(input).at(Stage::Ingest)?,
        k => k,
    };
    match kind {
        InputKind::Bids => {
            stage_ingest(input, out)?;
            stage_features(out)?;
            stage_partition(out, &InstanceSource::Computed)?;
        }
        _ => {
            stage_partition(
                out,
                &InstanceSource::File {
                    path: input.to_path_buf(),
                    default_duration: cfg.default_duration_days.map(DurationKey::from_days),
                },
            )?;
        }
    }
    stage_optk(out, cfg)?;
    let sweeps = stage_sweep(out, cfg)?;
    stage_cluster_from_sweep(out, &sweeps)?;
    let labeled = stage_label(out)?;
    let report = report(out)?;
    Ok(RunOutput { labeled, report })
}

/// Run every stage. A `.partial` marker holding the failure is left in the
/// output directory if any stage fails.
pub fn run_all(cfg: &PipelineConfig) -> Result<RunOutput, StageError> {
    cfg.validate().at(Stage::Config)?;
    let out = cfg.output_dir().at(Stage::Config)?.to_path_buf();
    ensure_dir(&out).at(Stage::Config)?;
    let marker = out.join(files::PARTIAL);
    std::fs::write(&marker, "running\n")
        .map_err(|e| Error::io(&marker, e))
        .at(Stage::Config)?;
    match run_stages(cfg, &out) {
        Ok(output) => {
            std::fs::remove_file(&marker)
                .map_err(|e| Error::io(&marker, e))
                .at(Stage::Report)?;
            Ok(output)
        }
        Err(e) => {
            // Best effort; the stage error is what matters.
            let _ = std::fs::write(&marker, format!("{e}\n"));
            Err(e)
        }
    }
}
