//! Grid search over CURE's representative count and shrinking factor.
//!
//! Each grid cell is scored by how well it spreads instances over the
//! requested clusters: first the number of clusters holding at least
//! `min_cluster_size` instances, then the Shannon entropy of the cluster
//! sizes. Higher is better on both; earlier cells win exact ties.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::cure::{cure_cluster, CureCluster, CureParams};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::seed;

pub const DEFAULT_REPS: [usize; 2] = [5, 10];
pub const DEFAULT_ALPHAS: [f64; 4] = [0.1, 0.05, 0.01, 0.001];
pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 5;

/// Header comment written above every sweep table.
pub const SCORE_NOTE: &str = "# score = (clusters with size >= MIN, entropy of cluster sizes); \
automatic stand-in for picking the best instance distribution by eye";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub rp_values: Vec<usize>,
    pub alpha_values: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            rp_values: DEFAULT_REPS.to_vec(),
            alpha_values: DEFAULT_ALPHAS.to_vec(),
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.rp_values.is_empty() || self.alpha_values.is_empty() {
            return Err(Error::domain(
                "sweep grid needs at least one RP and one alpha",
            ));
        }
        if self.rp_values.contains(&0) {
            return Err(Error::domain("RP values must be positive"));
        }
        if let Some(a) = self.alpha_values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::domain(format!("alpha {a} outside [0, 1]")));
        }
        Ok(())
    }

    /// Cells in row-major order: RP outer, alpha inner.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        self.rp_values
            .iter()
            .flat_map(|&rp| self.alpha_values.iter().map(move |&a| (rp, a)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionScore {
    pub populated: usize,
    pub entropy: f64,
}

impl DistributionScore {
    pub fn of(sizes: &[usize], min_cluster_size: usize) -> Self {
        let total: usize = sizes.iter().sum();
        let mut sorted = sizes.to_vec();
        sorted.sort_unstable();
        let entropy = if total == 0 {
            0.0
        } else {
            -sorted
                .iter()
                .filter(|&&s| s > 0)
                .map(|&s| {
                    let p = s as f64 / total as f64;
                    p * p.ln()
                })
                .sum::<f64>()
        };
        DistributionScore {
            populated: sizes.iter().filter(|&&s| s >= min_cluster_size).count(),
            entropy,
        }
    }

    pub fn compare(&self, other: &Self) -> Ordering {
        self.populated
            .cmp(&other.populated)
            .then(self.entropy.total_cmp(&other.entropy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub rp: usize,
    pub alpha: f64,
    /// Cluster sizes in cluster order, or the error that disqualified the cell.
    pub outcome: std::result::Result<Vec<usize>, String>,
    pub score: Option<DistributionScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rp: usize,
    pub alpha: f64,
    pub clusters: Vec<CureCluster>,
    pub cells: Vec<SweepCell>,
    pub chosen: usize,
    pub target_k: usize,
}

/// Per-sweep settings besides the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub min_cluster_size: usize,
    pub sample_fraction: f64,
    pub outlier_elimination: bool,
    pub outlier_min_size: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE,
            sample_fraction: 1.0,
            outlier_elimination: false,
            outlier_min_size: 3,
        }
    }
}

/// Seed for one grid cell, so a chosen cell can be re-run on its own.
pub fn cell_seed(seed: u64, rp: usize, alpha: f64) -> u64 {
    seed::derive(seed::derive(seed, rp as u64), alpha.to_bits())
}

pub fn sweep_params(
    points: &[Point],
    target_k: usize,
    grid: &SweepGrid,
    seed: u64,
) -> Result<SweepOutcome> {
    sweep_params_with(points, target_k, grid, &SweepSettings::default(), seed)
}

pub fn sweep_params_with(
    points: &[Point],
    target_k: usize,
    grid: &SweepGrid,
    settings: &SweepSettings,
    seed: u64,
) -> Result<SweepOutcome> {
    grid.validate()?;
    let cells = grid.cells();
    let runs: Vec<Result<Vec<CureCluster>>> = cells
        .par_iter()
        .map(|&(rp, alpha)| {
            let params = CureParams {
                num_reps: rp,
                alpha,
                target_k,
                sample_fraction: settings.sample_fraction,
                outlier_elimination: settings.outlier_elimination,
                outlier_min_size: settings.outlier_min_size,
            };
            cure_cluster(points, &params, cell_seed(seed, rp, alpha))
        })
        .collect();

    let mut report = Vec::with_capacity(cells.len());
    let mut chosen: Option<usize> = None;
    for (i, (&(rp, alpha), run)) in cells.iter().zip(&runs).enumerate() {
        let cell = match run {
            Ok(clusters) => {
                let sizes: Vec<usize> = clusters.iter().map(|c| c.len()).collect();
                let score = DistributionScore::of(&sizes, settings.min_cluster_size);
                let improves = match chosen {
                    None => true,
                    Some(c) => {
                        let best: &SweepCell = &report[c];
                        score.compare(best.score.as_ref().expect("scored cell"))
                            == Ordering::Greater
                    }
                };
                if improves {
                    chosen = Some(i);
                }
                SweepCell {
                    rp,
                    alpha,
                    outcome: Ok(sizes),
                    score: Some(score),
                }
            }
            Err(e) => SweepCell {
                rp,
                alpha,
                outcome: Err(e.to_string()),
                score: None,
            },
        };
        report.push(cell);
    }
    let chosen = match chosen {
        Some(c) => c,
        None => {
            let first = runs.into_iter().next().expect("non-empty grid");
            return Err(first.expect_err("every cell failed"));
        }
    };
    let clusters = runs
        .into_iter()
        .nth(chosen)
        .expect("chosen cell exists")
        .expect("chosen cell succeeded");
    Ok(SweepOutcome {
        rp: report[chosen].rp,
        alpha: report[chosen].alpha,
        clusters,
        cells: report,
        chosen,
        target_k,
    })
}

impl SweepOutcome {
    /// Table of `rp,alpha,size_1..size_k,score,chosen`, preceded by a comment
    /// line describing the score. `score` is `populated:entropy`.
    pub fn write_csv<W: Write>(&self, mut writer: W, min_cluster_size: usize) -> Result<()> {
        let note = SCORE_NOTE.replace("MIN", &min_cluster_size.to_string());
        writeln!(writer, "{note}").map_err(|e| Error::io("sweep table", e))?;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["rp".to_string(), "alpha".to_string()];
        header.extend((1..=self.target_k).map(|i| format!("size_{i}")));
        header.extend(["score".to_string(), "chosen".to_string()]);
        let to_csv = |e: csv::Error| Error::csv("sweep table", e);
        w.write_record(&header).map_err(to_csv)?;
        for (i, cell) in self.cells.iter().enumerate() {
            let mut row = vec![cell.rp.to_string(), cell.alpha.to_string()];
            match &cell.outcome {
                Ok(sizes) => row.extend(sizes.iter().map(|s| s.to_string())),
                Err(_) => row.extend(std::iter::repeat_n(String::new(), self.target_k)),
            }
            row.push(match (&cell.score, &cell.outcome) {
                (Some(s), _) => format!("{}:{:.6}", s.populated, s.entropy),
                (None, Err(e)) => format!("failed: {e}"),
                (None, Ok(_)) => String::new(),
            });
            row.push(u8::from(i == self.chosen).to_string());
            w.write_record(&row).map_err(to_csv)?;
        }
        w.flush().map_err(|e| Error::io("sweep table", e))?;
        Ok(())
    }
}
