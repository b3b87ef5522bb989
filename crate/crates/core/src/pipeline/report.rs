//! Collects the per-stage artifacts into the `report/` tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{create, csv_reader, files, AtStage, Stage, StageError};
use crate::error::{Error, Result};
use crate::ingestion::DurationKey;
use crate::labeling::SummaryRow;

pub const STATS_TABLE: &str = "stats_table.csv";
pub const SWEEP_TABLE: &str = "sweep_table.csv";
pub const SUMMARY_TABLE: &str = "summary_table.csv";
pub const SILHOUETTE_TABLE: &str = "silhouette_curve.csv";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportOutcome {
    pub written: Vec<PathBuf>,
    /// Artifacts that were missing; their tables were skipped or left partial.
    pub notices: Vec<String>,
}

fn subsets_in_stats(path: &Path) -> Result<Vec<DurationKey>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    header
        .iter()
        .skip(1)
        .map(|tag| {
            tag.parse().map_err(|_| Error::Schema {
                path: path.to_path_buf(),
                message: format!("`{tag}` is not a subset tag"),
            })
        })
        .collect()
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let rows = rdr
        .records()
        .map(|r| {
            r.map(|r| r.iter().map(String::from).collect())
                .map_err(|e| Error::csv(path, e))
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

fn write_table(
    path: &Path,
    header: &[String],
    rows: &[Vec<String>],
    note: Option<&str>,
) -> Result<()> {
    let mut out = create(path)?;
    if let Some(note) = note {
        writeln!(out, "{note}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-subset sweep tables side by side, size columns padded to the widest k.
fn sweep_table(
    out: &Path,
    subsets: &[DurationKey],
    dest: &Path,
    notices: &mut Vec<String>,
) -> Result<bool> {
    let mut tables = Vec::new();
    let mut note = None;
    for &d in subsets {
        let path = out.join(files::sweep(d));
        if !path.is_file() {
            notices.push(format!(
                "{} missing (sweep stage not run); subset {d} left out of {SWEEP_TABLE}",
                files::sweep(d)
            ));
            continue;
        }
        if note.is_none() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            note = text
                .lines()
                .next()
                .filter(|l| l.starts_with('#'))
                .map(String::from);
        }
        let (header, rows) = read_rows(&path)?;
        let k = header.len().saturating_sub(4);
        tables.push((d, k, rows));
    }
    if tables.is_empty() {
        return Ok(false);
    }
    let width = tables.iter().map(|t| t.1).max().unwrap_or(0);
    let mut header = vec!["partition".to_string(), "rp".into(), "alpha".into()];
    header.extend((1..=width).map(|i| format!("size_{i}")));
    header.extend(["score".to_string(), "chosen".into()]);
    let mut rows = Vec::new();
    for (d, k, table) in tables {
        for r in table {
            let mut row = vec![d.to_string()];
            row.extend(r[..2 + k].iter().cloned());
            row.extend(std::iter::repeat_n(String::new(), width - k));
            row.extend(r[2 + k..].iter().cloned());
            rows.push(row);
        }
    }
    write_table(dest, &header, &rows, note.as_deref())?;
    Ok(true)
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Row {
        path: path.to_path_buf(),
        row: row as u64 + 1,
        message: format!("unreadable value `{v}`"),
    })
}

fn optional<T: std::str::FromStr>(path: &Path, row: usize, v: &str) -> Result<Option<T>> {
    if v == "NA" {
        Ok(None)
    } else {
        parse_field(path, row, v).map(Some)
    }
}

/// Re-validate every summary line, including the total, before copying it.
fn summary_table(src: &Path, dest: &Path) -> Result<()> {
    let (header, rows) = read_rows(src)?;
    let mut body = Vec::new();
    let mut sums = [0usize; 5];
    let mut total = None;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != 8 {
            return Err(Error::Row {
                path: src.to_path_buf(),
                row: i as u64 + 1,
                message: "expected 8 fields".into(),
            });
        }
        let n = |j: usize| parse_field::<usize>(src, i, &r[j]);
        let row = SummaryRow::new(
            r[0].clone(),
            n(1)?,
            n(2)?,
            n(3)?,
            optional(src, i, &r[4])?,
            optional(src, i, &r[5])?,
            n(6)?,
            n(7)?,
        )?;
        if row.partition == "total" {
            total = Some(row);
        } else {
            for (s, v) in sums.iter_mut().zip([
                row.auctions,
                row.instances,
                row.clusters,
                row.normal,
                row.suspicious,
            ]) {
                *s += v;
            }
        }
        body.push(r.clone());
    }
    let total =
        total.ok_or_else(|| Error::Consistency(format!("{} has no total row", src.display())))?;
    if [
        total.auctions,
        total.instances,
        total.clusters,
        total.normal,
        total.suspicious,
    ] != sums
    {
        return Err(Error::Consistency(format!(
            "{} total row does not match its subsets",
            src.display()
        )));
    }
    write_table(dest, &header, &body, None)
}

fn silhouette_table(
    out: &Path,
    subsets: &[DurationKey],
    dest: &Path,
    notices: &mut Vec<String>,
) -> Result<bool> {
    let mut rows = Vec::new();
    let mut any = false;
    for &d in subsets {
        let path = out.join(files::optk(d));
        if !path.is_file() {
            notices.push(format!(
                "{} missing (optk stage not run); subset {d} left out of {SILHOUETTE_TABLE}",
                files::optk(d)
            ));
            continue;
        }
        any = true;
        let (_, table) = read_rows(&path)?;
        for r in table {
            let mut row = vec![d.to_string()];
            row.extend(r);
            rows.push(row);
        }
    }
    if any {
        let header = ["partition", "k", "score"].map(String::from);
        write_table(dest, &header, &rows, None)?;
    }
    Ok(any)
}

fn build(out: &Path) -> Result<ReportOutcome> {
    let stats = out.join(files::STATS);
    super::require(&stats, Stage::Partition)?;
    let subsets = subsets_in_stats(&stats)?;
    let dir = out.join(files::REPORT_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut outcome = ReportOutcome::default();

    let dest = dir.join(STATS_TABLE);
    fs::copy(&stats, &dest).map_err(|e| Error::io(&dest, e))?;
    outcome.written.push(dest);

    let dest = dir.join(SWEEP_TABLE);
    if sweep_table(out, &subsets, &dest, &mut outcome.notices)? {
        outcome.written.push(dest);
    }

    let summary = out.join(files::SUMMARY);
    let dest = dir.join(SUMMARY_TABLE);
    if summary.is_file() {
        summary_table(&summary, &dest)?;
        outcome.written.push(dest);
    } else {
        outcome.notices.push(format!(
            "{} missing (label stage not run); {SUMMARY_TABLE} skipped",
            files::SUMMARY
        ));
    }

    let dest = dir.join(SILHOUETTE_TABLE);
    if silhouette_table(out, &subsets, &dest, &mut outcome.notices)? {
        outcome.written.push(dest);
    }
    Ok(outcome)
}

/// Write the report tables under `<out>/report/`. `stats.csv` is required;
/// other missing artifacts are listed in [`ReportOutcome::notices`].
pub fn report(out: &Path) -> Result<ReportOutcome, StageError> {
    build(out).at(Stage::Report)
}
