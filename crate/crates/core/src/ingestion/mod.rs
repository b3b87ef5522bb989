//! Bid-log parsing, cleaning and the synthetic bid-log generator.
//!
//! Bid logs use the header
//! `auction_id,bidder_id,seller_id,bid_amount,bid_time,duration,duration_unit,start_price,winner_id`.
//! Durations are stored internally in seconds regardless of the unit they were
//! written in.

mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

pub use synth::{generate_synthetic, DurationBlock, SynthConfig};

pub const SECONDS_PER_DAY: u64 = 86_400;

pub const BID_HEADER: [&str; 9] = [
    "auction_id",
    "bidder_id",
    "seller_id",
    "bid_amount",
    "bid_time",
    "duration",
    "duration_unit",
    "start_price",
    "winner_id",
];

/// Convert a bidding duration in days to seconds.
pub fn convert_duration(days: i64) -> Result<u64> {
    if days <= 0 {
        return Err(Error::domain(format!(
            "duration must be at least one day, got {days}"
        )));
    }
    Ok(days as u64 * SECONDS_PER_DAY)
}

/// An auction length in seconds. Subsets are keyed by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DurationKey(pub u64);

impl DurationKey {
    pub fn from_days(days: u32) -> Self {
        DurationKey(days as u64 * SECONDS_PER_DAY)
    }

    pub fn seconds(self) -> u64 {
        self.0
    }

    /// Whole days, if the duration is a whole number of days.
    pub fn whole_days(self) -> Option<u64> {
        self.0
            .is_multiple_of(SECONDS_PER_DAY)
            .then_some(self.0 / SECONDS_PER_DAY)
    }

    pub fn days(self) -> f64 {
        self.0 as f64 / SECONDS_PER_DAY as f64
    }

    /// Value written to `duration_days` columns.
    pub fn days_field(self) -> String {
        match self.whole_days() {
            Some(d) => d.to_string(),
            None => format!("{}", self.days()),
        }
    }

    pub fn parse_days_field(s: &str) -> Option<Self> {
        if let Ok(d) = s.parse::<u64>() {
            return (d > 0).then_some(DurationKey(d * SECONDS_PER_DAY));
        }
        let d: f64 = s.parse().ok()?;
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        let secs = (d * SECONDS_PER_DAY as f64).round();
        (secs >= 1.0).then_some(DurationKey(secs as u64))
    }
}

/// Short tag used in artifact file names and report columns: `7d`, or
/// `90000s` for durations that are not whole days.
impl fmt::Display for DurationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.whole_days() {
            Some(d) => write!(f, "{d}d"),
            None => write!(f, "{}s", self.0),
        }
    }
}

impl std::str::FromStr for DurationKey {
    type Err = Error;

    /// Parse the `7d` / `90000s` tags produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("`{s}` is not a duration tag"));
        let (num, unit) = s.split_at(s.len().checked_sub(1).ok_or_else(bad)?);
        let n: u64 = num.parse().map_err(|_| bad())?;
        match unit {
            "d" if n > 0 => Ok(DurationKey(n * SECONDS_PER_DAY)),
            "s" if n > 0 => Ok(DurationKey(n)),
            _ => Err(bad()),
        }
    }
}

/// One bid event.
#[derive(Debug, Clone, PartialEq)]
pub struct BidRecord {
    pub auction_id: String,
    pub bidder_id: String,
    pub seller_id: String,
    pub bid_amount: f64,
    /// Seconds since the auction opened.
    pub bid_time: f64,
    /// Auction length in seconds.
    pub duration: u64,
    pub start_price: f64,
    /// Empty when the auction closed without a winner.
    pub winner_id: String,
}

impl BidRecord {
    fn same_auction_metadata(&self, other: &BidRecord) -> bool {
        self.seller_id == other.seller_id
            && self.duration == other.duration
            && self.start_price.to_bits() == other.start_price.to_bits()
            && self.winner_id == other.winner_id
    }
}

/// Per-auction summary built during preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionSummary {
    pub auction_id: String,
    pub seller_id: String,
    pub bid_count: usize,
    pub bidders: BTreeSet<String>,
    pub start_price: f64,
    pub duration: DurationKey,
    pub winner_id: Option<String>,
    /// Slice of [`CleanDataset::records`] holding this auction's bids.
    pub records: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetAggregates {
    pub auctions: usize,
    pub records: usize,
    pub bidders: usize,
    pub sellers: usize,
    pub mean_bids_per_auction: f64,
    pub mean_start_price: f64,
}

/// A deduplicated, consistent bid log. Records are ordered by
/// `(auction_id, bid_time, bidder_id, bid_amount)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanDataset {
    records: Vec<BidRecord>,
    auctions: BTreeMap<String, AuctionSummary>,
    aggregates: DatasetAggregates,
}

impl CleanDataset {
    pub fn records(&self) -> &[BidRecord] {
        &self.records
    }

    pub fn auctions(&self) -> &BTreeMap<String, AuctionSummary> {
        &self.auctions
    }

    pub fn auction(&self, id: &str) -> Option<&AuctionSummary> {
        self.auctions.get(id)
    }

    /// Bids of one auction in time order.
    pub fn bids_of(&self, auction: &AuctionSummary) -> &[BidRecord] {
        &self.records[auction.records.clone()]
    }

    pub fn aggregates(&self) -> &DatasetAggregates {
        &self.aggregates
    }

    pub fn into_records(self) -> Vec<BidRecord> {
        self.records
    }
}

fn check_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn parse_num(path: &Path, row: u64, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::Row {
        path: path.to_path_buf(),
        row,
        message: format!("{name}: `{raw}` is not a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Row {
            path: path.to_path_buf(),
            row,
            message: format!("{name}: {raw} must be a finite non-negative number"),
        });
    }
    Ok(v)
}

/// Parse a bid-log CSV file. Rows with an empty bidder are kept; they are
/// removed by [`preprocess`].
pub fn parse_bids_csv(path: impl AsRef<Path>) -> Result<Vec<BidRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_bids_reader(file, path)
}

/// Parse a bid log from any reader. `source` names it in error messages.
pub fn parse_bids_reader<R: Read>(reader: R, source: &Path) -> Result<Vec<BidRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema {
            path: source.to_path_buf(),
            message: "missing header".into(),
        });
    }
    check_header(source, &header, &BID_HEADER)?;

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        let rec = rec.map_err(|e| Error::csv(source, e))?;
        if rec.len() != BID_HEADER.len() {
            return Err(Error::Row {
                path: source.to_path_buf(),
                row,
                message: format!("expected {} columns, found {}", BID_HEADER.len(), rec.len()),
            });
        }
        let row_err = |message: String| Error::Row {
            path: source.to_path_buf(),
            row,
            message,
        };
        let auction_id = rec[0].to_string();
        if auction_id.is_empty() {
            return Err(row_err("empty auction_id".into()));
        }
        let bid_amount = parse_num(source, row, "bid_amount", &rec[3])?;
        let bid_time = parse_num(source, row, "bid_time", &rec[4])?;
        let raw_duration: i64 = rec[5]
            .parse()
            .map_err(|_| row_err(format!("duration: `{}` is not an integer", &rec[5])))?;
        let duration = match &rec[6] {
            "days" => convert_duration(raw_duration).map_err(|e| row_err(e.to_string()))?,
            "seconds" if raw_duration > 0 => raw_duration as u64,
            "seconds" => return Err(row_err(format!("duration {raw_duration} must be positive"))),
            other => {
                return Err(row_err(format!(
                    "duration_unit `{other}` must be `days` or `seconds`"
                )))
            }
        };
        if bid_time > duration as f64 {
            return Err(row_err(format!(
                "bid_time {bid_time} exceeds auction duration {duration}"
            )));
        }
        let start_price = parse_num(source, row, "start_price", &rec[7])?;
        out.push(BidRecord {
            auction_id,
            bidder_id: rec[1].to_string(),
            seller_id: rec[2].to_string(),
            bid_amount,
            bid_time,
            duration,
            start_price,
            winner_id: rec[8].to_string(),
        });
    }
    Ok(out)
}

/// Write records in the bid-log schema with durations in seconds.
pub fn write_bids_csv(path: impl AsRef<Path>, records: &[BidRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_bids(std::io::BufWriter::new(file), records).map_err(|e| Error::csv(path, e))
}

pub fn write_bids<W: Write>(writer: W, records: &[BidRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BID_HEADER)?;
    for r in records {
        w.write_record([
            r.auction_id.as_str(),
            r.bidder_id.as_str(),
            r.seller_id.as_str(),
            &r.bid_amount.to_string(),
            &r.bid_time.to_string(),
            &r.duration.to_string(),
            "seconds",
            &r.start_price.to_string(),
            r.winner_id.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn record_order(a: &BidRecord, b: &BidRecord) -> std::cmp::Ordering {
    a.auction_id
        .cmp(&b.auction_id)
        .then(a.bid_time.total_cmp(&b.bid_time))
        .then_with(|| a.bidder_id.cmp(&b.bidder_id))
        .then(a.bid_amount.total_cmp(&b.bid_amount))
}

fn same_bid(a: &BidRecord, b: &BidRecord) -> bool {
    a.auction_id == b.auction_id
        && a.bidder_id == b.bidder_id
        && a.bid_time.to_bits() == b.bid_time.to_bits()
        && a.bid_amount.to_bits() == b.bid_amount.to_bits()
}

/// Clean a parsed bid log.
///
/// Drops rows without a bidder, exact duplicates on
/// `(auction_id, bidder_id, bid_time, bid_amount)` and rows whose auction
/// metadata (seller, duration, start price, winner) disagrees with the
/// auction's earliest row. A winner who placed no surviving bid in the auction
/// is cleared.
pub fn preprocess(records: Vec<BidRecord>) -> Result<CleanDataset> {
    let mut records: Vec<BidRecord> = records
        .into_iter()
        .filter(|r| !r.bidder_id.trim().is_empty())
        .collect();
    records.sort_by(record_order);
    records.dedup_by(|later, earlier| same_bid(later, earlier));

    // Keep only rows consistent with the auction's first row.
    let mut kept: Vec<BidRecord> = Vec::with_capacity(records.len());
    let mut reference: Option<usize> = None;
    for r in records {
        match reference {
            Some(i) if kept[i].auction_id == r.auction_id => {
                if kept[i].same_auction_metadata(&r) {
                    kept.push(r);
                }
            }
            _ => {
                reference = Some(kept.len());
                kept.push(r);
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut auctions = BTreeMap::new();
    let mut start = 0;
    while start < kept.len() {
        let mut end = start + 1;
        while end < kept.len() && kept[end].auction_id == kept[start].auction_id {
            end += 1;
        }
        let bidders: BTreeSet<String> = kept[start..end]
            .iter()
            .map(|r| r.bidder_id.clone())
            .collect();
        let first = &kept[start];
        let winner_id = if first.winner_id.is_empty() || !bidders.contains(&first.winner_id) {
            for r in &mut kept[start..end] {
                r.winner_id.clear();
            }
            None
        } else {
            Some(first.winner_id.clone())
        };
        let first = &kept[start];
        auctions.insert(
            first.auction_id.clone(),
            AuctionSummary {
                auction_id: first.auction_id.clone(),
                seller_id: first.seller_id.clone(),
                bid_count: end - start,
                bidders,
                start_price: first.start_price,
                duration: DurationKey(first.duration),
                winner_id,
                records: start..end,
            },
        );
        start = end;
    }

    let n_auctions = auctions.len();
    let bidders: BTreeSet<&str> = kept.iter().map(|r| r.bidder_id.as_str()).collect();
    let sellers: BTreeSet<&str> = auctions.values().map(|a| a.seller_id.as_str()).collect();
    let aggregates = DatasetAggregates {
        auctions: n_auctions,
        records: kept.len(),
        bidders: bidders.len(),
        sellers: sellers.len(),
        mean_bids_per_auction: kept.len() as f64 / n_auctions as f64,
        mean_start_price: auctions.values().map(|a| a.start_price).sum::<f64>() / n_auctions as f64,
    };
    Ok(CleanDataset {
        records: kept,
        auctions,
        aggregates,
    })
}
