//! The eight shill-bidding behaviour metrics, computed per (auction, bidder).
//!
//! | metric | value |
//! |---|---|
//! | BT  | auctions shared with the bidder's most frequented seller / auctions joined |
//! | BR  | bidder's bids in the auction / all bids in the auction |
//! | SO  | 0, 0.5, 1 for 0, 1, 2+ bids placed while already leading |
//! | LB  | time of the bidder's last bid / duration |
//! | EB  | time of the bidder's first bid / duration |
//! | WR  | 1 - auctions won / auctions joined |
//! | AB  | max(0, 1 - mean bids per auction / bids in this auction) |
//! | ASP | max(0, 1 - start price / mean start price) |
//!
//! Every metric lies in `[0, 1]`; high values indicate suspicious behaviour.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, DIM};
use crate::ingestion::{BidRecord, CleanDataset, DurationKey};

pub const FEATURE_NAMES: [&str; DIM] = ["bt", "br", "so", "lb", "eb", "wr", "ab", "asp"];

pub const INSTANCE_HEADER: [&str; 10] = [
    "auction_id",
    "bidder_id",
    "bt",
    "br",
    "so",
    "lb",
    "eb",
    "wr",
    "ab",
    "asp",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Features {
    pub bt: f64,
    pub br: f64,
    pub so: f64,
    pub lb: f64,
    pub eb: f64,
    pub wr: f64,
    pub ab: f64,
    pub asp: f64,
}

impl Features {
    pub fn to_point(&self) -> Point {
        [
            self.bt, self.br, self.so, self.lb, self.eb, self.wr, self.ab, self.asp,
        ]
    }

    pub fn from_point(p: &Point) -> Self {
        Features {
            bt: p[0],
            br: p[1],
            so: p[2],
            lb: p[3],
            eb: p[4],
            wr: p[5],
            ab: p[6],
            asp: p[7],
        }
    }

    pub fn mean(&self) -> f64 {
        self.to_point().iter().sum::<f64>() / DIM as f64
    }
}

/// One bidder's conduct in one auction.
#[derive(Debug, Clone, PartialEq)]
pub struct SbInstance {
    pub auction_id: String,
    pub bidder_id: String,
    pub features: Features,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    /// Ordered by `(auction_id, bidder_id)`.
    pub instances: Vec<SbInstance>,
    /// Auctions listed in the index without any bid.
    pub skipped_auctions: usize,
}

/// Number of bids placed by `bidder` while already holding the highest bid.
///
/// `bids` must be in time order. A bid takes the lead only if it is strictly
/// higher than every earlier bid.
pub fn successive_outbid_runs(bids: &[BidRecord], bidder: &str) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut leader: Option<&str> = None;
    let mut count = 0;
    for b in bids {
        if b.bidder_id == bidder && leader == Some(bidder) {
            count += 1;
        }
        if b.bid_amount > best {
            best = b.bid_amount;
            leader = Some(b.bidder_id.as_str());
        }
    }
    count
}

pub fn so_score(runs: usize) -> f64 {
    match runs {
        0 => 0.0,
        1 => 0.5,
        _ => 1.0,
    }
}

#[derive(Default)]
struct History<'a> {
    auctions: usize,
    wins: usize,
    per_seller: HashMap<&'a str, usize>,
}

impl History<'_> {
    fn tendency(&self) -> f64 {
        let top = self.per_seller.values().copied().max().unwrap_or(0);
        top as f64 / self.auctions as f64
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Compute one instance per (auction, bidder) pair.
pub fn compute_instances(dataset: &CleanDataset) -> InstanceSet {
    // Bidder history is global across auctions, so build it first.
    let mut history: HashMap<&str, History> = HashMap::new();
    for a in dataset.auctions().values() {
        for b in &a.bidders {
            let h = history.entry(b.as_str()).or_default();
            h.auctions += 1;
            *h.per_seller.entry(a.seller_id.as_str()).or_default() += 1;
            if a.winner_id.as_deref() == Some(b.as_str()) {
                h.wins += 1;
            }
        }
    }

    let agg = dataset.aggregates();
    let auctions: Vec<_> = dataset.auctions().values().collect();
    let skipped = auctions.iter().filter(|a| a.bid_count == 0).count();

    let instances: Vec<SbInstance> = auctions
        .par_iter()
        .filter(|a| a.bid_count > 0)
        .flat_map_iter(|a| {
            let bids = dataset.bids_of(a);
            let duration = a.duration.seconds() as f64;
            let total = bids.len() as f64;
            let ab = clamp01(1.0 - agg.mean_bids_per_auction / total);
            let asp = if agg.mean_start_price > 0.0 {
                clamp01(1.0 - a.start_price / agg.mean_start_price)
            } else {
                0.0
            };

            // (count, first time, last time) per bidder, in bidder order.
            let mut per_bidder: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
            for b in bids {
                let e = per_bidder
                    .entry(b.bidder_id.as_str())
                    .or_insert((0, b.bid_time, b.bid_time));
                e.0 += 1;
                e.2 = b.bid_time;
            }
            let history = &history;
            per_bidder
                .into_iter()
                .map(move |(bidder, (count, first, last))| {
                    let h = &history[bidder];
                    SbInstance {
                        auction_id: a.auction_id.clone(),
                        bidder_id: bidder.to_string(),
                        features: Features {
                            bt: clamp01(h.tendency()),
                            br: clamp01(count as f64 / total),
                            so: so_score(successive_outbid_runs(bids, bidder)),
                            lb: clamp01(last / duration),
                            eb: clamp01(first / duration),
                            wr: clamp01(1.0 - h.wins as f64 / h.auctions as f64),
                            ab,
                            asp,
                        },
                    }
                })
        })
        .collect();

    InstanceSet {
        instances,
        skipped_auctions: skipped,
    }
}

/// An instance read back from disk, optionally tagged with its auction's
/// duration (`duration_days` column).
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRow {
    pub instance: SbInstance,
    pub duration: Option<DurationKey>,
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// Write instances in the standard 10-column layout, plus a
/// `duration_days` column when durations are given.
pub fn write_instances<W: Write>(
    writer: W,
    instances: &[SbInstance],
    durations: Option<&[DurationKey]>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = INSTANCE_HEADER.to_vec();
    if durations.is_some() {
        header.push("duration_days");
    }
    w.write_record(&header)?;
    for (i, inst) in instances.iter().enumerate() {
        let mut row = vec![inst.auction_id.clone(), inst.bidder_id.clone()];
        row.extend(inst.features.to_point().iter().map(|&v| fmt6(v)));
        if let Some(d) = durations {
            row.push(d[i].days_field());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_instances_csv(
    path: impl AsRef<Path>,
    instances: &[SbInstance],
    durations: Option<&[DurationKey]>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_instances(std::io::BufWriter::new(file), instances, durations)
        .map_err(|e| Error::csv(path, e))
}

pub fn read_instances_csv(path: impl AsRef<Path>) -> Result<Vec<InstanceRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_instances(file, path)
}

/// Read an instance file. The first ten columns must match the instance
/// layout; an eleventh `duration_days` column is used when present and any
/// further columns (such as `cluster_id,label` in labeled files) are ignored.
pub fn read_instances<R: Read>(reader: R, source: &Path) -> Result<Vec<InstanceRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    let head: Vec<&str> = header.iter().take(INSTANCE_HEADER.len()).collect();
    if head != INSTANCE_HEADER {
        return Err(Error::Schema {
            path: source.to_path_buf(),
            message: format!(
                "expected header to start with `{}`",
                INSTANCE_HEADER.join(",")
            ),
        });
    }
    let has_duration = header.get(10) == Some("duration_days");
    let width = header.len();

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        let rec = rec.map_err(|e| Error::csv(source, e))?;
        let row_err = |message: String| Error::Row {
            path: source.to_path_buf(),
            row,
            message,
        };
        if rec.len() != width {
            return Err(row_err(format!(
                "expected {width} columns, found {}",
                rec.len()
            )));
        }
        let mut p = [0.0; DIM];
        for (j, v) in p.iter_mut().enumerate() {
            let raw = &rec[2 + j];
            *v = raw
                .parse()
                .map_err(|_| row_err(format!("{}: `{raw}` is not a number", FEATURE_NAMES[j])))?;
            if !(0.0..=1.0).contains(v) {
                return Err(row_err(format!(
                    "{}: {raw} is outside [0, 1]",
                    FEATURE_NAMES[j]
                )));
            }
        }
        let duration = if has_duration {
            Some(
                DurationKey::parse_days_field(&rec[10])
                    .ok_or_else(|| row_err(format!("bad duration_days `{}`", &rec[10])))?,
            )
        } else {
            None
        };
        out.push(InstanceRow {
            instance: SbInstance {
                auction_id: rec[0].to_string(),
                bidder_id: rec[1].to_string(),
                features: Features::from_point(&p),
            },
            duration,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::preprocess;

    fn bid(auction: &str, bidder: &str, amount: f64, time: f64) -> BidRecord {
        BidRecord {
            auction_id: auction.into(),
            bidder_id: bidder.into(),
            seller_id: "s1".into(),
            bid_amount: amount,
            bid_time: time,
            duration: 86_400,
            start_price: 10.0,
            winner_id: String::new(),
        }
    }

    fn seq(bidders: &[&str]) -> Vec<BidRecord> {
        bidders
            .iter()
            .enumerate()
            .map(|(i, b)| bid("a", b, 10.0 + i as f64, i as f64))
            .collect()
    }

    #[test]
    fn outbid_runs() {
        assert_eq!(successive_outbid_runs(&seq(&["A", "A"]), "A"), 1);
        assert_eq!(successive_outbid_runs(&seq(&["A", "B", "A"]), "A"), 0);
        assert_eq!(successive_outbid_runs(&seq(&["A", "A", "A"]), "A"), 2);
        assert_eq!(successive_outbid_runs(&[], "A"), 0);
    }

    #[test]
    fn lower_bid_does_not_take_the_lead() {
        let bids = vec![
            bid("a", "A", 10.0, 0.0),
            bid("a", "B", 5.0, 1.0),
            bid("a", "A", 12.0, 2.0),
        ];
        assert_eq!(successive_outbid_runs(&bids, "A"), 1);
        assert_eq!(successive_outbid_runs(&bids, "B"), 0);
    }

    #[test]
    fn so_mapping() {
        assert_eq!(so_score(0), 0.0);
        assert_eq!(so_score(1), 0.5);
        assert_eq!(so_score(2), 1.0);
        assert_eq!(so_score(7), 1.0);
    }

    #[test]
    fn sole_bidder_sole_auction() {
        let mut b = bid("a1", "x", 20.0, 43_200.0);
        b.winner_id = "x".into();
        let ds = preprocess(vec![b]).unwrap();
        let set = compute_instances(&ds);
        assert_eq!(set.instances.len(), 1);
        let f = set.instances[0].features;
        assert_eq!(
            f,
            Features {
                bt: 1.0,
                br: 1.0,
                so: 0.0,
                lb: 0.5,
                eb: 0.5,
                wr: 0.0,
                ab: 0.0,
                asp: 0.0,
            }
        );
    }

    #[test]
    fn two_auctions_history_features() {
        // x joins a1 (seller s1, wins) and a2 (seller s2, loses); y joins a1 only.
        let mut recs = vec![
            bid("a1", "y", 11.0, 10.0),
            bid("a1", "x", 12.0, 20.0),
            bid("a1", "x", 13.0, 30.0),
            bid("a2", "x", 5.0, 100.0),
            bid("a2", "z", 6.0, 200.0),
        ];
        for r in &mut recs[..3] {
            r.winner_id = "x".into();
        }
        for r in &mut recs[3..] {
            r.seller_id = "s2".into();
            r.start_price = 30.0;
            r.winner_id = "z".into();
        }
        let set = compute_instances(&preprocess(recs).unwrap());
        let get = |a: &str, b: &str| {
            set.instances
                .iter()
                .find(|i| i.auction_id == a && i.bidder_id == b)
                .unwrap()
                .features
        };
        let x1 = get("a1", "x");
        assert_eq!(x1.bt, 0.5);
        assert_eq!(x1.wr, 0.5);
        assert!((x1.br - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(x1.so, 0.5);
        // mean bids 2.5; a1 has 3 bids.
        assert!((x1.ab - (1.0 - 2.5 / 3.0)).abs() < 1e-15);
        // mean start 20; a1 start 10.
        assert_eq!(x1.asp, 0.5);
        let y = get("a1", "y");
        assert_eq!(y.wr, 1.0);
        assert_eq!(y.bt, 1.0);
        let z = get("a2", "z");
        assert_eq!(z.ab, 0.0);
        assert_eq!(z.asp, 0.0);
        assert_eq!(z.wr, 0.0);
        let order: Vec<_> = set
            .instances
            .iter()
            .map(|i| (i.auction_id.as_str(), i.bidder_id.as_str()))
            .collect();
        assert_eq!(order, [("a1", "x"), ("a1", "y"), ("a2", "x"), ("a2", "z")]);
    }

    #[test]
    fn reference_instance_is_valid() {
        // k***a from the 7-day example table.
        let f = Features::from_point(&[0.4705, 0.3076, 0.0, 0.1909, 0.1909, 0.4, 0.0, 0.0]);
        assert!(f.to_point().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!([0.0, 0.5, 1.0].contains(&f.so));
        assert!(f.eb <= f.lb);
    }

    #[test]
    fn instance_file_round_trip() {
        let inst = vec![SbInstance {
            auction_id: "a1".into(),
            bidder_id: "b1".into(),
            features: Features::from_point(&[0.1, 0.2, 0.5, 0.4, 0.3, 1.0, 0.0, 0.123456]),
        }];
        let mut buf = Vec::new();
        write_instances(&mut buf, &inst, Some(&[DurationKey::from_days(3)])).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("auction_id,bidder_id,bt,br,so,lb,eb,wr,ab,asp,duration_days\n"));
        assert!(text.contains("a1,b1,0.100000,0.200000,0.500000"));
        let rows = read_instances(buf.as_slice(), Path::new("t")).unwrap();
        assert_eq!(rows[0].instance, inst[0]);
        assert_eq!(rows[0].duration, Some(DurationKey::from_days(3)));
    }

    #[test]
    fn labeled_layout_is_accepted_as_input() {
        let text = "auction_id,bidder_id,bt,br,so,lb,eb,wr,ab,asp,duration_days,cluster_id,label\n\
                    a,b,0,0,0,0,0,0,0,0,7,3,1\n";
        let rows = read_instances(text.as_bytes(), Path::new("t")).unwrap();
        assert_eq!(rows[0].duration, Some(DurationKey::from_days(7)));
    }

    #[test]
    fn out_of_range_feature_rejected() {
        let text = "auction_id,bidder_id,bt,br,so,lb,eb,wr,ab,asp\na,b,0,0,0,0,0,0,0,1.5\n";
        assert!(matches!(
            read_instances(text.as_bytes(), Path::new("t")),
            Err(Error::Row { row: 1, .. })
        ));
    }
}
