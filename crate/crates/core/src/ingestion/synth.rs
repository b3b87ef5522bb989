use rand::seq::SliceRandom;
use rand::Rng;

use super::{preprocess, BidRecord, CleanDataset, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::seed;

/// Exact layout for one duration: number of auctions and total number of
/// distinct (auction, bidder) participations across them.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationBlock {
    pub days: u32,
    pub auctions: usize,
    pub participants: usize,
}

/// Parameters of the synthetic bid-log generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub auctions: usize,
    /// `(days, weight)` pairs. Ignored when `layout` is set.
    pub duration_mix: Vec<(u32, f64)>,
    pub bidder_pool: usize,
    pub seller_pool: usize,
    /// Fraction of the bidder pool that behaves as shills.
    pub shill_fraction: f64,
    /// Range of item values; start prices and bids are drawn relative to it.
    pub price_range: (f64, f64),
    /// Inclusive range of distinct bidders per auction. Ignored when `layout` is set.
    pub bidders_per_auction: (usize, usize),
    pub layout: Option<Vec<DurationBlock>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            auctions: 100,
            duration_mix: vec![(1, 0.21), (3, 0.23), (5, 0.16), (7, 0.38), (10, 0.02)],
            bidder_pool: 300,
            seller_pool: 120,
            shill_fraction: 0.1,
            price_range: (400.0, 800.0),
            bidders_per_auction: (2, 14),
            layout: None,
        }
    }
}

impl SynthConfig {
    /// Auction and instance counts per duration matching the reference
    /// dataset shape (807 auctions, 6321 instances).
    pub fn full_scale() -> Self {
        let blocks = [
            (1, 166, 1289),
            (3, 187, 1408),
            (5, 131, 1060),
            (7, 309, 2427),
            (10, 14, 137),
        ];
        SynthConfig {
            auctions: 807,
            bidder_pool: 1054,
            seller_pool: 647,
            shill_fraction: 0.1,
            layout: Some(
                blocks
                    .iter()
                    .map(|&(days, auctions, participants)| DurationBlock {
                        days,
                        auctions,
                        participants,
                    })
                    .collect(),
            ),
            ..SynthConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let auctions = match &self.layout {
            Some(blocks) => blocks.iter().map(|b| b.auctions).sum(),
            None => self.auctions,
        };
        if auctions == 0 {
            return Err(Error::domain(
                "synthetic generator needs at least one auction",
            ));
        }
        if !(0.0..=1.0).contains(&self.shill_fraction) {
            return Err(Error::domain("shill_fraction must lie in [0, 1]"));
        }
        if self.seller_pool == 0 {
            return Err(Error::domain("seller_pool must be positive"));
        }
        let (lo, hi) = self.price_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::domain("price_range must satisfy 0 < low <= high"));
        }
        let max_participants = match &self.layout {
            Some(blocks) => {
                for b in blocks {
                    if b.days == 0 {
                        return Err(Error::domain("block duration must be at least one day"));
                    }
                    if b.participants < 2 * b.auctions {
                        return Err(Error::domain(format!(
                            "{}-day block needs at least two participants per auction",
                            b.days
                        )));
                    }
                }
                blocks
                    .iter()
                    .filter(|b| b.auctions > 0)
                    .map(|b| b.participants.div_ceil(b.auctions))
                    .max()
                    .unwrap_or(2)
                    .max(2)
            }
            None => {
                let (lo, hi) = self.bidders_per_auction;
                if lo < 2 || lo > hi {
                    return Err(Error::domain(
                        "bidders_per_auction must satisfy 2 <= min <= max",
                    ));
                }
                if self.duration_mix.is_empty()
                    || self
                        .duration_mix
                        .iter()
                        .any(|&(d, w)| d == 0 || w.is_nan() || w < 0.0)
                    || self.duration_mix.iter().all(|&(_, w)| w == 0.0)
                {
                    return Err(Error::domain(
                        "duration_mix needs positive days and weights",
                    ));
                }
                hi
            }
        };
        let shills = (self.shill_fraction * self.bidder_pool as f64).round() as usize;
        if self.bidder_pool.saturating_sub(shills) < max_participants + 2 {
            return Err(Error::domain(format!(
                "bidder_pool {} is too small for {max_participants} participants per auction",
                self.bidder_pool
            )));
        }
        Ok(())
    }
}

struct Plan {
    days: u32,
    participants: usize,
}

fn plan_auctions<R: Rng>(cfg: &SynthConfig, cap: usize, rng: &mut R) -> Vec<Plan> {
    match &cfg.layout {
        Some(blocks) => {
            let mut plans = Vec::new();
            for b in blocks {
                // Two participants each, the rest scattered uniformly below `cap`.
                let mut counts = vec![2usize; b.auctions];
                for _ in 0..b.participants - 2 * b.auctions {
                    loop {
                        let i = rng.gen_range(0..b.auctions);
                        if counts[i] < cap {
                            counts[i] += 1;
                            break;
                        }
                    }
                }
                plans.extend(counts.into_iter().map(|participants| Plan {
                    days: b.days,
                    participants,
                }));
            }
            plans.shuffle(rng);
            plans
        }
        None => {
            let total: f64 = cfg.duration_mix.iter().map(|&(_, w)| w).sum();
            let (lo, hi) = cfg.bidders_per_auction;
            (0..cfg.auctions)
                .map(|_| {
                    let mut x = rng.gen::<f64>() * total;
                    let mut days = cfg.duration_mix[cfg.duration_mix.len() - 1].0;
                    for &(d, w) in &cfg.duration_mix {
                        if x < w {
                            days = d;
                            break;
                        }
                        x -= w;
                    }
                    Plan {
                        days,
                        participants: rng.gen_range(lo..=hi),
                    }
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy)]
enum Role {
    Normal,
    Shill,
}

/// Generate a clean synthetic bid log.
///
/// Normal bidders enter late and never bid while already leading. Shills are
/// tied to colluding sellers; they enter early, bid in consecutive runs
/// (outbidding themselves) and stop well before the close.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<CleanDataset> {
    config.validate()?;
    let mut rng = seed::rng(seed::derive(seed, 0x5EED_B1D5));
    let n_shills = (config.shill_fraction * config.bidder_pool as f64).round() as usize;
    let plans = plan_auctions(config, config.bidder_pool - n_shills - 1, &mut rng);

    let mut pool: Vec<usize> = (0..config.bidder_pool).collect();
    pool.shuffle(&mut rng);
    let (shills, normals) = pool.split_at(n_shills);
    let n_colluding = if n_shills == 0 {
        0
    } else {
        (n_shills / 3).clamp(1, config.seller_pool)
    };
    // Shill i works for colluding seller i % n_colluding.
    let shills_of = |seller: usize| -> Vec<usize> {
        shills
            .iter()
            .enumerate()
            .filter(|(i, _)| i % n_colluding == seller)
            .map(|(_, &b)| b)
            .collect()
    };
    let collude_p = (config.shill_fraction * 3.0).min(0.6);

    let width = |n: usize| n.max(1).to_string().len();
    let (aw, bw, sw) = (
        width(plans.len()),
        width(config.bidder_pool),
        width(config.seller_pool),
    );
    let (price_lo, price_hi) = config.price_range;

    let mut records = Vec::new();
    for (a, plan) in plans.iter().enumerate() {
        let auction_id = format!("A{:0aw$}", a + 1);
        let duration = plan.days as u64 * SECONDS_PER_DAY;
        let d = duration as f64;
        let colluding = n_colluding > 0 && rng.gen_bool(collude_p);
        let seller = if colluding {
            rng.gen_range(0..n_colluding)
        } else {
            rng.gen_range(0..config.seller_pool)
        };
        let value = rng.gen_range(price_lo..=price_hi);
        let start_price = if colluding {
            (value * rng.gen_range(0.0..0.02) * 100.0).round() / 100.0
        } else {
            (value * rng.gen_range(0.05..0.6) * 100.0).round() / 100.0
        };

        let mut participants: Vec<(usize, Role)> = Vec::with_capacity(plan.participants);
        if colluding {
            let mut crew = shills_of(seller);
            crew.shuffle(&mut rng);
            let take = crew
                .len()
                .min(rng.gen_range(1..=2))
                .min(plan.participants - 1);
            participants.extend(crew[..take].iter().map(|&b| (b, Role::Shill)));
        }
        let need = plan.participants - participants.len();
        participants.extend(
            normals
                .choose_multiple(&mut rng, need)
                .map(|&b| (b, Role::Normal)),
        );

        // (time, participant index)
        let mut events: Vec<(f64, usize)> = Vec::new();
        for (p, &(_, role)) in participants.iter().enumerate() {
            match role {
                Role::Normal => {
                    let enter = rng.gen_range(0.05..0.98) * d;
                    let n = rng.gen_range(1..=3);
                    events.push((enter, p));
                    for _ in 1..n {
                        events.push((rng.gen_range(enter..=d), p));
                    }
                }
                Role::Shill => {
                    let enter = rng.gen_range(0.0..0.1) * d;
                    let leave = rng.gen_range(0.3..0.55) * d;
                    let runs = rng.gen_range(1..=3);
                    for _ in 0..runs {
                        let t = rng.gen_range(enter..leave);
                        let len = rng.gen_range(2..=3);
                        for j in 0..len {
                            events.push(((t + j as f64 * 1e-3 * d).min(leave), p));
                        }
                    }
                }
            }
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

        let mut price = start_price.max(1.0);
        let mut leader: Option<usize> = None;
        let mut bids: Vec<(f64, usize, f64)> = Vec::new();
        for (t, p) in events {
            let is_shill = matches!(participants[p].1, Role::Shill);
            if leader == Some(p) && !is_shill {
                continue;
            }
            price += (price * rng.gen_range(0.005..0.04)).max(1.0);
            price = (price * 100.0).round() / 100.0;
            bids.push((t, p, price));
            leader = Some(p);
        }
        let winner = leader.map(|p| format!("b{:0bw$}", participants[p].0 + 1));
        let seller_id = format!("s{:0sw$}", seller + 1);
        for (t, p, amount) in bids {
            records.push(BidRecord {
                auction_id: auction_id.clone(),
                bidder_id: format!("b{:0bw$}", participants[p].0 + 1),
                seller_id: seller_id.clone(),
                bid_amount: amount,
                bid_time: t,
                duration,
                start_price,
                winner_id: winner.clone().unwrap_or_default(),
            });
        }
    }
    preprocess(records)
}
