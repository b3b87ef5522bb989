//! Shill-bidding dataset production and labeling.
//!
//! The crate turns auction bid logs into per-(auction, bidder) behavioural
//! feature vectors, splits them by bidding duration, picks a cluster count per
//! subset with k-means and the silhouette score, clusters each subset with CURE
//! and labels every cluster as normal or suspicious against the subset's
//! `mean + std / 2` decision line.
//!
//! Stages are exposed individually so they can be driven from the `sblabel`
//! CLI, and [`pipeline::run_all`] chains them end to end through persisted
//! artifacts.

pub mod cure;
mod error;
pub mod features;
pub mod geometry;
pub mod ingestion;
pub mod kmeans;
pub mod labeling;
pub mod partitioning;
pub mod pipeline;
pub mod seed;
pub mod silhouette;
pub mod sweep;

pub use error::{Error, Result};
pub use geometry::{Point, DIM};
