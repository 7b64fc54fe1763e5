//! Edge-node discovery and change detection for CDN flow records.
//!
//! The pipeline groups flow records into sliding snapshots, turns every
//! sufficiently active cache into a vector of RTT/TTL percentiles, clusters
//! caches into edge-nodes with DBSCAN, and compares consecutive clusterings
//! through their constellations of centroids. The crate is `no_std` and only
//! needs `alloc`; file formats and the command line live in `cdnwatch`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod clustering;
pub mod constellation;
mod error;
pub mod evaluation;
pub mod features;
pub mod flow;
mod math;
pub mod synth;
pub mod timeline;

pub use error::{Error, Result};

/// Seconds in one day.
pub const DAY: f64 = 86_400.0;
