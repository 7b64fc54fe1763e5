//! Labeled synthetic flow traces.
//!
//! Every edge-node owns a fixed set of caches sharing one RTT distribution
//! (log-normal around the node median) and one TTL. Each day the node's flows
//! are spread over its caches with weights that drift by `rank_churn`, and
//! events can add, remove, delay or congest a node for a range of days.
//!
//! Randomness is drawn from independent streams per `(day)`, `(day, node)` and
//! `(day, node, cache)`, so switching an event on only changes the samples it
//! targets.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, StandardNormal};

use crate::clustering::DEFAULT_MIN_PTS;
use crate::evaluation::GroundTruth;
use crate::flow::{midnight_floor, FlowRecord};
use crate::math::derive_seed;
use crate::{Error, Result, DAY};

/// 2014-02-01T00:00:00Z.
pub const DEFAULT_EPOCH: f64 = 1_391_212_800.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeNodeSpec {
    /// Three-letter code; doubles as the ground-truth label.
    pub label: String,
    pub cache_count: usize,
    /// Median minimum RTT in milliseconds.
    pub rtt_median: f64,
    /// Jitter scale in milliseconds; the log-normal sigma is `ln(1 + spread/median)`.
    pub rtt_spread: f64,
    pub ttl: u8,
    /// Relative share of the daily flows.
    pub load_weight: f64,
}

impl EdgeNodeSpec {
    pub fn new(label: &str, cache_count: usize, rtt_median: f64, rtt_spread: f64, ttl: u8, load_weight: f64) -> Self {
        EdgeNodeSpec { label: label.into(), cache_count, rtt_median, rtt_spread, ttl, load_weight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// The node serves nothing before `start_day`.
    NodeBirth,
    /// The node serves nothing during the event.
    NodeDeath,
    /// Median RTT grows by this many milliseconds.
    PathShift { rtt_increase: f64 },
    /// Throughput is multiplied by `throughput_factor` and the RTT jitter scale
    /// by `spread_factor`.
    Congestion { throughput_factor: f64, spread_factor: f64 },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::NodeBirth => "node_birth",
            EventKind::NodeDeath => "node_death",
            EventKind::PathShift { .. } => "path_shift",
            EventKind::Congestion { .. } => "congestion",
        }
    }
}

/// An event active on days `start_day..=end_day` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub kind: EventKind,
    pub target: String,
    pub start_day: u32,
    pub end_day: u32,
}

impl EventSpec {
    pub fn new(kind: EventKind, target: &str, start_day: u32, end_day: u32) -> Self {
        EventSpec { kind, target: target.into(), start_day, end_day }
    }

    pub fn active_on(&self, day: u32) -> bool {
        self.start_day <= day && day <= self.end_day
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub nodes: Vec<EdgeNodeSpec>,
    pub events: Vec<EventSpec>,
    pub days: u32,
    pub flows_per_day: usize,
    /// 0 keeps per-cache weights fixed; 1 redraws them every day.
    pub rank_churn: f64,
    pub seed: u64,
    /// Start of day 0, epoch seconds.
    pub epoch: f64,
    pub clients: usize,
    /// Median throughput in kb/s before diurnal and event effects.
    pub throughput_median: f64,
}

impl SynthConfig {
    pub fn new(nodes: Vec<EdgeNodeSpec>, days: u32, flows_per_day: usize, seed: u64) -> Self {
        SynthConfig {
            nodes,
            events: Vec::new(),
            days,
            flows_per_day,
            rank_churn: 0.2,
            seed,
            epoch: DEFAULT_EPOCH,
            clients: 2000,
            throughput_median: 2500.0,
        }
    }

    /// Six edge-nodes whose RTT medians range from 15 to 95 ms, each with 20
    /// caches and distinct TTLs.
    pub fn six_nodes(days: u32, seed: u64) -> Self {
        let nodes = vec![
            EdgeNodeSpec::new("MXP", 20, 15.0, 0.6, 58, 0.30),
            EdgeNodeSpec::new("FRA", 20, 24.0, 0.8, 56, 0.20),
            EdgeNodeSpec::new("AMS", 20, 33.0, 1.0, 55, 0.15),
            EdgeNodeSpec::new("LHR", 20, 45.0, 1.2, 53, 0.15),
            EdgeNodeSpec::new("CDG", 20, 62.0, 1.5, 51, 0.10),
            EdgeNodeSpec::new("JFK", 20, 95.0, 2.0, 47, 0.10),
        ];
        SynthConfig::new(nodes, days, 6000, seed)
    }

    pub fn with_event(mut self, event: EventSpec) -> Self {
        self.events.push(event);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        if self.flows_per_day == 0 {
            return bad("flows_per_day must be at least 1".into());
        }
        if self.nodes.is_empty() {
            return bad("no edge-nodes configured".into());
        }
        if self.nodes.len() > 250 {
            return bad("at most 250 edge-nodes are supported".into());
        }
        if !(0.0..=1.0).contains(&self.rank_churn) {
            return bad("rank_churn must lie in [0, 1]".into());
        }
        if self.clients == 0 || !(self.throughput_median > 0.0) || !self.epoch.is_finite() {
            return bad("clients and throughput_median must be positive".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.label.len() != 3 || !n.label.bytes().all(|b| b.is_ascii_alphabetic()) {
                return bad(format!("node label {:?} is not a three-letter code", n.label));
            }
            if self.nodes[..i].iter().any(|o| o.label.eq_ignore_ascii_case(&n.label)) {
                return bad(format!("duplicate node label {}", n.label));
            }
            if n.cache_count < DEFAULT_MIN_PTS {
                return bad(format!("node {} needs at least {DEFAULT_MIN_PTS} caches", n.label));
            }
            if !(n.rtt_median > 0.0) || !(n.rtt_spread >= 0.0) || !(n.load_weight >= 0.0) {
                return bad(format!("node {} has invalid rtt or load parameters", n.label));
            }
        }
        for e in &self.events {
            if e.start_day > e.end_day {
                return bad(format!("event on {} ends before it starts", e.target));
            }
            if !self.nodes.iter().any(|n| n.label == e.target) {
                return bad(format!("event targets unknown node {}", e.target));
            }
            let ok = match e.kind {
                EventKind::PathShift { rtt_increase } => rtt_increase > 0.0,
                EventKind::Congestion { throughput_factor, spread_factor } => {
                    throughput_factor > 0.0 && spread_factor > 0.0
                }
                _ => true,
            };
            if !ok {
                return bad(format!("event on {} needs a positive magnitude", e.target));
            }
        }
        Ok(())
    }
}

/// Cache identity and hostname of cache `cache` of node `node`.
pub fn cache_identity(node: usize, label: &str, cache: usize) -> (String, String) {
    let ip = format!("10.{}.{}.{}", node + 1, cache / 250, cache % 250 + 1);
    let host = format!(
        "r{}---{}{:02}t{:02}.c.youtube.com",
        cache % 20 + 1,
        label.to_ascii_lowercase(),
        node + 1,
        cache + 1
    );
    (ip, host)
}

/// Effective per-day parameters of one node.
struct NodeDay {
    active: bool,
    rtt_median: f64,
    rtt_spread: f64,
    throughput_factor: f64,
}

fn node_day(config: &SynthConfig, node: &EdgeNodeSpec, day: u32) -> NodeDay {
    let mut d = NodeDay { active: true, rtt_median: node.rtt_median, rtt_spread: node.rtt_spread, throughput_factor: 1.0 };
    for e in config.events.iter().filter(|e| e.target == node.label) {
        match e.kind {
            EventKind::NodeBirth => {
                if day < e.start_day || day > e.end_day {
                    d.active = false;
                }
            }
            EventKind::NodeDeath if e.active_on(day) => d.active = false,
            EventKind::PathShift { rtt_increase } if e.active_on(day) => d.rtt_median += rtt_increase,
            EventKind::Congestion { throughput_factor, spread_factor } if e.active_on(day) => {
                d.throughput_factor *= throughput_factor;
                d.rtt_spread *= spread_factor;
            }
            _ => {}
        }
    }
    d
}

/// Diurnal throughput modulation: a 25% dip centered on 21:00.
fn diurnal(seconds_of_day: f64) -> f64 {
    let hour = seconds_of_day / 3600.0;
    let phase = 2.0 * core::f64::consts::PI * (hour - 21.0) / 24.0;
    1.0 - 0.25 * (1.0 + libm::cos(phase)) / 2.0
}

fn round3(x: f64) -> f64 {
    libm::round(x * 1000.0) / 1000.0
}

/// Generates a trace and the label of every cache. Records are sorted by
/// start time.
pub fn generate_trace(config: &SynthConfig) -> Result<(Vec<FlowRecord>, GroundTruth)> {
    config.validate()?;
    let mut truth = GroundTruth::default();
    let identities: Vec<Vec<(String, String)>> = config
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (0..n.cache_count).map(|c| cache_identity(i, &n.label, c)).collect())
        .collect();
    for (node, ids) in config.nodes.iter().zip(&identities) {
        for (ip, _) in ids {
            truth.insert(ip.clone(), node.label.clone());
        }
    }

    // Per-cache weights evolve day over day.
    let mut weights: Vec<Vec<f64>> = config
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::MAX, i as u64]));
            (0..n.cache_count).map(|_| rng.random_range(0.5..1.5)).collect()
        })
        .collect();

    let throughput = LogNormal::new(libm::log(config.throughput_median), 0.4)
        .map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    let volume = LogNormal::new(libm::log(8.0e6), 0.8).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    let mut records = Vec::with_capacity(config.flows_per_day * config.days as usize);
    for day in 0..config.days {
        let params: Vec<NodeDay> = config.nodes.iter().map(|n| node_day(config, n, day)).collect();

        // Churn is applied every day, active or not, so it does not depend on events.
        for (i, w) in weights.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::from(day), i as u64, 1]));
            for x in w.iter_mut() {
                let fresh: f64 = rng.random_range(0.0..2.0);
                *x = (1.0 - config.rank_churn) * *x + config.rank_churn * fresh;
            }
        }

        let node_weights: Vec<f64> =
            config.nodes.iter().zip(&params).map(|(n, p)| if p.active { n.load_weight } else { 0.0 }).collect();
        let Ok(node_pick) = WeightedIndex::new(&node_weights) else {
            continue;
        };
        let mut day_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::from(day)]));
        let mut per_node = vec![0usize; config.nodes.len()];
        for _ in 0..config.flows_per_day {
            per_node[node_pick.sample(&mut day_rng)] += 1;
        }

        let day_start = config.epoch + f64::from(day) * DAY;
        for (i, node) in config.nodes.iter().enumerate() {
            if per_node[i] == 0 {
                continue;
            }
            let p = &params[i];
            let mut node_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::from(day), i as u64, 2]));
            let cache_pick = WeightedIndex::new(&weights[i]).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
            let mut per_cache = vec![0usize; node.cache_count];
            for _ in 0..per_node[i] {
                per_cache[cache_pick.sample(&mut node_rng)] += 1;
            }

            let sigma = libm::log(1.0 + p.rtt_spread / p.rtt_median);
            for (c, &count) in per_cache.iter().enumerate() {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::from(day), i as u64, 3, c as u64]));
                let (ip, host) = &identities[i][c];
                for _ in 0..count {
                    let offset: f64 = rng.random_range(0.0..DAY);
                    let z: f64 = rng.sample(StandardNormal);
                    let rtt = (p.rtt_median * libm::exp(sigma * z)).max(0.1);
                    let tput_base: f64 = throughput.sample(&mut rng);
                    let bytes_down: f64 = volume.sample(&mut rng);
                    let client = rng.random_range(0..config.clients);
                    records.push(FlowRecord {
                        start_time: round3(day_start + offset),
                        client_id: format!("C{client}"),
                        server_ip: ip.clone(),
                        hostname: host.clone(),
                        min_rtt: round3(rtt),
                        ttl: node.ttl,
                        bytes_up: (bytes_down / 60.0) as u64,
                        bytes_down: bytes_down as u64,
                        avg_throughput: round3(tput_base * diurnal(offset) * p.throughput_factor),
                    });
                }
            }
        }
    }
    records.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then_with(|| a.server_ip.cmp(&b.server_ip)));
    Ok((records, truth))
}

/// Daily flow-count ranks per cache (1 = busiest). Caches without flows in a
/// period have no rank there.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMatrix {
    pub caches: Vec<String>,
    /// Start of each period, epoch seconds.
    pub periods: Vec<f64>,
    /// `ranks[cache][period]`.
    pub ranks: Vec<Vec<Option<u32>>>,
}

/// Ranks caches by flow count within consecutive periods of `period_days`
/// starting at the midnight before the first record. Ties go to the smaller
/// cache id.
pub fn rank_matrix(records: &[FlowRecord], period_days: f64, utc_offset: i64) -> Result<RankMatrix> {
    if !(period_days > 0.0) {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    let mut caches: Vec<String> = records.iter().map(|r| r.server_ip.clone()).collect();
    caches.sort();
    caches.dedup();
    let Some(first) = records.iter().map(|r| r.start_time).min_by(f64::total_cmp) else {
        return Ok(RankMatrix { caches, periods: Vec::new(), ranks: Vec::new() });
    };
    let last = records.iter().map(|r| r.start_time).max_by(f64::total_cmp).unwrap_or(first);
    let t0 = midnight_floor(first, utc_offset);
    let width = period_days * DAY;
    let n_periods = libm::floor((last - t0) / width) as usize + 1;

    let mut counts = vec![vec![0u32; n_periods]; caches.len()];
    for r in records {
        let c = caches.binary_search(&r.server_ip).expect("collected above");
        let p = (libm::floor((r.start_time - t0) / width) as usize).min(n_periods - 1);
        counts[c][p] += 1;
    }
    let mut ranks = vec![vec![None; n_periods]; caches.len()];
    for p in 0..n_periods {
        let mut order: Vec<usize> = (0..caches.len()).filter(|&c| counts[c][p] > 0).collect();
        // Cache ids are sorted, so a stable sort by count breaks ties by id.
        order.sort_by(|&a, &b| counts[b][p].cmp(&counts[a][p]));
        for (rank, c) in order.into_iter().enumerate() {
            ranks[c][p] = Some(rank as u32 + 1);
        }
    }
    let periods = (0..n_periods).map(|p| t0 + p as f64 * width).collect();
    Ok(RankMatrix { caches, periods, ranks })
}
