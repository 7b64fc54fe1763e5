//! End-to-end change detection over sliding snapshots.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::clustering::{dbscan, ClusterParams, Clustering};
use crate::constellation::{
    build_constellation, constellation_distance, joint_bounds, CdReport, Constellation, Side,
};
use crate::evaluation::majority;
use crate::features::{
    extract_cache_features, normalize_snapshot, percentile_sorted, CacheFeatures, FeatureMode, MetricBounds,
    NormalizationBounds, DEFAULT_MIN_FLOW,
};
use crate::flow::{parse_cache_hostname, window_flows, FlowRecord, Snapshot, WindowSpec};
use crate::{Error, Result};

pub const DEFAULT_EVENT_THRESHOLD: f64 = 10.0;
pub const DEFAULT_MAJOR_THRESHOLD: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    pub min_flow: usize,
    pub mode: FeatureMode,
    pub cluster: ClusterParams,
    pub event_threshold: f64,
    pub major_threshold: f64,
    /// Stars listed per timeline entry.
    pub top_contributors: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: WindowSpec::days(7.0, 1.0),
            min_flow: DEFAULT_MIN_FLOW,
            mode: FeatureMode::default(),
            cluster: ClusterParams::default(),
            event_threshold: DEFAULT_EVENT_THRESHOLD,
            major_threshold: DEFAULT_MAJOR_THRESHOLD,
            top_contributors: 3,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        self.cluster.validate()?;
        if !(self.window.width > 0.0 && self.window.step > 0.0) {
            return Err(Error::InvalidParameter("window width and step must be positive".into()));
        }
        if !(self.event_threshold > 0.0 && self.major_threshold > 0.0) {
            return Err(Error::InvalidParameter("thresholds must be positive".into()));
        }
        if self.event_threshold > self.major_threshold {
            return Err(Error::InvalidParameter("event threshold exceeds major threshold".into()));
        }
        Ok(())
    }

    pub fn flag(&self, cd: f64) -> Flag {
        if cd >= self.major_threshold {
            Flag::Major
        } else if cd >= self.event_threshold {
            Flag::Event
        } else {
            Flag::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Flag {
    None,
    Event,
    Major,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::None => "none",
            Flag::Event => "event",
            Flag::Major => "major",
        }
    }
}

/// Features and clustering of one snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotAnalysis {
    pub index: usize,
    pub window_start: f64,
    pub window_end: f64,
    pub features: Vec<CacheFeatures>,
    /// `None` when no cache passed the flow threshold.
    pub bounds: Option<NormalizationBounds>,
    pub clustering: Clustering,
    /// Caches below the flow threshold.
    pub dropped: usize,
    /// Hostname seen for each active cache.
    pub hostnames: BTreeMap<String, String>,
}

impl SnapshotAnalysis {
    /// Majority airport code of a set of caches, when any hostname is plain.
    pub fn dominant_iata<'a, I: IntoIterator<Item = &'a str>>(&self, caches: I) -> Option<String> {
        let codes: Vec<String> = caches
            .into_iter()
            .filter_map(|c| self.hostnames.get(c))
            .filter_map(|h| parse_cache_hostname(h).iata)
            .collect();
        majority(codes.iter().map(String::as_str)).map(String::from)
    }
}

/// Extracts features and clusters one snapshot.
pub fn analyze_snapshot(snapshot: &Snapshot<'_>, config: &PipelineConfig) -> Result<SnapshotAnalysis> {
    let extraction = extract_cache_features(snapshot, config.min_flow, &config.mode)?;
    let (bounds, mut clustering) = if extraction.features.is_empty() {
        log::warn!("snapshot {} has no cache with at least {} flows", snapshot.index, config.min_flow);
        (None, dbscan(&[], config.cluster)?)
    } else {
        let (points, bounds) = normalize_snapshot(&extraction.features)?;
        (Some(bounds), dbscan(&points, config.cluster)?)
    };
    clustering.snapshot = Some(snapshot.index);
    let hostnames = extraction
        .features
        .iter()
        .filter_map(|f| {
            let flows = snapshot.caches.get(f.cache_id.as_str())?;
            Some((f.cache_id.clone(), flows.first()?.hostname.clone()))
        })
        .collect();
    Ok(SnapshotAnalysis {
        index: snapshot.index,
        window_start: snapshot.window_start,
        window_end: snapshot.window_end,
        features: extraction.features,
        bounds,
        clustering,
        dropped: extraction.dropped,
        hostnames,
    })
}

/// Two constellations built with shared bounds, and their distance.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub before: Constellation,
    pub after: Constellation,
    pub report: CdReport,
}

impl Comparison {
    pub fn constellation(&self, side: Side) -> &Constellation {
        match side {
            Side::A => &self.before,
            Side::B => &self.after,
        }
    }
}

/// Builds both constellations under joint bounds and computes their CD.
pub fn compare(before: &SnapshotAnalysis, after: &SnapshotAnalysis, k: usize) -> Result<Comparison> {
    let unit = MetricBounds { min: 0.0, max: 1.0 };
    let bounds = match (&before.bounds, &after.bounds) {
        (Some(a), Some(b)) => joint_bounds(a, b),
        (Some(x), None) | (None, Some(x)) => *x,
        (None, None) => NormalizationBounds { metrics: [unit, unit] },
    };
    let mut a = build_constellation(&before.clustering, &before.features, &bounds)?;
    let mut b = build_constellation(&after.clustering, &after.features, &bounds)?;
    a.k = k;
    b.k = k;
    let report = constellation_distance(&a, &b)?;
    Ok(Comparison { before: a, after: b, report })
}

/// One of the stars that contributed most to an entry's CD.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSummary {
    pub side: Side,
    pub star: usize,
    pub distance: f64,
    pub members: usize,
    pub label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TimelineEntry {
    pub index: usize,
    pub window_start: f64,
    pub window_end: f64,
    /// CD to the previous snapshot; `None` for the first entry.
    pub cd: Option<f64>,
    pub noise_count: usize,
    pub cache_count: usize,
    pub cluster_count: usize,
    pub flag: Flag,
    pub top: Vec<StarSummary>,
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone)]
pub struct Timeline {
    pub snapshots: Vec<SnapshotAnalysis>,
    pub entries: Vec<TimelineEntry>,
}

/// Runs the whole pipeline over a set of flow records.
pub fn run_timeline(records: &[FlowRecord], config: &PipelineConfig) -> Result<Timeline> {
    config.validate()?;
    let snapshots = window_flows(records, config.window)?;
    if snapshots.len() < 2 {
        return Err(Error::TooFewSnapshots(snapshots.len()));
    }
    let analyses = snapshots.iter().map(|s| analyze_snapshot(s, config)).collect::<Result<Vec<_>>>()?;
    timeline_from_analyses(analyses, config)
}

/// Compares consecutive analyzed snapshots.
pub fn timeline_from_analyses(analyses: Vec<SnapshotAnalysis>, config: &PipelineConfig) -> Result<Timeline> {
    let k = config.mode.width();
    let mut entries = Vec::with_capacity(analyses.len());
    for (i, cur) in analyses.iter().enumerate() {
        let comparison = match i {
            0 => None,
            _ => Some(compare(&analyses[i - 1], cur, k)?),
        };
        let top = comparison
            .as_ref()
            .map(|c| {
                c.report
                    .contributors
                    .iter()
                    .take(config.top_contributors)
                    .map(|t| {
                        let star = &c.constellation(t.side).stars[t.star];
                        let owner = if t.side == Side::A { &analyses[i - 1] } else { cur };
                        StarSummary {
                            side: t.side,
                            star: t.star,
                            distance: t.distance,
                            members: star.members.len(),
                            label: owner.dominant_iata(star.members.iter().map(String::as_str)),
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        let cd = comparison.as_ref().map(|c| c.report.cd);
        entries.push(TimelineEntry {
            index: cur.index,
            window_start: cur.window_start,
            window_end: cur.window_end,
            cd,
            noise_count: cur.clustering.noise.len(),
            cache_count: cur.clustering.point_count(),
            cluster_count: cur.clustering.clusters.len(),
            flag: cd.map_or(Flag::None, |v| config.flag(v)),
            top,
            comparison,
        });
    }
    Ok(Timeline { snapshots: analyses, entries })
}

/// Throughput and RTT summary of a group of caches within one window.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub window_start: f64,
    pub window_end: f64,
    pub flows: usize,
    /// 10th to 90th throughput percentiles, kb/s.
    pub throughput_deciles: Option<Vec<f64>>,
    /// RTT at the configured percentiles, ms.
    pub rtt_percentiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrilldownStar {
    pub side: Side,
    pub star: usize,
    pub distance: f64,
    pub label: Option<String>,
    pub members: Vec<String>,
    pub before: GroupStats,
    pub after: GroupStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrilldownReport {
    pub entry: usize,
    pub cd: Option<f64>,
    pub stars: Vec<DrilldownStar>,
}

pub const DECILES: [f64; 9] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0];

fn group_stats(records: &[FlowRecord], members: &BTreeSet<&str>, start: f64, end: f64, rtt_q: &[f64]) -> GroupStats {
    let flows: Vec<&FlowRecord> = records
        .iter()
        .filter(|r| start <= r.start_time && r.start_time < end && members.contains(r.server_ip.as_str()))
        .collect();
    let summarize = |mut v: Vec<f64>, qs: &[f64]| {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(qs.iter().map(|q| percentile_sorted(&v, *q)).collect())
    };
    GroupStats {
        window_start: start,
        window_end: end,
        flows: flows.len(),
        throughput_deciles: summarize(flows.iter().map(|f| f.avg_throughput).collect(), &DECILES),
        rtt_percentiles: summarize(flows.iter().map(|f| f.min_rtt).collect(), rtt_q),
    }
}

/// Details the top contributing stars of a flagged entry, comparing their
/// caches' traffic in the previous and the current window. Unflagged entries
/// give an empty report.
pub fn drilldown(timeline: &Timeline, entry: usize, records: &[FlowRecord], config: &PipelineConfig) -> Result<DrilldownReport> {
    let e = timeline
        .entries
        .get(entry)
        .ok_or_else(|| Error::InvalidParameter(alloc::format!("no timeline entry {entry}")))?;
    let mut report = DrilldownReport { entry, cd: e.cd, stars: Vec::new() };
    let (Some(cmp), true) = (&e.comparison, e.flag != Flag::None) else {
        return Ok(report);
    };
    let rtt_q: Vec<f64> = match &config.mode {
        FeatureMode::Percentiles(p) => p.clone(),
        FeatureMode::MeanStd => crate::features::DEFAULT_PERCENTILES.to_vec(),
    };
    let prev = &timeline.snapshots[entry - 1];
    let cur = &timeline.snapshots[entry];
    for (t, summary) in cmp.report.contributors.iter().zip(&e.top) {
        let star = &cmp.constellation(t.side).stars[t.star];
        let members: BTreeSet<&str> = star.members.iter().map(String::as_str).collect();
        report.stars.push(DrilldownStar {
            side: t.side,
            star: t.star,
            distance: t.distance,
            label: summary.label.clone(),
            members: star.members.clone(),
            before: group_stats(records, &members, prev.window_start, prev.window_end, &rtt_q),
            after: group_stats(records, &members, cur.window_start, cur.window_end, &rtt_q),
        });
    }
    Ok(report)
}
