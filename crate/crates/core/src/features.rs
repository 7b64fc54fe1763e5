//! Per-cache RTT/TTL feature extraction and per-snapshot min-max scaling.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::flow::Snapshot;
use crate::math::sqrt;
use crate::{Error, Result};

/// Percentiles used when nothing else is configured. Tail percentiles are
/// left out on purpose: they are dominated by outliers.
pub const DEFAULT_PERCENTILES: [f64; 5] = [20.0, 35.0, 50.0, 65.0, 80.0];

/// Default minimum number of flows for a cache to enter a snapshot.
pub const DEFAULT_MIN_FLOW: usize = 50;

/// Path metrics a cache is described by, in feature-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Rtt,
    Ttl,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Rtt, Metric::Ttl];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rtt => "rtt",
            Metric::Ttl => "ttl",
        }
    }
}

/// How a cache's per-metric sample distribution is summarized.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMode {
    /// One value per listed percentile (strictly increasing, inside (0, 100)).
    Percentiles(Vec<f64>),
    /// Mean and population standard deviation.
    MeanStd,
}

impl Default for FeatureMode {
    fn default() -> Self {
        FeatureMode::Percentiles(DEFAULT_PERCENTILES.to_vec())
    }
}

impl FeatureMode {
    /// Values per metric (`k`).
    pub fn width(&self) -> usize {
        match self {
            FeatureMode::Percentiles(p) => p.len(),
            FeatureMode::MeanStd => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let FeatureMode::Percentiles(list) = self else {
            return Ok(());
        };
        if list.is_empty() {
            return Err(Error::InvalidPercentiles("list is empty".into()));
        }
        if list.iter().any(|q| !(*q > 0.0 && *q < 100.0)) {
            return Err(Error::InvalidPercentiles("values must lie in (0, 100)".into()));
        }
        if list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPercentiles("values must be strictly increasing".into()));
        }
        Ok(())
    }

    fn summarize(&self, samples: &mut [f64]) -> Vec<f64> {
        match self {
            FeatureMode::Percentiles(list) => {
                samples.sort_by(f64::total_cmp);
                list.iter().map(|q| percentile_sorted(samples, *q)).collect()
            }
            FeatureMode::MeanStd => {
                let n = samples.len() as f64;
                let mean = samples.iter().sum::<f64>() / n;
                let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                alloc::vec![mean, sqrt(var)]
            }
        }
    }
}

/// Linear-interpolation percentile on `(N-1)`-scaled ranks.
///
/// `q` is clamped to `[0, 100]`.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

/// [`percentile`] over samples that are already sorted ascending and non-empty.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let q = q.clamp(0.0, 100.0);
    let h = (n - 1) as f64 * q / 100.0;
    let lo = h as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Summary statistics of one active cache, in raw metric units
/// (milliseconds for RTT, hops for TTL).
#[derive(Debug, Clone, PartialEq)]
pub struct CacheFeatures {
    pub cache_id: String,
    pub flow_count: usize,
    /// Indexed by [`Metric::index`].
    pub raw: [Vec<f64>; 2],
}

impl CacheFeatures {
    pub fn metric(&self, m: Metric) -> &[f64] {
        &self.raw[m.index()]
    }

    /// Raw values laid out as one vector: the RTT block, then the TTL block.
    pub fn concatenated(&self) -> Vec<f64> {
        self.raw.iter().flatten().copied().collect()
    }
}

/// Result of [`extract_cache_features`].
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub features: Vec<CacheFeatures>,
    /// Caches seen in the snapshot but below the flow threshold.
    pub dropped: usize,
}

/// Summarizes every cache with at least `min_flow` flows. Output is sorted by
/// cache id.
pub fn extract_cache_features(snapshot: &Snapshot<'_>, min_flow: usize, mode: &FeatureMode) -> Result<Extraction> {
    mode.validate()?;
    let mut out = Extraction::default();
    let mut rtt = Vec::new();
    let mut ttl = Vec::new();
    for (cache, flows) in &snapshot.caches {
        if flows.len() < min_flow || flows.is_empty() {
            out.dropped += 1;
            continue;
        }
        rtt.clear();
        ttl.clear();
        rtt.extend(flows.iter().map(|f| f.min_rtt));
        ttl.extend(flows.iter().map(|f| f64::from(f.ttl)));
        out.features.push(CacheFeatures {
            cache_id: cache.to_string(),
            flow_count: flows.len(),
            raw: [mode.summarize(&mut rtt), mode.summarize(&mut ttl)],
        });
    }
    Ok(out)
}

/// Range of one metric over a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricBounds {
    pub min: f64,
    pub max: f64,
}

impl MetricBounds {
    /// Maps `value` onto `[0, 1]`. A degenerate range maps everything to 0.
    pub fn scale(&self, value: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (value - self.min) / span
        } else {
            0.0
        }
    }

    /// Inverse of [`scale`](Self::scale) for a non-degenerate range.
    pub fn unscale(&self, value: f64) -> f64 {
        self.min + value * (self.max - self.min)
    }

    pub fn union(&self, other: &MetricBounds) -> MetricBounds {
        MetricBounds { min: self.min.min(other.min), max: self.max.max(other.max) }
    }
}

/// Per-metric bounds, indexed by [`Metric::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationBounds {
    pub metrics: [MetricBounds; 2],
}

impl NormalizationBounds {
    pub fn get(&self, m: Metric) -> MetricBounds {
        self.metrics[m.index()]
    }

    /// Scales a concatenated raw vector whose metric blocks are `k` long.
    pub fn scale_vector(&self, raw: &[f64], k: usize) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(j, v)| self.metrics[(j / k).min(1)].scale(*v))
            .collect()
    }
}

/// A cache placed in the unit hypercube: `k` scaled RTT values then `k`
/// scaled TTL values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub cache_id: String,
    pub values: Vec<f64>,
}

/// Min-max scales each metric jointly over all caches and all of its
/// percentile slots, returning the points and the bounds that were used.
pub fn normalize_snapshot(features: &[CacheFeatures]) -> Result<(Vec<FeatureVector>, NormalizationBounds)> {
    let first = features.first().ok_or(Error::EmptySamples)?;
    let k = first.raw[0].len();
    for f in features {
        for m in Metric::ALL {
            if f.metric(m).len() != k {
                return Err(Error::DimensionMismatch { expected: k, found: f.metric(m).len() });
            }
        }
    }
    let bounds = NormalizationBounds {
        metrics: Metric::ALL.map(|m| {
            let mut b = MetricBounds { min: f64::INFINITY, max: f64::NEG_INFINITY };
            for v in features.iter().flat_map(|f| f.metric(m)) {
                b.min = b.min.min(*v);
                b.max = b.max.max(*v);
            }
            b
        }),
    };
    let points = features
        .iter()
        .map(|f| FeatureVector { cache_id: f.cache_id.clone(), values: bounds.scale_vector(&f.concatenated(), k) })
        .collect();
    Ok((points, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowRecord;
    use proptest::prelude::*;

    fn cache(id: &str, rtt: &[f64], ttl: &[f64]) -> CacheFeatures {
        CacheFeatures { cache_id: id.into(), flow_count: 50, raw: [rtt.to_vec(), ttl.to_vec()] }
    }

    #[test]
    fn percentile_hand_cases() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0], 50.0).unwrap(), 2.0);
        assert_eq!(percentile(&[10.0, 20.0], 25.0).unwrap(), 12.5);
        assert_eq!(percentile(&[20.0, 10.0], 100.0).unwrap(), 20.0);
        assert_eq!(percentile(&[7.0], 35.0).unwrap(), 7.0);
        assert_eq!(percentile(&[], 50.0), Err(Error::EmptySamples));
    }

    #[test]
    fn percentile_list_validation() {
        for bad in [vec![], vec![0.0, 50.0], vec![50.0, 100.0], vec![50.0, 50.0], vec![60.0, 20.0]] {
            assert!(FeatureMode::Percentiles(bad).validate().is_err());
        }
        assert!(FeatureMode::default().validate().is_ok());
    }

    fn flows(ip: &str, n: usize, rtt: f64) -> Vec<FlowRecord> {
        (0..n)
            .map(|i| FlowRecord {
                start_time: i as f64,
                client_id: "c".into(),
                server_ip: ip.into(),
                hostname: String::new(),
                min_rtt: rtt,
                ttl: 54,
                bytes_up: 0,
                bytes_down: 0,
                avg_throughput: 0.0,
            })
            .collect()
    }

    #[test]
    fn min_flow_threshold_and_constant_samples() {
        let mut recs = flows("a", 49, 10.0);
        recs.extend(flows("b", 50, 10.0));
        let snap = Snapshot::from_records(0, 0.0, 1e9, &recs);
        let ex = extract_cache_features(&snap, DEFAULT_MIN_FLOW, &FeatureMode::default()).unwrap();
        assert_eq!(ex.dropped, 1);
        assert_eq!(ex.features.len(), 1);
        assert_eq!(ex.features[0].cache_id, "b");
        assert_eq!(ex.features[0].metric(Metric::Rtt), &[10.0; 5]);
        assert_eq!(ex.features[0].metric(Metric::Ttl), &[54.0; 5]);
    }

    #[test]
    fn no_active_caches_gives_empty_set() {
        let recs = flows("a", 3, 10.0);
        let snap = Snapshot::from_records(0, 0.0, 1e9, &recs);
        let ex = extract_cache_features(&snap, 50, &FeatureMode::default()).unwrap();
        assert!(ex.features.is_empty());
        assert!(normalize_snapshot(&ex.features).is_err());
    }

    #[test]
    fn mean_std_mode() {
        let mut recs = flows("a", 25, 10.0);
        recs.extend(flows("a", 25, 20.0));
        let snap = Snapshot::from_records(0, 0.0, 1e9, &recs);
        let ex = extract_cache_features(&snap, 50, &FeatureMode::MeanStd).unwrap();
        assert_eq!(ex.features[0].metric(Metric::Rtt), &[15.0, 5.0]);
    }

    #[test]
    fn affine_endpoints_and_midpoint() {
        let f = [cache("a", &[10.0, 60.0], &[50.0, 50.0]), cache("b", &[60.0, 110.0], &[52.0, 54.0])];
        let (pts, b) = normalize_snapshot(&f).unwrap();
        assert_eq!(b.get(Metric::Rtt), MetricBounds { min: 10.0, max: 110.0 });
        assert_eq!(pts[0].values[..2], [0.0, 0.5]);
        assert_eq!(pts[1].values[..2], [0.5, 1.0]);
        assert_eq!(pts[1].values[2..], [0.5, 1.0]);
    }

    #[test]
    fn degenerate_ttl_maps_to_zero() {
        let f = [cache("a", &[10.0, 20.0], &[54.0, 54.0]), cache("b", &[30.0, 40.0], &[54.0, 54.0])];
        let (pts, _) = normalize_snapshot(&f).unwrap();
        for p in &pts {
            assert_eq!(&p.values[2..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn identity_on_unit_bounds() {
        let f = [cache("a", &[0.0, 0.3], &[0.2, 1.0]), cache("b", &[0.7, 1.0], &[0.0, 0.5])];
        let (pts, b) = normalize_snapshot(&f).unwrap();
        assert_eq!(b.get(Metric::Rtt), MetricBounds { min: 0.0, max: 1.0 });
        assert_eq!(pts[0].values, f[0].concatenated());
        assert_eq!(pts[1].values, f[1].concatenated());
    }

    prop_compose! {
        fn cache_set()(n in 1usize..20, k in 1usize..6)
            (raw in prop::collection::vec((prop::collection::vec(0.0f64..500.0, k), prop::collection::vec(1.0f64..255.0, k)), n)) -> Vec<CacheFeatures> {
            raw.into_iter().enumerate().map(|(i, (mut r, mut t))| {
                r.sort_by(f64::total_cmp);
                t.sort_by(f64::total_cmp);
                CacheFeatures { cache_id: alloc::format!("c{i}"), flow_count: 50, raw: [r, t] }
            }).collect()
        }
    }

    proptest! {
        #[test]
        fn normalization_properties(f in cache_set()) {
            let k = f[0].raw[0].len();
            let (pts, b) = normalize_snapshot(&f).unwrap();
            for (p, c) in pts.iter().zip(&f) {
                prop_assert_eq!(p.values.len(), 2 * k);
                for (j, v) in p.values.iter().enumerate() {
                    prop_assert!((0.0..=1.0).contains(v));
                    let m = Metric::ALL[j / k];
                    let mb = b.get(m);
                    if mb.max > mb.min {
                        // The same bounds serve every slot of the metric.
                        let raw = c.raw[m.index()][j % k];
                        prop_assert!((mb.unscale(*v) - raw).abs() <= 1e-9 * raw.abs().max(1.0));
                    }
                }
            }
            // Order preservation within a metric slot.
            for j in 0..2 * k {
                for (pa, ca) in pts.iter().zip(&f) {
                    for (pb, cb) in pts.iter().zip(&f) {
                        let (ra, rb) = (ca.concatenated()[j], cb.concatenated()[j]);
                        if ra < rb { prop_assert!(pa.values[j] <= pb.values[j]); }
                    }
                }
            }
        }

        #[test]
        fn percentile_is_within_sample_range(v in prop::collection::vec(-1e6f64..1e6, 1..100), q in 0.0f64..=100.0) {
            let p = percentile(&v, q).unwrap();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= p && p <= hi);
        }
    }
}
