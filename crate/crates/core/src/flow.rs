//! Flow records, cache hostnames and sliding-window snapshots.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::math::floor;
use crate::{Error, Result, DAY};

/// Metadata of one TCP flow served by a cache, as logged by a passive probe.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    /// Connection start, seconds since the epoch.
    pub start_time: f64,
    /// Anonymized client token.
    pub client_id: String,
    /// Cache identity. Compared as a plain string, so symbolic tokens work too.
    pub server_ip: String,
    pub hostname: String,
    /// Minimum RTT in milliseconds.
    pub min_rtt: f64,
    pub ttl: u8,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Average download throughput in kb/s.
    pub avg_throughput: f64,
}

impl FlowRecord {
    pub fn validate(&self) -> Result<()> {
        if self.server_ip.is_empty() {
            return Err(Error::InvalidRecord("empty server_ip".into()));
        }
        if !self.start_time.is_finite() {
            return Err(Error::InvalidRecord("start_time is not finite".into()));
        }
        if !(self.min_rtt.is_finite() && self.min_rtt >= 0.0) {
            return Err(Error::InvalidRecord("min_rtt must be a non-negative number".into()));
        }
        if !(self.avg_throughput.is_finite() && self.avg_throughput >= 0.0) {
            return Err(Error::InvalidRecord(
                "avg_throughput must be a non-negative number".into(),
            ));
        }
        Ok(())
    }
}

/// A decoded cache hostname.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheName {
    pub raw: String,
    /// Upper-cased airport code, present only for plain (non-obfuscated) names.
    pub iata: Option<String>,
    /// For plain names, what follows the airport code in the node label
    /// (`07t16` in `r7---fra07t16.c.youtube.com`); otherwise the raw name.
    pub machine_suffix: String,
}

/// Decodes a cache hostname of the form `r<digits>---<iata><digits...>.<domain>`.
///
/// Anything else, including the cipher-obfuscated `r7---sn-4g57kued...` form,
/// is kept as an opaque name.
pub fn parse_cache_hostname(hostname: &str) -> CacheName {
    let opaque = || CacheName {
        raw: hostname.to_string(),
        iata: None,
        machine_suffix: hostname.to_string(),
    };
    let Some(rest) = hostname.strip_prefix('r') else {
        return opaque();
    };
    let Some((replica, rest)) = rest.split_once("---") else {
        return opaque();
    };
    if replica.is_empty() || !replica.bytes().all(|b| b.is_ascii_digit()) {
        return opaque();
    }
    let Some((label, domain)) = rest.split_once('.') else {
        return opaque();
    };
    if domain.is_empty() || label.len() < 4 || !label.is_ascii() {
        return opaque();
    }
    let (code, suffix) = label.split_at(3);
    let plain = code.bytes().all(|b| b.is_ascii_alphabetic())
        && suffix.as_bytes()[0].is_ascii_digit()
        && suffix.bytes().all(|b| b.is_ascii_alphanumeric());
    if !plain {
        return opaque();
    }
    CacheName {
        raw: hostname.to_string(),
        iata: Some(code.to_ascii_uppercase()),
        machine_suffix: suffix.to_string(),
    }
}

/// All records of one `[window_start, window_end)` window, grouped by cache.
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    pub index: usize,
    pub window_start: f64,
    pub window_end: f64,
    pub caches: BTreeMap<&'a str, Vec<&'a FlowRecord>>,
}

impl<'a> Snapshot<'a> {
    /// Builds a snapshot from every record in the half-open window.
    pub fn from_records<I>(index: usize, window_start: f64, window_end: f64, records: I) -> Self
    where
        I: IntoIterator<Item = &'a FlowRecord>,
    {
        let mut caches: BTreeMap<&'a str, Vec<&'a FlowRecord>> = BTreeMap::new();
        for r in records {
            if window_start <= r.start_time && r.start_time < window_end {
                caches.entry(r.server_ip.as_str()).or_default().push(r);
            }
        }
        Snapshot { index, window_start, window_end, caches }
    }

    pub fn flow_count(&self) -> usize {
        self.caches.values().map(Vec::len).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = &'a FlowRecord> + '_ {
        self.caches.values().flat_map(|v| v.iter().copied())
    }
}

/// Window geometry for [`window_flows`]; all values in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub width: f64,
    pub step: f64,
    /// Fixed UTC offset used to locate midnight.
    pub utc_offset: i64,
}

impl WindowSpec {
    pub fn days(width_days: f64, step_days: f64) -> Self {
        WindowSpec { width: width_days * DAY, step: step_days * DAY, utc_offset: 0 }
    }
}

/// Local midnight at or before `t`.
pub fn midnight_floor(t: f64, utc_offset: i64) -> f64 {
    let off = utc_offset as f64;
    floor((t + off) / DAY) * DAY - off
}

/// Local midnight at or after `t`, strictly after when `t` is itself midnight,
/// so that the returned instant bounds the day containing `t`.
fn midnight_after(t: f64, utc_offset: i64) -> f64 {
    midnight_floor(t, utc_offset) + DAY
}

/// Slices records into sliding windows.
///
/// Coverage runs from the midnight before the earliest record to the midnight
/// after the latest one. Window `n` covers `[t0 + n*step, t0 + n*step + width)`
/// and only windows that fit inside the coverage are produced; when coverage
/// is shorter than one window a single window starting at `t0` is returned.
pub fn window_flows<'a>(records: &'a [FlowRecord], spec: WindowSpec) -> Result<Vec<Snapshot<'a>>> {
    if !(spec.width > 0.0 && spec.step > 0.0) {
        return Err(Error::InvalidParameter("window width and step must be positive".into()));
    }
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let mut order: Vec<&FlowRecord> = records.iter().collect();
    order.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    let first = order[0].start_time;
    let last = order[order.len() - 1].start_time;
    let t0 = midnight_floor(first, spec.utc_offset);
    let t_end = midnight_after(last, spec.utc_offset);

    let span = t_end - t0;
    let count = if span < spec.width {
        1
    } else {
        // Small epsilon guards against float error on exact multiples.
        floor((span - spec.width) / spec.step + 1e-9) as usize + 1
    };

    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let start = t0 + n as f64 * spec.step;
        let end = start + spec.width;
        let lo = order.partition_point(|r| r.start_time < start);
        let hi = order.partition_point(|r| r.start_time < end);
        out.push(Snapshot::from_records(n, start, end, order[lo..hi].iter().copied()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(t: f64, ip: &str) -> FlowRecord {
        FlowRecord {
            start_time: t,
            client_id: "C1".into(),
            server_ip: ip.into(),
            hostname: "r1---fra01t01.c.youtube.com".into(),
            min_rtt: 10.0,
            ttl: 54,
            bytes_up: 1,
            bytes_down: 2,
            avg_throughput: 3.0,
        }
    }

    #[test]
    fn plain_hostname_yields_iata() {
        let n = parse_cache_hostname("r7---fra07t16.c.youtube.com");
        assert_eq!(n.iata.as_deref(), Some("FRA"));
        assert_eq!(n.machine_suffix, "07t16");
    }

    #[test]
    fn obfuscated_and_degenerate_hostnames_are_opaque() {
        assert_eq!(parse_cache_hostname("r7---sn-4g57kued.c.youtube.com").iata, None);
        let empty = parse_cache_hostname("");
        assert_eq!(empty.iata, None);
        assert_eq!(empty.raw, "");
        for h in ["r---fra07t16.c.youtube.com", "rx---fra07.c", "r7---fra07t16", "r7---fr07.c.x", "r7---fraxx.c.x"] {
            assert_eq!(parse_cache_hostname(h).iata, None, "{h}");
        }
        assert_eq!(parse_cache_hostname("r12---MXP11t02.googlevideo.com").iata.as_deref(), Some("MXP"));
    }

    #[test]
    fn fourteen_days_daily_step_gives_eight_windows() {
        let recs: Vec<_> = (0..14).map(|d| rec(d as f64 * DAY + 3600.0, "a")).collect();
        let snaps = window_flows(&recs, WindowSpec::days(7.0, 1.0)).unwrap();
        assert_eq!(snaps.len(), 8);
        for s in &snaps {
            assert_eq!(s.window_end - s.window_start, 7.0 * DAY);
            assert_eq!(s.flow_count(), 7);
        }
    }

    #[test]
    fn weekly_step_tiles() {
        let recs: Vec<_> = (0..14).map(|d| rec(d as f64 * DAY + 10.0, "a")).collect();
        let snaps = window_flows(&recs, WindowSpec::days(7.0, 7.0)).unwrap();
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[0].window_end, snaps[1].window_start);
        assert_eq!(snaps[0].flow_count() + snaps[1].flow_count(), 14);
    }

    #[test]
    fn record_at_day_three_and_a_half_is_in_windows_zero_to_three() {
        let mut recs: Vec<_> = (0..14).map(|d| rec(d as f64 * DAY + 10.0, "bg")).collect();
        recs.push(rec(3.5 * DAY, "probe"));
        let snaps = window_flows(&recs, WindowSpec::days(7.0, 1.0)).unwrap();
        let hits: Vec<usize> =
            snaps.iter().filter(|s| s.caches.contains_key("probe")).map(|s| s.index).collect();
        assert_eq!(hits, vec![0, 1, 2, 3]);
    }

    #[test]
    fn window_end_is_exclusive() {
        let recs = vec![rec(0.0, "a"), rec(7.0 * DAY, "b"), rec(13.0 * DAY, "c")];
        let snaps = window_flows(&recs, WindowSpec::days(7.0, 7.0)).unwrap();
        assert!(!snaps[0].caches.contains_key("b"));
        assert!(snaps[1].caches.contains_key("b"));
    }

    #[test]
    fn utc_offset_moves_midnight() {
        // 23:00 UTC is already the next day at +02:00.
        let t = 23.0 * 3600.0;
        assert_eq!(midnight_floor(t, 0), 0.0);
        assert_eq!(midnight_floor(t, 7200), DAY - 7200.0);
    }

    #[test]
    fn empty_input_and_bad_spec() {
        assert!(window_flows(&[], WindowSpec::days(7.0, 1.0)).unwrap().is_empty());
        assert!(window_flows(&[rec(0.0, "a")], WindowSpec::days(0.0, 1.0)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn membership_and_overlap(times in proptest::collection::vec(0.0f64..30.0, 1..200), k in 1usize..5) {
            let mut recs: Vec<_> = times.iter().map(|t| rec(t * DAY, "x")).collect();
            // Pin coverage to [0, 30) days.
            recs.push(rec(0.0, "edge"));
            recs.push(rec(29.9 * DAY, "edge"));
            let spec = WindowSpec::days(k as f64, 1.0);
            let snaps = window_flows(&recs, spec).unwrap();
            for s in &snaps {
                for r in s.records() {
                    proptest::prop_assert!(s.window_start <= r.start_time && r.start_time < s.window_end);
                }
            }
            let last_start = snaps.last().unwrap().window_start;
            for r in &recs {
                // Records at least one window away from both coverage edges.
                if r.start_time >= spec.width && r.start_time < last_start {
                    let hits = snaps.iter().filter(|s| s.window_start <= r.start_time && r.start_time < s.window_end).count();
                    proptest::prop_assert_eq!(hits, k);
                }
            }
        }
    }
}
