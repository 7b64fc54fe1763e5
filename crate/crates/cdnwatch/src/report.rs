//! CSV reports. Every writer emits a header row; floats use Rust's shortest
//! round-trip formatting so that identical inputs give identical bytes.

use std::io::Write;

use cdnwatch_core::clustering::Clustering;
use cdnwatch_core::constellation::CdReport;
use cdnwatch_core::evaluation::{CalibrationConfig, CalibrationResult, SweepRow};
use cdnwatch_core::features::{CacheFeatures, FeatureMode, Metric, NormalizationBounds};
use cdnwatch_core::synth::RankMatrix;
use cdnwatch_core::timeline::{DrilldownReport, GroupStats, TimelineEntry, DECILES};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `cache_id,metric,percentile,raw_value,normalized_value`. The percentile
/// column holds `mean`/`std` in mean/std mode.
pub fn write_features<W: Write>(
    w: W,
    features: &[CacheFeatures],
    bounds: &NormalizationBounds,
    mode: &FeatureMode,
) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record(["cache_id", "metric", "percentile", "raw_value", "normalized_value"])?;
    let slots: Vec<String> = match mode {
        FeatureMode::Percentiles(p) => p.iter().map(f64::to_string).collect(),
        FeatureMode::MeanStd => vec!["mean".into(), "std".into()],
    };
    for f in features {
        for m in Metric::ALL {
            for (slot, raw) in slots.iter().zip(f.metric(m)) {
                out.write_record([
                    f.cache_id.as_str(),
                    m.name(),
                    slot,
                    &raw.to_string(),
                    &bounds.get(m).scale(*raw).to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `cache_id,cluster_id,role`; noise rows carry cluster id -1 and role `noise`.
pub fn write_clustering<W: Write>(w: W, clustering: &Clustering) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record(["cache_id", "cluster_id", "role"])?;
    for (cache, cluster, role) in clustering.assignments() {
        let id = cluster.map_or_else(|| "-1".to_string(), |c| c.to_string());
        out.write_record([cache, &id, role.map_or("noise", |r| r.as_str())])?;
    }
    out.flush()?;
    Ok(())
}

pub const CD_HEADER: [&str; 7] =
    ["snapshot_n", "snapshot_n1", "cd", "side", "star_id", "nearest_star_id", "astral_distance"];

/// Appends the coupling rows of one comparison to a CD report writer.
pub fn write_cd_rows<W: Write>(out: &mut csv::Writer<W>, n: usize, n1: usize, report: &CdReport) -> crate::Result<()> {
    let sides = [("a", &report.couplings_ab), ("b", &report.couplings_ba)];
    for (side, couplings) in sides {
        for c in couplings {
            out.write_record([
                n.to_string(),
                n1.to_string(),
                report.cd.to_string(),
                side.to_string(),
                c.star.to_string(),
                opt(c.nearest),
                c.distance.to_string(),
            ])?;
        }
    }
    Ok(())
}

/// `snapshot_n,snapshot_n1,cd,side,star_id,nearest_star_id,astral_distance`.
pub fn write_cd_report<W: Write>(w: W, n: usize, n1: usize, report: &CdReport) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record(CD_HEADER)?;
    write_cd_rows(&mut out, n, n1, report)?;
    out.flush()?;
    Ok(())
}

/// CD reports of every consecutive pair of a timeline.
pub fn write_timeline_cd<W: Write>(w: W, entries: &[TimelineEntry]) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record(CD_HEADER)?;
    for (prev, e) in entries.iter().zip(entries.iter().skip(1)) {
        if let Some(c) = &e.comparison {
            write_cd_rows(&mut out, prev.index, e.index, &c.report)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per snapshot. `top_contributors` lists `side:star:label:distance`
/// items separated by `;`.
pub fn write_timeline<W: Write>(w: W, entries: &[TimelineEntry]) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record([
        "snapshot",
        "window_start",
        "window_end",
        "cd",
        "noise_count",
        "cache_count",
        "cluster_count",
        "flag",
        "top_contributors",
    ])?;
    for e in entries {
        let top = e
            .top
            .iter()
            .map(|s| format!("{}:{}:{}:{}", s.side.as_str(), s.star, s.label.as_deref().unwrap_or(""), s.distance))
            .collect::<Vec<_>>()
            .join(";");
        out.write_record([
            e.index.to_string(),
            e.window_start.to_string(),
            e.window_end.to_string(),
            opt(e.cd),
            e.noise_count.to_string(),
            e.cache_count.to_string(),
            e.cluster_count.to_string(),
            e.flag.as_str().to_string(),
            top,
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Long format: one row per statistic of each star and phase.
pub fn write_drilldown<W: Write>(w: W, report: &DrilldownReport, rtt_quantiles: &[f64]) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record([
        "entry",
        "rank",
        "side",
        "star_id",
        "label",
        "astral_distance",
        "member_count",
        "phase",
        "window_start",
        "window_end",
        "flows",
        "statistic",
        "quantile",
        "value",
    ])?;
    for (rank, s) in report.stars.iter().enumerate() {
        for (phase, stats) in [("before", &s.before), ("after", &s.after)] {
            let rows = stat_rows(stats, rtt_quantiles);
            for (stat, q, value) in rows {
                out.write_record([
                    report.entry.to_string(),
                    (rank + 1).to_string(),
                    s.side.as_str().to_string(),
                    s.star.to_string(),
                    s.label.clone().unwrap_or_default(),
                    s.distance.to_string(),
                    s.members.len().to_string(),
                    phase.to_string(),
                    stats.window_start.to_string(),
                    stats.window_end.to_string(),
                    stats.flows.to_string(),
                    stat.to_string(),
                    q.to_string(),
                    value.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn stat_rows(stats: &GroupStats, rtt_quantiles: &[f64]) -> Vec<(&'static str, f64, f64)> {
    let mut rows = Vec::new();
    if let Some(d) = &stats.throughput_deciles {
        rows.extend(DECILES.iter().zip(d).map(|(q, v)| ("throughput_kbps", *q, *v)));
    }
    if let Some(r) = &stats.rtt_percentiles {
        rows.extend(rtt_quantiles.iter().zip(r).map(|(q, v)| ("min_rtt_ms", *q, *v)));
    }
    rows
}

/// `epsilon,tpr,fragmentation,pureness,noise_count,n_clusters,n_labels,n_gt,n_tp,n_fp,n_points`.
pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record([
        "epsilon",
        "tpr",
        "fragmentation",
        "pureness",
        "noise_count",
        "n_clusters",
        "n_labels",
        "n_gt",
        "n_tp",
        "n_fp",
        "n_points",
    ])?;
    for r in rows {
        let q = &r.indices;
        out.write_record([
            r.epsilon.to_string(),
            q.tpr.to_string(),
            opt(q.fragmentation),
            q.pureness.to_string(),
            q.noise_count.to_string(),
            q.n_clusters.to_string(),
            q.n_labels.to_string(),
            q.n_gt.to_string(),
            q.n_tp.to_string(),
            q.n_fp.to_string(),
            q.n_points.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `stars,dimension,radius,extra_stars,trials,seed,mean_cd,mean_displacement`.
pub fn write_calibration<W: Write>(w: W, rows: &[(CalibrationConfig, CalibrationResult)]) -> crate::Result<()> {
    let mut out = writer(w);
    out.write_record(["stars", "dimension", "radius", "extra_stars", "trials", "seed", "mean_cd", "mean_displacement"])?;
    for (c, r) in rows {
        out.write_record([
            c.stars.to_string(),
            c.dimension().to_string(),
            c.radius.to_string(),
            c.extra_stars.to_string(),
            c.trials.to_string(),
            c.seed.to_string(),
            r.mean_cd.to_string(),
            r.mean_displacement.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Wide format: `cache_id` then one rank column per period (empty when the
/// cache served nothing); period start times label the columns.
pub fn write_rank_matrix<W: Write>(w: W, m: &RankMatrix) -> crate::Result<()> {
    let mut out = writer(w);
    let mut header = vec!["cache_id".to_string()];
    header.extend(m.periods.iter().map(|p| p.to_string()));
    out.write_record(&header)?;
    for (cache, ranks) in m.caches.iter().zip(&m.ranks) {
        let mut row = vec![cache.clone()];
        row.extend(ranks.iter().map(|r| opt(*r)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
