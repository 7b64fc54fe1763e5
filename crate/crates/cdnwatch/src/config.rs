//! TOML configuration.
//!
//! One file may carry a `[pipeline]` table, used by the analysis commands, and
//! a `[trace]` table with `[[node]]` and `[[event]]` arrays, used by `synth`.
//! Every key is optional; see the README for the full list.

use std::path::Path;

use cdnwatch_core::clustering::ClusterParams;
use cdnwatch_core::features::FeatureMode;
use cdnwatch_core::synth::{EdgeNodeSpec, EventKind, EventSpec, SynthConfig};
use cdnwatch_core::timeline::PipelineConfig;
use cdnwatch_core::DAY;
use serde::Deserialize;

use crate::Error;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub pipeline: PipelineSection,
    pub trace: Option<TraceSection>,
    #[serde(default, rename = "node")]
    pub nodes: Vec<NodeSection>,
    #[serde(default, rename = "event")]
    pub events: Vec<EventSection>,
}

/// Pipeline settings; present keys override command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub delta_t_days: Option<f64>,
    pub step_days: Option<f64>,
    pub min_flow: Option<usize>,
    pub percentiles: Option<Vec<f64>>,
    /// Use per-metric mean and standard deviation instead of percentiles.
    pub mean_std: Option<bool>,
    pub epsilon: Option<f64>,
    pub min_pts: Option<usize>,
    pub event_threshold: Option<f64>,
    pub major_threshold: Option<f64>,
    pub tz_offset: Option<String>,
    pub top_contributors: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    pub days: Option<u32>,
    pub flows_per_day: Option<usize>,
    pub rank_churn: Option<f64>,
    pub seed: Option<u64>,
    pub epoch: Option<f64>,
    pub clients: Option<usize>,
    pub throughput_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSection {
    pub label: String,
    pub caches: usize,
    pub rtt_median: f64,
    pub rtt_spread: f64,
    pub ttl: u8,
    pub load_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    /// `node_birth`, `node_death`, `path_shift` or `congestion`.
    pub kind: String,
    pub target: String,
    pub start_day: u32,
    /// Defaults to the last day of the trace.
    pub end_day: Option<u32>,
    pub rtt_increase: Option<f64>,
    pub throughput_factor: Option<f64>,
    pub spread_factor: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> crate::Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Trace settings on top of the six-node preset. `[[node]]` entries, when
    /// present, replace the preset nodes.
    pub fn synth_config(&self, defaults: SynthConfig) -> crate::Result<SynthConfig> {
        let mut c = defaults;
        if let Some(t) = &self.trace {
            set(&mut c.days, t.days);
            set(&mut c.flows_per_day, t.flows_per_day);
            set(&mut c.rank_churn, t.rank_churn);
            set(&mut c.seed, t.seed);
            set(&mut c.epoch, t.epoch);
            set(&mut c.clients, t.clients);
            set(&mut c.throughput_median, t.throughput_median);
        }
        if !self.nodes.is_empty() {
            c.nodes = self
                .nodes
                .iter()
                .map(|n| EdgeNodeSpec::new(&n.label, n.caches, n.rtt_median, n.rtt_spread, n.ttl, n.load_weight))
                .collect();
        }
        let last = c.days.saturating_sub(1);
        for e in &self.events {
            c.events.push(EventSpec::new(event_kind(e)?, &e.target, e.start_day, e.end_day.unwrap_or(last)));
        }
        c.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn event_kind(e: &EventSection) -> crate::Result<EventKind> {
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| Error::Config(format!("{} event on {} needs `{name}`", e.kind, e.target)))
    };
    Ok(match e.kind.as_str() {
        "node_birth" => EventKind::NodeBirth,
        "node_death" => EventKind::NodeDeath,
        "path_shift" => EventKind::PathShift { rtt_increase: need("rtt_increase", e.rtt_increase)? },
        "congestion" => EventKind::Congestion {
            throughput_factor: need("throughput_factor", e.throughput_factor)?,
            spread_factor: e.spread_factor.unwrap_or(1.0),
        },
        other => return Err(Error::Config(format!("unknown event kind {other:?}"))),
    })
}

impl PipelineSection {
    /// Applies the present keys to `config`.
    pub fn apply(&self, config: &mut PipelineConfig) -> crate::Result<()> {
        if let Some(d) = self.delta_t_days {
            config.window.width = d * DAY;
        }
        if let Some(d) = self.step_days {
            config.window.step = d * DAY;
        }
        if let Some(tz) = &self.tz_offset {
            config.window.utc_offset = parse_tz_offset(tz)?;
        }
        set(&mut config.min_flow, self.min_flow);
        if let Some(p) = &self.percentiles {
            config.mode = FeatureMode::Percentiles(p.clone());
        }
        if self.mean_std == Some(true) {
            config.mode = FeatureMode::MeanStd;
        }
        let eps = self.epsilon.unwrap_or(config.cluster.epsilon);
        let min_pts = self.min_pts.unwrap_or(config.cluster.min_pts);
        config.cluster = ClusterParams { epsilon: eps, min_pts };
        set(&mut config.event_threshold, self.event_threshold);
        set(&mut config.major_threshold, self.major_threshold);
        set(&mut config.top_contributors, self.top_contributors);
        Ok(())
    }
}

/// Parses `Z`, `+HH:MM`, `-HH:MM` or `+HH` into seconds east of UTC.
pub fn parse_tz_offset(text: &str) -> crate::Result<i64> {
    let bad = || Error::Config(format!("invalid timezone offset {text:?}; expected +HH:MM"));
    let t = text.trim();
    if t == "Z" || t == "z" {
        return Ok(0);
    }
    let (sign, rest) = match t.as_bytes().first() {
        Some(b'+') => (1, &t[1..]),
        Some(b'-') => (-1, &t[1..]),
        _ => return Err(bad()),
    };
    let (h, m) = rest.split_once(':').unwrap_or((rest, "0"));
    let h: i64 = h.parse().map_err(|_| bad())?;
    let m: i64 = m.parse().map_err(|_| bad())?;
    if !(0..=14).contains(&h) || !(0..60).contains(&m) {
        return Err(bad());
    }
    Ok(sign * (h * 3600 + m * 60))
}
