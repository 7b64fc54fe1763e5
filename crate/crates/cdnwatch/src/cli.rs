//! Command-line interface.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cdnwatch_core::clustering::{ClusterParams, DEFAULT_EPSILON, DEFAULT_MIN_PTS};
use cdnwatch_core::evaluation::{cd_calibration, epsilon_sweep, CalibrationConfig, SweepConfig};
use cdnwatch_core::features::{FeatureMode, DEFAULT_MIN_FLOW, DEFAULT_PERCENTILES};
use cdnwatch_core::flow::{window_flows, FlowRecord, WindowSpec};
use cdnwatch_core::synth::{generate_trace, rank_matrix, SynthConfig};
use cdnwatch_core::timeline::{
    drilldown, run_timeline, PipelineConfig, DEFAULT_EVENT_THRESHOLD, DEFAULT_MAJOR_THRESHOLD,
};

use crate::config::{parse_tz_offset, ConfigFile};
use crate::flowlog::{self, OnError};
use crate::{report, truth, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "cdnwatch", version, about = "Detect changes in a CDN's edge-node footprint from flow logs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Pipeline settings shared by all subcommands. Keys in `--config` win.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file whose settings override these flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Snapshot width in days.
    #[arg(long, global = true, default_value_t = 7.0)]
    pub delta_t_days: f64,
    /// Distance between consecutive snapshot starts in days.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub step_days: f64,
    /// Minimum flows for a cache to be clustered.
    #[arg(long, global = true, default_value_t = DEFAULT_MIN_FLOW)]
    pub min_flow: usize,
    /// Comma-separated feature percentiles.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = DEFAULT_PERCENTILES)]
    pub percentiles: Vec<f64>,
    /// Use mean and standard deviation features instead of percentiles.
    #[arg(long, global = true)]
    pub mean_std: bool,
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_MIN_PTS)]
    pub min_pts: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_EVENT_THRESHOLD)]
    pub event_threshold: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_MAJOR_THRESHOLD)]
    pub major_threshold: f64,
    /// Offset from UTC used to place midnight, e.g. +01:00.
    #[arg(long, global = true, default_value = "+00:00", allow_hyphen_values = true)]
    pub tz_offset: String,
    /// Stars listed per timeline entry.
    #[arg(long, global = true, default_value_t = 3)]
    pub top: usize,
    /// Malformed flow-log lines are skipped with a warning or abort the run.
    #[arg(long, global = true, value_enum, default_value_t = OnErrorArg::Skip)]
    pub on_error: OnErrorArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnErrorArg {
    Skip,
    Abort,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trace and its ground truth.
    Synth {
        /// Days to simulate when the config has no `[trace]` days.
        #[arg(long, default_value_t = 30)]
        days: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "trace.tsv")]
        trace: String,
        #[arg(long, default_value = "truth.tsv")]
        truth: String,
    },
    /// Compute the CD timeline of a trace.
    Timeline {
        #[arg(required = true)]
        input: Vec<PathBuf>,
        /// Also write per-snapshot feature and cluster files.
        #[arg(long)]
        snapshots: bool,
    },
    /// Detail the top stars of one timeline entry.
    Drilldown {
        #[arg(required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        entry: usize,
    },
    /// Score clusterings of one snapshot over a range of epsilon values.
    Sweep {
        #[arg(required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// Snapshot index to cluster.
        #[arg(long, default_value_t = 0)]
        snapshot: usize,
        #[arg(long, default_value_t = 0.005)]
        eps_from: f64,
        #[arg(long, default_value_t = 0.2)]
        eps_to: f64,
        #[arg(long, default_value_t = 39)]
        eps_steps: usize,
    },
    /// Mean CD of randomly displaced constellations.
    Calibrate {
        /// Comma-separated star counts.
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10])]
        stars: Vec<usize>,
        /// Comma-separated displacement radii.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.01, 0.02, 0.05, 0.1])]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Comma-separated counts of stars added to the displaced copy.
        #[arg(long, value_delimiter = ',', default_values_t = [0usize])]
        extra_stars: Vec<usize>,
        /// Space dimension; defaults to the star count.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Daily flow-count ranks of every cache.
    Rank {
        #[arg(required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        period_days: f64,
    },
}

impl GlobalArgs {
    fn flag_config(&self) -> Result<PipelineConfig> {
        let mode = if self.mean_std { FeatureMode::MeanStd } else { FeatureMode::Percentiles(self.percentiles.clone()) };
        Ok(PipelineConfig {
            window: WindowSpec {
                utc_offset: parse_tz_offset(&self.tz_offset)?,
                ..WindowSpec::days(self.delta_t_days, self.step_days)
            },
            min_flow: self.min_flow,
            mode,
            cluster: ClusterParams { epsilon: self.epsilon, min_pts: self.min_pts },
            event_threshold: self.event_threshold,
            major_threshold: self.major_threshold,
            top_contributors: self.top,
        })
    }

    fn config_file(&self) -> Result<ConfigFile> {
        self.config.as_deref().map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
    }

    /// Flags, then the config file's `[pipeline]` keys, validated.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut config = self.flag_config()?;
        self.config_file()?.pipeline.apply(&mut config)?;
        config.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    fn on_error(&self) -> OnError {
        match self.on_error {
            OnErrorArg::Skip => OnError::Skip,
            OnErrorArg::Abort => OnError::Abort,
        }
    }
}

/// Reads and concatenates flow logs, ordered by start time.
pub fn read_traces(paths: &[PathBuf], on_error: OnError) -> Result<Vec<FlowRecord>> {
    let mut records = Vec::new();
    for path in paths {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let log = flowlog::parse_flow_log(BufReader::new(file), on_error)?;
        if !log.skipped.is_empty() {
            log::warn!("{}: skipped {} malformed lines", path.display(), log.skipped.len());
        }
        records.extend(log.records);
    }
    records.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    Ok(records)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    log::info!("writing {}", path.display());
    Ok(BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?))
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let out = g.out_dir.as_path();
    match &cli.command {
        Command::Synth { days, seed, trace, truth: truth_name } => {
            let config = g.config_file()?.synth_config(SynthConfig::six_nodes(*days, *seed))?;
            let (records, gt) = generate_trace(&config)?;
            flowlog::write_flow_log(create(out, trace)?, &records)?;
            truth::write_ground_truth(create(out, truth_name)?, &gt)?;
            log::info!("{} flows from {} caches over {} days", records.len(), gt.labels.len(), config.days);
        }
        Command::Timeline { input, snapshots } => {
            let config = g.pipeline()?;
            let records = read_traces(input, g.on_error())?;
            let timeline = run_timeline(&records, &config)?;
            report::write_timeline(create(out, "timeline.csv")?, &timeline.entries)?;
            report::write_timeline_cd(create(out, "cd.csv")?, &timeline.entries)?;
            if *snapshots {
                for s in &timeline.snapshots {
                    if let Some(bounds) = &s.bounds {
                        let name = format!("features_{:04}.csv", s.index);
                        report::write_features(create(out, &name)?, &s.features, bounds, &config.mode)?;
                    }
                    report::write_clustering(create(out, &format!("clusters_{:04}.csv", s.index))?, &s.clustering)?;
                }
            }
            for e in timeline.entries.iter().filter(|e| e.flag != cdnwatch_core::timeline::Flag::None) {
                log::info!("snapshot {}: cd {:.3} ({})", e.index, e.cd.unwrap_or(0.0), e.flag.as_str());
            }
        }
        Command::Drilldown { input, entry } => {
            let config = g.pipeline()?;
            let records = read_traces(input, g.on_error())?;
            let timeline = run_timeline(&records, &config)?;
            let rep = drilldown(&timeline, *entry, &records, &config)?;
            if rep.stars.is_empty() {
                log::warn!("entry {entry} is not flagged; the report is empty");
            }
            let quantiles = match &config.mode {
                FeatureMode::Percentiles(p) => p.clone(),
                FeatureMode::MeanStd => DEFAULT_PERCENTILES.to_vec(),
            };
            report::write_drilldown(create(out, &format!("drilldown_{entry:04}.csv"))?, &rep, &quantiles)?;
        }
        Command::Sweep { input, truth: truth_path, snapshot, eps_from, eps_to, eps_steps } => {
            let config = g.pipeline()?;
            let records = read_traces(input, g.on_error())?;
            let file = File::open(truth_path).map_err(|e| Error::io(truth_path, e))?;
            let gt = truth::read_ground_truth(BufReader::new(file))?;
            let snaps = window_flows(&records, config.window)?;
            let snap = snaps
                .get(*snapshot)
                .ok_or_else(|| Error::Config(format!("snapshot {snapshot} out of range ({} snapshots)", snaps.len())))?;
            let sweep = SweepConfig {
                epsilons: SweepConfig::grid(*eps_from, *eps_to, *eps_steps),
                min_pts: config.cluster.min_pts,
                min_flow: config.min_flow,
                mode: config.mode.clone(),
            };
            let rows = epsilon_sweep(snap, &gt, &sweep)?;
            report::write_sweep(create(out, "sweep.csv")?, &rows)?;
        }
        Command::Calibrate { stars, radii, trials, extra_stars, dim, seed } => {
            let mut rows = Vec::new();
            for &n in stars {
                for &extra in extra_stars {
                    for &e in radii {
                        let c = CalibrationConfig { dim: *dim, ..CalibrationConfig::new(n, e, *trials, extra, *seed) };
                        rows.push((c, cd_calibration(&c)?));
                    }
                }
            }
            report::write_calibration(create(out, "calibration.csv")?, &rows)?;
        }
        Command::Rank { input, period_days } => {
            let config = g.pipeline()?;
            let records = read_traces(input, g.on_error())?;
            let m = rank_matrix(&records, *period_days, config.window.utc_offset)?;
            report::write_rank_matrix(create(out, "rank.csv")?, &m)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults_match_the_core() {
        let cli = Cli::parse_from(["cdnwatch", "rank", "x.tsv"]);
        assert_eq!(cli.global.pipeline().unwrap(), PipelineConfig::default());
    }

    #[test]
    fn flags_and_bad_values() {
        let cli = Cli::parse_from(["cdnwatch", "timeline", "x.tsv", "--epsilon", "0.03", "--tz-offset", "-05:00"]);
        let c = cli.global.pipeline().unwrap();
        assert_eq!(c.cluster.epsilon, 0.03);
        assert_eq!(c.window.utc_offset, -18000);
        let cli = Cli::parse_from(["cdnwatch", "timeline", "x.tsv", "--event-threshold", "60"]);
        let err = cli.global.pipeline().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
