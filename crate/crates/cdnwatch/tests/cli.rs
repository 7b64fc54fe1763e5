use std::path::Path;
use std::process::{Command, Output};

fn cdnwatch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdnwatch"))
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn synth(dir: &Path, config: &str) -> std::path::PathBuf {
    let path = dir.join("trace.toml");
    std::fs::write(&path, config).unwrap();
    let out = cdnwatch(dir, &["synth", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("trace.tsv")
}

#[test]
fn all_subcommands_write_their_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let trace = synth(dir, "[trace]\ndays = 10\nseed = 2\nflows_per_day = 3000\n");
    let trace = trace.to_str().unwrap();
    let truth = dir.join("truth.tsv");

    assert!(cdnwatch(dir, &["timeline", trace, "--snapshots"]).status.success());
    assert!(cdnwatch(dir, &["drilldown", trace, "--entry", "2"]).status.success());
    assert!(cdnwatch(dir, &["sweep", trace, "--truth", truth.to_str().unwrap(), "--eps-steps", "4"]).status.success());
    assert!(cdnwatch(dir, &["calibrate", "--stars", "3", "--radii", "0,0.01", "--trials", "5"]).status.success());
    assert!(cdnwatch(dir, &["rank", trace]).status.success());

    let timeline = std::fs::read_to_string(dir.join("timeline.csv")).unwrap();
    // Ten days in seven-day windows stepped daily.
    assert_eq!(timeline.lines().count(), 1 + 4);
    assert!(timeline.lines().nth(1).unwrap().starts_with("0,"));
    assert!(dir.join("features_0000.csv").exists());
    assert!(dir.join("clusters_0003.csv").exists());
    let drill = std::fs::read_to_string(dir.join("drilldown_0002.csv")).unwrap();
    assert_eq!(drill.lines().count(), 1, "unflagged entry gives a header-only report");
    let sweep = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 5);
    let calibration = std::fs::read_to_string(dir.join("calibration.csv")).unwrap();
    assert!(calibration.lines().nth(1).unwrap().starts_with("3,3,0,0,5,1,0,"));
    let rank = std::fs::read_to_string(dir.join("rank.csv")).unwrap();
    assert_eq!(rank.lines().next().unwrap().split(',').count(), 1 + 10);
    assert_eq!(rank.lines().count(), 1 + 120);
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let trace = synth(dir, "[trace]\ndays = 9\nseed = 5\nflows_per_day = 3000\n\n[pipeline]\nstep_days = 2\n");
    let cfg = dir.join("trace.toml");
    let out = cdnwatch(dir, &["timeline", trace.to_str().unwrap(), "--step-days", "1", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let timeline = std::fs::read_to_string(dir.join("timeline.csv")).unwrap();
    assert_eq!(timeline.lines().count(), 1 + 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let missing = dir.join("missing.tsv");
    assert_eq!(cdnwatch(dir, &["timeline", missing.to_str().unwrap()]).status.code(), Some(1));

    let trace = synth(dir, "[trace]\ndays = 5\nseed = 1\nflows_per_day = 1000\n");
    let trace = trace.to_str().unwrap();
    let out = cdnwatch(dir, &["timeline", trace]);
    assert_eq!(out.status.code(), Some(1), "five days give a single snapshot");
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshot"));

    assert_eq!(cdnwatch(dir, &["timeline", trace, "--event-threshold", "80"]).status.code(), Some(2));
    assert_eq!(cdnwatch(dir, &["timeline", trace, "--tz-offset", "noon"]).status.code(), Some(2));
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "[[event]]\nkind = \"eclipse\"\ntarget = \"MXP\"\nstart_day = 1\n").unwrap();
    assert_eq!(cdnwatch(dir, &["synth", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn malformed_lines_skip_or_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let trace = synth(dir, "[trace]\ndays = 8\nseed = 3\nflows_per_day = 2000\n");
    let mut text = std::fs::read_to_string(&trace).unwrap();
    text.push_str("garbage line\n");
    std::fs::write(&trace, text).unwrap();
    let trace = trace.to_str().unwrap();
    assert!(cdnwatch(dir, &["timeline", trace]).status.success());
    assert_eq!(cdnwatch(dir, &["timeline", trace, "--on-error", "abort"]).status.code(), Some(1));
}
