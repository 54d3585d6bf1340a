//! Metrics tables and files. Every file names the scenario digest, seed,
//! policy and tool version, and is written through a temporary file and a
//! rename so readers never see half of one.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use appease_core::sim::{Metrics, Scenario, Summary};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COLUMNS: [&str; 9] = [
    "scenario_id",
    "policy",
    "hogs",
    "requests_settled",
    "mean_latency_us",
    "p99_latency_us",
    "mean_realized_U",
    "deadline_misses",
    "achieved_rate_per_s",
];

/// sha256 of the scenario's canonical JSON.
pub fn digest(sc: &Scenario) -> String {
    let json = serde_json::to_string(sc).expect("scenario serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub scenario_id: String,
    pub policy: String,
    pub hogs: u32,
    pub summary: Summary,
}

impl Row {
    pub fn new(id: &str, sc: &Scenario, metrics: &Metrics) -> Row {
        Row {
            scenario_id: id.to_string(),
            policy: sc.policy.kind().to_string(),
            hogs: sc.hog_count(),
            summary: metrics.summary(&sc.stream_periods()),
        }
    }

    fn values(&self) -> [f64; 6] {
        let s = &self.summary;
        [
            s.requests_settled as f64,
            s.mean_latency_us,
            s.p99_latency_us,
            s.mean_realized_u,
            s.deadline_misses as f64,
            s.achieved_rate_per_s,
        ]
    }
}

fn num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.3}")
    }
}

/// Comment lines naming where the numbers came from.
pub fn header(digest: &str, seed: Option<u64>, policy: &str) -> String {
    let seed = seed.map_or("varies".to_string(), |s| s.to_string());
    format!("# scenario_digest: {digest}\n# seed: {seed}\n# policy: {policy}\n# tool: appease {VERSION}\n")
}

pub fn csv(header: &str, rows: &[Row]) -> String {
    let mut out = header.to_string();
    out.push_str(&COLUMNS.join(","));
    out.push('\n');
    for r in rows {
        let v = r.values();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.scenario_id,
            r.policy,
            r.hogs,
            v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
        );
    }
    out
}

/// Repetitions of one configuration: mean, then min and max, per metric.
pub fn reps_csv(header: &str, reps: &[Row]) -> String {
    let mut out = header.to_string();
    let mut cols: Vec<String> = COLUMNS[..3].iter().map(|c| c.to_string()).collect();
    cols.push("reps".into());
    for c in &COLUMNS[3..] {
        cols.extend([c.to_string(), format!("{c}_min"), format!("{c}_max")]);
    }
    out.push_str(&cols.join(","));
    out.push('\n');
    let Some(first) = reps.first() else {
        return out;
    };
    let _ = write!(out, "{},{},{},{}", first.scenario_id, first.policy, first.hogs, reps.len());
    for i in 0..6 {
        let xs: Vec<f64> = reps.iter().map(|r| r.values()[i]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = write!(out, ",{},{},{}", num(mean), num(lo), num(hi));
    }
    out.push('\n');
    out
}

#[derive(Serialize)]
pub struct MetricsFile<'a> {
    pub scenario_id: &'a str,
    pub scenario_digest: &'a str,
    pub seed: u64,
    pub policy: &'a str,
    pub tool: String,
    pub summary: &'a Summary,
    pub metrics: &'a Metrics,
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes `contents` to `dir/name` via a sibling temporary file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}
