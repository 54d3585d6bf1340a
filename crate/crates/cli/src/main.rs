mod output;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use appease_core::acceptance::{self, Outcome};
use appease_core::presets;
use appease_core::sched::PolicyKind;
use appease_core::sim::{run, RunOutput, Scenario, SimError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{write_atomic, MetricsFile, Row};

#[derive(Parser)]
#[command(name = "appease", version, about = "Single-CPU scheduling simulator for request unhappiness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file without running it.
    Validate { file: PathBuf },
    /// Run a scenario and write its metrics.
    Run {
        file: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        /// Output kinds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "csv,json")]
        format: Vec<Format>,
    },
    /// Run a scenario at each hog count, one table for all of them.
    Sweep {
        file: PathBuf,
        /// Inclusive range `lo..hi` or a comma list.
        #[arg(long, default_value = "0..12")]
        hogs: HogCounts,
        /// Policies to compare; the scenario's own when absent.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the built-in acceptance checks.
    Accept {
        /// Check ids; all when absent.
        ids: Vec<u8>,
        /// Print per-scenario rows.
        #[arg(short, long)]
        verbose: bool,
        /// Also write the full report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, env = "APPEASE_OUT", default_value = "out")]
    out: PathBuf,
    /// Replaces the scenario's seed; repetition k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
    /// Simulations run at once.
    #[arg(short = 'j', long, default_value_t = default_jobs(), value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum Format {
    Csv,
    Json,
    Trace,
}

#[derive(Clone, Debug)]
struct HogCounts(Vec<u32>);

impl FromStr for HogCounts {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |_| format!("bad hog count in {s:?}");
        if let Some((lo, hi)) = s.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let (lo, hi): (u32, u32) = (lo.trim().parse().map_err(bad)?, hi.trim().parse().map_err(bad)?);
            if lo > hi {
                return Err(format!("empty range {s:?}"));
            }
            return Ok(HogCounts((lo..=hi).collect()));
        }
        let set: BTreeSet<u32> = s.split(',').map(|p| p.trim().parse().map_err(bad)).collect::<Result<_, _>>()?;
        Ok(HogCounts(set.into_iter().collect()))
    }
}

fn default_jobs() -> u32 {
    std::thread::available_parallelism().map_or(1, |n| n.get() as u32)
}

enum Failure {
    Validation(String),
    Acceptance,
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Acceptance => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Run { file, out, format } => run_file(&file, &out, &format),
        Command::Sweep { file, hogs, policies, out } => sweep(&file, &hogs.0, &policies, &out),
        Command::Accept { ids, verbose, out } => accept(&ids, verbose, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(msg) => eprintln!("{msg}"),
                Failure::Io(e) => eprintln!("error: {e:#}"),
                Failure::Acceptance => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn load(file: &Path) -> Result<(String, Scenario), Failure> {
    let text = fs::read_to_string(file)
        .with_context(|| format!("reading {}", file.display()))
        .map_err(Failure::Io)?;
    let sc = Scenario::from_json_str(&text).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}: {d}", file.display())).collect();
        Failure::Validation(lines.join("\n"))
    })?;
    let stem = file.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    let id = sc.name.clone().unwrap_or(stem);
    let id: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    Ok((id, sc))
}

fn validate(file: &Path) -> Result<(), Failure> {
    load(file)?;
    println!("{}: ok", file.display());
    Ok(())
}

/// Runs scenarios on up to `jobs` threads, results in input order.
fn run_parallel(scenarios: &[Scenario], jobs: u32) -> Vec<Result<RunOutput, SimError>> {
    let chunk = scenarios.len().div_ceil(jobs as usize).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

fn seeded(sc: &Scenario, base: Option<u64>, rep: u32) -> Scenario {
    let mut out = sc.clone();
    out.seed = base.unwrap_or(sc.seed).wrapping_add(u64::from(rep));
    out
}

fn run_file(file: &Path, args: &OutArgs, formats: &[Format]) -> Result<(), Failure> {
    let (id, sc) = load(file)?;
    let formats: BTreeSet<Format> = formats.iter().copied().collect();
    let scenarios: Vec<Scenario> = (0..args.reps).map(|k| seeded(&sc, args.seed, k)).collect();
    let outputs = run_parallel(&scenarios, args.jobs);
    let policy = sc.policy.kind().to_string();
    let mut rows = Vec::new();
    for (k, (sc, out)) in scenarios.iter().zip(outputs).enumerate() {
        let out = out?;
        let digest = output::digest(sc);
        let row = Row::new(&id, sc, &out.metrics);
        let stem = if args.reps == 1 { id.clone() } else { format!("{id}-r{k}") };
        if formats.contains(&Format::Csv) {
            let text = output::csv(&output::header(&digest, Some(sc.seed), &policy), std::slice::from_ref(&row));
            report(write_atomic(&args.out, &format!("{stem}.csv"), &text)?);
        }
        if formats.contains(&Format::Json) {
            let file = MetricsFile {
                scenario_id: &id,
                scenario_digest: &digest,
                seed: sc.seed,
                policy: &policy,
                tool: format!("appease {}", output::VERSION),
                summary: &row.summary,
                metrics: &out.metrics,
            };
            report(write_atomic(&args.out, &format!("{stem}.json"), &output::json(&file))?);
        }
        if formats.contains(&Format::Trace) {
            let mut text = output::header(&digest, Some(sc.seed), &policy);
            text.push_str(&out.trace.to_text());
            report(write_atomic(&args.out, &format!("{stem}.trace"), &text)?);
        }
        rows.push(row);
    }
    if args.reps > 1 {
        let header = output::header(&output::digest(&sc), None, &policy);
        report(write_atomic(&args.out, &format!("{id}-reps.csv"), &output::reps_csv(&header, &rows))?);
    }
    Ok(())
}

fn report(path: PathBuf) {
    println!("wrote {}", path.display());
}

fn sweep(file: &Path, hogs: &[u32], policies: &[String], args: &OutArgs) -> Result<(), Failure> {
    let (id, sc) = load(file)?;
    let kinds: Vec<PolicyKind> = if policies.is_empty() {
        vec![sc.policy.kind()]
    } else {
        policies
            .iter()
            .map(|p| PolicyKind::from_name(p).ok_or_else(|| Failure::Validation(format!("unknown policy {p:?}"))))
            .collect::<Result<_, _>>()?
    };
    // hog count, then policy, then repetition
    let mut scenarios = Vec::new();
    for &h in hogs {
        for &kind in &kinds {
            let mut base = presets::with_hogs(&sc, h);
            base.policy = sc.policy.with_kind(kind);
            scenarios.extend((0..args.reps).map(|k| seeded(&base, args.seed, k)));
        }
    }
    let outputs = run_parallel(&scenarios, args.jobs);
    let mut rows = Vec::new();
    for (sc, out) in scenarios.iter().zip(outputs) {
        rows.push(Row::new(&id, sc, &out?.metrics));
    }
    let names: Vec<String> = kinds.iter().map(|k| k.to_string()).collect();
    let header = output::header(&output::digest(&sc), args.seed.or(Some(sc.seed)), &names.join(","));
    let reps = args.reps as usize;
    let averaged: Vec<Row> = rows.chunks(reps).map(mean_row).collect();
    report(write_atomic(&args.out, &format!("{id}-sweep.csv"), &output::csv(&header, &averaged))?);

    print!("{:>5}", "hogs");
    for n in &names {
        print!("  {:>24}  {:>24}", format!("{n} misses"), format!("{n} latency_us"));
    }
    println!();
    for per_hog in averaged.chunks(kinds.len()) {
        print!("{:>5}", per_hog[0].hogs);
        for r in per_hog {
            print!("  {:>24.1}  {:>24.1}", r.summary.deadline_misses, r.summary.mean_latency_us);
        }
        println!();
    }
    Ok(())
}

/// Average of repetitions; counts are rounded to the nearest whole.
fn mean_row(reps: &[Row]) -> Row {
    let n = reps.len() as f64;
    let mean = |f: fn(&Row) -> f64| reps.iter().map(f).sum::<f64>() / n;
    let mut out = reps[0].clone();
    let s = &mut out.summary;
    s.requests_settled = mean(|r| r.summary.requests_settled as f64).round() as usize;
    s.requests_open = mean(|r| r.summary.requests_open as f64).round() as usize;
    s.mean_latency_us = mean(|r| r.summary.mean_latency_us);
    s.p99_latency_us = mean(|r| r.summary.p99_latency_us);
    s.mean_realized_u = mean(|r| r.summary.mean_realized_u);
    s.deadline_misses = mean(|r| r.summary.deadline_misses as f64).round() as usize;
    s.achieved_rate_per_s = mean(|r| r.summary.achieved_rate_per_s);
    out
}

#[derive(Serialize)]
struct ReportRow<'a> {
    id: u8,
    title: &'a str,
    pass: bool,
    summary: &'a str,
    rows: &'a [String],
}

fn accept(ids: &[u8], verbose: bool, out: Option<&Path>) -> Result<(), Failure> {
    let ids: Vec<u8> = if ids.is_empty() {
        acceptance::CRITERIA.iter().map(|c| c.0).collect()
    } else {
        ids.to_vec()
    };
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut ok = true;
    for id in ids {
        match acceptance::check(id) {
            None => return Err(Failure::Validation(format!("no acceptance check {id}"))),
            Some(Err(e)) => {
                println!("FAIL {id:>2} {}: {e}", acceptance::title(id));
                ok = false;
            }
            Some(Ok(o)) => {
                println!("{o}");
                if verbose {
                    for r in &o.rows {
                        println!("       {r}");
                    }
                }
                ok &= o.pass;
                outcomes.push(o);
            }
        }
    }
    if let Some(dir) = out {
        let rows: Vec<ReportRow> = outcomes
            .iter()
            .map(|o| ReportRow { id: o.id, title: o.title, pass: o.pass, summary: &o.summary, rows: &o.rows })
            .collect();
        report(write_atomic(dir, "acceptance.json", &output::json(&rows))?);
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hog_counts_parse() {
        assert_eq!(HogCounts::from_str("0..3").unwrap().0, vec![0, 1, 2, 3]);
        assert_eq!(HogCounts::from_str("2..=2").unwrap().0, vec![2]);
        assert_eq!(HogCounts::from_str("4,0,4").unwrap().0, vec![0, 4]);
        assert!(HogCounts::from_str("3..1").is_err());
        assert!(HogCounts::from_str("x").is_err());
    }
}
