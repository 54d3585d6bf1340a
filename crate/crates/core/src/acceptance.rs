//! The built-in acceptance suite. Each check runs its scenarios, scores them
//! against an oracle or a directional expectation, and reports one line.

use std::fmt;
use std::time::{Duration, Instant};

use crate::analytics::{self, compare, OracleResult, Tolerance};
use crate::model::{Accounting, ModelConfig};
use crate::presets::{self, FRONT};
use crate::sched::{
    default_table, nice_to_weight, rbpe_lookup, FairShareParams, PolicyKind, SchedulerPolicy,
    SocketKind,
};
use crate::sim::{deadline_metrics, run, RunOutput, Scenario, SimError};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub summary: String,
    /// Per-scenario rows, for the full report.
    pub rows: Vec<String>,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2} {}: {} ({:.2}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.summary,
            self.elapsed.as_secs_f64()
        )
    }
}

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "round-robin exactness"),
    (2, "multilevel feedback exactness"),
    (3, "fair-share convergence"),
    (4, "fair-share corrected oracle"),
    (5, "boosted share"),
    (6, "boost dominance"),
    (7, "low-load no-op"),
    (8, "boost table lookup"),
    (9, "appeasement precedence and optimality"),
    (10, "workload analogs"),
    (11, "determinism"),
];

pub fn title(id: u8) -> &'static str {
    CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1)
}

/// Runs one check; `None` for an unknown id.
pub fn check(id: u8) -> Option<Result<Outcome, SimError>> {
    let start = Instant::now();
    let body = match id {
        1 => rr_exactness(),
        2 => mlfq_exactness(),
        3 => fair_convergence(),
        4 => cfs_corrected(),
        5 => boosted_share(),
        6 => boost_dominance(),
        7 => low_load_noop(),
        8 => table_lookup(),
        9 => appeasement_optimality(),
        10 => analogs(),
        11 => determinism(),
        _ => return None,
    };
    Some(body.map(|(pass, summary, rows)| Outcome {
        id,
        title: title(id),
        pass,
        summary,
        rows,
        elapsed: start.elapsed(),
    }))
}

pub fn check_all() -> Vec<Result<Outcome, SimError>> {
    CRITERIA.iter().filter_map(|c| check(c.0)).collect()
}

type Body = Result<(bool, String, Vec<String>), SimError>;

/// Runs scenarios on all cores, results in input order.
pub fn run_many(scenarios: &[Scenario]) -> Vec<Result<RunOutput, SimError>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = scenarios.len().div_ceil(threads).max(1);
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

fn run_all(scenarios: &[Scenario]) -> Result<Vec<RunOutput>, SimError> {
    run_many(scenarios).into_iter().collect()
}

/// Realized unhappiness of the only request in a run.
fn realized(out: &RunOutput) -> Result<f64, SimError> {
    out.metrics
        .requests
        .first()
        .and_then(|r| r.realized_u)
        .ok_or_else(|| SimError::Internal("request did not settle before the horizon".into()))
}

fn score(measured: &[f64], oracles: &[OracleResult], names: &[String], tol: Tolerance) -> (bool, Vec<String>) {
    let report = compare(measured, oracles, tol).expect("one oracle per scenario");
    let rows = report
        .rows
        .iter()
        .zip(names)
        .map(|(r, n)| {
            format!(
                "{n}: measured {} verbatim {} corrected {}{}",
                r.measured,
                r.verbatim,
                r.corrected,
                if r.excluded { " (excluded)" } else { "" }
            )
        })
        .collect();
    (report.all_verbatim_ok() && report.counted().count() == measured.len(), rows)
}

fn rr_exactness() -> Body {
    let start = Instant::now();
    let mut scen = Vec::new();
    let mut oracles = Vec::new();
    for q in [SimTime::from_ms(1), SimTime::from_ms(10)] {
        for n in 2..=8 {
            for z in 1..=5 {
                scen.push(presets::rr_direct(q, z, n));
                oracles.push(analytics::rr_min(q, z, n));
            }
            for z in [[1, 1, 1], [1, 2, 3], [2, 3, 4], [5, 1, 2], [3, 3, 3]] {
                scen.push(presets::rr_chain(q, z, n));
                oracles.push(analytics::rr_typical(q, z[0], z[1], z[2], n));
            }
        }
    }
    let measured = run_all(&scen)?.iter().map(realized).collect::<Result<Vec<_>, _>>()?;
    let names: Vec<_> = scen.iter().map(|s| s.name.clone().unwrap_or_default()).collect();
    let (exact, rows) = score(&measured, &oracles, &names, Tolerance::Exact);
    let t = start.elapsed();
    let fast = t < Duration::from_secs(5);
    let misses = rows.len() - measured.iter().zip(&oracles).filter(|(m, o)| **m == o.verbatim).count();
    Ok((
        exact && fast,
        format!("{} scenarios, {misses} mismatches, {:.2}s", scen.len(), t.as_secs_f64()),
        rows,
    ))
}

fn mlfq_exactness() -> Body {
    let start = Instant::now();
    let q = SimTime::from_ms(10);
    let mut scen = Vec::new();
    let mut oracles = Vec::new();
    for z in [1u32, 3, 7] {
        let depth = analytics::mlfq_depth(z).unwrap() as usize + 1;
        for code in 0..4usize.pow(depth as u32) {
            let a: Vec<u32> = (0..depth).map(|i| (code / 4usize.pow(i as u32) % 4) as u32 + 1).collect();
            scen.push(presets::mlfq_direct(q, &a, z));
            oracles.push(analytics::mlfq_min(q, &a, z));
        }
    }
    for z in [[1, 1, 1], [1, 3, 1], [3, 3, 3], [7, 1, 3], [7, 7, 7]] {
        scen.push(presets::mlfq_chain(q, 4, z));
        oracles.push(analytics::mlfq_typical(q, &[1, 1, 1], z[0], z[1], z[2]));
    }
    let measured = run_all(&scen)?.iter().map(realized).collect::<Result<Vec<_>, _>>()?;
    let names: Vec<_> = scen.iter().map(|s| s.name.clone().unwrap_or_default()).collect();
    let (exact, mut rows) = score(&measured, &oracles, &names, Tolerance::Exact);
    let offsets: Vec<f64> = oracles
        .iter()
        .zip(&measured)
        .zip(&scen)
        .filter_map(|((o, m), sc)| {
            let parts = sc.workload.iter().filter_map(|w| w.chain()).map(|c| c.len()).sum::<usize>();
            o.simplified.map(|s| (m - s) / parts as f64)
        })
        .collect();
    let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rows.push(format!("simplified form offset per segment: {lo}..{hi} us"));
    let t = start.elapsed();
    Ok((
        exact && t < Duration::from_secs(5),
        format!(
            "{} scenarios exact on the summed form; simplified form low by {}..{} us per part; {:.2}s",
            scen.len(),
            lo,
            hi,
            t.as_secs_f64()
        ),
        rows,
    ))
}

fn fair_convergence() -> Body {
    let lat = SimTime::from_ms(20);
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst_equal = 0.0f64;
    for n in [2u32, 4, 10] {
        let sc = presets::hogs_only(presets::fairshare(lat), &vec![0; n as usize], 1000);
        let out = run(&sc)?;
        let total = out.metrics.total_cpu().as_us() as f64;
        let worst = out
            .metrics
            .cpu
            .values()
            .map(|c| ((c.as_us() as f64 / total) * f64::from(n) - 1.0).abs())
            .fold(0.0, f64::max);
        pass &= worst <= 0.01 && out.metrics.cpu.len() == n as usize;
        worst_equal = worst_equal.max(worst);
        rows.push(format!("n={n}: worst relative deviation from 1/n {:.5}", worst));
    }
    let sc = presets::hogs_only(presets::fairshare(lat), &[-1, 0], 1000);
    let out = run(&sc)?;
    let first = sc.first_hog_pid();
    let share = out.metrics.cpu_of(first).as_us() as f64 / out.metrics.total_cpu().as_us() as f64;
    let w = nice_to_weight(-1).unwrap() as f64;
    let expect = w / (w + nice_to_weight(0).unwrap() as f64);
    let dev = (share / expect - 1.0).abs();
    pass &= dev <= 0.005;
    rows.push(format!("nice -1 vs 0: share {share:.4}, expected {expect:.4}"));
    Ok((pass, format!(
        "equal weights within {:.3}% of 1/n; nice -1 share {share:.4} vs {expect:.4}",
        worst_equal * 100.0
    ), rows))
}

fn cfs_corrected() -> Body {
    let lat = SimTime(16_800);
    let mut scen = Vec::new();
    let mut oracles = Vec::new();
    for n in 2..=8u32 {
        for k in [[1u32, 1, 1], [2, 2, 2], [1, 3, 2], [3, 1, 4], [4, 4, 4]] {
            let slice = lat / u64::from(n);
            let [a, b, c] = k.map(|k| slice * u64::from(k));
            scen.push(presets::cfs_chain(lat, n, k));
            oracles.push(analytics::cfs_typical(lat, n, a, b, c));
        }
    }
    let measured = run_all(&scen)?.iter().map(realized).collect::<Result<Vec<_>, _>>()?;
    let report = compare(&measured, &oracles, Tolerance::Absolute(1.0)).expect("paired");
    let rows = report
        .rows
        .iter()
        .zip(&scen)
        .map(|(r, s)| {
            format!(
                "{}: measured {} corrected {} verbatim {} (verbatim off by {:+})",
                s.name.as_deref().unwrap_or(""),
                r.measured,
                r.corrected,
                r.verbatim,
                r.measured - r.verbatim
            )
        })
        .collect();
    let exact = report.all_corrected_ok() && report.counted().count() == scen.len();
    let verbatim_off = report.counted().filter(|r| !r.verbatim_ok).count();
    let worst = report.counted().map(|r| r.measured - r.verbatim).fold(0.0f64, |a, d| if d.abs() > a.abs() { d } else { a });
    Ok((
        exact && verbatim_off > 0,
        format!(
            "{} chains, corrected max error {} us; printed form misses {verbatim_off}, worst {worst:+} us",
            scen.len(),
            report.max_corrected_error()
        ),
        rows,
    ))
}

fn boosted_share() -> Body {
    let mut scen = Vec::new();
    let mut expected = Vec::new();
    for n in 2..=10u32 {
        for b in 1..=15u32 {
            scen.push(presets::boosted_among_hogs(n, -(b as i32), 400));
            expected.push(analytics::rbpe_share(n, b));
        }
    }
    let outs = run_all(&scen)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for ((sc, out), e) in scen.iter().zip(&outs).zip(&expected) {
        let m = out.metrics.cpu_of(sc.first_hog_pid()).as_us() as f64 / out.metrics.total_cpu().as_us() as f64;
        let dev = (m / e - 1.0).abs();
        worst = worst.max(dev);
        rows.push(format!("{}: share {m:.4} expected {e:.4}", sc.name.as_deref().unwrap_or("")));
    }
    Ok((worst <= 0.05, format!("{} points, worst relative deviation {:.4}", scen.len(), worst), rows))
}

/// Pinned loads that select each non-zero row of the boost table.
const BOOSTED_LOADS: [u64; 6] = [3000, 5000, 8000, 12000, 16000, 20000];

fn dominance_grid(mode: Accounting) -> Vec<(Scenario, Scenario)> {
    let fair = FairShareParams::default();
    let mut out = Vec::new();
    for n in [4u32, 6, 8, 10] {
        for load in BOOSTED_LOADS {
            for k in [[2u32, 2, 2], [1, 3, 1], [3, 2, 3], [4, 4, 4]] {
                let slice = fair.sch_lat / u64::from(n);
                let [a, b, c] = k.map(|k| slice * u64::from(k));
                let chain = presets::three_part(a, b, c);
                let mut base =
                    presets::chain_with_hogs(SchedulerPolicy::Fairshare(fair.clone()), n, chain, SimTime::from_ms(500));
                base.model = ModelConfig { alpha: 0.0, accounting: mode };
                base.name = Some(format!("n{n}-load{load}-k{}{}{}", k[0], k[1], k[2]));
                let mut boosted = base.clone();
                boosted.policy = presets::rbpe_held(fair.clone(), load);
                out.push((base, boosted));
            }
        }
    }
    out
}

fn dominance(mode: Accounting) -> Result<(usize, usize, usize, Vec<String>), SimError> {
    let grid = dominance_grid(mode);
    let flat: Vec<Scenario> = grid.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let outs = run_all(&flat)?;
    let (mut holds, mut strict) = (0, 0);
    let mut rows = Vec::new();
    for (i, (base, _)) in grid.iter().enumerate() {
        let fs = realized(&outs[2 * i])?;
        let rb = realized(&outs[2 * i + 1])?;
        holds += usize::from(rb <= fs);
        strict += usize::from(rb < fs);
        rows.push(format!("{}: boosted {rb} plain {fs} margin {}", base.name.as_deref().unwrap_or(""), fs - rb));
    }
    Ok((grid.len(), holds, strict, rows))
}

fn boost_dominance() -> Body {
    let (n, holds, strict, mut rows) = dominance(Accounting::WaitMinusRun)?;
    let ok = |holds: usize, strict: usize, n: usize| holds == n && strict * 10 >= n * 9;
    if ok(holds, strict, n) {
        return Ok((true, format!("{n} points, never worse, strictly better in {strict}"), rows));
    }
    let (n2, holds2, strict2, rows2) = dominance(Accounting::NetWait)?;
    rows.push("pure-waiting accounting:".into());
    rows.extend(rows2);
    Ok((
        ok(holds2, strict2, n2),
        format!(
            "{n} points; default accounting never worse in {holds}, strictly better in {strict}; \
             pure waiting never worse in {holds2}, strictly better in {strict2}"
        ),
        rows,
    ))
}

fn low_load_noop() -> Body {
    let fair = FairShareParams::default();
    let mut bases = vec![
        presets::chain_with_hogs(
            SchedulerPolicy::Fairshare(fair.clone()),
            6,
            presets::three_part(SimTime::from_ms(12), SimTime::from_ms(7), SimTime::from_ms(30)),
            SimTime::from_ms(250),
        ),
        presets::frame_stream(SchedulerPolicy::Fairshare(fair.clone()), 3),
        presets::transaction_stream(SchedulerPolicy::Fairshare(fair.clone()), 2),
    ];
    for b in &mut bases[1..] {
        b.horizon = SimTime::from_secs(20);
    }
    let mut rows = Vec::new();
    let mut pass = true;
    for base in &bases {
        for load in [0, 1000, 1600] {
            let mut boosted = base.clone();
            boosted.policy = presets::rbpe_held(fair.clone(), load);
            let a = run(base)?.trace.to_text();
            let b = run(&boosted)?.trace.to_text();
            let same = a == b;
            pass &= same;
            rows.push(format!(
                "{} at load {load}: {} events, identical {same}",
                base.name.as_deref().unwrap_or("chain"),
                a.lines().count()
            ));
        }
    }
    Ok((pass, format!("{} trace pairs identical: {pass}", rows.len()), rows))
}

/// Rows as printed: threshold, local nice, remote nice, delay in ms.
const PRINTED_TABLE: [(Option<u64>, i32, i32, u64); 7] = [
    (Some(1600), 0, 0, 0),
    (Some(3000), -1, 0, 200),
    (Some(5000), -2, -1, 300),
    (Some(8000), -4, -2, 400),
    (Some(12000), -6, -3, 500),
    (Some(16000), -7, -4, 600),
    (None, -15, -5, 600),
];

fn table_lookup() -> Body {
    let table = default_table();
    let mut rows = Vec::new();
    let mut pass = true;
    let mut lower = 0u64;
    for (threshold, local, remote, delay) in PRINTED_TABLE {
        let probes: Vec<u64> = match threshold {
            Some(t) => vec![lower, (lower + t) / 2, t],
            None => vec![lower, lower + 1, 100_000, u64::MAX],
        };
        for load in probes {
            for (kind, nice) in [(SocketKind::Unix, local), (SocketKind::Network, remote)] {
                let got = rbpe_lookup(&table, load, kind);
                let want = (nice, SimTime::from_ms(delay));
                if got != want {
                    pass = false;
                    rows.push(format!("load {load} {}: got {got:?} want {want:?}", kind.name()));
                }
            }
        }
        lower = threshold.map_or(lower, |t| t + 1);
    }
    Ok((pass, format!("7 rows, both socket kinds, {} mismatches", rows.len()), rows))
}

fn appeasement_optimality() -> Body {
    let fair = FairShareParams::default();
    let appease = presets::appeasement(fair.clone());
    let net = ModelConfig {
        alpha: 0.0,
        accounting: Accounting::NetWait,
    };
    let mut cases = Vec::new();
    for n in 2..=8u32 {
        for chain in [
            vec![crate::sim::Segment::new(FRONT, SimTime::from_ms(25))],
            presets::three_part(SimTime::from_ms(10), SimTime::from_ms(5), SimTime::from_ms(10)),
            presets::three_part(SimTime::from_ms(3), SimTime::from_ms(40), SimTime::from_ms(1)),
        ] {
            let mut sc = presets::chain_with_hogs(appease.clone(), n, chain, SimTime::from_secs(1));
            sc.model = net;
            sc.name = Some(format!("n{n}-{}part", sc.workload.len()));
            cases.push(sc);
        }
    }
    let mut flat = Vec::new();
    for sc in &cases {
        for kind in PolicyKind::ALL {
            let mut s = sc.clone();
            s.policy = sc.policy.with_kind(kind);
            flat.push(s);
        }
    }
    // precedence is also checked on the streaming workloads
    let mut extra = Vec::new();
    for hogs in [0, 4, 12] {
        let mut f = presets::frame_stream(appease.clone(), hogs);
        f.horizon = SimTime::from_secs(20);
        let mut t = presets::transaction_stream(appease.clone(), hogs);
        t.horizon = SimTime::from_secs(20);
        extra.extend([f, t]);
    }
    let outs = run_all(&flat)?;
    let extra_outs = run_all(&extra)?;
    let k = PolicyKind::ALL.len();
    let appeasement_runs = outs.iter().skip(k - 1).step_by(k).chain(&extra_outs);
    let runs = appeasement_runs.clone().count();
    let violations: u64 = appeasement_runs.map(|o| o.metrics.precedence_violations).sum();
    let mut rows = Vec::new();
    let mut optimal = 0;
    for (i, sc) in cases.iter().enumerate() {
        let us: Vec<f64> = outs[i * k..(i + 1) * k].iter().map(realized).collect::<Result<_, _>>()?;
        let mine = us[k - 1];
        let best_other = us[..k - 1].iter().copied().fold(f64::INFINITY, f64::min);
        optimal += usize::from(mine <= best_other);
        rows.push(format!(
            "{}: {}",
            sc.name.as_deref().unwrap_or(""),
            PolicyKind::ALL
                .iter()
                .zip(&us)
                .map(|(p, u)| format!("{p} {u}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    Ok((
        violations == 0 && optimal == cases.len(),
        format!(
            "{violations} precedence violations in {runs} runs; lowest unhappiness in {optimal}/{} chains",
            cases.len()
        ),
        rows,
    ))
}

fn analogs() -> Body {
    let fair = FairShareParams::default();
    let plain = SchedulerPolicy::Fairshare(fair.clone());
    let boosted = SchedulerPolicy::FairshareRbpe(crate::sched::RbpeParams {
        fair,
        ..Default::default()
    });
    let mut rows = Vec::new();

    let start = Instant::now();
    let frames: Vec<Scenario> = (0..=12)
        .flat_map(|h| [presets::frame_stream(plain.clone(), h), presets::frame_stream(boosted.clone(), h)])
        .collect();
    let outs = run_all(&frames)?;
    let frame_time = start.elapsed();
    let misses: Vec<(f64, f64)> = outs
        .chunks(2)
        .map(|pair| {
            let m = |o: &RunOutput| {
                let d = deadline_metrics(&o.metrics, 1, presets::FRAME_PERIOD);
                d.misses as f64 / d.count.max(1) as f64
            };
            (m(&pair[0]), m(&pair[1]))
        })
        .collect();
    for (h, (p, b)) in misses.iter().enumerate() {
        rows.push(format!("frames hogs={h}: plain misses {:.2}%, boosted {:.2}%", p * 100.0, b * 100.0));
    }
    let frames_ok = misses.iter().all(|m| m.1 <= 0.01) && misses[12].0 > 0.20;

    let start = Instant::now();
    let txns: Vec<Scenario> = [0, 12]
        .into_iter()
        .flat_map(|h| {
            [presets::transaction_stream(plain.clone(), h), presets::transaction_stream(boosted.clone(), h)]
        })
        .collect();
    let mut sweep: Vec<Scenario> = (1..12)
        .flat_map(|h| {
            [presets::transaction_stream(plain.clone(), h), presets::transaction_stream(boosted.clone(), h)]
        })
        .collect();
    sweep.splice(0..0, txns);
    let outs = run_all(&sweep)?;
    let txn_time = start.elapsed();
    let mean = |o: &RunOutput| o.metrics.summary(&Default::default()).mean_latency_us;
    let (p0, b0, p12, b12) = (mean(&outs[0]), mean(&outs[1]), mean(&outs[2]), mean(&outs[3]));
    rows.push(format!(
        "transactions mean latency: plain {:.1}ms -> {:.1}ms, boosted {:.1}ms -> {:.1}ms",
        p0 / 1e3,
        p12 / 1e3,
        b0 / 1e3,
        b12 / 1e3
    ));
    let txn_ok = b12 <= 2.0 * b0 && p12 > 4.0 * p0;
    let fast = frame_time < Duration::from_secs(60) && txn_time < Duration::from_secs(60);
    Ok((
        frames_ok && txn_ok && fast,
        format!(
            "frame misses at 12 hogs plain {:.1}% boosted {:.1}% (worst boosted {:.2}%); \
             transaction latency x{:.2} plain, x{:.2} boosted; sweeps {:.1}s and {:.1}s",
            misses[12].0 * 100.0,
            misses[12].1 * 100.0,
            misses.iter().map(|m| m.1).fold(0.0, f64::max) * 100.0,
            p12 / p0,
            b12 / b0,
            frame_time.as_secs_f64(),
            txn_time.as_secs_f64()
        ),
        rows,
    ))
}

fn determinism() -> Body {
    let fair = FairShareParams::default();
    let mut jittered = presets::frame_stream(presets::rbpe_held(fair.clone(), 9000), 5);
    if let crate::sim::WorkItem::Stream { jitter, .. } = &mut jittered.workload[1] {
        *jitter = SimTime::from_ms(15);
    }
    jittered.horizon = SimTime::from_secs(10);
    jittered.seed = 42;
    let mut txn = presets::transaction_stream(presets::appeasement(fair), 6);
    txn.horizon = SimTime::from_secs(10);
    let scen = vec![
        presets::rr_chain(SimTime::from_ms(1), [2, 3, 4], 5),
        presets::mlfq_direct(SimTime::from_ms(1), &[2, 3, 4], 7),
        presets::cfs_chain(SimTime(16_800), 6, [2, 1, 3]),
        jittered,
        txn,
    ];
    let mut rows = Vec::new();
    let mut pass = true;
    for sc in &scen {
        let a = run(sc)?;
        let b = run(sc)?;
        let same_trace = a.trace.to_text() == b.trace.to_text();
        let ma = serde_json::to_string(&a.metrics).expect("metrics serialize");
        let mb = serde_json::to_string(&b.metrics).expect("metrics serialize");
        let same = same_trace && ma == mb;
        pass &= same;
        rows.push(format!("{}: identical {same}", sc.name.as_deref().unwrap_or("")));
    }
    Ok((pass, format!("{} scenarios run twice, identical: {pass}", scen.len()), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_has_a_check() {
        assert!(check(0).is_none());
        assert!(check(12).is_none());
        assert_eq!(title(7), "low-load no-op");
    }

    #[test]
    fn table_check_passes() {
        let o = check(8).unwrap().unwrap();
        assert!(o.pass, "{o}");
    }
}
