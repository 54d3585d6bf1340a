//! Request-based priority elevation on top of the fair-share scheduler.
//!
//! A process that reads a request from a socket gets a negative nice whose
//! strength and hold time depend on the one-minute load. A periodic sampler
//! walks the elevated list and relaxes each entry by one nice level once its
//! delay has passed.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    Deschedule, Dispatch, FairShare, FairShareParams, NiceChange, PolicyKind, SchedCtx,
    SchedError, Scheduler,
};
use crate::model::{Pid, NICE_MIN};
use crate::time::SimTime;

/// Fixed-point one: a load of 1.0 is 2048.
pub const FIXED_1: u64 = 2048;
/// exp(-5s/60s) in fixed point.
const EXP_1: u64 = 1884;
const LOAD_FREQ: SimTime = SimTime(5_000_000);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocketKind {
    Unix,
    Network,
}

impl SocketKind {
    pub fn name(self) -> &'static str {
        match self {
            SocketKind::Unix => "unix",
            SocketKind::Network => "network",
        }
    }
}

impl Default for SocketKind {
    fn default() -> Self {
        SocketKind::Unix
    }
}

impl fmt::Display for SocketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbpeRow {
    /// Applies while the load is at or below this value. Fixed point.
    pub load_threshold: u64,
    pub nice_unix: i32,
    pub nice_net: i32,
    #[serde(rename = "delay_us")]
    pub delay: SimTime,
}

impl RbpeRow {
    const fn new(load_threshold: u64, nice_unix: i32, nice_net: i32, delay_ms: u64) -> Self {
        RbpeRow {
            load_threshold,
            nice_unix,
            nice_net,
            delay: SimTime(delay_ms * 1000),
        }
    }

    pub fn nice(&self, kind: SocketKind) -> i32 {
        match kind {
            SocketKind::Unix => self.nice_unix,
            SocketKind::Network => self.nice_net,
        }
    }
}

/// Boost levels by load; the last row catches everything above 16000.
pub fn default_table() -> Vec<RbpeRow> {
    vec![
        RbpeRow::new(1600, 0, 0, 0),
        RbpeRow::new(3000, -1, 0, 200),
        RbpeRow::new(5000, -2, -1, 300),
        RbpeRow::new(8000, -4, -2, 400),
        RbpeRow::new(12000, -6, -3, 500),
        RbpeRow::new(16000, -7, -4, 600),
        RbpeRow::new(u64::MAX, -15, -5, 600),
    ]
}

/// Nice and hold time for a receive at the given load. Loads beyond the
/// last threshold use the last row.
pub fn rbpe_lookup(table: &[RbpeRow], load: u64, kind: SocketKind) -> (i32, SimTime) {
    let row = table
        .iter()
        .find(|r| load <= r.load_threshold)
        .or(table.last());
    row.map_or((0, SimTime::ZERO), |r| (r.nice(kind), r.delay))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpplEntry {
    pub process: Pid,
    pub current_nice: i32,
    pub stamped: SimTime,
    pub delay: SimTime,
}

pub type Eppl = BTreeMap<Pid, EpplEntry>;

/// Elevates `pid` after a socket read. The change reports boost levels
/// (0 meaning no entry). Keeps the stronger of the old and new boost and
/// restamps either way. Returns `None` when the table says not to boost.
pub fn rbpe_on_request(
    eppl: &mut Eppl,
    table: &[RbpeRow],
    pid: Pid,
    kind: SocketKind,
    load: u64,
    now: SimTime,
) -> Option<NiceChange> {
    let (nice, delay) = rbpe_lookup(table, load, kind);
    if nice >= 0 {
        return None;
    }
    let from = eppl.get(&pid).map_or(0, |e| e.current_nice);
    let to = from.min(nice);
    eppl.insert(
        pid,
        EpplEntry {
            process: pid,
            current_nice: to,
            stamped: now,
            delay,
        },
    );
    Some(NiceChange { pid, from, to, delay })
}

/// Relaxes every entry whose delay has passed by one level. Entries that
/// reach 0 leave the list.
pub fn rbpe_decay(eppl: &mut Eppl, now: SimTime) -> Vec<NiceChange> {
    let mut changes = Vec::new();
    eppl.retain(|&pid, e| {
        if now.saturating_sub(e.stamped) < e.delay {
            return true;
        }
        let from = e.current_nice;
        e.current_nice += 1;
        e.stamped = now;
        changes.push(NiceChange {
            pid,
            from,
            to: e.current_nice,
            delay: e.delay,
        });
        e.current_nice < 0
    });
    changes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Load(pub u64);

impl Load {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / FIXED_1 as f64
    }
}

/// Fixed-point one-minute load average sampled every five seconds.
#[derive(Debug, Clone)]
pub struct LoadEstimator {
    avenrun: u64,
    since_sample: SimTime,
    warm_start: bool,
    seeded: bool,
    held: bool,
}

impl LoadEstimator {
    pub fn new(warm_start: bool) -> Self {
        LoadEstimator {
            avenrun: 0,
            since_sample: SimTime::ZERO,
            warm_start,
            seeded: false,
            held: false,
        }
    }

    pub fn with_load(avenrun: u64) -> Self {
        LoadEstimator {
            avenrun,
            since_sample: SimTime::ZERO,
            warm_start: false,
            seeded: true,
            held: false,
        }
    }

    /// An estimator that ignores updates and always reports `avenrun`.
    pub fn held_at(avenrun: u64) -> Self {
        LoadEstimator {
            held: true,
            ..LoadEstimator::with_load(avenrun)
        }
    }

    pub fn load(&self) -> Load {
        Load(self.avenrun)
    }

    fn calc(load: u64, active: u64) -> u64 {
        let mut v = load * EXP_1 + active * (FIXED_1 - EXP_1);
        if active >= load {
            v += FIXED_1 - 1;
        }
        v / FIXED_1
    }

    /// Advances by `dt` with `runnable` processes on the run queue. One
    /// averaging step is taken per sampling boundary crossed.
    pub fn update_load(&mut self, runnable: u32, dt: SimTime) {
        if dt.is_zero() || self.held {
            return;
        }
        let active = runnable as u64 * FIXED_1;
        if self.warm_start && !self.seeded {
            self.avenrun = active;
        }
        self.seeded = true;
        self.since_sample += dt;
        while self.since_sample >= LOAD_FREQ {
            self.since_sample -= LOAD_FREQ;
            self.avenrun = Self::calc(self.avenrun, active);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbpeParams {
    #[serde(flatten)]
    pub fair: FairShareParams,
    #[serde(default = "default_table")]
    pub table: Vec<RbpeRow>,
    #[serde(default = "default_decay_sample", rename = "decay_sample_us")]
    pub decay_sample: SimTime,
    /// Seed the load average with the first observed run-queue length
    /// instead of climbing from zero.
    #[serde(default = "yes")]
    pub warm_start: bool,
    /// Pin the load average at this fixed-point value for the whole run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_load: Option<u64>,
}

fn default_decay_sample() -> SimTime {
    SimTime::from_ms(10)
}

fn yes() -> bool {
    true
}

impl Default for RbpeParams {
    fn default() -> Self {
        RbpeParams {
            fair: FairShareParams::default(),
            table: default_table(),
            decay_sample: default_decay_sample(),
            warm_start: true,
            held_load: None,
        }
    }
}

impl RbpeParams {
    pub fn validate(&self) -> Result<(), SchedError> {
        self.fair.validate()?;
        let bad = |m: &str| Err(SchedError::BadParameter(m.to_string()));
        if self.table.is_empty() {
            return bad("table must have at least one row");
        }
        if self
            .table
            .windows(2)
            .any(|w| w[0].load_threshold >= w[1].load_threshold)
        {
            return bad("table thresholds must strictly increase");
        }
        for r in &self.table {
            if !(NICE_MIN <= r.nice_unix && r.nice_unix <= r.nice_net && r.nice_net <= 0) {
                return bad("table rows need -20 <= nice_unix <= nice_net <= 0");
            }
        }
        if self.decay_sample.is_zero() {
            return bad("decay sample period must be positive");
        }
        Ok(())
    }
}

/// Fair-share scheduling with socket-triggered nice boosts.
#[derive(Debug, Clone)]
pub struct FairShareRbpe {
    inner: FairShare,
    table: Vec<RbpeRow>,
    decay_sample: SimTime,
    eppl: Eppl,
    base_nice: BTreeMap<Pid, i32>,
    load: LoadEstimator,
}

impl FairShareRbpe {
    pub fn new(params: RbpeParams) -> Self {
        FairShareRbpe {
            inner: FairShare::new(params.fair),
            table: params.table,
            decay_sample: params.decay_sample,
            eppl: Eppl::new(),
            base_nice: BTreeMap::new(),
            load: match params.held_load {
                Some(l) => LoadEstimator::held_at(l),
                None => LoadEstimator::new(params.warm_start),
            },
        }
    }

    /// Pins the load average, for experiments that hold it fixed.
    pub fn with_fixed_load(mut self, avenrun: u64) -> Self {
        self.load = LoadEstimator::held_at(avenrun);
        self
    }

    pub fn eppl(&self) -> &Eppl {
        &self.eppl
    }

    pub fn fair(&self) -> &FairShare {
        &self.inner
    }

    fn effective(&self, pid: Pid, boost: i32) -> i32 {
        self.base_nice.get(&pid).copied().unwrap_or(0).min(boost)
    }

    fn apply(&mut self, change: NiceChange) -> NiceChange {
        let from = self.effective(change.pid, change.from);
        let to = self.effective(change.pid, change.to);
        if from != to {
            self.inner.set_nice(change.pid, to);
        }
        NiceChange { from, to, ..change }
    }
}

impl Scheduler for FairShareRbpe {
    fn kind(&self) -> PolicyKind {
        PolicyKind::FairshareRbpe
    }

    fn register(&mut self, pid: Pid, nice: i32, level: u32) -> Result<(), SchedError> {
        self.inner.register(pid, nice, level)?;
        self.base_nice.insert(pid, nice);
        Ok(())
    }

    fn on_start(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        self.inner.on_start(pid, ctx)
    }

    fn on_wake(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        self.inner.on_wake(pid, ctx)
    }

    fn pick_next(&mut self, ctx: &SchedCtx) -> Result<Dispatch, SchedError> {
        self.inner.pick_next(ctx)
    }

    fn on_deschedule(&mut self, pid: Pid, ran: SimTime, why: Deschedule, ctx: &SchedCtx) {
        self.inner.on_deschedule(pid, ran, why, ctx)
    }

    fn ready_len(&self) -> usize {
        self.inner.ready_len()
    }

    fn set_nice(&mut self, pid: Pid, nice: i32) {
        self.base_nice.insert(pid, nice);
        let boost = self.eppl.get(&pid).map_or(0, |e| e.current_nice);
        let eff = self.effective(pid, boost);
        self.inner.set_nice(pid, eff);
    }

    fn on_receive(&mut self, pid: Pid, kind: SocketKind, now: SimTime) -> Option<NiceChange> {
        let load = self.load.load().0;
        let change = rbpe_on_request(&mut self.eppl, &self.table, pid, kind, load, now)?;
        Some(self.apply(change))
    }

    fn sample_period(&self) -> Option<SimTime> {
        Some(self.decay_sample)
    }

    fn on_sample(&mut self, now: SimTime) -> Vec<NiceChange> {
        rbpe_decay(&mut self.eppl, now)
            .into_iter()
            .map(|c| self.apply(c))
            .collect()
    }

    fn on_load(&mut self, runnable: u32, dt: SimTime) {
        self.load.update_load(runnable, dt);
    }

    fn load(&self) -> Option<Load> {
        Some(self.load.load())
    }

    fn vruntime_of(&self, pid: Pid) -> Option<f64> {
        self.inner.vruntime_of(pid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: u64 = 1000;

    #[test]
    fn lookup_rows() {
        let t = default_table();
        assert_eq!(rbpe_lookup(&t, 1000, SocketKind::Unix), (0, SimTime::ZERO));
        assert_eq!(
            rbpe_lookup(&t, 6000, SocketKind::Network),
            (-2, SimTime::from_ms(400))
        );
        assert_eq!(
            rbpe_lookup(&t, 20000, SocketKind::Unix),
            (-15, SimTime::from_ms(600))
        );
        // boundaries belong to the row they close
        assert_eq!(rbpe_lookup(&t, 1600, SocketKind::Unix).0, 0);
        assert_eq!(rbpe_lookup(&t, 1601, SocketKind::Unix).0, -1);
        assert_eq!(rbpe_lookup(&t, 16000, SocketKind::Unix).0, -7);
        assert_eq!(rbpe_lookup(&t, 16001, SocketKind::Unix).0, -15);
    }

    #[test]
    fn boost_on_request() {
        let t = default_table();
        let mut e = Eppl::new();
        let c = rbpe_on_request(&mut e, &t, Pid(1), SocketKind::Unix, 4000, SimTime(0)).unwrap();
        assert_eq!((c.from, c.to, c.delay), (0, -2, SimTime::from_ms(300)));
        // 6000 is above the 5000 row, so the 8000 row applies
        let c = rbpe_on_request(&mut e, &t, Pid(3), SocketKind::Unix, 6000, SimTime(0)).unwrap();
        assert_eq!((c.to, c.delay), (-4, SimTime::from_ms(400)));
        assert!(rbpe_on_request(&mut e, &t, Pid(2), SocketKind::Unix, 1000, SimTime(0)).is_none());
        assert!(!e.contains_key(&Pid(2)));
    }

    #[test]
    fn refresh_keeps_strongest_boost() {
        let t = default_table();
        let mut e = Eppl::new();
        rbpe_on_request(&mut e, &t, Pid(1), SocketKind::Unix, 7000, SimTime(0));
        assert_eq!(e[&Pid(1)].current_nice, -4);
        rbpe_on_request(&mut e, &t, Pid(1), SocketKind::Unix, 4000, SimTime(50 * MS));
        assert_eq!(e[&Pid(1)].current_nice, -4);
        assert_eq!(e[&Pid(1)].stamped, SimTime(50 * MS));
    }

    #[test]
    fn decay_steps_and_removal() {
        let mut e = Eppl::new();
        e.insert(
            Pid(1),
            EpplEntry {
                process: Pid(1),
                current_nice: -2,
                stamped: SimTime(0),
                delay: SimTime::from_ms(300),
            },
        );
        assert!(rbpe_decay(&mut e, SimTime(299 * MS)).is_empty());
        let c = rbpe_decay(&mut e, SimTime(300 * MS));
        assert_eq!((c[0].from, c[0].to), (-2, -1));
        assert_eq!(e[&Pid(1)].stamped, SimTime(300 * MS));
        let c = rbpe_decay(&mut e, SimTime(600 * MS));
        assert_eq!(c[0].to, 0);
        assert!(e.is_empty());
    }

    /// Straightforward f64 model of the same recurrence.
    fn ema_oracle(start: f64, runnable: f64, steps: u32) -> f64 {
        let k = 1884.0 / 2048.0;
        let mut l = start;
        for _ in 0..steps {
            l = l * k + runnable * 2048.0 * (1.0 - k);
        }
        l
    }

    #[test]
    fn load_average_converges() {
        let mut est = LoadEstimator::new(false);
        for _ in 0..12 {
            est.update_load(8, SimTime::from_secs(5));
        }
        let oracle = ema_oracle(0.0, 8.0, 12);
        let got = est.load().0 as f64;
        assert!((got - oracle).abs() / oracle < 0.005, "{got} vs {oracle}");
        assert!((got - 8.0 * 2048.0 * (1.0 - (-1.0f64).exp())).abs() < 60.0);

        let mut est = LoadEstimator::new(false);
        for _ in 0..400 {
            est.update_load(1, SimTime::from_secs(5));
        }
        assert_eq!(est.load().0, 2048);

        let mut est = LoadEstimator::with_load(9000);
        for _ in 0..400 {
            est.update_load(0, SimTime::from_secs(5));
        }
        assert_eq!(est.load().0, 0);
    }

    #[test]
    fn partial_intervals_accumulate() {
        let mut a = LoadEstimator::new(false);
        let mut b = LoadEstimator::new(false);
        for _ in 0..50 {
            a.update_load(3, SimTime::from_ms(100));
        }
        b.update_load(3, SimTime::from_secs(5));
        assert_eq!(a.load(), b.load());
    }

    #[test]
    fn warm_start_seeds_from_first_sample() {
        let mut est = LoadEstimator::new(true);
        est.update_load(6, SimTime(1));
        assert_eq!(est.load().0, 6 * 2048);
    }

    #[test]
    fn params_defaults_and_validation() {
        let p: RbpeParams = serde_json::from_str(r#"{"sch_lat_us":20000}"#).unwrap();
        assert_eq!(p, RbpeParams::default());
        let mut bad = RbpeParams::default();
        bad.table.swap(1, 2);
        assert!(bad.validate().is_err());
        let mut bad = RbpeParams::default();
        bad.table[2].nice_net = -3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scheduler_boost_changes_weight_and_decays() {
        let mut s = FairShareRbpe::new(RbpeParams::default()).with_fixed_load(7000);
        s.register(Pid(1), 0, 0).unwrap();
        let c = s.on_receive(Pid(1), SocketKind::Unix, SimTime(0)).unwrap();
        assert_eq!((c.from, c.to), (0, -4));
        assert_eq!(s.fair().nice_of(Pid(1)), Some(-4));
        let mut t = 0;
        while !s.eppl().is_empty() {
            t += 10 * MS;
            s.on_sample(SimTime(t));
        }
        assert_eq!(s.fair().nice_of(Pid(1)), Some(0));
        // four steps of 400ms each
        assert_eq!(t, 1600 * MS);
    }
}
