use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{check_nice, Deschedule, Dispatch, PolicyKind, SchedCtx, SchedError, Scheduler};
use crate::model::Pid;
use crate::time::SimTime;

pub const NICE_0_WEIGHT: u64 = 1024;

/// Each nice step below zero multiplies the weight by this factor.
const NICE_STEP: f64 = 1.25;

/// Internal vruntime resolution: one nice-0 microsecond is this many units.
const VR_PER_US: i64 = 1024;

/// Load weight of a nice level: 1024 at nice 0, times 1.25 per step down,
/// rounded to the nearest integer.
pub fn nice_to_weight(nice: i32) -> Result<u64, SchedError> {
    check_nice(nice)?;
    Ok((NICE_0_WEIGHT as f64 * NICE_STEP.powi(-nice)).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShareOfCpu {
    pub fraction: f64,
    /// Unstretched slice in microseconds: weight * sch_lat / total weight.
    pub slice_us: f64,
}

/// CPU share of the process at `index` in a run queue given by nice levels.
pub fn cpu_share(run_queue: &[i32], index: usize, sch_lat: SimTime) -> Result<ShareOfCpu, SchedError> {
    if run_queue.is_empty() || index >= run_queue.len() {
        return Err(SchedError::EmptyReadySet);
    }
    let mut total = 0u64;
    for &n in run_queue {
        total += nice_to_weight(n)?;
    }
    let w = nice_to_weight(run_queue[index])? as f64;
    let fraction = w / total as f64;
    Ok(ShareOfCpu {
        fraction,
        slice_us: fraction * sch_lat.as_us() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairShareParams {
    #[serde(rename = "sch_lat_us")]
    pub sch_lat: SimTime,
    /// Wakers that slept less than this go to the leftmost position.
    /// Defaults to `sch_lat`.
    #[serde(default, rename = "sleeper_threshold_us")]
    pub sleeper_threshold: Option<SimTime>,
    /// Floor on granted slices. Defaults to `sch_lat / 8`.
    #[serde(default, rename = "min_granularity_us")]
    pub min_granularity: Option<SimTime>,
}

impl Default for FairShareParams {
    fn default() -> Self {
        FairShareParams {
            sch_lat: SimTime::from_ms(20),
            sleeper_threshold: None,
            min_granularity: None,
        }
    }
}

impl FairShareParams {
    pub fn new(sch_lat: SimTime) -> Self {
        FairShareParams {
            sch_lat,
            ..Default::default()
        }
    }

    pub fn sleeper_threshold(&self) -> SimTime {
        self.sleeper_threshold.unwrap_or(self.sch_lat)
    }

    pub fn min_granularity(&self) -> SimTime {
        self.min_granularity
            .unwrap_or(SimTime(self.sch_lat.as_us() / 8))
    }

    pub fn validate(&self) -> Result<(), SchedError> {
        if self.sch_lat.is_zero() {
            return Err(SchedError::BadParameter("sch_lat must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Entity {
    vruntime: i64,
    nice: i32,
    weight: u64,
    slept_at: SimTime,
    queued: bool,
    /// Slice of the current dispatch and the virtual time it is worth.
    grant: Option<(SimTime, i64)>,
}

/// Virtual-runtime fair-share scheduler. Runnable processes are kept ordered
/// by (vruntime, pid); the leftmost one runs next.
#[derive(Debug, Clone)]
pub struct FairShare {
    params: FairShareParams,
    ents: BTreeMap<Pid, Entity>,
    tree: BTreeSet<(i64, Pid)>,
    min_vruntime: i64,
    current: Option<Pid>,
}

impl FairShare {
    pub fn new(params: FairShareParams) -> Self {
        FairShare {
            params,
            ents: BTreeMap::new(),
            tree: BTreeSet::new(),
            min_vruntime: 0,
            current: None,
        }
    }

    pub fn params(&self) -> &FairShareParams {
        &self.params
    }

    pub fn nice_of(&self, pid: Pid) -> Option<i32> {
        self.ents.get(&pid).map(|e| e.nice)
    }

    /// Runnable processes not on the CPU, leftmost first.
    pub fn ready(&self) -> impl Iterator<Item = Pid> + '_ {
        self.tree.iter().map(|(_, p)| *p)
    }

    pub fn is_queued(&self, pid: Pid) -> bool {
        self.ents.get(&pid).is_some_and(|e| e.queued)
    }

    fn scaled(ran: SimTime, weight: u64) -> i64 {
        (ran.as_us() as i128 * VR_PER_US as i128 * NICE_0_WEIGHT as i128 / weight as i128) as i64
    }

    /// vruntime of the running process including the part of the current
    /// dispatch not yet charged.
    fn running_vruntime(&self, ctx: &SchedCtx) -> Option<i64> {
        let (pid, ran) = ctx.running?;
        let e = self.ents.get(&pid)?;
        Some(e.vruntime + Self::scaled(ran, e.weight))
    }

    fn min_now(&self, ctx: &SchedCtx) -> i64 {
        let left = self.tree.first().map(|(v, _)| *v);
        match (left, self.running_vruntime(ctx)) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => self.min_vruntime,
        }
    }

    fn insert(&mut self, pid: Pid, vruntime: i64) -> Result<(), SchedError> {
        let e = self.ents.get_mut(&pid).ok_or(SchedError::Unknown(pid))?;
        if e.queued || self.current == Some(pid) {
            return Err(SchedError::AlreadyReady(pid));
        }
        e.vruntime = vruntime;
        e.queued = true;
        self.tree.insert((vruntime, pid));
        Ok(())
    }

    fn preempts(&self, vruntime: i64, ctx: &SchedCtx) -> bool {
        self.running_vruntime(ctx).is_some_and(|cur| vruntime < cur)
    }

    /// Slice granted to `pid` given the current runnable set (the tree, the
    /// running process, and `pid` itself).
    pub fn slice_for(&self, pid: Pid, ctx: &SchedCtx) -> SimTime {
        self.grant_for(pid, ctx).0
    }

    /// The slice in microseconds and in virtual time. Every process in a
    /// round gets the same virtual quantum; truncating it to whole
    /// microseconds must not let a heavier process fall behind.
    fn grant_for(&self, pid: Pid, ctx: &SchedCtx) -> (SimTime, i64) {
        let mut total: u64 = self
            .tree
            .iter()
            .filter(|(_, p)| *p != pid)
            .map(|(_, p)| self.ents[p].weight)
            .sum();
        if let Some((cur, _)) = ctx.running {
            if cur != pid {
                total += self.ents.get(&cur).map_or(0, |e| e.weight);
            }
        }
        let w = self.ents.get(&pid).map_or(NICE_0_WEIGHT, |e| e.weight);
        total += w;
        let lat = self.params.sch_lat.as_us() as u128;
        let raw = SimTime((w as u128 * lat / total as u128) as u64);
        let floor = self.params.min_granularity().max(SimTime(1));
        if raw >= floor {
            let virt = lat * VR_PER_US as u128 * NICE_0_WEIGHT as u128 / total as u128;
            (raw, virt as i64)
        } else {
            (floor, Self::scaled(floor, w))
        }
    }

    /// Takes `pid` off the tree to run, returning its slice.
    pub fn dispatch(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<SimTime, SchedError> {
        let grant = self.grant_for(pid, ctx);
        self.take(pid)?;
        if let Some(e) = self.ents.get_mut(&pid) {
            e.grant = Some(grant);
        }
        Ok(grant.0)
    }

    /// Removes a specific runnable process from the tree and makes it current.
    pub fn take(&mut self, pid: Pid) -> Result<(), SchedError> {
        let e = self.ents.get_mut(&pid).ok_or(SchedError::Unknown(pid))?;
        if !e.queued {
            return Err(SchedError::Unknown(pid));
        }
        e.queued = false;
        let v = e.vruntime;
        self.tree.remove(&(v, pid));
        self.current = Some(pid);
        self.min_vruntime = self.min_vruntime.max(v.min(self.tree.first().map_or(v, |x| x.0)));
        Ok(())
    }
}

impl Scheduler for FairShare {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Fairshare
    }

    fn register(&mut self, pid: Pid, nice: i32, _level: u32) -> Result<(), SchedError> {
        let weight = nice_to_weight(nice)?;
        self.ents.insert(
            pid,
            Entity {
                vruntime: self.min_vruntime,
                nice,
                weight,
                slept_at: SimTime::ZERO,
                queued: false,
                grant: None,
            },
        );
        Ok(())
    }

    /// New processes are placed to the right of everything runnable.
    fn on_start(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        let right = self
            .tree
            .last()
            .map(|(v, _)| *v)
            .into_iter()
            .chain(self.running_vruntime(ctx))
            .max()
            .unwrap_or(self.min_vruntime)
            .max(self.min_vruntime);
        self.insert(pid, right)?;
        Ok(self.preempts(right, ctx))
    }

    /// Short sleepers become the leftmost entry; long sleepers are floored
    /// to the current minimum.
    fn on_wake(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        let e = self.ents.get(&pid).ok_or(SchedError::Unknown(pid))?;
        if e.queued || self.current == Some(pid) {
            return Err(SchedError::AlreadyReady(pid));
        }
        let slept = ctx.now.saturating_sub(e.slept_at);
        let min = self.min_now(ctx);
        let v = if slept < self.params.sleeper_threshold() {
            min - 1
        } else {
            e.vruntime.max(min)
        };
        self.insert(pid, v)?;
        Ok(self.preempts(v, ctx))
    }

    fn pick_next(&mut self, ctx: &SchedCtx) -> Result<Dispatch, SchedError> {
        let &(_, pid) = self.tree.first().ok_or(SchedError::EmptyReadySet)?;
        let slice = self.dispatch(pid, ctx)?;
        Ok(Dispatch { pid, slice })
    }

    fn on_deschedule(&mut self, pid: Pid, ran: SimTime, why: Deschedule, ctx: &SchedCtx) {
        if self.current == Some(pid) {
            self.current = None;
        }
        let Some(e) = self.ents.get_mut(&pid) else {
            return;
        };
        e.vruntime += match e.grant.take() {
            Some((slice, virt)) if ran == slice => virt,
            _ => Self::scaled(ran, e.weight),
        };
        let v = e.vruntime;
        if why == Deschedule::Left {
            e.slept_at = ctx.now;
        } else {
            e.queued = true;
            self.tree.insert((v, pid));
        }
        if let Some((left, _)) = self.tree.first() {
            self.min_vruntime = self.min_vruntime.max(*left);
        }
    }

    fn ready_len(&self) -> usize {
        self.tree.len()
    }

    fn set_nice(&mut self, pid: Pid, nice: i32) {
        if let (Some(e), Ok(w)) = (self.ents.get_mut(&pid), nice_to_weight(nice)) {
            e.nice = nice;
            e.weight = w;
        }
    }

    fn vruntime_of(&self, pid: Pid) -> Option<f64> {
        self.ents
            .get(&pid)
            .map(|e| e.vruntime as f64 / VR_PER_US as f64)
    }
}
