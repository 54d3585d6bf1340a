use std::cmp::Ordering;

use super::{
    AppeasementParams, Deschedule, Dispatch, FairShare, PolicyKind, SchedCtx, SchedError,
    Scheduler,
};
use crate::model::Pid;
use crate::time::SimTime;

/// Two-queue scheduler driven by the unhappiness ledger.
///
/// Processes the ledger reports as unhappy form the upper queue and always
/// run before anyone else. Among them the scheduler takes the open request
/// with the largest weighted unhappiness and runs the most unhappy runnable
/// process serving it. Everything else is left to a fair-share fallback,
/// which also keeps the vruntime bookkeeping for all processes.
#[derive(Debug, Clone)]
pub struct Appeasement {
    fallback: FairShare,
    bootstrap_u: Option<f64>,
}

impl Appeasement {
    pub fn new(params: AppeasementParams) -> Self {
        Appeasement {
            fallback: FairShare::new(params.fallback),
            bootstrap_u: params.bootstrap_u,
        }
    }

    pub fn fallback(&self) -> &FairShare {
        &self.fallback
    }

    /// Upper-queue choice, if any unhappy process is runnable.
    fn pick_unhappy(&self, ctx: &SchedCtx) -> Option<Pid> {
        let ledger = ctx.ledger;
        // requests rank ahead of start-up credit at equal score
        let mut groups: Vec<(f64, (u8, u64), Vec<(Pid, f64)>)> = ledger
            .open_requests()
            .map(|r| {
                let score = ledger.request_unhappiness(r).unwrap_or(0.0);
                let members = ledger
                    .entries(r)
                    .filter(|(_, e)| e.is_active())
                    .map(|(p, e)| (p, e.u))
                    .collect();
                (score, (0, r.0), members)
            })
            .collect();
        groups.extend(
            ledger
                .bootstrap_entries()
                .map(|(p, u)| (u, (1, u64::from(p.0)), vec![(p, u)])),
        );
        groups.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        groups.into_iter().find_map(|(_, _, members)| {
            members
                .into_iter()
                .filter(|(p, _)| self.fallback.is_queued(*p))
                .max_by(|a, b| {
                    a.1.partial_cmp(&b.1)
                        .unwrap_or(Ordering::Equal)
                        .then(b.0.cmp(&a.0))
                })
                .map(|(p, _)| p)
        })
    }

    fn any_unhappy_ready(&self, ctx: &SchedCtx) -> bool {
        self.fallback.ready().any(|p| ctx.ledger.is_unhappy(p))
    }

    fn running_unhappy(&self, ctx: &SchedCtx) -> Option<bool> {
        ctx.running.map(|(p, _)| ctx.ledger.is_unhappy(p))
    }

    fn wake_decision(&self, pid: Pid, fallback_says: bool, ctx: &SchedCtx) -> bool {
        match self.running_unhappy(ctx) {
            None => false,
            Some(true) => false,
            Some(false) => ctx.ledger.is_unhappy(pid) || fallback_says,
        }
    }
}

impl Scheduler for Appeasement {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Appeasement
    }

    fn register(&mut self, pid: Pid, nice: i32, level: u32) -> Result<(), SchedError> {
        self.fallback.register(pid, nice, level)
    }

    fn on_start(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        let f = self.fallback.on_start(pid, ctx)?;
        Ok(self.wake_decision(pid, f, ctx))
    }

    fn on_wake(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        let f = self.fallback.on_wake(pid, ctx)?;
        Ok(self.wake_decision(pid, f, ctx))
    }

    fn pick_next(&mut self, ctx: &SchedCtx) -> Result<Dispatch, SchedError> {
        match self.pick_unhappy(ctx) {
            Some(pid) => {
                let slice = self.fallback.dispatch(pid, ctx)?;
                Ok(Dispatch { pid, slice })
            }
            None => self.fallback.pick_next(ctx),
        }
    }

    fn on_deschedule(&mut self, pid: Pid, ran: SimTime, why: Deschedule, ctx: &SchedCtx) {
        self.fallback.on_deschedule(pid, ran, why, ctx)
    }

    fn ready_len(&self) -> usize {
        self.fallback.ready_len()
    }

    /// A happy process gives way as soon as an unhappy one is runnable.
    fn recheck_preempt(&self, ctx: &SchedCtx) -> bool {
        self.running_unhappy(ctx) == Some(false) && self.any_unhappy_ready(ctx)
    }

    fn set_nice(&mut self, pid: Pid, nice: i32) {
        self.fallback.set_nice(pid, nice)
    }

    /// The configured value, or one fallback slice with the newcomer counted.
    fn bootstrap_u(&self, ctx: &SchedCtx) -> Option<f64> {
        if let Some(u) = self.bootstrap_u {
            return Some(u);
        }
        let p = self.fallback.params();
        let n = self.fallback.ready_len() as u64 + u64::from(ctx.running.is_some()) + 1;
        let slice = SimTime(p.sch_lat.as_us() / n).max(p.min_granularity());
        Some(slice.as_us() as f64)
    }

    fn vruntime_of(&self, pid: Pid) -> Option<f64> {
        self.fallback.vruntime_of(pid)
    }
}
