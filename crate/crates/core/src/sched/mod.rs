//! Scheduling disciplines behind one interface driven by the event engine.
//!
//! Every scheduler owns its own ready structure. The engine tells it when a
//! process starts, wakes or leaves the CPU and asks it for the next dispatch;
//! the scheduler answers with a process and a granted slice.

mod appease;
mod fair;
mod mlfq;
mod rbpe;
mod rr;

pub use appease::Appeasement;
pub use fair::{cpu_share, nice_to_weight, FairShare, FairShareParams, ShareOfCpu, NICE_0_WEIGHT};
pub use mlfq::Mlfq;
pub use rbpe::{
    default_table, rbpe_decay, rbpe_lookup, rbpe_on_request, Eppl, EpplEntry, FairShareRbpe, Load,
    LoadEstimator, RbpeParams, RbpeRow, SocketKind,
};
pub use rr::RoundRobin;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Pid, UnhappinessLedger};
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("pick_next called with an empty ready set")]
    EmptyReadySet,
    #[error("process {0} is already ready")]
    AlreadyReady(Pid),
    #[error("process {0} is not registered with the scheduler")]
    Unknown(Pid),
    #[error("nice {0} outside [-20, 19]")]
    NiceOutOfRange(i32),
    #[error("invalid policy parameter: {0}")]
    BadParameter(String),
}

/// What the engine knows at a decision point.
#[derive(Clone, Copy)]
pub struct SchedCtx<'a> {
    pub now: SimTime,
    /// Process on the CPU, with the time it has run in the current dispatch.
    pub running: Option<(Pid, SimTime)>,
    pub ledger: &'a UnhappinessLedger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dispatch {
    pub pid: Pid,
    pub slice: SimTime,
}

/// Why a process left the CPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deschedule {
    /// Used its whole grant and still has work.
    Expired,
    /// Pushed off by a wakeup before the grant ran out.
    Preempted,
    /// Finished a piece of work and has more queued; stays runnable.
    Yielded,
    /// Blocked, went to sleep or exited.
    Left,
}

/// A nice-level change made by priority elevation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NiceChange {
    pub pid: Pid,
    pub from: i32,
    pub to: i32,
    pub delay: SimTime,
}

pub trait Scheduler: Send {
    fn kind(&self) -> PolicyKind;

    /// Makes `pid` known to the scheduler without queueing it.
    fn register(&mut self, pid: Pid, nice: i32, level: u32) -> Result<(), SchedError>;

    /// A newly created process becomes runnable. Returns whether the running
    /// process should be preempted.
    fn on_start(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError>;

    /// A sleeping or blocked process becomes runnable. Returns whether the
    /// running process should be preempted.
    fn on_wake(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError>;

    fn pick_next(&mut self, ctx: &SchedCtx) -> Result<Dispatch, SchedError>;

    fn on_deschedule(&mut self, pid: Pid, ran: SimTime, why: Deschedule, ctx: &SchedCtx);

    fn ready_len(&self) -> usize;

    /// Re-evaluated after every batch of events while something runs.
    fn recheck_preempt(&self, _ctx: &SchedCtx) -> bool {
        false
    }

    fn set_nice(&mut self, _pid: Pid, _nice: i32) {}

    /// Start-up unhappiness for a newly created process, if this discipline
    /// hands one out.
    fn bootstrap_u(&self, _ctx: &SchedCtx) -> Option<f64> {
        None
    }

    /// A process read a non-empty message from a socket.
    fn on_receive(&mut self, _pid: Pid, _kind: SocketKind, _now: SimTime) -> Option<NiceChange> {
        None
    }

    /// Period of the priority-decay sampler, if the discipline needs one.
    fn sample_period(&self) -> Option<SimTime> {
        None
    }

    fn on_sample(&mut self, _now: SimTime) -> Vec<NiceChange> {
        Vec::new()
    }

    fn on_load(&mut self, _runnable: u32, _dt: SimTime) {}

    fn load(&self) -> Option<Load> {
        None
    }

    /// Current MLFQ level, for disciplines that have one.
    fn level_of(&self, _pid: Pid) -> Option<u32> {
        None
    }

    /// Current virtual runtime in nice-0 microseconds.
    fn vruntime_of(&self, _pid: Pid) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Rr,
    Mlfq,
    Fairshare,
    FairshareRbpe,
    Appeasement,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Rr,
        PolicyKind::Mlfq,
        PolicyKind::Fairshare,
        PolicyKind::FairshareRbpe,
        PolicyKind::Appeasement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Rr => "rr",
            PolicyKind::Mlfq => "mlfq",
            PolicyKind::Fairshare => "fairshare",
            PolicyKind::FairshareRbpe => "fairshare_rbpe",
            PolicyKind::Appeasement => "appeasement",
        }
    }

    pub fn from_name(name: &str) -> Option<PolicyKind> {
        PolicyKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppeasementParams {
    #[serde(flatten)]
    pub fallback: FairShareParams,
    /// Start-up unhappiness for new processes; one fallback slice when absent.
    #[serde(default, rename = "bootstrap_u_us")]
    pub bootstrap_u: Option<f64>,
}

/// Scheduling discipline and its parameters, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchedulerPolicy {
    Rr {
        #[serde(rename = "q_us")]
        q: SimTime,
    },
    Mlfq {
        queues: u32,
        #[serde(rename = "q_us")]
        q: SimTime,
    },
    Fairshare(FairShareParams),
    FairshareRbpe(RbpeParams),
    Appeasement(AppeasementParams),
}

impl SchedulerPolicy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            SchedulerPolicy::Rr { .. } => PolicyKind::Rr,
            SchedulerPolicy::Mlfq { .. } => PolicyKind::Mlfq,
            SchedulerPolicy::Fairshare(_) => PolicyKind::Fairshare,
            SchedulerPolicy::FairshareRbpe(_) => PolicyKind::FairshareRbpe,
            SchedulerPolicy::Appeasement(_) => PolicyKind::Appeasement,
        }
    }

    pub fn validate(&self) -> Result<(), SchedError> {
        let bad = |m: &str| Err(SchedError::BadParameter(m.to_string()));
        match self {
            SchedulerPolicy::Rr { q } => {
                if q.is_zero() {
                    return bad("q must be positive");
                }
            }
            SchedulerPolicy::Mlfq { queues, q } => {
                if q.is_zero() {
                    return bad("q must be positive");
                }
                if *queues == 0 {
                    return bad("queue count must be at least 1");
                }
                if *queues > 32 {
                    return bad("queue count must be at most 32");
                }
            }
            SchedulerPolicy::Fairshare(p) => p.validate()?,
            SchedulerPolicy::FairshareRbpe(p) => p.validate()?,
            SchedulerPolicy::Appeasement(p) => {
                p.fallback.validate()?;
                if let Some(u) = p.bootstrap_u {
                    if !(u > 0.0) || !u.is_finite() {
                        return bad("bootstrap_u must be positive");
                    }
                }
            }
        }
        Ok(())
    }

    /// Fair-share parameters carried by this policy, if any.
    pub fn fair_params(&self) -> Option<&FairShareParams> {
        match self {
            SchedulerPolicy::Fairshare(p) => Some(p),
            SchedulerPolicy::FairshareRbpe(p) => Some(&p.fair),
            SchedulerPolicy::Appeasement(p) => Some(&p.fallback),
            _ => None,
        }
    }

    /// The same workload under another discipline. Shared parameters carry
    /// over; the rest take their defaults.
    pub fn with_kind(&self, kind: PolicyKind) -> SchedulerPolicy {
        if kind == self.kind() {
            return self.clone();
        }
        let fair = self.fair_params().cloned().unwrap_or_default();
        let q = match self {
            SchedulerPolicy::Rr { q } | SchedulerPolicy::Mlfq { q, .. } => *q,
            _ => SimTime::from_ms(10),
        };
        match kind {
            PolicyKind::Rr => SchedulerPolicy::Rr { q },
            PolicyKind::Mlfq => SchedulerPolicy::Mlfq { queues: 8, q },
            PolicyKind::Fairshare => SchedulerPolicy::Fairshare(fair),
            PolicyKind::FairshareRbpe => SchedulerPolicy::FairshareRbpe(RbpeParams {
                fair,
                ..RbpeParams::default()
            }),
            PolicyKind::Appeasement => SchedulerPolicy::Appeasement(AppeasementParams {
                fallback: fair,
                bootstrap_u: None,
            }),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Scheduler>, SchedError> {
        self.validate()?;
        Ok(match self {
            SchedulerPolicy::Rr { q } => Box::new(RoundRobin::new(*q)),
            SchedulerPolicy::Mlfq { queues, q } => Box::new(Mlfq::new(*queues, *q)),
            SchedulerPolicy::Fairshare(p) => Box::new(FairShare::new(p.clone())),
            SchedulerPolicy::FairshareRbpe(p) => Box::new(FairShareRbpe::new(p.clone())),
            SchedulerPolicy::Appeasement(p) => Box::new(Appeasement::new(p.clone())),
        })
    }
}

pub(crate) fn check_nice(nice: i32) -> Result<(), SchedError> {
    if (crate::model::NICE_MIN..=crate::model::NICE_MAX).contains(&nice) {
        Ok(())
    } else {
        Err(SchedError::NiceOutOfRange(nice))
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_json_round_trip() {
        let p: SchedulerPolicy =
            serde_json::from_str(r#"{"kind":"mlfq","queues":4,"q_us":1000}"#).unwrap();
        assert_eq!(
            p,
            SchedulerPolicy::Mlfq {
                queues: 4,
                q: SimTime(1000)
            }
        );
        let p: SchedulerPolicy =
            serde_json::from_str(r#"{"kind":"fairshare_rbpe","sch_lat_us":20000}"#).unwrap();
        assert_eq!(p.kind(), PolicyKind::FairshareRbpe);
        assert!(serde_json::from_str::<SchedulerPolicy>(r#"{"kind":"lottery"}"#).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(SchedulerPolicy::Rr { q: SimTime(0) }.validate().is_err());
        assert!(SchedulerPolicy::Mlfq {
            queues: 0,
            q: SimTime(1)
        }
        .validate()
        .is_err());
        assert!(SchedulerPolicy::Fairshare(FairShareParams {
            sch_lat: SimTime(0),
            ..Default::default()
        })
        .validate()
        .is_err());
    }

    #[test]
    fn with_kind_keeps_latency() {
        let p = SchedulerPolicy::Fairshare(FairShareParams {
            sch_lat: SimTime::from_ms(30),
            ..Default::default()
        });
        let r = p.with_kind(PolicyKind::FairshareRbpe);
        assert_eq!(r.fair_params().unwrap().sch_lat, SimTime::from_ms(30));
    }
}
