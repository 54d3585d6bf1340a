//! Discrete-event engine: runs a scenario under one scheduler and records
//! the trace and metrics.

pub mod audit;
mod engine;
pub mod metrics;
pub mod scenario;
pub mod trace;

pub use audit::{audit, request_times, RequestTimes};
pub use engine::{run, RunOutput};
pub use metrics::{deadline_metrics, percentile, DeadlineReport, Metrics, RequestRecord, Summary};
pub use scenario::{
    chain_steps, Code, CustomerDecl, Diagnostic, ProcessDecl, Scenario, Segment, Step, WorkItem,
};
pub use trace::{EventKind, Trace, TraceEvent};

use thiserror::Error;

use crate::model::{LedgerError, Pid};
use crate::sched::SchedError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", join(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("process {waiter} would wait on {on}, closing a cycle of blocked processes")]
    Deadlock { waiter: Pid, on: Pid },
    #[error("engine invariant broken: {0}")]
    Internal(String),
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
