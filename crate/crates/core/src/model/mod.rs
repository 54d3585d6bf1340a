//! Domain types of the customer-appeasement model and the per-request
//! unhappiness ledger.

mod ledger;

pub use ledger::{Entry, LedgerError, UnhappinessLedger};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Pid(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CustomerId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RequestId(pub u64);

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for CustomerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lowest and highest nice levels accepted anywhere in the crate.
pub const NICE_MIN: i32 = -20;
pub const NICE_MAX: i32 = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessState {
    Sleeping,
    Ready,
    Running,
    Blocked { on: Pid },
}

/// A schedulable entity on the single simulated CPU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Process {
    pub id: Pid,
    pub state: ProcessState,
    pub nice: i32,
    pub cpu_received: SimTime,
    /// Weighted run time as maintained by the fair-share scheduler, in
    /// microseconds of nice-0 time.
    pub vruntime: f64,
    pub mlfq_level: u32,
    pub serving: Option<RequestId>,
}

impl Process {
    pub fn new(id: Pid, nice: i32) -> Self {
        Process {
            id,
            state: ProcessState::Sleeping,
            nice,
            cpu_received: SimTime::ZERO,
            vruntime: 0.0,
            mlfq_level: 0,
            serving: None,
        }
    }

    pub fn is_runnable(&self) -> bool {
        matches!(self.state, ProcessState::Ready | ProcessState::Running)
    }
}

/// An external requester; `weight` is W(c) in the request and customer sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: CustomerId,
    pub weight: f64,
}

/// A service request from one process to another on behalf of a customer
/// request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceCall {
    pub requester: Pid,
    pub servicer: Pid,
    pub opened: SimTime,
    pub closed: Option<SimTime>,
}

impl ServiceCall {
    pub fn is_open(&self) -> bool {
        self.closed.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub customer: CustomerId,
    /// Weight of this request for its customer (w in the sums).
    pub weight: f64,
    pub target: Pid,
    pub arrival: SimTime,
    pub response: Option<SimTime>,
    pub chain: Vec<ServiceCall>,
}

impl Request {
    pub fn new(
        id: RequestId,
        customer: CustomerId,
        weight: f64,
        target: Pid,
        arrival: SimTime,
    ) -> Self {
        Request {
            id,
            customer,
            weight,
            target,
            arrival,
            response: None,
            chain: Vec::new(),
        }
    }

    pub fn is_settled(&self) -> bool {
        self.response.is_some()
    }

    pub fn has_open_call(&self) -> bool {
        self.chain.iter().any(ServiceCall::is_open)
    }
}

/// How CPU time received while serving a request is charged against its
/// unhappiness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Elapsed time minus CPU time: only waiting accrues.
    NetWait,
    /// Waiting accrues and running time is subtracted on top.
    #[default]
    WaitMinusRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub accounting: Accounting,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            alpha: 0.0,
            accounting: Accounting::WaitMinusRun,
        }
    }
}

impl ModelConfig {
    pub fn new(alpha: f64, accounting: Accounting) -> Result<Self, LedgerError> {
        let cfg = ModelConfig { alpha, accounting };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), LedgerError> {
        if (0.0..0.5).contains(&self.alpha) {
            Ok(())
        } else {
            Err(LedgerError::AlphaOutOfRange(self.alpha))
        }
    }
}
