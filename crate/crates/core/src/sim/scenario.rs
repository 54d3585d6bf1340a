use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ModelConfig, Pid, NICE_MAX, NICE_MIN};
use crate::sched::{PolicyKind, SchedulerPolicy, SocketKind};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Free-form label carried into metrics files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub policy: SchedulerPolicy,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub processes: Vec<ProcessDecl>,
    #[serde(default)]
    pub customers: Vec<CustomerDecl>,
    #[serde(default)]
    pub workload: Vec<WorkItem>,
    #[serde(rename = "horizon_us")]
    pub horizon: SimTime,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessDecl {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub nice: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerDecl {
    pub id: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub process: u32,
    #[serde(rename = "cpu_us")]
    pub cpu: SimTime,
}

impl Segment {
    pub fn new(process: u32, cpu: SimTime) -> Self {
        Segment { process, cpu }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorkItem {
    /// CPU-bound processes that never block. With `demand_us` each one exits
    /// after using that much CPU; `level` pins the starting MLFQ queue.
    Hogs {
        #[serde(default, rename = "start_us")]
        start: SimTime,
        count: u32,
        #[serde(default)]
        nice: i32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<u32>,
        #[serde(default, rename = "demand_us", skip_serializing_if = "Option::is_none")]
        demand: Option<SimTime>,
    },
    Request {
        #[serde(rename = "at_us")]
        at: SimTime,
        #[serde(default)]
        customer: u32,
        #[serde(default = "one")]
        weight: f64,
        #[serde(default)]
        socket: SocketKind,
        chain: Vec<Segment>,
    },
    Stream {
        #[serde(default, rename = "start_us")]
        start: SimTime,
        #[serde(rename = "period_us")]
        period: SimTime,
        #[serde(default, rename = "jitter_us")]
        jitter: SimTime,
        #[serde(rename = "deadline_us")]
        deadline: SimTime,
        count: u32,
        #[serde(default)]
        customer: u32,
        #[serde(default = "one")]
        weight: f64,
        #[serde(default)]
        socket: SocketKind,
        chain: Vec<Segment>,
    },
}

impl WorkItem {
    pub fn hogs(start: SimTime, count: u32) -> Self {
        WorkItem::Hogs {
            start,
            count,
            nice: 0,
            level: None,
            demand: None,
        }
    }

    pub fn request(at: SimTime, chain: Vec<Segment>) -> Self {
        WorkItem::Request {
            at,
            customer: 0,
            weight: 1.0,
            socket: SocketKind::Unix,
            chain,
        }
    }

    pub fn chain(&self) -> Option<&[Segment]> {
        match self {
            WorkItem::Request { chain, .. } | WorkItem::Stream { chain, .. } => Some(chain),
            WorkItem::Hogs { .. } => None,
        }
    }
}

/// How the engine moves a request from one segment to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// The current process calls a new servicer and blocks.
    Call,
    /// The current servicer answers its caller.
    Return,
}

/// Checks the call structure of a chain: every segment after the first
/// either calls a process not already on the call stack or returns to the
/// immediate caller, and the last segment runs on the target.
pub fn chain_steps(chain: &[Segment]) -> Result<Vec<Step>, String> {
    let first = chain.first().ok_or("chain is empty")?;
    let mut stack = vec![first.process];
    let mut steps = Vec::with_capacity(chain.len().saturating_sub(1));
    for (i, seg) in chain.iter().enumerate().skip(1) {
        let top = *stack.last().expect("stack never empties");
        if seg.process == top {
            return Err(format!("segment {i} runs on the same process as the one before it"));
        }
        if stack.len() >= 2 && stack[stack.len() - 2] == seg.process {
            stack.pop();
            steps.push(Step::Return);
        } else if stack.contains(&seg.process) {
            return Err(format!(
                "segment {i} calls process {} which is already waiting in this chain",
                seg.process
            ));
        } else {
            stack.push(seg.process);
            steps.push(Step::Call);
        }
    }
    if stack.len() != 1 {
        return Err("chain must end back on its target with every call answered".into());
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Code {
    /// Malformed JSON or a value of the wrong shape.
    Parse,
    UnknownPolicy,
    UnresolvedProcess,
    AlphaRange,
    InvalidValue,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Parse => "E001",
            Code::UnknownPolicy => "E002",
            Code::UnresolvedProcess => "E003",
            Code::AlphaRange => "E004",
            Code::InvalidValue => "E005",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: Code,
    /// JSON path of the offending field, or `line:col` for parse errors.
    pub at: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: Code, at: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            at: at.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code.as_str(), self.at, self.message)
    }
}

impl std::error::Error for Diagnostic {}

impl Scenario {
    pub fn new(policy: SchedulerPolicy, horizon: SimTime) -> Self {
        Scenario {
            name: None,
            policy,
            model: ModelConfig::default(),
            processes: Vec::new(),
            customers: Vec::new(),
            workload: Vec::new(),
            horizon,
            seed: 0,
        }
    }

    /// Parses and validates scenario JSON.
    pub fn from_json_str(text: &str) -> Result<Scenario, Vec<Diagnostic>> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
            vec![Diagnostic::new(
                Code::Parse,
                format!("{}:{}", e.line(), e.column()),
                e.to_string(),
            )]
        })?;
        if let Some(kind) = value.pointer("/policy/kind") {
            let known = kind.as_str().and_then(PolicyKind::from_name).is_some();
            if !known {
                let names: Vec<_> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
                return Err(vec![Diagnostic::new(
                    Code::UnknownPolicy,
                    "policy.kind",
                    format!("unknown policy {kind}; expected one of {}", names.join(", ")),
                )]);
            }
        }
        let sc: Scenario = serde_json::from_str(text).map_err(|e| {
            vec![Diagnostic::new(
                Code::InvalidValue,
                format!("{}:{}", e.line(), e.column()),
                e.to_string(),
            )]
        })?;
        let diags = sc.validate();
        if diags.is_empty() {
            Ok(sc)
        } else {
            Err(diags)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Number of background hogs across all hog items.
    pub fn hog_count(&self) -> u32 {
        self.workload
            .iter()
            .map(|w| match w {
                WorkItem::Hogs { count, .. } => *count,
                _ => 0,
            })
            .sum()
    }

    /// Period of every stream item, keyed by its workload index.
    pub fn stream_periods(&self) -> BTreeMap<usize, SimTime> {
        self.workload
            .iter()
            .enumerate()
            .filter_map(|(i, w)| match w {
                WorkItem::Stream { period, .. } => Some((i, *period)),
                _ => None,
            })
            .collect()
    }

    /// First pid handed to hogs: one past the largest declared id.
    pub fn first_hog_pid(&self) -> Pid {
        Pid(self.processes.iter().map(|p| p.id).max().unwrap_or(0) + 1)
    }

    /// Referential and range checks. Empty means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut bad = |code, at: String, msg: String| out.push(Diagnostic::new(code, at, msg));

        if let Err(e) = self.policy.validate() {
            bad(Code::InvalidValue, "policy".into(), e.to_string());
        }
        if !(0.0..0.5).contains(&self.model.alpha) {
            bad(
                Code::AlphaRange,
                "model.alpha".into(),
                format!("alpha {} out of range [0, 0.5)", self.model.alpha),
            );
        }
        if self.horizon.is_zero() {
            bad(Code::InvalidValue, "horizon_us".into(), "horizon must be positive".into());
        }

        let mut pids = BTreeSet::new();
        for (i, p) in self.processes.iter().enumerate() {
            if p.id == 0 {
                bad(Code::InvalidValue, format!("processes[{i}].id"), "process ids start at 1".into());
            }
            if !pids.insert(p.id) {
                bad(Code::InvalidValue, format!("processes[{i}].id"), format!("duplicate process id {}", p.id));
            }
            if !(NICE_MIN..=NICE_MAX).contains(&p.nice) {
                bad(Code::InvalidValue, format!("processes[{i}].nice"), format!("nice {} outside [-20, 19]", p.nice));
            }
        }

        let mut custs = BTreeSet::new();
        for (i, c) in self.customers.iter().enumerate() {
            if !custs.insert(c.id) {
                bad(Code::InvalidValue, format!("customers[{i}].id"), format!("duplicate customer id {}", c.id));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                bad(Code::InvalidValue, format!("customers[{i}].weight"), "customer weight must be positive".into());
            }
        }
        if custs.is_empty() {
            custs.insert(0);
        }

        for (i, w) in self.workload.iter().enumerate() {
            let at = |f: &str| format!("workload[{i}].{f}");
            match w {
                WorkItem::Hogs { nice, level, demand, .. } => {
                    if !(NICE_MIN..=NICE_MAX).contains(nice) {
                        bad(Code::InvalidValue, at("nice"), format!("nice {nice} outside [-20, 19]"));
                    }
                    if let (Some(l), SchedulerPolicy::Mlfq { queues, .. }) = (level, &self.policy) {
                        if l >= queues {
                            bad(Code::InvalidValue, at("level"), format!("level {l} but only {queues} queues"));
                        }
                    }
                    if demand.is_some_and(|d| d.is_zero()) {
                        bad(Code::InvalidValue, at("demand_us"), "demand must be positive".into());
                    }
                }
                WorkItem::Request { customer, weight, chain, .. }
                | WorkItem::Stream { customer, weight, chain, .. } => {
                    if !custs.contains(customer) {
                        bad(Code::InvalidValue, at("customer"), format!("unknown customer {customer}"));
                    }
                    if !(*weight > 0.0 && weight.is_finite()) {
                        bad(Code::InvalidValue, at("weight"), "request weight must be positive".into());
                    }
                    for (k, s) in chain.iter().enumerate() {
                        if !pids.contains(&s.process) {
                            bad(
                                Code::UnresolvedProcess,
                                at(&format!("chain[{k}].process")),
                                format!("unresolved process reference {}", s.process),
                            );
                        }
                        if s.cpu.is_zero() {
                            bad(Code::InvalidValue, at(&format!("chain[{k}].cpu_us")), "segment CPU demand must be positive".into());
                        }
                    }
                    if let Err(e) = chain_steps(chain) {
                        bad(Code::InvalidValue, at("chain"), e);
                    }
                    if let WorkItem::Stream { period, .. } = w {
                        if period.is_zero() {
                            bad(Code::InvalidValue, at("period_us"), "period must be positive".into());
                        }
                    }
                }
            }
        }
        out
    }
}
