use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{Metrics, RequestRecord};
use super::scenario::{chain_steps, Scenario, Segment, Step, WorkItem};
use super::trace::{EventKind, Trace};
use super::SimError;
use crate::model::{
    Customer, CustomerId, Pid, ProcessState, Request, RequestId, UnhappinessLedger,
};
use crate::sched::{Deschedule, NiceChange, PolicyKind, SchedCtx, Scheduler, SocketKind};
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub metrics: Metrics,
    /// Final ledger, with every settled request zeroed.
    pub ledger: UnhappinessLedger,
}

/// Runs a scenario to its horizon.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let diags = scenario.validate();
    if !diags.is_empty() {
        return Err(SimError::Invalid(diags));
    }
    let sched = scenario.policy.build()?;
    Engine::new(scenario, sched)?.run()
}

#[derive(Debug, Clone, Copy)]
struct Work {
    req: RequestId,
    seg: usize,
    remaining: SimTime,
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Server,
    /// `None` runs forever.
    Hog(Option<SimTime>),
}

#[derive(Debug)]
struct Proc {
    state: ProcessState,
    role: Role,
    inbox: VecDeque<Work>,
}

#[derive(Debug, Clone, Copy)]
struct Running {
    pid: Pid,
    start: SimTime,
    grant: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    HogStart(Pid),
    Arrival(usize),
    Sample,
}

#[derive(Debug, Clone)]
struct Chain {
    segments: Vec<Segment>,
    steps: Vec<Step>,
}

#[derive(Debug, Clone)]
struct Arrival {
    at: SimTime,
    item: usize,
    customer: CustomerId,
    weight: f64,
    socket: SocketKind,
    stream: Option<usize>,
    deadline: Option<SimTime>,
}

struct Engine {
    now: SimTime,
    horizon: SimTime,
    sched: Box<dyn Scheduler>,
    ledger: UnhappinessLedger,
    procs: BTreeMap<Pid, Proc>,
    chains: BTreeMap<usize, Chain>,
    arrivals: Vec<Arrival>,
    /// Chain item of every request, by id - 1.
    req_item: Vec<usize>,
    heap: BinaryHeap<Reverse<(SimTime, u64, Ev)>>,
    seq: u64,
    running: Option<Running>,
    /// Request whose holder is on the CPU working on it.
    running_req: Option<RequestId>,
    /// Time up to which each open request's waiting has been charged.
    synced: BTreeMap<RequestId, SimTime>,
    /// Keep every open request current at each step, for disciplines that
    /// read unhappiness values when deciding.
    eager: bool,
    sample_period: Option<SimTime>,
    trace: Trace,
    metrics: Metrics,
}

fn ctx<'a>(now: SimTime, running: &Option<Running>, ledger: &'a UnhappinessLedger) -> SchedCtx<'a> {
    SchedCtx {
        now,
        running: running.map(|r| (r.pid, now - r.start)),
        ledger,
    }
}

impl Engine {
    fn new(sc: &Scenario, mut sched: Box<dyn Scheduler>) -> Result<Engine, SimError> {
        let mut ledger = UnhappinessLedger::new(sc.model)?;
        if sc.customers.is_empty() {
            ledger.add_customer(Customer {
                id: CustomerId(0),
                weight: 1.0,
            })?;
        }
        for c in &sc.customers {
            ledger.add_customer(Customer {
                id: CustomerId(c.id),
                weight: c.weight,
            })?;
        }

        let mut procs = BTreeMap::new();
        for p in &sc.processes {
            sched.register(Pid(p.id), p.nice, 0)?;
            procs.insert(
                Pid(p.id),
                Proc {
                    state: ProcessState::Sleeping,
                    role: Role::Server,
                    inbox: VecDeque::new(),
                },
            );
        }

        let mut eng = Engine {
            now: SimTime::ZERO,
            horizon: sc.horizon,
            eager: sched.kind() == PolicyKind::Appeasement,
            sample_period: sched.sample_period(),
            sched,
            ledger,
            procs,
            chains: BTreeMap::new(),
            arrivals: Vec::new(),
            req_item: Vec::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            running: None,
            running_req: None,
            synced: BTreeMap::new(),
            trace: Trace::default(),
            metrics: Metrics {
                horizon: sc.horizon,
                hogs: sc.hog_count(),
                ..Default::default()
            },
        };

        let mut next_hog = sc.first_hog_pid().0;
        for (i, item) in sc.workload.iter().enumerate() {
            match item {
                WorkItem::Hogs {
                    start,
                    count,
                    nice,
                    level,
                    demand,
                } => {
                    for _ in 0..*count {
                        let pid = Pid(next_hog);
                        next_hog += 1;
                        eng.sched.register(pid, *nice, level.unwrap_or(0))?;
                        eng.procs.insert(
                            pid,
                            Proc {
                                state: ProcessState::Sleeping,
                                role: Role::Hog(*demand),
                                inbox: VecDeque::new(),
                            },
                        );
                        eng.push(*start, Ev::HogStart(pid));
                    }
                }
                WorkItem::Request {
                    at,
                    customer,
                    weight,
                    socket,
                    chain,
                } => {
                    eng.add_chain(i, chain);
                    eng.add_arrival(Arrival {
                        at: *at,
                        item: i,
                        customer: CustomerId(*customer),
                        weight: *weight,
                        socket: *socket,
                        stream: None,
                        deadline: None,
                    });
                }
                WorkItem::Stream {
                    start,
                    period,
                    jitter,
                    deadline,
                    count,
                    customer,
                    weight,
                    socket,
                    chain,
                } => {
                    eng.add_chain(i, chain);
                    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ ((i as u64) << 32));
                    for k in 0..*count as u64 {
                        let j = if jitter.is_zero() {
                            0
                        } else {
                            rng.gen_range(0..=jitter.as_us())
                        };
                        eng.add_arrival(Arrival {
                            at: *start + SimTime(k * period.as_us() + j),
                            item: i,
                            customer: CustomerId(*customer),
                            weight: *weight,
                            socket: *socket,
                            stream: Some(i),
                            deadline: Some(*deadline),
                        });
                    }
                }
            }
        }
        if let Some(p) = eng.sample_period {
            eng.push(p, Ev::Sample);
        }
        Ok(eng)
    }

    fn add_chain(&mut self, item: usize, segments: &[Segment]) {
        let steps = chain_steps(segments).expect("validated chain");
        self.chains.insert(
            item,
            Chain {
                segments: segments.to_vec(),
                steps,
            },
        );
    }

    fn add_arrival(&mut self, a: Arrival) {
        let idx = self.arrivals.len();
        let at = a.at;
        self.arrivals.push(a);
        self.push(at, Ev::Arrival(idx));
    }

    fn push(&mut self, at: SimTime, ev: Ev) {
        self.seq += 1;
        self.heap.push(Reverse((at, self.seq, ev)));
    }

    fn proc(&mut self, pid: Pid) -> &mut Proc {
        self.procs.get_mut(&pid).expect("pid resolved at validation")
    }

    fn emit(&mut self, kind: EventKind, pid: Option<Pid>, req: Option<RequestId>, detail: impl Into<String>) {
        self.trace.push(self.now, kind, pid, req, detail);
    }

    fn run(mut self) -> Result<RunOutput, SimError> {
        loop {
            let completion = self.running.map(|r| r.start + r.grant);
            let next_ev = self.heap.peek().map(|Reverse((t, _, _))| *t);
            let t = [completion, next_ev]
                .into_iter()
                .flatten()
                .min()
                .unwrap_or(self.horizon)
                .min(self.horizon);
            self.advance(t);
            if t >= self.horizon {
                break;
            }
            if self.eager {
                self.sync_all()?;
            }
            if completion == Some(t) {
                self.end_dispatch()?;
            }
            while let Some(Reverse((et, _, ev))) = self.heap.peek().copied() {
                if et != t {
                    break;
                }
                self.heap.pop();
                self.handle(ev)?;
            }
            if self.running.is_some() {
                let c = ctx(self.now, &self.running, &self.ledger);
                if self.sched.recheck_preempt(&c) {
                    self.preempt_running()?;
                }
            }
            if self.running.is_none() && self.sched.ready_len() > 0 {
                self.dispatch()?;
            }
            if let Some(r) = self.running {
                if !self.ledger.is_unhappy(r.pid) && self.unhappy_ready() {
                    self.metrics.precedence_violations += 1;
                }
            }
        }
        self.sync_all()?;
        Ok(RunOutput {
            trace: self.trace,
            metrics: self.metrics,
            ledger: self.ledger,
        })
    }

    fn advance(&mut self, t: SimTime) {
        let dt = t.saturating_sub(self.now);
        if dt.is_zero() {
            return;
        }
        let runnable = self.sched.ready_len() as u32 + u32::from(self.running.is_some());
        self.sched.on_load(runnable, dt);
        if let Some(l) = self.sched.load() {
            self.metrics.max_load = self.metrics.max_load.max(l.0);
        }
        match self.running {
            Some(r) => *self.metrics.cpu.entry(r.pid).or_default() += dt,
            None => self.metrics.idle += dt,
        }
        self.now = t;
    }

    /// Charges waiting time on `req` up to now.
    fn sync(&mut self, req: RequestId) -> Result<(), SimError> {
        let Some(since) = self.synced.get(&req).copied() else {
            return Ok(());
        };
        let dt = self.now.saturating_sub(since);
        if !dt.is_zero() && self.running_req != Some(req) {
            if let Some(h) = self.ledger.holder(req) {
                self.ledger.accrue(req, h, dt, false)?;
            }
        }
        self.synced.insert(req, self.now);
        Ok(())
    }

    fn sync_all(&mut self) -> Result<(), SimError> {
        let open: Vec<_> = self.synced.keys().copied().collect();
        for r in open {
            self.sync(r)?;
        }
        Ok(())
    }

    fn unhappy_ready(&self) -> bool {
        self.procs
            .iter()
            .any(|(p, pr)| pr.state == ProcessState::Ready && self.ledger.is_unhappy(*p))
    }

    fn record_unhappiness(&mut self) -> Result<(), SimError> {
        self.sync_all()?;
        let u = self.ledger.open_unhappiness();
        self.metrics.unhappiness.push((self.now, u));
        Ok(())
    }

    fn handle(&mut self, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::HogStart(pid) => {
                let c = ctx(self.now, &self.running, &self.ledger);
                if let Some(u) = self.sched.bootstrap_u(&c) {
                    self.ledger.set_bootstrap(pid, u);
                }
                self.proc(pid).state = ProcessState::Ready;
                self.emit(EventKind::Wake, Some(pid), None, "start");
                let c = ctx(self.now, &self.running, &self.ledger);
                if self.sched.on_start(pid, &c)? {
                    self.preempt_running()?;
                }
            }
            Ev::Arrival(idx) => self.arrive(idx)?,
            Ev::Sample => {
                for ch in self.sched.on_sample(self.now) {
                    self.emit(EventKind::Decay, Some(ch.pid), None, format!("{}->{}", ch.from, ch.to));
                }
                if let Some(p) = self.sample_period {
                    if self.now + p < self.horizon {
                        self.push(self.now + p, Ev::Sample);
                    }
                }
            }
        }
        Ok(())
    }

    fn arrive(&mut self, idx: usize) -> Result<(), SimError> {
        let a = self.arrivals[idx].clone();
        let first = self.chains[&a.item].segments[0];
        let target = Pid(first.process);
        let id = RequestId(self.req_item.len() as u64 + 1);
        self.req_item.push(a.item);
        self.ledger
            .open_request(Request::new(id, a.customer, a.weight, target, self.now))?;
        self.synced.insert(id, self.now);
        self.metrics.requests.push(RequestRecord {
            id,
            customer: a.customer,
            target,
            arrival: self.now,
            response: None,
            realized_u: None,
            stream: a.stream,
            deadline: a.deadline,
        });
        self.emit(EventKind::Arrive, Some(target), Some(id), a.socket.name());
        self.proc(target).inbox.push_back(Work {
            req: id,
            seg: 0,
            remaining: first.cpu,
        });
        self.receive(target, a.socket, Some(id));
        if self.proc(target).state == ProcessState::Sleeping {
            self.wake(target, Some(id))?;
        }
        self.record_unhappiness()
    }

    fn receive(&mut self, pid: Pid, kind: SocketKind, req: Option<RequestId>) {
        if let Some(NiceChange { from, to, .. }) = self.sched.on_receive(pid, kind, self.now) {
            self.emit(EventKind::Boost, Some(pid), req, format!("{from}->{to}"));
        }
    }

    fn wake(&mut self, pid: Pid, req: Option<RequestId>) -> Result<(), SimError> {
        self.proc(pid).state = ProcessState::Ready;
        self.emit(EventKind::Wake, Some(pid), req, "");
        let c = ctx(self.now, &self.running, &self.ledger);
        if self.sched.on_wake(pid, &c)? {
            self.preempt_running()?;
        }
        Ok(())
    }

    fn dispatch(&mut self) -> Result<(), SimError> {
        let c = ctx(self.now, &self.running, &self.ledger);
        let d = self.sched.pick_next(&c)?;
        if !self.ledger.is_unhappy(d.pid) && self.unhappy_ready_except(d.pid) {
            self.metrics.precedence_violations += 1;
        }
        let (remaining, req) = {
            let p = self.proc(d.pid);
            p.state = ProcessState::Running;
            match p.role {
                Role::Hog(rem) => (rem, None),
                Role::Server => {
                    let w = p
                        .inbox
                        .front()
                        .ok_or_else(|| SimError::Internal(format!("process {} dispatched with no work", d.pid)))?;
                    (Some(w.remaining), Some(w.req))
                }
            }
        };
        if let Some(r) = req {
            self.sync(r)?;
            self.running_req = Some(r);
        }
        let grant = remaining.map_or(d.slice, |w| w.min(d.slice)).max(SimTime(1));
        self.emit(EventKind::Dispatch, Some(d.pid), req, d.slice.as_us().to_string());
        self.running = Some(Running {
            pid: d.pid,
            start: self.now,
            grant,
        });
        Ok(())
    }

    fn unhappy_ready_except(&self, pid: Pid) -> bool {
        self.procs.iter().any(|(p, pr)| {
            *p != pid && pr.state == ProcessState::Ready && self.ledger.is_unhappy(*p)
        })
    }

    /// Takes the running process off the CPU, charging its CPU time to its
    /// work. Returns the pid, time run, and whether its work item finished.
    fn stop_running(&mut self) -> Result<(Pid, SimTime, bool), SimError> {
        let r = self
            .running
            .take()
            .ok_or_else(|| SimError::Internal("no running process".into()))?;
        let ran = self.now - r.start;
        self.ledger.decay_bootstrap(r.pid, ran);
        let done = {
            let p = self.proc(r.pid);
            p.state = ProcessState::Ready;
            match &mut p.role {
                Role::Hog(None) => false,
                Role::Hog(Some(rem)) => {
                    *rem = rem.saturating_sub(ran);
                    rem.is_zero()
                }
                Role::Server => {
                    let w = p.inbox.front_mut().expect("running server has work");
                    w.remaining = w.remaining.saturating_sub(ran);
                    w.remaining.is_zero()
                }
            }
        };
        if let Some(req) = self.running_req {
            self.sync(req)?;
            self.running_req = None;
            // Run time is only charged for dispatches that leave work behind.
            if !done && self.ledger.holder(req) == Some(r.pid) {
                self.ledger.accrue(req, r.pid, ran, true)?;
            }
        }
        Ok((r.pid, ran, done))
    }

    fn current_req(&self, pid: Pid) -> Option<RequestId> {
        self.procs[&pid].inbox.front().map(|w| w.req)
    }

    fn preempt_running(&mut self) -> Result<(), SimError> {
        if self.running.is_none() {
            return Ok(());
        }
        let (pid, ran, _) = self.stop_running()?;
        let req = self.current_req(pid);
        self.emit(EventKind::Preempt, Some(pid), req, "wakeup");
        let c = ctx(self.now, &self.running, &self.ledger);
        self.sched.on_deschedule(pid, ran, Deschedule::Preempted, &c);
        Ok(())
    }

    fn end_dispatch(&mut self) -> Result<(), SimError> {
        let (pid, ran, done) = self.stop_running()?;
        if !done {
            let req = self.current_req(pid);
            self.emit(EventKind::Preempt, Some(pid), req, "expired");
            let c = ctx(self.now, &self.running, &self.ledger);
            self.sched.on_deschedule(pid, ran, Deschedule::Expired, &c);
            return Ok(());
        }
        if matches!(self.procs[&pid].role, Role::Hog(_)) {
            self.proc(pid).state = ProcessState::Sleeping;
            self.emit(EventKind::Exit, Some(pid), None, "");
            let c = ctx(self.now, &self.running, &self.ledger);
            self.sched.on_deschedule(pid, ran, Deschedule::Left, &c);
            return Ok(());
        }
        let work = *self.procs[&pid].inbox.front().expect("server has work");
        let (req, seg) = (work.req, work.seg);
        self.emit(EventKind::Complete, Some(pid), Some(req), seg.to_string());
        let item = self.req_item[req.0 as usize - 1];
        let chain = self.chains[&item].clone();
        if seg + 1 == chain.segments.len() {
            return self.settle(pid, ran, req);
        }
        let next = chain.segments[seg + 1];
        let other = Pid(next.process);
        match chain.steps[seg] {
            Step::Call => {
                self.check_cycle(pid, other)?;
                self.ledger.split_on_block(req, pid, other, self.now)?;
                self.proc(pid).state = ProcessState::Blocked { on: other };
                self.emit(EventKind::Block, Some(pid), Some(req), other.0.to_string());
                let c = ctx(self.now, &self.running, &self.ledger);
                self.sched.on_deschedule(pid, ran, Deschedule::Left, &c);
                self.proc(other).inbox.push_back(Work {
                    req,
                    seg: seg + 1,
                    remaining: next.cpu,
                });
                self.receive(other, SocketKind::Unix, Some(req));
                if self.procs[&other].state == ProcessState::Sleeping {
                    self.wake(other, Some(req))?;
                }
            }
            Step::Return => {
                self.ledger.merge_on_unblock(req, other, pid, self.now)?;
                self.proc(pid).inbox.pop_front();
                self.leave_or_yield(pid, ran)?;
                {
                    let caller = self.proc(other);
                    let w = caller.inbox.front_mut().expect("blocked caller keeps its work");
                    w.seg = seg + 1;
                    w.remaining = next.cpu;
                }
                self.emit(EventKind::Unblock, Some(other), Some(req), pid.0.to_string());
                self.receive(other, SocketKind::Unix, Some(req));
                self.wake(other, Some(req))?;
            }
        }
        Ok(())
    }

    fn settle(&mut self, pid: Pid, ran: SimTime, req: RequestId) -> Result<(), SimError> {
        self.sync(req)?;
        let realized = self.ledger.settle_response(req, self.now)?;
        self.synced.remove(&req);
        let rec = &mut self.metrics.requests[req.0 as usize - 1];
        rec.response = Some(self.now);
        rec.realized_u = Some(realized);
        self.emit(EventKind::Settle, Some(pid), Some(req), realized.to_string());
        self.proc(pid).inbox.pop_front();
        self.leave_or_yield(pid, ran)?;
        self.record_unhappiness()
    }

    /// After finishing a work item: keep going on the next one, or sleep.
    fn leave_or_yield(&mut self, pid: Pid, ran: SimTime) -> Result<(), SimError> {
        let why = if self.procs[&pid].inbox.is_empty() {
            self.proc(pid).state = ProcessState::Sleeping;
            self.emit(EventKind::Sleep, Some(pid), None, "");
            Deschedule::Left
        } else {
            Deschedule::Yielded
        };
        let c = ctx(self.now, &self.running, &self.ledger);
        self.sched.on_deschedule(pid, ran, why, &c);
        Ok(())
    }

    fn check_cycle(&self, waiter: Pid, on: Pid) -> Result<(), SimError> {
        let mut cur = on;
        for _ in 0..=self.procs.len() {
            if cur == waiter {
                return Err(SimError::Deadlock { waiter, on });
            }
            match self.procs[&cur].state {
                ProcessState::Blocked { on } => cur = on,
                _ => return Ok(()),
            }
        }
        Err(SimError::Deadlock { waiter, on })
    }
}
