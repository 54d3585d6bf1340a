use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Accounting, Customer, CustomerId, ModelConfig, Pid, Request, RequestId, ServiceCall};
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("no ledger entry for request {req} at process {pid}")]
    MissingEntry { req: RequestId, pid: Pid },
    #[error("unknown request {0}")]
    UnknownRequest(RequestId),
    #[error("request {0} already exists")]
    DuplicateRequest(RequestId),
    #[error("unknown customer {0}")]
    UnknownCustomer(CustomerId),
    #[error("customer {0} already registered")]
    DuplicateCustomer(CustomerId),
    #[error("customer weight must be positive, got {0}")]
    BadCustomerWeight(f64),
    #[error("request weight must be positive, got {0}")]
    BadRequestWeight(f64),
    #[error("time step must be positive")]
    ZeroStep,
    #[error("alpha {0} out of range [0, 0.5)")]
    AlphaOutOfRange(f64),
    #[error("request {req}: {detail}")]
    State { req: RequestId, detail: String },
}

fn state_err(req: RequestId, detail: impl Into<String>) -> LedgerError {
    LedgerError::State {
        req,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryState {
    /// Accrues with time; held by the process currently responsible.
    Active,
    /// Requester waiting on a service call; value is held constant.
    Frozen,
    /// Passed back to the requester or settled; value is zero.
    Released,
}

/// One u value for a (request, process) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub u: f64,
    pub state: EntryState,
}

impl Entry {
    fn active(u: f64) -> Self {
        Entry {
            u,
            state: EntryState::Active,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.state == EntryState::Frozen
    }

    pub fn is_active(&self) -> bool {
        self.state == EntryState::Active
    }
}

/// Per-(request, process) unhappiness values plus the request and customer
/// records they are weighted by.
///
/// Values are in microseconds. In `WaitMinusRun` mode they may go negative and
/// are kept raw; [`UnhappinessLedger::request_unhappiness_clamped`] offers the
/// non-negative view.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct UnhappinessLedger {
    config: ModelConfig,
    customers: BTreeMap<CustomerId, Customer>,
    requests: BTreeMap<RequestId, Request>,
    entries: BTreeMap<RequestId, BTreeMap<Pid, Entry>>,
    open: BTreeSet<RequestId>,
    /// Synthetic start-up unhappiness handed to newly created processes by the
    /// appeasement scheduler. Not attributed to any customer.
    bootstrap: BTreeMap<Pid, f64>,
    /// Active holder of every open request, and how many each process holds.
    holder_of: BTreeMap<RequestId, Pid>,
    held: BTreeMap<Pid, u32>,
    /// Requester value before each open split and the part handed over, by
    /// servicer, so an immediate merge gives the old value back bit for bit.
    handoffs: BTreeMap<RequestId, BTreeMap<Pid, (f64, f64)>>,
}

impl UnhappinessLedger {
    pub fn new(config: ModelConfig) -> Result<Self, LedgerError> {
        config.check()?;
        Ok(UnhappinessLedger {
            config,
            ..Default::default()
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn add_customer(&mut self, customer: Customer) -> Result<(), LedgerError> {
        if !(customer.weight > 0.0) || !customer.weight.is_finite() {
            return Err(LedgerError::BadCustomerWeight(customer.weight));
        }
        if self.customers.contains_key(&customer.id) {
            return Err(LedgerError::DuplicateCustomer(customer.id));
        }
        self.customers.insert(customer.id, customer);
        Ok(())
    }

    pub fn customer(&self, id: CustomerId) -> Option<&Customer> {
        self.customers.get(&id)
    }

    pub fn customers(&self) -> impl Iterator<Item = &Customer> {
        self.customers.values()
    }

    /// Registers a newly arrived request and gives its target an active entry
    /// with u = 0.
    pub fn open_request(&mut self, request: Request) -> Result<(), LedgerError> {
        if !self.customers.contains_key(&request.customer) {
            return Err(LedgerError::UnknownCustomer(request.customer));
        }
        if !(request.weight > 0.0) || !request.weight.is_finite() {
            return Err(LedgerError::BadRequestWeight(request.weight));
        }
        if self.requests.contains_key(&request.id) {
            return Err(LedgerError::DuplicateRequest(request.id));
        }
        let id = request.id;
        let mut entries = BTreeMap::new();
        entries.insert(request.target, Entry::active(0.0));
        self.entries.insert(id, entries);
        self.requests.insert(id, request);
        self.open.insert(id);
        self.reindex(id);
        Ok(())
    }

    fn reindex(&mut self, req: RequestId) {
        if let Some(old) = self.holder_of.remove(&req) {
            if let Some(n) = self.held.get_mut(&old) {
                *n -= 1;
                if *n == 0 {
                    self.held.remove(&old);
                }
            }
        }
        if !self.open.contains(&req) {
            return;
        }
        if let Some(new) = self.holder(req) {
            self.holder_of.insert(req, new);
            *self.held.entry(new).or_default() += 1;
        }
    }

    pub fn request(&self, id: RequestId) -> Option<&Request> {
        self.requests.get(&id)
    }

    pub fn requests(&self) -> impl Iterator<Item = &Request> {
        self.requests.values()
    }

    /// Requests that have arrived and not yet been answered, in id order.
    pub fn open_requests(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.open.iter().copied()
    }

    pub fn is_open(&self, id: RequestId) -> bool {
        self.open.contains(&id)
    }

    pub fn entry(&self, req: RequestId, pid: Pid) -> Option<Entry> {
        self.entries.get(&req).and_then(|m| m.get(&pid)).copied()
    }

    pub fn entries(&self, req: RequestId) -> impl Iterator<Item = (Pid, Entry)> + '_ {
        self.entries
            .get(&req)
            .into_iter()
            .flat_map(|m| m.iter().map(|(p, e)| (*p, *e)))
    }

    /// The process holding the active entry of `req`, if any.
    pub fn holder(&self, req: RequestId) -> Option<Pid> {
        self.entries
            .get(&req)?
            .iter()
            .find(|(_, e)| e.is_active())
            .map(|(p, _)| *p)
    }

    fn entry_mut(&mut self, req: RequestId, pid: Pid) -> Result<&mut Entry, LedgerError> {
        self.entries
            .get_mut(&req)
            .and_then(|m| m.get_mut(&pid))
            .ok_or(LedgerError::MissingEntry { req, pid })
    }

    /// Advances one entry by `dt`. Waiting always adds `dt`; running subtracts
    /// `dt` in `WaitMinusRun` mode and leaves the value alone in `NetWait` mode.
    /// Frozen and released entries are not touched.
    pub fn accrue(
        &mut self,
        req: RequestId,
        pid: Pid,
        dt: SimTime,
        was_running: bool,
    ) -> Result<(), LedgerError> {
        if dt.is_zero() {
            return Err(LedgerError::ZeroStep);
        }
        let mode = self.config.accounting;
        let entry = self.entry_mut(req, pid)?;
        if !entry.is_active() {
            return Ok(());
        }
        let dt = dt.as_us() as f64;
        match (was_running, mode) {
            (false, _) => entry.u += dt,
            (true, Accounting::NetWait) => {}
            (true, Accounting::WaitMinusRun) => entry.u -= dt,
        }
        Ok(())
    }

    /// The requester blocks on `servicer`: it keeps alpha * u, frozen, and the
    /// servicer takes over the rest as its active entry.
    pub fn split_on_block(
        &mut self,
        req: RequestId,
        requester: Pid,
        servicer: Pid,
        now: SimTime,
    ) -> Result<(), LedgerError> {
        if requester == servicer {
            return Err(state_err(req, "a process cannot request service from itself"));
        }
        let alpha = self.config.alpha;
        let map = self
            .entries
            .get_mut(&req)
            .ok_or(LedgerError::UnknownRequest(req))?;
        let u = match map.get(&requester) {
            Some(e) if e.is_active() => e.u,
            _ => {
                return Err(state_err(
                    req,
                    format!("process {requester} holds no active entry"),
                ))
            }
        };
        if let Some(e) = map.get(&servicer) {
            if e.state != EntryState::Released {
                return Err(state_err(
                    req,
                    format!("servicer {servicer} already holds an entry"),
                ));
            }
        }
        let kept = alpha * u;
        let handed = u - kept;
        map.insert(
            requester,
            Entry {
                u: kept,
                state: EntryState::Frozen,
            },
        );
        map.insert(servicer, Entry::active(handed));
        self.handoffs.entry(req).or_default().insert(servicer, (u, handed));
        let request = self
            .requests
            .get_mut(&req)
            .ok_or(LedgerError::UnknownRequest(req))?;
        request.chain.push(ServiceCall {
            requester,
            servicer,
            opened: now,
            closed: None,
        });
        self.reindex(req);
        Ok(())
    }

    /// The servicer answers: its value is added back onto the requester, which
    /// becomes active again, and the servicer's entry drops to zero.
    pub fn merge_on_unblock(
        &mut self,
        req: RequestId,
        requester: Pid,
        servicer: Pid,
        now: SimTime,
    ) -> Result<(), LedgerError> {
        let map = self
            .entries
            .get_mut(&req)
            .ok_or(LedgerError::UnknownRequest(req))?;
        let frozen = match map.get(&requester) {
            Some(e) if e.is_frozen() => e.u,
            _ => {
                return Err(state_err(
                    req,
                    format!("requester {requester} is not frozen"),
                ))
            }
        };
        let passed = match map.get(&servicer) {
            Some(e) if e.is_active() => e.u,
            _ => {
                return Err(state_err(
                    req,
                    format!("servicer {servicer} holds no active entry"),
                ))
            }
        };
        let merged = match self.handoffs.get_mut(&req).and_then(|h| h.remove(&servicer)) {
            Some((before, handed)) => before + (passed - handed),
            None => frozen + passed,
        };
        map.insert(requester, Entry::active(merged));
        map.insert(
            servicer,
            Entry {
                u: 0.0,
                state: EntryState::Released,
            },
        );
        let request = self
            .requests
            .get_mut(&req)
            .ok_or(LedgerError::UnknownRequest(req))?;
        let call = request
            .chain
            .iter_mut()
            .rev()
            .find(|c| c.is_open() && c.requester == requester && c.servicer == servicer)
            .ok_or_else(|| state_err(req, "no matching open service call"))?;
        call.closed = Some(now);
        self.reindex(req);
        Ok(())
    }

    /// Records the response to the customer and returns the request's
    /// unhappiness at that instant. All entries are zeroed afterwards.
    pub fn settle_response(&mut self, req: RequestId, now: SimTime) -> Result<f64, LedgerError> {
        let request = self
            .requests
            .get(&req)
            .ok_or(LedgerError::UnknownRequest(req))?;
        if request.is_settled() {
            return Err(state_err(req, "already settled"));
        }
        if request.has_open_call() {
            return Err(state_err(req, "service call still open"));
        }
        if now < request.arrival {
            return Err(state_err(req, "response precedes arrival"));
        }
        let realized = self.request_unhappiness(req)?;
        if let Some(map) = self.entries.get_mut(&req) {
            for e in map.values_mut() {
                e.u = 0.0;
                e.state = EntryState::Released;
            }
        }
        if let Some(r) = self.requests.get_mut(&req) {
            r.response = Some(now);
        }
        self.open.remove(&req);
        self.handoffs.remove(&req);
        self.reindex(req);
        Ok(realized)
    }

    fn raw_sum(&self, req: RequestId) -> f64 {
        self.entries
            .get(&req)
            .map(|m| m.values().map(|e| e.u).sum())
            .unwrap_or(0.0)
    }

    /// W(c) * w * sum of u over every process touched by the request,
    /// frozen entries included.
    pub fn request_unhappiness(&self, req: RequestId) -> Result<f64, LedgerError> {
        let request = self
            .requests
            .get(&req)
            .ok_or(LedgerError::UnknownRequest(req))?;
        let customer = self
            .customers
            .get(&request.customer)
            .ok_or(LedgerError::UnknownCustomer(request.customer))?;
        Ok(customer.weight * request.weight * self.raw_sum(req))
    }

    pub fn request_unhappiness_clamped(&self, req: RequestId) -> Result<f64, LedgerError> {
        self.request_unhappiness(req).map(|u| u.max(0.0))
    }

    pub fn customer_unhappiness(&self, customer: CustomerId) -> f64 {
        let Some(c) = self.customers.get(&customer) else {
            return 0.0;
        };
        let inner: f64 = self
            .requests
            .values()
            .filter(|r| r.customer == customer)
            .map(|r| r.weight * self.raw_sum(r.id))
            .sum();
        c.weight * inner
    }

    pub fn system_unhappiness(&self) -> f64 {
        self.customers
            .keys()
            .map(|c| self.customer_unhappiness(*c))
            .sum()
    }

    /// System unhappiness restricted to open requests; equal to
    /// [`Self::system_unhappiness`] because settled requests carry zeros, but
    /// cheaper on long runs.
    pub fn open_unhappiness(&self) -> f64 {
        self.open
            .iter()
            .filter_map(|r| self.request_unhappiness(*r).ok())
            .sum()
    }

    pub fn set_bootstrap(&mut self, pid: Pid, u: f64) {
        if u > 0.0 {
            self.bootstrap.insert(pid, u);
        } else {
            self.bootstrap.remove(&pid);
        }
    }

    pub fn bootstrap(&self, pid: Pid) -> Option<f64> {
        self.bootstrap.get(&pid).copied()
    }

    pub fn bootstrap_entries(&self) -> impl Iterator<Item = (Pid, f64)> + '_ {
        self.bootstrap.iter().map(|(p, u)| (*p, *u))
    }

    /// Burns `ran` off a bootstrap entry; it is removed once it reaches zero.
    pub fn decay_bootstrap(&mut self, pid: Pid, ran: SimTime) {
        if let Some(u) = self.bootstrap.get_mut(&pid) {
            *u -= ran.as_us() as f64;
            if *u <= 0.0 {
                self.bootstrap.remove(&pid);
            }
        }
    }

    /// Whether `pid` counts as unhappy for the two-queue scheduler: it holds
    /// the active entry of an unanswered request, or a positive bootstrap
    /// value.
    pub fn is_unhappy(&self, pid: Pid) -> bool {
        self.bootstrap.contains_key(&pid) || self.held.contains_key(&pid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REQ: RequestId = RequestId(1);
    const PJ: Pid = Pid(1);
    const PS: Pid = Pid(2);

    fn ledger(alpha: f64, accounting: Accounting) -> UnhappinessLedger {
        let mut l = UnhappinessLedger::new(ModelConfig { alpha, accounting }).unwrap();
        l.add_customer(Customer {
            id: CustomerId(0),
            weight: 1.0,
        })
        .unwrap();
        l.open_request(Request::new(REQ, CustomerId(0), 1.0, PJ, SimTime::ZERO))
            .unwrap();
        l
    }

    fn with_u(l: &mut UnhappinessLedger, u: u64) {
        if u > 0 {
            l.accrue(REQ, PJ, SimTime(u), false).unwrap();
        }
    }

    #[test]
    fn accrue_waiting_is_linear_in_both_modes() {
        for mode in [Accounting::NetWait, Accounting::WaitMinusRun] {
            let mut l = ledger(0.0, mode);
            with_u(&mut l, 5);
            l.accrue(REQ, PJ, SimTime(3), false).unwrap();
            assert_eq!(l.entry(REQ, PJ).unwrap().u, 8.0);
        }
    }

    #[test]
    fn accrue_running_depends_on_mode() {
        let mut l = ledger(0.0, Accounting::NetWait);
        with_u(&mut l, 5);
        l.accrue(REQ, PJ, SimTime(3), true).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 5.0);

        let mut l = ledger(0.0, Accounting::WaitMinusRun);
        with_u(&mut l, 5);
        l.accrue(REQ, PJ, SimTime(3), true).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 2.0);
    }

    #[test]
    fn accrue_errors() {
        let mut l = ledger(0.0, Accounting::NetWait);
        assert_eq!(
            l.accrue(REQ, PJ, SimTime::ZERO, false),
            Err(LedgerError::ZeroStep)
        );
        assert!(matches!(
            l.accrue(REQ, PS, SimTime(1), false),
            Err(LedgerError::MissingEntry { .. })
        ));
    }

    #[test]
    fn split_examples() {
        let mut l = ledger(0.0, Accounting::WaitMinusRun);
        with_u(&mut l, 10);
        l.split_on_block(REQ, PJ, PS, SimTime(10)).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 0.0);
        assert!(l.entry(REQ, PJ).unwrap().is_frozen());
        assert_eq!(l.entry(REQ, PS).unwrap().u, 10.0);
        assert_eq!(l.request(REQ).unwrap().chain.len(), 1);

        let mut l = ledger(0.4, Accounting::WaitMinusRun);
        with_u(&mut l, 10);
        l.split_on_block(REQ, PJ, PS, SimTime(10)).unwrap();
        assert!((l.entry(REQ, PJ).unwrap().u - 4.0).abs() < 1e-12);
        assert!((l.entry(REQ, PS).unwrap().u - 6.0).abs() < 1e-12);

        let mut l = ledger(0.3, Accounting::WaitMinusRun);
        l.split_on_block(REQ, PJ, PS, SimTime(0)).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 0.0);
        assert_eq!(l.entry(REQ, PS).unwrap().u, 0.0);
    }

    #[test]
    fn split_requires_active_requester() {
        let mut l = ledger(0.0, Accounting::WaitMinusRun);
        l.split_on_block(REQ, PJ, PS, SimTime(0)).unwrap();
        assert!(matches!(
            l.split_on_block(REQ, PJ, Pid(3), SimTime(0)),
            Err(LedgerError::State { .. })
        ));
    }

    #[test]
    fn merge_examples() {
        let mut l = ledger(0.4, Accounting::WaitMinusRun);
        with_u(&mut l, 10);
        l.split_on_block(REQ, PJ, PS, SimTime(10)).unwrap();
        l.merge_on_unblock(REQ, PJ, PS, SimTime(10)).unwrap();
        let pj = l.entry(REQ, PJ).unwrap();
        assert!(pj.is_active());
        assert!((pj.u - 10.0).abs() < 1e-12);
        assert_eq!(l.entry(REQ, PS).unwrap().u, 0.0);
        assert!(!l.request(REQ).unwrap().has_open_call());

        let mut l = ledger(0.0, Accounting::WaitMinusRun);
        l.split_on_block(REQ, PJ, PS, SimTime(0)).unwrap();
        l.accrue(REQ, PS, SimTime(12), false).unwrap();
        l.merge_on_unblock(REQ, PJ, PS, SimTime(12)).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 12.0);
        assert_eq!(l.entry(REQ, PS).unwrap().u, 0.0);
    }

    #[test]
    fn split_then_merge_is_identity() {
        // alpha * u + (1 - alpha) * u = u
        let mut l = ledger(0.2, Accounting::WaitMinusRun);
        with_u(&mut l, 10);
        l.split_on_block(REQ, PJ, PS, SimTime(10)).unwrap();
        l.merge_on_unblock(REQ, PJ, PS, SimTime(10)).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 10.0);
    }

    #[test]
    fn merge_requires_frozen_requester() {
        let mut l = ledger(0.0, Accounting::WaitMinusRun);
        assert!(matches!(
            l.merge_on_unblock(REQ, PJ, PS, SimTime(0)),
            Err(LedgerError::State { .. })
        ));
    }

    #[test]
    fn settle_examples() {
        let mut l = ledger(0.0, Accounting::WaitMinusRun);
        with_u(&mut l, 8);
        assert_eq!(l.settle_response(REQ, SimTime(8)).unwrap(), 8.0);
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 0.0);
        assert_eq!(l.request_unhappiness(REQ).unwrap(), 0.0);
        assert!(matches!(
            l.settle_response(REQ, SimTime(9)),
            Err(LedgerError::State { .. })
        ));

        let mut l = UnhappinessLedger::new(ModelConfig::default()).unwrap();
        l.add_customer(Customer {
            id: CustomerId(7),
            weight: 2.0,
        })
        .unwrap();
        l.open_request(Request::new(REQ, CustomerId(7), 0.5, PJ, SimTime(0)))
            .unwrap();
        l.accrue(REQ, PJ, SimTime(3), false).unwrap();
        l.split_on_block(REQ, PJ, PS, SimTime(3)).unwrap();
        l.merge_on_unblock(REQ, PJ, PS, SimTime(3)).unwrap();
        // entries {PJ: 3, PS: 0}, W=2, w=0.5
        assert_eq!(l.settle_response(REQ, SimTime(3)).unwrap(), 3.0);
    }

    #[test]
    fn settle_rejects_open_call() {
        let mut l = ledger(0.0, Accounting::WaitMinusRun);
        l.split_on_block(REQ, PJ, PS, SimTime(0)).unwrap();
        assert!(l.settle_response(REQ, SimTime(1)).is_err());
    }

    fn two_entry_ledger(w_cust: f64, w_req: f64) -> UnhappinessLedger {
        let mut l = UnhappinessLedger::new(ModelConfig::default()).unwrap();
        l.add_customer(Customer {
            id: CustomerId(0),
            weight: w_cust,
        })
        .unwrap();
        l.open_request(Request::new(REQ, CustomerId(0), w_req, PJ, SimTime(0)))
            .unwrap();
        l.accrue(REQ, PJ, SimTime(4), false).unwrap();
        l.split_on_block(REQ, PJ, PS, SimTime(4)).unwrap();
        l.accrue(REQ, PS, SimTime(3), false).unwrap();
        // {PJ: 0 frozen, PS: 7}
        l
    }

    #[test]
    fn request_unhappiness_examples() {
        let l = ledger(0.0, Accounting::NetWait);
        assert_eq!(l.request_unhappiness(REQ).unwrap(), 0.0);

        // alpha 0.5 is out of range, so build {3, 4} with alpha = 0.25:
        // u = 4 -> PJ keeps 1, PS gets 3, PS accrues 3 more -> {1, 6} = 7.
        let mut l = UnhappinessLedger::new(ModelConfig {
            alpha: 0.25,
            accounting: Accounting::NetWait,
        })
        .unwrap();
        l.add_customer(Customer {
            id: CustomerId(0),
            weight: 1.0,
        })
        .unwrap();
        l.open_request(Request::new(REQ, CustomerId(0), 1.0, PJ, SimTime(0)))
            .unwrap();
        l.accrue(REQ, PJ, SimTime(4), false).unwrap();
        l.split_on_block(REQ, PJ, PS, SimTime(4)).unwrap();
        l.accrue(REQ, PS, SimTime(3), false).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u, 1.0);
        assert_eq!(l.request_unhappiness(REQ).unwrap(), 7.0);

        let l = two_entry_ledger(2.0, 3.0);
        assert_eq!(l.request_unhappiness(REQ).unwrap(), 42.0);
    }

    #[test]
    fn unknown_customer_is_rejected() {
        let mut l = UnhappinessLedger::new(ModelConfig::default()).unwrap();
        assert_eq!(
            l.open_request(Request::new(REQ, CustomerId(3), 1.0, PJ, SimTime(0))),
            Err(LedgerError::UnknownCustomer(CustomerId(3)))
        );
    }

    #[test]
    fn customer_and_system_sums() {
        let mut l = UnhappinessLedger::new(ModelConfig::default()).unwrap();
        assert_eq!(l.system_unhappiness(), 0.0);
        l.add_customer(Customer {
            id: CustomerId(0),
            weight: 1.0,
        })
        .unwrap();
        l.add_customer(Customer {
            id: CustomerId(1),
            weight: 1.0,
        })
        .unwrap();
        assert_eq!(l.customer_unhappiness(CustomerId(0)), 0.0);

        let reqs = [
            (RequestId(1), CustomerId(0), 2.0, 3),
            (RequestId(2), CustomerId(0), 1.0, 4),
            (RequestId(3), CustomerId(1), 1.0, 5),
        ];
        for (id, c, w, u) in reqs {
            l.open_request(Request::new(id, c, w, PJ, SimTime(0))).unwrap();
            l.accrue(id, PJ, SimTime(u), false).unwrap();
        }
        // 2 * 3 + 1 * 4
        assert_eq!(l.customer_unhappiness(CustomerId(0)), 10.0);
        assert_eq!(l.customer_unhappiness(CustomerId(1)), 5.0);
        assert_eq!(l.system_unhappiness(), 15.0);
        assert_eq!(l.open_unhappiness(), 15.0);
    }

    #[test]
    fn single_request_system_equals_request() {
        let mut l = ledger(0.0, Accounting::NetWait);
        with_u(&mut l, 9);
        assert_eq!(
            l.system_unhappiness(),
            l.request_unhappiness(REQ).unwrap()
        );
    }

    #[test]
    fn frozen_entries_ignore_accrual() {
        let mut l = ledger(0.3, Accounting::WaitMinusRun);
        with_u(&mut l, 10);
        l.split_on_block(REQ, PJ, PS, SimTime(10)).unwrap();
        let before = l.entry(REQ, PJ).unwrap().u.to_bits();
        l.accrue(REQ, PJ, SimTime(5), false).unwrap();
        l.accrue(REQ, PJ, SimTime(5), true).unwrap();
        assert_eq!(l.entry(REQ, PJ).unwrap().u.to_bits(), before);
    }

    #[test]
    fn alpha_range_is_enforced() {
        assert!(ModelConfig::new(0.5, Accounting::NetWait).is_err());
        assert!(ModelConfig::new(-0.1, Accounting::NetWait).is_err());
        assert!(ModelConfig::new(0.49, Accounting::NetWait).is_ok());
    }

    #[test]
    fn bootstrap_decays_to_removal() {
        let mut l = UnhappinessLedger::new(ModelConfig::default()).unwrap();
        l.set_bootstrap(PJ, 100.0);
        assert!(l.is_unhappy(PJ));
        l.decay_bootstrap(PJ, SimTime(60));
        assert_eq!(l.bootstrap(PJ), Some(40.0));
        l.decay_bootstrap(PJ, SimTime(40));
        assert!(!l.is_unhappy(PJ));
    }
}
