use std::collections::{BTreeSet, VecDeque};

use super::{check_nice, Deschedule, Dispatch, PolicyKind, SchedCtx, SchedError, Scheduler};
use crate::model::Pid;
use crate::time::SimTime;

/// Fixed-quantum FIFO. Arrivals and expired processes go to the tail; a
/// running process is never preempted before its quantum ends.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    q: SimTime,
    queue: VecDeque<Pid>,
    known: BTreeSet<Pid>,
}

impl RoundRobin {
    pub fn new(q: SimTime) -> Self {
        RoundRobin {
            q,
            queue: VecDeque::new(),
            known: BTreeSet::new(),
        }
    }

    pub fn queue(&self) -> impl Iterator<Item = Pid> + '_ {
        self.queue.iter().copied()
    }

    fn enqueue(&mut self, pid: Pid) -> Result<(), SchedError> {
        if !self.known.contains(&pid) {
            return Err(SchedError::Unknown(pid));
        }
        if self.queue.contains(&pid) {
            return Err(SchedError::AlreadyReady(pid));
        }
        self.queue.push_back(pid);
        Ok(())
    }
}

impl Scheduler for RoundRobin {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Rr
    }

    fn register(&mut self, pid: Pid, nice: i32, _level: u32) -> Result<(), SchedError> {
        check_nice(nice)?;
        self.known.insert(pid);
        Ok(())
    }

    fn on_start(&mut self, pid: Pid, _ctx: &SchedCtx) -> Result<bool, SchedError> {
        self.enqueue(pid).map(|_| false)
    }

    fn on_wake(&mut self, pid: Pid, _ctx: &SchedCtx) -> Result<bool, SchedError> {
        self.enqueue(pid).map(|_| false)
    }

    fn pick_next(&mut self, _ctx: &SchedCtx) -> Result<Dispatch, SchedError> {
        let pid = self.queue.pop_front().ok_or(SchedError::EmptyReadySet)?;
        Ok(Dispatch { pid, slice: self.q })
    }

    fn on_deschedule(&mut self, pid: Pid, _ran: SimTime, why: Deschedule, _ctx: &SchedCtx) {
        if why != Deschedule::Left {
            self.queue.push_back(pid);
        }
    }

    fn ready_len(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::testutil::{ctx, ledger};

    fn rr_with(pids: &[u32]) -> RoundRobin {
        let l = ledger();
        let mut rr = RoundRobin::new(SimTime(100));
        for &p in pids {
            rr.register(Pid(p), 0, 0).unwrap();
            rr.on_start(Pid(p), &ctx(&l, 0)).unwrap();
        }
        rr
    }

    #[test]
    fn picks_fifo_head_with_quantum() {
        let l = ledger();
        let mut rr = rr_with(&[5, 9, 2]);
        let d = rr.pick_next(&ctx(&l, 0)).unwrap();
        assert_eq!(d, Dispatch { pid: Pid(5), slice: SimTime(100) });
    }

    #[test]
    fn wake_appends_to_tail() {
        let l = ledger();
        let mut rr = rr_with(&[7]);
        rr.register(Pid(3), 0, 0).unwrap();
        assert!(!rr.on_wake(Pid(3), &ctx(&l, 0)).unwrap());
        assert_eq!(rr.queue().collect::<Vec<_>>(), vec![Pid(7), Pid(3)]);
    }

    #[test]
    fn expiry_goes_to_tail() {
        let l = ledger();
        let mut rr = rr_with(&[1, 2]);
        let d = rr.pick_next(&ctx(&l, 0)).unwrap();
        rr.on_deschedule(d.pid, d.slice, Deschedule::Expired, &ctx(&l, 100));
        assert_eq!(rr.queue().collect::<Vec<_>>(), vec![Pid(2), Pid(1)]);
    }

    #[test]
    fn errors() {
        let l = ledger();
        let mut rr = rr_with(&[1]);
        assert_eq!(
            rr.on_wake(Pid(1), &ctx(&l, 0)),
            Err(SchedError::AlreadyReady(Pid(1)))
        );
        rr.pick_next(&ctx(&l, 0)).unwrap();
        assert_eq!(rr.pick_next(&ctx(&l, 0)), Err(SchedError::EmptyReadySet));
    }
}
