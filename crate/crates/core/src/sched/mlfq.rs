use std::collections::{BTreeMap, VecDeque};

use super::{check_nice, Deschedule, Dispatch, PolicyKind, SchedCtx, SchedError, Scheduler};
use crate::model::Pid;
use crate::time::SimTime;

/// Multilevel feedback queue with `m` levels. Level i grants 2^i * q and has
/// absolute priority over every level below it.
#[derive(Debug, Clone)]
pub struct Mlfq {
    q: SimTime,
    queues: Vec<VecDeque<Pid>>,
    level: BTreeMap<Pid, u32>,
    current: Option<Pid>,
}

impl Mlfq {
    pub fn new(m: u32, q: SimTime) -> Self {
        Mlfq {
            q,
            queues: vec![VecDeque::new(); m.max(1) as usize],
            level: BTreeMap::new(),
            current: None,
        }
    }

    pub fn levels(&self) -> u32 {
        self.queues.len() as u32
    }

    pub fn quantum(&self, level: u32) -> SimTime {
        SimTime(self.q.as_us() << level)
    }

    pub fn queue(&self, level: u32) -> impl Iterator<Item = Pid> + '_ {
        self.queues[level as usize].iter().copied()
    }

    fn is_queued(&self, pid: Pid) -> bool {
        self.queues.iter().any(|q| q.contains(&pid))
    }

    fn enqueue_at(&mut self, pid: Pid, level: u32) -> Result<(), SchedError> {
        if !self.level.contains_key(&pid) {
            return Err(SchedError::Unknown(pid));
        }
        if self.is_queued(pid) {
            return Err(SchedError::AlreadyReady(pid));
        }
        let level = level.min(self.levels() - 1);
        self.level.insert(pid, level);
        self.queues[level as usize].push_back(pid);
        Ok(())
    }

    fn outranks_current(&self, level: u32, ctx: &SchedCtx) -> bool {
        match ctx.running {
            Some((cur, _)) => self.level.get(&cur).is_some_and(|&l| level < l),
            None => false,
        }
    }
}

impl Scheduler for Mlfq {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Mlfq
    }

    fn register(&mut self, pid: Pid, nice: i32, level: u32) -> Result<(), SchedError> {
        check_nice(nice)?;
        self.level.insert(pid, level.min(self.levels() - 1));
        Ok(())
    }

    /// New processes enter at their registered level (0 unless declared).
    fn on_start(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        let level = *self.level.get(&pid).ok_or(SchedError::Unknown(pid))?;
        self.enqueue_at(pid, level)?;
        Ok(self.outranks_current(level, ctx))
    }

    /// Every wakeup re-enters at the tail of Q_0.
    fn on_wake(&mut self, pid: Pid, ctx: &SchedCtx) -> Result<bool, SchedError> {
        self.enqueue_at(pid, 0)?;
        Ok(self.outranks_current(0, ctx))
    }

    fn pick_next(&mut self, _ctx: &SchedCtx) -> Result<Dispatch, SchedError> {
        let (level, pid) = self
            .queues
            .iter_mut()
            .enumerate()
            .find_map(|(i, q)| q.pop_front().map(|p| (i as u32, p)))
            .ok_or(SchedError::EmptyReadySet)?;
        self.current = Some(pid);
        Ok(Dispatch {
            pid,
            slice: self.quantum(level),
        })
    }

    fn on_deschedule(&mut self, pid: Pid, _ran: SimTime, why: Deschedule, _ctx: &SchedCtx) {
        if self.current == Some(pid) {
            self.current = None;
        }
        let level = self.level.get(&pid).copied().unwrap_or(0);
        let next = match why {
            Deschedule::Expired => (level + 1).min(self.levels() - 1),
            Deschedule::Preempted | Deschedule::Yielded => level,
            Deschedule::Left => return,
        };
        self.level.insert(pid, next);
        self.queues[next as usize].push_back(pid);
    }

    fn ready_len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    fn level_of(&self, pid: Pid) -> Option<u32> {
        self.level.get(&pid).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::testutil::{ctx, ledger};

    #[test]
    fn lowest_nonempty_queue_first_with_doubling_quantum() {
        let l = ledger();
        let mut m = Mlfq::new(4, SimTime(10));
        m.register(Pid(1), 0, 2).unwrap();
        m.register(Pid(2), 0, 1).unwrap();
        m.on_start(Pid(1), &ctx(&l, 0)).unwrap();
        m.on_start(Pid(2), &ctx(&l, 0)).unwrap();
        let d = m.pick_next(&ctx(&l, 0)).unwrap();
        assert_eq!(d, Dispatch { pid: Pid(2), slice: SimTime(20) });
    }

    #[test]
    fn expiry_demotes_and_saturates() {
        let l = ledger();
        let mut m = Mlfq::new(3, SimTime(10));
        m.register(Pid(1), 0, 0).unwrap();
        m.on_start(Pid(1), &ctx(&l, 0)).unwrap();
        let mut slices = Vec::new();
        for _ in 0..4 {
            let d = m.pick_next(&ctx(&l, 0)).unwrap();
            slices.push(d.slice.as_us());
            m.on_deschedule(d.pid, d.slice, Deschedule::Expired, &ctx(&l, 0));
        }
        assert_eq!(slices, vec![10, 20, 40, 40]);
        assert_eq!(m.level_of(Pid(1)), Some(2));
    }

    #[test]
    fn wake_resets_to_top_level_and_preempts_lower_levels() {
        let l = ledger();
        let mut m = Mlfq::new(4, SimTime(10));
        m.register(Pid(1), 0, 3).unwrap();
        m.register(Pid(2), 0, 3).unwrap();
        m.on_start(Pid(1), &ctx(&l, 0)).unwrap();
        let d = m.pick_next(&ctx(&l, 0)).unwrap();
        let running = SchedCtx {
            now: SimTime(5),
            running: Some((d.pid, SimTime(5))),
            ledger: &l,
        };
        assert!(m.on_wake(Pid(2), &running).unwrap());
        assert_eq!(m.level_of(Pid(2)), Some(0));
    }
}
