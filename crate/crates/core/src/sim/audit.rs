//! Recomputes request unhappiness from a raw trace, without the ledger.

use std::collections::BTreeMap;

use super::trace::{EventKind, Trace};
use crate::model::{Accounting, Pid, RequestId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RequestTimes {
    pub arrival: SimTime,
    pub settle: Option<SimTime>,
    /// CPU time any process spent on this request.
    pub running: SimTime,
    /// Part of `running` spent in dispatches that ended before the work did.
    pub cut_short: SimTime,
}

impl RequestTimes {
    /// Unweighted unhappiness at settle, or `None` while open.
    pub fn unhappiness(&self, mode: Accounting) -> Option<f64> {
        let settle = self.settle?;
        let waiting = (settle - self.arrival).as_us() as f64 - self.running.as_us() as f64;
        Some(match mode {
            Accounting::NetWait => waiting,
            Accounting::WaitMinusRun => waiting - self.cut_short.as_us() as f64,
        })
    }
}

pub fn request_times(trace: &Trace) -> BTreeMap<RequestId, RequestTimes> {
    let mut out: BTreeMap<RequestId, RequestTimes> = BTreeMap::new();
    let mut on_cpu: BTreeMap<Pid, (SimTime, Option<RequestId>)> = BTreeMap::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Arrive => {
                if let Some(r) = e.req {
                    out.entry(r).or_default().arrival = e.time;
                }
            }
            EventKind::Settle => {
                if let Some(r) = e.req {
                    out.entry(r).or_default().settle = Some(e.time);
                }
            }
            EventKind::Dispatch => {
                if let Some(p) = e.pid {
                    on_cpu.insert(p, (e.time, e.req));
                }
            }
            EventKind::Preempt | EventKind::Complete | EventKind::Exit => {
                let Some((start, req)) = e.pid.and_then(|p| on_cpu.remove(&p)) else {
                    continue;
                };
                if let Some(r) = req {
                    let t = out.entry(r).or_default();
                    let ran = e.time - start;
                    t.running += ran;
                    if e.kind == EventKind::Preempt {
                        t.cut_short += ran;
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Unweighted unhappiness of every settled request, as implied by the trace.
pub fn audit(trace: &Trace, mode: Accounting) -> BTreeMap<RequestId, f64> {
    request_times(trace)
        .into_iter()
        .filter_map(|(r, t)| t.unhappiness(mode).map(|u| (r, u)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_trace() {
        // one quantum lost to a hog, then two quanta for the request, the
        // first cut short
        let text = "\
0 arrive 1 1 unix
0 dispatch 2 - 10
10 preempt 2 - expired
10 dispatch 1 1 10
20 preempt 1 1 expired
20 dispatch 2 - 10
30 preempt 2 - expired
30 dispatch 1 1 10
40 complete 1 1 0
40 settle 1 1 10
";
        let t = Trace::parse(text).unwrap();
        let times = request_times(&t)[&RequestId(1)];
        assert_eq!(times.running, SimTime(20));
        assert_eq!(times.cut_short, SimTime(10));
        assert_eq!(audit(&t, Accounting::NetWait)[&RequestId(1)], 20.0);
        assert_eq!(audit(&t, Accounting::WaitMinusRun)[&RequestId(1)], 10.0);
    }
}
