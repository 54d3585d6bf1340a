//! Ready-made scenarios: the oracle grids and the workload analogs used by
//! the acceptance suite and the command line.

use crate::model::{Accounting, ModelConfig};
use crate::sched::{
    AppeasementParams, FairShareParams, PolicyKind, RbpeParams, SchedulerPolicy, SocketKind,
};
use crate::sim::{ProcessDecl, Scenario, Segment, WorkItem};
use crate::time::SimTime;

/// Requester process in chain scenarios.
pub const FRONT: u32 = 1;
/// Service process called by the requester.
pub const BACK: u32 = 2;

fn servers(n: u32) -> Vec<ProcessDecl> {
    let names = ["front", "back"];
    (1..=n)
        .map(|id| ProcessDecl {
            id,
            name: names[(id - 1) as usize].to_string(),
            nice: 0,
        })
        .collect()
}

/// Front, back, front: the three-part chain.
pub fn three_part(first: SimTime, service: SimTime, last: SimTime) -> Vec<Segment> {
    vec![
        Segment::new(FRONT, first),
        Segment::new(BACK, service),
        Segment::new(FRONT, last),
    ]
}

/// One request against `n - 1` hogs, all starting at zero. Hogs are queued
/// ahead of the request.
pub fn chain_with_hogs(policy: SchedulerPolicy, n: u32, chain: Vec<Segment>, at: SimTime) -> Scenario {
    let procs = if chain.len() > 1 { 2 } else { 1 };
    let busy = chain.iter().map(|s| s.cpu).sum::<SimTime>();
    let mut sc = Scenario::new(policy, at + busy * u64::from(n + 2) * 4 + SimTime::from_secs(1));
    sc.processes = servers(procs);
    sc.workload = vec![WorkItem::hogs(SimTime::ZERO, n - 1), WorkItem::request(at, chain)];
    sc
}

pub fn rr(q: SimTime) -> SchedulerPolicy {
    SchedulerPolicy::Rr { q }
}

/// Direct request of `z` quanta behind `n - 1` round-robin hogs.
pub fn rr_direct(q: SimTime, z: u32, n: u32) -> Scenario {
    let mut sc = chain_with_hogs(rr(q), n, vec![Segment::new(FRONT, q * u64::from(z))], SimTime::ZERO);
    sc.name = Some(format!("rr-direct-q{}-z{z}-n{n}", q.as_us()));
    sc
}

pub fn rr_chain(q: SimTime, z: [u32; 3], n: u32) -> Scenario {
    let [a, b, c] = z.map(|z| q * u64::from(z));
    let mut sc = chain_with_hogs(rr(q), n, three_part(a, b, c), SimTime::ZERO);
    sc.name = Some(format!("rr-chain-q{}-z{}{}{}-n{n}", q.as_us(), z[0], z[1], z[2]));
    sc
}

/// Direct request of `z` base quanta entering the top queue, with
/// `a[i] - 1` competitors at level i. Each competitor uses exactly one
/// quantum of its level and leaves.
pub fn mlfq_direct(q: SimTime, a: &[u32], z: u32) -> Scenario {
    let queues = (a.len() as u32).max(1);
    let mut sc = Scenario::new(SchedulerPolicy::Mlfq { queues, q }, SimTime::ZERO);
    sc.processes = servers(1);
    let mut total = q * u64::from(z);
    for (i, &ai) in a.iter().enumerate() {
        let grant = q * (1u64 << i);
        total += grant * u64::from(ai.saturating_sub(1));
        sc.workload.push(WorkItem::Hogs {
            start: SimTime::ZERO,
            count: ai.saturating_sub(1),
            nice: 0,
            level: Some(i as u32),
            demand: Some(grant),
        });
    }
    sc.workload.push(WorkItem::request(SimTime::ZERO, vec![Segment::new(FRONT, q * u64::from(z))]));
    sc.horizon = total + SimTime::from_secs(1);
    sc.name = Some(format!("mlfq-direct-q{}-z{z}-a{a:?}", q.as_us()));
    sc
}

/// Three-part chain with no competition; every part restarts at the top.
pub fn mlfq_chain(q: SimTime, queues: u32, z: [u32; 3]) -> Scenario {
    let [a, b, c] = z.map(|z| q * u64::from(z));
    let mut sc = Scenario::new(SchedulerPolicy::Mlfq { queues, q }, a + b + c + SimTime::from_secs(1));
    sc.processes = servers(2);
    sc.workload = vec![WorkItem::request(SimTime::ZERO, three_part(a, b, c))];
    sc.name = Some(format!("mlfq-chain-z{}{}{}", z[0], z[1], z[2]));
    sc
}

pub fn fairshare(sch_lat: SimTime) -> SchedulerPolicy {
    SchedulerPolicy::Fairshare(FairShareParams::new(sch_lat))
}

/// Only hogs, one per entry of `nices`, for `periods` scheduling periods.
pub fn hogs_only(policy: SchedulerPolicy, nices: &[i32], periods: u64) -> Scenario {
    let lat = policy.fair_params().map_or(SimTime::from_ms(20), |p| p.sch_lat);
    let mut sc = Scenario::new(policy, lat * periods);
    sc.workload = nices
        .iter()
        .map(|&nice| WorkItem::Hogs {
            start: SimTime::ZERO,
            count: 1,
            nice,
            level: None,
            demand: None,
        })
        .collect();
    sc
}

/// Fair share where every waker counts as a short sleeper.
pub fn eager_sleepers(sch_lat: SimTime) -> FairShareParams {
    FairShareParams {
        sch_lat,
        sleeper_threshold: Some(SimTime::from_secs(3600)),
        min_granularity: None,
    }
}

/// Chain of `k[i]` whole slices per part, behind `n - 1` fair-share hogs,
/// measured as pure waiting.
pub fn cfs_chain(sch_lat: SimTime, n: u32, k: [u32; 3]) -> Scenario {
    let slice = sch_lat / u64::from(n);
    let [a, b, c] = k.map(|k| slice * u64::from(k));
    let mut sc = chain_with_hogs(
        SchedulerPolicy::Fairshare(eager_sleepers(sch_lat)),
        n,
        three_part(a, b, c),
        SimTime::ZERO,
    );
    sc.model = ModelConfig {
        alpha: 0.0,
        accounting: Accounting::NetWait,
    };
    sc.name = Some(format!("cfs-chain-n{n}-k{}{}{}", k[0], k[1], k[2]));
    sc
}

/// Boosted fair share with the load average pinned.
pub fn rbpe_held(fair: FairShareParams, load: u64) -> SchedulerPolicy {
    SchedulerPolicy::FairshareRbpe(RbpeParams {
        fair,
        held_load: Some(load),
        ..RbpeParams::default()
    })
}

/// A nice-`nice` hog among `n - 1` nice-0 hogs, under boosted fair share
/// at low load.
pub fn boosted_among_hogs(n: u32, nice: i32, periods: u64) -> Scenario {
    let mut nices = vec![nice];
    nices.extend(std::iter::repeat(0).take(n as usize - 1));
    let mut sc = hogs_only(rbpe_held(FairShareParams::default(), 0), &nices, periods);
    sc.name = Some(format!("boosted-n{n}-nice{nice}"));
    sc
}

/// `policy` with its discipline swapped for `kind`.
pub fn as_kind(policy: &SchedulerPolicy, kind: PolicyKind) -> SchedulerPolicy {
    policy.with_kind(kind)
}

pub fn appeasement(fallback: FairShareParams) -> SchedulerPolicy {
    SchedulerPolicy::Appeasement(AppeasementParams {
        fallback,
        bootstrap_u: None,
    })
}

/// Period, CPU per frame and deadline of the frame-stream analog.
pub const FRAME_PERIOD: SimTime = SimTime::from_ms(40);
pub const FRAME_CPU: SimTime = SimTime::from_ms(8);
pub const FRAME_DEADLINE: SimTime = SimTime::from_ms(100);
pub const FRAMES: u32 = 3750;

/// A server answering 25 frames a second over a local socket, each due
/// within 100ms, with `hogs` CPU-bound processes in the background.
pub fn frame_stream(policy: SchedulerPolicy, hogs: u32) -> Scenario {
    let mut sc = Scenario::new(policy, FRAME_PERIOD * u64::from(FRAMES) + SimTime::from_secs(1));
    sc.processes = servers(1);
    sc.workload = vec![
        WorkItem::hogs(SimTime::ZERO, hogs),
        WorkItem::Stream {
            start: SimTime::from_ms(1),
            period: FRAME_PERIOD,
            jitter: SimTime::ZERO,
            deadline: FRAME_DEADLINE,
            count: FRAMES,
            customer: 0,
            weight: 1.0,
            socket: SocketKind::Unix,
            chain: vec![Segment::new(FRONT, FRAME_CPU)],
        },
    ];
    sc.name = Some(format!("frames-{}-h{hogs}", sc.policy.kind()));
    sc
}

pub const TXN_PERIOD: SimTime = SimTime::from_ms(100);
pub const TXNS: u32 = 1500;

/// Transactions through a database front end and a storage back end:
/// 10ms, 5ms, 10ms of CPU every 100ms.
pub fn transaction_stream(policy: SchedulerPolicy, hogs: u32) -> Scenario {
    let mut sc = Scenario::new(policy, TXN_PERIOD * u64::from(TXNS) + SimTime::from_secs(2));
    sc.processes = servers(2);
    sc.workload = vec![
        WorkItem::hogs(SimTime::ZERO, hogs),
        WorkItem::Stream {
            start: SimTime::from_ms(1),
            period: TXN_PERIOD,
            jitter: SimTime::ZERO,
            deadline: SimTime::from_secs(1),
            count: TXNS,
            customer: 0,
            weight: 1.0,
            socket: SocketKind::Unix,
            chain: three_part(SimTime::from_ms(10), SimTime::from_ms(5), SimTime::from_ms(10)),
        },
    ];
    sc.name = Some(format!("txn-{}-h{hogs}", sc.policy.kind()));
    sc
}

/// The same scenario with the hog count replaced; used by sweeps.
pub fn with_hogs(sc: &Scenario, hogs: u32) -> Scenario {
    let mut out = sc.clone();
    let mut placed = false;
    out.workload.retain_mut(|w| match w {
        WorkItem::Hogs { count, .. } if !placed => {
            *count = hogs;
            placed = true;
            true
        }
        WorkItem::Hogs { .. } => false,
        _ => true,
    });
    if !placed {
        out.workload.insert(0, WorkItem::hogs(SimTime::ZERO, hogs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let q = SimTime::from_ms(1);
        for sc in [
            rr_direct(q, 3, 4),
            rr_chain(q, [1, 2, 3], 5),
            mlfq_direct(q, &[2, 3, 1], 7),
            mlfq_chain(q, 4, [1, 3, 7]),
            cfs_chain(SimTime(16_800), 4, [1, 2, 3]),
            boosted_among_hogs(4, -3, 10),
            frame_stream(fairshare(SimTime::from_ms(20)), 12),
            transaction_stream(rbpe_held(FairShareParams::default(), 0), 0),
        ] {
            assert!(sc.validate().is_empty(), "{:?}: {:?}", sc.name, sc.validate());
        }
    }

    #[test]
    fn hog_count_is_replaced() {
        let sc = frame_stream(fairshare(SimTime::from_ms(20)), 3);
        assert_eq!(with_hogs(&sc, 9).hog_count(), 9);
        let sc = mlfq_chain(SimTime(1), 2, [1, 1, 1]);
        assert_eq!(with_hogs(&sc, 2).hog_count(), 2);
    }
}
