use std::collections::BTreeSet;

use appease_core::model::{Accounting, ModelConfig};
use appease_core::presets::{three_part, FRONT};
use appease_core::sched::{PolicyKind, SchedulerPolicy, SocketKind};
use appease_core::sim::{audit, run, EventKind, ProcessDecl, Scenario, Segment, WorkItem};
use appease_core::SimTime;
use proptest::prelude::*;

fn policy() -> impl Strategy<Value = SchedulerPolicy> {
    (0usize..5, 1u64..20_000, 1_000u64..40_000, 0u64..20_000).prop_map(|(k, q, lat, load)| {
        let base = SchedulerPolicy::Rr { q: SimTime(q) };
        let kind = PolicyKind::ALL[k];
        let mut p = base.with_kind(kind);
        if let Some(f) = match &mut p {
            SchedulerPolicy::Fairshare(f) => Some(f),
            SchedulerPolicy::FairshareRbpe(r) => {
                r.held_load = (load % 2 == 0).then_some(load);
                Some(&mut r.fair)
            }
            SchedulerPolicy::Appeasement(a) => Some(&mut a.fallback),
            _ => None,
        } {
            f.sch_lat = SimTime(lat);
        }
        p
    })
}

fn request() -> impl Strategy<Value = WorkItem> {
    (0u64..300_000, 1u64..30_000, 1u64..30_000, 1u64..30_000, any::<bool>(), any::<bool>()).prop_map(
        |(at, a, b, c, chained, net)| WorkItem::Request {
            at: SimTime(at),
            customer: 0,
            weight: 1.0,
            socket: if net { SocketKind::Network } else { SocketKind::Unix },
            chain: if chained {
                three_part(SimTime(a), SimTime(b), SimTime(c))
            } else {
                vec![Segment::new(FRONT, SimTime(a))]
            },
        },
    )
}

prop_compose! {
    fn scenario()(
        policy in policy(),
        hogs in 0u32..5,
        hog_start in 0u64..100_000,
        demand in proptest::option::of(1u64..200_000),
        requests in proptest::collection::vec(request(), 0..6),
        alpha in 0.0f64..0.5,
        net in any::<bool>(),
        horizon in 1u64..1_500_000,
    ) -> Scenario {
        let mut sc = Scenario::new(policy, SimTime(horizon));
        sc.model = ModelConfig {
            alpha,
            accounting: if net { Accounting::NetWait } else { Accounting::WaitMinusRun },
        };
        sc.processes = (1..=2).map(|id| ProcessDecl { id, name: String::new(), nice: 0 }).collect();
        sc.workload.push(WorkItem::Hogs {
            start: SimTime(hog_start),
            count: hogs,
            nice: 0,
            level: None,
            demand: demand.map(SimTime),
        });
        sc.workload.extend(requests);
        sc
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cpu_and_idle_cover_the_horizon(sc in scenario()) {
        let out = run(&sc).unwrap();
        prop_assert_eq!(out.metrics.total_cpu() + out.metrics.idle, sc.horizon);
    }

    #[test]
    fn trace_audit_matches_realized(sc in scenario()) {
        let out = run(&sc).unwrap();
        let audited = audit(&out.trace, sc.model.accounting);
        for r in out.metrics.settled() {
            // weights are 1 and the split never changes the total
            let want = audited[&r.id];
            let got = r.realized_u.unwrap();
            prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn events_respect_causality(sc in scenario()) {
        let out = run(&sc).unwrap();
        let mut arrived = BTreeSet::new();
        let mut blocked = BTreeSet::new();
        for e in &out.trace.events {
            match e.kind {
                EventKind::Arrive => {
                    arrived.insert(e.req.unwrap());
                }
                EventKind::Settle => prop_assert!(arrived.contains(&e.req.unwrap())),
                EventKind::Block => {
                    blocked.insert((e.pid.unwrap(), e.req.unwrap()));
                }
                EventKind::Unblock => {
                    prop_assert!(blocked.remove(&(e.pid.unwrap(), e.req.unwrap())));
                }
                EventKind::Dispatch | EventKind::Complete => {
                    if let Some(r) = e.req {
                        prop_assert!(arrived.contains(&r));
                    }
                }
                _ => {}
            }
        }
    }

    #[test]
    fn hogs_never_block(sc in scenario()) {
        let out = run(&sc).unwrap();
        let first = sc.first_hog_pid();
        for e in &out.trace.events {
            if e.pid.is_some_and(|p| p >= first) {
                prop_assert!(!matches!(e.kind, EventKind::Block | EventKind::Sleep | EventKind::Unblock));
            }
        }
    }

    #[test]
    fn runs_replay_identically(sc in scenario()) {
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        prop_assert_eq!(a.trace.to_text(), b.trace.to_text());
        prop_assert_eq!(serde_json::to_string(&a.metrics).unwrap(), serde_json::to_string(&b.metrics).unwrap());
    }

    #[test]
    fn appeasement_keeps_unhappy_work_first(sc in scenario()) {
        let mut sc = sc;
        sc.policy = sc.policy.with_kind(PolicyKind::Appeasement);
        let out = run(&sc).unwrap();
        prop_assert_eq!(out.metrics.precedence_violations, 0);
    }

    #[test]
    fn pure_waiting_is_never_negative(sc in scenario()) {
        let mut sc = sc;
        sc.model.accounting = Accounting::NetWait;
        let out = run(&sc).unwrap();
        for r in out.metrics.settled() {
            prop_assert!(r.realized_u.unwrap() >= 0.0);
        }
        for (_, u) in &out.metrics.unhappiness {
            prop_assert!(*u >= -1e-9);
        }
    }
}
