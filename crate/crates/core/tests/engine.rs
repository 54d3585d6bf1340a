use appease_core::model::{Accounting, ModelConfig, Pid, RequestId};
use appease_core::presets::{self, three_part, BACK, FRONT};
use appease_core::sched::{PolicyKind, SchedulerPolicy};
use appease_core::sim::{audit, run, EventKind, Scenario, Segment, SimError, WorkItem};
use appease_core::SimTime;

const MS: u64 = 1_000;

fn realized(sc: &Scenario) -> f64 {
    run(sc).unwrap().metrics.requests[0].realized_u.expect("settled")
}

#[test]
fn empty_workload_idles_to_the_horizon() {
    let sc = Scenario::new(presets::rr(SimTime(MS)), SimTime::from_secs(3));
    let out = run(&sc).unwrap();
    assert_eq!(out.metrics.idle, SimTime::from_secs(3));
    assert!(out.trace.is_empty());
}

#[test]
fn one_hog_one_request_round_robin() {
    // the hog runs its second first; the request then runs alone for its second
    let sc = presets::rr_direct(SimTime::from_secs(1), 1, 2);
    let out = run(&sc).unwrap();
    let r = &out.metrics.requests[0];
    assert_eq!(r.response, Some(SimTime::from_secs(2)));
    assert_eq!(r.realized_u, Some(1e6));
}

#[test]
fn cut_short_dispatches_are_debited() {
    // wait 10, run 10 (cut), wait 10, run 10 (done): 20 waited - 10 debited
    let sc = presets::rr_direct(SimTime(10 * MS), 2, 2);
    assert_eq!(realized(&sc), 10.0 * MS as f64);
    let mut net = sc.clone();
    net.model.accounting = Accounting::NetWait;
    assert_eq!(realized(&net), 20.0 * MS as f64);
}

#[test]
fn alone_on_the_cpu_costs_nothing() {
    let mut sc = Scenario::new(presets::rr(SimTime(MS)), SimTime::from_secs(1));
    sc.processes = vec![
        appease_core::sim::ProcessDecl { id: FRONT, name: "front".into(), nice: 0 },
        appease_core::sim::ProcessDecl { id: BACK, name: "back".into(), nice: 0 },
    ];
    sc.workload = vec![WorkItem::request(SimTime(5 * MS), three_part(SimTime(MS), SimTime(MS), SimTime(MS)))];
    sc.model.accounting = Accounting::NetWait;
    let out = run(&sc).unwrap();
    assert_eq!(out.metrics.requests[0].latency(), Some(SimTime(3 * MS)));
    assert_eq!(out.metrics.requests[0].realized_u, Some(0.0));
    let kinds: Vec<_> = out.trace.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.iter().filter(|k| **k == EventKind::Block).count(), 1);
    assert_eq!(kinds.iter().filter(|k| **k == EventKind::Unblock).count(), 1);
    assert_eq!(kinds[kinds.len() - 2..], [EventKind::Settle, EventKind::Sleep]);
}

#[test]
fn frozen_share_follows_alpha() {
    let mut sc = presets::chain_with_hogs(
        presets::rr(SimTime(3 * MS)),
        2,
        three_part(SimTime(MS), SimTime(MS), SimTime(MS)),
        SimTime::ZERO,
    );
    sc.model = ModelConfig { alpha: 0.25, accounting: Accounting::NetWait };
    let out = run(&sc).unwrap();
    // the total is independent of alpha: the split only moves value around
    let mut zero = sc.clone();
    zero.model.alpha = 0.0;
    assert_eq!(out.metrics.requests[0].realized_u, run(&zero).unwrap().metrics.requests[0].realized_u);
}

#[test]
fn requests_queue_in_arrival_order() {
    let mut sc = Scenario::new(presets::rr(SimTime(MS)), SimTime::from_secs(1));
    sc.processes = vec![appease_core::sim::ProcessDecl { id: FRONT, name: String::new(), nice: 0 }];
    sc.workload = (0..3)
        .map(|i| WorkItem::request(SimTime(i * 100), vec![Segment::new(FRONT, SimTime(2 * MS))]))
        .collect();
    let out = run(&sc).unwrap();
    let done: Vec<_> = out.metrics.requests.iter().map(|r| r.response.unwrap().as_us()).collect();
    assert_eq!(done, vec![2 * MS, 4 * MS, 6 * MS]);
}

#[test]
fn mutual_calls_are_reported_as_deadlock() {
    let mut sc = Scenario::new(presets::rr(SimTime(MS)), SimTime::from_secs(1));
    sc.processes = vec![
        appease_core::sim::ProcessDecl { id: 1, name: String::new(), nice: 0 },
        appease_core::sim::ProcessDecl { id: 2, name: String::new(), nice: 0 },
    ];
    let ms = SimTime(MS);
    // 1 calls 2 while 2, serving another request, calls 1
    sc.workload = vec![
        WorkItem::request(SimTime::ZERO, three_part(ms, ms * 5, ms)),
        WorkItem::request(
            SimTime::ZERO,
            vec![Segment::new(2, ms), Segment::new(1, ms), Segment::new(2, ms)],
        ),
    ];
    assert!(matches!(run(&sc), Err(SimError::Deadlock { .. })));
}

#[test]
fn mlfq_pinned_fillers_reproduce_the_worked_example() {
    // two processes per level, three base quanta
    let sc = presets::mlfq_direct(SimTime(MS), &[3, 3], 3);
    assert_eq!(realized(&sc), 5.0 * MS as f64);
}

#[test]
fn fair_share_worked_example() {
    let sc = presets::cfs_chain(SimTime(20 * MS), 5, [3, 3, 3]);
    assert_eq!(realized(&sc), 96.0 * MS as f64);
}

#[test]
fn appeasement_serves_the_request_first() {
    for n in [2, 5, 9] {
        let mut sc = presets::chain_with_hogs(
            presets::appeasement(Default::default()),
            n,
            three_part(SimTime(4 * MS), SimTime(4 * MS), SimTime(4 * MS)),
            SimTime::from_secs(1),
        );
        sc.model.accounting = Accounting::NetWait;
        let out = run(&sc).unwrap();
        assert_eq!(out.metrics.requests[0].latency(), Some(SimTime(12 * MS)));
        assert_eq!(out.metrics.precedence_violations, 0);
    }
}

#[test]
fn hogs_get_a_start_up_credit_under_appeasement() {
    let sc = presets::hogs_only(presets::appeasement(Default::default()), &[0, 0, 0], 10);
    let out = run(&sc).unwrap();
    assert!(out.ledger.bootstrap_entries().next().is_none(), "credits are used up");
    assert_eq!(out.metrics.precedence_violations, 0);
}

#[test]
fn boosts_show_up_in_the_trace() {
    let policy = presets::rbpe_held(Default::default(), 9000);
    let sc = presets::chain_with_hogs(policy, 4, three_part(SimTime(MS), SimTime(MS), SimTime(MS)), SimTime::ZERO);
    let out = run(&sc).unwrap();
    let boosts: Vec<_> = out
        .trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Boost)
        .map(|e| (e.pid.unwrap(), e.detail.clone()))
        .collect();
    // arrival at the front end, the call into the back end, the reply
    assert_eq!(
        boosts,
        vec![(Pid(FRONT), "0->-6".to_string()), (Pid(BACK), "0->-6".into()), (Pid(FRONT), "-6->-6".into())]
    );
    // one step per 500ms delay; the run lasts just over a second
    assert!(out.metrics.horizon < SimTime(1_100 * MS));
    assert_eq!(out.trace.count(EventKind::Decay), 4);
}

#[test]
fn audit_pass_agrees_with_the_ledger() {
    for kind in PolicyKind::ALL {
        let mut sc = presets::transaction_stream(SchedulerPolicy::Rr { q: SimTime(MS) }.with_kind(kind), 3);
        sc.horizon = SimTime::from_secs(3);
        for mode in [Accounting::WaitMinusRun, Accounting::NetWait] {
            sc.model.accounting = mode;
            let out = run(&sc).unwrap();
            let audited = audit(&out.trace, mode);
            let mut n = 0;
            for r in out.metrics.settled() {
                assert_eq!(Some(audited[&r.id]), r.realized_u, "{kind} {mode:?} {}", r.id.0);
                n += 1;
            }
            assert!(n > 20);
        }
    }
}

#[test]
fn trace_round_trips_through_text() {
    let sc = presets::rr_chain(SimTime(MS), [2, 1, 3], 4);
    let out = run(&sc).unwrap();
    let text = out.trace.to_text();
    let back = appease_core::sim::Trace::parse(&text).unwrap();
    assert_eq!(back, out.trace);
    assert_eq!(back.to_text(), text);
    assert!(out.metrics.request(RequestId(1)).is_some());
}
