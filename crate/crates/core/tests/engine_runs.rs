use fieldnet::analysis::{bound_audit, detect_dualloss, lint_trace, replay_metrics, BoundOverrides, View};
use fieldnet::engine::{parse_trace, run, write_trace, EventKind, Scenario};
use fieldnet::NodeId;

fn short(mut sc: Scenario, slots: u32, rounds: u32) -> Scenario {
    sc.protocol.slots_per_round = slots;
    sc.rounds = rounds;
    sc
}

#[test]
fn replayed_counters_match_the_engine() {
    for sc in [
        short(Scenario::test_case_1(3), 10, 2),
        short(Scenario::test_case_3(4), 8, 2),
    ] {
        let out = run(&sc).unwrap();
        assert_eq!(replay_metrics(&out.trace), out.metrics, "scenario {}", sc.name);
    }
}

#[test]
fn trace_round_trips_through_text() {
    let out = run(&short(Scenario::test_case_1(5), 3, 1)).unwrap();
    let text = write_trace(&out.trace);
    let parsed = parse_trace(&text).unwrap();
    assert!(!parsed.truncated);
    assert_eq!(parsed.records, out.trace);
    assert_eq!(write_trace(&parsed.records), text);
}

#[test]
fn snooper_census_never_exceeds_truth() {
    let out = run(&short(Scenario::test_case_1(6), 10, 1)).unwrap();
    let truth = replay_metrics(&out.trace);
    let snoop = replay_metrics(&out.snoop);
    for rt in &truth.rounds {
        let rs = snoop.round(rt.round).unwrap();
        assert_eq!(rs.yields, rt.yields);
        for (node, s) in &rs.census {
            let t = &rt.census[node];
            assert!(s.data_sent <= t.data_sent);
            assert!(s.acks_received <= t.acks_received);
            assert!(s.sleeps_sent <= t.sleeps_sent);
            assert!(s.sleeps_received <= t.sleeps_received);
        }
        for (k, &n) in &rs.tx_by_kind {
            assert!(n <= rt.tx(*k));
        }
    }
}

#[test]
fn clean_run_lints_clean_and_has_no_dualloss() {
    let mut sc = short(Scenario::test_case_1(7), 5, 2);
    sc.link.noise_sigma = 0.0;
    sc.link.shadow_sigma = 0.0;
    let out = run(&sc).unwrap();
    assert_eq!(lint_trace(&out.trace), vec![]);
    assert!(detect_dualloss(&out.trace, View::Truth).is_empty());
}

#[test]
fn sink_only_network_collects_its_own_reading() {
    let mut sc = short(Scenario::test_case_1(1), 4, 1);
    sc.nodes.retain(|n| n.id == sc.sink);
    sc.snoopers.clear();
    let out = run(&sc).unwrap();
    let m = out.metrics.round(1).unwrap();
    assert_eq!(m.yields.get(&sc.sink), Some(&4));
    assert_eq!(m.tx(fieldnet::wire::MsgKind::Ndm), 60);
    let audit = bound_audit(&out.trace, 1, BoundOverrides::default()).unwrap();
    assert!(audit.passed(), "{audit:?}");
}

#[test]
fn every_node_wakes_once_per_slot() {
    let sc = short(Scenario::test_case_1(8), 6, 1);
    let out = run(&sc).unwrap();
    let wakes = out.trace.iter().filter(|r| r.event == EventKind::Wake).count();
    assert_eq!(wakes, 24 * 6);
    let err: f64 = out
        .trace
        .iter()
        .filter(|r| r.event == EventKind::Wake)
        .map(|r| r.get_parsed::<f64>("err_us").unwrap().abs())
        .fold(0.0, f64::max);
    assert!(err < 5_000.0, "worst wake error {err} µs");
}

#[test]
fn failed_node_is_reported_and_excluded() {
    let mut sc = short(Scenario::test_case_1(9), 8, 1);
    let victim = NodeId(13);
    sc.failures.push(fieldnet::engine::scenario::FailureSpec {
        node: victim,
        at_round: 1,
        at_slot: 2,
    });
    let out = run(&sc).unwrap();
    let m = out.metrics.round(1).unwrap();
    assert_eq!(m.yields[&victim], 2);
    let detected = out
        .trace
        .iter()
        .any(|r| r.event == EventKind::NodeFail && r.get("failed") == Some("13"));
    assert!(detected);
    assert!(out.warnings.iter().all(|w| !w.contains("not detected")));
}
