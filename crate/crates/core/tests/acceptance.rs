//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fieldnet::analysis::{
    bound_audit, detect_dualloss, energy_table, graph_diff, graphs_from_trace, BoundOverrides,
    EdgeSet, View,
};
use fieldnet::clock::{HardwareClock, SyncTable};
use fieldnet::energy::{ocv_from_loaded, SocOcvCurve};
use fieldnet::engine::scenario::{DropRule, FailureSpec, NodeSpec, WakeLag};
use fieldnet::engine::{run, write_trace, EventKind, RunOutput, Scenario, TraceRecord};
use fieldnet::model::{dijkstra_spt, NetworkGraph};
use fieldnet::{CollectionTree, NodeId};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ids(nodes: &[NodeId]) -> String {
    nodes.iter().map(NodeId::to_string).collect::<Vec<_>>().join(", ")
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let el = started.elapsed();
    check(el <= limit, format!("took {el:?}, limit {limit:?}"))
}

// ==========================================================================
// Trace helpers

/// Trees announced by the sink in one round, in order, as `(epoch, tree)`.
fn trees(trace: &[TraceRecord], round: u32) -> Vec<(u32, CollectionTree)> {
    let mut out: Vec<(u32, NodeId, Vec<(NodeId, NodeId)>)> = Vec::new();
    for r in trace.iter().filter(|r| r.event == EventKind::Tree && r.round == Some(round)) {
        let epoch = r.get_parsed("epoch").unwrap_or(0);
        if r.get("root") == Some("1") {
            out.push((epoch, r.src.unwrap(), Vec::new()));
        } else if let (Some(last), Some(c), Some(p)) = (out.last_mut(), r.src, r.dst) {
            last.2.push((c, p));
        }
    }
    out.into_iter()
        .map(|(e, root, pairs)| (e, CollectionTree::from_parents(root, pairs)))
        .collect()
}

fn readings(trace: &[TraceRecord], round: u32) -> BTreeSet<(u32, NodeId)> {
    trace
        .iter()
        .filter(|r| r.event == EventKind::Reading && r.round == Some(round))
        .filter_map(|r| Some((r.slot?, r.src?)))
        .collect()
}

fn detections(trace: &[TraceRecord]) -> Vec<&TraceRecord> {
    trace
        .iter()
        .filter(|r| r.event == EventKind::NodeFail && r.get("stage") == Some("detect"))
        .collect()
}

fn leaves(tree: &CollectionTree) -> Vec<NodeId> {
    tree.vertices().filter(|&v| v != tree.root && tree.is_leaf(v)).collect()
}

fn shortened(mut sc: Scenario, rounds: u32, slots: u32) -> Scenario {
    sc.rounds = rounds;
    sc.protocol.slots_per_round = slots;
    sc
}

fn exec(sc: &Scenario) -> Result<RunOutput, String> {
    run(sc).map_err(|e| format!("scenario {} invalid: {e}", sc.name))
}

// ==========================================================================
// 1. Shortest-path tree optimality

fn bellman_ford(g: &NetworkGraph, root: NodeId) -> BTreeMap<NodeId, f64> {
    let mut dist: BTreeMap<NodeId, f64> = g.vertices().map(|v| (v, f64::INFINITY)).collect();
    dist.insert(root, 0.0);
    let edges: Vec<_> = g.edges().collect();
    for _ in 0..g.vertex_count() {
        let mut changed = false;
        for &(u, v, w) in &edges {
            for (a, b) in [(u, v), (v, u)] {
                if dist[&a] + w < dist[&b] {
                    dist.insert(b, dist[&a] + w);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

fn random_connected_graph(rng: &mut ChaCha8Rng) -> NetworkGraph {
    let n: u16 = rng.gen_range(2..=10);
    let mut g = NetworkGraph::new();
    for v in 1..=n {
        g.add_vertex(NodeId(v), 2200.0);
    }
    for v in 2..=n {
        let u = rng.gen_range(1..v);
        g.set_edge(NodeId(u), NodeId(v), f64::from(rng.gen_range(1..=1000u32))).unwrap();
    }
    for _ in 0..rng.gen_range(0..=2 * usize::from(n)) {
        let (u, v) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        if u != v {
            g.set_edge(NodeId(u), NodeId(v), f64::from(rng.gen_range(1..=1000u32))).unwrap();
        }
    }
    g
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut paths = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng);
        let root = NodeId(1);
        let build = dijkstra_spt(&g, root).map_err(|e| e.to_string())?;
        check(build.unreachable.is_empty(), format!("seed {seed}: graph not spanned"))?;
        let oracle = bellman_ford(&g, root);
        for v in g.vertices() {
            let cost = build.tree.path_cost(&g, v).ok_or(format!("seed {seed}: no path to {v}"))?;
            check(
                cost == oracle[&v],
                format!("seed {seed}: node {v} tree cost {cost} vs oracle {}", oracle[&v]),
            )?;
            paths += 1;
        }
    }
    within(started, Duration::from_secs(5))?;
    Ok(format!("200 graphs, {paths} tree paths equal the oracle distance"))
}

// ==========================================================================
// 2. Message bound

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let stated = BoundOverrides {
        degree: Some(23),
        sync_rounds: Some(10),
    };
    let mut worst = 0;
    let mut measured_failures = 0;
    let mut audits = 0;
    for seed in 0..50u64 {
        let sc = Scenario::test_case_1(seed);
        let out = exec(&sc)?;
        for round in 1..=sc.rounds {
            let a = bound_audit(&out.trace, round, stated).map_err(|e| format!("seed {seed}: {e}"))?;
            check(a.bounds.total() == 14435, format!("bound evaluates to {}", a.bounds.total()))?;
            check(
                a.passed(),
                format!("seed {seed} round {round}: phases over bound {:?} ({:?})", a.violations, a.actual),
            )?;
            worst = worst.max(a.actual.total());
            let measured = bound_audit(&out.trace, round, BoundOverrides::default()).map_err(|e| e.to_string())?;
            if !measured.passed() {
                measured_failures += 1;
            }
            audits += 1;
        }
    }
    within(started, Duration::from_secs(60))?;
    Ok(format!(
        "{audits} round audits within 14435 (worst total {worst}); with measured D and m, {measured_failures} audits exceed the bound"
    ))
}

// ==========================================================================
// 3. Lossless yield

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let mut sc = Scenario::test_case_2(11);
    sc.rounds = 3;
    sc.link.noise_sigma = 0.0;
    sc.link.shadow_sigma = 0.0;
    sc.link.pl0 = 30.0;
    sc.link.rssi_threshold = -70.0;
    sc.protocol.rssi_threshold = -70.0;
    let out = exec(&sc)?;
    let slots = sc.protocol.slots_per_round;
    for round in 1..=sc.rounds {
        let m = out.metrics.round(round).ok_or(format!("round {round} missing"))?;
        check(m.yields.len() == sc.nodes.len(), format!("round {round}: {} nodes in tree", m.yields.len()))?;
        for (n, &y) in &m.yields {
            check(y == slots, format!("round {round}: node {n} yield {y}"))?;
        }
    }
    let admitted_min = out
        .trace
        .iter()
        .filter(|r| r.event == EventKind::Neighbours)
        .filter_map(|r| r.rssi)
        .fold(0.0, f64::min);
    check(admitted_min >= -70.0, format!("a link at {admitted_min} dBm was admitted"))?;
    within(started, Duration::from_secs(30))?;
    Ok(format!(
        "{} nodes x {} rounds all at yield {slots}; weakest admitted link {admitted_min:.1} dBm",
        sc.nodes.len(),
        sc.rounds
    ))
}

// ==========================================================================
// 4. Duplicate-send signature

fn max_tries_modes(out: &RunOutput, round: u32) -> BTreeMap<NodeId, u32> {
    out.metrics
        .round(round)
        .map(|m| {
            m.census
                .iter()
                .filter_map(|(n, c)| Some((*n, c.max_tries_mode()?)))
                .collect()
        })
        .unwrap_or_default()
}

fn criterion_4() -> Outcome {
    let lag = |sc: &mut Scenario| {
        sc.faults.wake_lag = Some(WakeLag {
            lag_ms: sc.protocol.ack_timeout_ms,
            non_leaves: true,
            nodes: Vec::new(),
        })
    };
    let mut early = shortened(Scenario::test_case_2(21), 1, 12);
    early.protocol.initial_slot_delay_ms = 0.0;
    lag(&mut early);
    let mut fixed = early.clone();
    fixed.protocol.initial_slot_delay_ms = 500.0;

    let out = exec(&early)?;
    let tree = trees(&out.trace, 1).first().map(|t| t.1.clone()).ok_or("no tree")?;
    let modes = max_tries_modes(&out, 1);
    let leaf_ids = leaves(&tree);
    let twos = leaf_ids.iter().filter(|l| modes.get(l) == Some(&2)).count();
    check(
        2 * twos >= leaf_ids.len(),
        format!("only {twos} of {} leaves show mode 2: {modes:?}", leaf_ids.len()),
    )?;

    let out = exec(&fixed)?;
    let modes = max_tries_modes(&out, 1);
    let not_one: Vec<_> = modes.iter().filter(|(_, &m)| m != 1).collect();
    check(not_one.is_empty(), format!("with 500 ms delay, modes other than 1: {not_one:?}"))?;
    Ok(format!(
        "no delay: {twos}/{} leaves at mode 2; 500 ms delay: all {} senders at mode 1",
        leaf_ids.len(),
        modes.len()
    ))
}

// ==========================================================================
// 5. Failure handling

fn prefer(candidates: &[NodeId], wanted: &[u16], count: usize) -> Vec<NodeId> {
    let mut picked: Vec<NodeId> = wanted
        .iter()
        .map(|&w| NodeId(w))
        .filter(|w| candidates.contains(w))
        .collect();
    for &c in candidates {
        if picked.len() >= count {
            break;
        }
        if !picked.contains(&c) {
            picked.push(c);
        }
    }
    picked.truncate(count);
    picked
}

fn criterion_5a() -> Result<String, String> {
    let mut base = shortened(Scenario::test_case_3(31), 1, 6);
    base.failures.clear();
    let probe = exec(&base)?;
    let initial = trees(&probe.trace, 1).first().map(|t| t.1.clone()).ok_or("no tree")?;
    let victims = prefer(&leaves(&initial), &[10, 22], 2);
    check(victims.len() == 2, "fewer than two leaves")?;

    let mut sc = base.clone();
    sc.failures = victims
        .iter()
        .map(|&node| FailureSpec {
            node,
            at_round: 1,
            at_slot: 0,
        })
        .collect();
    let out = exec(&sc)?;
    let m = out.metrics.round(1).ok_or("round missing")?;
    for v in &victims {
        check(m.yields.get(v) == Some(&0), format!("failed leaf {v} has yield {:?}", m.yields.get(v)))?;
    }
    let all = trees(&out.trace, 1);
    let (_, last) = all.last().ok_or("no tree")?;
    check(all.len() >= 2, "no rebuild after the leaf failures")?;
    let expected: Vec<_> = initial
        .parent_pairs()
        .into_iter()
        .filter(|(c, _)| !victims.contains(c))
        .collect();
    check(last.parent_pairs() == expected, "rebuilt tree differs beyond the failed leaves")?;
    for (n, &y) in &m.yields {
        if !victims.contains(n) {
            check(y == sc.protocol.slots_per_round, format!("node {n} yield {y}"))?;
        }
    }
    Ok(format!("leaves {}: zero yield, rest of the tree unchanged", ids(&victims)))
}

fn criterion_5b() -> Result<String, String> {
    let mut base = shortened(Scenario::test_case_3(32), 1, 10);
    base.failures.clear();
    let probe = exec(&base)?;
    let initial = trees(&probe.trace, 1).first().map(|t| t.1.clone()).ok_or("no tree")?;
    let mut internal: Vec<NodeId> = initial
        .vertices()
        .filter(|&v| v != initial.root && !initial.is_leaf(v))
        .collect();
    internal.sort_by_key(|&v| (std::cmp::Reverse(initial.children_of(v).len()), v));
    let victim = *prefer(&internal, &[13], 1).first().ok_or("no internal node")?;
    let parent = initial.parent_of(victim).ok_or("victim has no parent")?;
    let orphans: Vec<NodeId> = initial.children_of(victim).to_vec();
    let at_slot = 3;

    let mut sc = base.clone();
    sc.failures = vec![FailureSpec {
        node: victim,
        at_round: 1,
        at_slot,
    }];
    let out = exec(&sc)?;
    let det = detections(&out.trace);
    check(det.len() == 1, format!("{} detections", det.len()))?;
    let d = det[0];
    check(d.node == parent && d.get("failed") == Some(&victim.to_string()[..]), "wrong detector or victim")?;
    check(d.slot == Some(at_slot + 1), format!("detected in slot {:?}", d.slot))?;
    let misses: Vec<u32> = out
        .trace
        .iter()
        .filter(|r| r.event == EventKind::Timeout && r.node == parent && r.dst == Some(victim))
        .filter(|r| r.get("what") == Some("child_data"))
        .filter_map(|r| r.slot)
        .collect();
    check(misses == vec![at_slot, at_slot + 1], format!("missed slots {misses:?}"))?;

    let all = trees(&out.trace, 1);
    check(all.len() == 2, format!("{} trees announced", all.len()))?;
    let rebuilt = &all[1].1;
    check(!rebuilt.contains(victim), "rebuilt tree still contains the failed node")?;
    let rebuild_slot = out
        .trace
        .iter()
        .find(|r| r.event == EventKind::Tree && r.get_parsed::<u32>("epoch") == Some(all[1].0))
        .and_then(|r| r.slot)
        .ok_or("rebuild outside a slot")?;
    let got = readings(&out.trace, 1);
    for s in (rebuild_slot + 1)..sc.protocol.slots_per_round {
        for c in &orphans {
            check(got.contains(&(s, *c)), format!("orphan {c} missing in slot {s}"))?;
        }
    }
    Ok(format!(
        "node {victim} (children {}) detected by {parent} after slots {at_slot} and {}, rebuilt in slot {rebuild_slot}",
        ids(&orphans),
        at_slot + 1
    ))
}

fn chain_scenario() -> Scenario {
    let mut sc = shortened(Scenario::test_case_1(33), 1, 12);
    sc.name = "branch".into();
    sc.sink = NodeId(1);
    sc.snoopers.clear();
    sc.link.shadow_sigma = 0.0;
    let at = |id: u16, x: f64, y: f64| NodeSpec {
        id: NodeId(id),
        x,
        y,
        initial_soc: 1.0,
        drift_ppm: None,
        boot_offset_us: None,
    };
    sc.nodes = vec![
        at(1, 0.0, 0.0),
        at(2, 25.0, 0.0),
        at(5, 50.0, 0.0),
        at(11, 75.0, 0.0),
        at(12, 50.0, 25.0),
    ];
    sc.failures = [5, 11]
        .into_iter()
        .map(|n| FailureSpec {
            node: NodeId(n),
            at_round: 1,
            at_slot: 2,
        })
        .collect();
    sc
}

fn criterion_5c() -> Result<String, String> {
    let sc = chain_scenario();
    let out = exec(&sc)?;
    let all = trees(&out.trace, 1);
    let first = &all.first().ok_or("no tree")?.1;
    check(
        first.parent_of(NodeId(11)) == Some(NodeId(5)) && first.parent_of(NodeId(5)) == Some(NodeId(2)),
        format!("branch not formed: {:?}", first.parent_pairs()),
    )?;
    let det = detections(&out.trace);
    let failed: Vec<String> = det.iter().filter_map(|r| r.get("failed").map(str::to_string)).collect();
    check(det.len() == 2, format!("{} detections: {failed:?}", det.len()))?;
    check(failed == ["5", "11"], format!("detection order {failed:?}"))?;
    check(all.len() == 3, format!("{} trees announced", all.len()))?;
    check(all[1].1.parent_of(NodeId(11)) == Some(NodeId(12)), "second tree does not reattach 11")?;
    let last = &all[2].1;
    check(!last.contains(NodeId(5)) && !last.contains(NodeId(11)), "final tree keeps a failed node")?;
    Ok("branch 5 then 11: two detections, two-stage rebuild".into())
}

fn criterion_5() -> Outcome {
    let a = criterion_5a().map_err(|e| format!("(a) {e}"))?;
    let b = criterion_5b().map_err(|e| format!("(b) {e}"))?;
    let c = criterion_5c().map_err(|e| format!("(c) {e}"))?;
    Ok(format!("(a) {a}; (b) {b}; (c) {c}"))
}

// ==========================================================================
// 6. Clock-sync recovery

/// Wake errors, µs, of one node synchronised by its parent (the sink, whose
/// clock is ideal) through four SYNC beacons and then one SLEEP per slot.
fn wake_errors(seed: u64, jitter_us: f64, dci_us: f64, slots: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock = HardwareClock::new(rng.gen_range(-40.0..=40.0), rng.gen_range(0.0..1e6)).unwrap();
    let mut table = SyncTable::new(8);
    let observe = |table: &mut SyncTable, global: f64, rng: &mut ChaCha8Rng| {
        let j = if jitter_us > 0.0 { rng.gen_range(-jitter_us..=jitter_us) } else { 0.0 };
        table.add_reference_point(clock.local_time(global) + j, global).unwrap();
    };
    for tick in 0..4 {
        observe(&mut table, 30e6 * f64::from(tick), &mut rng);
    }
    let trigger = 120e6;
    let mut errs = Vec::new();
    for k in 0..slots {
        let target = trigger + f64::from(k) * dci_us;
        let est = table.estimate_skew().unwrap();
        let woke = clock.real_time(est.local_alarm(target));
        errs.push((woke - target).abs());
        observe(&mut table, target + 1.5e6, &mut rng);
    }
    errs
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let dci = 1800e6;
    let trials = 1000;
    let mut worst_clean: f64 = 0.0;
    let mut early = 0.0;
    let mut late = 0.0;
    let mut worst_steady: f64 = 0.0;
    for seed in 0..trials {
        let clean = wake_errors(seed, 0.0, dci, 10);
        worst_clean = clean.iter().copied().fold(worst_clean, f64::max);
        let noisy = wake_errors(seed, 30.0, dci, 10);
        early += noisy[0..2].iter().sum::<f64>() / 2.0;
        late += noisy[3..10].iter().sum::<f64>() / 7.0;
        worst_steady = noisy[3..10].iter().copied().fold(worst_steady, f64::max);
    }
    let (early, late) = (early / trials as f64, late / trials as f64);
    check(worst_clean < 1.0, format!("noise-free wake error {worst_clean} µs"))?;
    check(late <= early, format!("mean error slots 4-10 {late:.1} µs above slots 1-2 {early:.1} µs"))?;
    check(worst_steady <= 5000.0, format!("steady-state error {worst_steady:.1} µs"))?;
    within(started, Duration::from_secs(60))?;
    Ok(format!(
        "{trials} trials: noise-free worst {worst_clean:.3} µs; with jitter mean {early:.1} µs (slots 1-2) -> {late:.1} µs (slots 4-10), worst steady {worst_steady:.1} µs"
    ))
}

// ==========================================================================
// 7. Battery model

fn criterion_7() -> Outcome {
    check(ocv_from_loaded(3.7, 0.010, 0.15) == 3.7 + 0.010 * 0.15, "loaded voltage correction")?;
    let curve = SocOcvCurve::default();
    let anchors = curve.anchors().to_vec();
    let mut worst: f64 = 0.0;
    for w in anchors.windows(2) {
        let (lo, hi) = (w[0].1, w[1].1);
        for i in 1..100 {
            let soc = lo + (hi - lo) * f64::from(i) / 100.0;
            let ocv = curve.ocv_from_soc(soc);
            let back = curve.ocv_from_soc(curve.soc_from_ocv(ocv).soc);
            worst = worst.max((back - ocv).abs());
        }
    }
    check(worst * 1000.0 < 1.0, format!("round trip off by {:.4} mV", worst * 1000.0))?;

    let sc = shortened(Scenario::test_case_1(41), 1, 50);
    let out = exec(&sc)?;
    let table = energy_table(&out.trace, Some((1, 1)), &sc.energy.curve);
    check(table.rows.len() == sc.nodes.len(), format!("{} rows", table.rows.len()))?;
    let min = table.rows.iter().map(|r| r.delta_mah).fold(f64::INFINITY, f64::min);
    let max = table.rows.iter().map(|r| r.delta_mah).fold(0.0, f64::max);
    check(min > 0.0, format!("smallest expenditure {min} mAh"))?;
    check(max < 10.0 * min, format!("spread {max:.3}/{min:.3} mAh"))?;
    Ok(format!(
        "round trip within {:.2e} mV; overnight expenditure {min:.3}..{max:.3} mAh (ratio {:.2})",
        worst * 1000.0,
        max / min
    ))
}

// ==========================================================================
// 8. ACK-SLEEP dualloss

fn criterion_8() -> Outcome {
    let base = shortened(Scenario::test_case_1(51), 1, 50);
    let probe = exec(&base)?;
    let tree = trees(&probe.trace, 1).first().map(|t| t.1.clone()).ok_or("no tree")?;
    let picked: Vec<NodeId> = leaves(&tree).into_iter().take(2).collect();
    check(picked.len() == 2, "fewer than two leaves")?;
    let mut sc = base.clone();
    for &at in &picked {
        for msg in ["DATA_ACK", "SLEEP"] {
            sc.faults.drops.push(DropRule {
                msg: msg.into(),
                at,
                round: Some(1),
                slot: None,
            });
        }
    }
    let out = exec(&sc)?;
    let events = detect_dualloss(&out.trace, View::Truth);
    check(events.len() == 100, format!("{} dualloss events", events.len()))?;
    check(events.iter().all(|e| e.retries == sc.protocol.max_retries), "an event stopped short of the cap")?;
    check(events.iter().all(|e| !e.data_lost()), "an event lost data at the sink")?;
    let m = out.metrics.round(1).ok_or("round missing")?;
    for p in &picked {
        check(m.yields[p] == 50, format!("leaf {p} yield {}", m.yields[p]))?;
    }
    Ok(format!("leaves {}: 100 events, all at {} tries, no data lost", ids(&picked), sc.protocol.max_retries))
}

// ==========================================================================
// 9. Determinism

fn criterion_9() -> Outcome {
    let sc = shortened(Scenario::test_case_3(61), 2, 6);
    let mut hashes = BTreeSet::new();
    for _ in 0..5 {
        let out = exec(&sc)?;
        let mut h = DefaultHasher::new();
        write_trace(&out.trace).hash(&mut h);
        write_trace(&out.snoop).hash(&mut h);
        hashes.insert(h.finish());
    }
    check(hashes.len() == 1, format!("{} distinct hashes", hashes.len()))?;
    Ok(format!("5 repeats, trace hash {:016x}", hashes.iter().next().unwrap()))
}

// ==========================================================================
// 10. Graph stability

fn reference_graph_sequence() -> Vec<EdgeSet> {
    let mut next = 0u16;
    let mut fresh = |count: usize| -> Vec<(NodeId, NodeId)> {
        (0..count)
            .map(|_| {
                next += 1;
                (NodeId(next), NodeId(1000 + next))
            })
            .collect()
    };
    let common = fresh(37);
    let x = fresh(19);
    let y = fresh(1);
    let z = fresh(6);
    let w = fresh(2);
    let v = fresh(9);
    let set = |parts: &[&[(NodeId, NodeId)]]| -> EdgeSet { parts.iter().flat_map(|p| p.iter().copied()).collect() };
    vec![
        set(&[&common, &x]),
        set(&[&common, &x[..7], &y]),
        set(&[&common, &x[..1], &y, &z]),
        set(&[&common, &y, &z[..4], &w]),
        set(&[&common, &y, &z[..4], &w, &v]),
    ]
}

fn criterion_10() -> Outcome {
    let seq = reference_graph_sequence();
    let sizes: Vec<usize> = seq.iter().map(BTreeSet::len).collect();
    check(sizes == [56, 45, 45, 44, 53], format!("replayed sizes {sizes:?}"))?;
    let d = graph_diff(&seq);
    let got: Vec<(usize, usize, usize)> = d.iter().map(|d| (d.added, d.removed, d.retained)).collect();
    check(
        got == [(1, 12, 44), (6, 6, 39), (2, 3, 42), (9, 0, 44)],
        format!("replayed diffs {got:?}"),
    )?;
    check(d.iter().all(|d| d.common_to_all == 37), "common edge count")?;

    let sc = shortened(Scenario::field_deployment(71), 5, 2);
    let out = exec(&sc)?;
    let mut per_round: BTreeMap<u32, EdgeSet> = BTreeMap::new();
    for (round, _, edges) in graphs_from_trace(&out.trace) {
        per_round.entry(round).or_insert(edges);
    }
    check(per_round.len() == 5, format!("{} graphs", per_round.len()))?;
    let graphs: Vec<EdgeSet> = per_round.into_values().collect();
    let diffs = graph_diff(&graphs);
    let mut fractions = Vec::new();
    for (i, d) in diffs.iter().enumerate() {
        let f = d.retained as f64 / graphs[i].len() as f64;
        check(f >= 0.75, format!("pair {} retained {f:.3}", i + 1))?;
        fractions.push(format!("{f:.2}"));
    }
    Ok(format!(
        "replay 1/12/44 for the first pair, 37 common; simulated retention {}",
        fractions.join(" ")
    ))
}

// ==========================================================================

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("spt optimality", criterion_1),
        ("message bound", criterion_2),
        ("lossless yield", criterion_3),
        ("duplicate-send signature", criterion_4),
        ("failure handling", criterion_5),
        ("clock-sync recovery", criterion_6),
        ("battery model", criterion_7),
        ("dualloss semantics", criterion_8),
        ("determinism", criterion_9),
        ("graph stability", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("{}", i + 1);
        if !filter.is_empty() && !filter.contains(&label) {
            continue;
        }
        let started = Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {label:>2} PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {label:>2} FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
