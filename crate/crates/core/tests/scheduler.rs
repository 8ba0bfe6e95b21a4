use std::collections::HashMap;

use dana::dsl::{self, Phase};
use dana::engine::alu::Width;
use dana::engine::{tree_depth, Engine, EngineConfig, Latencies};
use dana::scheduler::{schedule, Route, Schedule, Target, ThreadSchedules};
use dana::translator::{build_hdfg, Evaluator, HDfg, ScalarRef};
use dana::workloads;
use proptest::prelude::*;

fn graph(src: &str) -> HDfg {
    build_hdfg(&dsl::compile(src).unwrap_or_else(|e| panic!("{e}\n{src}"))).unwrap()
}

fn program(decls: &str, update: &str, merge_var: &str) -> String {
    format!("{decls}\nalgo s {{ update {{ {update} }} merge {{ merge({merge_var}, 4, \"+\"); }} converge {{ setEpochs(1); }} }}")
}

/// Longest latency-weighted dependency chain through a phase's sub-nodes.
fn critical_path(g: &HDfg, phase: Phase, lat: &Latencies) -> u32 {
    let mut finish: HashMap<ScalarRef, u32> = HashMap::new();
    let mut best = 0;
    for s in g.phase_sub_nodes(phase) {
        let args = if s.accumulate { &s.args[..1] } else { &s.args[..] };
        let start = args.iter().filter_map(|a| finish.get(a)).max().copied().unwrap_or(0);
        let end = start + lat.of(s.op);
        finish.insert(s.out, end);
        best = best.max(end);
    }
    best
}

#[test]
fn sixteen_products_on_two_clusters() {
    let g = graph(&program("model a[16]; input b[16]; output y;", "t = a * b; a2 = a - t; setModel(a2);", "t"));
    let s = schedule(&g, Phase::PerTuple, &Target::new(2)).unwrap();
    // 16 multiplies and 16 accumulating adds.
    assert_eq!(s.placements.len(), 32);
    assert_eq!(s.acs_used(), vec![0, 1]);
    assert_eq!(s.makespan, 2 + 1);
    assert!(s.comms.is_empty());
    s.validate(&g, &Latencies::default()).unwrap();
    let one = schedule(&g, Phase::PerTuple, &Target::new(1)).unwrap();
    assert!(one.makespan > s.makespan);
}

#[test]
fn chains_are_serial() {
    let g = graph(&program("model w[1]; input x[1]; output y;", "t = exp(sqrt(abs(x))); w2 = w - t; setModel(w2);", "t"));
    for acs in [1, 4] {
        let s = schedule(&g, Phase::PerTuple, &Target::new(acs)).unwrap();
        assert_eq!(s.makespan, 1 + 4 + 4 + 1);
        assert_eq!(s.acs_used().len(), 1);
    }
}

#[test]
fn single_add_is_one_instruction() {
    let g = graph(&program("model w[1]; input x[1]; output y;", "g = x * y; w2 = w + g; setModel(w2);", "g"));
    let s = schedule(&g, Phase::PostMerge, &Target::new(1)).unwrap();
    assert_eq!(s.makespan, 1);
    let m = s.emit_micro();
    assert_eq!(m.instruction_count(), 1);
    assert_eq!(s.occupancy_csv(), "cycle,ac,au,sub_node,op\n0,0,0,2,add\n");
}

#[test]
fn tree_depth_for_four_threads() {
    assert_eq!(tree_depth(4), 2);
    let g = graph(workloads::SVM);
    assert_eq!(dana::scheduler::tree_program(&g, 4).depth, 2);
}

#[test]
fn workload_schedules_are_valid() {
    let lat = Latencies::default();
    for w in workloads::suite() {
        let g = graph(w.source);
        for acs in [1, 2, 3, 8, 32] {
            let s = ThreadSchedules::build(&g, &Target::new(acs)).unwrap();
            for (phase, sch) in [(Phase::PerTuple, &s.per_tuple), (Phase::PostMerge, &s.post_merge), (Phase::Convergence, &s.convergence)] {
                sch.validate(&g, &lat).unwrap_or_else(|e| panic!("{} acs={acs} {phase:?}: {e}", w.name));
                assert!(sch.makespan >= critical_path(&g, phase, &lat));
                assert!(sch.acs_used().iter().all(|&a| a < acs));
            }
        }
    }
}

#[test]
fn more_clusters_never_hurt_much() {
    let lat = Latencies::default();
    // Wide graphs shrink monotonically.
    let g = graph(workloads::LRMF);
    let spans: Vec<u32> = [1, 2, 4, 8, 16, 32].iter().map(|&a| schedule(&g, Phase::PerTuple, &Target::new(a)).unwrap().makespan).collect();
    assert!(spans.windows(2).all(|w| w[1] <= w[0]), "{spans:?}");
    assert!(spans[5] * 8 < spans[0]);
    // Narrow graphs pay at most one inter-cluster hop.
    for w in workloads::suite() {
        let g = graph(w.source);
        let base = schedule(&g, Phase::PerTuple, &Target::new(1)).unwrap().makespan;
        for acs in [2, 4, 8] {
            let m = schedule(&g, Phase::PerTuple, &Target::new(acs)).unwrap().makespan;
            assert!(m <= base + lat.inter_ac_bus, "{} acs={acs}: {m} vs {base}", w.name);
        }
    }
}

#[test]
fn validation_catches_early_issue() {
    let g = graph(workloads::LOGISTIC);
    let s = schedule(&g, Phase::PerTuple, &Target::new(2)).unwrap();
    let lat = Latencies::default();
    let mut bad = s.clone();
    let last = bad.placements.iter().max_by_key(|p| p.cycle).unwrap().sub_node;
    bad.placements.iter_mut().find(|p| p.sub_node == last).unwrap().cycle = 0;
    assert!(bad.validate(&g, &lat).is_err());
    let mut bad = s.clone();
    bad.placements.pop();
    assert!(bad.validate(&g, &lat).is_err());
    let mut bad = s;
    bad.makespan -= 1;
    assert!(bad.validate(&g, &lat).is_err());
}

#[test]
fn scheduling_is_deterministic() {
    let g = graph(workloads::LRMF);
    let a = schedule(&g, Phase::PerTuple, &Target::new(8)).unwrap();
    let b = schedule(&g, Phase::PerTuple, &Target::new(8)).unwrap();
    assert_eq!(a, b);
    assert!(a.comms.iter().any(|c| c.route == Route::InterAc));
    assert_eq!(a.emit_micro(), b.emit_micro());
}

fn comm_bound(s: &Schedule, lat: &Latencies) -> u32 {
    let hop = lat.neighbor + lat.ac_bus + lat.inter_ac_bus;
    s.placements.iter().map(|p| p.latency + hop).sum()
}

#[derive(Debug, Clone)]
enum Step {
    Bin(&'static str, usize, usize),
    Fun(&'static str, usize),
    Scaled(usize, usize),
}

fn arb_steps() -> impl Strategy<Value = Vec<Step>> {
    let step = prop_oneof![
        (prop::sample::select(vec!["+", "-", "*", "/"]), 0usize..64, 0usize..64).prop_map(|(o, a, b)| Step::Bin(o, a, b)),
        (prop::sample::select(vec!["sigmoid", "abs", "exp", "gaussian"]), 0usize..64).prop_map(|(f, a)| Step::Fun(f, a)),
        (0usize..64, 0usize..64).prop_map(|(a, b)| Step::Scaled(a, b)),
    ];
    prop::collection::vec(step, 1..8)
}

fn random_program(n: usize, steps: &[Step]) -> String {
    let mut names = vec!["x".to_string(), "w".to_string()];
    let mut body = String::new();
    for (i, s) in steps.iter().enumerate() {
        let pick = |k: usize| names[k % names.len()].clone();
        let expr = match s {
            Step::Bin(op, a, b) => format!("{} {op} {}", pick(*a), pick(*b)),
            Step::Fun(f, a) => format!("{f}({})", pick(*a)),
            Step::Scaled(a, b) => format!("{} * sigma({}, 1)", pick(*a), pick(*b)),
        };
        body += &format!("t{i} = {expr}; ");
        names.push(format!("t{i}"));
    }
    let last = names.last().unwrap();
    program(
        &format!("model w[{n}]; input x[{n}]; output y; meta lr = 0.1;"),
        &format!("{body}g = {last} * y; u = lr * g; w2 = w - u; setModel(w2);"),
        "g",
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn random_graphs_schedule_and_replay(n in 1usize..24, steps in arb_steps(), acs in 1usize..6, seed in any::<u32>()) {
        let g = graph(&random_program(n, &steps));
        let lat = Latencies::default();
        let cfg = EngineConfig { threads: 1, acs_per_thread: acs, width: Width::F64, ..Default::default() };
        let s = ThreadSchedules::build(&g, &Target::from_config(&cfg)).unwrap();
        let pt = &s.per_tuple;
        prop_assert!(pt.validate(&g, &lat).is_ok(), "{:?}", pt.validate(&g, &lat));
        prop_assert!(pt.makespan >= critical_path(&g, Phase::PerTuple, &lat));
        prop_assert!(pt.makespan <= comm_bound(pt, &lat));

        // The emitted micro-program computes what the sub-node graph does.
        let progs = s.programs(&g, 1);
        let mut e = Engine::new(cfg, &g, &progs).unwrap();
        let tuple: Vec<f64> = (0..=n).map(|i| ((seed as usize + i * 7919) % 2000) as f64 / 1000.0 - 1.0).collect();
        e.run_batch(&[&tuple]).unwrap();
        let mut ev = Evaluator::new(&g, Width::F64);
        ev.set_tuple(&tuple);
        ev.run_phase(Phase::PerTuple);
        let want = ev.node_values(g.merge_node);
        for (a, b) in e.merged().iter().zip(&want) {
            prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{} vs {}", a, b);
        }
    }
}
