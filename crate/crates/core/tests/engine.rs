use dana::dsl::{self, MergeOp, Phase};
use dana::engine::alu::{eval, AluOp, Latencies, Width};
use dana::engine::{tree_depth, Engine, EngineConfig, EngineError, ThreadPrograms, TreeBusProgram};
use dana::scheduler::{ThreadSchedules, Target};
use dana::translator::{build_hdfg, Evaluator, HDfg};
use dana::workloads;
use proptest::prelude::*;

#[test]
fn alu_reference_values() {
    let f = |op, a| eval(op, a, 0.0, Width::F64);
    assert_eq!(f(AluOp::Sqrt, 4.0), 2.0);
    assert_eq!(f(AluOp::Gaussian, 1.0), 0.36787944117144233);
    assert_eq!(f(AluOp::Gaussian, 0.0), 1.0);
    assert_eq!(f(AluOp::Sigmoid, 2.0), 0.8807970779778823);
    assert_eq!(f(AluOp::Sigmoid, 0.0), 0.5);
    assert_eq!(f(AluOp::Exp, 1.0), std::f64::consts::E);
    assert_eq!(f(AluOp::Log, 1.0), 0.0);
    assert_eq!(f(AluOp::Abs, -3.5), 3.5);
    assert_eq!(eval(AluOp::Gt, 2.0, 1.0, Width::F64), 1.0);
    assert_eq!(eval(AluOp::Lt, 2.0, 1.0, Width::F64), 0.0);
    assert_eq!(eval(AluOp::Eq, 2.0, 2.0, Width::F64), 1.0);
    assert_eq!(eval(AluOp::Min, 2.0, -1.0, Width::F64), -1.0);
    assert_eq!(eval(AluOp::Div, 1.0, 0.0, Width::F64), f64::INFINITY);
    assert!(f(AluOp::Sqrt, -1.0).is_nan());

    // Single precision rounds operands and results.
    assert_eq!(eval(AluOp::Sigmoid, 2.0, 0.0, Width::F32), 0.880797f32 as f64);
    assert_eq!(eval(AluOp::Add, 0.1, 0.2, Width::F32), (0.1f32 + 0.2f32) as f64);
    assert_ne!(eval(AluOp::Add, 0.1, 0.2, Width::F32), 0.1 + 0.2);
    assert_eq!(eval(AluOp::Mul, 1e30, 1e30, Width::F32), f64::INFINITY);
}

#[test]
fn latencies() {
    let l = Latencies::default();
    assert_eq!((l.of(AluOp::Add), l.of(AluOp::Mul), l.of(AluOp::Div), l.of(AluOp::Sigmoid)), (1, 2, 8, 4));
    assert_eq!(l.of(AluOp::Pass), 1);
}

#[test]
fn tree_depths() {
    assert_eq!([1, 2, 3, 4, 5, 8, 9, 16, 32].map(tree_depth), [0, 1, 2, 2, 3, 3, 4, 4, 5]);
}

#[test]
fn tree_combines_adjacent_pairs() {
    // Values where f32 addition is not associative.
    let ports: Vec<Vec<f64>> = [1e8, 1.0, -1e8, 3.0, 0.5].iter().map(|&v| vec![v as f32 as f64]).collect();
    let refs: Vec<&[f64]> = ports.iter().map(|p| p.as_slice()).collect();
    let mut t = TreeBusProgram::new(MergeOp::Add, 5, 1);
    t.post_scale = false;
    let got = t.combine(&refs, 5, Width::F32)[0];
    let v: Vec<f32> = ports.iter().map(|p| p[0] as f32).collect();
    let want = ((v[0] + v[1]) + (v[2] + v[3])) + v[4];
    assert_eq!(got, want as f64);
    let sequential = (((v[0] + v[1]) + v[2]) + v[3]) + v[4];
    assert_ne!(want, sequential);

    let t = TreeBusProgram::new(MergeOp::Add, 5, 1);
    assert!(t.post_scale);
    assert_eq!(t.combine(&refs, 10, Width::F32)[0], (want / 10.0) as f64);

    let t = TreeBusProgram::new(MergeOp::Max, 5, 1);
    assert!(!t.post_scale);
    assert_eq!(t.combine(&refs, 5, Width::F32)[0], 1e8);
}

#[test]
fn one_thread_tree_is_identity() {
    let t = TreeBusProgram::new(MergeOp::Add, 1, 3);
    assert_eq!(t.depth, 0);
    let p = [2.0, -4.0, 6.0];
    assert_eq!(t.combine(&[&p], 2, Width::F64), vec![1.0, -2.0, 3.0]);
    let lat = Latencies::default();
    // Stream, scale, broadcast.
    assert_eq!(t.cycles(&lat), 2 + 8 + 1);
    assert_eq!(TreeBusProgram::new(MergeOp::Add, 4, 3).cycles(&lat), 2 + 2 * 2 + 8 + 2 + 1);
}

fn setup(source: &str, threads: usize, acs: usize) -> (HDfg, ThreadPrograms, EngineConfig) {
    let g = build_hdfg(&dsl::compile(source).unwrap()).unwrap();
    let cfg = EngineConfig { threads, acs_per_thread: acs, ..Default::default() };
    let progs = ThreadSchedules::build(&g, &Target::from_config(&cfg)).unwrap().programs(&g, threads);
    (g, progs, cfg)
}

/// Merged values of one batch computed with the sequential evaluator.
fn reference_merge(g: &HDfg, tuples: &[Vec<f64>], threads: usize, width: Width) -> Vec<f64> {
    let op = AluOp::from_merge(g.merge.op);
    let mut ports = Vec::new();
    for k in 0..threads.min(tuples.len()) {
        let mut ev = Evaluator::new(g, width);
        ev.reset_accumulators();
        for j in (k..tuples.len()).step_by(threads) {
            ev.set_tuple(&tuples[j]);
            ev.run_phase(Phase::PerTuple);
        }
        ports.push(ev.node_values(g.merge_node));
    }
    (0..ports[0].len())
        .map(|e| {
            let mut level: Vec<f64> = ports.iter().map(|p| p[e]).collect();
            while level.len() > 1 {
                level = level.chunks(2).map(|c| if c.len() == 2 { eval(op, c[0], c[1], width) } else { c[0] }).collect();
            }
            if g.merge.op == MergeOp::Add {
                eval(AluOp::Div, level[0], tuples.len() as f64, width)
            } else {
                level[0]
            }
        })
        .collect()
}

#[test]
fn batches_match_the_sequential_evaluator() {
    for w in workloads::suite() {
        for (threads, acs) in [(1, 1), (3, 2), (4, 1), (8, 4)] {
            let (g, progs, cfg) = setup(w.source, threads, acs);
            let mut e = Engine::new(cfg, &g, &progs).unwrap();
            let tuples: Vec<Vec<f64>> = w.records.iter().take(g.merge.coefficient).map(|r| r.values()).collect();
            let refs: Vec<&[f64]> = tuples.iter().map(|v| v.as_slice()).collect();
            e.run_batch(&refs).unwrap();
            assert_eq!(e.merged(), reference_merge(&g, &tuples, threads, Width::F32), "{} t={threads} acs={acs}", w.name);
        }
    }
}

#[test]
fn replay_is_deterministic() {
    let w = workloads::logistic(4, 256);
    let (g, progs, cfg) = setup(w.source, 4, 2);
    let tuples: Vec<Vec<f64>> = w.records.iter().map(|r| r.values()).collect();
    let run = || {
        let mut e = Engine::new(cfg.clone(), &g, &progs).unwrap();
        let mut cycles = Vec::new();
        for b in tuples.chunks(g.merge.coefficient) {
            let refs: Vec<&[f64]> = b.iter().map(|v| v.as_slice()).collect();
            cycles.push(e.run_batch(&refs).unwrap());
        }
        let conv = e.check_convergence().unwrap();
        (e.model().to_vec(), cycles, conv)
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.0.iter().any(|&x| x != 0.0));
}

#[test]
fn batch_cycles_follow_the_round_robin_split() {
    let w = workloads::svm(2, 64);
    let (g, progs, cfg) = setup(w.source, 4, 1);
    let mut e = Engine::new(cfg, &g, &progs).unwrap();
    let tuples: Vec<Vec<f64>> = w.records.iter().take(6).map(|r| r.values()).collect();
    let refs: Vec<&[f64]> = tuples.iter().map(|v| v.as_slice()).collect();
    let c = e.run_batch(&refs).unwrap();
    // Threads 0 and 1 each get two tuples; the per-tuple replay has a fixed length.
    assert_eq!(c.compute, 2 * progs.per_tuple.makespan as u64);
    assert_eq!(c.tree, progs.tree.cycles(&Latencies::default()));
    assert_eq!(c.post_merge, progs.post_merge.makespan as u64);
    assert_eq!(e.run_batch(&[]).unwrap().total(), 0);
}

#[test]
fn trace_covers_every_issue() {
    let w = workloads::linear(1, 8);
    let (g, progs, cfg) = setup(w.source, 1, 2);
    let mut e = Engine::new(cfg, &g, &progs).unwrap();
    e.trace_thread0();
    let t = w.records[0].values();
    e.run_batch(&[&t]).unwrap();
    assert_eq!(e.thread0_trace().len(), g.phase_sub_nodes(Phase::PerTuple).count());
}

#[test]
fn engine_errors() {
    let w = workloads::linear(1, 8);
    let (g, progs, cfg) = setup(w.source, 2, 2);
    let mut e = Engine::new(cfg.clone(), &g, &progs).unwrap();
    assert_eq!(e.run_batch(&[&[1.0, 2.0]]), Err(EngineError::Arity { got: 2, want: e.tuple_len() }));
    let narrow = EngineConfig { acs_per_thread: 1, ..cfg.clone() };
    if progs.per_tuple.acs > 1 {
        assert!(matches!(Engine::new(narrow, &g, &progs), Err(EngineError::Config(_))));
    }
    assert!(matches!(Engine::new(EngineConfig { threads: 0, ..cfg }, &g, &progs), Err(EngineError::Config(_))));
}

#[test]
fn disabled_ops_are_unschedulable() {
    let g = build_hdfg(&dsl::compile(workloads::LOGISTIC).unwrap()).unwrap();
    let mut t = Target::new(1);
    t.enabled_ops.retain(|&op| op != AluOp::Sigmoid);
    assert_eq!(
        ThreadSchedules::build(&g, &t).unwrap_err(),
        dana::scheduler::SchedError::Unschedulable(AluOp::Sigmoid)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn any_thread_count_matches_reference(threads in 1usize..12, acs in 1usize..5, skip in 0usize..100, n in 1usize..40) {
        let w = workloads::svm(9, 200);
        let (g, progs, cfg) = setup(w.source, threads, acs);
        let mut e = Engine::new(cfg, &g, &progs).unwrap();
        let tuples: Vec<Vec<f64>> = w.records.iter().skip(skip).take(n).map(|r| r.values()).collect();
        let refs: Vec<&[f64]> = tuples.iter().map(|v| v.as_slice()).collect();
        e.run_batch(&refs).unwrap();
        prop_assert_eq!(e.merged(), reference_merge(&g, &tuples, threads, Width::F32));
    }
}
