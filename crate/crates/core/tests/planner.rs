use dana::dsl;
use dana::pageio::PageLayoutConfig;
use dana::planner::{
    allocate, candidate_threads, epoch_compute_cycles, load_plan, select_design, write_plan, AcceleratorPlan,
    DatasetMeta, FpgaSpec, PlanError, Planner,
};
use dana::strider;
use dana::translator::{build_hdfg, HDfg};
use dana::workloads;
use proptest::prelude::*;

fn graph(src: &str) -> HDfg {
    build_hdfg(&dsl::compile(src).unwrap()).unwrap()
}

#[test]
fn default_fabric() {
    let f = FpgaSpec::default();
    assert_eq!(f.au_count(), 1024);
    assert_eq!(f.ac_count(), 128);
    assert_eq!(f.bram_bytes(), 2160 * 36 * 1024 / 8);
    assert!((f.bytes_per_cycle() - 16e9 / 150e6).abs() < 1e-9);
    // 6840 / 6 = 1140 units before the cap; rounding keeps whole clusters.
    let uncapped = FpgaSpec { max_aus: 4096, ..f.clone() };
    assert_eq!(uncapped.au_count(), 1136);
    let small = FpgaSpec { dsp_count: 60, ..f };
    assert_eq!(small.au_count(), 8);
}

#[test]
fn spec_files() {
    let f = FpgaSpec::from_kv("bandwidth_gbps = 4.0\nclock_mhz = 200\n").unwrap();
    assert_eq!((f.bandwidth_gbps, f.clock_mhz, f.dsp_count), (4.0, 200.0, 6840));
    assert_eq!(FpgaSpec::from_kv(&f.to_kv()).unwrap(), f);
    assert!(matches!(FpgaSpec::from_kv("dsp_count = 0"), Err(PlanError::Spec(_))));
    assert!(matches!(FpgaSpec::from_kv("lut_count = 5"), Err(PlanError::Spec(_))));
    assert!(matches!(FpgaSpec::from_kv("dsp_count = 12"), Err(PlanError::Spec(m)) if m.contains("8 AUs")));
    assert!(FpgaSpec::from_kv("bandwidth_gbps = -1.0").is_err());
}

#[test]
fn thread_counts_are_bounded_by_clusters() {
    let t = candidate_threads(2048, 128);
    assert_eq!(*t.last().unwrap(), 128);
    assert_eq!(candidate_threads(8, 128), vec![1, 2, 4, 8]);
    assert_eq!(candidate_threads(12, 128), vec![1, 2, 3, 4, 6, 8, 12]);
    assert_eq!(candidate_threads(1, 128), vec![1]);
    assert_eq!(candidate_threads(100, 4), vec![1, 2, 4]);
}

#[test]
fn page_buffer_boundary() {
    let layout = PageLayoutConfig::new(4, 1);
    let page = 32768u64;
    let (model, tuple) = (400u64, 20u64);
    let need = model + 2 * tuple;
    let bits = |bytes: u64| FpgaSpec { bram_blocks: 1, bram_kbits_per_block: (bytes * 8 / 1024) as u32, ..FpgaSpec::default() };
    // Exactly one page buffer fits beside the model and tuple buffers.
    let f = bits(need + page + 1024 - (need + page) % 1024);
    let a = allocate(&f, &layout, model, tuple, 1).unwrap();
    assert_eq!(a.page_buffer_count, 1);
    assert_eq!(a.page_buffer_bytes, page);
    let f = bits(need + page - (need + page) % 1024);
    assert!(matches!(allocate(&f, &layout, model, tuple, 1), Err(PlanError::Bram { .. })));
}

#[test]
fn doubling_bram_doubles_buffers() {
    let layout = PageLayoutConfig::new(10, 1);
    let f = FpgaSpec::default();
    let a = allocate(&f, &layout, 40, 44, 8).unwrap();
    let big = FpgaSpec { bram_blocks: 2 * f.bram_blocks, ..f.clone() };
    let b = allocate(&big, &layout, 40, 44, 8).unwrap();
    assert!(b.page_buffer_count >= 2 * a.page_buffer_count);
    assert!(b.page_buffer_count <= 2 * a.page_buffer_count + 1);
    assert_eq!(a.page_buffer_count as u64, (f.bram_bytes() - 8 * 40 - 2 * 8 * 44) / 32768);
}

#[test]
fn coefficient_one_has_one_thread() {
    let src = workloads::LINEAR.replace("merge(grad, 8", "merge(grad, 1");
    assert_ne!(src, workloads::LINEAR);
    let g = graph(&src);
    let layout = workloads::linear(1, 4).layout;
    let plan = select_design(&src, &g, &layout, &FpgaSpec::default(), &DatasetMeta::nominal(&layout)).unwrap();
    assert_eq!(plan.design.threads, 1);
    assert_eq!(plan.menu.len(), 1);
    assert_eq!(plan.design.acs_per_thread, 128);
}

#[test]
fn epoch_compute_counts_partial_batches() {
    // 20 tuples, batches of 8 over 4 threads: two full batches and one of 4.
    let c = epoch_compute_cycles(20, 8, 4, 10, 3, 2);
    assert_eq!(c, 2 * (2 * 10 + 3 + 2) + (10 + 3 + 2));
    assert_eq!(epoch_compute_cycles(8, 8, 3, 10, 0, 0), 30);
}

#[test]
fn bandwidth_bound_estimate() {
    let w = workloads::linear(1, 4);
    let g = graph(w.source);
    let fpga = FpgaSpec { bandwidth_gbps: 0.1, ..FpgaSpec::default() };
    let planner = Planner::new(&g, &w.layout, &fpga).unwrap();
    let meta = DatasetMeta::new(&w.layout, 200 * w.layout.capacity());
    let (best, menu) = planner.select(&meta).unwrap();
    let t = (32768.0 / fpga.bytes_per_cycle()).ceil() as u64;
    let e = &best.point.estimate;
    assert_eq!(e.transfer_cycles_per_page, t);
    let ideal = meta.pages as u64 * t;
    assert!((e.epoch_cycles as f64 - ideal as f64).abs() / (ideal as f64) < 0.01, "{} vs {ideal}", e.epoch_cycles);
    // Thread count barely matters when the link is the bottleneck.
    for p in &menu {
        let r = p.estimate.total_cycles as f64 / e.total_cycles as f64;
        assert!((1.0..1.01).contains(&r), "t={} ratio {r}", p.threads);
    }
}

#[test]
fn compute_bound_estimate() {
    let w = workloads::lrmf(1, 4);
    let g = graph(w.source);
    let fpga = FpgaSpec::default();
    let planner = Planner::new(&g, &w.layout, &fpga).unwrap();
    let meta = DatasetMeta::new(&w.layout, 500 * w.layout.capacity());
    for c in planner.enumerate(&meta).unwrap() {
        let p = &c.point;
        let e = &p.estimate;
        assert!(e.compute_cycles_per_page >= e.transfer_cycles_per_page);
        let compute = epoch_compute_cycles(meta.tuples, g.merge.coefficient, p.threads, p.update_cycles, p.tree_cycles, p.post_merge_cycles);
        let rel = (e.epoch_cycles as f64 - compute as f64) / compute as f64;
        assert!((0.0..0.01).contains(&rel), "t={} rel {rel}", p.threads);
    }
}

#[test]
fn selection_is_the_argmin() {
    for w in workloads::suite() {
        let g = graph(w.source);
        let fpga = FpgaSpec::default();
        let planner = Planner::new(&g, &w.layout, &fpga).unwrap();
        let (best, menu) = planner.select(&DatasetMeta::nominal(&w.layout)).unwrap();
        let min = menu.iter().map(|p| p.estimate.total_cycles).min().unwrap();
        assert_eq!(best.point.estimate.total_cycles, min, "{}", w.name);
        let fewest = menu.iter().filter(|p| p.estimate.total_cycles == min).map(|p| p.threads).min().unwrap();
        assert_eq!(best.point.threads, fewest);
        assert!(menu.iter().all(|p| p.threads * p.acs_per_thread <= 128));
    }
}

#[test]
fn strider_term_uses_actual_fill() {
    let w = workloads::svm(1, 4);
    let g = graph(w.source);
    let fpga = FpgaSpec::default();
        let planner = Planner::new(&g, &w.layout, &fpga).unwrap();
    let cap = w.layout.capacity();
    let e = planner.evaluate(1, &DatasetMeta::new(&w.layout, cap + 1)).unwrap().point.estimate;
    let full = strider::page_cycles(&planner.strider, &w.layout, cap);
    let one = strider::page_cycles(&planner.strider, &w.layout, 1);
    assert_eq!(e.strider_cycles_per_page, (full + one).div_ceil(2));
}

#[test]
fn plan_directory_round_trip() {
    let w = workloads::logistic(1, 4);
    let g = graph(w.source);
    let plan = select_design(w.source, &g, &w.layout, &FpgaSpec::default(), &DatasetMeta::nominal(&w.layout)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_plan(&plan, dir.path()).unwrap();
    let back = load_plan(dir.path()).unwrap();
    assert_eq!(back, plan);
    assert_eq!(back.graph().unwrap(), g);
    assert_eq!(std::fs::read(dir.path().join("strider.bin")).unwrap(), plan.strider.to_bytes());
    let table = plan.menu_table();
    assert!(table.starts_with("threads,acs_per_thread,page_buffers,update,tree,post_merge,convergence,epoch_cycles,total_cycles\n"));
    assert_eq!(table.lines().count(), plan.menu.len() + 1);

    let tampered = plan.to_json().replacen(&plan.fingerprint, "0000000000000000", 1);
    assert!(matches!(AcceleratorPlan::from_json(&tampered), Err(PlanError::Format(_))));
    assert!(matches!(load_plan(&dir.path().join("nope")), Err(PlanError::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn estimates_grow_with_pages(pages in 1usize..200, extra in 1usize..100, bw in 0.5f64..64.0) {
        let w = workloads::svm(1, 4);
        let g = graph(w.source);
        let fpga = FpgaSpec { bandwidth_gbps: bw, ..FpgaSpec::default() };
        let planner = Planner::new(&g, &w.layout, &fpga).unwrap();
        let n = pages * w.layout.capacity();
        let a = planner.evaluate(4, &DatasetMeta::new(&w.layout, n)).unwrap().point.estimate;
        let b = planner.evaluate(4, &DatasetMeta::new(&w.layout, n + extra * w.layout.capacity())).unwrap().point.estimate;
        prop_assert!(b.epoch_cycles > a.epoch_cycles);
        prop_assert!(a.epoch_cycles >= a.transfer_cycles_per_page * pages as u64);
    }
}
