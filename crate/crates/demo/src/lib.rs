//! Browser bindings: compile a UDF, sweep thread counts, view a schedule.
//! Every call returns JSON; failures come back as `{"error": "..."}`.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use dana::dsl::{self, DeclKind, Phase};
use dana::pageio::PageLayoutConfig;
use dana::planner::{DatasetMeta, FpgaSpec, Planner};
use dana::scheduler::{schedule, Target};
use dana::translator::{self, HDfg};
use dana::workloads;

fn graph(source: &str) -> Result<HDfg, String> {
    let typed = dsl::compile(source).map_err(|e| format!("dsl: {e}"))?;
    translator::build_hdfg(&typed).map_err(|e| format!("translator: {e}"))
}

/// One tuple holds every input, then every output, of the UDF.
fn layout_for(g: &HDfg) -> PageLayoutConfig {
    let count = |k| g.vars_of(k).map(|(_, v)| v.element_count()).sum::<usize>();
    PageLayoutConfig::new(count(DeclKind::Input), count(DeclKind::Output))
}

fn reply<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("serializable"),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen]
pub fn presets() -> String {
    let list: Vec<_> = workloads::suite().iter().map(|w| json!({ "name": w.name, "source": w.source })).collect();
    serde_json::to_string(&list).expect("serializable")
}

/// Graph summary: nodes with their ops, dims and phases, plus scalar
/// sub-node counts per phase.
#[wasm_bindgen]
pub fn compile_udf(source: &str) -> String {
    reply(graph(source).map(|g| {
        let nodes: Vec<_> = g
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                json!({
                    "id": i,
                    "op": format!("{:?}", n.op),
                    "dims": n.dims,
                    "phase": format!("{:?}", n.phase),
                    "region": format!("{:?}", n.region),
                    "sub_nodes": n.sub_nodes.len(),
                })
            })
            .collect();
        let per_phase: Vec<_> = [Phase::PerTuple, Phase::PostMerge, Phase::Convergence]
            .iter()
            .map(|&p| json!({ "phase": format!("{p:?}"), "sub_nodes": g.phase_sub_nodes(p).count() }))
            .collect();
        let layout = layout_for(&g);
        json!({
            "name": g.name,
            "vars": g.vars.iter().map(|v| json!({ "name": v.name, "kind": v.kind.keyword(), "dims": v.dims })).collect::<Vec<_>>(),
            "nodes": nodes,
            "phases": per_phase,
            "merge": { "var": g.merge.var, "coefficient": g.merge.coefficient },
            "tuple_bytes": layout.tuple_len(),
            "tuples_per_page": layout.capacity(),
        })
    }))
}

/// Every enumerated design point for `tuples` tuples at the given off-chip
/// bandwidth, and the one the planner selects.
#[wasm_bindgen]
pub fn sweep_threads(source: &str, tuples: usize, bandwidth_gbps: f64) -> String {
    reply(graph(source).and_then(|g| {
        let layout = layout_for(&g);
        let fpga = FpgaSpec { bandwidth_gbps, ..FpgaSpec::default() };
        let planner = Planner::new(&g, &layout, &fpga).map_err(|e| format!("planner: {e}"))?;
        let meta = DatasetMeta::new(&layout, tuples.max(1));
        let (best, menu) = planner.select(&meta).map_err(|e| format!("planner: {e}"))?;
        Ok(json!({ "selected": best.point.threads, "points": menu }))
    }))
}

/// Per-tuple schedule on one thread of `acs` clusters: one row per AU with
/// its busy intervals.
#[wasm_bindgen]
pub fn occupancy(source: &str, acs: usize) -> String {
    reply(graph(source).and_then(|g| {
        let s = schedule(&g, Phase::PerTuple, &Target::new(acs.clamp(1, 128))).map_err(|e| format!("scheduler: {e}"))?;
        let mut rows = vec![Vec::new(); s.acs * 8];
        for p in &s.placements {
            rows[p.ac as usize * 8 + p.au as usize].push(json!([p.cycle, p.latency, p.op.name()]));
        }
        Ok(json!({
            "makespan": s.makespan,
            "acs": s.acs,
            "acs_used": s.acs_used().len(),
            "transfers": s.comms.len(),
            "rows": rows,
        }))
    }))
}
