use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{estimate, nominal_epochs, DatasetMeta, DesignPoint, FpgaSpec, PerfEstimate, PlanError, ResourceAllocation};
use crate::dsl;
use crate::engine::{EngineConfig, ThreadPrograms};
use crate::pageio::PageLayoutConfig;
use crate::scheduler::ThreadSchedules;
use crate::strider::{self, StriderProgram};
use crate::translator::{self, HDfg};

pub const PLAN_FILE: &str = "plan.json";

/// A compiled accelerator: the selected design and every program it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorPlan {
    pub name: String,
    pub source: String,
    pub fingerprint: String,
    pub layout: PageLayoutConfig,
    pub fpga: FpgaSpec,
    pub strider: StriderProgram,
    pub engine: EngineConfig,
    pub allocation: ResourceAllocation,
    pub design: DesignPoint,
    pub schedules: ThreadSchedules,
    pub programs: ThreadPrograms,
    /// Every design point considered, in enumeration order.
    pub menu: Vec<DesignPoint>,
}

impl AcceleratorPlan {
    /// Rebuild the graph from the embedded source.
    pub fn graph(&self) -> Result<HDfg, PlanError> {
        let typed = dsl::compile(&self.source).map_err(|e| PlanError::Format(format!("embedded source: {e}")))?;
        translator::build_hdfg(&typed).map_err(|e| PlanError::Format(format!("embedded source: {e}")))
    }

    /// Re-estimate the selected design for another dataset.
    pub fn estimate_for(&self, meta: &DatasetMeta) -> Result<PerfEstimate, PlanError> {
        let g = self.graph()?;
        let d = &self.design;
        Ok(estimate(
            &g,
            d.threads,
            d.update_cycles,
            d.tree_cycles,
            d.post_merge_cycles,
            d.convergence_cycles,
            d.page_buffers,
            &self.strider,
            &self.layout,
            &self.fpga,
            meta,
            nominal_epochs(&g),
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let plan: AcceleratorPlan = serde_json::from_str(text).map_err(|e| PlanError::Format(e.to_string()))?;
        if plan.fingerprint != plan.layout.fingerprint() {
            return Err(PlanError::Format("layout fingerprint does not match the embedded layout".into()));
        }
        Ok(plan)
    }

    pub fn menu_table(&self) -> String {
        let mut s = String::from("threads,acs_per_thread,page_buffers,update,tree,post_merge,convergence,epoch_cycles,total_cycles\n");
        for p in &self.menu {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.threads,
                p.acs_per_thread,
                p.page_buffers,
                p.update_cycles,
                p.tree_cycles,
                p.post_merge_cycles,
                p.convergence_cycles,
                p.estimate.epoch_cycles,
                p.estimate.total_cycles
            ));
        }
        s
    }
}

fn io(path: &Path, e: std::io::Error) -> PlanError {
    PlanError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn put(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PlanError> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| io(&p, e))
}

/// Write the plan and its human-readable artifacts into `dir`.
pub fn write_plan(plan: &AcceleratorPlan, dir: &Path) -> Result<(), PlanError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    put(dir, PLAN_FILE, plan.to_json().as_bytes())?;
    put(dir, "udf.dana", plan.source.as_bytes())?;
    put(dir, "layout.toml", plan.layout.to_kv().as_bytes())?;
    put(dir, "fpga.toml", plan.fpga.to_kv().as_bytes())?;
    put(dir, "strider.bin", &plan.strider.to_bytes())?;
    put(dir, "strider.s", strider::disassemble(&plan.strider).as_bytes())?;
    put(dir, "micro_update.txt", plan.programs.per_tuple.listing().as_bytes())?;
    put(dir, "micro_post_merge.txt", plan.programs.post_merge.listing().as_bytes())?;
    put(dir, "micro_convergence.txt", plan.programs.convergence.listing().as_bytes())?;
    put(dir, "schedule.csv", plan.schedules.per_tuple.occupancy_csv().as_bytes())?;
    put(dir, "estimate.txt", plan.design.estimate.to_kv().as_bytes())?;
    put(dir, "designs.csv", plan.menu_table().as_bytes())?;
    Ok(())
}

pub fn load_plan(dir: &Path) -> Result<AcceleratorPlan, PlanError> {
    let p = dir.join(PLAN_FILE);
    let text = fs::read_to_string(&p).map_err(|e| io(&p, e))?;
    AcceleratorPlan::from_json(&text)
}
