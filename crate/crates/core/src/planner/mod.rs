//! Hardware generator: resource allocation, design-point enumeration,
//! static performance estimation and plan selection.

mod plan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plan::{load_plan, write_plan, AcceleratorPlan, PLAN_FILE};

use crate::engine::{EngineConfig, Latencies, ThreadPrograms, Width, AUS_PER_AC};
use crate::pageio::PageLayoutConfig;
use crate::scheduler::{SchedError, Target, ThreadSchedules};
use crate::strider::{self, StriderProgram};
use crate::translator::{HDfg, Termination};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("insufficient BRAM: {need} bytes needed before page buffers, {have} available")]
    Bram { need: u64, have: u64 },
    #[error("invalid FPGA spec: {0}")]
    Spec(String),
    #[error("no feasible design point: {0}")]
    NoDesign(String),
    #[error("schedule: {0}")]
    Schedule(#[from] SchedError),
    #[error("strider: {0}")]
    Strider(#[from] strider::StriderError),
    #[error("layout: {0}")]
    Layout(String),
    #[error("plan: {0}")]
    Format(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Target FPGA. Read from a key-value file; missing keys take the defaults
/// of a large UltraScale+ part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpgaSpec {
    pub dsp_count: u32,
    pub bram_blocks: u32,
    pub bram_kbits_per_block: u32,
    pub bram_ports: u32,
    /// Off-chip bandwidth in gigabytes per second.
    pub bandwidth_gbps: f64,
    pub clock_mhz: f64,
    pub dsp_per_au: u32,
    pub max_aus: u32,
}

impl Default for FpgaSpec {
    fn default() -> Self {
        FpgaSpec {
            dsp_count: 6840,
            bram_blocks: 2160,
            bram_kbits_per_block: 36,
            bram_ports: 2,
            bandwidth_gbps: 16.0,
            clock_mhz: 150.0,
            dsp_per_au: 6,
            max_aus: 1024,
        }
    }
}

impl FpgaSpec {
    pub fn from_kv(text: &str) -> Result<Self, PlanError> {
        let spec: FpgaSpec = toml::from_str(text).map_err(|e| PlanError::Spec(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv(&self) -> String {
        toml::to_string(self).expect("flat table")
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let ints = [
            ("dsp_count", self.dsp_count),
            ("bram_blocks", self.bram_blocks),
            ("bram_kbits_per_block", self.bram_kbits_per_block),
            ("bram_ports", self.bram_ports),
            ("dsp_per_au", self.dsp_per_au),
            ("max_aus", self.max_aus),
        ];
        if let Some((k, _)) = ints.iter().find(|(_, v)| *v == 0) {
            return Err(PlanError::Spec(format!("{k} must be positive")));
        }
        if !(self.bandwidth_gbps > 0.0) || !(self.clock_mhz > 0.0) {
            return Err(PlanError::Spec("bandwidth_gbps and clock_mhz must be positive".into()));
        }
        if self.au_count() == 0 {
            return Err(PlanError::Spec("fewer than 8 AUs fit".into()));
        }
        Ok(())
    }

    pub fn bram_bytes(&self) -> u64 {
        self.bram_blocks as u64 * self.bram_kbits_per_block as u64 * 1024 / 8
    }

    pub fn clock_hz(&self) -> f64 {
        self.clock_mhz * 1e6
    }

    /// Off-chip bytes moved per clock cycle.
    pub fn bytes_per_cycle(&self) -> f64 {
        self.bandwidth_gbps * 1e9 / self.clock_hz()
    }

    pub fn au_count(&self) -> usize {
        let aus = (self.dsp_count / self.dsp_per_au).min(self.max_aus) as usize;
        aus / AUS_PER_AC * AUS_PER_AC
    }

    pub fn ac_count(&self) -> usize {
        self.au_count() / AUS_PER_AC
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceAllocation {
    pub threads: usize,
    /// One model replica per thread.
    pub model_bytes: u64,
    /// Double-buffered extracted-tuple storage per thread.
    pub tuple_buffer_bytes: u64,
    pub page_buffer_count: usize,
    pub page_buffer_bytes: u64,
    pub au_count: usize,
    pub ac_count: usize,
}

/// Carve BRAM for `threads` model replicas and tuple buffers, then give the
/// remainder to page buffers.
pub fn allocate(
    fpga: &FpgaSpec,
    layout: &PageLayoutConfig,
    model_bytes: u64,
    tuple_bytes: u64,
    threads: usize,
) -> Result<ResourceAllocation, PlanError> {
    let have = fpga.bram_bytes();
    let model = model_bytes * threads as u64;
    let tuples = 2 * tuple_bytes * threads as u64;
    let page = layout.page_size as u64;
    let need = model + tuples;
    if need + page > have {
        return Err(PlanError::Bram { need: need + page, have });
    }
    let count = ((have - need) / page) as usize;
    Ok(ResourceAllocation {
        threads,
        model_bytes: model,
        tuple_buffer_bytes: tuples,
        page_buffer_count: count,
        page_buffer_bytes: count as u64 * page,
        au_count: fpga.au_count(),
        ac_count: fpga.ac_count(),
    })
}

/// Dataset size the estimate is made for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub tuples: usize,
    pub pages: usize,
    pub tuples_per_page: usize,
}

impl DatasetMeta {
    pub fn new(layout: &PageLayoutConfig, tuples: usize) -> Self {
        let per = layout.capacity().max(1);
        DatasetMeta { tuples, pages: tuples.div_ceil(per), tuples_per_page: per }
    }

    /// Used at compile time when no dataset is at hand: 64 full pages.
    pub fn nominal(layout: &PageLayoutConfig) -> Self {
        Self::new(layout, 64 * layout.capacity().max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfEstimate {
    pub transfer_cycles_per_page: u64,
    pub strider_cycles_per_page: u64,
    pub compute_cycles_per_page: u64,
    /// Update rule, tree merge and post-merge of one full batch.
    pub batch_cycles: u64,
    pub convergence_cycles: u64,
    pub epoch_cycles: u64,
    pub epochs: usize,
    pub total_cycles: u64,
    pub total_seconds: f64,
}

impl PerfEstimate {
    pub fn to_kv(&self) -> String {
        toml::to_string(self).expect("flat table")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub threads: usize,
    pub acs_per_thread: usize,
    pub page_buffers: usize,
    /// Makespans of the three phases.
    pub update_cycles: u64,
    pub post_merge_cycles: u64,
    pub convergence_cycles: u64,
    pub tree_cycles: u64,
    pub estimate: PerfEstimate,
}

/// Engine cycles for one epoch of `tuples` tuples in batches of `coefficient`.
pub fn epoch_compute_cycles(tuples: usize, coefficient: usize, threads: usize, update: u64, tree: u64, post: u64) -> u64 {
    let batch = |n: usize| n.div_ceil(threads) as u64 * update + tree + post;
    let full = tuples / coefficient;
    let rest = tuples % coefficient;
    full as u64 * batch(coefficient) + if rest > 0 { batch(rest) } else { 0 }
}

/// Expected epoch count: the epoch setting, or one epoch for
/// condition-terminated programs.
pub fn nominal_epochs(g: &HDfg) -> usize {
    match g.termination {
        Termination::Epochs(n) => n,
        Termination::Condition(_) => 1,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn estimate(
    g: &HDfg,
    threads: usize,
    update: u64,
    tree: u64,
    post: u64,
    convergence: u64,
    page_buffers: usize,
    strider_program: &StriderProgram,
    layout: &PageLayoutConfig,
    fpga: &FpgaSpec,
    meta: &DatasetMeta,
    epochs: usize,
) -> PerfEstimate {
    let pages = meta.pages.max(1) as u64;
    let t = (layout.page_size as f64 / fpga.bytes_per_cycle()).ceil() as u64;
    let per = meta.tuples_per_page.max(1);
    let first = strider::page_cycles(strider_program, layout, meta.tuples.min(per));
    let full = (meta.tuples / per) as u64;
    let rest = meta.tuples % per;
    let all = full * strider::page_cycles(strider_program, layout, per)
        + if rest > 0 { strider::page_cycles(strider_program, layout, rest) } else { 0 };
    let s = all.div_ceil(pages);
    let compute = epoch_compute_cycles(meta.tuples, g.merge.coefficient, threads, update, tree, post);
    let c_page = compute.div_ceil(pages);
    let conv = if matches!(g.termination, Termination::Condition(_)) { convergence } else { 0 };
    let b = page_buffers.max(1) as u64;
    let period = t.max((t + s).div_ceil(b)).max(c_page);
    let epoch = (t + first) + (pages - 1) * period + c_page + conv;
    let total = epoch * epochs as u64;
    PerfEstimate {
        transfer_cycles_per_page: t,
        strider_cycles_per_page: s,
        compute_cycles_per_page: c_page,
        batch_cycles: g.merge.coefficient.div_ceil(threads) as u64 * update + tree + post,
        convergence_cycles: conv,
        epoch_cycles: epoch,
        epochs,
        total_cycles: total,
        total_seconds: total as f64 / fpga.clock_hz(),
    }
}

/// Thread counts tried for a merge coefficient: its divisors and the powers
/// of two, capped by the coefficient and the AC count.
pub fn candidate_threads(coefficient: usize, ac_count: usize) -> Vec<usize> {
    let cap = coefficient.min(ac_count).max(1);
    let mut v: Vec<usize> = (1..=cap).filter(|t| coefficient % t == 0 || t.is_power_of_two()).collect();
    v.dedup();
    v
}

fn width_of(layout: &PageLayoutConfig) -> Result<Width, PlanError> {
    Width::from_bytes(layout.value_width).ok_or_else(|| PlanError::Layout(format!("value width {}", layout.value_width)))
}

pub fn model_bytes(g: &HDfg, layout: &PageLayoutConfig) -> u64 {
    (g.vars[g.model_var].element_count() * layout.value_width) as u64
}

/// Everything needed to evaluate and materialize one design point.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub point: DesignPoint,
    pub allocation: ResourceAllocation,
    pub engine: EngineConfig,
    pub schedules: ThreadSchedules,
}

impl Candidate {
    pub fn programs(&self, g: &HDfg) -> ThreadPrograms {
        self.schedules.programs(g, self.engine.threads)
    }
}

pub struct Planner<'a> {
    pub g: &'a HDfg,
    pub layout: &'a PageLayoutConfig,
    pub fpga: &'a FpgaSpec,
    pub latencies: Latencies,
    pub strider: StriderProgram,
}

impl<'a> Planner<'a> {
    pub fn new(g: &'a HDfg, layout: &'a PageLayoutConfig, fpga: &'a FpgaSpec) -> Result<Self, PlanError> {
        fpga.validate()?;
        layout.validate().map_err(|e| PlanError::Layout(e.to_string()))?;
        let strider = strider::generate_program(layout)?;
        Ok(Planner { g, layout, fpga, latencies: Latencies::default(), strider })
    }

    /// Schedule and estimate one thread count.
    pub fn evaluate(&self, threads: usize, meta: &DatasetMeta) -> Result<Candidate, PlanError> {
        let g = self.g;
        let tuple_bytes = self.layout.payload_len() as u64;
        let allocation = allocate(self.fpga, self.layout, model_bytes(g, self.layout), tuple_bytes, threads)?;
        let acs = allocation.ac_count / threads;
        if acs == 0 {
            return Err(PlanError::NoDesign(format!("{threads} threads exceed {} ACs", allocation.ac_count)));
        }
        let engine = EngineConfig {
            threads,
            acs_per_thread: acs,
            latencies: self.latencies.clone(),
            width: width_of(self.layout)?,
            ..EngineConfig::default()
        };
        let schedules = ThreadSchedules::build(g, &Target::from_config(&engine))?;
        let tree = crate::scheduler::tree_program(g, threads).cycles(&self.latencies);
        let (update, post, conv) = (
            schedules.per_tuple.makespan as u64,
            schedules.post_merge.makespan as u64,
            schedules.convergence.makespan as u64,
        );
        let estimate = estimate(
            g,
            threads,
            update,
            tree,
            post,
            conv,
            allocation.page_buffer_count,
            &self.strider,
            self.layout,
            self.fpga,
            meta,
            nominal_epochs(g),
        );
        let point = DesignPoint {
            threads,
            acs_per_thread: acs,
            page_buffers: allocation.page_buffer_count,
            update_cycles: update,
            post_merge_cycles: post,
            convergence_cycles: conv,
            tree_cycles: tree,
            estimate,
        };
        Ok(Candidate { point, allocation, engine, schedules })
    }

    /// Every enumerated design point that can be built.
    pub fn enumerate(&self, meta: &DatasetMeta) -> Result<Vec<Candidate>, PlanError> {
        let mut out = Vec::new();
        let mut last_err = None;
        for t in candidate_threads(self.g.merge.coefficient, self.fpga.ac_count()) {
            match self.evaluate(t, meta) {
                Ok(c) => out.push(c),
                Err(e @ (PlanError::Bram { .. } | PlanError::Schedule(SchedError::Memory { .. }))) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        if out.is_empty() {
            return Err(last_err.unwrap_or_else(|| PlanError::NoDesign("no candidate thread count".into())));
        }
        Ok(out)
    }

    /// The fastest point; ties go to fewer threads.
    pub fn select(&self, meta: &DatasetMeta) -> Result<(Candidate, Vec<DesignPoint>), PlanError> {
        let all = self.enumerate(meta)?;
        let menu: Vec<DesignPoint> = all.iter().map(|c| c.point.clone()).collect();
        let best = all
            .into_iter()
            .min_by_key(|c| (c.point.estimate.total_cycles, c.point.threads))
            .expect("non-empty");
        Ok((best, menu))
    }
}

/// Plan the accelerator for `source` (already compiled into `g`).
pub fn select_design(
    source: &str,
    g: &HDfg,
    layout: &PageLayoutConfig,
    fpga: &FpgaSpec,
    meta: &DatasetMeta,
) -> Result<AcceleratorPlan, PlanError> {
    let planner = Planner::new(g, layout, fpga)?;
    let (best, menu) = planner.select(meta)?;
    Ok(AcceleratorPlan {
        name: g.name.clone(),
        source: source.to_string(),
        fingerprint: layout.fingerprint(),
        layout: layout.clone(),
        fpga: fpga.clone(),
        programs: best.programs(g),
        strider: planner.strider,
        engine: best.engine,
        allocation: best.allocation,
        design: best.point,
        schedules: best.schedules,
        menu,
    })
}
