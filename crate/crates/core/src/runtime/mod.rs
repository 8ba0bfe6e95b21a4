//! Training driver: buffer pool, page transfer, strider extraction and
//! engine batches on one cycle timeline, plus the software reference
//! trainer.

mod pool;
mod reference;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pool::{BufferPoolSim, DEFAULT_POOL_BYTES};
pub use reference::{reference_train, RefMode, RefRun};

use crate::engine::{Engine, EngineError};
use crate::pageio::{decode_values, read_reference, Dataset, PageError, PageImage};
use crate::planner::{AcceleratorPlan, PlanError};
use crate::strider::{self, StriderError};
use crate::translator::{HDfg, Termination};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("dataset layout {data} does not match plan layout {plan}")]
    Fingerprint { plan: String, data: String },
    #[error("tuple has {got} values, model expects {want}")]
    Arity { got: usize, want: usize },
    #[error("non-finite model value in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("page {page}: {source}")]
    Strider { page: usize, source: StriderError },
    #[error(transparent)]
    Page(#[from] PageError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    /// Extract tuples on the host instead of the striders.
    pub no_strider: bool,
    /// Host cycles charged per tuple handed to the engine without striders.
    pub handoff_penalty: u64,
    pub pool_bytes: u64,
    /// Epoch cap for condition-terminated programs.
    pub max_epochs: usize,
    /// Shuffle page order each epoch with this seed.
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            no_strider: false,
            handoff_penalty: 150,
            pool_bytes: DEFAULT_POOL_BYTES,
            max_epochs: 1000,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub start: u64,
    pub end: u64,
    pub batches: usize,
    pub tuples: usize,
    pub pages: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub converged: bool,
    pub no_strider: bool,
    pub total_cycles: u64,
    pub seconds: f64,
    pub transfer_cycles: u64,
    pub strider_cycles: u64,
    pub host_extract_cycles: u64,
    pub compute_cycles: u64,
    pub tree_cycles: u64,
    pub post_merge_cycles: u64,
    pub convergence_cycles: u64,
    /// Cycles the engine waited for tuples.
    pub stall_cycles: u64,
    pub pages_delivered: u64,
    pub tuples_consumed: u64,
    pub pool_hits: u64,
    pub pool_misses: u64,
    #[serde(skip)]
    pub per_epoch: Vec<EpochRow>,
}

impl TrainReport {
    pub fn to_kv(&self) -> String {
        toml::to_string(self).expect("flat table")
    }

    pub fn epochs_csv(&self) -> String {
        let mut s = String::from("epoch,start,end,cycles,batches,tuples,pages\n");
        for r in &self.per_epoch {
            let _ = writeln!(s, "{},{},{},{},{},{},{}", r.epoch, r.start, r.end, r.end - r.start, r.batches, r.tuples, r.pages);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub model: Vec<f64>,
    pub report: TrainReport,
    /// Merged value of every batch of the first epoch.
    pub first_epoch_merges: Vec<Vec<f64>>,
}

/// Model values as CSV: one row per leading index, scalars on one line.
pub fn model_csv(g: &HDfg, model: &[f64]) -> String {
    let dims = &g.vars[g.model_var].dims;
    let row = dims.last().copied().unwrap_or(1).max(1);
    model.chunks(row).map(|r| r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",") + "\n").collect()
}

struct Extracted {
    tuples: Vec<Vec<f64>>,
    /// Strider cycles, or host extraction cycles without striders.
    cycles: u64,
    /// Bytes moved over the off-chip link.
    bytes: u64,
}

fn extract(
    plan: &AcceleratorPlan,
    page: &PageImage,
    index: usize,
    opts: &TrainOptions,
    want: usize,
) -> Result<Extracted, RuntimeError> {
    let layout = &plan.layout;
    let tuples: Vec<Vec<f64>>;
    let cycles;
    let bytes;
    if opts.no_strider {
        let records = read_reference(page, layout)?;
        let payload = layout.payload_len() as u64;
        tuples = records.iter().map(|r| r.values()).collect();
        cycles = tuples.len() as u64 * (opts.handoff_penalty + payload.div_ceil(8));
        bytes = tuples.len() as u64 * payload;
    } else {
        let budget = 64 * layout.page_size as u64 + 4096;
        let run = strider::execute(&plan.strider, &page.bytes, budget).map_err(|source| RuntimeError::Strider { page: index, source })?;
        tuples = run.payloads.iter().map(|p| decode_values(p, layout.value_width)).collect();
        cycles = run.cycles;
        bytes = layout.page_size as u64;
    }
    if let Some(t) = tuples.iter().find(|t| t.len() != want) {
        return Err(RuntimeError::Arity { got: t.len(), want });
    }
    Ok(Extracted { tuples, cycles, bytes })
}

pub fn train(plan: &AcceleratorPlan, dataset: &Dataset, opts: &TrainOptions) -> Result<TrainingRun, RuntimeError> {
    if dataset.manifest.fingerprint != plan.fingerprint {
        return Err(RuntimeError::Fingerprint { plan: plan.fingerprint.clone(), data: dataset.manifest.fingerprint.clone() });
    }
    let mut pool = BufferPoolSim::new(dataset, opts.pool_bytes);
    train_with_pool(plan, &mut pool, opts)
}

/// Train from pages already in memory.
pub fn train_pages(plan: &AcceleratorPlan, pages: &[PageImage], opts: &TrainOptions) -> Result<TrainingRun, RuntimeError> {
    let mut pool = BufferPoolSim::from_pages(pages, plan.layout.page_size, opts.pool_bytes);
    train_with_pool(plan, &mut pool, opts)
}

fn train_with_pool(plan: &AcceleratorPlan, pool: &mut BufferPoolSim, opts: &TrainOptions) -> Result<TrainingRun, RuntimeError> {
    let g = plan.graph()?;
    let mut engine = Engine::new(plan.engine.clone(), &g, &plan.programs)?;
    let want = engine.tuple_len();
    let bpc = plan.fpga.bytes_per_cycle();
    let buffers = plan.allocation.page_buffer_count.max(1);
    let c = g.merge.coefficient.max(1);
    let n_pages = pool.page_count();
    let epochs = match g.termination {
        Termination::Epochs(n) => n,
        Termination::Condition(_) => opts.max_epochs,
    };

    // Extraction is deterministic per page; do it once.
    let mut pages: Vec<Option<Extracted>> = (0..n_pages).map(|_| None).collect();
    let mut report = TrainReport { no_strider: opts.no_strider, ..TrainReport::default() };
    let mut first_epoch_merges = Vec::new();
    let mut now = 0u64;
    let mut order: Vec<usize> = (0..n_pages).collect();

    for epoch in 0..epochs {
        if let Some(seed) = opts.shuffle_seed {
            order = (0..n_pages).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch as u64)));
        }
        let start = now;
        // Per page: when its tuples are available to the engine.
        let mut ready_at = Vec::with_capacity(n_pages);
        let mut xfer_end = start;
        let mut host_end = start;
        let mut strider_end: Vec<u64> = Vec::with_capacity(n_pages);
        for (slot, &p) in order.iter().enumerate() {
            let page = pool.fetch(p)?;
            if pages[p].is_none() {
                pages[p] = Some(extract(plan, page, p, opts, want)?);
            }
            let x = pages[p].as_ref().expect("extracted");
            let t = (x.bytes as f64 / bpc).ceil() as u64;
            report.transfer_cycles += t;
            if opts.no_strider {
                host_end += x.cycles;
                report.host_extract_cycles += x.cycles;
                let begin = host_end.max(xfer_end);
                xfer_end = begin + t;
                ready_at.push(xfer_end);
            } else {
                let free = if slot >= buffers { strider_end[slot - buffers] } else { start };
                let begin = xfer_end.max(free);
                xfer_end = begin + t;
                let end = xfer_end + x.cycles;
                report.strider_cycles += x.cycles;
                strider_end.push(end);
                ready_at.push(end);
            }
        }
        report.pages_delivered += n_pages as u64;

        // Tuple stream in page order, tagged with availability.
        let stream: Vec<(&[f64], u64)> = order
            .iter()
            .zip(&ready_at)
            .flat_map(|(&p, &r)| pages[p].as_ref().expect("extracted").tuples.iter().map(move |t| (t.as_slice(), r)))
            .collect();
        let mut t_end = start;
        let mut batches = 0;
        for chunk in stream.chunks(c) {
            let avail = chunk.iter().map(|(_, r)| *r).max().unwrap_or(start);
            let begin = t_end.max(avail);
            report.stall_cycles += begin - t_end;
            let refs: Vec<&[f64]> = chunk.iter().map(|(t, _)| *t).collect();
            let cyc = engine.run_batch(&refs)?;
            if engine.model().iter().any(|v| !v.is_finite()) {
                return Err(RuntimeError::NonFinite { epoch: epoch + 1 });
            }
            if epoch == 0 {
                first_epoch_merges.push(engine.merged().to_vec());
            }
            report.compute_cycles += cyc.compute;
            report.tree_cycles += cyc.tree;
            report.post_merge_cycles += cyc.post_merge;
            t_end = begin + cyc.total();
            batches += 1;
        }
        report.tuples_consumed += stream.len() as u64;
        let (stop, conv) = engine.check_convergence()?;
        report.convergence_cycles += conv;
        now = t_end.max(xfer_end) + conv;
        report.per_epoch.push(EpochRow { epoch: epoch + 1, start, end: now, batches, tuples: stream.len(), pages: n_pages });
        report.epochs = epoch + 1;
        if stop {
            report.converged = true;
            break;
        }
    }
    report.total_cycles = now;
    report.seconds = now as f64 / plan.fpga.clock_hz();
    report.pool_hits = pool.hits;
    report.pool_misses = pool.misses;
    Ok(TrainingRun { model: engine.model().to_vec(), report, first_epoch_merges })
}

/// Tuples of a dataset in the order the engine consumes them.
pub fn dataset_tuples(dataset: &Dataset) -> Result<Vec<Vec<f64>>, RuntimeError> {
    Ok(dataset.records()?.iter().map(|r| r.values()).collect())
}
