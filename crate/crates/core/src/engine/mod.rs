//! Execution engine: threads of analytic clusters running static
//! micro-programs, joined by the merge tree bus.

pub mod alu;
pub mod micro;
pub mod sim;
pub mod tree_bus;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alu::{AluOp, Latencies, Width};
pub use micro::{AcInstr, AuInstr, Dst, Landing, Loc, MicroProgram, Side, Src, AUS_PER_AC};
pub use sim::{Issue, ThreadSim};
pub use tree_bus::{tree_depth, TreeBusProgram};

use crate::dsl::DeclKind;
use crate::translator::{HDfg, ScalarRef, Termination};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("cycle {cycle}: bus conflict on {bus}")]
    BusConflict { cycle: u64, bus: String },
    #[error("cycle {cycle}: ac{ac}.au{au} reads d{addr} before it is ready")]
    NotReady { cycle: u64, ac: usize, au: usize, addr: u32 },
    #[error("cycle {cycle}: ac{ac}.au{au} issued while busy")]
    Busy { cycle: u64, ac: usize, au: usize },
    #[error("cycle {cycle}: ac{ac}.au{au} has no instruction left")]
    CodeExhausted { cycle: u64, ac: usize, au: usize },
    #[error("cycle {cycle}: ac{ac}.au{au} expects {unit}, cluster issued {cluster}")]
    OpMismatch { cycle: u64, ac: usize, au: usize, cluster: AluOp, unit: AluOp },
    #[error("cycle {cycle}: ac{ac}.au{au} has no neighbor on that side")]
    NoNeighbor { cycle: u64, ac: usize, au: usize },
    #[error("cycle {cycle}: ac{ac}.au{au} bus FIFO underflow")]
    FifoUnderflow { cycle: u64, ac: usize, au: usize },
    #[error("cycle {cycle}: unit {unit} bus FIFO overflow")]
    FifoOverflow { cycle: u64, unit: usize },
    #[error("cycle {cycle}: unit {unit} address {addr} out of range")]
    Address { cycle: u64, unit: usize, addr: u32 },
    #[error("cycle {cycle}: op {op} is not enabled")]
    OpDisabled { cycle: u64, op: AluOp },
    #[error("tuple has {got} values, program expects {want}")]
    Arity { got: usize, want: usize },
    #[error("batch of {got} tuples exceeds {max}")]
    BatchTooLarge { got: usize, max: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub threads: usize,
    pub acs_per_thread: usize,
    pub latencies: Latencies,
    pub width: Width,
    pub data_mem_words: u32,
    pub bus_fifo_depth: usize,
    pub enabled_ops: Vec<AluOp>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threads: 1,
            acs_per_thread: 1,
            latencies: Latencies::default(),
            width: Width::F32,
            data_mem_words: 4096,
            bus_fifo_depth: 16,
            enabled_ops: AluOp::ALL.to_vec(),
        }
    }
}

impl EngineConfig {
    pub fn aus(&self) -> usize {
        self.threads * self.acs_per_thread * AUS_PER_AC
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.threads == 0 || self.acs_per_thread == 0 {
            return Err(EngineError::Config("threads and ACs per thread must be ≥ 1".into()));
        }
        if self.bus_fifo_depth == 0 {
            return Err(EngineError::Config("bus FIFO depth must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Everything one thread replays, plus the merge network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadPrograms {
    pub per_tuple: MicroProgram,
    /// Runs on thread 0 after each merge.
    pub post_merge: MicroProgram,
    /// Runs on thread 0 once per epoch, at 64-bit width.
    pub convergence: MicroProgram,
    pub tree: TreeBusProgram,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCycles {
    pub compute: u64,
    pub tree: u64,
    pub post_merge: u64,
}

impl BatchCycles {
    pub fn total(&self) -> u64 {
        self.compute + self.tree + self.post_merge
    }
}

/// Values visible to preloads: leaf variables, the last merge and the last
/// post-merge outputs.
#[derive(Debug, Clone)]
struct Values {
    merge_node: usize,
    vars: Vec<Vec<f64>>,
    merged: Vec<f64>,
    post: HashMap<ScalarRef, f64>,
}

impl Values {
    fn get(&self, r: &ScalarRef) -> f64 {
        match *r {
            ScalarRef::Var { var, idx } => self.vars[var][idx],
            ScalarRef::Const(bits) => f64::from_bits(bits),
            ScalarRef::Slot { node, slot } if node == self.merge_node => self.merged[slot],
            ScalarRef::Slot { .. } => self.post.get(r).copied().unwrap_or(0.0),
        }
    }
}

/// A running engine instance bound to one graph and its programs.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    cfg: EngineConfig,
    g: &'a HDfg,
    progs: &'a ThreadPrograms,
    threads: Vec<ThreadSim>,
    post: ThreadSim,
    conv: ThreadSim,
    values: Values,
    tuple_vars: Vec<usize>,
    tuple_len: usize,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: EngineConfig, g: &'a HDfg, progs: &'a ThreadPrograms) -> Result<Self, EngineError> {
        cfg.validate()?;
        for p in [&progs.per_tuple, &progs.post_merge, &progs.convergence] {
            if p.acs > cfg.acs_per_thread {
                return Err(EngineError::Config(format!("program uses {} ACs, thread has {}", p.acs, cfg.acs_per_thread)));
            }
            if p.data_words > cfg.data_mem_words {
                return Err(EngineError::Config(format!(
                    "program needs {} data words per AU, configured {}",
                    p.data_words, cfg.data_mem_words
                )));
            }
        }
        let width = cfg.width;
        let vars = g
            .vars
            .iter()
            .map(|v| match v.kind {
                DeclKind::Model | DeclKind::Meta => v.init.iter().map(|&x| width.round(x)).collect(),
                _ => vec![0.0; v.element_count()],
            })
            .collect();
        let mut tuple_vars = Vec::new();
        for kind in [DeclKind::Input, DeclKind::Output] {
            tuple_vars.extend(g.vars_of(kind).map(|(i, _)| i));
        }
        let tuple_len = tuple_vars.iter().map(|&v| g.vars[v].element_count()).sum();
        let mk = |p: &MicroProgram| ThreadSim::new(p, &cfg.latencies, cfg.bus_fifo_depth, &cfg.enabled_ops);
        let mut e = Engine {
            threads: (0..cfg.threads).map(|_| mk(&progs.per_tuple)).collect(),
            post: mk(&progs.post_merge),
            conv: mk(&progs.convergence),
            cfg,
            g,
            progs,
            values: Values {
                merge_node: g.merge_node,
                vars,
                merged: vec![g.merge.op.identity(); progs.tree.elements],
                post: HashMap::new(),
            },
            tuple_vars,
            tuple_len,
        };
        e.reload_consts();
        Ok(e)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn model(&self) -> &[f64] {
        &self.values.vars[self.g.model_var]
    }

    pub fn set_model(&mut self, values: &[f64]) {
        let w = self.cfg.width;
        self.values.vars[self.g.model_var] = values.iter().map(|&v| w.round(v)).collect();
        self.reload_consts();
    }

    /// Last merged values, after post-scaling.
    pub fn merged(&self) -> &[f64] {
        &self.values.merged
    }

    pub fn tuple_len(&self) -> usize {
        self.tuple_len
    }

    fn reload_consts(&mut self) {
        let v = &self.values;
        for t in &mut self.threads {
            t.load_consts(&self.progs.per_tuple, &|r| v.get(r));
        }
        self.post.load_consts(&self.progs.post_merge, &|r| v.get(r));
        self.conv.load_consts(&self.progs.convergence, &|r| v.get(r));
    }

    fn load_tuple(&mut self, tuple: &[f64]) -> Result<(), EngineError> {
        if tuple.len() != self.tuple_len {
            return Err(EngineError::Arity { got: tuple.len(), want: self.tuple_len });
        }
        let w = self.cfg.width;
        let mut at = 0;
        for &v in &self.tuple_vars {
            let dst = &mut self.values.vars[v];
            for d in dst.iter_mut() {
                *d = w.round(tuple[at]);
                at += 1;
            }
        }
        Ok(())
    }

    /// One mini-batch: per-thread update rule, tree merge, post-merge phase
    /// and model update.
    pub fn run_batch(&mut self, tuples: &[&[f64]]) -> Result<BatchCycles, EngineError> {
        let t = self.cfg.threads;
        let n = tuples.len();
        if n == 0 {
            return Ok(BatchCycles::default());
        }
        let identity = self.g.merge.op.identity();
        let populated = n.min(t);
        for k in 0..populated {
            self.threads[k].reset_accumulators(&self.progs.per_tuple, identity);
        }
        let mut per_thread = 0u64;
        for k in 0..populated {
            let mut ran = 0u64;
            for j in (k..n).step_by(t) {
                self.load_tuple(tuples[j])?;
                let v = &self.values;
                ran += self.threads[k].run(&self.progs.per_tuple, &|r| v.get(r))?;
            }
            per_thread = per_thread.max(ran);
        }
        let tree = &self.progs.tree;
        let elements = tree.elements;
        let ports: Vec<&[f64]> = self.threads[..populated]
            .iter()
            .map(|s| if s.port.len() >= elements { &s.port[..elements] } else { &s.port[..] })
            .collect();
        if ports.iter().any(|p| p.len() < elements) {
            return Err(EngineError::Config("tree port narrower than the merge".into()));
        }
        self.values.merged = tree.combine(&ports, n, self.cfg.width);
        let tree_cycles = tree.cycles(&self.cfg.latencies);

        let post_cycles = self.run_post_merge()?;
        let w = self.cfg.width;
        let model: Vec<f64> = self.g.model_update_refs().iter().map(|r| w.round(self.values.get(r))).collect();
        self.values.vars[self.g.model_var] = model;
        self.reload_consts();
        Ok(BatchCycles { compute: per_thread, tree: tree_cycles, post_merge: post_cycles })
    }

    fn run_post_merge(&mut self) -> Result<u64, EngineError> {
        let p = &self.progs.post_merge;
        let v = &self.values;
        let cycles = self.post.run(p, &|r| v.get(r))?;
        for (r, loc) in &p.outputs {
            let x = self.post.output(loc);
            self.values.post.insert(*r, x);
        }
        Ok(cycles)
    }

    /// Evaluate the termination condition on the last batch's values.
    /// Returns `(stop, cycles)`; epoch-count termination never stops here.
    pub fn check_convergence(&mut self) -> Result<(bool, u64), EngineError> {
        let Termination::Condition(cond) = self.g.termination else {
            return Ok((false, 0));
        };
        let p = &self.progs.convergence;
        let v = &self.values;
        self.conv.load_consts(p, &|r| v.get(r));
        let cycles = self.conv.run(p, &|r| v.get(r))?;
        let value = match p.outputs.iter().find(|(r, _)| *r == cond) {
            Some((_, loc)) => self.conv.output(loc),
            None => self.values.get(&cond),
        };
        Ok((value != 0.0, cycles))
    }

    /// Enable per-issue tracing on thread 0's update-rule replay.
    pub fn trace_thread0(&mut self) {
        self.threads[0].trace = Some(Vec::new());
    }

    pub fn thread0_trace(&self) -> &[Issue] {
        self.threads[0].trace.as_deref().unwrap_or(&[])
    }
}
