//! Cross-thread merge network: a binary tree of in-flight ALUs.

use serde::{Deserialize, Serialize};

use super::alu::{self, AluOp, Latencies, Width};
use crate::dsl::MergeOp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeBusProgram {
    pub op: MergeOp,
    /// Threads feeding the tree.
    pub fan_in: usize,
    /// Levels, `ceil(log2 fan_in)`.
    pub depth: u32,
    /// Divide the merged value by the number of merged tuples.
    pub post_scale: bool,
    /// Values merged per batch.
    pub elements: usize,
}

pub fn tree_depth(threads: usize) -> u32 {
    threads.max(1).next_power_of_two().trailing_zeros()
}

impl TreeBusProgram {
    pub fn new(op: MergeOp, fan_in: usize, elements: usize) -> Self {
        TreeBusProgram { op, fan_in, depth: tree_depth(fan_in), post_scale: op == MergeOp::Add, elements }
    }

    /// Cycles to stream `elements` values up the tree, scale them and
    /// broadcast them back down. Elements enter one per cycle.
    pub fn cycles(&self, lat: &Latencies) -> u64 {
        if self.elements == 0 {
            return 0;
        }
        let d = self.depth as u64;
        let scale = if self.post_scale { lat.div as u64 } else { 0 };
        (self.elements as u64 - 1) + d * lat.tree_level as u64 + scale + d + 1
    }

    /// Combine per-thread port values. `ports` holds the populated threads
    /// in thread order; adjacent pairs combine at each level and an odd
    /// tail passes up unchanged.
    pub fn combine(&self, ports: &[&[f64]], tuples: usize, width: Width) -> Vec<f64> {
        let op = AluOp::from_merge(self.op);
        let mut out = Vec::with_capacity(self.elements);
        let mut level: Vec<f64> = Vec::with_capacity(ports.len());
        for e in 0..self.elements {
            level.clear();
            level.extend(ports.iter().map(|p| p[e]));
            while level.len() > 1 {
                let mut next = Vec::with_capacity(level.len().div_ceil(2));
                for pair in level.chunks(2) {
                    next.push(if pair.len() == 2 { alu::eval(op, pair[0], pair[1], width) } else { pair[0] });
                }
                level = next;
            }
            let mut v = level.first().copied().unwrap_or(self.op.identity());
            if self.post_scale {
                v = alu::eval(AluOp::Div, v, tuples as f64, width);
            }
            out.push(v);
        }
        out
    }
}
