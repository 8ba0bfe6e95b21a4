//! Fixed-length micro-instructions for analytic clusters (AC) and their
//! analytic units (AU).
//!
//! Each AC has one dense instruction stream, one word per cycle: an ALU op
//! (or NOP) plus an 8-bit enable mask. Every enabled AU executes the op with
//! its own operand and destination detail, taken from its private
//! instruction memory in order.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::alu::{AluOp, Width};
use crate::translator::ScalarRef;

pub const AUS_PER_AC: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Src {
    Data(u32),
    Const(u32),
    /// The neighbor's output register (its most recent result).
    Neighbor(Side),
    /// Pop the AU's bus FIFO.
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Landing {
    Mem(u32),
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dst {
    Data(u32),
    /// Neighbor link; lands in the neighbor's data memory.
    Neighbor { side: Side, addr: u32 },
    /// Shared intra-AC bus, driven `delay` cycles after the result retires.
    AcBus { au: u8, to: Landing, delay: u32 },
    /// Thread-wide inter-AC bus.
    InterAc { ac: u16, au: u8, to: Landing, delay: u32 },
    /// Latch into the thread's tree-bus port.
    TreePort { slot: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuInstr {
    pub op: AluOp,
    pub a: Src,
    pub b: Option<Src>,
    pub dsts: Vec<Dst>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcInstr {
    /// `None` is a NOP.
    pub op: Option<AluOp>,
    pub mask: u8,
}

impl AcInstr {
    pub const NOP: AcInstr = AcInstr { op: None, mask: 0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Loc {
    pub ac: u16,
    pub au: u8,
    pub addr: u32,
}

impl Loc {
    pub fn unit(&self) -> usize {
        self.ac as usize * AUS_PER_AC + self.au as usize
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ac{}.au{}@{}", self.ac, self.au, self.addr)
    }
}

/// A value loaded before the program runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preload {
    pub loc: Loc,
    pub value: ScalarRef,
}

/// A merge accumulator: persists across runs within a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accumulator {
    pub loc: Loc,
    pub slot: u32,
}

/// One phase of one thread, ready to replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroProgram {
    pub acs: usize,
    pub width: Width,
    pub makespan: u32,
    /// Per AC, `makespan` words.
    pub streams: Vec<Vec<AcInstr>>,
    /// Per AU (`ac * 8 + au`), in issue order.
    pub au_code: Vec<Vec<AuInstr>>,
    /// Loaded into data memory before every run (tuple values, merged values).
    pub data_preloads: Vec<Preload>,
    /// Loaded into constant memory when constants change (model, meta, literals).
    pub const_preloads: Vec<Preload>,
    pub accumulators: Vec<Accumulator>,
    /// Where each phase output lives after the run.
    pub outputs: Vec<(ScalarRef, Loc)>,
    pub data_words: u32,
    pub const_words: u32,
}

impl MicroProgram {
    pub fn empty(acs: usize, width: Width) -> Self {
        MicroProgram {
            acs,
            width,
            makespan: 0,
            streams: vec![Vec::new(); acs],
            au_code: vec![Vec::new(); acs * AUS_PER_AC],
            data_preloads: Vec::new(),
            const_preloads: Vec::new(),
            accumulators: Vec::new(),
            outputs: Vec::new(),
            data_words: 0,
            const_words: 0,
        }
    }

    pub fn instruction_count(&self) -> usize {
        self.au_code.iter().map(Vec::len).sum()
    }

    /// Per-AC listing: `cycle op mask` lines followed by each AU's code.
    pub fn listing(&self) -> String {
        let mut s = String::new();
        for (ac, stream) in self.streams.iter().enumerate() {
            s.push_str(&format!("ac{ac}:\n"));
            for (c, w) in stream.iter().enumerate() {
                if let Some(op) = w.op {
                    s.push_str(&format!("  {c:>5}  {:<8} mask={:08b}\n", op.name(), w.mask));
                }
            }
            for au in 0..AUS_PER_AC {
                let code = &self.au_code[ac * AUS_PER_AC + au];
                if code.is_empty() {
                    continue;
                }
                s.push_str(&format!("  au{au}:\n"));
                for (i, ins) in code.iter().enumerate() {
                    let b = ins.b.map(|b| format!(", {}", src_text(b))).unwrap_or_default();
                    let d: Vec<String> = ins.dsts.iter().map(dst_text).collect();
                    s.push_str(&format!("    {i:>4}  {} {}{b} -> {}\n", ins.op.name(), src_text(ins.a), d.join(" ")));
                }
            }
        }
        s
    }
}

fn src_text(s: Src) -> String {
    match s {
        Src::Data(a) => format!("d{a}"),
        Src::Const(a) => format!("c{a}"),
        Src::Neighbor(Side::Left) => "left".into(),
        Src::Neighbor(Side::Right) => "right".into(),
        Src::Fifo => "fifo".into(),
    }
}

fn landing_text(l: Landing) -> String {
    match l {
        Landing::Mem(a) => format!("d{a}"),
        Landing::Fifo => "fifo".into(),
    }
}

fn dst_text(d: &Dst) -> String {
    match *d {
        Dst::Data(a) => format!("d{a}"),
        Dst::Neighbor { side, addr } => {
            format!("{}:d{addr}", if side == Side::Left { "left" } else { "right" })
        }
        Dst::AcBus { au, to, delay } => format!("acbus+{delay}:au{au}:{}", landing_text(to)),
        Dst::InterAc { ac, au, to, delay } => format!("xbus+{delay}:ac{ac}.au{au}:{}", landing_text(to)),
        Dst::TreePort { slot } => format!("port{slot}"),
    }
}
