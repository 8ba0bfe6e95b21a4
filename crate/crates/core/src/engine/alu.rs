use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{BinOp, GroupOp, MergeOp, Nonlinear};

/// Datapath width. Values are carried as `f64`; at `F32` every operand is
/// rounded to single precision and every result computed in single precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Width {
    F32,
    F64,
}

impl Width {
    pub fn from_bytes(bytes: usize) -> Option<Width> {
        match bytes {
            4 => Some(Width::F32),
            8 => Some(Width::F64),
            _ => None,
        }
    }

    pub fn round(self, v: f64) -> f64 {
        match self {
            Width::F32 => v as f32 as f64,
            Width::F64 => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AluOp {
    Add,
    Sub,
    Mul,
    Div,
    Gt,
    Lt,
    Eq,
    Min,
    Max,
    Sigmoid,
    Gaussian,
    Sqrt,
    Exp,
    Log,
    Abs,
    /// Copy the first operand.
    Pass,
}

impl AluOp {
    pub const ALL: [AluOp; 16] = [
        AluOp::Add,
        AluOp::Sub,
        AluOp::Mul,
        AluOp::Div,
        AluOp::Gt,
        AluOp::Lt,
        AluOp::Eq,
        AluOp::Min,
        AluOp::Max,
        AluOp::Sigmoid,
        AluOp::Gaussian,
        AluOp::Sqrt,
        AluOp::Exp,
        AluOp::Log,
        AluOp::Abs,
        AluOp::Pass,
    ];

    pub fn arity(self) -> usize {
        match self {
            AluOp::Add
            | AluOp::Sub
            | AluOp::Mul
            | AluOp::Div
            | AluOp::Gt
            | AluOp::Lt
            | AluOp::Eq
            | AluOp::Min
            | AluOp::Max => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AluOp::Add => "add",
            AluOp::Sub => "sub",
            AluOp::Mul => "mul",
            AluOp::Div => "div",
            AluOp::Gt => "gt",
            AluOp::Lt => "lt",
            AluOp::Eq => "eq",
            AluOp::Min => "min",
            AluOp::Max => "max",
            AluOp::Sigmoid => "sigmoid",
            AluOp::Gaussian => "gaussian",
            AluOp::Sqrt => "sqrt",
            AluOp::Exp => "exp",
            AluOp::Log => "log",
            AluOp::Abs => "abs",
            AluOp::Pass => "pass",
        }
    }

    pub fn from_name(name: &str) -> Option<AluOp> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn from_binop(op: BinOp) -> AluOp {
        match op {
            BinOp::Add => AluOp::Add,
            BinOp::Sub => AluOp::Sub,
            BinOp::Mul => AluOp::Mul,
            BinOp::Div => AluOp::Div,
            BinOp::Gt => AluOp::Gt,
            BinOp::Lt => AluOp::Lt,
            BinOp::Eq => AluOp::Eq,
        }
    }

    pub fn from_nonlinear(f: Nonlinear) -> AluOp {
        match f {
            Nonlinear::Sigmoid => AluOp::Sigmoid,
            Nonlinear::Gaussian => AluOp::Gaussian,
            Nonlinear::Sqrt => AluOp::Sqrt,
            Nonlinear::Exp => AluOp::Exp,
            Nonlinear::Log => AluOp::Log,
            Nonlinear::Abs => AluOp::Abs,
        }
    }

    /// The pairwise combiner of a group op's reduction tree.
    pub fn reducer(g: GroupOp) -> AluOp {
        match g {
            GroupOp::Sigma | GroupOp::Norm => AluOp::Add,
            GroupOp::Pi => AluOp::Mul,
        }
    }

    pub fn from_merge(op: MergeOp) -> AluOp {
        match op {
            MergeOp::Add => AluOp::Add,
            MergeOp::Mul => AluOp::Mul,
            MergeOp::Min => AluOp::Min,
            MergeOp::Max => AluOp::Max,
        }
    }
}

impl fmt::Display for AluOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Evaluate one scalar ALU operation. NaN and infinities propagate.
pub fn eval(op: AluOp, a: f64, b: f64, width: Width) -> f64 {
    match width {
        Width::F64 => eval64(op, a, b),
        Width::F32 => eval32(op, a as f32, b as f32) as f64,
    }
}

fn eval64(op: AluOp, a: f64, b: f64) -> f64 {
    match op {
        AluOp::Add => a + b,
        AluOp::Sub => a - b,
        AluOp::Mul => a * b,
        AluOp::Div => a / b,
        AluOp::Gt => flag(a > b),
        AluOp::Lt => flag(a < b),
        AluOp::Eq => flag(a == b),
        AluOp::Min => a.min(b),
        AluOp::Max => a.max(b),
        AluOp::Sigmoid => 1.0 / (1.0 + (-a).exp()),
        AluOp::Gaussian => (-(a * a)).exp(),
        AluOp::Sqrt => a.sqrt(),
        AluOp::Exp => a.exp(),
        AluOp::Log => a.ln(),
        AluOp::Abs => a.abs(),
        AluOp::Pass => a,
    }
}

fn eval32(op: AluOp, a: f32, b: f32) -> f32 {
    match op {
        AluOp::Add => a + b,
        AluOp::Sub => a - b,
        AluOp::Mul => a * b,
        AluOp::Div => a / b,
        AluOp::Gt => flag(a > b) as f32,
        AluOp::Lt => flag(a < b) as f32,
        AluOp::Eq => flag(a == b) as f32,
        AluOp::Min => a.min(b),
        AluOp::Max => a.max(b),
        AluOp::Sigmoid => 1.0 / (1.0 + (-a).exp()),
        AluOp::Gaussian => (-(a * a)).exp(),
        AluOp::Sqrt => a.sqrt(),
        AluOp::Exp => a.exp(),
        AluOp::Log => a.ln(),
        AluOp::Abs => a.abs(),
        AluOp::Pass => a,
    }
}

/// Cycle costs of ALU operations and data movement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Latencies {
    pub add: u32,
    pub mul: u32,
    pub div: u32,
    pub nonlinear: u32,
    pub neighbor: u32,
    pub ac_bus: u32,
    pub inter_ac_bus: u32,
    pub tree_level: u32,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies { add: 1, mul: 2, div: 8, nonlinear: 4, neighbor: 1, ac_bus: 2, inter_ac_bus: 4, tree_level: 2 }
    }
}

impl Latencies {
    pub fn of(&self, op: AluOp) -> u32 {
        match op {
            AluOp::Add
            | AluOp::Sub
            | AluOp::Gt
            | AluOp::Lt
            | AluOp::Eq
            | AluOp::Min
            | AluOp::Max
            | AluOp::Abs
            | AluOp::Pass => self.add,
            AluOp::Mul => self.mul,
            AluOp::Div => self.div,
            AluOp::Sigmoid | AluOp::Gaussian | AluOp::Sqrt | AluOp::Exp | AluOp::Log => self.nonlinear,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_identities() {
        assert_eq!(eval(AluOp::Sqrt, 4.0, 0.0, Width::F64), 2.0);
        assert_eq!(eval(AluOp::Gaussian, 0.0, 0.0, Width::F64), 1.0);
        assert_eq!(eval(AluOp::Sigmoid, 0.0, 0.0, Width::F32), 0.5);
        assert_eq!(eval(AluOp::Lt, 1.0, 2.0, Width::F64), 1.0);
        assert_eq!(eval(AluOp::Eq, 1.0, 2.0, Width::F64), 0.0);
    }

    #[test]
    fn ieee_propagation() {
        assert!(eval(AluOp::Div, 1.0, 0.0, Width::F32).is_infinite());
        assert!(eval(AluOp::Log, -1.0, 0.0, Width::F64).is_nan());
        assert!(eval(AluOp::Add, f64::NAN, 1.0, Width::F32).is_nan());
    }

    #[test]
    fn f32_results_are_representable() {
        let v = eval(AluOp::Div, 1.0, 3.0, Width::F32);
        assert_eq!(v, v as f32 as f64);
        assert_ne!(v, 1.0 / 3.0);
    }
}
