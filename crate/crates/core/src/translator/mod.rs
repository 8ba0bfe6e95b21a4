//! Typed program to hierarchical dataflow graph.

pub mod decompose;
pub mod dims;
pub mod eval;
pub mod hdfg;

use std::collections::BTreeMap;

use thiserror::Error;

pub use decompose::decompose;
pub use dims::Dims;
pub use eval::Evaluator;
pub use hdfg::{build_graph, build_hdfg, dump, HDfg, HNode, LeafVar, NodeOp, Operand, Region, ScalarRef, SubNode, Termination};

use crate::dsl::TypedProgram;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslateError {
    #[error("{0}")]
    Dims(String),
    #[error("cycle detected at node n{0}")]
    Cycle(usize),
    #[error("invalid program: {0}")]
    Invalid(String),
}

/// Dims of every declared and assigned variable.
pub fn infer_dims(program: &TypedProgram) -> Result<BTreeMap<String, Dims>, TranslateError> {
    let mut env: BTreeMap<String, Dims> =
        program.declarations.iter().map(|d| (d.name.clone(), d.dims.clone())).collect();
    for a in program.update_rule.iter().chain(&program.converge) {
        let d = dims::infer(&a.expr, &|n| env.get(n).cloned()).map_err(TranslateError::Dims)?;
        env.insert(a.target.clone(), d);
    }
    Ok(env)
}
