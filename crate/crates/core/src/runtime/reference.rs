//! Software trainer evaluating the graph directly, without schedules or
//! the cycle simulator.

use super::RuntimeError;
use crate::dsl::{DeclKind, MergeOp, Phase};
use crate::engine::{alu, AluOp, Width};
use crate::translator::{Evaluator, HDfg, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    /// Same batch partitioning, tree parenthesization and width as an
    /// engine with `threads` threads.
    Lockstep { threads: usize, width: Width },
    /// One thread, 64-bit arithmetic.
    Float64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefRun {
    pub model: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// Merged value of every batch of the first epoch.
    pub first_epoch_merges: Vec<Vec<f64>>,
}

/// Pairwise reduction, adjacent ports per level, odd tail carried up.
fn reduce(values: &[f64], op: AluOp, width: Width, identity: f64) -> f64 {
    if values.is_empty() {
        return identity;
    }
    let mut level = values.to_vec();
    while level.len() > 1 {
        let mut i = 0;
        let mut w = 0;
        while i < level.len() {
            level[w] = if i + 1 < level.len() { alu::eval(op, level[i], level[i + 1], width) } else { level[i] };
            i += 2;
            w += 1;
        }
        level.truncate(w);
    }
    level[0]
}

/// Train on `tuples` (features then labels, in dataset order).
pub fn reference_train(g: &HDfg, tuples: &[Vec<f64>], mode: RefMode, max_epochs: usize) -> Result<RefRun, RuntimeError> {
    let (threads, width) = match mode {
        RefMode::Lockstep { threads, width } => (threads.max(1), width),
        RefMode::Float64 => (1, Width::F64),
    };
    let c = g.merge.coefficient.max(1);
    let m = g.merge_node;
    let elements = g.nodes[m].element_count();
    let op = AluOp::from_merge(g.merge.op);
    let identity = g.merge.op.identity();
    let want = g.vars.iter().filter(|v| matches!(v.kind, DeclKind::Input | DeclKind::Output)).map(|v| v.element_count()).sum::<usize>();
    if let Some(t) = tuples.iter().find(|t| t.len() != want) {
        return Err(RuntimeError::Arity { got: t.len(), want });
    }
    let epochs = match g.termination {
        Termination::Epochs(n) => n,
        Termination::Condition(_) => max_epochs,
    };

    let mut ev = Evaluator::new(g, width);
    let mut first_epoch_merges = Vec::new();
    let mut converged = false;
    let mut ran = 0;
    for epoch in 0..epochs {
        let mut tail_ev: Option<Evaluator> = None;
        for batch in tuples.chunks(c) {
            let n = batch.len();
            let populated = n.min(threads);
            let mut partials = Vec::with_capacity(populated);
            for k in 0..populated {
                ev.reset_accumulators();
                for tuple in batch.iter().skip(k).step_by(threads) {
                    ev.set_tuple(tuple);
                    ev.run_phase(Phase::PerTuple);
                }
                partials.push(ev.slots(m)[..elements].to_vec());
            }
            let mut merged = Vec::with_capacity(elements);
            for e in 0..elements {
                let column: Vec<f64> = partials.iter().map(|p| p[e]).collect();
                let mut v = reduce(&column, op, width, identity);
                if g.merge.op == MergeOp::Add {
                    v = alu::eval(AluOp::Div, v, n as f64, width);
                }
                merged.push(v);
            }
            if epoch == 0 {
                first_epoch_merges.push(merged.clone());
            }
            ev.set_slots(m, &merged);
            ev.run_phase(Phase::PostMerge);
            let model: Vec<f64> = g.model_update_refs().iter().map(|r| width.round(ev.get(r))).collect();
            if model.iter().any(|v| !v.is_finite()) {
                return Err(RuntimeError::NonFinite { epoch: epoch + 1 });
            }
            if matches!(g.termination, Termination::Condition(_)) {
                tail_ev = Some(ev.clone());
            }
            ev.set_var(g.model_var, &model);
        }
        ran = epoch + 1;
        if let (Termination::Condition(cond), Some(last)) = (&g.termination, tail_ev) {
            if check(g, &ev, &last, *cond) {
                converged = true;
                break;
            }
        }
    }
    Ok(RefRun { model: ev.var(g.model_var).to_vec(), epochs: ran, converged, first_epoch_merges })
}

/// Termination condition at 64-bit width over the last batch's values and
/// the updated model.
fn check(g: &HDfg, updated: &Evaluator, last: &Evaluator, cond: crate::translator::ScalarRef) -> bool {
    let mut c = Evaluator::new(g, Width::F64);
    for v in 0..g.vars.len() {
        let src = if v == g.model_var { updated } else { last };
        c.set_var(v, src.var(v));
    }
    for (i, n) in g.nodes.iter().enumerate() {
        if i == g.merge_node || n.phase == Phase::PostMerge {
            c.set_slots(i, last.slots(i));
        }
    }
    c.run_phase(Phase::Convergence);
    c.get(&cond) != 0.0
}
