use super::hdfg::{HDfg, ScalarRef};
use crate::dsl::{DeclKind, Phase};
use crate::engine::alu::{self, Width};

/// Sequential sub-node interpreter. Evaluates one phase at a time in node
/// order, which is a topological order of the sub-node graph.
#[derive(Debug, Clone)]
pub struct Evaluator<'g> {
    g: &'g HDfg,
    width: Width,
    slots: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

impl<'g> Evaluator<'g> {
    pub fn new(g: &'g HDfg, width: Width) -> Self {
        let slots = g
            .nodes
            .iter()
            .map(|n| {
                let max = n
                    .sub_nodes
                    .iter()
                    .filter_map(|s| match s.out {
                        ScalarRef::Slot { slot, .. } => Some(slot + 1),
                        _ => None,
                    })
                    .max()
                    .unwrap_or(0);
                vec![0.0; max.max(n.element_count())]
            })
            .collect();
        let vars = g
            .vars
            .iter()
            .map(|v| match v.kind {
                DeclKind::Model | DeclKind::Meta => v.init.iter().map(|&x| width.round(x)).collect(),
                _ => vec![0.0; v.element_count()],
            })
            .collect();
        let mut e = Evaluator { g, width, slots, vars };
        e.reset_accumulators();
        e
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn set_var(&mut self, var: usize, values: &[f64]) {
        let width = self.width;
        let dst = &mut self.vars[var];
        assert_eq!(dst.len(), values.len(), "arity of `{}`", self.g.vars[var].name);
        for (d, s) in dst.iter_mut().zip(values) {
            *d = width.round(*s);
        }
    }

    pub fn var(&self, var: usize) -> &[f64] {
        &self.vars[var]
    }

    /// Load a tuple: inputs then outputs (labels), in declaration order.
    pub fn set_tuple(&mut self, values: &[f64]) {
        let mut at = 0;
        for kind in [DeclKind::Input, DeclKind::Output] {
            for v in 0..self.g.vars.len() {
                if self.g.vars[v].kind == kind {
                    let n = self.g.vars[v].element_count();
                    self.set_var(v, &values[at..at + n]);
                    at += n;
                }
            }
        }
        assert_eq!(at, values.len(), "tuple arity");
    }

    pub fn get(&self, r: &ScalarRef) -> f64 {
        match *r {
            ScalarRef::Var { var, idx } => self.vars[var][idx],
            ScalarRef::Const(bits) => self.width.round(f64::from_bits(bits)),
            ScalarRef::Slot { node, slot } => self.slots[node][slot],
        }
    }

    pub fn node_values(&self, node: usize) -> Vec<f64> {
        self.g.nodes[node].outputs.iter().map(|r| self.get(r)).collect()
    }

    pub fn slots(&self, node: usize) -> &[f64] {
        &self.slots[node]
    }

    pub fn set_slots(&mut self, node: usize, values: &[f64]) {
        self.slots[node][..values.len()].copy_from_slice(values);
    }

    /// Merge accumulators back to the merge op's identity.
    pub fn reset_accumulators(&mut self) {
        let m = self.g.merge_node;
        let id = self.g.merge.op.identity();
        let e = self.g.nodes[m].element_count();
        self.slots[m][..e].fill(id);
    }

    pub fn run_phase(&mut self, phase: Phase) {
        let width = self.width;
        for n in self.g.nodes.iter().filter(|n| n.phase == phase) {
            for s in &n.sub_nodes {
                let v = if s.accumulate {
                    alu::eval(s.op, self.get(&s.out), self.get(&s.args[0]), width)
                } else {
                    let a = self.get(&s.args[0]);
                    let b = s.args.get(1).map(|r| self.get(r)).unwrap_or(0.0);
                    alu::eval(s.op, a, b, width)
                };
                if let ScalarRef::Slot { node, slot } = s.out {
                    self.slots[node][slot] = v;
                }
            }
        }
    }
}
