use super::hdfg::{HDfg, NodeOp, ScalarRef, SubNode, Termination};
use crate::dsl::GroupOp;
use crate::engine::alu::AluOp;

/// Populate `sub_nodes` and `outputs` of every node, in node order.
pub fn decompose(g: &mut HDfg) {
    let mut next_id = 0;
    for n in 0..g.nodes.len() {
        let node = &g.nodes[n];
        let e = node.element_count();
        let mut d = Decomposer { node: n, next_temp: e, subs: Vec::new(), next_id };
        let mut outputs: Vec<ScalarRef> = (0..e).map(|slot| ScalarRef::Slot { node: n, slot }).collect();
        match node.op {
            NodeOp::Binary(op) => {
                let op = AluOp::from_binop(op);
                for i in 0..e {
                    let a = g.element(&node.operands[0], node.bcast[0].index(i));
                    let b = g.element(&node.operands[1], node.bcast[1].index(i));
                    d.emit(op, vec![a, b], outputs[i], false);
                }
            }
            NodeOp::Nonlinear(f) => {
                let op = AluOp::from_nonlinear(f);
                for i in 0..e {
                    let a = g.element(&node.operands[0], i);
                    d.emit(op, vec![a], outputs[i], false);
                }
            }
            NodeOp::Copy => {
                for i in 0..e {
                    let a = g.element(&node.operands[0], i);
                    d.emit(AluOp::Pass, vec![a], outputs[i], false);
                }
            }
            NodeOp::Merge(op) => {
                let op = AluOp::from_merge(op);
                for i in 0..e {
                    let a = g.element(&node.operands[0], i);
                    d.emit(op, vec![a], outputs[i], true);
                }
            }
            NodeOp::Group { op, axis } => {
                let src = &node.operands[0];
                let sdims = match src {
                    super::hdfg::Operand::Node(p) => g.nodes[*p].dims.clone(),
                    super::hdfg::Operand::Var(v) => g.vars[*v].dims.clone(),
                    super::hdfg::Operand::Const(_) => Vec::new(),
                };
                let len = sdims[axis - 1];
                let inner: usize = sdims[axis..].iter().product();
                for (o, out) in outputs.iter_mut().enumerate() {
                    let (outer_i, inner_j) = (o / inner, o % inner);
                    let mut refs: Vec<ScalarRef> =
                        (0..len).map(|r| g.element(src, (outer_i * len + r) * inner + inner_j)).collect();
                    if op == GroupOp::Norm {
                        refs = refs
                            .into_iter()
                            .map(|x| {
                                let t = d.temp();
                                d.emit(AluOp::Mul, vec![x, x], t, false);
                                t
                            })
                            .collect();
                        let sum = d.reduce(AluOp::Add, refs, None);
                        d.emit(AluOp::Sqrt, vec![sum], *out, false);
                    } else {
                        *out = d.reduce(AluOp::reducer(op), refs, Some(*out));
                    }
                }
            }
        }
        next_id = d.next_id;
        let subs = d.subs;
        let node = &mut g.nodes[n];
        node.sub_nodes = subs;
        node.outputs = outputs;
    }
    if let Termination::Condition(ScalarRef::Slot { node, slot }) = g.termination {
        g.termination = Termination::Condition(g.nodes[node].outputs[slot]);
    }
}

struct Decomposer {
    node: usize,
    next_temp: usize,
    subs: Vec<SubNode>,
    next_id: usize,
}

impl Decomposer {
    fn temp(&mut self) -> ScalarRef {
        let r = ScalarRef::Slot { node: self.node, slot: self.next_temp };
        self.next_temp += 1;
        r
    }

    fn emit(&mut self, op: AluOp, args: Vec<ScalarRef>, out: ScalarRef, accumulate: bool) {
        self.subs.push(SubNode { id: self.next_id, op, args, out, accumulate });
        self.next_id += 1;
    }

    /// Balanced pairwise reduction: each level combines adjacent pairs and
    /// passes an odd trailing element through. The root lands in `root` when
    /// given; a single element is returned as is.
    fn reduce(&mut self, op: AluOp, mut level: Vec<ScalarRef>, root: Option<ScalarRef>) -> ScalarRef {
        while level.len() > 1 {
            let last = level.len() == 2;
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                if let [a, b] = pair {
                    let out = match root {
                        Some(r) if last => r,
                        _ => self.temp(),
                    };
                    self.emit(op, vec![*a, *b], out, false);
                    next.push(out);
                } else {
                    next.push(pair[0]);
                }
            }
            level = next;
        }
        level[0]
    }
}
