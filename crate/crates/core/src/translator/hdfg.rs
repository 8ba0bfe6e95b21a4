use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dims::{self, Bcast, Dims};
use super::TranslateError;
use crate::dsl::{BinOp, DeclKind, Expr, GroupOp, MergeOp, MergeSpec, Nonlinear, Phase, TerminationSpec, TypedProgram};
use crate::engine::alu::AluOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    Update,
    Merge,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Node(usize),
    /// Index into `HDfg::vars`.
    Var(usize),
    Const(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeOp {
    Binary(BinOp),
    Nonlinear(Nonlinear),
    /// Reduce the operand's 1-based `axis`.
    Group { op: GroupOp, axis: usize },
    /// `a = b` with `b` a variable or literal.
    Copy,
    Merge(MergeOp),
}

impl NodeOp {
    pub fn label(&self) -> String {
        match self {
            NodeOp::Binary(op) => op.symbol().to_string(),
            NodeOp::Nonlinear(f) => f.name().to_string(),
            NodeOp::Group { op, axis } => format!("{}[{axis}]", op.name()),
            NodeOp::Copy => "copy".to_string(),
            NodeOp::Merge(op) => format!("merge({})", op.token()),
        }
    }
}

/// A scalar value location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScalarRef {
    /// Element `idx` of leaf variable `var`.
    Var { var: usize, idx: usize },
    /// A literal, stored as `f64` bits so refs stay `Eq + Ord`.
    Const(u64),
    /// Slot `slot` of node `node`. Slots `0..E` are the node's elements;
    /// higher slots hold reduction temporaries.
    Slot { node: usize, slot: usize },
}

impl ScalarRef {
    pub fn constant(v: f64) -> ScalarRef {
        ScalarRef::Const(v.to_bits())
    }
}

impl fmt::Display for ScalarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarRef::Var { var, idx } => write!(f, "v{var}[{idx}]"),
            ScalarRef::Const(bits) => write!(f, "{}", f64::from_bits(*bits)),
            ScalarRef::Slot { node, slot } => write!(f, "n{node}.{slot}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubNode {
    /// Graph-wide id, dense and topologically ordered.
    pub id: usize,
    pub op: AluOp,
    pub args: Vec<ScalarRef>,
    pub out: ScalarRef,
    /// `out = op(out, args[0])`, with `out` persisting across tuples.
    pub accumulate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HNode {
    pub id: usize,
    pub op: NodeOp,
    pub operands: Vec<Operand>,
    /// Element mapping of each operand (binary nodes only).
    pub bcast: Vec<Bcast>,
    pub dims: Dims,
    pub region: Region,
    /// Phase in which this node's sub-nodes execute.
    pub phase: Phase,
    /// Variable assigned by this node, if any.
    pub label: Option<String>,
    pub preds: Vec<usize>,
    pub succs: Vec<usize>,
    pub sub_nodes: Vec<SubNode>,
    /// Location of each output element; may alias an operand for
    /// pass-through reductions.
    pub outputs: Vec<ScalarRef>,
}

impl HNode {
    pub fn element_count(&self) -> usize {
        dims::element_count(&self.dims)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafVar {
    pub name: String,
    pub kind: DeclKind,
    pub dims: Dims,
    /// Constant value for `meta`; initial value for `model`.
    pub init: Vec<f64>,
}

impl LeafVar {
    pub fn element_count(&self) -> usize {
        dims::element_count(&self.dims)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Epochs(usize),
    Condition(ScalarRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HDfg {
    pub name: String,
    pub vars: Vec<LeafVar>,
    pub nodes: Vec<HNode>,
    pub merge: MergeSpec,
    pub merge_node: usize,
    pub model_var: usize,
    /// Node whose value replaces the model after each batch.
    pub model_update: usize,
    pub termination: Termination,
    /// Node that assigned each intermediate (merge var maps to the merge node).
    pub bindings: BTreeMap<String, usize>,
}

impl HDfg {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn vars_of(&self, kind: DeclKind) -> impl Iterator<Item = (usize, &LeafVar)> {
        self.vars.iter().enumerate().filter(move |(_, v)| v.kind == kind)
    }

    pub fn element(&self, operand: &Operand, idx: usize) -> ScalarRef {
        match operand {
            Operand::Node(n) => self.nodes[*n].outputs[idx],
            Operand::Var(v) => ScalarRef::Var { var: *v, idx },
            Operand::Const(c) => ScalarRef::constant(*c),
        }
    }

    pub fn sub_node_count(&self) -> usize {
        self.nodes.iter().map(|n| n.sub_nodes.len()).sum()
    }

    pub fn phase_sub_nodes(&self, phase: Phase) -> impl Iterator<Item = &SubNode> {
        self.nodes.iter().filter(move |n| n.phase == phase).flat_map(|n| n.sub_nodes.iter())
    }

    pub fn model_update_refs(&self) -> &[ScalarRef] {
        &self.nodes[self.model_update].outputs
    }

    /// Node ids in a topological order, or an error naming a node on a cycle.
    pub fn topo_order(&self) -> Result<Vec<usize>, TranslateError> {
        let mut indeg: Vec<usize> = self.nodes.iter().map(|n| n.preds.len()).collect();
        let mut ready: VecDeque<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_front() {
            order.push(n);
            for &s in &self.nodes[n].succs {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push_back(s);
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = (0..self.nodes.len()).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(TranslateError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Values a phase reads that an earlier phase produced: merged values in
    /// the post-merge and convergence phases, post-merge values in the
    /// convergence phase.
    pub fn is_phase_input(&self, r: &ScalarRef, phase: Phase) -> bool {
        match r {
            ScalarRef::Slot { node, .. } => {
                let n = &self.nodes[*node];
                match phase {
                    Phase::PerTuple => false,
                    Phase::PostMerge => n.region == Region::Merge,
                    Phase::Convergence => n.region == Region::Merge || n.phase == Phase::PostMerge,
                }
            }
            _ => false,
        }
    }

    /// Refs produced in `phase` that later phases or the trainer read.
    pub fn phase_outputs(&self, phase: Phase) -> Vec<ScalarRef> {
        let mut out: Vec<ScalarRef> = Vec::new();
        let mut push = |r: ScalarRef| {
            if !out.contains(&r) {
                out.push(r);
            }
        };
        match phase {
            Phase::PerTuple => {}
            Phase::PostMerge => {
                for r in self.model_update_refs() {
                    if self.produced_in(r, Phase::PostMerge) {
                        push(*r);
                    }
                }
                for n in self.nodes.iter().filter(|n| n.phase == Phase::Convergence) {
                    for s in &n.sub_nodes {
                        for a in &s.args {
                            if self.produced_in(a, Phase::PostMerge) {
                                push(*a);
                            }
                        }
                    }
                }
            }
            Phase::Convergence => {
                if let Termination::Condition(r) = &self.termination {
                    if self.produced_in(r, Phase::Convergence) {
                        push(*r);
                    }
                }
            }
        }
        out
    }

    fn produced_in(&self, r: &ScalarRef, phase: Phase) -> bool {
        match r {
            ScalarRef::Slot { node, .. } => {
                let n = &self.nodes[*node];
                n.phase == phase && n.region != Region::Merge
            }
            _ => false,
        }
    }
}

/// Build the hDFG with sub-nodes populated.
pub fn build_hdfg(program: &TypedProgram) -> Result<HDfg, TranslateError> {
    let mut g = build_graph(program)?;
    super::decompose::decompose(&mut g);
    g.topo_order()?;
    Ok(g)
}

/// Build the node-level graph without scalar decomposition.
pub fn build_graph(program: &TypedProgram) -> Result<HDfg, TranslateError> {
    let vars: Vec<LeafVar> = program
        .declarations
        .iter()
        .filter(|d| d.kind != DeclKind::Inter)
        .map(|d| LeafVar {
            name: d.name.clone(),
            kind: d.kind,
            dims: d.dims.clone(),
            init: match &d.init {
                Some(init) => init.expand(d.element_count()),
                None if d.kind == DeclKind::Model => vec![0.0; d.element_count()],
                None => Vec::new(),
            },
        })
        .collect();
    let mut b = Builder { vars, nodes: Vec::new(), bindings: BTreeMap::new() };
    let mut merge_node = None;

    for a in &program.update_rule {
        let region = Region::Update;
        let node = b.assignment(&a.target, &a.expr, region, a.phase)?;
        if a.target == program.merge.var {
            let dims = b.nodes[node].dims.clone();
            let m = b.push(NodeOp::Merge(program.merge.op), vec![Operand::Node(node)], Vec::new(), dims, Region::Merge, Phase::PerTuple);
            b.nodes[m].label = Some(a.target.clone());
            b.bindings.insert(a.target.clone(), m);
            merge_node = Some(m);
        }
    }
    for a in &program.converge {
        b.assignment(&a.target, &a.expr, Region::Convergence, Phase::Convergence)?;
    }
    let merge_node = merge_node.ok_or_else(|| TranslateError::Invalid("merge variable never assigned".into()))?;
    let model_update = *b
        .bindings
        .get(&program.updated_var)
        .ok_or_else(|| TranslateError::Invalid(format!("setModel value `{}` unbound", program.updated_var)))?;
    let model_var = b
        .var_index(&program.model_var)
        .ok_or_else(|| TranslateError::Invalid(format!("model `{}` undeclared", program.model_var)))?;
    let termination = match &program.termination {
        TerminationSpec::Epochs(n) => Termination::Epochs(*n),
        TerminationSpec::Condition(var) => {
            let operand = b.resolve(var)?;
            // Outputs are filled during decomposition; record a placeholder
            // and fix it up there.
            match operand {
                Operand::Node(n) => Termination::Condition(ScalarRef::Slot { node: n, slot: 0 }),
                Operand::Var(v) => Termination::Condition(ScalarRef::Var { var: v, idx: 0 }),
                Operand::Const(c) => Termination::Condition(ScalarRef::constant(c)),
            }
        }
    };
    Ok(HDfg {
        name: program.name.clone(),
        vars: b.vars,
        nodes: b.nodes,
        merge: program.merge.clone(),
        merge_node,
        model_var,
        model_update,
        termination,
        bindings: b.bindings,
    })
}

struct Builder {
    vars: Vec<LeafVar>,
    nodes: Vec<HNode>,
    bindings: BTreeMap<String, usize>,
}

impl Builder {
    fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    fn resolve(&self, name: &str) -> Result<Operand, TranslateError> {
        if let Some(&n) = self.bindings.get(name) {
            return Ok(Operand::Node(n));
        }
        self.var_index(name)
            .map(Operand::Var)
            .ok_or_else(|| TranslateError::Invalid(format!("undefined variable `{name}`")))
    }

    fn dims_of(&self, o: &Operand) -> Dims {
        match o {
            Operand::Node(n) => self.nodes[*n].dims.clone(),
            Operand::Var(v) => self.vars[*v].dims.clone(),
            Operand::Const(_) => Vec::new(),
        }
    }

    fn push(&mut self, op: NodeOp, operands: Vec<Operand>, bcast: Vec<Bcast>, dims: Dims, region: Region, phase: Phase) -> usize {
        let id = self.nodes.len();
        let mut preds = Vec::new();
        for o in &operands {
            if let Operand::Node(p) = o {
                if !preds.contains(p) {
                    preds.push(*p);
                }
            }
        }
        for &p in &preds {
            self.nodes[p].succs.push(id);
        }
        self.nodes.push(HNode {
            id,
            op,
            operands,
            bcast,
            dims,
            region,
            phase,
            label: None,
            preds,
            succs: Vec::new(),
            sub_nodes: Vec::new(),
            outputs: Vec::new(),
        });
        id
    }

    fn assignment(&mut self, target: &str, expr: &Expr, region: Region, phase: Phase) -> Result<usize, TranslateError> {
        let operand = self.lower(expr, region, phase)?;
        let node = match operand {
            Operand::Node(n) if self.nodes[n].label.is_none() => n,
            other => {
                let dims = self.dims_of(&other);
                self.push(NodeOp::Copy, vec![other], Vec::new(), dims, region, phase)
            }
        };
        self.nodes[node].label = Some(target.to_string());
        self.bindings.insert(target.to_string(), node);
        Ok(node)
    }

    fn lower(&mut self, expr: &Expr, region: Region, phase: Phase) -> Result<Operand, TranslateError> {
        match expr {
            Expr::Literal(v) => Ok(Operand::Const(*v)),
            Expr::Var(name) => self.resolve(name),
            Expr::Nonlinear { func, arg } => {
                let a = self.lower(arg, region, phase)?;
                let dims = self.dims_of(&a);
                Ok(Operand::Node(self.push(NodeOp::Nonlinear(*func), vec![a], Vec::new(), dims, region, phase)))
            }
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.lower(lhs, region, phase)?, self.lower(rhs, region, phase)?);
                let (da, db) = (self.dims_of(&a), self.dims_of(&b));
                let (dims, ba, bb) =
                    dims::binary(&da, &db).ok_or_else(|| TranslateError::Dims(dims::irreconcilable(*op, &da, &db)))?;
                Ok(Operand::Node(self.push(NodeOp::Binary(*op), vec![a, b], vec![ba, bb], dims, region, phase)))
            }
            Expr::Group { op, arg, axis } => {
                // Contraction is only recognized directly under a group op.
                if let Expr::Binary { op: bop, lhs, rhs } = arg.as_ref() {
                    let (a, b) = (self.lower(lhs, region, phase)?, self.lower(rhs, region, phase)?);
                    let (da, db) = (self.dims_of(&a), self.dims_of(&b));
                    let (bdims, ba, bb, gaxis) = match dims::binary(&da, &db) {
                        Some((d, ba, bb)) => (d, ba, bb, *axis),
                        None => match dims::contraction(&da, &db, *axis) {
                            Some((d, ba, bb)) => (d, ba, bb, 3),
                            None => return Err(TranslateError::Dims(dims::irreconcilable(*bop, &da, &db))),
                        },
                    };
                    let gdims = dims::group(&bdims, gaxis).map_err(TranslateError::Dims)?;
                    let bn = self.push(NodeOp::Binary(*bop), vec![a, b], vec![ba, bb], bdims, region, phase);
                    let g = self.push(NodeOp::Group { op: *op, axis: gaxis }, vec![Operand::Node(bn)], Vec::new(), gdims, region, phase);
                    return Ok(Operand::Node(g));
                }
                let a = self.lower(arg, region, phase)?;
                let gdims = dims::group(&self.dims_of(&a), *axis).map_err(TranslateError::Dims)?;
                Ok(Operand::Node(self.push(NodeOp::Group { op: *op, axis: *axis }, vec![a], Vec::new(), gdims, region, phase)))
            }
        }
    }
}

/// Per-node summary used by `inspect` and fixtures.
#[derive(Debug, Serialize)]
struct NodeDump<'a> {
    id: usize,
    op: String,
    label: Option<&'a str>,
    dims: &'a [usize],
    region: Region,
    phase: Phase,
    preds: &'a [usize],
    succs: &'a [usize],
    operands: Vec<String>,
    sub_nodes: usize,
}

#[derive(Debug, Serialize)]
struct GraphDump<'a> {
    name: &'a str,
    vars: Vec<(String, &'static str, &'a [usize])>,
    merge: String,
    model_update: usize,
    nodes: Vec<NodeDump<'a>>,
}

/// JSON text form of the graph structure (sub-nodes summarized by count).
pub fn dump(g: &HDfg) -> String {
    let dump = GraphDump {
        name: &g.name,
        vars: g.vars.iter().map(|v| (v.name.clone(), v.kind.keyword(), v.dims.as_slice())).collect(),
        merge: format!("merge({}, {}, \"{}\") -> n{}", g.merge.var, g.merge.coefficient, g.merge.op.token(), g.merge_node),
        model_update: g.model_update,
        nodes: g
            .nodes
            .iter()
            .map(|n| NodeDump {
                id: n.id,
                op: n.op.label(),
                label: n.label.as_deref(),
                dims: &n.dims,
                region: n.region,
                phase: n.phase,
                preds: &n.preds,
                succs: &n.succs,
                operands: n
                    .operands
                    .iter()
                    .map(|o| match o {
                        Operand::Node(i) => format!("n{i}"),
                        Operand::Var(v) => g.vars[*v].name.clone(),
                        Operand::Const(c) => format!("{c}"),
                    })
                    .collect(),
                sub_nodes: n.sub_nodes.len(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&dump).expect("graph dump serializes")
}
