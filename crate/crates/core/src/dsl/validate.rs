use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::{Diagnostic, DslError};
use crate::translator::dims;

/// When a statement runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Once per tuple, on every thread.
    PerTuple,
    /// Once per batch, on the merged value.
    PostMerge,
    /// Once per epoch.
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub target: String,
    pub expr: Expr,
    pub phase: Phase,
    pub dims: Vec<usize>,
    #[serde(skip)]
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeSpec {
    pub var: String,
    pub coefficient: usize,
    pub op: MergeOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationSpec {
    Epochs(usize),
    /// Stop at the first epoch where this scalar variable is nonzero.
    Condition(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarInfo {
    pub kind: DeclKind,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedProgram {
    pub name: String,
    /// User declarations in source order, then auto-declared intermediates in
    /// order of first assignment.
    pub declarations: Vec<Declaration>,
    /// Per-tuple and post-merge assignments in source order.
    pub update_rule: Vec<Assignment>,
    pub converge: Vec<Assignment>,
    pub merge: MergeSpec,
    pub termination: TerminationSpec,
    /// The `model` declaration being trained.
    pub model_var: String,
    /// The variable whose value replaces the model after each batch.
    pub updated_var: String,
}

impl TypedProgram {
    pub fn decl(&self, name: &str) -> Option<&Declaration> {
        self.declarations.iter().find(|d| d.name == name)
    }

    pub fn var(&self, name: &str) -> Option<VarInfo> {
        if let Some(d) = self.decl(name) {
            return Some(VarInfo { kind: d.kind, dims: d.dims.clone() });
        }
        None
    }

    pub fn of_kind(&self, kind: DeclKind) -> impl Iterator<Item = &Declaration> {
        self.declarations.iter().filter(move |d| d.kind == kind)
    }

    pub fn model_decl(&self) -> &Declaration {
        self.decl(&self.model_var).expect("validated model")
    }

    /// Initial model values, row-major.
    pub fn initial_model(&self) -> Vec<f64> {
        let d = self.model_decl();
        match &d.init {
            Some(init) => init.expand(d.element_count()),
            None => vec![0.0; d.element_count()],
        }
    }

    pub fn input_width(&self) -> usize {
        self.of_kind(DeclKind::Input).map(|d| d.element_count()).sum()
    }

    pub fn output_width(&self) -> usize {
        self.of_kind(DeclKind::Output).map(|d| d.element_count()).sum()
    }

    pub fn phase_of(&self, name: &str) -> Option<Phase> {
        self.update_rule
            .iter()
            .chain(&self.converge)
            .find(|a| a.target == name)
            .map(|a| a.phase)
    }
}

pub fn validate(unit: &SourceUnit) -> Result<TypedProgram, DslError> {
    Validator::new(unit).run().map_err(DslError::single)
}

struct Validator<'a> {
    unit: &'a SourceUnit,
    decls: Vec<Declaration>,
    /// Dims of every declared or assigned name.
    shapes: BTreeMap<String, Vec<usize>>,
    assigned: BTreeMap<String, Phase>,
    merge_var: Option<String>,
}

fn err<T>(pos: Pos, msg: impl Into<String>) -> Result<T, Diagnostic> {
    Err(Diagnostic::new(pos, msg))
}

impl<'a> Validator<'a> {
    fn new(unit: &'a SourceUnit) -> Self {
        Validator {
            unit,
            decls: unit.decls.clone(),
            shapes: BTreeMap::new(),
            assigned: BTreeMap::new(),
            merge_var: None,
        }
    }

    fn run(mut self) -> Result<TypedProgram, Diagnostic> {
        self.check_declarations()?;
        let algo = &self.unit.algo;
        let algo_pos = algo.pos;

        // merge(): exactly one, and only in the merge function.
        let mut merge: Option<(MergeSpec, Pos)> = None;
        for stmt in &algo.merge.stmts {
            match &stmt.kind {
                StmtKind::Call(Builtin::Merge { var, coefficient, op }) => {
                    if merge.is_some() {
                        return err(stmt.pos, "merge() called more than once");
                    }
                    if *coefficient < 1 {
                        return err(stmt.pos, format!("merge coefficient ≥ 1 required, got {coefficient}"));
                    }
                    let Some(op) = MergeOp::from_token(op) else {
                        return err(stmt.pos, format!("unknown merge op \"{op}\" (expected +, *, min or max)"));
                    };
                    merge = Some((MergeSpec { var: var.clone(), coefficient: *coefficient as usize, op }, stmt.pos));
                }
                StmtKind::Call(other) => {
                    return err(stmt.pos, format!("{}() is not allowed in the merge function", other.name()));
                }
                StmtKind::Assign { .. } => {
                    return err(stmt.pos, "the merge function may only call merge()");
                }
            }
        }
        let Some((merge, merge_pos)) = merge else {
            return err(algo_pos, "merge() missing from the merge function");
        };
        self.merge_var = Some(merge.var.clone());

        // Update rule.
        let mut update_rule = Vec::new();
        let mut set_model: Option<(String, Option<String>, Pos)> = None;
        for stmt in &algo.update.stmts {
            match &stmt.kind {
                StmtKind::Assign { target, expr } => {
                    let phase = self.update_phase(expr);
                    update_rule.push(self.assign(target, expr, phase, stmt.pos)?);
                }
                StmtKind::Call(Builtin::SetModel { updated, model }) => {
                    if set_model.is_some() {
                        return err(stmt.pos, "setModel() called more than once");
                    }
                    set_model = Some((updated.clone(), model.clone(), stmt.pos));
                }
                StmtKind::Call(other) => {
                    return err(stmt.pos, format!("{}() is not allowed in the update function", other.name()));
                }
            }
        }
        if !self.assigned.contains_key(&merge.var) {
            return err(merge_pos, format!("merge variable `{}` is never assigned in the update function", merge.var));
        }

        // setModel(updated[, model]).
        let Some((updated, model_arg, sm_pos)) = set_model else {
            return err(algo_pos, "setModel() missing from the update function");
        };
        let model_var = match model_arg {
            Some(m) => match self.kind_of(&m) {
                Some(DeclKind::Model) => m,
                Some(k) => return err(sm_pos, format!("setModel target `{m}` is not kind=model (it is {})", k.keyword())),
                None => return err(sm_pos, format!("setModel target `{m}` is not kind=model (undefined)")),
            },
            None => {
                let models: Vec<_> = self.decls.iter().filter(|d| d.kind == DeclKind::Model).collect();
                match models.as_slice() {
                    [one] => one.name.clone(),
                    [] => return err(sm_pos, "setModel target is not kind=model: no model declared"),
                    _ => return err(sm_pos, "several models declared; name the target as setModel(value, model)"),
                }
            }
        };
        match self.assigned.get(&updated) {
            None => {
                let what = match self.kind_of(&updated) {
                    Some(k) => format!("is a {} variable, not an update-rule value", k.keyword()),
                    None => "is never assigned".to_string(),
                };
                return err(sm_pos, format!("setModel value `{updated}` {what}"));
            }
            Some(Phase::PerTuple) if updated != merge.var => {
                return err(
                    sm_pos,
                    format!("setModel value `{updated}` is per-tuple; it must be the merge variable or derived from it"),
                );
            }
            _ => {}
        }
        let model_dims = self.shapes[&model_var].clone();
        if self.shapes[&updated] != model_dims {
            return err(
                sm_pos,
                format!(
                    "setModel value `{updated}` has dims {} but model `{model_var}` has {}",
                    dims::show(&self.shapes[&updated]),
                    dims::show(&model_dims)
                ),
            );
        }

        // Converge function.
        let mut converge = Vec::new();
        let mut epochs: Option<(usize, Pos)> = None;
        let mut condition: Option<(String, Pos)> = None;
        for stmt in &algo.converge.stmts {
            match &stmt.kind {
                StmtKind::Assign { target, expr } => {
                    converge.push(self.assign(target, expr, Phase::Convergence, stmt.pos)?);
                }
                StmtKind::Call(Builtin::SetEpochs(n)) => {
                    if *n < 1 {
                        return err(stmt.pos, format!("setEpochs needs a positive count, got {n}"));
                    }
                    if epochs.is_some() {
                        return err(stmt.pos, "setEpochs() called more than once");
                    }
                    epochs = Some((*n as usize, stmt.pos));
                }
                StmtKind::Call(Builtin::SetConvergence(var)) => {
                    if condition.is_some() {
                        return err(stmt.pos, "setConvergence() called more than once");
                    }
                    condition = Some((var.clone(), stmt.pos));
                }
                StmtKind::Call(other) => {
                    return err(stmt.pos, format!("{}() is not allowed in the converge function", other.name()));
                }
            }
        }
        let termination = match (epochs, condition) {
            (Some(_), Some((_, pos))) => {
                return err(pos, "exactly one termination mode is allowed: setEpochs() or setConvergence()")
            }
            (None, None) => return err(algo_pos, "termination missing: call setEpochs() or setConvergence()"),
            (Some((n, _)), None) => TerminationSpec::Epochs(n),
            (None, Some((var, pos))) => {
                self.check_use(&var, Phase::Convergence, pos)?;
                let d = &self.shapes[&var];
                if dims::element_count(d) != 1 {
                    return err(pos, format!("convergence condition `{var}` must be scalar, got dims {}", dims::show(d)));
                }
                TerminationSpec::Condition(var)
            }
        };

        Ok(TypedProgram {
            name: algo.name.clone(),
            declarations: self.decls,
            update_rule,
            converge,
            merge,
            termination,
            model_var,
            updated_var: updated,
        })
    }

    fn check_declarations(&mut self) -> Result<(), Diagnostic> {
        for d in &self.unit.decls {
            match (d.kind, &d.init) {
                (DeclKind::Meta, None) => {
                    return err(d.pos, format!("meta `{}` needs a constant initializer", d.name));
                }
                (DeclKind::Inter | DeclKind::Input | DeclKind::Output, Some(_)) => {
                    return err(d.pos, format!("{} `{}` cannot have an initializer", d.kind.keyword(), d.name));
                }
                (_, Some(Init::List(values))) if values.len() != d.element_count() => {
                    return err(
                        d.pos,
                        format!("`{}` has {} elements but {} initial values", d.name, d.element_count(), values.len()),
                    );
                }
                _ => {}
            }
            self.shapes.insert(d.name.clone(), d.dims.clone());
        }
        Ok(())
    }

    fn kind_of(&self, name: &str) -> Option<DeclKind> {
        self.decls.iter().find(|d| d.name == name).map(|d| d.kind)
    }

    /// Post-merge if the statement reads the merge variable or anything
    /// already computed after the merge.
    fn update_phase(&self, expr: &Expr) -> Phase {
        let merge_var = self.merge_var.as_deref();
        let post = expr.vars().into_iter().any(|v| {
            Some(v) == merge_var || self.assigned.get(v) == Some(&Phase::PostMerge)
        });
        if post {
            Phase::PostMerge
        } else {
            Phase::PerTuple
        }
    }

    fn check_use(&self, name: &str, phase: Phase, pos: Pos) -> Result<(), Diagnostic> {
        let merge_var = self.merge_var.as_deref();
        let source = match (self.kind_of(name), self.assigned.get(name)) {
            (Some(DeclKind::Model | DeclKind::Meta), _) => return Ok(()),
            (Some(DeclKind::Input | DeclKind::Output), _) => Phase::PerTuple,
            (_, Some(p)) => *p,
            (Some(DeclKind::Inter), None) => {
                return err(pos, format!("`{name}` used before assignment"));
            }
            (None, None) => {
                if self.later_assigned(name) {
                    return err(pos, format!("`{name}` used before assignment"));
                }
                return err(pos, format!("undefined variable `{name}`"));
            }
        };
        let merged = Some(name) == merge_var;
        let ok = match phase {
            Phase::PerTuple => source == Phase::PerTuple,
            Phase::PostMerge => merged || source == Phase::PostMerge,
            Phase::Convergence => merged || source != Phase::PerTuple,
        };
        if ok {
            return Ok(());
        }
        let msg = match phase {
            Phase::PostMerge => format!("`{name}` is a per-tuple value and cannot be used after the merge"),
            Phase::Convergence => format!("`{name}` is a per-tuple value and cannot be used in the converge function"),
            Phase::PerTuple => format!("`{name}` cannot be used here"),
        };
        err(pos, msg)
    }

    fn later_assigned(&self, name: &str) -> bool {
        let algo = &self.unit.algo;
        algo.update
            .stmts
            .iter()
            .chain(&algo.converge.stmts)
            .any(|s| matches!(&s.kind, StmtKind::Assign { target, .. } if target == name))
    }

    fn assign(&mut self, target: &str, expr: &Expr, phase: Phase, pos: Pos) -> Result<Assignment, Diagnostic> {
        let declared = self.kind_of(target);
        match declared {
            Some(DeclKind::Meta) => return err(pos, format!("meta `{target}` is constant and cannot be assigned")),
            Some(k @ (DeclKind::Input | DeclKind::Output | DeclKind::Model)) => {
                return err(pos, format!("cannot assign to {} `{target}`", k.keyword()));
            }
            _ => {}
        }
        if self.assigned.contains_key(target) {
            return err(pos, format!("`{target}` is assigned more than once"));
        }
        let mut seen = BTreeSet::new();
        for v in expr.vars() {
            if seen.insert(v) {
                self.check_use(v, phase, pos)?;
            }
        }
        let shapes = &self.shapes;
        let d = dims::infer(expr, &|n| shapes.get(n).cloned()).map_err(|m| Diagnostic::new(pos, m))?;
        match declared {
            Some(DeclKind::Inter) => {
                if self.shapes[target] != d {
                    return err(
                        pos,
                        format!(
                            "`{target}` is declared {} but assigned {}",
                            dims::show(&self.shapes[target]),
                            dims::show(&d)
                        ),
                    );
                }
            }
            _ => {
                self.decls.push(Declaration {
                    name: target.to_string(),
                    kind: DeclKind::Inter,
                    dims: d.clone(),
                    init: None,
                    pos,
                });
                self.shapes.insert(target.to_string(), d.clone());
            }
        }
        self.assigned.insert(target.to_string(), phase);
        Ok(Assignment { target: target.to_string(), expr: expr.clone(), phase, dims: d, pos })
    }
}
