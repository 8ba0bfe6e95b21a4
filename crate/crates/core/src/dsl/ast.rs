use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based line/column of a token in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeclKind {
    Input,
    Output,
    Model,
    Meta,
    Inter,
}

impl DeclKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DeclKind::Input => "input",
            DeclKind::Output => "output",
            DeclKind::Model => "model",
            DeclKind::Meta => "meta",
            DeclKind::Inter => "inter",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "input" => DeclKind::Input,
            "output" => DeclKind::Output,
            "model" => DeclKind::Model,
            "meta" => DeclKind::Meta,
            "inter" => DeclKind::Inter,
            _ => return None,
        })
    }
}

/// Initial value of a `model` or `meta` declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Every element takes the same value.
    Fill(f64),
    /// Row-major element list; its length must match the element count.
    List(Vec<f64>),
}

impl Init {
    pub fn expand(&self, elements: usize) -> Vec<f64> {
        match self {
            Init::Fill(v) => vec![*v; elements],
            Init::List(values) => values.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Declaration {
    pub name: String,
    pub kind: DeclKind,
    pub dims: Vec<usize>,
    pub init: Option<Init>,
    #[serde(skip)]
    pub pos: Pos,
}

impl PartialEq for Declaration {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.kind == other.kind
            && self.dims == other.dims
            && self.init == other.init
    }
}

impl Declaration {
    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Gt,
    Lt,
    Eq,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Gt => ">",
            BinOp::Lt => "<",
            BinOp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Nonlinear {
    Sigmoid,
    Gaussian,
    Sqrt,
    Exp,
    Log,
    Abs,
}

impl Nonlinear {
    pub const ALL: [Nonlinear; 6] = [
        Nonlinear::Sigmoid,
        Nonlinear::Gaussian,
        Nonlinear::Sqrt,
        Nonlinear::Exp,
        Nonlinear::Log,
        Nonlinear::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Nonlinear::Sigmoid => "sigmoid",
            Nonlinear::Gaussian => "gaussian",
            Nonlinear::Sqrt => "sqrt",
            Nonlinear::Exp => "exp",
            Nonlinear::Log => "log",
            Nonlinear::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupOp {
    Sigma,
    Pi,
    Norm,
}

impl GroupOp {
    pub const ALL: [GroupOp; 3] = [GroupOp::Sigma, GroupOp::Pi, GroupOp::Norm];

    pub fn name(self) -> &'static str {
        match self {
            GroupOp::Sigma => "sigma",
            GroupOp::Pi => "pi",
            GroupOp::Norm => "norm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Nonlinear {
        func: Nonlinear,
        arg: Box<Expr>,
    },
    Group {
        op: GroupOp,
        arg: Box<Expr>,
        /// 1-based axis into the operand's dimension list.
        axis: usize,
    },
    Var(String),
    Literal(f64),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    /// Variable names referenced by this expression, in left-to-right order
    /// (duplicates kept).
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Nonlinear { arg, .. } | Expr::Group { arg, .. } => arg.collect_vars(out),
            Expr::Var(name) => out.push(name),
            Expr::Literal(_) => {}
        }
    }
}

/// Merge combination operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MergeOp {
    Add,
    Mul,
    Min,
    Max,
}

impl MergeOp {
    pub fn token(self) -> &'static str {
        match self {
            MergeOp::Add => "+",
            MergeOp::Mul => "*",
            MergeOp::Min => "min",
            MergeOp::Max => "max",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "+" => MergeOp::Add,
            "*" => MergeOp::Mul,
            "min" => MergeOp::Min,
            "max" => MergeOp::Max,
            _ => return None,
        })
    }

    /// Identity element the accumulators start from.
    pub fn identity(self) -> f64 {
        match self {
            MergeOp::Add => 0.0,
            MergeOp::Mul => 1.0,
            MergeOp::Min => f64::INFINITY,
            MergeOp::Max => f64::NEG_INFINITY,
        }
    }

    /// `+` merges are averaged over the merged tuple count.
    pub fn averages(self) -> bool {
        matches!(self, MergeOp::Add)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Builtin {
    Merge { var: String, coefficient: i64, op: String },
    SetEpochs(i64),
    SetConvergence(String),
    SetModel { updated: String, model: Option<String> },
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Merge { .. } => "merge",
            Builtin::SetEpochs(_) => "setEpochs",
            Builtin::SetConvergence(_) => "setConvergence",
            Builtin::SetModel { .. } => "setModel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Assign { target: String, expr: Expr },
    Call(Builtin),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    #[serde(skip)]
    pub pos: Pos,
}

// Positions are presentation detail; two statements are the same statement if
// they say the same thing.
impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Section {
    Update,
    Merge,
    Converge,
}

impl Section {
    pub fn keyword(self) -> &'static str {
        match self {
            Section::Update => "update",
            Section::Merge => "merge",
            Section::Converge => "converge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FunctionBody {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Algo {
    pub name: String,
    pub update: FunctionBody,
    pub merge: FunctionBody,
    pub converge: FunctionBody,
    #[serde(skip)]
    pub pos: Pos,
}

impl PartialEq for Algo {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.update == other.update
            && self.merge == other.merge
            && self.converge == other.converge
    }
}

impl Algo {
    pub fn body(&self, section: Section) -> &FunctionBody {
        match section {
            Section::Update => &self.update,
            Section::Merge => &self.merge,
            Section::Converge => &self.converge,
        }
    }
}

/// Parsed (not yet validated) `.dana` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub decls: Vec<Declaration>,
    pub algo: Algo,
}
