use std::fmt::Write;

use super::ast::*;

/// Canonical text for a parsed unit. Binary expressions are fully
/// parenthesized so reparsing never depends on precedence.
pub fn print(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for decl in &unit.decls {
        out.push_str(&print_decl(decl));
        out.push('\n');
    }
    if !unit.decls.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "algo {} {{", unit.algo.name);
    for section in [Section::Update, Section::Merge, Section::Converge] {
        let body = unit.algo.body(section);
        let _ = writeln!(out, "  {} {{", section.keyword());
        for stmt in &body.stmts {
            let _ = writeln!(out, "    {}", print_stmt(&stmt.kind));
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

pub fn print_decl(decl: &Declaration) -> String {
    let mut s = format!("{} {}", decl.kind.keyword(), decl.name);
    for d in &decl.dims {
        let _ = write!(s, "[{d}]");
    }
    match &decl.init {
        None => {}
        Some(Init::Fill(v)) => {
            let _ = write!(s, " = {}", number(*v));
        }
        Some(Init::List(values)) => {
            let items: Vec<String> = values.iter().map(|v| number(*v)).collect();
            let _ = write!(s, " = {{{}}}", items.join(", "));
        }
    }
    s.push(';');
    s
}

pub fn print_stmt(stmt: &StmtKind) -> String {
    match stmt {
        StmtKind::Assign { target, expr } => format!("{target} = {};", print_expr(expr)),
        StmtKind::Call(call) => match call {
            Builtin::Merge { var, coefficient, op } => format!("merge({var}, {coefficient}, \"{op}\");"),
            Builtin::SetEpochs(n) => format!("setEpochs({n});"),
            Builtin::SetConvergence(v) => format!("setConvergence({v});"),
            Builtin::SetModel { updated, model: None } => format!("setModel({updated});"),
            Builtin::SetModel { updated, model: Some(m) } => format!("setModel({updated}, {m});"),
        },
    }
}

pub fn print_expr(expr: &Expr) -> String {
    match expr {
        Expr::Binary { op, lhs, rhs } => {
            format!("({} {} {})", print_expr(lhs), op.symbol(), print_expr(rhs))
        }
        Expr::Nonlinear { func, arg } => format!("{}({})", func.name(), print_expr(arg)),
        Expr::Group { op, arg, axis } => format!("{}({}, {axis})", op.name(), print_expr(arg)),
        Expr::Var(name) => name.clone(),
        Expr::Literal(v) => number(*v),
    }
}

// Display for f64 is the shortest string that round-trips; integral values
// get a trailing ".0" so they re-lex as numbers, not integers.
fn number(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}
