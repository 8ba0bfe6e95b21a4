use dana::dsl::{self, printer, BinOp, Builtin, DeclKind, Expr, GroupOp, Init, MergeOp, Nonlinear, Phase, StmtKind, TerminationSpec};
use proptest::prelude::*;

const LINEAR: &str = include_str!("fixtures/linear_udf.dana");

fn wrap(decls: &str, update: &str, tail: &str) -> String {
    format!("{decls}\nalgo a {{\n update {{\n{update}\n }}\n merge {{ merge(g, 4, \"+\"); }}\n converge {{ {tail} }}\n}}\n")
}

const DECLS: &str = "model w[3]; input x[3]; output y; meta lr = 0.1;";

fn first_error(src: &str) -> String {
    dsl::compile(src).unwrap_err().first_message().to_string()
}

#[test]
fn linear_udf_has_three_bodies() {
    let unit = dsl::parse(LINEAR).unwrap();
    assert_eq!(unit.algo.name, "linearR");
    assert_eq!(unit.algo.update.stmts.len(), 6);
    assert_eq!(unit.algo.merge.stmts.len(), 1);
    assert_eq!(unit.algo.converge.stmts.len(), 3);
    assert_eq!(
        unit.algo.merge.stmts[0].kind,
        StmtKind::Call(Builtin::Merge { var: "grad".into(), coefficient: 8, op: "+".into() })
    );
    let kinds: Vec<_> = unit.decls.iter().map(|d| d.kind).collect();
    assert_eq!(kinds, [DeclKind::Model, DeclKind::Input, DeclKind::Output, DeclKind::Meta, DeclKind::Meta]);
}

#[test]
fn intermediates_are_auto_declared() {
    let p = dsl::compile(LINEAR).unwrap();
    let grad = p.decl("grad").unwrap();
    assert_eq!(grad.kind, DeclKind::Inter);
    assert_eq!(grad.dims, vec![10]);
    assert_eq!(p.decl("s").unwrap().dims, Vec::<usize>::new());
    assert_eq!(p.decl("conv").unwrap().kind, DeclKind::Inter);
    assert_eq!(p.model_var, "mo");
    assert_eq!(p.updated_var, "mo_up");
    assert_eq!(p.merge.coefficient, 8);
    assert_eq!(p.merge.op, MergeOp::Add);
    assert_eq!(p.termination, TerminationSpec::Condition("conv".into()));
    let phases: Vec<_> = p.update_rule.iter().map(|a| (a.target.as_str(), a.phase)).collect();
    assert_eq!(
        phases,
        [
            ("s", Phase::PerTuple),
            ("er", Phase::PerTuple),
            ("grad", Phase::PerTuple),
            ("up", Phase::PostMerge),
            ("mo_up", Phase::PostMerge)
        ]
    );
}

#[test]
fn matrix_model_declaration() {
    let unit = dsl::parse("model mo[5][2];\nalgo a { update {} merge {} converge {} }").unwrap();
    let d = &unit.decls[0];
    assert_eq!((d.kind, d.dims.clone()), (DeclKind::Model, vec![5, 2]));
}

#[test]
fn initializers() {
    let unit = dsl::parse("meta a = 2; model m[3] = {1, 2.5, -3};\nalgo a { update {} merge {} converge {} }").unwrap();
    assert_eq!(unit.decls[0].init, Some(Init::Fill(2.0)));
    assert_eq!(unit.decls[1].init, Some(Init::List(vec![1.0, 2.5, -3.0])));
}

#[test]
fn empty_source() {
    assert_eq!(dsl::parse("").unwrap_err().first_message(), "no algo construct");
    assert_eq!(dsl::parse("// only a comment\n").unwrap_err().first_message(), "no algo construct");
}

#[test]
fn syntax_errors_carry_positions() {
    let e = dsl::parse("model w[3]\ninput x;").unwrap_err();
    let d = &e.diagnostics[0];
    assert_eq!((d.pos.line, d.pos.col), (2, 1));
    assert!(d.message.starts_with("syntax error: expected one of"), "{}", d.message);
    assert!(e.render("f.dana").starts_with("f.dana:2:1: syntax error"));
}

#[test]
fn duplicate_declaration() {
    let e = first_error(&wrap("model w[3]; input w[3];", "", "setEpochs(1);"));
    assert!(e.starts_with("duplicate declaration of `w`"), "{e}");
}

#[test]
fn unknown_construct() {
    let e = first_error(&wrap(DECLS, "g = frobnicate(x); w2 = w - g; setModel(w2);", "setEpochs(1);"));
    assert!(e.contains("unknown construct `frobnicate`"), "{e}");
}

#[test]
fn missing_set_model() {
    let e = first_error(&wrap(DECLS, "g = x * y;", "setEpochs(1);"));
    assert_eq!(e, "setModel() missing from the update function");
}

#[test]
fn set_model_target_must_be_a_model() {
    let e = first_error(&wrap(DECLS, "g = x * y; w2 = w - g; setModel(w2, x);", "setEpochs(1);"));
    assert!(e.starts_with("setModel target `x` is not kind=model"), "{e}");
    let e = first_error(&wrap("input x[3]; output y;", "g = x * y; setModel(g);", "setEpochs(1);"));
    assert!(e.starts_with("setModel target is not kind=model"), "{e}");
}

#[test]
fn merge_coefficient_bound() {
    let src = wrap(DECLS, "g = x * y; w2 = w - g; setModel(w2);", "setEpochs(1);").replace("merge(g, 4", "merge(g, 0");
    assert!(first_error(&src).contains("coefficient ≥ 1"));
}

#[test]
fn merge_var_must_be_assigned() {
    let src = wrap(DECLS, "h = x * y; w2 = w - h; setModel(w2);", "setEpochs(1);");
    assert_eq!(first_error(&src), "merge variable `g` is never assigned in the update function");
}

#[test]
fn use_before_assignment() {
    let src = wrap(DECLS, "g = x * y; w2 = w - z; z = g; setModel(w2);", "setEpochs(1);");
    assert_eq!(first_error(&src), "`z` used before assignment");
}

#[test]
fn meta_is_constant() {
    let src = wrap(DECLS, "g = x * y; lr = 2; w2 = w - g; setModel(w2);", "setEpochs(1);");
    assert_eq!(first_error(&src), "meta `lr` is constant and cannot be assigned");
}

#[test]
fn condition_must_be_scalar() {
    let src = wrap(DECLS, "g = x * y; w2 = w - g; setModel(w2);", "c = g > 0; setConvergence(c);");
    assert!(first_error(&src).starts_with("convergence condition `c` must be scalar"));
}

#[test]
fn termination_modes_are_exclusive() {
    let src = wrap(DECLS, "g = x * y; w2 = w - g; setModel(w2);", "setEpochs(2); c = sigma(g, 1) > 0; setConvergence(c);");
    assert!(first_error(&src).starts_with("exactly one termination mode"));
    let src = wrap(DECLS, "g = x * y; w2 = w - g; setModel(w2);", "");
    assert!(first_error(&src).starts_with("termination missing"));
}

#[test]
fn validation_is_deterministic() {
    let a = dsl::compile(LINEAR).unwrap();
    let b = dsl::compile(LINEAR).unwrap();
    assert_eq!(a, b);
    let names: Vec<_> = a.declarations.iter().map(|d| d.name.clone()).collect();
    assert_eq!(names, ["mo", "in", "out", "lr", "conv_factor", "s", "er", "grad", "up", "mo_up", "n", "conv"]);
}

#[test]
fn every_identifier_is_declared_once() {
    let p = dsl::compile(LINEAR).unwrap();
    let mut names: Vec<&str> = p.declarations.iter().map(|d| d.name.as_str()).collect();
    names.sort();
    let before = names.len();
    names.dedup();
    assert_eq!(names.len(), before);
    for a in p.update_rule.iter().chain(&p.converge) {
        for v in a.expr.vars() {
            assert!(p.decl(v).is_some(), "{v}");
        }
        assert!(p.decl(&a.target).is_some());
    }
}

#[test]
fn bundled_udfs_compile() {
    for w in dana::workloads::suite() {
        dsl::compile(w.source).unwrap_or_else(|e| panic!("{}: {e}", w.name));
    }
    dsl::compile(include_str!("fixtures/parallel_sgd.dana")).unwrap();
}

#[test]
fn print_parse_fixed_point() {
    for src in [LINEAR, dana::workloads::LRMF, dana::workloads::SVM] {
        let unit = dsl::parse(src).unwrap();
        let printed = dsl::print(&unit);
        let again = dsl::parse(&printed).unwrap();
        assert_eq!(unit, again);
        assert_eq!(printed, dsl::print(&again));
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["w", "x", "y", "lr", "t0"]).prop_map(Expr::var),
        (0u32..10_000).prop_map(|v| Expr::Literal(v as f64 / 64.0)),
    ];
    leaf.prop_recursive(5, 40, 3, |inner| {
        prop_oneof![
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Gt, BinOp::Lt, BinOp::Eq]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (prop::sample::select(Nonlinear::ALL.to_vec()), inner.clone())
                .prop_map(|(func, a)| Expr::Nonlinear { func, arg: Box::new(a) }),
            (prop::sample::select(GroupOp::ALL.to_vec()), inner, 1usize..4)
                .prop_map(|(op, a, axis)| Expr::Group { op, arg: Box::new(a), axis }),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_reparse(e in arb_expr(), f in arb_expr()) {
        let src = format!(
            "model w[3]; input x[3]; output y; meta lr = 0.5;\nalgo p {{ update {{ t0 = {}; t1 = {}; setModel(t1); }} merge {{ merge(t0, 2, \"max\"); }} converge {{ setEpochs(3); }} }}",
            printer::print_expr(&e),
            printer::print_expr(&f)
        );
        let unit = dsl::parse(&src).unwrap();
        match &unit.algo.update.stmts[0].kind {
            StmtKind::Assign { expr, .. } => prop_assert_eq!(expr, &e),
            other => prop_assert!(false, "{:?}", other),
        }
        let printed = dsl::print(&unit);
        let again = dsl::parse(&printed).unwrap();
        prop_assert_eq!(&unit, &again);
        prop_assert_eq!(printed, dsl::print(&again));
    }
}
