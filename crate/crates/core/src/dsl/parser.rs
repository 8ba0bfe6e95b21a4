use std::collections::BTreeMap;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{Diagnostic, DslError};

pub fn parse(source: &str) -> Result<SourceUnit, DslError> {
    let tokens = tokenize(source).map_err(DslError::single)?;
    let mut parser = Parser { tokens, at: 0 };
    parser.unit().map_err(DslError::single)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn next(&mut self) -> Token {
        let tok = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &[&str]) -> Diagnostic {
        let found = self.peek().describe();
        let list = expected.iter().map(|e| format!("`{e}`")).collect::<Vec<_>>().join(", ");
        Diagnostic::new(self.pos(), format!("syntax error: expected one of {list}, found {found}"))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(&[tok.symbol()]))
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let pos = self.next().pos;
                Ok((name, pos))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let negative = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.unexpected(&["integer"])),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let negative = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let v = match self.peek().clone() {
            Tok::Int(v) => v as f64,
            Tok::Num(v) => v,
            _ => return Err(self.unexpected(&["number"])),
        };
        self.next();
        Ok(if negative { -v } else { v })
    }

    fn unit(&mut self) -> PResult<SourceUnit> {
        let mut decls: Vec<Declaration> = Vec::new();
        let mut seen: BTreeMap<String, Pos> = BTreeMap::new();
        let mut algo: Option<Algo> = None;
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(word) if word == "algo" => {
                    let pos = self.pos();
                    if algo.is_some() {
                        return Err(Diagnostic::new(pos, "duplicate algo construct"));
                    }
                    algo = Some(self.algo()?);
                }
                Tok::Ident(word) if DeclKind::from_keyword(&word).is_some() => {
                    let decl = self.declaration()?;
                    if let Some(first) = seen.get(&decl.name) {
                        return Err(Diagnostic::new(
                            decl.pos,
                            format!("duplicate declaration of `{}` (first declared at {first})", decl.name),
                        ));
                    }
                    seen.insert(decl.name.clone(), decl.pos);
                    decls.push(decl);
                }
                Tok::Ident(word) => {
                    return Err(Diagnostic::new(self.pos(), format!("unknown construct `{word}`")));
                }
                _ => return Err(self.unexpected(&["input", "output", "model", "meta", "inter", "algo"])),
            }
        }
        let algo = algo.ok_or_else(|| Diagnostic::new(self.pos(), "no algo construct"))?;
        Ok(SourceUnit { decls, algo })
    }

    fn declaration(&mut self) -> PResult<Declaration> {
        let (word, pos) = self.ident()?;
        let kind = DeclKind::from_keyword(&word).expect("checked by caller");
        let (name, _) = self.ident()?;
        let mut dims = Vec::new();
        while *self.peek() == Tok::LBracket {
            self.next();
            let dpos = self.pos();
            let d = self.int()?;
            if d < 1 {
                return Err(Diagnostic::new(dpos, format!("dimension of `{name}` must be >= 1, got {d}")));
            }
            dims.push(d as usize);
            self.expect(Tok::RBracket)?;
        }
        let init = if *self.peek() == Tok::Assign {
            self.next();
            if *self.peek() == Tok::LBrace {
                self.next();
                let mut values = vec![self.number()?];
                while *self.peek() == Tok::Comma {
                    self.next();
                    values.push(self.number()?);
                }
                self.expect(Tok::RBrace)?;
                Some(Init::List(values))
            } else {
                Some(Init::Fill(self.number()?))
            }
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok(Declaration { name, kind, dims, init, pos })
    }

    fn algo(&mut self) -> PResult<Algo> {
        let pos = self.next().pos;
        let (name, _) = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut bodies: BTreeMap<Section, FunctionBody> = BTreeMap::new();
        while *self.peek() != Tok::RBrace {
            let (word, pos) = match self.peek().clone() {
                Tok::Ident(w) => (w, self.pos()),
                _ => return Err(self.unexpected(&["update", "merge", "converge", "}"])),
            };
            let section = match word.as_str() {
                "update" => Section::Update,
                "merge" => Section::Merge,
                "converge" => Section::Converge,
                _ => return Err(Diagnostic::new(pos, format!("unknown construct `{word}` in algo body"))),
            };
            self.next();
            if bodies.contains_key(&section) {
                return Err(Diagnostic::new(pos, format!("duplicate `{word}` function")));
            }
            let body = self.body()?;
            bodies.insert(section, body);
        }
        self.expect(Tok::RBrace)?;
        Ok(Algo {
            name,
            update: bodies.remove(&Section::Update).unwrap_or_default(),
            merge: bodies.remove(&Section::Merge).unwrap_or_default(),
            converge: bodies.remove(&Section::Converge).unwrap_or_default(),
            pos,
        })
    }

    fn body(&mut self) -> PResult<FunctionBody> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            stmts.push(self.stmt()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(FunctionBody { stmts })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let (name, pos) = self.ident()?;
        let kind = match self.peek() {
            Tok::Assign => {
                self.next();
                let expr = self.expr()?;
                StmtKind::Assign { target: name, expr }
            }
            Tok::LParen => StmtKind::Call(self.builtin(&name, pos)?),
            _ => return Err(self.unexpected(&["=", "("])),
        };
        self.expect(Tok::Semi)?;
        Ok(Stmt { kind, pos })
    }

    fn builtin(&mut self, name: &str, pos: Pos) -> PResult<Builtin> {
        self.expect(Tok::LParen)?;
        let call = match name {
            "merge" => {
                let (var, _) = self.ident()?;
                self.expect(Tok::Comma)?;
                let coefficient = self.int()?;
                self.expect(Tok::Comma)?;
                let op = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.next();
                        s
                    }
                    _ => return Err(self.unexpected(&["string"])),
                };
                Builtin::Merge { var, coefficient, op }
            }
            "setEpochs" => Builtin::SetEpochs(self.int()?),
            "setConvergence" => Builtin::SetConvergence(self.ident()?.0),
            "setModel" => {
                let (updated, _) = self.ident()?;
                let model = if *self.peek() == Tok::Comma {
                    self.next();
                    Some(self.ident()?.0)
                } else {
                    None
                };
                Builtin::SetModel { updated, model }
            }
            other => return Err(Diagnostic::new(pos, format!("unknown construct `{other}`"))),
        };
        self.expect(Tok::RParen)?;
        Ok(call)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Gt => BinOp::Gt,
            Tok::EqEq => BinOp::Eq,
            _ => return Ok(lhs),
        };
        self.next();
        let rhs = self.additive()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.next();
            return Ok(match self.unary()? {
                Expr::Literal(v) => Expr::Literal(-v),
                other => Expr::binary(BinOp::Sub, Expr::Literal(0.0), other),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(Expr::Literal(v as f64))
            }
            Tok::Num(v) => {
                self.next();
                Ok(Expr::Literal(v))
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.pos();
                self.next();
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Var(name));
                }
                self.next();
                let arg = self.expr()?;
                let e = if let Some(func) = Nonlinear::from_name(&name) {
                    Expr::Nonlinear { func, arg: Box::new(arg) }
                } else if let Some(op) = GroupOp::from_name(&name) {
                    self.expect(Tok::Comma)?;
                    let apos = self.pos();
                    let axis = self.int()?;
                    if axis < 1 {
                        return Err(Diagnostic::new(apos, format!("group axis must be >= 1, got {axis}")));
                    }
                    Expr::Group { op, arg: Box::new(arg), axis: axis as usize }
                } else {
                    return Err(Diagnostic::new(pos, format!("unknown construct `{name}`")));
                };
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.unexpected(&["number", "identifier", "("])),
        }
    }
}
