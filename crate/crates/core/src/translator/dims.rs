//! Shape rules for DSL expressions.
//!
//! Binary operands combine by, in order: identical dims (elementwise),
//! replication of a scalar, trailing suffix or leading prefix of the larger
//! operand, and finally contraction of `[m,k] op [n,k]` when the result feeds
//! a group op over the shared `k` axis. Group ops drop their 1-based axis;
//! nonlinear ops keep the operand shape.

use serde::{Deserialize, Serialize};

use crate::dsl::{BinOp, Expr};

pub type Dims = Vec<usize>;

pub fn element_count(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// How an operand element is found for a given output element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bcast {
    Same,
    Scalar,
    /// Operand is a trailing suffix; index = out mod operand size.
    Suffix { size: usize },
    /// Operand is a leading prefix; index = out / inner.
    Prefix { inner: usize },
    /// Left side of `[m,k] x [n,k] -> [m,n,k]`.
    ContractLhs { n: usize, k: usize },
    /// Right side of `[m,k] x [n,k] -> [m,n,k]`.
    ContractRhs { n: usize, k: usize },
}

impl Bcast {
    pub fn index(self, out: usize) -> usize {
        match self {
            Bcast::Same => out,
            Bcast::Scalar => 0,
            Bcast::Suffix { size } => out % size,
            Bcast::Prefix { inner } => out / inner,
            Bcast::ContractLhs { n, k } => {
                let (i, l) = (out / (n * k), out % k);
                i * k + l
            }
            Bcast::ContractRhs { n, k } => {
                let (j, l) = ((out / k) % n, out % k);
                j * k + l
            }
        }
    }
}

/// Result shape and operand mappings for an elementwise-style binary op.
pub fn binary(a: &[usize], b: &[usize]) -> Option<(Dims, Bcast, Bcast)> {
    if a == b {
        return Some((a.to_vec(), Bcast::Same, Bcast::Same));
    }
    if a.is_empty() {
        return Some((b.to_vec(), Bcast::Scalar, Bcast::Same));
    }
    if b.is_empty() {
        return Some((a.to_vec(), Bcast::Same, Bcast::Scalar));
    }
    if a.len() < b.len() && b.ends_with(a) {
        return Some((b.to_vec(), Bcast::Suffix { size: element_count(a) }, Bcast::Same));
    }
    if b.len() < a.len() && a.ends_with(b) {
        return Some((a.to_vec(), Bcast::Same, Bcast::Suffix { size: element_count(b) }));
    }
    if a.len() < b.len() && b.starts_with(a) {
        let inner = element_count(&b[a.len()..]);
        return Some((b.to_vec(), Bcast::Prefix { inner }, Bcast::Same));
    }
    if b.len() < a.len() && a.starts_with(b) {
        let inner = element_count(&a[b.len()..]);
        return Some((a.to_vec(), Bcast::Same, Bcast::Prefix { inner }));
    }
    None
}

/// `[m,k] x [n,k] -> [m,n,k]` when a group op over `axis` consumes it.
pub fn contraction(a: &[usize], b: &[usize], axis: usize) -> Option<(Dims, Bcast, Bcast)> {
    match (a, b) {
        ([m, k1], [n, k2]) if k1 == k2 && m != n && *m > 1 && *n > 1 && axis == 2 => {
            let (n, k) = (*n, *k1);
            Some((vec![*m, n, k], Bcast::ContractLhs { n, k }, Bcast::ContractRhs { n, k }))
        }
        _ => None,
    }
}

pub fn group(arg: &[usize], axis: usize) -> Result<Dims, String> {
    if axis == 0 || axis > arg.len() {
        return Err(format!("axis {axis} exceeds operand rank {} (dims {})", arg.len(), show(arg)));
    }
    let mut out = arg.to_vec();
    out.remove(axis - 1);
    Ok(out)
}

pub fn show(dims: &[usize]) -> String {
    if dims.is_empty() {
        "scalar".to_string()
    } else {
        dims.iter().map(|d| format!("[{d}]")).collect()
    }
}

/// Shape of `expr`, resolving variables through `lookup`.
pub fn infer(expr: &Expr, lookup: &dyn Fn(&str) -> Option<Dims>) -> Result<Dims, String> {
    match expr {
        Expr::Literal(_) => Ok(Vec::new()),
        Expr::Var(name) => lookup(name).ok_or_else(|| format!("undefined variable `{name}`")),
        Expr::Nonlinear { arg, .. } => infer(arg, lookup),
        Expr::Group { arg, axis, .. } => {
            if let Expr::Binary { op, lhs, rhs } = arg.as_ref() {
                let (a, b) = (infer(lhs, lookup)?, infer(rhs, lookup)?);
                if binary(&a, &b).is_none() {
                    if let Some((dims, _, _)) = contraction(&a, &b, *axis) {
                        return group(&dims, 3);
                    }
                    return Err(irreconcilable(*op, &a, &b));
                }
            }
            group(&infer(arg, lookup)?, *axis)
        }
        Expr::Binary { op, lhs, rhs } => {
            let (a, b) = (infer(lhs, lookup)?, infer(rhs, lookup)?);
            binary(&a, &b).map(|(d, _, _)| d).ok_or_else(|| irreconcilable(*op, &a, &b))
        }
    }
}

pub fn irreconcilable(op: BinOp, a: &[usize], b: &[usize]) -> String {
    format!("irreconcilable dims for `{}`: {} and {}", op.symbol(), show(a), show(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_and_prefix_indexing() {
        let (d, a, b) = binary(&[16], &[4, 16]).unwrap();
        assert_eq!(d, vec![4, 16]);
        assert_eq!(a.index(17), 1);
        assert_eq!(b, Bcast::Same);
        let (_, a, _) = binary(&[4], &[4, 16]).unwrap();
        assert_eq!(a.index(17), 1);
        assert_eq!(a.index(15), 0);
    }

    #[test]
    fn contraction_indexing() {
        let (d, l, r) = contraction(&[5, 10], &[2, 10], 2).unwrap();
        assert_eq!(d, vec![5, 2, 10]);
        // out (i=3, j=1, l=7)
        let out = (3 * 2 + 1) * 10 + 7;
        assert_eq!(l.index(out), 37);
        assert_eq!(r.index(out), 17);
    }

    #[test]
    fn group_axis_bounds() {
        assert_eq!(group(&[5, 2], 1).unwrap(), vec![2]);
        assert!(group(&[5], 2).is_err());
    }
}
