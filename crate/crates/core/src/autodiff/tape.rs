use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const NONE: u32 = u32::MAX;

/// Primitive tag recorded for every tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Sqrt,
    Abs,
    Hinge,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Tanh => "tanh",
            Op::Sqrt => "sqrt",
            Op::Abs => "abs",
            Op::Hinge => "hinge",
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    parents: [u32; 2],
    partials: [f64; 2],
    value: f64,
}

/// Append-only record of scalar primitives. Insertion order is a topological
/// order, so the reverse sweep is a single backwards pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    n_leaves: RefCell<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { nodes: RefCell::new(Vec::with_capacity(n)), n_leaves: RefCell::new(0) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf_count(&self) -> usize {
        *self.n_leaves.borrow()
    }

    pub fn leaf(&self, value: f64) -> Var<'_> {
        *self.n_leaves.borrow_mut() += 1;
        self.push(Op::Leaf, [NONE, NONE], [0.0, 0.0], value)
    }

    fn push(&self, op: Op, parents: [u32; 2], partials: [f64; 2], value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(Node { op, parents, partials, value });
        Var { tape: Some(self), idx, val: value }
    }

    /// Adjoint of every node with respect to `output`.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        let Some(t) = output.tape else {
            return adj;
        };
        debug_assert!(std::ptr::eq(t, self), "output belongs to another tape");
        adj[output.idx as usize] = 1.0;
        for i in (0..nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = &nodes[i];
            for k in 0..2 {
                let p = n.parents[k];
                if p != NONE {
                    adj[p as usize] += a * n.partials[k];
                }
            }
        }
        adj
    }

    /// First node whose value is not finite.
    pub fn first_non_finite(&self) -> Option<(usize, Op)> {
        self.nodes.borrow().iter().enumerate().find(|(_, n)| !n.value.is_finite()).map(|(i, n)| (i, n.op))
    }

    /// Errors with the offending node if `output` or any intermediate is not finite.
    pub fn check_finite(&self, output: Var<'_>) -> Result<()> {
        if output.val.is_finite() {
            return Ok(());
        }
        match self.first_non_finite() {
            Some((node, op)) => Err(Error::NonFinite { node, op: op.name() }),
            None => Err(Error::NonFinite { node: output.idx as usize, op: "const" }),
        }
    }
}

/// A scalar that is either a constant or a node on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl<'t> Var<'t> {
    pub fn index(&self) -> Option<usize> {
        self.tape.map(|_| self.idx as usize)
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, op: Op, value: f64, partial: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(t) => t.push(op, [self.idx, NONE], [partial, 0.0], value),
        }
    }

    fn binary(a: Self, b: Self, op: Op, value: f64, da: f64, db: f64) -> Self {
        match (a.tape, b.tape) {
            (None, None) => Var::constant(value),
            (Some(t), None) => t.push(op, [a.idx, NONE], [da, 0.0], value),
            (None, Some(t)) => t.push(op, [b.idx, NONE], [db, 0.0], value),
            (Some(t), Some(_)) => t.push(op, [a.idx, b.idx], [da, db], value),
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Var::binary(self, rhs, Op::Add, self.val + rhs.val, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Var::binary(self, rhs, Op::Sub, self.val - rhs.val, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Var::binary(self, rhs, Op::Mul, self.val * rhs.val, rhs.val, self.val)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        Var::binary(self, rhs, Op::Div, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.val, -1.0)
    }
}

impl Add<f64> for Var<'_> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(Op::Add, self.val + rhs, 1.0)
    }
}

impl Sub<f64> for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(Op::Sub, self.val - rhs, 1.0)
    }
}

impl Mul<f64> for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(Op::Mul, self.val * rhs, rhs)
    }
}

impl Div<f64> for Var<'_> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.unary(Op::Div, self.val / rhs, 1.0 / rhs)
    }
}

impl Scalar for Var<'_> {
    fn constant(v: f64) -> Self {
        Var { tape: None, idx: NONE, val: v }
    }
    fn value(self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(Op::Exp, e, e)
    }
    fn ln(self) -> Self {
        self.unary(Op::Ln, self.val.ln(), 1.0 / self.val)
    }
    fn sin(self) -> Self {
        self.unary(Op::Sin, self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(Op::Cos, self.val.cos(), -self.val.sin())
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(Op::Tanh, t, 1.0 - t * t)
    }
    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        let d = if r > 0.0 { 0.5 / r } else { 0.0 };
        self.unary(Op::Sqrt, r, d)
    }
    fn abs(self) -> Self {
        let d = if self.val > 0.0 {
            1.0
        } else if self.val < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(Op::Abs, self.val.abs(), d)
    }
    fn hinge(self) -> Self {
        if self.val > 0.0 {
            self.unary(Op::Hinge, self.val, 1.0)
        } else {
            Var::constant(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let t = Tape::new();
        let x = t.leaf(3.0);
        let y = t.leaf(-2.0);
        let f = x * y + x.sin();
        let adj = t.adjoints(f);
        assert!((adj[0] - (-2.0 + 3f64.cos())).abs() < 1e-15);
        assert!((adj[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn constants_do_not_grow_the_tape() {
        let t = Tape::new();
        let x = t.leaf(1.0);
        let c = Var::constant(2.0) * Var::constant(4.0);
        assert!(c.is_constant());
        assert_eq!(t.len(), 1);
        let _ = x * c;
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn reused_node_accumulates() {
        let t = Tape::new();
        let x = t.leaf(0.7);
        let f = x * x * x;
        let adj = t.adjoints(f);
        assert!((adj[0] - 3.0 * 0.49).abs() < 1e-14);
    }

    #[test]
    fn non_finite_reports_first_bad_node() {
        let t = Tape::new();
        let x = t.leaf(-1.0);
        let y = x.ln();
        let z = y * 2.0;
        match t.check_finite(z) {
            Err(Error::NonFinite { node, op }) => {
                assert_eq!(node, 1);
                assert_eq!(op, "ln");
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn sqrt_and_hinge_kinks() {
        let t = Tape::new();
        let x = t.leaf(0.0);
        let f = x.sqrt() + x.hinge() + x.abs();
        assert_eq!(t.adjoints(f)[0], 0.0);
    }
}
