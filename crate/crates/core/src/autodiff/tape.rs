//! Scalar reverse-mode tape used to compose losses on top of network jets.
//!
//! Every [`Var`] records its value and the local partials with respect to its
//! parents. [`Tape::gradient`] sweeps the nodes once in reverse creation order.
//! The first operation that produces a non-finite value is remembered and
//! reported by [`Tape::check_finite`].

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct Node {
    value: f64,
    edge_start: usize,
    edge_len: u32,
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    edges: Vec<(usize, f64)>,
    fault: Option<(&'static str, f64)>,
}

#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: &'static str, value: f64, edges: &[(usize, f64)]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        if !value.is_finite() && inner.fault.is_none() {
            inner.fault = Some((op, value));
        }
        let edge_start = inner.edges.len();
        inner.edges.extend_from_slice(edges);
        let idx = inner.nodes.len();
        inner.nodes.push(Node {
            value,
            edge_start,
            edge_len: edges.len() as u32,
        });
        Var { tape: self, idx }
    }

    /// An independent input.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        self.push("leaf", value, &[])
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push("constant", value, &[])
    }

    /// Sum of many variables as a single node.
    pub fn sum<'t>(&'t self, vars: impl IntoIterator<Item = Var<'t>>) -> Var<'t> {
        let mut edges = Vec::new();
        let mut total = 0.0;
        for v in vars {
            debug_assert!(std::ptr::eq(v.tape, self));
            total += v.value();
            edges.push((v.idx, 1.0));
        }
        self.push("sum", total, &edges)
    }

    /// Σ c_i v_i as a single node.
    pub fn linear_combination<'t>(&'t self, terms: impl IntoIterator<Item = (f64, Var<'t>)>) -> Var<'t> {
        let mut edges = Vec::new();
        let mut total = 0.0;
        for (c, v) in terms {
            total += c * v.value();
            edges.push((v.idx, c));
        }
        self.push("linear_combination", total, &edges)
    }

    /// Returns the first non-finite operation if one occurred.
    pub fn check_finite(&self) -> Result<()> {
        match self.inner.borrow().fault {
            Some((op, value)) => Err(Error::Numeric {
                op: op.to_string(),
                value,
            }),
            None => Ok(()),
        }
    }

    /// Adjoint of `output` with respect to every node, indexed by creation order.
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; inner.nodes.len()];
        adj[output.idx] = 1.0;
        for idx in (0..=output.idx).rev() {
            let a = adj[idx];
            if a == 0.0 {
                continue;
            }
            let node = inner.nodes[idx];
            let edges = &inner.edges[node.edge_start..node.edge_start + node.edge_len as usize];
            for &(parent, partial) in edges {
                adj[parent] += a * partial;
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.tape.inner.borrow().nodes[self.idx].value
    }

    pub fn index(&self) -> usize {
        self.idx
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn square(self) -> Var<'t> {
        let v = self.value();
        self.tape.push("square", v * v, &[(self.idx, 2.0 * v)])
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.tape.push("scale", c * self.value(), &[(self.idx, c)])
    }

    pub fn sin(self) -> Var<'t> {
        let v = self.value();
        self.tape.push("sin", v.sin(), &[(self.idx, v.cos())])
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value().exp();
        self.tape.push("exp", e, &[(self.idx, e)])
    }

    pub fn ln(self) -> Var<'t> {
        let v = self.value();
        self.tape.push("ln", v.ln(), &[(self.idx, 1.0 / v)])
    }

    pub fn sqrt(self) -> Var<'t> {
        let s = self.value().sqrt();
        self.tape.push("sqrt", s, &[(self.idx, 0.5 / s)])
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.push(
            "add",
            self.value() + rhs.value(),
            &[(self.idx, 1.0), (rhs.idx, 1.0)],
        )
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.push(
            "sub",
            self.value() - rhs.value(),
            &[(self.idx, 1.0), (rhs.idx, -1.0)],
        )
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), rhs.value());
        self.tape
            .push("mul", a * b, &[(self.idx, b), (rhs.idx, a)])
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), rhs.value());
        self.tape.push(
            "div",
            a / b,
            &[(self.idx, 1.0 / b), (rhs.idx, -a / (b * b))],
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape
            .push("add_const", self.value() + rhs, &[(self.idx, 1.0)])
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.tape
            .push("sub_const", self.value() - rhs, &[(self.idx, 1.0)])
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.leaf(3.0);
        let y = tape.leaf(-2.0);
        let f = x * y + x.square();
        assert_eq!(f.value(), -6.0 + 9.0);
        let g = tape.gradient(f);
        assert_eq!(g[x.index()], -2.0 + 6.0);
        assert_eq!(g[y.index()], 3.0);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        let tape = Tape::new();
        let x = tape.leaf(0.5);
        let s = x.sin();
        let f = s * s;
        let g = tape.gradient(f);
        assert!((g[x.index()] - 2.0 * 0.5f64.sin() * 0.5f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn sum_and_linear_combination() {
        let tape = Tape::new();
        let xs: Vec<_> = (0..4).map(|i| tape.leaf(i as f64)).collect();
        let s = tape.sum(xs.iter().copied());
        let l = tape.linear_combination(xs.iter().enumerate().map(|(i, &v)| (i as f64, v)));
        let f = s + l;
        let g = tape.gradient(f);
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(g[x.index()], 1.0 + i as f64);
        }
        assert_eq!(f.value(), 6.0 + 14.0);
    }

    #[test]
    fn non_finite_is_reported_with_op() {
        let tape = Tape::new();
        let x = tape.leaf(0.0);
        let one = tape.constant(1.0);
        let _ = one / x;
        match tape.check_finite() {
            Err(Error::Numeric { op, .. }) => assert_eq!(op, "div"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
