//! Reverse-mode gradient tape over `f64` scalars.
//!
//! A [`Tape`] records every arithmetic operation applied to the [`Var`]s
//! created on it. Each node stores its value and the local partial
//! derivatives with respect to its parents, so [`Tape::backward`] is a
//! single reverse sweep.
//!
//! Operator overloads cannot return `Result`, so domain violations
//! (division by zero, `ln` of a non-positive number, `sqrt` of a negative
//! number, non-finite results) are recorded as a fault on the tape. The
//! first fault is reported by [`Tape::backward`] and [`Tape::check`].
//! [`Tape::record`] offers the same operations with eager error reporting.
//!
//! Tapes are arena-style: build, call `backward`, then [`Tape::clear`]
//! before the next iteration.

use std::cell::RefCell;
use std::fmt;

use super::AutodiffError;

/// Operation kinds a node may carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Sigmoid,
    Max,
    Min,
    Abs,
    /// `x^e` with a constant exponent `e` carried in the argument list as a
    /// second scalar whose gradient is not propagated.
    Pow,
    Atan2,
    /// Fused multi-input node (dot products, affine maps, external gradients).
    Fused,
}

impl Op {
    pub fn arity(self) -> Option<usize> {
        match self {
            Op::Leaf | Op::Constant => Some(0),
            Op::Neg
            | Op::Exp
            | Op::Log
            | Op::Sqrt
            | Op::Sin
            | Op::Cos
            | Op::Tanh
            | Op::Sigmoid
            | Op::Abs => Some(1),
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Max | Op::Min | Op::Pow | Op::Atan2 => {
                Some(2)
            }
            Op::Fused => None,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// First domain violation observed on a tape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fault {
    pub node: usize,
    pub op: Op,
    pub kind: FaultKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NonFinite,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaultKind::DivisionByZero => "division by zero",
            FaultKind::LogOfNonPositive => "log of non-positive value",
            FaultKind::SqrtOfNegative => "sqrt of negative value",
            FaultKind::NonFinite => "non-finite value",
        };
        f.write_str(s)
    }
}

#[derive(Default)]
struct Inner {
    values: Vec<f64>,
    ops: Vec<Op>,
    // edges of node i live in parents/partials[offsets[i]..offsets[i + 1]]
    offsets: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
    fault: Option<Fault>,
}

impl Inner {
    #[inline]
    fn push(&mut self, op: Op, value: f64, edges: &[(u32, f64)]) -> u32 {
        let id = self.values.len();
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.values.push(value);
        self.ops.push(op);
        for &(p, d) in edges {
            self.parents.push(p);
            self.partials.push(d);
        }
        self.offsets.push(self.parents.len() as u32);
        if self.fault.is_none() && !value.is_finite() {
            self.fault = Some(Fault {
                node: id,
                op,
                kind: FaultKind::NonFinite,
            });
        }
        id as u32
    }

    fn fault(&mut self, node: usize, op: Op, kind: FaultKind) {
        if self.fault.is_none() {
            self.fault = Some(Fault { node, op, kind });
        }
    }
}

/// Append-only record of scalar operations.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tape")
            .field("nodes", &inner.values.len())
            .field("fault", &inner.fault)
            .finish()
    }
}

/// A scalar living on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{}: {})", self.index, self.value)
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> f64 {
        self.adjoints[var.index as usize]
    }

    pub fn by_index(&self, index: usize) -> f64 {
        self.adjoints.get(index).copied().unwrap_or(0.0)
    }

    pub fn wrt(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|v| self.get(*v)).collect()
    }

    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let tape = Self::default();
        {
            let mut inner = tape.inner.borrow_mut();
            inner.values.reserve(nodes);
            inner.ops.reserve(nodes);
            inner.offsets.reserve(nodes + 1);
            inner.parents.reserve(2 * nodes);
            inner.partials.reserve(2 * nodes);
        }
        tape
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every node while keeping the allocations.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.values.clear();
        inner.ops.clear();
        inner.offsets.clear();
        inner.parents.clear();
        inner.partials.clear();
        inner.fault = None;
    }

    /// New independent variable. Non-finite values are rejected.
    pub fn var(&self, value: f64) -> Result<Var<'_>, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFiniteInput { value });
        }
        Ok(self.leaf(value))
    }

    pub(crate) fn leaf(&self, value: f64) -> Var<'_> {
        let index = self.inner.borrow_mut().push(Op::Leaf, value, &[]);
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Leaves for a whole parameter vector.
    pub fn vars(&self, values: &[f64]) -> Result<Vec<Var<'_>>, AutodiffError> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        let index = self.inner.borrow_mut().push(Op::Constant, value, &[]);
        Var {
            tape: self,
            index,
            value,
        }
    }

    pub fn fault(&self) -> Option<Fault> {
        self.inner.borrow().fault
    }

    pub fn check(&self) -> Result<(), AutodiffError> {
        match self.fault() {
            Some(f) => Err(AutodiffError::Fault(f)),
            None => Ok(()),
        }
    }

    #[inline]
    fn node(&self, op: Op, value: f64, edges: &[(u32, f64)]) -> Var<'_> {
        let index = self.inner.borrow_mut().push(op, value, edges);
        Var {
            tape: self,
            index,
            value,
        }
    }

    #[inline]
    fn node_fault(&self, op: Op, value: f64, edges: &[(u32, f64)], kind: FaultKind) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.values.len();
        inner.fault(id, op, kind);
        let index = inner.push(op, value, edges);
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Fused node `value` whose gradient flows to `parents` with the given
    /// local partial derivatives.
    pub fn fused<'t>(&'t self, value: f64, parents: &[Var<'t>], partials: &[f64]) -> Var<'t> {
        assert_eq!(parents.len(), partials.len());
        let mut inner = self.inner.borrow_mut();
        let id = inner.values.len();
        if inner.offsets.is_empty() {
            inner.offsets.push(0);
        }
        inner.values.push(value);
        inner.ops.push(Op::Fused);
        for (p, &d) in parents.iter().zip(partials) {
            debug_assert!(std::ptr::eq(p.tape, self));
            inner.parents.push(p.index);
            inner.partials.push(d);
        }
        let end = inner.parents.len() as u32;
        inner.offsets.push(end);
        if !value.is_finite() {
            inner.fault(id, Op::Fused, FaultKind::NonFinite);
        }
        Var {
            tape: self,
            index: id as u32,
            value,
        }
    }

    /// `sum(w[i] * x[i]) + bias` as a single node.
    pub fn affine<'t>(&'t self, weights: &[Var<'t>], inputs: &[Var<'t>], bias: Var<'t>) -> Var<'t> {
        debug_assert_eq!(weights.len(), inputs.len());
        let mut acc = 0.0;
        for (w, x) in weights.iter().zip(inputs) {
            acc += w.value * x.value;
        }
        let value = acc + bias.value;
        let mut inner = self.inner.borrow_mut();
        let id = inner.values.len();
        if inner.offsets.is_empty() {
            inner.offsets.push(0);
        }
        inner.values.push(value);
        inner.ops.push(Op::Fused);
        for (w, x) in weights.iter().zip(inputs) {
            inner.parents.push(w.index);
            inner.partials.push(x.value);
            inner.parents.push(x.index);
            inner.partials.push(w.value);
        }
        inner.parents.push(bias.index);
        inner.partials.push(1.0);
        let end = inner.parents.len() as u32;
        inner.offsets.push(end);
        if !value.is_finite() {
            inner.fault(id, Op::Fused, FaultKind::NonFinite);
        }
        Var {
            tape: self,
            index: id as u32,
            value,
        }
    }

    /// Records `op` applied to `args`, reporting domain errors eagerly.
    pub fn record<'t>(&'t self, op: Op, args: &[Var<'t>]) -> Result<Var<'t>, AutodiffError> {
        if let Some(n) = op.arity() {
            if n != args.len() {
                return Err(AutodiffError::Arity {
                    op,
                    expected: n,
                    got: args.len(),
                });
            }
        }
        if args.iter().any(|a| !std::ptr::eq(a.tape, self)) {
            return Err(AutodiffError::ForeignTape);
        }
        let next = self.len();
        let eager = |kind| {
            Err(AutodiffError::Fault(Fault {
                node: next,
                op,
                kind,
            }))
        };
        let out = match op {
            Op::Leaf => return self.var(0.0),
            Op::Constant => self.constant(0.0),
            Op::Add => args[0] + args[1],
            Op::Sub => args[0] - args[1],
            Op::Mul => args[0] * args[1],
            Op::Div => {
                if args[1].value == 0.0 {
                    return eager(FaultKind::DivisionByZero);
                }
                args[0] / args[1]
            }
            Op::Neg => -args[0],
            Op::Exp => args[0].exp(),
            Op::Log => {
                if args[0].value <= 0.0 {
                    return eager(FaultKind::LogOfNonPositive);
                }
                args[0].ln()
            }
            Op::Sqrt => {
                if args[0].value < 0.0 {
                    return eager(FaultKind::SqrtOfNegative);
                }
                args[0].sqrt()
            }
            Op::Sin => args[0].sin(),
            Op::Cos => args[0].cos(),
            Op::Tanh => args[0].tanh(),
            Op::Sigmoid => args[0].sigmoid(),
            Op::Max => args[0].max(args[1]),
            Op::Min => args[0].min(args[1]),
            Op::Abs => args[0].abs(),
            Op::Pow => args[0].powf(args[1].value),
            Op::Atan2 => args[0].atan2(args[1]),
            Op::Fused => {
                let value = args.iter().map(|a| a.value).sum();
                let ones = vec![1.0; args.len()];
                self.fused(value, args, &ones)
            }
        };
        if !out.value.is_finite() {
            return eager(FaultKind::NonFinite);
        }
        Ok(out)
    }

    /// Reverse sweep from `root`. Adjoints are freshly allocated on every
    /// call, so repeated calls return identical results.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients, AutodiffError> {
        if !std::ptr::eq(root.tape, self) {
            return Err(AutodiffError::ForeignTape);
        }
        self.check()?;
        let inner = self.inner.borrow();
        let mut adjoints = vec![0.0; inner.values.len()];
        let root = root.index as usize;
        adjoints[root] = 1.0;
        for node in (0..=root).rev() {
            let adj = adjoints[node];
            if adj == 0.0 {
                continue;
            }
            let start = inner.offsets[node] as usize;
            let end = inner.offsets[node + 1] as usize;
            for e in start..end {
                adjoints[inner.parents[e] as usize] += adj * inner.partials[e];
            }
        }
        Ok(Gradients { adjoints })
    }

    /// Kind of node `index`, for diagnostics.
    pub fn op_of(&self, index: usize) -> Option<Op> {
        self.inner.borrow().ops.get(index).copied()
    }
}

impl<'t> Var<'t> {
    #[inline]
    pub fn value(self) -> f64 {
        self.value
    }

    #[inline]
    pub fn index(self) -> usize {
        self.index as usize
    }

    #[inline]
    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    #[inline]
    fn unary(self, op: Op, value: f64, d: f64) -> Var<'t> {
        self.tape.node(op, value, &[(self.index, d)])
    }

    #[inline]
    fn binary(self, other: Var<'t>, op: Op, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
        self.tape
            .node(op, value, &[(self.index, da), (other.index, db)])
    }

    pub fn exp(self) -> Var<'t> {
        let v = self.value.exp();
        self.unary(Op::Exp, v, v)
    }

    pub fn ln(self) -> Var<'t> {
        if self.value <= 0.0 {
            return self.tape.node_fault(
                Op::Log,
                f64::NAN,
                &[(self.index, 0.0)],
                FaultKind::LogOfNonPositive,
            );
        }
        self.unary(Op::Log, self.value.ln(), 1.0 / self.value)
    }

    /// Square root; the derivative at exactly zero is taken as 0.
    pub fn sqrt(self) -> Var<'t> {
        if self.value < 0.0 {
            return self.tape.node_fault(
                Op::Sqrt,
                f64::NAN,
                &[(self.index, 0.0)],
                FaultKind::SqrtOfNegative,
            );
        }
        let v = self.value.sqrt();
        let d = if v > 0.0 { 0.5 / v } else { 0.0 };
        self.unary(Op::Sqrt, v, d)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Op::Sin, self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Op::Cos, self.value.cos(), -self.value.sin())
    }

    pub fn tanh(self) -> Var<'t> {
        let v = self.value.tanh();
        self.unary(Op::Tanh, v, 1.0 - v * v)
    }

    pub fn sigmoid(self) -> Var<'t> {
        let v = sigmoid(self.value);
        self.unary(Op::Sigmoid, v, v * (1.0 - v))
    }

    /// `|x|` with subgradient 0 at the origin.
    pub fn abs(self) -> Var<'t> {
        let d = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(Op::Abs, self.value.abs(), d)
    }

    pub fn powf(self, e: f64) -> Var<'t> {
        let v = self.value.powf(e);
        let d = if e == 0.0 {
            0.0
        } else {
            e * self.value.powf(e - 1.0)
        };
        self.unary(Op::Pow, v, d)
    }

    /// Ties route the gradient to `self`.
    pub fn max(self, other: Var<'t>) -> Var<'t> {
        if self.value >= other.value {
            self.binary(other, Op::Max, self.value, 1.0, 0.0)
        } else {
            self.binary(other, Op::Max, other.value, 0.0, 1.0)
        }
    }

    /// Ties route the gradient to `self`.
    pub fn min(self, other: Var<'t>) -> Var<'t> {
        if self.value <= other.value {
            self.binary(other, Op::Min, self.value, 1.0, 0.0)
        } else {
            self.binary(other, Op::Min, other.value, 0.0, 1.0)
        }
    }

    /// `atan2(self, x)`; gradient 0 at the origin.
    pub fn atan2(self, x: Var<'t>) -> Var<'t> {
        let (y0, x0) = (self.value, x.value);
        let r2 = x0 * x0 + y0 * y0;
        let (dy, dx) = if r2 > 0.0 {
            (x0 / r2, -y0 / r2)
        } else {
            (0.0, 0.0)
        };
        self.binary(x, Op::Atan2, y0.atan2(x0), dy, dx)
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

macro_rules! var_binop {
    ($tr:ident, $method:ident, $op:expr, |$a:ident, $b:ident| $val:expr, $da:expr, $db:expr) => {
        impl<'t> std::ops::$tr<Var<'t>> for Var<'t> {
            type Output = Var<'t>;
            #[inline]
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                let $a = self.value;
                let $b = rhs.value;
                self.binary(rhs, $op, $val, $da, $db)
            }
        }
    };
}

var_binop!(Add, add, Op::Add, |a, b| a + b, 1.0, 1.0);
var_binop!(Sub, sub, Op::Sub, |a, b| a - b, 1.0, -1.0);
var_binop!(Mul, mul, Op::Mul, |a, b| a * b, b, a);

impl<'t> std::ops::Div<Var<'t>> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value, rhs.value);
        if b == 0.0 {
            return self.tape.node_fault(
                Op::Div,
                f64::NAN,
                &[(self.index, 0.0), (rhs.index, 0.0)],
                FaultKind::DivisionByZero,
            );
        }
        self.binary(rhs, Op::Div, a / b, 1.0 / b, -a / (b * b))
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn neg(self) -> Var<'t> {
        self.unary(Op::Neg, -self.value, -1.0)
    }
}

impl<'t> std::ops::Add<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(Op::Add, self.value + rhs, 1.0)
    }
}

impl<'t> std::ops::Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(Op::Sub, self.value - rhs, 1.0)
    }
}

impl<'t> std::ops::Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(Op::Mul, self.value * rhs, rhs)
    }
}

impl<'t> std::ops::Div<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, rhs: f64) -> Var<'t> {
        if rhs == 0.0 {
            return self.tape.node_fault(
                Op::Div,
                f64::NAN,
                &[(self.index, 0.0)],
                FaultKind::DivisionByZero,
            );
        }
        self.unary(Op::Div, self.value / rhs, 1.0 / rhs)
    }
}
