use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use super::{Csr, Tensor};
use crate::math;
use crate::{Error, Result};

static NEXT_TAPE: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    idx: usize,
}

/// How the right operand of an element-wise binary op is broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    None,
    /// `1 x c` applied to every row.
    Row,
    /// `r x 1` applied to every column.
    Col,
    /// `1 x 1`.
    Scalar,
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulNt(usize, usize),
    SpMm(Arc<Csr>, usize),
    Add(usize, usize, Bcast),
    Sub(usize, usize, Bcast),
    Mul(usize, usize, Bcast),
    Scale(usize, f64),
    AddScalar(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceRows(usize, usize),
    GatherRows(usize, Vec<usize>),
    Sum(usize),
    Mean(usize),
    RowSums(usize),
    Sigmoid(usize),
    Relu(usize),
    Exp(usize),
    Log(usize),
    Square(usize),
    Clamp(usize, f64, f64),
    BceWithLogits(usize, Tensor),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for reverse-mode differentiation.
///
/// Tapes are single-owner and built per forward pass. Every [`Var`] carries
/// the id of the tape that created it; passing it to another tape is an
/// input error.
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn check(&self, v: Var, op: &'static str) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::input(format!(
                "`{op}` received a variable from another tape"
            )));
        }
        Ok(v.idx)
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    /// A differentiable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.idx].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        v.tape == self.id && self.nodes[v.idx].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a, "matmul")?, self.check(b, "matmul")?);
        let value = self.nodes[ia].value.matmul(&self.nodes[ib].value)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(value, Op::MatMul(ia, ib), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a, "matmul_nt")?, self.check(b, "matmul_nt")?);
        let value = self.nodes[ia].value.matmul_nt(&self.nodes[ib].value)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(value, Op::MatMulNt(ia, ib), rg))
    }

    /// Sparse (constant) times dense.
    pub fn sparse_matmul(&mut self, a: &Arc<Csr>, x: Var) -> Result<Var> {
        let ix = self.check(x, "sparse_matmul")?;
        let value = a.matmul_dense(&self.nodes[ix].value)?;
        let rg = self.rg(ix);
        Ok(self.push(value, Op::SpMm(Arc::clone(a), ix), rg))
    }

    fn bcast(&self, op: &'static str, ia: usize, ib: usize) -> Result<Bcast> {
        let [ra, ca] = self.nodes[ia].value.shape();
        let [rb, cb] = self.nodes[ib].value.shape();
        Ok(if (ra, ca) == (rb, cb) {
            Bcast::None
        } else if (rb, cb) == (1, 1) {
            Bcast::Scalar
        } else if rb == 1 && cb == ca {
            Bcast::Row
        } else if cb == 1 && rb == ra {
            Bcast::Col
        } else {
            return Err(Error::shape(op, format!("{ra}x{ca} with {rb}x{cb}")));
        })
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(usize, usize, Bcast) -> Op,
    ) -> Result<Var> {
        let (ia, ib) = (self.check(a, name)?, self.check(b, name)?);
        let mode = self.bcast(name, ia, ib)?;
        let av = &self.nodes[ia].value;
        let bv = &self.nodes[ib].value;
        let cols = av.cols();
        let mut out = av.clone();
        for (k, o) in out.data_mut().iter_mut().enumerate() {
            let (r, c) = (k / cols.max(1), k % cols.max(1));
            *o = f(*o, broadcast_get(bv, mode, r, c));
        }
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(out, make(ia, ib, mode), rg))
    }

    /// Element-wise sum; `b` may be a row, column or scalar broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub)
    }

    /// Element-wise product; `b` may be a row, column or scalar broadcast.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let ia = self.check(a, "scale")?;
        let value = self.nodes[ia].value.map(|x| x * s);
        let rg = self.rg(ia);
        Ok(self.push(value, Op::Scale(ia, s), rg))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let ia = self.check(a, "add_scalar")?;
        let value = self.nodes[ia].value.map(|x| x + s);
        let rg = self.rg(ia);
        Ok(self.push(value, Op::AddScalar(ia), rg))
    }

    /// Side-by-side concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let idx = parts
            .iter()
            .map(|&p| self.check(p, "concat"))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = idx.iter().map(|&i| &self.nodes[i].value).collect();
        let value = Tensor::concat_cols(&refs)?;
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(value, Op::ConcatCols(idx), rg))
    }

    /// Vertical stacking.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let idx = parts
            .iter()
            .map(|&p| self.check(p, "concat_rows"))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = idx.iter().map(|&i| &self.nodes[i].value).collect();
        let value = Tensor::concat_rows(&refs)?;
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(value, Op::ConcatRows(idx), rg))
    }

    /// Rows `start..start + len`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ia = self.check(a, "slice")?;
        let value = self.nodes[ia].value.slice_rows(start, len)?;
        let rg = self.rg(ia);
        Ok(self.push(value, Op::SliceRows(ia, start), rg))
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let ia = self.check(a, "gather_rows")?;
        let src = &self.nodes[ia].value;
        if let Some(&r) = rows.iter().find(|&&r| r >= src.rows()) {
            return Err(Error::shape(
                "gather_rows",
                format!("row {r} of {}", src.rows()),
            ));
        }
        let mut value = Tensor::zeros(rows.len(), src.cols());
        for (k, &r) in rows.iter().enumerate() {
            value.row_mut(k).copy_from_slice(src.row(r));
        }
        let rg = self.rg(ia);
        Ok(self.push(value, Op::GatherRows(ia, rows.to_vec()), rg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a, "sum")?;
        let value = Tensor::scalar(self.nodes[ia].value.sum());
        let rg = self.rg(ia);
        Ok(self.push(value, Op::Sum(ia), rg))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a, "mean")?;
        let t = &self.nodes[ia].value;
        if t.is_empty() {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        let rg = self.rg(ia);
        Ok(self.push(value, Op::Mean(ia), rg))
    }

    /// Per-row sums as an `r x 1` column.
    pub fn row_sums(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a, "row_sums")?;
        let t = &self.nodes[ia].value;
        let value = Tensor::column((0..t.rows()).map(|r| t.row(r).iter().sum()).collect());
        let rg = self.rg(ia);
        Ok(self.push(value, Op::RowSums(ia), rg))
    }

    fn unary(
        &mut self,
        name: &'static str,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: impl FnOnce(usize) -> Op,
    ) -> Result<Var> {
        let ia = self.check(a, name)?;
        let value = self.nodes[ia].value.map(f);
        let rg = self.rg(ia);
        Ok(self.push(value, op(ia), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, math::sigmoid, Op::Sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, math::exp, Op::Exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary("log", a, math::ln, Op::Log)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary("square", a, |x| x * x, Op::Square)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary("clamp", a, |x| x.clamp(lo, hi), |i| Op::Clamp(i, lo, hi))
    }

    /// Element-wise binary cross-entropy of `logits` against constant
    /// `targets` in `[0, 1]`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let ia = self.check(logits, "bce_with_logits")?;
        let x = &self.nodes[ia].value;
        if x.shape() != targets.shape() {
            return Err(Error::shape(
                "bce_with_logits",
                format!("logits {:?} vs targets {:?}", x.shape(), targets.shape()),
            ));
        }
        let value = x.zip_map(targets, |x, t| math::softplus(x) - t * x);
        let rg = self.rg(ia);
        Ok(self.push(value, Op::BceWithLogits(ia, targets.clone()), rg))
    }

    /// Reverse pass from the scalar `loss`.
    ///
    /// Every recorded leaf gets a gradient; leaves that do not participate in
    /// `loss` get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let li = self.check(loss, "backward")?;
        if self.nodes[li].value.shape() != [1, 1] {
            return Err(Error::input(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[li].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; li + 1];
        grads[li] = Some(Tensor::scalar(1.0));
        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[i];
        let val = |j: usize| &self.nodes[j].value;
        let acc = |j: usize, t: Tensor, grads: &mut [Option<Tensor>]| {
            if !self.nodes[j].requires_grad {
                return;
            }
            match &mut grads[j] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.matmul_nt(val(*b))?, grads);
                }
                if self.rg(*b) {
                    acc(*b, val(*a).matmul_tn(g)?, grads);
                }
            }
            Op::MatMulNt(a, b) => {
                // out = a bᵀ: da = g b, db = gᵀ a
                if self.rg(*a) {
                    acc(*a, g.matmul(val(*b))?, grads);
                }
                if self.rg(*b) {
                    acc(*b, g.matmul_tn(val(*a))?, grads);
                }
            }
            Op::SpMm(s, x) => acc(*x, s.transpose_matmul_dense(g)?, grads),
            Op::Add(a, b, mode) | Op::Sub(a, b, mode) => {
                let sign = if matches!(node.op, Op::Sub(..)) {
                    -1.0
                } else {
                    1.0
                };
                if self.rg(*a) {
                    acc(*a, g.clone(), grads);
                }
                if self.rg(*b) {
                    let mut gb = reduce_broadcast(g, *mode, val(*b));
                    if sign < 0.0 {
                        gb = gb.map(|x| -x);
                    }
                    acc(*b, gb, grads);
                }
            }
            Op::Mul(a, b, mode) => {
                let (av, bv) = (val(*a), val(*b));
                let cols = av.cols().max(1);
                if self.rg(*a) {
                    let mut ga = g.clone();
                    for (k, x) in ga.data_mut().iter_mut().enumerate() {
                        *x *= broadcast_get(bv, *mode, k / cols, k % cols);
                    }
                    acc(*a, ga, grads);
                }
                if self.rg(*b) {
                    let prod = g.zip_map(av, |x, y| x * y);
                    acc(*b, reduce_broadcast(&prod, *mode, bv), grads);
                }
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| x * s), grads),
            Op::AddScalar(a) => acc(*a, g.clone(), grads),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = val(p).cols();
                    if self.rg(p) {
                        let mut gp = Tensor::zeros(g.rows(), pc);
                        for r in 0..g.rows() {
                            gp.row_mut(r)
                                .copy_from_slice(&g.row(r)[offset..offset + pc]);
                        }
                        acc(p, gp, grads);
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pr = val(p).rows();
                    if self.rg(p) {
                        acc(p, g.slice_rows(offset, pr)?, grads);
                    }
                    offset += pr;
                }
            }
            Op::SliceRows(a, start) => {
                let av = val(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for r in 0..g.rows() {
                    ga.row_mut(start + r).copy_from_slice(g.row(r));
                }
                acc(*a, ga, grads);
            }
            Op::GatherRows(a, rows) => {
                let av = val(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for (k, &r) in rows.iter().enumerate() {
                    for (o, x) in ga.row_mut(r).iter_mut().zip(g.row(k)) {
                        *o += x;
                    }
                }
                acc(*a, ga, grads);
            }
            Op::Sum(a) => {
                let [r, c] = val(*a).shape();
                acc(*a, Tensor::full(r, c, g.item()), grads);
            }
            Op::Mean(a) => {
                let [r, c] = val(*a).shape();
                acc(*a, Tensor::full(r, c, g.item() / (r * c) as f64), grads);
            }
            Op::RowSums(a) => {
                let [r, c] = val(*a).shape();
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    ga.row_mut(i).fill(g.get(i, 0));
                }
                acc(*a, ga, grads);
            }
            Op::Sigmoid(a) => {
                let out = &node.value;
                acc(*a, g.zip_map(out, |g, s| g * s * (1.0 - s)), grads);
            }
            Op::Relu(a) => {
                acc(
                    *a,
                    g.zip_map(val(*a), |g, x| if x > 0.0 { g } else { 0.0 }),
                    grads,
                );
            }
            Op::Exp(a) => acc(*a, g.zip_map(&node.value, |g, e| g * e), grads),
            Op::Log(a) => acc(*a, g.zip_map(val(*a), |g, x| g / x), grads),
            Op::Square(a) => acc(*a, g.zip_map(val(*a), |g, x| 2.0 * g * x), grads),
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                acc(
                    *a,
                    g.zip_map(val(*a), |g, x| if x >= lo && x <= hi { g } else { 0.0 }),
                    grads,
                );
            }
            Op::BceWithLogits(a, targets) => {
                let mut ga = g.zip_map(val(*a), |g, x| g * math::sigmoid(x));
                for (o, (gv, t)) in ga
                    .data_mut()
                    .iter_mut()
                    .zip(g.data().iter().zip(targets.data()))
                {
                    *o -= gv * t;
                }
                acc(*a, ga, grads);
            }
        }
        Ok(())
    }
}

#[inline]
fn broadcast_get(b: &Tensor, mode: Bcast, r: usize, c: usize) -> f64 {
    match mode {
        Bcast::None => b.get(r, c),
        Bcast::Row => b.get(0, c),
        Bcast::Col => b.get(r, 0),
        Bcast::Scalar => b.get(0, 0),
    }
}

fn reduce_broadcast(g: &Tensor, mode: Bcast, like: &Tensor) -> Tensor {
    match mode {
        Bcast::None => g.clone(),
        Bcast::Scalar => Tensor::scalar(g.sum()),
        Bcast::Row => {
            let mut out = Tensor::zeros(1, like.cols());
            for r in 0..g.rows() {
                for (o, x) in out.row_mut(0).iter_mut().zip(g.row(r)) {
                    *o += x;
                }
            }
            out
        }
        Bcast::Col => Tensor::column((0..g.rows()).map(|r| g.row(r).iter().sum()).collect()),
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Tensor>>,
    shapes: Vec<[usize; 2]>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` did not
    /// participate.
    pub fn wrt(&self, v: Var) -> Result<Tensor> {
        if v.tape != self.tape || v.idx >= self.shapes.len() {
            return Err(Error::input("gradient requested for a foreign variable"));
        }
        Ok(match self.grads.get(v.idx).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[v.idx];
                Tensor::zeros(r, c)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let y = t.square(x).unwrap();
        let g = t.backward(y).unwrap();
        assert!(close(g.wrt(x).unwrap().item(), 6.0));
    }

    #[test]
    fn sigmoid_value_and_gradient_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let y = t.sigmoid(x).unwrap();
        assert!(close(t.value(y).item(), 0.5));
        let g = t.backward(y).unwrap();
        assert!(close(g.wrt(x).unwrap().item(), 0.25));
    }

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let l = t.bce_with_logits(x, &Tensor::scalar(1.0)).unwrap();
        assert!(close(t.value(l).item(), core::f64::consts::LN_2));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(2, 2));
        assert!(matches!(t.backward(x), Err(Error::Input(_))));
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(1.0));
        let unused = t.leaf(Tensor::zeros(2, 3));
        let y = t.square(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(unused).unwrap(), Tensor::zeros(2, 3));
    }

    #[test]
    fn foreign_variables_are_rejected() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let x = a.leaf(Tensor::scalar(1.0));
        let y = b.leaf(Tensor::scalar(1.0));
        assert!(b.add(x, y).is_err());
        let l = b.square(y).unwrap();
        let g = b.backward(l).unwrap();
        assert!(g.wrt(x).is_err());
    }

    #[test]
    fn broadcast_shapes_are_checked() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(2, 3));
        let b = t.leaf(Tensor::zeros(3, 2));
        assert!(matches!(t.add(a, b), Err(Error::Shape { op: "add", .. })));
    }
}
