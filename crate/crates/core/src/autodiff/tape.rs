//! Eager reverse-mode tape over whole tensors.
//!
//! Every operation evaluates immediately, appends a [`Node`] holding its
//! output, and returns a [`Var`] handle. Nodes only reference earlier nodes,
//! so the recording order is already a topological order and
//! [`Tape::backward`] is a single reverse sweep.

use crate::error::{Error, Result};
use crate::layers::{affine, softmax, ActivationKind};
use crate::numerics::{
    conv1d_same, conv1d_same_backward, maxpool1d_backward, maxpool1d_with_indices, Tensor,
};

/// Probabilities below this are clamped before the logarithm in cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Index of a parameter leaf, in registration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug)]
enum Op {
    Input,
    Param,
    Conv { x: Var, w: Var, b: Option<Var> },
    Pow { x: Var, order: u32 },
    Abs(Var),
    Add(Var, Var),
    AddScalar(Var),
    Div(Var, Var),
    Scale(Var, f64),
    Activation(Var, ActivationKind),
    MaxPool { x: Var, argmax: Vec<usize> },
    Reshape(Var),
    Mask { x: Var, mask: Vec<f64> },
    Affine { x: Var, w: Var, b: Var },
    Tanh(Var),
    Softmax(Var),
    CrossEntropy { probs: Var, targets: Tensor },
    SumSquares(Var),
    Dot { x: Var, weights: Tensor },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param => "param",
            Op::Conv { .. } => "conv1d",
            Op::Pow { .. } => "pow",
            Op::Abs(_) => "abs",
            Op::Add(..) => "add",
            Op::AddScalar(_) => "add_scalar",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Activation(..) => "activation",
            Op::MaxPool { .. } => "maxpool",
            Op::Reshape(_) => "reshape",
            Op::Mask { .. } => "dropout",
            Op::Affine { .. } => "affine",
            Op::Tanh(_) => "tanh",
            Op::Softmax(_) => "softmax",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::SumSquares(_) => "sum_squares",
            Op::Dot { .. } => "dot",
        }
    }
}

#[derive(Debug)]
pub struct Node {
    op: Op,
    value: Tensor,
}

impl Node {
    pub fn op_name(&self) -> &'static str {
        self.op.name()
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Var>,
}

/// Parameter gradients indexed by [`ParamId`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.grads.iter()
    }

    pub fn into_vec(self) -> Vec<Tensor> {
        self.grads
    }
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    a.zip_map(b, f).expect("tape operands share a shape")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Op::Input, value)
    }

    /// Trainable leaf. Ids are handed out in call order.
    pub fn param(&mut self, value: Tensor) -> (Var, ParamId) {
        let id = ParamId(self.params.len());
        let v = self.push(Op::Param, value);
        self.params.push(v);
        (v, id)
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let value = conv1d_same(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        Ok(self.push(Op::Conv { x, w, b }, value))
    }

    pub fn pow(&mut self, x: Var, order: u32) -> Var {
        let value = self.value(x).map(|v| v.powi(order as i32));
        self.push(Op::Pow { x, order }, value)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::abs);
        self.push(Op::Abs(x), value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |u, v| u + v)?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).map(|v| v + c);
        self.push(Op::AddScalar(x), value)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |u, v| u / v)?;
        Ok(self.push(Op::Div(a, b), value))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).map(|v| v * c);
        self.push(Op::Scale(x, c), value)
    }

    pub fn activation(&mut self, x: Var, kind: ActivationKind) -> Var {
        let value = self.value(x).map(|u| kind.eval(u));
        self.push(Op::Activation(x, kind), value)
    }

    pub fn maxpool(&mut self, x: Var, pool: usize) -> Result<Var> {
        let (value, argmax) = maxpool1d_with_indices(self.value(x), pool)?;
        Ok(self.push(Op::MaxPool { x, argmax }, value))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        Ok(self.push(Op::Reshape(x), value))
    }

    /// Elementwise product with a fixed mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        if mask.len() != self.value(x).len() {
            return Err(Error::shape(format!(
                "mask of {} entries for tensor {:?}",
                mask.len(),
                self.value(x).shape()
            )));
        }
        let src = self.value(x);
        let value = Tensor::new(
            src.shape(),
            src.data().iter().zip(&mask).map(|(v, m)| v * m).collect(),
        )?;
        Ok(self.push(Op::Mask { x, mask }, value))
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let value = affine(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(Op::Affine { x, w, b }, value))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::tanh);
        self.push(Op::Tanh(x), value)
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let value = softmax(self.value(x))?;
        Ok(self.push(Op::Softmax(x), value))
    }

    /// Mean over the batch of `-sum_c t_c ln(max(p_c, PROB_FLOOR))`.
    pub fn cross_entropy(&mut self, probs: Var, targets: &Tensor) -> Result<Var> {
        let p = self.value(probs);
        if p.rank() != 2 {
            return Err(Error::shape(format!(
                "cross-entropy expects [batch, classes], got {:?}",
                p.shape()
            )));
        }
        targets.expect_shape(p.shape())?;
        let value = cross_entropy_value(p, targets);
        Ok(self.push(
            Op::CrossEntropy {
                probs,
                targets: targets.clone(),
            },
            Tensor::scalar(value),
        ))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let value = self.value(x).data().iter().map(|v| v * v).sum();
        self.push(Op::SumSquares(x), Tensor::scalar(value))
    }

    /// `sum_i x_i * weights_i` with constant weights.
    pub fn dot(&mut self, x: Var, weights: &Tensor) -> Result<Var> {
        weights.expect_shape(self.value(x).shape())?;
        let value = self
            .value(x)
            .data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.push(
            Op::Dot {
                x,
                weights: weights.clone(),
            },
            Tensor::scalar(value),
        ))
    }

    /// Gradients of the scalar `loss` with respect to every parameter leaf.
    /// Parameters the loss does not depend on get zero tensors.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        if !loss_value.item().is_finite() {
            return Err(Error::numeric(format!(
                "non-finite loss at node {} ({})",
                loss.0,
                self.node(loss).op_name()
            )));
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(loss_value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !g.all_finite() {
                return Err(Error::numeric(format!(
                    "non-finite gradient at node {idx} ({})",
                    self.nodes[idx].op_name()
                )));
            }
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads)?;
            // Leaves keep their gradient for collection below.
            if matches!(node.op, Op::Param) {
                grads[idx] = Some(g);
            }
        }

        let collected = self
            .params
            .iter()
            .map(|&v| {
                grads
                    .get(v.0)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| Tensor::zeros(self.value(v).shape()))
            })
            .collect();
        Ok(Gradients { grads: collected })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut accumulate = |v: Var, contribution: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        };
        match &node.op {
            Op::Input | Op::Param => {}
            Op::Conv { x, w, b } => {
                let cg = conv1d_same_backward(self.value(*x), self.value(*w), g)?;
                accumulate(*x, cg.input);
                accumulate(*w, cg.kernel);
                if let Some(b) = b {
                    accumulate(*b, cg.bias);
                }
            }
            Op::Pow { x, order } => {
                let n = *order as i32;
                let local = elementwise(self.value(*x), g, |u, gv| {
                    gv * f64::from(n) * u.powi(n - 1)
                });
                accumulate(*x, local);
            }
            Op::Abs(x) => {
                // Subgradient 0 at the kink.
                let local = elementwise(self.value(*x), g, |u, gv| {
                    if u > 0.0 {
                        gv
                    } else if u < 0.0 {
                        -gv
                    } else {
                        0.0
                    }
                });
                accumulate(*x, local);
            }
            Op::Add(a, b) => {
                accumulate(*a, g.clone());
                accumulate(*b, g.clone());
            }
            Op::AddScalar(x) => accumulate(*x, g.clone()),
            Op::Div(a, b) => {
                let (num, den) = (self.value(*a), self.value(*b));
                accumulate(*a, elementwise(g, den, |gv, d| gv / d));
                let mut gb = elementwise(g, num, |gv, n| -gv * n);
                for (v, d) in gb.data_mut().iter_mut().zip(den.data()) {
                    *v /= d * d;
                }
                accumulate(*b, gb);
            }
            Op::Scale(x, c) => accumulate(*x, g.map(|v| v * c)),
            Op::Activation(x, kind) => {
                let u = self.value(*x);
                let mut local = elementwise(u, &node.value, |u, y| kind.derivative(u, y));
                for (l, gv) in local.data_mut().iter_mut().zip(g.data()) {
                    *l *= gv;
                }
                accumulate(*x, local);
            }
            Op::MaxPool { x, argmax } => {
                accumulate(*x, maxpool1d_backward(self.value(*x).shape(), argmax, g));
            }
            Op::Reshape(x) => {
                let shape = self.value(*x).shape().to_vec();
                accumulate(*x, g.clone().reshape(&shape)?);
            }
            Op::Mask { x, mask } => {
                let data = g.data().iter().zip(mask).map(|(a, m)| a * m).collect();
                accumulate(*x, Tensor::new(g.shape(), data)?);
            }
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (batch, fin, fout) = (xv.dim(0), wv.dim(0), wv.dim(1));
                let mut gx = vec![0.0; batch * fin];
                let mut gw = vec![0.0; fin * fout];
                let mut gb = vec![0.0; fout];
                for r in 0..batch {
                    let grow = &g.data()[r * fout..(r + 1) * fout];
                    let xrow = &xv.data()[r * fin..(r + 1) * fin];
                    for (acc, gv) in gb.iter_mut().zip(grow) {
                        *acc += gv;
                    }
                    for i in 0..fin {
                        let wrow = &wv.data()[i * fout..(i + 1) * fout];
                        gx[r * fin + i] = wrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        let gwrow = &mut gw[i * fout..(i + 1) * fout];
                        for (acc, gv) in gwrow.iter_mut().zip(grow) {
                            *acc += xrow[i] * gv;
                        }
                    }
                }
                accumulate(*x, Tensor::new(xv.shape(), gx)?);
                accumulate(*w, Tensor::new(wv.shape(), gw)?);
                accumulate(*b, Tensor::vector(gb));
            }
            Op::Tanh(x) => {
                accumulate(*x, elementwise(&node.value, g, |y, gv| gv * (1.0 - y * y)));
            }
            Op::Softmax(x) => {
                let p = &node.value;
                let classes = p.dim(1);
                let mut gx = Vec::with_capacity(p.len());
                for (prow, grow) in p.data().chunks_exact(classes).zip(g.data().chunks_exact(classes)) {
                    let inner: f64 = prow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    gx.extend(prow.iter().zip(grow).map(|(pi, gi)| pi * (gi - inner)));
                }
                accumulate(*x, Tensor::new(p.shape(), gx)?);
            }
            Op::CrossEntropy { probs, targets } => {
                let p = self.value(*probs);
                let scale = g.item() / p.dim(0) as f64;
                let local = elementwise(p, targets, |pv, t| {
                    if pv > PROB_FLOOR {
                        -scale * t / pv
                    } else {
                        0.0
                    }
                });
                accumulate(*probs, local);
            }
            Op::SumSquares(x) => {
                let s = 2.0 * g.item();
                accumulate(*x, self.value(*x).map(|v| s * v));
            }
            Op::Dot { x, weights } => {
                let s = g.item();
                accumulate(*x, weights.map(|w| s * w));
            }
        }
        Ok(())
    }
}

pub(crate) fn cross_entropy_value(probs: &Tensor, targets: &Tensor) -> f64 {
    let batch = probs.dim(0).max(1) as f64;
    let total: f64 = probs
        .data()
        .iter()
        .zip(targets.data())
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * p.max(PROB_FLOOR).ln())
        .sum();
    total / batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn random(shape: &[usize], rng: &mut RngStream) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, rng.uniform(-1.0, 1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn linear_conv_adjoint() {
        // loss = sum(w * x): dL/dw[r] = sum over output positions of the
        // padded input at offset r, i.e. x correlated with ones.
        let x = Tensor::new(&[1, 4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut tape = Tape::new();
        let xv = tape.input(x);
        let (w, id) = tape.param(Tensor::new(&[3, 1, 1], vec![0.3, -0.2, 0.5]).unwrap());
        let y = tape.conv1d(xv, w, None).unwrap();
        let ones = Tensor::filled(&[1, 4, 1], 1.0);
        let loss = tape.dot(y, &ones).unwrap();
        let grads = tape.backward(loss).unwrap();
        // tap 0 sees x[m-1]: 0+1+2+3; tap 1 sees all; tap 2 sees x[m+1]: 2+3+4+0
        assert_eq!(grads.get(id).data(), &[6.0, 10.0, 9.0]);
    }

    #[test]
    fn unreachable_param_gets_zeros() {
        let mut tape = Tape::new();
        let (a, _) = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let (_, unused) = tape.param(Tensor::zeros(&[2, 3]));
        let loss = tape.sum_squares(a);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(unused), &Tensor::zeros(&[2, 3]));
        assert_eq!(grads.get(ParamId(0)).data(), &[2.0, 4.0]);
    }

    #[test]
    fn abs_subgradient_is_zero_at_origin() {
        let mut tape = Tape::new();
        let (u, id) = tape.param(Tensor::vector(vec![0.0, 2.0, -3.0]));
        let a = tape.abs(u);
        let loss = tape.dot(a, &Tensor::filled(&[3], 1.0)).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(id).data(), &[0.0, 1.0, -1.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let (u, _) = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(u), Err(Error::Contract(_))));
    }

    #[test]
    fn nan_names_the_node() {
        let mut tape = Tape::new();
        let (u, _) = tape.param(Tensor::vector(vec![0.0]));
        let (v, _) = tape.param(Tensor::vector(vec![0.0]));
        let q = tape.div(u, v).unwrap();
        let loss = tape.sum_squares(q);
        let err = tape.backward(loss).unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("sum_squares")), "{err}");
    }

    #[test]
    fn backward_is_pure_and_linear_in_the_loss() {
        let mut rng = RngStream::new(3);
        let mut tape = Tape::new();
        let x = tape.input(random(&[2, 9, 2], &mut rng));
        let (w, wid) = tape.param(random(&[3, 2, 3], &mut rng));
        let (b, bid) = tape.param(random(&[3], &mut rng));
        let y = tape.conv1d(x, w, Some(b)).unwrap();
        let t = tape.activation(y, ActivationKind::Tanh);
        let l1 = tape.dot(t, &random(&[2, 9, 3], &mut rng)).unwrap();
        let l2 = tape.sum_squares(t);
        let total = tape.add(l1, l2).unwrap();

        let g1 = tape.backward(l1).unwrap();
        let g2 = tape.backward(l2).unwrap();
        let gt = tape.backward(total).unwrap();
        assert_eq!(gt, tape.backward(total).unwrap());
        for id in [wid, bid] {
            let mut sum = g1.get(id).clone();
            sum.add_assign(g2.get(id));
            assert!(sum.max_abs_diff(gt.get(id)) < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_reference_values() {
        let mut tape = Tape::new();
        let uniform = tape.input(Tensor::filled(&[3, 8], 0.125));
        let mut targets = Tensor::zeros(&[3, 8]);
        for r in 0..3 {
            targets.data_mut()[r * 8 + r] = 1.0;
        }
        let l = tape.cross_entropy(uniform, &targets).unwrap();
        assert!((tape.value(l).item() - 8f64.ln()).abs() < 1e-12);
        let perfect = tape.input(targets.clone());
        let l = tape.cross_entropy(perfect, &targets).unwrap();
        assert_eq!(tape.value(l).item(), 0.0);
        // A zero probability on the true class is clamped, not infinite.
        let zero = tape.input(Tensor::zeros(&[3, 8]));
        let l = tape.cross_entropy(zero, &targets).unwrap();
        assert!((tape.value(l).item() + PROB_FLOOR.ln()).abs() < 1e-9);
    }
}
