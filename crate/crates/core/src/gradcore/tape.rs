//! Define-by-run reverse-mode differentiation.
//!
//! Every forward call records its inputs and result on a [`Tape`]; a tape
//! is built for one batch and thrown away afterwards. [`Tape::backward`]
//! walks the records in reverse and adds `∂out/∂p` into the gradient
//! buffer of every [`ParamStore`] entry read through [`Tape::param`].
//! Intermediate gradients never leave the tape.

use super::ops;
use super::params::ParamStore;
use super::tensor::{matmul, Tensor2D, Trans};
use crate::error::{Error, Result};

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// The forward primitives the model is built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    /// `x · w + b` with row-broadcast bias; inputs `[x, w, b]`.
    Affine,
    /// `a · b`.
    Matmul,
    /// `a · bᵀ`.
    MatmulBt,
    Relu,
    Exp,
    SoftmaxRows,
    /// Elementwise log; `floor` clamps from below before the log.
    LogRows { floor: Option<f64> },
    Hadamard,
    Add,
    Scale(f64),
    AddScalar(f64),
    SumAll,
}

impl Primitive {
    fn arity(self) -> usize {
        match self {
            Primitive::Affine => 3,
            Primitive::Matmul | Primitive::MatmulBt | Primitive::Hadamard | Primitive::Add => 2,
            _ => 1,
        }
    }
}

/// Evaluates one primitive outside of any tape.
pub fn forward_primitive(kind: Primitive, inputs: &[&Tensor2D]) -> Result<Tensor2D> {
    if inputs.len() != kind.arity() {
        return Err(Error::InvalidConfig(format!(
            "{kind:?} takes {} inputs, got {}",
            kind.arity(),
            inputs.len()
        )));
    }
    match kind {
        Primitive::Affine => ops::affine(inputs[0], inputs[1], inputs[2]),
        Primitive::Matmul => matmul(inputs[0], Trans::No, inputs[1], Trans::No),
        Primitive::MatmulBt => matmul(inputs[0], Trans::No, inputs[1], Trans::Yes),
        Primitive::Relu => Ok(ops::relu(inputs[0])),
        Primitive::Exp => Ok(ops::exp(inputs[0])),
        Primitive::SoftmaxRows => Ok(ops::softmax_rows(inputs[0])),
        Primitive::LogRows { floor } => ops::log_rows(inputs[0], floor),
        Primitive::Hadamard => ops::hadamard(inputs[0], inputs[1]),
        Primitive::Add => ops::add(inputs[0], inputs[1]),
        Primitive::Scale(c) => Ok(ops::scale(inputs[0], c)),
        Primitive::AddScalar(c) => Ok(ops::add_scalar(inputs[0], c)),
        Primitive::SumAll => Ok(ops::sum_all(inputs[0])),
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(String),
    Apply(Primitive, Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Tensor2D,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Tensor2D {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor2D, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a non-differentiable input.
    pub fn constant(&mut self, value: Tensor2D) -> Var {
        debug_assert!(value.all_finite(), "non-finite constant");
        self.push(value, Op::Constant, false)
    }

    /// Records a read of a named parameter.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let value = store.value(name)?.clone();
        debug_assert!(value.all_finite(), "non-finite parameter {name}");
        Ok(self.push(value, Op::Param(name.to_owned()), true))
    }

    pub fn apply(&mut self, kind: Primitive, inputs: &[Var]) -> Result<Var> {
        let value = {
            let vals: Vec<&Tensor2D> = inputs.iter().map(|v| self.value(*v)).collect();
            forward_primitive(kind, &vals)?
        };
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push(value, Op::Apply(kind, inputs.to_vec()), needs_grad))
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Affine, &[x, w, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Matmul, &[a, b])
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatmulBt, &[a, b])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.apply(Primitive::Relu, &[x]).expect("unary op")
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.apply(Primitive::Exp, &[x]).expect("unary op")
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        self.apply(Primitive::SoftmaxRows, &[x]).expect("unary op")
    }

    pub fn log_rows(&mut self, x: Var, floor: Option<f64>) -> Result<Var> {
        self.apply(Primitive::LogRows { floor }, &[x])
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Hadamard, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.apply(Primitive::Scale(c), &[x]).expect("unary op")
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.apply(Primitive::AddScalar(c), &[x]).expect("unary op")
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        self.apply(Primitive::SumAll, &[x]).expect("unary op")
    }

    /// Propagates `∂out/∂·` through the tape and accumulates the parameter
    /// gradients into `store`. Buffers are added to, not overwritten; call
    /// [`ParamStore::zero_grads`] between steps.
    pub fn backward(&self, out: Var, store: &mut ParamStore) -> Result<()> {
        let out_value = self.value(out);
        if out_value.len() != 1 {
            return Err(Error::NotScalar {
                rows: out_value.rows(),
                cols: out_value.cols(),
            });
        }
        if !self.nodes[out.0].needs_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Tensor2D>> = vec![None; out.0 + 1];
        grads[out.0] = Some(Tensor2D::scalar(1.0));

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(name) => store.param_mut(name)?.grad.add_assign(&g),
                Op::Apply(kind, inputs) => {
                    let needs: Vec<bool> = inputs.iter().map(|v| self.nodes[v.0].needs_grad).collect();
                    let vals: Vec<&Tensor2D> = inputs.iter().map(|v| self.value(*v)).collect();
                    let input_grads = backward_primitive(*kind, &vals, &node.value, &g, &needs)?;
                    for (v, ig) in inputs.iter().zip(input_grads) {
                        if let Some(ig) = ig {
                            match &mut grads[v.0] {
                                Some(acc) => acc.add_assign(&ig),
                                slot => *slot = Some(ig),
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn backward_primitive(
    kind: Primitive,
    x: &[&Tensor2D],
    out: &Tensor2D,
    g: &Tensor2D,
    needs: &[bool],
) -> Result<Vec<Option<Tensor2D>>> {
    let want = |i: usize| needs[i];
    let grads = match kind {
        Primitive::Affine => {
            let dx = want(0)
                .then(|| matmul(g, Trans::No, x[1], Trans::Yes))
                .transpose()?;
            let dw = want(1)
                .then(|| matmul(x[0], Trans::Yes, g, Trans::No))
                .transpose()?;
            let db = want(2).then(|| g.col_sums());
            vec![dx, dw, db]
        }
        Primitive::Matmul => {
            let da = want(0)
                .then(|| matmul(g, Trans::No, x[1], Trans::Yes))
                .transpose()?;
            let db = want(1)
                .then(|| matmul(x[0], Trans::Yes, g, Trans::No))
                .transpose()?;
            vec![da, db]
        }
        Primitive::MatmulBt => {
            let da = want(0)
                .then(|| matmul(g, Trans::No, x[1], Trans::No))
                .transpose()?;
            let db = want(1)
                .then(|| matmul(g, Trans::Yes, x[0], Trans::No))
                .transpose()?;
            vec![da, db]
        }
        Primitive::Relu => vec![Some(x[0].zip_map(g, "relu'", |xi, gi| {
            if xi > 0.0 {
                gi
            } else {
                0.0
            }
        })?)],
        Primitive::Exp => vec![Some(out.zip_map(g, "exp'", |y, gi| y * gi)?)],
        Primitive::SoftmaxRows => {
            let mut dx = Tensor2D::zeros(out.rows(), out.cols());
            for r in 0..out.rows() {
                let (y, gr) = (out.row(r), g.row(r));
                let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                for ((d, yi), gi) in dx.row_mut(r).iter_mut().zip(y).zip(gr) {
                    *d = yi * (gi - dot);
                }
            }
            vec![Some(dx)]
        }
        Primitive::LogRows { floor } => {
            let f = floor.unwrap_or(f64::NEG_INFINITY);
            vec![Some(x[0].zip_map(g, "log'", |xi, gi| {
                if xi >= f {
                    gi / xi
                } else {
                    0.0
                }
            })?)]
        }
        Primitive::Hadamard => {
            let da = want(0).then(|| g.zip_map(x[1], "hadamard'", |a, b| a * b)).transpose()?;
            let db = want(1).then(|| g.zip_map(x[0], "hadamard'", |a, b| a * b)).transpose()?;
            vec![da, db]
        }
        Primitive::Add => vec![want(0).then(|| g.clone()), want(1).then(|| g.clone())],
        Primitive::Scale(c) => vec![Some(ops::scale(g, c))],
        Primitive::AddScalar(_) => vec![Some(g.clone())],
        Primitive::SumAll => {
            let s = g.item().expect("sum_all gradient is scalar");
            vec![Some(Tensor2D::full(x[0].rows(), x[0].cols(), s))]
        }
    };
    Ok(grads)
}
