//! Fixed-menu feedforward layers with explicit forward/backward passes.
//!
//! The tape produced by [`mlp_forward`] holds every intermediate needed
//! for an exact reverse pass; no graph machinery, just the layer stack.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use super::DiffError;

/// Element-wise nonlinearity applied after the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, DiffError> {
        match name {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(DiffError::UnknownActivation(other.to_string())),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    fn grad(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// One affine layer: `act(x W^T + b)`, weights stored (out x in).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Tensor2,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl DenseLayer {
    pub fn zeros(out_dim: usize, in_dim: usize, act: Activation) -> Self {
        Self { w: Tensor2::zeros(out_dim, in_dim), b: vec![0.0; out_dim], act }
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier(out_dim: usize, in_dim: usize, act: Activation, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut layer = Self::zeros(out_dim, in_dim, act);
        for v in layer.w.data_mut() {
            *v = rng.gen_range(-a..a);
        }
        layer
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }
}

/// Intermediates recorded by [`mlp_forward`]; consumed by [`mlp_backward`].
pub struct Tape {
    /// Input to each layer, batch-major.
    inputs: Vec<Tensor2>,
    /// Pre-activation of each layer.
    pres: Vec<Tensor2>,
    /// Layer shapes at record time, used to detect stale tapes.
    shapes: Vec<(usize, usize)>,
    batch: usize,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Gradients for every layer of an MLP, same order as the layer stack.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub dw: Vec<Tensor2>,
    pub db: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(layers: &[DenseLayer]) -> Self {
        Self {
            dw: layers.iter().map(|l| Tensor2::zeros(l.w.rows(), l.w.cols())).collect(),
            db: layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &MlpGrads) {
        for (a, b) in self.dw.iter_mut().zip(&other.dw) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.dw {
            for x in a.data_mut() {
                *x *= s;
            }
        }
        for a in &mut self.db {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
    }
}

/// Runs the layer stack on a batch (rows = samples), recording a tape.
pub fn mlp_forward(layers: &[DenseLayer], x: &Tensor2) -> Result<(Tensor2, Tape), DiffError> {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pres = Vec::with_capacity(layers.len());
    let mut shapes = Vec::with_capacity(layers.len());
    let batch = x.rows();
    let mut cur = x.clone();
    for layer in layers {
        if cur.cols() != layer.in_dim() {
            return Err(DiffError::ShapeMismatch {
                context: "mlp_forward",
                expected: (batch, layer.in_dim()),
                got: (cur.rows(), cur.cols()),
            });
        }
        let mut pre = cur.matmul_bt(&layer.w)?;
        for r in 0..batch {
            let row = pre.row_mut(r);
            for (v, b) in row.iter_mut().zip(&layer.b) {
                *v += b;
            }
        }
        if !pre.is_finite() {
            return Err(DiffError::NonFinite { context: "mlp_forward pre-activation" });
        }
        let mut out = pre.clone();
        for v in out.data_mut() {
            *v = layer.act.apply(*v);
        }
        shapes.push((layer.out_dim(), layer.in_dim()));
        inputs.push(cur);
        pres.push(pre);
        cur = out;
    }
    Ok((cur, Tape { inputs, pres, shapes, batch }))
}

/// Exact reverse pass. Returns per-layer parameter gradients and the
/// gradient with respect to the network input.
pub fn mlp_backward(
    layers: &[DenseLayer],
    tape: &Tape,
    upstream: &Tensor2,
) -> Result<(MlpGrads, Tensor2), DiffError> {
    if tape.shapes.len() != layers.len()
        || tape
            .shapes
            .iter()
            .zip(layers)
            .any(|(s, l)| *s != (l.out_dim(), l.in_dim()))
        || upstream.rows() != tape.batch
        || upstream.cols() != layers.last().map_or(0, |l| l.out_dim())
    {
        return Err(DiffError::StaleTape);
    }
    let mut dw = Vec::with_capacity(layers.len());
    let mut db = Vec::with_capacity(layers.len());
    let mut d_out = upstream.clone();
    for (idx, layer) in layers.iter().enumerate().rev() {
        let pre = &tape.pres[idx];
        let input = &tape.inputs[idx];
        // d_pre = d_out * act'(pre)
        let mut d_pre = d_out;
        for (v, p) in d_pre.data_mut().iter_mut().zip(pre.data()) {
            *v *= layer.act.grad(*p);
        }
        // dW = d_pre^T * input ; db = column sums of d_pre
        dw.push(d_pre.matmul_at(input)?);
        let mut bias = vec![0.0; layer.out_dim()];
        for r in 0..tape.batch {
            for (bv, dv) in bias.iter_mut().zip(d_pre.row(r)) {
                *bv += dv;
            }
        }
        db.push(bias);
        // d_input = d_pre * W
        d_out = d_pre.matmul(&layer.w)?;
    }
    dw.reverse();
    db.reverse();
    Ok((MlpGrads { dw, db }, d_out))
}
