//! Minimal differentiable compute kernel: tensors, a reverse-mode tape,
//! an LSTM cell, Adam and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod init;
mod linalg;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, ParamState};
pub use gradcheck::{grad_check, gradcheck_suite, OpCheck};
pub use init::{glorot_uniform, init_matrix};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("numeric guard: {0}")]
    Numeric(String),
}

/// Standard matrix product of an m×k and a k×n tensor.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, KernelError> {
    let mut tape = Tape::new();
    let (a, b) = (tape.constant(a.clone()), tape.constant(b.clone()));
    let out = tape.matmul(a, b)?;
    Ok(tape.value(out).clone())
}

/// Softmax of a vector (or of every row of a matrix).
pub fn softmax(v: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let v = tape.constant(v.clone());
    let out = tape.softmax(v);
    tape.value(out).clone()
}

/// Weights of one LSTM layer, gate order `[i | f | g | o]`.
///
/// `wx` is d×4u, `wh` is u×4u and `b` has length 4u.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    pub wx: Tensor,
    pub wh: Tensor,
    pub b: Tensor,
}

impl LstmWeights {
    pub fn hidden(&self) -> usize {
        self.wh.rows()
    }
}

/// Records one LSTM step on the tape; `x`, `h` and `c` are row batches.
/// Returns the new `(h, c)` nodes.
pub fn lstm_step_graph(
    tape: &mut Tape,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    wx: NodeId,
    wh: NodeId,
    b: NodeId,
) -> Result<(NodeId, NodeId), KernelError> {
    let xw = tape.matmul(x, wx)?;
    let hw = tape.matmul(h, wh)?;
    let pre = tape.add(xw, hw)?;
    let gates = tape.add_row(pre, b)?;
    let hc = tape.lstm_cell(gates, c)?;
    let u = tape.value(c).cols();
    let h_new = tape.slice_cols(hc, 0, u)?;
    let c_new = tape.slice_cols(hc, u, u)?;
    Ok((h_new, c_new))
}

/// One LSTM step on vectors: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step(
    x: &Tensor,
    h: &Tensor,
    c: &Tensor,
    weights: &LstmWeights,
) -> Result<(Tensor, Tensor), KernelError> {
    let u = weights.hidden();
    if h.len() != u || c.len() != u || x.len() != weights.wx.rows() {
        return Err(KernelError::Shape(format!(
            "lstm_step: x {}, h {}, c {} for weights {}x{}",
            x.len(),
            h.len(),
            c.len(),
            weights.wx.rows(),
            weights.wx.cols()
        )));
    }
    let mut tape = Tape::new();
    let xn = tape.constant(x.reshape(vec![1, x.len()])?);
    let hn = tape.constant(h.reshape(vec![1, u])?);
    let cn = tape.constant(c.reshape(vec![1, u])?);
    let wx = tape.constant(weights.wx.clone());
    let wh = tape.constant(weights.wh.clone());
    let b = tape.constant(weights.b.clone());
    let (h2, c2) = lstm_step_graph(&mut tape, xn, hn, cn, wx, wh, b)?;
    Ok((tape.value(h2).reshape(vec![u])?, tape.value(c2).reshape(vec![u])?))
}

/// Reverse-mode gradients of scalar `loss` on `tape`.
pub fn backprop(tape: &Tape, loss: NodeId) -> Result<Gradients, KernelError> {
    tape.backprop(loss)
}
