//! Reverse-mode differentiation over a linear tape of matrix ops.
//!
//! Every op appends a node whose inputs already exist, so the node list is
//! always in topological order and [`Tape::backprop`] is a single reverse
//! sweep. Ops work on the matrix view of a tensor (see [`Tensor::dims2`]).

use std::collections::BTreeMap;

use super::linalg::{gemm_nn, gemm_nt, gemm_tn, sigmoid};
use super::{KernelError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Sum(NodeId),
    SliceCols { src: NodeId, start: usize },
    GatherRows { src: NodeId, index: Vec<usize> },
    SelectRows { new: NodeId, old: NodeId, mask: Vec<bool> },
    LstmCell { gates: NodeId, c_prev: NodeId },
    Nll { probs: NodeId, targets: Vec<usize>, weights: Vec<f64> },
    SqErr { pred: NodeId, target: NodeId, weights: Vec<f64> },
    PairDist(NodeId, NodeId),
    MarginRank { dist: NodeId, margin: f64 },
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | AddRow(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | PairDist(a, b) => {
                vec![*a, *b]
            }
            Scale(a, _) | Tanh(a) | Sigmoid(a) | Softmax(a) | Sum(a) => vec![*a],
            SliceCols { src, .. } | GatherRows { src, .. } => vec![*src],
            SelectRows { new, old, .. } => vec![*new, *old],
            LstmCell { gates, c_prev } => vec![*gates, *c_prev],
            Nll { probs, .. } => vec![*probs],
            SqErr { pred, target, .. } => vec![*pred, *target],
            MarginRank { dist, .. } => vec![*dist],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
    /// Op-specific activations kept for the backward sweep.
    cache: Vec<f64>,
}

/// Gradients of one scalar with respect to every node that needed them.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: BTreeMap<NodeId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Tensor)> {
        self.grads.iter()
    }

    pub fn into_map(self) -> BTreeMap<NodeId, Tensor> {
        self.grads
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &str, detail: String) -> KernelError {
    KernelError::Shape(format!("{op}: {detail}"))
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

    /// A leaf whose gradient is wanted.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, true)
    }

    /// A leaf treated as data.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { op: Op::Leaf, value, needs_grad: requires_grad, cache: vec![] });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn needs_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn push(&mut self, op: Op, value: Tensor, cache: Vec<f64>) -> NodeId {
        let needs_grad = op.inputs().iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node { op, value, needs_grad, cache });
        NodeId(self.nodes.len() - 1)
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.dims2()
    }

    fn data(&self, id: NodeId) -> &[f64] {
        self.nodes[id.0].value.data()
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(shape_err("matmul", format!("{m}x{k} times {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(self.data(a), self.data(b), &mut out, m, k, n);
        Ok(self.push(Op::MatMul(a, b), Tensor::from_raw(vec![m, n], out), vec![]))
    }

    /// Adds a length-n bias to every row of an m×n matrix.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, KernelError> {
        let (m, n) = self.dims(a);
        if self.nodes[bias.0].value.len() != n {
            return Err(shape_err(
                "add_row",
                format!("bias of {} for {n} columns", self.nodes[bias.0].value.len()),
            ));
        }
        let b = self.data(bias);
        let mut out = self.data(a).to_vec();
        for row in out.chunks_mut(n) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        Ok(self.push(Op::AddRow(a, bias), Tensor::from_raw(vec![m, n], out), vec![]))
    }

    fn same_shape(&self, op: &str, a: NodeId, b: NodeId) -> Result<(), KernelError> {
        let (sa, sb) = (self.nodes[a.0].value.shape(), self.nodes[b.0].value.shape());
        if sa != sb {
            return Err(shape_err(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&mut self, op: Op, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let out: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| f(*x, *y)).collect();
        let shape = self.nodes[a.0].value.shape().to_vec();
        self.push(op, Tensor::from_raw(shape, out), vec![])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(Op::Add(a, b), a, b, |x, y| x + y))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(Op::Sub(a, b), a, b, |x, y| x - y))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(Op::Mul(a, b), a, b, |x, y| x * y))
    }

    fn map(&mut self, op: Op, a: NodeId, f: impl Fn(f64) -> f64) -> NodeId {
        let out: Vec<f64> = self.data(a).iter().map(|x| f(*x)).collect();
        let shape = self.nodes[a.0].value.shape().to_vec();
        self.push(op, Tensor::from_raw(shape, out), vec![])
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        self.map(Op::Scale(a, s), a, |x| x * s)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Tanh(a), a, f64::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Sigmoid(a), a, sigmoid)
    }

    /// Row-wise softmax, stabilised by subtracting each row's maximum.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.dims(a);
        let mut out = self.data(a).to_vec();
        for row in out.chunks_mut(n) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let shape = if self.nodes[a.0].value.shape().len() == 1 { vec![n] } else { vec![m, n] };
        self.push(Op::Softmax(a), Tensor::from_raw(shape, out), vec![])
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.data(a).iter().sum();
        self.push(Op::Sum(a), Tensor::from_raw(vec![1], vec![s]), vec![])
    }

    /// Columns `start..start+len` of a matrix.
    pub fn slice_cols(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId, KernelError> {
        let (m, n) = self.dims(src);
        if len == 0 || start + len > n {
            return Err(shape_err("slice_cols", format!("{start}+{len} of {n} columns")));
        }
        let d = self.data(src);
        let mut out = Vec::with_capacity(m * len);
        for r in 0..m {
            out.extend_from_slice(&d[r * n + start..r * n + start + len]);
        }
        Ok(self.push(Op::SliceCols { src, start }, Tensor::from_raw(vec![m, len], out), vec![]))
    }

    /// Row `index[r]` of `src` for every r.
    pub fn gather_rows(&mut self, src: NodeId, index: &[usize]) -> Result<NodeId, KernelError> {
        let (m, n) = self.dims(src);
        if index.is_empty() {
            return Err(shape_err("gather_rows", "empty index".into()));
        }
        let d = self.data(src);
        let mut out = Vec::with_capacity(index.len() * n);
        for &i in index {
            if i >= m {
                return Err(shape_err("gather_rows", format!("row {i} of {m}")));
            }
            out.extend_from_slice(&d[i * n..(i + 1) * n]);
        }
        let value = Tensor::from_raw(vec![index.len(), n], out);
        Ok(self.push(Op::GatherRows { src, index: index.to_vec() }, value, vec![]))
    }

    /// Row r from `new` where `mask[r]`, otherwise from `old`.
    pub fn select_rows(&mut self, new: NodeId, old: NodeId, mask: &[bool]) -> Result<NodeId, KernelError> {
        self.same_shape("select_rows", new, old)?;
        let (m, n) = self.dims(new);
        if mask.len() != m {
            return Err(shape_err("select_rows", format!("mask of {} for {m} rows", mask.len())));
        }
        let (dn, dold) = (self.data(new), self.data(old));
        let mut out = Vec::with_capacity(m * n);
        for (r, &keep_new) in mask.iter().enumerate() {
            let src = if keep_new { dn } else { dold };
            out.extend_from_slice(&src[r * n..(r + 1) * n]);
        }
        let shape = self.nodes[new.0].value.shape().to_vec();
        Ok(self.push(Op::SelectRows { new, old, mask: mask.to_vec() }, Tensor::from_raw(shape, out), vec![]))
    }

    /// LSTM cell on pre-activation gates laid out as `[i | f | g | o]`.
    /// Returns an m×2u node holding `[h' | c']`.
    pub fn lstm_cell(&mut self, gates: NodeId, c_prev: NodeId) -> Result<NodeId, KernelError> {
        let (m, g4) = self.dims(gates);
        let (mc, u) = self.dims(c_prev);
        if g4 != 4 * u || m != mc {
            return Err(shape_err("lstm_cell", format!("gates {m}x{g4} with cell {mc}x{u}")));
        }
        let gd = self.data(gates);
        let cd = self.data(c_prev);
        let mut acts = vec![0.0; m * 4 * u];
        let mut tanh_c = vec![0.0; m * u];
        let mut out = vec![0.0; m * 2 * u];
        for r in 0..m {
            let g = &gd[r * 4 * u..(r + 1) * 4 * u];
            let a = &mut acts[r * 4 * u..(r + 1) * 4 * u];
            for j in 0..u {
                let i_g = sigmoid(g[j]);
                let f_g = sigmoid(g[u + j]);
                let c_g = g[2 * u + j].tanh();
                let o_g = sigmoid(g[3 * u + j]);
                a[j] = i_g;
                a[u + j] = f_g;
                a[2 * u + j] = c_g;
                a[3 * u + j] = o_g;
                let c_new = f_g * cd[r * u + j] + i_g * c_g;
                let tc = c_new.tanh();
                tanh_c[r * u + j] = tc;
                out[r * 2 * u + j] = o_g * tc;
                out[r * 2 * u + u + j] = c_new;
            }
        }
        acts.extend_from_slice(&tanh_c);
        let value = Tensor::from_raw(vec![m, 2 * u], out);
        Ok(self.push(Op::LstmCell { gates, c_prev }, value, acts))
    }

    /// Σ_r weights[r] · (−ln probs[r, targets[r]]).
    pub fn nll(&mut self, probs: NodeId, targets: &[usize], weights: &[f64]) -> Result<NodeId, KernelError> {
        let (m, n) = self.dims(probs);
        if targets.len() != m || weights.len() != m {
            return Err(shape_err("nll", format!("{} targets for {m} rows", targets.len())));
        }
        let p = self.data(probs);
        let mut total = 0.0;
        for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
            if t >= n {
                return Err(shape_err("nll", format!("target {t} of {n} classes")));
            }
            let pt = p[r * n + t];
            if pt <= 0.0 {
                return Err(KernelError::Numeric(format!(
                    "probability {pt} at target {t} of row {r}"
                )));
            }
            total -= w * pt.ln();
        }
        let op = Op::Nll { probs, targets: targets.to_vec(), weights: weights.to_vec() };
        Ok(self.push(op, Tensor::from_raw(vec![1], vec![total]), vec![]))
    }

    /// Σ_r weights[r] · ‖pred_r − target_r‖².
    pub fn sq_err(&mut self, pred: NodeId, target: NodeId, weights: &[f64]) -> Result<NodeId, KernelError> {
        self.same_shape("sq_err", pred, target)?;
        let (m, n) = self.dims(pred);
        if weights.len() != m {
            return Err(shape_err("sq_err", format!("{} weights for {m} rows", weights.len())));
        }
        let (p, t) = (self.data(pred), self.data(target));
        let mut total = 0.0;
        for (r, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row: f64 = (0..n).map(|c| (p[r * n + c] - t[r * n + c]).powi(2)).sum();
            total += w * row;
        }
        let op = Op::SqErr { pred, target, weights: weights.to_vec() };
        Ok(self.push(op, Tensor::from_raw(vec![1], vec![total]), vec![]))
    }

    /// D[k][j] = ‖a_k − b_j‖ for row sets a and b.
    pub fn pair_dist(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        let (ka, za) = self.dims(a);
        let (kb, zb) = self.dims(b);
        if za != zb {
            return Err(shape_err("pair_dist", format!("row widths {za} vs {zb}")));
        }
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = vec![0.0; ka * kb];
        for k in 0..ka {
            let ar = &ad[k * za..(k + 1) * za];
            for j in 0..kb {
                let br = &bd[j * za..(j + 1) * za];
                out[k * kb + j] = ar.iter().zip(br).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            }
        }
        Ok(self.push(Op::PairDist(a, b), Tensor::from_raw(vec![ka, kb], out), vec![]))
    }

    /// Σ_k D[k][k] + Σ_k Σ_{j≠k} max(0, margin + D[k][k] − D[k][j]) on a square
    /// distance matrix whose rows are anchors.
    pub fn margin_rank(&mut self, dist: NodeId, margin: f64) -> Result<NodeId, KernelError> {
        let (k, k2) = self.dims(dist);
        if k != k2 {
            return Err(shape_err("margin_rank", format!("{k}x{k2} is not square")));
        }
        let d = self.data(dist);
        let mut total = 0.0;
        for a in 0..k {
            let pos = d[a * k + a];
            total += pos;
            for j in (0..k).filter(|&j| j != a) {
                total += (margin + pos - d[a * k + j]).max(0.0);
            }
        }
        Ok(self.push(Op::MarginRank { dist, margin }, Tensor::from_raw(vec![1], vec![total]), vec![]))
    }

    /// Gradients of the scalar `loss` with respect to every leaf created with
    /// `requires_grad`. Leaves off the loss path receive zeros.
    pub fn backprop(&self, loss: NodeId) -> Result<Gradients, KernelError> {
        let lv = &self.nodes[loss.0].value;
        let Some(l) = lv.item() else {
            return Err(KernelError::NonScalarLoss(lv.shape().to_vec()));
        };
        if !l.is_finite() {
            return Err(KernelError::NonFinite(format!("loss value {l}")));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(dy) = grads[idx].take() else { continue };
            self.backward_node(node, &dy, &mut grads);
        }
        let mut out = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.needs_grad {
                let g = grads
                    .get_mut(idx)
                    .and_then(Option::take)
                    .unwrap_or_else(|| vec![0.0; node.value.len()]);
                if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                    return Err(KernelError::NonFinite(format!("gradient of node {idx} at {pos}")));
                }
                out.insert(NodeId(idx), Tensor::from_raw(node.value.shape().to_vec(), g));
            }
        }
        Ok(Gradients { grads: out })
    }

    fn backward_node(&self, node: &Node, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let needs = |id: NodeId| self.nodes[id.0].needs_grad;
        macro_rules! acc {
            ($id:expr) => {{
                let id: NodeId = $id;
                let len = self.nodes[id.0].value.len();
                grads[id.0].get_or_insert_with(|| vec![0.0; len])
            }};
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (_, n) = self.dims(*b);
                if needs(*a) {
                    gemm_nt(dy, self.data(*b), acc!(*a), m, n, k);
                }
                if needs(*b) {
                    gemm_tn(self.data(*a), dy, acc!(*b), m, k, n);
                }
            }
            Op::AddRow(a, bias) => {
                let (_, n) = self.dims(*a);
                if needs(*a) {
                    add_into(acc!(*a), dy);
                }
                if needs(*bias) {
                    let g = acc!(*bias);
                    for row in dy.chunks(n) {
                        add_into(g, row);
                    }
                }
            }
            Op::Add(a, b) => {
                if needs(*a) {
                    add_into(acc!(*a), dy);
                }
                if needs(*b) {
                    add_into(acc!(*b), dy);
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    add_into(acc!(*a), dy);
                }
                if needs(*b) {
                    for (g, d) in acc!(*b).iter_mut().zip(dy) {
                        *g -= d;
                    }
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    let bd = self.data(*b);
                    for ((g, d), x) in acc!(*a).iter_mut().zip(dy).zip(bd) {
                        *g += d * x;
                    }
                }
                if needs(*b) {
                    let ad = self.data(*a);
                    for ((g, d), x) in acc!(*b).iter_mut().zip(dy).zip(ad) {
                        *g += d * x;
                    }
                }
            }
            Op::Scale(a, s) => {
                for (g, d) in acc!(*a).iter_mut().zip(dy) {
                    *g += d * s;
                }
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                for ((g, d), y) in acc!(*a).iter_mut().zip(dy).zip(y) {
                    *g += d * (1.0 - y * y);
                }
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                for ((g, d), y) in acc!(*a).iter_mut().zip(dy).zip(y) {
                    *g += d * y * (1.0 - y);
                }
            }
            Op::Softmax(a) => {
                let (_, n) = node.value.dims2();
                let y = node.value.data();
                let g = acc!(*a);
                for ((gr, dr), yr) in g.chunks_mut(n).zip(dy.chunks(n)).zip(y.chunks(n)) {
                    let dot: f64 = dr.iter().zip(yr).map(|(d, y)| d * y).sum();
                    for ((g, d), y) in gr.iter_mut().zip(dr).zip(yr) {
                        *g += y * (d - dot);
                    }
                }
            }
            Op::Sum(a) => {
                for g in acc!(*a).iter_mut() {
                    *g += dy[0];
                }
            }
            Op::SliceCols { src, start } => {
                let (_, n) = self.dims(*src);
                let (_, len) = node.value.dims2();
                let g = acc!(*src);
                for (r, dr) in dy.chunks(len).enumerate() {
                    add_into(&mut g[r * n + start..r * n + start + len], dr);
                }
            }
            Op::GatherRows { src, index } => {
                let (_, n) = self.dims(*src);
                let g = acc!(*src);
                for (dr, &i) in dy.chunks(n).zip(index) {
                    add_into(&mut g[i * n..(i + 1) * n], dr);
                }
            }
            Op::SelectRows { new, old, mask } => {
                let (_, n) = node.value.dims2();
                for (target, want) in [(*new, true), (*old, false)] {
                    if !needs(target) {
                        continue;
                    }
                    let g = acc!(target);
                    for (r, &m) in mask.iter().enumerate() {
                        if m == want {
                            add_into(&mut g[r * n..(r + 1) * n], &dy[r * n..(r + 1) * n]);
                        }
                    }
                }
            }
            Op::LstmCell { gates, c_prev } => {
                let (m, u) = self.dims(*c_prev);
                let acts = &node.cache[..m * 4 * u];
                let tanh_c = &node.cache[m * 4 * u..];
                let cp = self.data(*c_prev);
                let mut dgates = vec![0.0; m * 4 * u];
                let mut dcp = vec![0.0; m * u];
                for r in 0..m {
                    let a = &acts[r * 4 * u..(r + 1) * 4 * u];
                    let dg = &mut dgates[r * 4 * u..(r + 1) * 4 * u];
                    for j in 0..u {
                        let (ig, fg, cg, og) = (a[j], a[u + j], a[2 * u + j], a[3 * u + j]);
                        let tc = tanh_c[r * u + j];
                        let dh = dy[r * 2 * u + j];
                        let dc = dy[r * 2 * u + u + j] + dh * og * (1.0 - tc * tc);
                        dg[j] = dc * cg * ig * (1.0 - ig);
                        dg[u + j] = dc * cp[r * u + j] * fg * (1.0 - fg);
                        dg[2 * u + j] = dc * ig * (1.0 - cg * cg);
                        dg[3 * u + j] = dh * tc * og * (1.0 - og);
                        dcp[r * u + j] = dc * fg;
                    }
                }
                if needs(*gates) {
                    add_into(acc!(*gates), &dgates);
                }
                if needs(*c_prev) {
                    add_into(acc!(*c_prev), &dcp);
                }
            }
            Op::Nll { probs, targets, weights } => {
                let (_, n) = self.dims(*probs);
                let p = self.data(*probs);
                let g = acc!(*probs);
                for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                    g[r * n + t] -= dy[0] * w / p[r * n + t];
                }
            }
            Op::SqErr { pred, target, weights } => {
                let (_, n) = self.dims(*pred);
                let (p, t) = (self.data(*pred), self.data(*target));
                let diff: Vec<f64> = weights
                    .iter()
                    .enumerate()
                    .flat_map(|(r, &w)| (0..n).map(move |c| 2.0 * w * dy[0] * (p[r * n + c] - t[r * n + c])))
                    .collect();
                if needs(*pred) {
                    add_into(acc!(*pred), &diff);
                }
                if needs(*target) {
                    for (g, d) in acc!(*target).iter_mut().zip(&diff) {
                        *g -= d;
                    }
                }
            }
            Op::PairDist(a, b) => {
                let (ka, z) = self.dims(*a);
                let (kb, _) = self.dims(*b);
                let (ad, bd) = (self.data(*a), self.data(*b));
                let dist = node.value.data();
                let mut ga = vec![0.0; ka * z];
                let mut gb = vec![0.0; kb * z];
                for k in 0..ka {
                    for j in 0..kb {
                        let d = dist[k * kb + j];
                        let w = dy[k * kb + j];
                        // Subgradient zero at coincident points.
                        if d <= f64::MIN_POSITIVE || w == 0.0 {
                            continue;
                        }
                        for c in 0..z {
                            let t = w * (ad[k * z + c] - bd[j * z + c]) / d;
                            ga[k * z + c] += t;
                            gb[j * z + c] -= t;
                        }
                    }
                }
                if needs(*a) {
                    add_into(acc!(*a), &ga);
                }
                if needs(*b) {
                    add_into(acc!(*b), &gb);
                }
            }
            Op::MarginRank { dist, margin } => {
                let (k, _) = self.dims(*dist);
                let d = self.data(*dist);
                let mut g = vec![0.0; k * k];
                for a in 0..k {
                    let pos = d[a * k + a];
                    g[a * k + a] += dy[0];
                    for j in (0..k).filter(|&j| j != a) {
                        if margin + pos - d[a * k + j] > 0.0 {
                            g[a * k + a] += dy[0];
                            g[a * k + j] -= dy[0];
                        }
                    }
                }
                add_into(acc!(*dist), &g);
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
