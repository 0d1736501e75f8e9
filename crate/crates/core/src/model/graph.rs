//! Batched training graph: both autoencoders under teacher forcing plus the
//! binding loss.

use std::collections::BTreeMap;

use super::{ModelConfig, ModelError};
use crate::kernel::{NodeId, Tape, Tensor};
use crate::simdata::{ActionSequence, JOINT_DIM, VISUAL_DIM};

/// Parameter leaves of one model recorded on a tape.
#[derive(Clone, Debug)]
pub struct Bound {
    ids: BTreeMap<String, NodeId>,
    embeddings: NodeId,
    config: ModelConfig,
}

pub(crate) struct Lstm {
    wx: NodeId,
    wv: Option<NodeId>,
    wh: NodeId,
    b: NodeId,
    hidden: usize,
}

impl Bound {
    pub(crate) fn new(ids: BTreeMap<String, NodeId>, embeddings: NodeId, config: ModelConfig) -> Self {
        Self { ids, embeddings, config }
    }

    pub fn get(&self, name: &str) -> NodeId {
        *self.ids.get(name).unwrap_or_else(|| panic!("parameter {name} not bound"))
    }

    pub fn ids(&self) -> &BTreeMap<String, NodeId> {
        &self.ids
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub(crate) fn lstm(&self, prefix: &str) -> Lstm {
        Lstm {
            wx: self.get(&format!("{prefix}.wx")),
            wv: self.ids.get(&format!("{prefix}.wv")).copied(),
            wh: self.get(&format!("{prefix}.wh")),
            b: self.get(&format!("{prefix}.b")),
            hidden: self.config.hidden,
        }
    }

    /// The retrofitted vocabulary matrix, or the raw embeddings when the
    /// retrofit layer is disabled.
    pub fn vocab_matrix(&self, tape: &mut Tape) -> Result<NodeId, ModelError> {
        if !self.config.use_retrofit {
            return Ok(self.embeddings);
        }
        let mut x = self.embeddings;
        for l in 1..=3 {
            x = self.dense(tape, &format!("ret.l{l}"), x)?;
            x = tape.tanh(x);
        }
        Ok(x)
    }

    pub(crate) fn dense(&self, tape: &mut Tape, prefix: &str, x: NodeId) -> Result<NodeId, ModelError> {
        let m = tape.matmul(x, self.get(&format!("{prefix}.w")))?;
        Ok(tape.add_row(m, self.get(&format!("{prefix}.b")))?)
    }

    /// `tanh(h_f·W_f + h_b·W_b + b)`.
    pub(crate) fn project(&self, tape: &mut Tape, modality: &str, hf: NodeId, hb: NodeId) -> Result<NodeId, ModelError> {
        let a = tape.matmul(hf, self.get(&format!("{modality}.enc.z.wf")))?;
        let b = tape.matmul(hb, self.get(&format!("{modality}.enc.z.wb")))?;
        let s = tape.add(a, b)?;
        let s = tape.add_row(s, self.get(&format!("{modality}.enc.z.b")))?;
        Ok(tape.tanh(s))
    }

    /// Initial decoder state from a batch of codes.
    /// Per-step joint change read from the action decoder state.
    pub(crate) fn joint_change(&self, tape: &mut Tape, h: NodeId) -> Result<NodeId, ModelError> {
        let d = self.dense(tape, "act.out", h)?;
        Ok(tape.scale(d, JOINT_STEP_SCALE))
    }

    pub(crate) fn decoder_h0(&self, tape: &mut Tape, modality: &str, z: NodeId) -> Result<NodeId, ModelError> {
        if self.config.z_dim == self.config.hidden {
            return Ok(z);
        }
        let h = self.dense(tape, &format!("{modality}.dec.h0"), z)?;
        Ok(tape.tanh(h))
    }
}

impl Lstm {
    /// Per-sequence gate contribution of the constant visual input, with the
    /// bias folded in.
    pub(crate) fn visual_base(&self, tape: &mut Tape, visual: NodeId) -> Result<NodeId, ModelError> {
        let wv = self.wv.expect("action LSTM has a visual block");
        let v = tape.matmul(visual, wv)?;
        Ok(tape.add_row(v, self.b)?)
    }

    pub(crate) fn step(
        &self,
        tape: &mut Tape,
        x: NodeId,
        h: NodeId,
        c: NodeId,
        base: Option<NodeId>,
    ) -> Result<(NodeId, NodeId), ModelError> {
        let xw = tape.matmul(x, self.wx)?;
        let hw = tape.matmul(h, self.wh)?;
        let s = tape.add(xw, hw)?;
        let gates = match base {
            Some(b) => tape.add(s, b)?,
            None => tape.add_row(s, self.b)?,
        };
        let hc = tape.lstm_cell(gates, c)?;
        let u = self.hidden;
        Ok((tape.slice_cols(hc, 0, u)?, tape.slice_cols(hc, u, u)?))
    }

    /// Runs over `xs`, keeping each row's state frozen where its mask is off.
    /// Returns the final hidden state.
    pub(crate) fn run(
        &self,
        tape: &mut Tape,
        xs: &[NodeId],
        masks: &[Vec<bool>],
        base: Option<NodeId>,
        rows: usize,
    ) -> Result<NodeId, ModelError> {
        let mut h = tape.constant(Tensor::zeros(vec![rows, self.hidden]));
        let mut c = h;
        for (&x, mask) in xs.iter().zip(masks) {
            let (h2, c2) = self.step(tape, x, h, c, base)?;
            if mask.iter().all(|&m| m) {
                (h, c) = (h2, c2);
            } else {
                h = tape.select_rows(h2, h, mask)?;
                c = tape.select_rows(c2, c, mask)?;
            }
        }
        Ok(h)
    }
}

fn check_tokens(tokens: &[Vec<usize>], min_len: usize) -> Result<usize, ModelError> {
    if tokens.is_empty() {
        return Err(ModelError::Shape("empty batch".into()));
    }
    if let Some(t) = tokens.iter().find(|t| t.len() < min_len) {
        return Err(ModelError::Shape(format!("sequence of {} tokens, need at least {min_len}", t.len())));
    }
    Ok(tokens.iter().map(Vec::len).max().unwrap_or(0))
}

fn check_actions(seqs: &[&ActionSequence], min_len: usize) -> Result<usize, ModelError> {
    if seqs.is_empty() {
        return Err(ModelError::Shape("empty batch".into()));
    }
    if let Some(s) = seqs.iter().find(|s| s.len() < min_len) {
        return Err(ModelError::Shape(format!("action of {} frames, need at least {min_len}", s.len())));
    }
    Ok(seqs.iter().map(|s| s.len()).max().unwrap_or(0))
}

/// Input rows at time `t` for every sequence, reading position `pos(len, t)`;
/// rows past a sequence's end are zero and masked off.
fn frame_inputs(
    tape: &mut Tape,
    seqs: &[&ActionSequence],
    t: usize,
    reverse: bool,
) -> Result<(NodeId, Vec<bool>), ModelError> {
    let mut data = Vec::with_capacity(seqs.len() * JOINT_DIM);
    let mut mask = Vec::with_capacity(seqs.len());
    for s in seqs {
        let n = s.len();
        if t < n {
            let pos = if reverse { n - 1 - t } else { t };
            data.extend_from_slice(&s.joints[pos]);
            mask.push(true);
        } else {
            data.extend_from_slice(&[0.0; JOINT_DIM]);
            mask.push(false);
        }
    }
    Ok((tape.constant(Tensor::new(vec![seqs.len(), JOINT_DIM], data)?), mask))
}

pub(crate) fn visual_rows(tape: &mut Tape, visuals: &[[f64; VISUAL_DIM]]) -> Result<NodeId, ModelError> {
    let data = visuals.iter().flatten().copied().collect();
    Ok(tape.constant(Tensor::new(vec![visuals.len(), VISUAL_DIM], data)?))
}

/// Codes of a batch of token-id sequences, one row each.
pub(crate) fn encode_tokens(
    tape: &mut Tape,
    b: &Bound,
    vocab: NodeId,
    tokens: &[Vec<usize>],
) -> Result<NodeId, ModelError> {
    let max = check_tokens(tokens, 1)?;
    let mut finals = Vec::with_capacity(2);
    for (dir, reverse) in [("fw", false), ("bw", true)] {
        let lstm = b.lstm(&format!("dsc.enc.{dir}"));
        let mut xs = Vec::with_capacity(max);
        let mut masks = Vec::with_capacity(max);
        for t in 0..max {
            let ids: Vec<usize> = tokens
                .iter()
                .map(|s| match (t < s.len(), reverse) {
                    (false, _) => 0,
                    (true, false) => s[t],
                    (true, true) => s[s.len() - 1 - t],
                })
                .collect();
            xs.push(tape.gather_rows(vocab, &ids)?);
            masks.push(tokens.iter().map(|s| t < s.len()).collect());
        }
        finals.push(lstm.run(tape, &xs, &masks, None, tokens.len())?);
    }
    b.project(tape, "dsc", finals[0], finals[1])
}

/// Codes of a batch of action sequences, one row each.
pub(crate) fn encode_frames(tape: &mut Tape, b: &Bound, seqs: &[&ActionSequence]) -> Result<NodeId, ModelError> {
    let max = check_actions(seqs, 1)?;
    let visuals: Vec<_> = seqs.iter().map(|s| s.visual).collect();
    let vis = visual_rows(tape, &visuals)?;
    let mut finals = Vec::with_capacity(2);
    for (dir, reverse) in [("fw", false), ("bw", true)] {
        let lstm = b.lstm(&format!("act.enc.{dir}"));
        let base = lstm.visual_base(tape, vis)?;
        let mut xs = Vec::with_capacity(max);
        let mut masks = Vec::with_capacity(max);
        for t in 0..max {
            let (x, m) = frame_inputs(tape, seqs, t, reverse)?;
            xs.push(x);
            masks.push(m);
        }
        finals.push(lstm.run(tape, &xs, &masks, Some(base), seqs.len())?);
    }
    b.project(tape, "act", finals[0], finals[1])
}

/// Next-token cross-entropy under teacher forcing, averaged over steps and
/// then over the batch.
pub(crate) fn description_loss(
    tape: &mut Tape,
    b: &Bound,
    vocab: NodeId,
    z: NodeId,
    tokens: &[Vec<usize>],
) -> Result<NodeId, ModelError> {
    let max = check_tokens(tokens, 2)?;
    let k = tokens.len() as f64;
    let lstm = b.lstm("dsc.dec");
    let mut h = b.decoder_h0(tape, "dsc", z)?;
    let mut c = tape.constant(Tensor::zeros(vec![tokens.len(), b.config.hidden]));
    let (w, bias) = (b.get("dsc.out.w"), b.get("dsc.out.b"));
    let mut total: Option<NodeId> = None;
    for t in 0..max - 1 {
        let ids: Vec<usize> = tokens.iter().map(|s| if t + 1 < s.len() { s[t] } else { 0 }).collect();
        let x = tape.gather_rows(vocab, &ids)?;
        (h, c) = lstm.step(tape, x, h, c, None)?;
        let logits = tape.matmul(h, w)?;
        let logits = tape.add_row(logits, bias)?;
        let probs = tape.softmax(logits);
        let targets: Vec<usize> = tokens.iter().map(|s| if t + 1 < s.len() { s[t + 1] } else { 0 }).collect();
        let weights: Vec<f64> =
            tokens.iter().map(|s| if t + 1 < s.len() { 1.0 / ((s.len() - 1) as f64 * k) } else { 0.0 }).collect();
        let l = tape.nll(probs, &targets, &weights)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, l)?,
            None => l,
        });
    }
    Ok(total.expect("at least one step"))
}

/// Squared next-frame error under teacher forcing, averaged over steps and
/// then over the batch. The head predicts the change from the input frame.
pub(crate) fn action_loss(
    tape: &mut Tape,
    b: &Bound,
    z: NodeId,
    seqs: &[&ActionSequence],
) -> Result<NodeId, ModelError> {
    let max = check_actions(seqs, 2)?;
    let k = seqs.len() as f64;
    let lstm = b.lstm("act.dec");
    let visuals: Vec<_> = seqs.iter().map(|s| s.visual).collect();
    let vis = visual_rows(tape, &visuals)?;
    let base = lstm.visual_base(tape, vis)?;
    let mut h = b.decoder_h0(tape, "act", z)?;
    let mut c = tape.constant(Tensor::zeros(vec![seqs.len(), b.config.hidden]));
    let mut total: Option<NodeId> = None;
    let mut x = frame_inputs(tape, seqs, 0, false)?.0;
    for t in 0..max - 1 {
        (h, c) = lstm.step(tape, x, h, c, Some(base))?;
        let delta = b.joint_change(tape, h)?;
        let pred = tape.add(x, delta)?;
        let next = frame_inputs(tape, seqs, t + 1, false)?.0;
        let weights: Vec<f64> =
            seqs.iter().map(|s| if t + 1 < s.len() { 1.0 / ((s.len() - 1) as f64 * k) } else { 0.0 }).collect();
        let l = tape.sq_err(pred, next, &weights)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, l)?,
            None => l,
        });
        x = next;
    }
    Ok(total.expect("at least one step"))
}

/// Output units of the action head. Joint changes per frame are a few
/// hundredths of a radian; predicting them in tenths keeps Adam's fixed step
/// size from swamping that resolution.
pub const JOINT_STEP_SCALE: f64 = 0.1;

/// Paired items: token ids of each description and its action.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub tokens: Vec<Vec<usize>>,
    pub actions: Vec<&'a ActionSequence>,
}

#[derive(Clone, Copy, Debug)]
pub struct BatchLosses {
    pub dsc: NodeId,
    pub act: NodeId,
    pub shr: NodeId,
    pub total: NodeId,
    pub z_dsc: NodeId,
    pub z_act: NodeId,
}

/// Records all three losses and their sum for one batch.
pub fn batch_losses(tape: &mut Tape, b: &Bound, batch: &Batch, margin: f64) -> Result<BatchLosses, ModelError> {
    if batch.tokens.len() != batch.actions.len() {
        return Err(ModelError::Shape(format!(
            "{} descriptions paired with {} actions",
            batch.tokens.len(),
            batch.actions.len()
        )));
    }
    let vocab = b.vocab_matrix(tape)?;
    let z_dsc = encode_tokens(tape, b, vocab, &batch.tokens)?;
    let z_act = encode_frames(tape, b, &batch.actions)?;
    let dsc = description_loss(tape, b, vocab, z_dsc, &batch.tokens)?;
    let act = action_loss(tape, b, z_act, &batch.actions)?;
    let dist = tape.pair_dist(z_act, z_dsc)?;
    let shr = tape.margin_rank(dist, margin)?;
    let partial = tape.add(dsc, act)?;
    let total = tape.add(partial, shr)?;
    Ok(BatchLosses { dsc, act, shr, total, z_dsc, z_act })
}
