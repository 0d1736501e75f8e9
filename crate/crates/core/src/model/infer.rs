//! Inference: encoders, greedy description decoding and closed-loop action
//! generation. Every function records on a private tape with parameters as
//! constants, so results are deterministic and batched rows are independent.

use serde::{Deserialize, Serialize};

use super::graph::{encode_frames, encode_tokens, visual_rows};
use super::{node_rows, Model, ModelError};
use crate::embeddings::{BOS, EOS, MERGED_SYMBOL};
use crate::kernel::{Tape, Tensor};
use crate::simdata::{ActionSequence, Frame, TrajectoryConfig, JOINT_DIM, JOINT_LIMIT, VISUAL_DIM};

/// When closed-loop action generation stops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Largest per-joint change that still counts as standing still.
    pub eps: f64,
    /// Consecutive still steps, after the arm has started moving, that end
    /// the sequence.
    pub patience: usize,
    /// Hard cap on the number of frames, the initial frame included.
    pub t_max: usize,
}

impl StopRule {
    pub fn for_trajectory(cfg: &TrajectoryConfig) -> Self {
        Self { eps: 0.01, patience: 3, t_max: 2 * cfg.t_slow }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedAction {
    /// Starts with the given initial frame.
    pub joints: Vec<Frame>,
    /// Whether the stop rule fired before `t_max`.
    pub stopped: bool,
}

impl DecodedAction {
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }
}

impl Model {
    fn symbol_ids(&self) -> Result<(usize, usize), ModelError> {
        if let (Ok(b), Ok(e)) = (self.token_id(BOS), self.token_id(EOS)) {
            return Ok((b, e));
        }
        let m = self.token_id(MERGED_SYMBOL)?;
        Ok((m, m))
    }

    fn check_z(&self, zs: &[Vec<f64>]) -> Result<(), ModelError> {
        if zs.is_empty() {
            return Err(ModelError::Shape("empty batch".into()));
        }
        if let Some(z) = zs.iter().find(|z| z.len() != self.config.z_dim) {
            return Err(ModelError::Shape(format!("code of length {}, expected {}", z.len(), self.config.z_dim)));
        }
        Ok(())
    }
}

/// The vocabulary matrix after the retrofit layer, one row per token.
pub fn retrofitted_table(model: &Model) -> Result<Tensor, ModelError> {
    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let v = b.vocab_matrix(&mut tape)?;
    Ok(tape.value(v).clone())
}

/// The retrofit layer applied to one vector (identity under the ablation).
pub fn retrofit_forward(model: &Model, e: &[f64]) -> Result<Vec<f64>, ModelError> {
    let d = model.config.embed_dim;
    if e.len() != d {
        return Err(ModelError::Shape(format!("embedding of length {}, expected {d}", e.len())));
    }
    if !model.config.use_retrofit {
        return Ok(e.to_vec());
    }
    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let mut x = tape.constant(Tensor::new(vec![1, d], e.to_vec())?);
    for l in 1..=3 {
        x = b.dense(&mut tape, &format!("ret.l{l}"), x)?;
        x = tape.tanh(x);
    }
    Ok(tape.value(x).to_vec())
}

pub fn encode_descriptions<S: AsRef<str>>(model: &Model, batch: &[&[S]]) -> Result<Vec<Vec<f64>>, ModelError> {
    let ids = batch.iter().map(|t| model.token_ids(t)).collect::<Result<Vec<_>, _>>()?;
    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let vocab = b.vocab_matrix(&mut tape)?;
    let z = encode_tokens(&mut tape, &b, vocab, &ids)?;
    Ok(node_rows(&tape, z))
}

pub fn encode_description<S: AsRef<str>>(model: &Model, tokens: &[S]) -> Result<Vec<f64>, ModelError> {
    Ok(encode_descriptions(model, &[tokens])?.remove(0))
}

pub fn encode_actions(model: &Model, batch: &[&ActionSequence]) -> Result<Vec<Vec<f64>>, ModelError> {
    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let z = encode_frames(&mut tape, &b, batch)?;
    Ok(node_rows(&tape, z))
}

pub fn encode_action(model: &Model, seq: &ActionSequence) -> Result<Vec<f64>, ModelError> {
    Ok(encode_actions(model, &[seq])?.remove(0))
}

/// Greedy decoding from BOS. Each result holds the emitted tokens (EOS
/// included when reached) and the distribution at every step.
pub fn decode_descriptions(
    model: &Model,
    zs: &[Vec<f64>],
    max_len: usize,
) -> Result<Vec<(Vec<String>, Vec<Vec<f64>>)>, ModelError> {
    model.check_z(zs)?;
    let (bos, eos) = model.symbol_ids()?;
    let n = zs.len();
    let mut out: Vec<(Vec<String>, Vec<Vec<f64>>)> = vec![(Vec::new(), Vec::new()); n];
    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let vocab = b.vocab_matrix(&mut tape)?;
    let z = tape.constant(Tensor::new(vec![n, model.config.z_dim], zs.concat())?);
    let lstm = b.lstm("dsc.dec");
    let mut h = b.decoder_h0(&mut tape, "dsc", z)?;
    let mut c = tape.constant(Tensor::zeros(vec![n, model.config.hidden]));
    let mut ids = vec![bos; n];
    let mut done = vec![false; n];
    for _ in 0..max_len {
        let x = tape.gather_rows(vocab, &ids)?;
        (h, c) = lstm.step(&mut tape, x, h, c, None)?;
        let logits = b.dense(&mut tape, "dsc.out", h)?;
        let probs = tape.softmax(logits);
        for (r, row) in node_rows(&tape, probs).into_iter().enumerate() {
            if done[r] {
                continue;
            }
            let best = argmax(&row);
            out[r].0.push(model.config.vocab[best].clone());
            out[r].1.push(row);
            ids[r] = best;
            done[r] = best == eos;
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(out)
}

pub fn decode_description(
    model: &Model,
    z: &[f64],
    max_len: usize,
) -> Result<(Vec<String>, Vec<Vec<f64>>), ModelError> {
    Ok(decode_descriptions(model, &[z.to_vec()], max_len)?.remove(0))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Closed-loop generation: the head's change is added to the current frame,
/// clamped to the joint range, and fed back as the next input.
pub fn decode_actions(
    model: &Model,
    zs: &[Vec<f64>],
    initial: &[Frame],
    visual: &[[f64; VISUAL_DIM]],
    stop: &StopRule,
) -> Result<Vec<DecodedAction>, ModelError> {
    model.check_z(zs)?;
    let n = zs.len();
    if initial.len() != n || visual.len() != n {
        return Err(ModelError::Shape(format!(
            "{n} codes with {} initial frames and {} scenes",
            initial.len(),
            visual.len()
        )));
    }
    if stop.t_max < 1 || stop.patience < 1 {
        return Err(ModelError::Config("stop rule needs t_max >= 1 and patience >= 1".into()));
    }
    let mut out: Vec<DecodedAction> =
        initial.iter().map(|f| DecodedAction { joints: vec![clamp(f)], stopped: false }).collect();
    let mut still = vec![0usize; n];
    let mut moved = vec![false; n];
    let mut active = vec![true; n];

    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let lstm = b.lstm("act.dec");
    let vis = visual_rows(&mut tape, visual)?;
    let base = lstm.visual_base(&mut tape, vis)?;
    let z = tape.constant(Tensor::new(vec![n, model.config.z_dim], zs.concat())?);
    let mut h = b.decoder_h0(&mut tape, "act", z)?;
    let mut c = tape.constant(Tensor::zeros(vec![n, model.config.hidden]));
    let mut current: Vec<Frame> = out.iter().map(|d| d.joints[0]).collect();
    for _ in 1..stop.t_max {
        if !active.iter().any(|&a| a) {
            break;
        }
        let x = tape.constant(Tensor::new(vec![n, JOINT_DIM], current.concat())?);
        (h, c) = lstm.step(&mut tape, x, h, c, Some(base))?;
        let delta = b.joint_change(&mut tape, h)?;
        for (r, d) in node_rows(&tape, delta).into_iter().enumerate() {
            let mut next = [0.0; JOINT_DIM];
            for j in 0..JOINT_DIM {
                next[j] = current[r][j] + d[j];
            }
            let next = clamp(&next);
            let change = next.iter().zip(&current[r]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            current[r] = next;
            if !active[r] {
                continue;
            }
            out[r].joints.push(next);
            if change >= stop.eps {
                moved[r] = true;
                still[r] = 0;
            } else if moved[r] {
                still[r] += 1;
                if still[r] >= stop.patience {
                    active[r] = false;
                    out[r].stopped = true;
                }
            }
        }
    }
    Ok(out)
}

pub fn decode_action(
    model: &Model,
    z: &[f64],
    initial: &Frame,
    visual: &[f64; VISUAL_DIM],
    stop: &StopRule,
) -> Result<DecodedAction, ModelError> {
    Ok(decode_actions(model, &[z.to_vec()], &[*initial], &[*visual], stop)?.remove(0))
}

/// Teacher-forced next-frame predictions for one recording: row `t` is the
/// decoder's estimate of frame `t + 1` given the true frames up to `t`.
pub fn predict_next_frames(model: &Model, z: &[f64], seq: &ActionSequence) -> Result<Vec<Frame>, ModelError> {
    model.check_z(&[z.to_vec()])?;
    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let lstm = b.lstm("act.dec");
    let vis = visual_rows(&mut tape, &[seq.visual])?;
    let base = lstm.visual_base(&mut tape, vis)?;
    let z = tape.constant(Tensor::new(vec![1, model.config.z_dim], z.to_vec())?);
    let mut h = b.decoder_h0(&mut tape, "act", z)?;
    let mut c = tape.constant(Tensor::zeros(vec![1, model.config.hidden]));
    let mut out = Vec::with_capacity(seq.len().saturating_sub(1));
    for frame in seq.joints.iter().take(seq.len().saturating_sub(1)) {
        let x = tape.constant(Tensor::new(vec![1, JOINT_DIM], frame.to_vec())?);
        (h, c) = lstm.step(&mut tape, x, h, c, Some(base))?;
        let delta = b.joint_change(&mut tape, h)?;
        let d = &node_rows(&tape, delta)[0];
        let mut next = [0.0; JOINT_DIM];
        for j in 0..JOINT_DIM {
            next[j] = frame[j] + d[j];
        }
        out.push(next);
    }
    Ok(out)
}

fn clamp(f: &Frame) -> Frame {
    f.map(|x| x.clamp(-JOINT_LIMIT, JOINT_LIMIT))
}
