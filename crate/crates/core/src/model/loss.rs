//! The three losses on plain values, computed with the same tape ops the
//! training graph uses.

use super::graph::{batch_losses, Batch};
use super::{Model, ModelError};
use crate::kernel::{Tape, Tensor};

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Tensor, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::Shape(format!("{what}: no rows")));
    }
    let w = rows[0].len();
    if rows.iter().any(|r| r.len() != w) {
        return Err(ModelError::Shape(format!("{what}: ragged rows")));
    }
    Ok(Tensor::from_rows(rows)?)
}

/// Mean next-token cross-entropy. `dists[t]` is the distribution emitted
/// after reading token t and `targets[t]` the index of token t+1.
pub fn loss_dsc(dists: &[Vec<f64>], targets: &[usize]) -> Result<f64, ModelError> {
    if dists.len() != targets.len() {
        return Err(ModelError::Shape(format!("{} distributions for {} targets", dists.len(), targets.len())));
    }
    let mut tape = Tape::new();
    let y = tape.constant(matrix(dists, "loss_dsc")?);
    let w = vec![1.0 / dists.len() as f64; dists.len()];
    let l = tape.nll(y, targets, &w)?;
    Ok(tape.value(l).data()[0])
}

/// Mean squared next-frame error over frames 2..T; the first frame is the
/// given initial pose and is not scored.
pub fn loss_act(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64, ModelError> {
    if pred.len() != target.len() || pred.len() < 2 {
        return Err(ModelError::Shape(format!("{} predicted vs {} target frames (need >= 2)", pred.len(), target.len())));
    }
    let mut tape = Tape::new();
    let p = tape.constant(matrix(pred, "loss_act")?);
    let t = tape.constant(matrix(target, "loss_act")?);
    let n = pred.len();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { 1.0 / (n - 1) as f64 }).collect();
    let l = tape.sq_err(p, t, &w)?;
    Ok(tape.value(l).data()[0])
}

/// Binding loss with action codes as anchors.
pub fn loss_shr(z_act: &[Vec<f64>], z_dsc: &[Vec<f64>], margin: f64) -> Result<f64, ModelError> {
    if z_act.len() != z_dsc.len() {
        return Err(ModelError::Shape(format!("{} action codes vs {} description codes", z_act.len(), z_dsc.len())));
    }
    let mut tape = Tape::new();
    let a = tape.constant(matrix(z_act, "loss_shr")?);
    let d = tape.constant(matrix(z_dsc, "loss_shr")?);
    let dist = tape.pair_dist(a, d)?;
    let l = tape.margin_rank(dist, margin)?;
    Ok(tape.value(l).data()[0])
}

/// `(L_dsc, L_act, L_shr, L_all)` of a batch under teacher forcing.
pub fn total_loss(model: &Model, batch: &Batch, margin: f64) -> Result<[f64; 4], ModelError> {
    let mut tape = Tape::new();
    let b = model.bind(&mut tape, &[]);
    let l = batch_losses(&mut tape, &b, batch, margin)?;
    let v = |id| tape.value(id).data()[0];
    Ok([v(l.dsc), v(l.act), v(l.shr), v(l.total)])
}
