use serde::{Deserialize, Serialize};

use crate::embeddings::SynonymLexicon;
use crate::simdata::{arm_joints, motion_axis, ActionSpec, Frame, Hand, Speed, TrajectoryConfig};

/// True iff `tokens` is exactly verb, adjective, adverb, EOS and each word
/// lies in the synonym group the action calls for.
pub fn description_success<S: AsRef<str>>(tokens: &[S], spec: &ActionSpec, lexicon: &SynonymLexicon) -> bool {
    if tokens.len() != 4 || tokens[3].as_ref() != lexicon.eos() {
        return false;
    }
    let want = [spec.motion.group(), spec.target_color().group(), spec.speed.group()];
    tokens[..3].iter().zip(want).all(|(t, label)| {
        lexicon.group_of(t.as_ref()).map(|g| lexicon.groups[g].label.as_str()) == Some(label)
    })
}

/// Fast actions take at most `threshold` steps, slow ones more.
pub fn speed_success(len: usize, speed: Speed, threshold: usize) -> bool {
    match speed {
        Speed::Fast => len <= threshold,
        Speed::Slowly => len > threshold,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskThresholds {
    /// Minimum net displacement along the motion's joint.
    pub d_min: f64,
    pub speed_threshold: usize,
}

impl TaskThresholds {
    /// `d_min = 0.6·A`.
    pub fn for_trajectory(cfg: &TrajectoryConfig) -> Self {
        Self { d_min: 0.6 * cfg.amplitude, speed_threshold: cfg.speed_threshold }
    }
}

fn arm_displacement(first: &Frame, last: &Frame, hand: Hand) -> f64 {
    arm_joints(hand).map(|j| (last[j] - first[j]).powi(2)).sum::<f64>().sqrt()
}

/// Simulator stand-in for a successful playback: the correct arm moves most,
/// its motion joint travels far enough the right way, and the length
/// matches the requested speed.
pub fn task_success(joints: &[Frame], spec: &ActionSpec, th: &TaskThresholds) -> bool {
    let (Some(first), Some(last)) = (joints.first(), joints.last()) else {
        return false;
    };
    let own = arm_displacement(first, last, spec.hand);
    let other = arm_displacement(first, last, spec.hand.flipped());
    let (axis, signed) = motion_axis(spec.motion, spec.hand, 1.0);
    let travel = (last[axis] - first[axis]) * signed;
    own > other && travel >= th.d_min && speed_success(joints.len(), spec.speed, th.speed_threshold)
}
