//! Joint trajectories and scene features for the simulated robot.
//!
//! Ten joints, five per arm: `[reach, lateral, elbow yaw, elbow lift, wrist]`,
//! left arm first. The acting arm follows a minimum-jerk profile from a
//! noisy start pose to a noisy goal pose; the other arm holds its start pose.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spec::{ActionSpec, Arrangement, Hand, Motion, Speed};
use super::SimError;
use crate::rng::SeedTree;

pub const JOINT_DIM: usize = 10;
pub const VISUAL_DIM: usize = 10;
pub const JOINT_LIMIT: f64 = 0.8;

pub type Frame = [f64; JOINT_DIM];

pub const REST_POSE: Frame = [0.1, 0.15, -0.2, -0.3, 0.0, 0.1, -0.15, 0.2, 0.3, 0.0];

const REACH: usize = 0;
const LATERAL: usize = 1;
const LIFT: usize = 3;
const LIFT_AMPLITUDE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub t_slow: usize,
    pub t_fast: usize,
    /// Standard deviation of the noise added to start and goal poses.
    pub noise_sigma: f64,
    /// Displacement amplitude of the designated joint.
    pub amplitude: f64,
    /// Frames held at the goal pose after the motion finishes.
    pub hold_frames: usize,
    /// Generated actions of at most this many frames count as fast.
    pub speed_threshold: usize,
}

impl TrajectoryConfig {
    pub fn desk() -> Self {
        Self { t_slow: 20, t_fast: 12, noise_sigma: 0.01, amplitude: 0.6, hold_frames: 4, speed_threshold: 16 }
    }

    pub fn full() -> Self {
        Self { t_slow: 39, t_fast: 26, speed_threshold: 30, ..Self::desk() }
    }

    /// Desk-style configuration for other lengths, with the threshold
    /// halfway between them.
    pub fn with_lengths(t_slow: usize, t_fast: usize) -> Self {
        Self { t_slow, t_fast, speed_threshold: (t_slow + t_fast) / 2, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.t_fast < 4 || self.t_slow <= self.t_fast {
            return Err(SimError::Config(format!(
                "need t_slow > t_fast >= 4, got {} and {}",
                self.t_slow, self.t_fast
            )));
        }
        if self.t_fast - 1 < self.hold_frames + 3 {
            return Err(SimError::Config(format!(
                "{} hold frames leave too little motion in {} fast frames",
                self.hold_frames, self.t_fast
            )));
        }
        if self.speed_threshold < self.t_fast || self.speed_threshold >= self.t_slow {
            return Err(SimError::Config(format!(
                "speed threshold {} must lie in [t_fast, t_slow)",
                self.speed_threshold
            )));
        }
        if !(self.noise_sigma >= 0.0) || !(self.amplitude > 0.0) {
            return Err(SimError::Config("noise must be >= 0 and amplitude > 0".into()));
        }
        Ok(())
    }

    pub fn nominal_length(&self, speed: Speed) -> usize {
        match speed {
            Speed::Slowly => self.t_slow,
            Speed::Fast => self.t_fast,
        }
    }
}

/// Joint series plus the scene features observed before the action starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub joints: Vec<Frame>,
    pub visual: [f64; VISUAL_DIM],
}

impl ActionSequence {
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }
}

/// Minimum-jerk position profile on τ ∈ [0, 1].
pub fn min_jerk(tau: f64) -> f64 {
    let t3 = tau * tau * tau;
    10.0 * t3 - 15.0 * t3 * tau + 6.0 * t3 * tau * tau
}

fn arm_base(hand: Hand) -> usize {
    match hand {
        Hand::Left => 0,
        Hand::Right => 5,
    }
}

/// Index and signed displacement of the joint that carries the motion.
pub fn motion_axis(motion: Motion, hand: Hand, amplitude: f64) -> (usize, f64) {
    let base = arm_base(hand);
    match motion {
        Motion::Pull => (base + REACH, -amplitude),
        Motion::Push => (base + REACH, amplitude),
        Motion::Slide => match hand {
            Hand::Left => (base + LATERAL, -amplitude),
            Hand::Right => (base + LATERAL, amplitude),
        },
    }
}

/// Joints belonging to the arm on `hand`'s side.
pub fn arm_joints(hand: Hand) -> std::ops::Range<usize> {
    let b = arm_base(hand);
    b..b + 5
}

/// Scene features: one-hot left colour, one-hot right colour, then four
/// Gaussian(0, 0.05) nuisance dimensions.
pub fn visual_features(arrangement: Arrangement, seed: u64) -> [f64; VISUAL_DIM] {
    let mut v = [0.0; VISUAL_DIM];
    v[arrangement.left.index()] = 1.0;
    v[3 + arrangement.right.index()] = 1.0;
    let mut rng = SeedTree::new(seed).child("visual").rng();
    let normal = Normal::new(0.0, 0.05).expect("valid sigma");
    for x in v.iter_mut().skip(6) {
        *x = normal.sample(&mut rng);
    }
    v
}

/// One recording of `spec`. Deterministic in `(seed, spec, repetition)`.
pub fn synth_trajectory(
    spec: &ActionSpec,
    cfg: &TrajectoryConfig,
    seed: u64,
    repetition: usize,
) -> Result<ActionSequence, SimError> {
    cfg.validate()?;
    let pattern = SeedTree::new(seed).child("trajectory").child(&format!("{spec}"));
    // Length jitter belongs to the pattern; repetitions differ only by pose noise.
    let jitter: i64 = pattern.child("length").rng().random_range(-1..=1);
    let tree = pattern.index(repetition as u64);
    let mut rng = tree.rng();
    let len = (cfg.nominal_length(spec.speed) as i64 + jitter) as usize;

    let noise = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        if cfg.noise_sigma > 0.0 {
            Normal::new(0.0, cfg.noise_sigma).expect("valid sigma").sample(rng)
        } else {
            0.0
        }
    };
    let mut start = REST_POSE;
    for s in start.iter_mut() {
        *s += noise(&mut rng);
    }
    let (axis, disp) = motion_axis(spec.motion, spec.hand, cfg.amplitude);
    let mut goal = start;
    for j in arm_joints(spec.hand) {
        goal[j] += noise(&mut rng);
    }
    goal[axis] += disp;
    let lift_joint = arm_base(spec.hand) + LIFT;
    let lift_sign = if spec.hand == Hand::Left { -1.0 } else { 1.0 };

    let moving = len - cfg.hold_frames;
    let joints = (0..len)
        .map(|i| {
            let tau = (i.min(moving - 1)) as f64 / (moving - 1) as f64;
            let s = min_jerk(tau);
            let bump = 16.0 * tau * tau * (1.0 - tau) * (1.0 - tau);
            let mut f = [0.0; JOINT_DIM];
            for j in 0..JOINT_DIM {
                f[j] = start[j] + (goal[j] - start[j]) * s;
            }
            f[lift_joint] += lift_sign * LIFT_AMPLITUDE * bump;
            f.map(|x| x.clamp(-JOINT_LIMIT, JOINT_LIMIT))
        })
        .collect();
    let visual = visual_features(spec.arrangement, pattern.child("scene").seed());
    Ok(ActionSequence { joints, visual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simdata::spec::{enumerate_action_specs, Color};

    fn spec(motion: Motion, hand: Hand, speed: Speed) -> ActionSpec {
        ActionSpec { motion, hand, speed, arrangement: Arrangement::new(Color::Green, Color::Red).unwrap() }
    }

    #[test]
    fn min_jerk_endpoints() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert!((min_jerk(1.0) - 1.0).abs() < 1e-15);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_repetitions_match() {
        let cfg = TrajectoryConfig { noise_sigma: 0.0, ..TrajectoryConfig::desk() };
        let s = spec(Motion::Push, Hand::Left, Speed::Fast);
        let a = synth_trajectory(&s, &cfg, 1, 1).unwrap();
        let b = synth_trajectory(&s, &cfg, 1, 2).unwrap();
        assert_eq!(a, b);
        let again = synth_trajectory(&s, &cfg, 1, 1).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn push_and_pull_mirror() {
        let cfg = TrajectoryConfig { noise_sigma: 0.0, ..TrajectoryConfig::desk() };
        let push = synth_trajectory(&spec(Motion::Push, Hand::Right, Speed::Slowly), &cfg, 4, 1).unwrap();
        let pull = synth_trajectory(&spec(Motion::Pull, Hand::Right, Speed::Slowly), &cfg, 4, 1).unwrap();
        let (axis, _) = motion_axis(Motion::Push, Hand::Right, cfg.amplitude);
        let d = |s: &ActionSequence| s.joints.last().unwrap()[axis] - s.joints[0][axis];
        assert!((d(&push) + d(&pull)).abs() < 1e-12);
        assert!((d(&push) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn lengths_and_limits() {
        for cfg in [TrajectoryConfig::desk(), TrajectoryConfig::full()] {
            for (i, s) in enumerate_action_specs().iter().enumerate() {
                let seq = synth_trajectory(s, &cfg, 11, i).unwrap();
                let nominal = cfg.nominal_length(s.speed) as i64;
                assert!((seq.len() as i64 - nominal).abs() <= 1);
                assert!(seq.joints.iter().flatten().all(|x| x.abs() <= JOINT_LIMIT));
            }
        }
        assert_eq!(TrajectoryConfig::full().nominal_length(Speed::Slowly), 39);
        assert_eq!(TrajectoryConfig::full().nominal_length(Speed::Fast), 26);
        assert_eq!(TrajectoryConfig::desk().speed_threshold, 16);
        assert_eq!(TrajectoryConfig::with_lengths(20, 12), TrajectoryConfig::desk());
        let bad = TrajectoryConfig { t_slow: 10, t_fast: 10, ..TrajectoryConfig::desk() };
        assert!(synth_trajectory(&spec(Motion::Pull, Hand::Left, Speed::Fast), &bad, 0, 0).is_err());
    }

    #[test]
    fn visual_encoding() {
        let a = Arrangement::new(Color::Green, Color::Red).unwrap();
        let v = visual_features(a, 5);
        assert_eq!(&v[..6], &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(v, visual_features(a, 5));
        let b = Arrangement::new(Color::Yellow, Color::Red).unwrap();
        let w = visual_features(b, 5);
        assert_eq!(&w[3..], &v[3..]);
        assert_ne!(&w[..3], &v[..3]);
    }
}
