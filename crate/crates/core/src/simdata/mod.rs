//! Synthetic cube-manipulation task: action patterns, trajectories,
//! descriptions and the cross-validated data division.

mod dataset;
mod describe;
mod spec;
mod trajectory;

pub use dataset::{
    build_dataset, read_dataset, write_dataset, Cell, DataConfig, DatasetSplit, PairedDataset, PairedSample,
    SampleRecord, DATASET_FILE, MANIFEST_FILE,
};
pub use describe::{describe, describe_with_sets, make_folds, Description, Fold};
pub use spec::{enumerate_action_specs, ActionSpec, Arrangement, Color, Hand, Motion, Speed};
pub use trajectory::{
    arm_joints, min_jerk, motion_axis, synth_trajectory, visual_features, ActionSequence, Frame, TrajectoryConfig,
    JOINT_DIM, JOINT_LIMIT, REST_POSE, VISUAL_DIM,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid description: {0}")]
    Description(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
