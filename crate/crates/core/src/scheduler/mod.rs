//! Viewpoint scheduling as a Markov decision process: the policy proposes
//! camera waypoints (plus a terminate flag), the environment moves the
//! eye-on-hand camera with the impedance controller, re-estimates the
//! object pose after every view, and hands over to the manipulation
//! planner on termination. Training is proximal policy optimization on a
//! pair of tanh multilayer perceptrons, written out as versioned
//! checkpoints with CSV reward curves.

mod ckpt;
mod env;
mod mlp;
mod policy;
mod ppo;
mod reward;
mod train;

pub use ckpt::{
    curve_csv_string, load_checkpoint, save_checkpoint, write_curve_csv, Checkpoint, CurveRow,
    CHECKPOINT_VERSION,
};
pub use env::{
    BanditEnv, EnvOutcome, EpisodeSummary, RolloutEnv, SchedulerEnv, SchedulerEnvConfig,
};
pub use mlp::{Adam, Mlp};
pub use policy::{PolicyValueNet, SchedAction, SchedObservation, ViewSummary, ACTION_DIM};
pub use ppo::{gae_advantages, ppo_update, PpoConfig, RolloutBuffer, Transition, UpdateStats};
pub use reward::{
    compute_reward, view_diversity, RewardBreakdown, RewardSnapshot, RewardWeights, TermRecord,
    DIVERSITY_THRESHOLD, N_REWARD_TERMS, PROP_HEIGHT, TERM_NAMES,
};
pub use train::{train, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum SchedError {
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("snapshot field {0} is missing or not finite")]
    MissingSnapshotField(&'static str),
    #[error("camera position coincides with the object center")]
    ZeroLengthDirection,
    #[error("rollout buffer holds no complete episode")]
    EmptyBuffer,
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("checkpoint interval {interval} does not divide total steps {total}")]
    BadCadence { interval: usize, total: usize },
    #[error("checkpoint file malformed: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Control(#[from] crate::control::ControlError),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Pose(#[from] crate::pose::PoseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
