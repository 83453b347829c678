//! Impedance-controlled manipulator: kinematic chain with forward
//! kinematics and geometric Jacobian, the torque law mapping end-effector
//! error and velocity to joint torques, anticipatory trajectory targets,
//! diagonal-inertia dynamics stepping, closed-loop pose regulation, and
//! task-specific manipulation plans (arc, line, lift) executed against
//! articulated scene objects.

mod chain;
mod impedance;
mod log;
mod plan;

pub use chain::{
    forward_kinematics, jacobian, pose_error, Joint, JointKind, KinematicChain, RobotState,
};
pub use impedance::{
    impedance_torque, nullspace_posture, regulate_counted, regulate_to, regulate_with,
    step_dynamics, trajectory_target, ControllerGains, TrajectoryState, DEFAULT_DT,
};
pub use log::{TrajectoryLog, TrajectoryRow};
pub use plan::{
    execute_plan, plan_manipulation, CanonicalTemplate, Disturbance, ExecutionConfig,
    ExecutionReport, GraspTolerance, ManipulationPlan,
};

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("time step {0} must be positive")]
    NonPositiveDt(f64),
    #[error("time step {0} exceeds the 0.01 s stability bound")]
    DtTooLarge(f64),
    #[error("target pose failed the reachability probe")]
    TargetUnreachable,
    #[error("joint axis has near-zero length")]
    DegenerateAxis,
    #[error("chain has no joints")]
    EmptyChain,
}
