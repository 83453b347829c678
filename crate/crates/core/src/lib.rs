//! Active-perception manipulation simulator: a desk-scale scene model with a
//! ray-cast camera, kinematics-guided multi-view pose estimation, an
//! impedance-controlled arm, and a reinforcement-learned viewpoint scheduler,
//! plus the experiment harness that ties them together.
//!
//! The crate is organized as three subsystems and their shared substrate:
//!
//! * [`geometry`]: SE(3) poses, pinhole cameras, depth-plane homographies.
//! * [`scene`]: procedural articulated objects, domain randomization, and the
//!   renderer that produces feature images, masks, and ground-truth depth.
//! * [`pose`]: plane-sweep cost volumes, soft-argmin depth fusion, and the
//!   similarity solve that turns canonical-coordinate correspondences into a
//!   world-frame object pose.
//! * [`control`]: a serial-chain arm model with impedance torque control and
//!   closed-loop manipulation primitives.
//! * [`scheduler`]: the viewpoint-selection policy, its reward shaping, and
//!   PPO training.
//! * [`harness`]: experiment configs, episode rollouts, ablations, sweeps,
//!   and report emission.

pub mod control;
pub mod geometry;
pub mod pose;
pub mod scene;
pub mod scheduler;
pub mod util;

pub use control::{
    execute_plan, forward_kinematics, impedance_torque, jacobian, plan_manipulation, pose_error,
    regulate_to, step_dynamics, trajectory_target, ControlError, ControllerGains, ExecutionConfig,
    ExecutionReport, KinematicChain, ManipulationPlan, RobotState, TrajectoryState,
};
pub use geometry::{
    camera_look_at, homography_for_depth, relative_extrinsic, CameraIntrinsics, DepthPlaneSet,
    GeometryError, RigidPose, Rot6D,
};
pub use pose::{
    build_cost_volume, estimate_pose, fuse_depth, lift_correspondences, map_metrics,
    pose_metrics, solve_similarity, CostVolume, EstimatorConfig, NoiseConfig, PoseError,
    PoseEstimate,
};
pub use scene::{
    hemisphere_camera, place_object, render_view, sample_scene, ArticulatedObject, Category,
    RenderSettings, RenderedView, SceneConfig, SceneError, TaskId,
};
pub use scheduler::{
    compute_reward, ppo_update, train, PolicyValueNet, PpoConfig, RewardWeights, RolloutEnv,
    SchedAction, SchedError, SchedObservation, SchedulerEnv, SchedulerEnvConfig,
};
