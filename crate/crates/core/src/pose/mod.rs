//! Kinematics-guided multi-view pose estimation.
//!
//! The pipeline runs in four stages: a plane-sweep cost volume built by
//! homography-warping source views into the reference view
//! ([`build_cost_volume`]), soft-argmin depth fusion ([`fuse_depth`]),
//! lifting of masked pixels into (camera, canonical) point pairs
//! ([`lift_correspondences`]), and a closed-form similarity solve
//! ([`solve_similarity`]). [`estimate_pose`] chains them; metric records
//! for pose and map quality live alongside.

mod dump;
mod pipeline;
mod solve;
mod volume;

pub use dump::{read_grid_f64, read_grid_u8, write_grid_f64, write_grid_u8, GRID_MAGIC};
pub use pipeline::{
    estimate_pose, estimate_pose_detailed, estimate_pose_naive, map_metrics, perturb_coord_map,
    pose_metrics, EstimateDiagnostics, EstimatorConfig, MapMetrics, NoiseConfig, PoseMetrics,
};
pub use solve::{
    lift_correspondences, solve_similarity, Correspondences, PoseEstimate, MAX_CORRESPONDENCES,
};
pub use volume::{build_cost_volume, fuse_depth, CostVolume, DEFAULT_TAU};

/// Failures of the pose-estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum PoseError {
    #[error("cost volume needs at least one source view")]
    NoSourceViews,
    #[error("depth plane set is empty")]
    PlaneSetEmpty,
    #[error("only {0} usable correspondences, need at least 3")]
    TooFewCorrespondences(usize),
    #[error("correspondences are collinear or coincident")]
    DegenerateConfiguration,
    #[error("pose needs at least 2 views, got {0}")]
    InsufficientViews(usize),
    #[error("no masked pixels to evaluate")]
    EmptyMask,
}
