//! Frames, rotations, camera projection, and the per-depth-plane homography
//! that underpins multi-view feature fusion.
//!
//! Conventions used throughout the crate:
//!
//! - Cameras look along local +z, with x right and y down. Pixel (u, v)
//!   covers `[u, u+1) x [v, v+1)`; rays are cast through pixel centers
//!   `(u + 0.5, v + 0.5)`.
//! - A camera pose is camera-to-world; `relative_extrinsic` turns a pair of
//!   them into the source-to-reference transform the plane-sweep wants.
//! - Depth planes are fronto-parallel in the reference camera: the plane
//!   normal is the reference camera's principal axis, `(0, 0, 1)` locally,
//!   and plane depth is measured along it from the reference camera center.

mod camera;
mod planes;
mod pose;

pub use camera::{camera_look_at, CameraIntrinsics};
pub use planes::{homography_for_depth, DepthPlaneSet};
pub use pose::{RigidPose, Rot6D};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point depth {0} is not positive")]
    NonPositiveDepth(f64),
    #[error("depth plane {0} is degenerate (below 1e-6 m)")]
    DegenerateDepth(f64),
    #[error("the two 6D basis columns are parallel within 1e-9")]
    DegenerateBasis,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid depth plane set: {0}")]
    InvalidPlaneSet(String),
}

/// Transform mapping camera-frame-`t` coordinates into camera-frame-`t+1`
/// coordinates, given the two camera-to-world poses.
pub fn relative_extrinsic(cam_t: &RigidPose, cam_t1: &RigidPose) -> RigidPose {
    cam_t1.inverse().compose(cam_t)
}
