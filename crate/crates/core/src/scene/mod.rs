//! Procedural articulated desk scenes and their synthetic observations.
//!
//! Objects are analytic primitive assemblies (boxes, cylinders, a torus)
//! with one moving link on a single joint, so every ground-truth quantity
//! the estimator consumes has a closed form. Appearance randomization
//! follows the task parameter rows: placement tuple (alpha, beta, d, h),
//! material class, light intensity and anchor. Rendering is a pure function
//! of (scene, object state, camera, settings), which keeps episodes
//! trivially parallel and bit-reproducible.

mod config;
mod grid;
mod object;
mod render;

pub use config::{
    base_pose_from_params, canonical_scene, light_anchor_points, param_row, place_object,
    sample_scene, scene_from_toml, scene_to_toml, LightIntensity, Material, ParamRow,
    SceneConfig, SceneDescription, DIM_SCALE_RANGE, SCENE_FORMAT_VERSION,
};
pub use grid::{FeatureImage, Grid};
pub use object::{
    step_object, success, success_with_lift, ArticulatedObject, Category, JointType, NocsFrame,
    Primitive, Shape, TaskId, ALL_TASKS, DEFAULT_LIFT_HEIGHT,
};
pub use render::{hemisphere_camera, mask_bbox, render_view, BBox, RenderSettings, RenderedView};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task {task} does not apply to a {category} object")]
    TaskObjectMismatch { task: TaskId, category: Category },
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("unsupported scene format version {0}")]
    UnsupportedFormatVersion(u32),
    #[error("scene description: {0}")]
    Parse(String),
}
