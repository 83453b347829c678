use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::RigidPose;

use super::{ArticulatedObject, SceneError, TaskId};

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Transparent,
    Specular,
    Diffuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightIntensity {
    Strong,
    Weak,
}

/// One sampled scene: object placement tuple (alpha, beta, d, h), the
/// appearance randomization, and the per-instance dimension scalar.
///
/// alpha is the object's z-rotation; beta the azimuth relative to the arm;
/// d the distance from the arm base; h the height of the object base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub task: TaskId,
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
    pub h: f64,
    pub material: Material,
    pub light_intensity: LightIntensity,
    pub light_position: [f64; 3],
    /// Uniform multiplier on the category's base dimensions.
    pub dim_scale: f64,
}

/// Placement-parameter bounds for one task family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRow {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub d: [f64; 2],
    pub h: [f64; 2],
}

/// Per-task placement bounds. The 45-degree door and 30-cm drawer variants
/// share their base task's row.
pub fn param_row(task: TaskId) -> ParamRow {
    match task {
        TaskId::OpenDoor | TaskId::OpenDoor45 => ParamRow {
            alpha: [-0.20, 0.20],
            beta: [-0.40, 0.40],
            d: [0.50, 0.85],
            h: [0.01, 0.05],
        },
        TaskId::OpenDrawer | TaskId::OpenDrawer30 => ParamRow {
            alpha: [-0.20, 0.20],
            beta: [-0.40, 0.40],
            d: [0.50, 0.80],
            h: [0.01, 0.05],
        },
        TaskId::OpenPot => ParamRow {
            alpha: [-0.20, 0.20],
            beta: [-0.40, 0.40],
            d: [0.20, 0.38],
            h: [0.01, 0.30],
        },
        TaskId::LiftMug => ParamRow {
            alpha: [1.57, 4.71],
            beta: [-0.40, 0.40],
            d: [0.44, 0.50],
            h: [0.10, 0.15],
        },
    }
}

/// Instance dimension multiplier range shared by all categories.
pub const DIM_SCALE_RANGE: [f64; 2] = [0.8, 1.25];

/// The 20 light anchor points: vertices and edge centers of a cube around
/// the workspace (center 0.5 m ahead of the base, 0.9 m up, half-size 1.2 m).
pub fn light_anchor_points() -> Vec<[f64; 3]> {
    let center = Vector3::new(0.5, 0.0, 0.9);
    let half = 1.2;
    let mut pts = Vec::with_capacity(20);
    let s = [-1.0, 1.0];
    for &x in &s {
        for &y in &s {
            for &z in &s {
                pts.push([x, y, z]);
            }
        }
    }
    for &a in &s {
        for &b in &s {
            pts.push([0.0, a, b]);
            pts.push([a, 0.0, b]);
            pts.push([a, b, 0.0]);
        }
    }
    pts.into_iter()
        .map(|p| {
            [
                center.x + half * p[0],
                center.y + half * p[1],
                center.z + half * p[2],
            ]
        })
        .collect()
}

/// Uniform scene sample from the task's parameter row plus appearance
/// randomization (material, light intensity, light anchor, instance scale).
pub fn sample_scene<R: Rng>(task: TaskId, rng: &mut R) -> SceneConfig {
    let row = param_row(task);
    let alpha = rng.random_range(row.alpha[0]..=row.alpha[1]);
    let beta = rng.random_range(row.beta[0]..=row.beta[1]);
    let d = rng.random_range(row.d[0]..=row.d[1]);
    let h = rng.random_range(row.h[0]..=row.h[1]);
    let material = match rng.random_range(0..3u32) {
        0 => Material::Transparent,
        1 => Material::Specular,
        _ => Material::Diffuse,
    };
    let light_intensity = if rng.random_range(0..2u32) == 0 {
        LightIntensity::Strong
    } else {
        LightIntensity::Weak
    };
    let anchors = light_anchor_points();
    let light_position = anchors[rng.random_range(0..anchors.len())];
    let dim_scale = rng.random_range(DIM_SCALE_RANGE[0]..=DIM_SCALE_RANGE[1]);
    SceneConfig {
        task,
        alpha,
        beta,
        d,
        h,
        material,
        light_intensity,
        light_position,
        dim_scale,
    }
}

/// Canonical-appearance scene at the parameter-row midpoints: diffuse
/// material, strong light from a fixed front-top anchor, unit scale.
pub fn canonical_scene(task: TaskId) -> SceneConfig {
    let row = param_row(task);
    SceneConfig {
        task,
        alpha: (row.alpha[0] + row.alpha[1]) / 2.0,
        beta: (row.beta[0] + row.beta[1]) / 2.0,
        d: (row.d[0] + row.d[1]) / 2.0,
        h: (row.h[0] + row.h[1]) / 2.0,
        material: Material::Diffuse,
        light_intensity: LightIntensity::Strong,
        light_position: [0.5, 0.0, 2.1],
        dim_scale: 1.0,
    }
}

/// World pose of the object base implied by (alpha, beta, d, h): the base
/// sits d meters from the arm at azimuth beta, its front (+x) turned back
/// toward the arm, then rotated by alpha about z.
pub fn base_pose_from_params(alpha: f64, beta: f64, d: f64, h: f64) -> RigidPose {
    let position = Vector3::new(d * beta.cos(), d * beta.sin(), h);
    let yaw = std::f64::consts::PI + beta + alpha;
    RigidPose::new(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        position,
    )
}

/// Builds the task's object placed per the scene parameters.
pub fn place_object(config: &SceneConfig) -> ArticulatedObject {
    let base = base_pose_from_params(config.alpha, config.beta, config.d, config.h);
    ArticulatedObject::for_task(config.task, config.dim_scale, base)
}

/// On-disk scene description: the SceneConfig fields plus the derived part
/// dimensions, versioned for forward compatibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub format_version: u32,
    pub task: TaskId,
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
    pub h: f64,
    pub material: Material,
    pub light_intensity: LightIntensity,
    pub light_position: [f64; 3],
    pub dim_scale: f64,
    pub part_dimensions: [f64; 3],
}

impl SceneDescription {
    pub fn from_config(config: &SceneConfig) -> Self {
        let object = place_object(config);
        let d = object.part_dimensions;
        Self {
            format_version: SCENE_FORMAT_VERSION,
            task: config.task,
            alpha: config.alpha,
            beta: config.beta,
            d: config.d,
            h: config.h,
            material: config.material,
            light_intensity: config.light_intensity,
            light_position: config.light_position,
            dim_scale: config.dim_scale,
            part_dimensions: [d.x, d.y, d.z],
        }
    }

    pub fn into_config(self) -> Result<SceneConfig, SceneError> {
        if self.format_version != SCENE_FORMAT_VERSION {
            return Err(SceneError::UnsupportedFormatVersion(self.format_version));
        }
        Ok(SceneConfig {
            task: self.task,
            alpha: self.alpha,
            beta: self.beta,
            d: self.d,
            h: self.h,
            material: self.material,
            light_intensity: self.light_intensity,
            light_position: self.light_position,
            dim_scale: self.dim_scale,
        })
    }
}

pub fn scene_to_toml(config: &SceneConfig) -> String {
    toml::to_string_pretty(&SceneDescription::from_config(config))
        .expect("scene description serializes")
}

pub fn scene_from_toml(text: &str) -> Result<SceneConfig, SceneError> {
    let desc: SceneDescription =
        toml::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
    desc.into_config()
}
