use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::RigidPose;

use super::SceneError;

/// Default lift height for pot-lid and mug tasks, in meters. Configurable
/// through [`success_with_lift`]; not a literature value.
pub const DEFAULT_LIFT_HEIGHT: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Door,
    Drawer,
    Pot,
    Mug,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Category::Door => "door",
            Category::Drawer => "drawer",
            Category::Pot => "pot",
            Category::Mug => "mug",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskId {
    #[serde(rename = "open-door")]
    OpenDoor,
    #[serde(rename = "open-door-45")]
    OpenDoor45,
    #[serde(rename = "open-drawer")]
    OpenDrawer,
    #[serde(rename = "open-drawer-30")]
    OpenDrawer30,
    #[serde(rename = "open-pot")]
    OpenPot,
    #[serde(rename = "lift-mug")]
    LiftMug,
}

pub const ALL_TASKS: [TaskId; 6] = [
    TaskId::OpenDoor,
    TaskId::OpenDoor45,
    TaskId::OpenDrawer,
    TaskId::OpenDrawer30,
    TaskId::OpenPot,
    TaskId::LiftMug,
];

impl TaskId {
    pub fn category(&self) -> Category {
        match self {
            TaskId::OpenDoor | TaskId::OpenDoor45 => Category::Door,
            TaskId::OpenDrawer | TaskId::OpenDrawer30 => Category::Drawer,
            TaskId::OpenPot => Category::Pot,
            TaskId::LiftMug => Category::Mug,
        }
    }

    /// Index into task one-hot encodings; order matches [`ALL_TASKS`].
    pub fn index(&self) -> usize {
        ALL_TASKS.iter().position(|t| t == self).expect("task listed")
    }
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TaskId::OpenDoor => "open-door",
            TaskId::OpenDoor45 => "open-door-45",
            TaskId::OpenDrawer => "open-drawer",
            TaskId::OpenDrawer30 => "open-drawer-30",
            TaskId::OpenPot => "open-pot",
            TaskId::LiftMug => "lift-mug",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TaskId {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open-door" => Ok(TaskId::OpenDoor),
            "open-door-45" => Ok(TaskId::OpenDoor45),
            "open-drawer" => Ok(TaskId::OpenDrawer),
            "open-drawer-30" => Ok(TaskId::OpenDrawer30),
            "open-pot" => Ok(TaskId::OpenPot),
            "lift-mug" => Ok(TaskId::LiftMug),
            other => Err(SceneError::UnknownTask(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Revolute,
    Prismatic,
    /// Unconstrained link tracked along its lift axis (pot lids and mugs).
    Free,
}

/// Analytic solids; each is centered on the origin of its own frame with
/// the symmetry axis along +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Cuboid { half: Vector3<f64> },
    Cylinder { radius: f64, half_height: f64 },
    Torus { major: f64, minor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    /// Primitive frame relative to its owning link (or base) frame.
    pub pose: RigidPose,
}

/// Mapping from moving-link local coordinates to the canonical
/// size-normalized box [-0.5, 0.5]^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NocsFrame {
    pub center: Vector3<f64>,
    pub scale: f64,
}

impl NocsFrame {
    pub fn to_canonical(&self, p_link: &Vector3<f64>) -> Vector3<f64> {
        (p_link - self.center) / self.scale
    }

    pub fn from_canonical(&self, p_canonical: &Vector3<f64>) -> Vector3<f64> {
        p_canonical * self.scale + self.center
    }
}

/// One articulated object: rigid statics on a base frame plus a single
/// moving link on one joint, with a graspable handle on the link.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulatedObject {
    pub category: Category,
    pub joint_type: JointType,
    joint_state: f64,
    pub joint_limits: [f64; 2],
    pub base_pose: RigidPose,
    /// Handle grasp frame relative to the moving link.
    pub handle_frame: RigidPose,
    /// Tight bounding box of the moving-link geometry, link frame.
    pub part_dimensions: Vector3<f64>,
    pub nocs: NocsFrame,
    statics: Vec<Primitive>,
    parts: Vec<Primitive>,
    /// Link frame at joint_state = 0, relative to the base frame.
    joint_origin: RigidPose,
    /// Unit joint axis in the joint-origin frame.
    joint_axis: Vector3<f64>,
}

impl ArticulatedObject {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        category: Category,
        joint_type: JointType,
        joint_limits: [f64; 2],
        base_pose: RigidPose,
        handle_frame: RigidPose,
        statics: Vec<Primitive>,
        parts: Vec<Primitive>,
        joint_origin: RigidPose,
        joint_axis: Vector3<f64>,
    ) -> Self {
        let (lo, hi) = bounding_box(&parts);
        let dims = hi - lo;
        let center = (hi + lo) / 2.0;
        let scale = dims.x.max(dims.y).max(dims.z);
        Self {
            category,
            joint_type,
            joint_state: 0.0,
            joint_limits,
            base_pose,
            handle_frame,
            part_dimensions: dims,
            nocs: NocsFrame { center, scale },
            statics,
            parts,
            joint_origin,
            joint_axis: joint_axis.normalize(),
        }
    }

    /// Cabinet with a revolute front door; hinge on the door's +y edge
    /// (the cabinet's left when facing it), swinging outward. `scale`
    /// multiplies every dimension, preserving aspect ratios so instances of
    /// the category differ only by the similarity the estimator recovers.
    pub fn door(scale: f64, base_pose: RigidPose) -> Self {
        let u = scale;
        let statics = vec![Primitive {
            shape: Shape::Cuboid {
                half: Vector3::new(0.175, 0.2, 0.25) * u,
            },
            pose: RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.25 * u)),
        }];
        // Link frame: hinge line through the origin, axis +z. The panel
        // spans y in [-0.36u, 0] so positive rotation swings it toward +x.
        let parts = vec![
            Primitive {
                shape: Shape::Cuboid {
                    half: Vector3::new(0.01, 0.18, 0.22) * u,
                },
                pose: RigidPose::from_translation(Vector3::new(0.0, -0.18 * u, 0.0)),
            },
            Primitive {
                shape: Shape::Cylinder {
                    radius: 0.008 * u,
                    half_height: 0.05 * u,
                },
                pose: RigidPose::from_translation(Vector3::new(0.022 * u, -0.32 * u, 0.0)),
            },
        ];
        let joint_origin = RigidPose::from_translation(Vector3::new(0.186 * u, 0.18 * u, 0.25 * u));
        let handle_frame = RigidPose::from_translation(Vector3::new(0.022 * u, -0.32 * u, 0.0));
        Self::assemble(
            Category::Door,
            JointType::Revolute,
            [0.0, 1.8],
            base_pose,
            handle_frame,
            statics,
            parts,
            joint_origin,
            Vector3::z(),
        )
    }

    /// Cabinet with a prismatic drawer sliding out along the front (+x).
    pub fn drawer(scale: f64, base_pose: RigidPose) -> Self {
        let u = scale;
        let statics = vec![Primitive {
            shape: Shape::Cuboid {
                half: Vector3::new(0.175, 0.2, 0.15) * u,
            },
            pose: RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.15 * u)),
        }];
        let parts = vec![
            Primitive {
                shape: Shape::Cuboid {
                    half: Vector3::new(0.15, 0.17, 0.05) * u,
                },
                pose: RigidPose::identity(),
            },
            // Horizontal handle bar proud of the drawer front.
            Primitive {
                shape: Shape::Cylinder {
                    radius: 0.008 * u,
                    half_height: 0.06 * u,
                },
                pose: RigidPose::new(
                    nalgebra::UnitQuaternion::from_axis_angle(
                        &Vector3::x_axis(),
                        std::f64::consts::FRAC_PI_2,
                    ),
                    Vector3::new(0.165 * u, 0.0, 0.0),
                ),
            },
        ];
        let joint_origin = RigidPose::from_translation(Vector3::new(0.03 * u, 0.0, 0.15 * u));
        let handle_frame = RigidPose::from_translation(Vector3::new(0.165 * u, 0.0, 0.0));
        Self::assemble(
            Category::Drawer,
            JointType::Prismatic,
            [0.0, 0.35],
            base_pose,
            handle_frame,
            statics,
            parts,
            joint_origin,
            Vector3::x(),
        )
    }

    /// Cylindrical pot with a free-lifting lid carrying a center knob.
    pub fn pot(scale: f64, base_pose: RigidPose) -> Self {
        let u = scale;
        let statics = vec![Primitive {
            shape: Shape::Cylinder {
                radius: 0.12 * u,
                half_height: 0.075 * u,
            },
            pose: RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.075 * u)),
        }];
        let parts = vec![
            Primitive {
                shape: Shape::Cylinder {
                    radius: 0.13 * u,
                    half_height: 0.01 * u,
                },
                pose: RigidPose::identity(),
            },
            Primitive {
                shape: Shape::Cylinder {
                    radius: 0.02 * u,
                    half_height: 0.015 * u,
                },
                pose: RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.025 * u)),
            },
        ];
        let joint_origin = RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.16 * u));
        let handle_frame = RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.03 * u));
        Self::assemble(
            Category::Pot,
            JointType::Free,
            [0.0, 1.0],
            base_pose,
            handle_frame,
            statics,
            parts,
            joint_origin,
            Vector3::z(),
        )
    }

    /// Mug (cylinder body, torus side handle); the whole mug lifts freely.
    pub fn mug(scale: f64, base_pose: RigidPose) -> Self {
        let u = scale;
        let parts = vec![
            Primitive {
                shape: Shape::Cylinder {
                    radius: 0.05 * u,
                    half_height: 0.05 * u,
                },
                pose: RigidPose::identity(),
            },
            // Handle ring in the local x-z plane, overlapping the body wall.
            Primitive {
                shape: Shape::Torus {
                    major: 0.035 * u,
                    minor: 0.009 * u,
                },
                pose: RigidPose::new(
                    nalgebra::UnitQuaternion::from_axis_angle(
                        &Vector3::x_axis(),
                        std::f64::consts::FRAC_PI_2,
                    ),
                    Vector3::new(0.062 * u, 0.0, 0.0),
                ),
            },
        ];
        let joint_origin = RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.05 * u));
        let handle_frame = RigidPose::from_translation(Vector3::new(0.062 * u, 0.0, 0.0));
        Self::assemble(
            Category::Mug,
            JointType::Free,
            [0.0, 1.0],
            base_pose,
            handle_frame,
            Vec::new(),
            parts,
            joint_origin,
            Vector3::z(),
        )
    }

    /// Free-standing cuboid part with no statics; a scaffold for render and
    /// plane-sweep oracles where analytically simple geometry is needed.
    pub fn prop_box(half: Vector3<f64>, base_pose: RigidPose) -> Self {
        let parts = vec![Primitive {
            shape: Shape::Cuboid { half },
            pose: RigidPose::identity(),
        }];
        Self::assemble(
            Category::Mug,
            JointType::Free,
            [0.0, 10.0],
            base_pose,
            RigidPose::from_translation(Vector3::new(0.0, 0.0, half.z)),
            Vec::new(),
            parts,
            RigidPose::identity(),
            Vector3::z(),
        )
    }

    #[cfg(test)]
    pub(crate) fn custom_revolute(
        base_pose: RigidPose,
        joint_origin: RigidPose,
        axis: Vector3<f64>,
        limits: [f64; 2],
        handle_frame: RigidPose,
        parts: Vec<Primitive>,
    ) -> Self {
        Self::assemble(
            Category::Door,
            JointType::Revolute,
            limits,
            base_pose,
            handle_frame,
            Vec::new(),
            parts,
            joint_origin,
            axis,
        )
    }

    pub fn for_task(task: TaskId, scale: f64, base_pose: RigidPose) -> Self {
        match task.category() {
            Category::Door => Self::door(scale, base_pose),
            Category::Drawer => Self::drawer(scale, base_pose),
            Category::Pot => Self::pot(scale, base_pose),
            Category::Mug => Self::mug(scale, base_pose),
        }
    }

    pub fn joint_state(&self) -> f64 {
        self.joint_state
    }

    pub fn set_joint_state(&mut self, q: f64) {
        self.joint_state = q.clamp(self.joint_limits[0], self.joint_limits[1]);
    }

    /// Joint frame (link frame at zero state) in world coordinates.
    pub fn joint_frame_world(&self) -> RigidPose {
        self.base_pose.compose(&self.joint_origin)
    }

    fn joint_motion(&self) -> RigidPose {
        match self.joint_type {
            JointType::Revolute => RigidPose::from_axis_angle(&self.joint_axis, self.joint_state),
            JointType::Prismatic | JointType::Free => {
                RigidPose::from_translation(self.joint_axis * self.joint_state)
            }
        }
    }

    /// Moving-link frame in world coordinates at the current joint state.
    pub fn link_pose(&self) -> RigidPose {
        self.joint_frame_world().compose(&self.joint_motion())
    }

    pub fn handle_pose_world(&self) -> RigidPose {
        self.link_pose().compose(&self.handle_frame)
    }

    pub fn joint_axis_world(&self) -> Vector3<f64> {
        self.joint_frame_world().rotate_vector(&self.joint_axis)
    }

    /// A point on the joint axis, world frame (revolute hinge anchor).
    pub fn joint_anchor_world(&self) -> Vector3<f64> {
        self.joint_frame_world().translation()
    }

    /// Distance from the handle grasp point to the hinge axis; `None` for
    /// non-revolute joints.
    pub fn handle_radius(&self) -> Option<f64> {
        if self.joint_type != JointType::Revolute {
            return None;
        }
        let axis = self.joint_axis_world();
        let rel = self.handle_pose_world().translation() - self.joint_anchor_world();
        let radial = rel - axis * axis.dot(&rel);
        Some(radial.norm())
    }

    /// World position of the tracked part's canonical center.
    pub fn part_center_world(&self) -> Vector3<f64> {
        self.link_pose().transform_point(&self.nocs.center)
    }

    /// Ground-truth similarity transform taking canonical coordinates to
    /// world coordinates: x_world = s R x_can + t.
    pub fn gt_similarity(&self) -> (Matrix3<f64>, Vector3<f64>, f64) {
        let link = self.link_pose();
        (
            link.rotation_matrix(),
            self.part_center_world(),
            self.nocs.scale,
        )
    }

    pub fn statics(&self) -> &[Primitive] {
        &self.statics
    }

    pub fn parts(&self) -> &[Primitive] {
        &self.parts
    }
}

fn bounding_box(parts: &[Primitive]) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in parts {
        let local_half = match p.shape {
            Shape::Cuboid { half } => half,
            Shape::Cylinder {
                radius,
                half_height,
            } => Vector3::new(radius, radius, half_height),
            Shape::Torus { major, minor } => {
                Vector3::new(major + minor, major + minor, minor)
            }
        };
        // Rotate the half-extent box conservatively: |R| * half.
        let r = p.pose.rotation_matrix();
        let mut rot_half = Vector3::zeros();
        for i in 0..3 {
            rot_half[i] =
                r[(i, 0)].abs() * local_half.x + r[(i, 1)].abs() * local_half.y + r[(i, 2)].abs() * local_half.z;
        }
        let c = p.pose.translation();
        lo = lo.inf(&(c - rot_half));
        hi = hi.sup(&(c + rot_half));
    }
    (lo, hi)
}

/// Advances the joint by the projection of a world-frame handle displacement
/// onto the joint's motion subspace, clamped to the limits. Revolute joints
/// convert tangential arc displacement to angle via the handle radius.
pub fn step_object(object: &mut ArticulatedObject, displacement: &Vector3<f64>) {
    let axis = object.joint_axis_world();
    let dq = match object.joint_type {
        JointType::Prismatic | JointType::Free => displacement.dot(&axis),
        JointType::Revolute => {
            let rel = object.handle_pose_world().translation() - object.joint_anchor_world();
            let radial = rel - axis * axis.dot(&rel);
            let r = radial.norm();
            if r < 1e-9 {
                0.0
            } else {
                let tangent = axis.cross(&(radial / r));
                displacement.dot(&tangent) / r
            }
        }
    };
    object.set_joint_state(object.joint_state + dq);
}

/// Task success per the fixed thresholds (strict inequalities): door
/// > 0.15 rad, door-45 > 45 deg, drawer > 0.15 m, drawer-30 > 0.30 m,
/// pot and mug lift > `lift` meters.
pub fn success_with_lift(
    task: TaskId,
    object: &ArticulatedObject,
    lift: f64,
) -> Result<bool, SceneError> {
    if task.category() != object.category {
        return Err(SceneError::TaskObjectMismatch {
            task,
            category: object.category,
        });
    }
    let q = object.joint_state();
    Ok(match task {
        TaskId::OpenDoor => q > 0.15,
        TaskId::OpenDoor45 => q > 45.0_f64.to_radians(),
        TaskId::OpenDrawer => q > 0.15,
        TaskId::OpenDrawer30 => q > 0.30,
        TaskId::OpenPot | TaskId::LiftMug => q > lift,
    })
}

pub fn success(task: TaskId, object: &ArticulatedObject) -> Result<bool, SceneError> {
    success_with_lift(task, object, DEFAULT_LIFT_HEIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn door_step_follows_arc_length() {
        let mut door = ArticulatedObject::door(1.0, RigidPose::identity());
        let r = door.handle_radius().unwrap();
        let axis = door.joint_axis_world();
        let rel = door.handle_pose_world().translation() - door.joint_anchor_world();
        let radial = rel - axis * axis.dot(&rel);
        let tangent = axis.cross(&radial.normalize());
        step_object(&mut door, &(tangent * 0.04));
        assert_abs_diff_eq!(door.joint_state(), 0.04 / r, epsilon = 1e-9);
    }

    #[test]
    fn revolute_handle_radius_0_4_gives_0_1_rad() {
        let parts = vec![Primitive {
            shape: Shape::Cuboid {
                half: Vector3::new(0.01, 0.2, 0.2),
            },
            pose: RigidPose::from_translation(Vector3::new(0.0, -0.2, 0.0)),
        }];
        let mut obj = ArticulatedObject::custom_revolute(
            RigidPose::identity(),
            RigidPose::identity(),
            Vector3::z(),
            [0.0, 1.8],
            RigidPose::from_translation(Vector3::new(0.0, -0.4, 0.0)),
            parts,
        );
        // Handle at (0, -0.4, 0); tangent of +z axis rotation there is +x.
        step_object(&mut obj, &Vector3::new(0.04, 0.0, 0.0));
        assert_abs_diff_eq!(obj.joint_state(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn drawer_step_is_additive_along_slide_axis() {
        let mut drawer = ArticulatedObject::drawer(1.0, RigidPose::identity());
        let axis = drawer.joint_axis_world();
        step_object(&mut drawer, &(axis * 0.05));
        assert_abs_diff_eq!(drawer.joint_state(), 0.05, epsilon = 1e-12);
        step_object(&mut drawer, &(axis * 0.07));
        assert_abs_diff_eq!(drawer.joint_state(), 0.12, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_displacement_leaves_joint_unchanged() {
        let mut drawer = ArticulatedObject::drawer(1.0, RigidPose::identity());
        step_object(&mut drawer, &Vector3::new(0.0, 0.03, 0.0));
        step_object(&mut drawer, &Vector3::new(0.0, 0.0, 0.03));
        assert_eq!(drawer.joint_state(), 0.0);

        let mut door = ArticulatedObject::door(1.0, RigidPose::identity());
        // Purely radial and purely axial displacements at the handle.
        let axis = door.joint_axis_world();
        let rel = door.handle_pose_world().translation() - door.joint_anchor_world();
        let radial = (rel - axis * axis.dot(&rel)).normalize();
        step_object(&mut door, &(radial * 0.05));
        step_object(&mut door, &(axis * 0.05));
        assert_abs_diff_eq!(door.joint_state(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn clamping_absorbs_out_of_range_commands() {
        let mut drawer = ArticulatedObject::drawer(1.0, RigidPose::identity());
        let axis = drawer.joint_axis_world();
        step_object(&mut drawer, &(axis * 10.0));
        assert_eq!(drawer.joint_state(), drawer.joint_limits[1]);
        step_object(&mut drawer, &(axis * -10.0));
        assert_eq!(drawer.joint_state(), drawer.joint_limits[0]);
    }

    #[test]
    fn handle_stays_rigidly_attached_under_motion() {
        let mut door = ArticulatedObject::door(1.1, RigidPose::identity());
        let local = door.handle_frame.translation();
        let r0 = door.handle_radius().unwrap();
        for q in [0.0, 0.3, 0.9, 1.5] {
            door.set_joint_state(q);
            let via_link = door.link_pose().transform_point(&local);
            let via_handle = door.handle_pose_world().translation();
            assert_abs_diff_eq!(via_link, via_handle, epsilon = 1e-12);
            // Distance to the hinge axis is invariant under joint motion.
            assert_abs_diff_eq!(door.handle_radius().unwrap(), r0, epsilon = 1e-12);
        }
    }

    #[test]
    fn success_thresholds_are_strict() {
        let mut door = ArticulatedObject::door(1.0, RigidPose::identity());
        door.set_joint_state(0.15);
        assert!(!success(TaskId::OpenDoor, &door).unwrap());
        door.set_joint_state(0.16);
        assert!(success(TaskId::OpenDoor, &door).unwrap());

        let mut drawer = ArticulatedObject::drawer(1.0, RigidPose::identity());
        drawer.set_joint_state(0.29);
        assert!(!success(TaskId::OpenDrawer30, &drawer).unwrap());
        drawer.set_joint_state(0.301);
        assert!(success(TaskId::OpenDrawer30, &drawer).unwrap());
        assert!(success(TaskId::OpenDrawer, &drawer).unwrap());
    }

    #[test]
    fn task_object_mismatch_is_an_error() {
        let door = ArticulatedObject::door(1.0, RigidPose::identity());
        assert!(matches!(
            success(TaskId::LiftMug, &door),
            Err(SceneError::TaskObjectMismatch { .. })
        ));
    }

    #[test]
    fn lift_success_uses_height_gain() {
        let mut mug = ArticulatedObject::mug(1.0, RigidPose::identity());
        let z0 = mug.part_center_world().z;
        mug.set_joint_state(0.2);
        assert_abs_diff_eq!(mug.part_center_world().z - z0, 0.2, epsilon = 1e-12);
        assert!(success(TaskId::LiftMug, &mug).unwrap());
        assert!(!success_with_lift(TaskId::LiftMug, &mug, 0.25).unwrap());
    }

    #[test]
    fn nocs_bounds_contain_all_part_geometry() {
        for obj in [
            ArticulatedObject::door(0.8, RigidPose::identity()),
            ArticulatedObject::drawer(1.25, RigidPose::identity()),
            ArticulatedObject::pot(1.0, RigidPose::identity()),
            ArticulatedObject::mug(1.0, RigidPose::identity()),
        ] {
            // Canonical corners of each primitive's conservative box must
            // stay inside the unit canonical cube.
            let (lo, hi) = super::bounding_box(obj.parts());
            for corner in [
                Vector3::new(lo.x, lo.y, lo.z),
                Vector3::new(hi.x, hi.y, hi.z),
                Vector3::new(lo.x, hi.y, lo.z),
                Vector3::new(hi.x, lo.y, hi.z),
            ] {
                let c = obj.nocs.to_canonical(&corner);
                for i in 0..3 {
                    assert!(c[i] >= -0.5 - 1e-12 && c[i] <= 0.5 + 1e-12, "{c:?}");
                }
            }
            // Round trip.
            let p = Vector3::new(0.01, -0.02, 0.03);
            assert_abs_diff_eq!(obj.nocs.from_canonical(&obj.nocs.to_canonical(&p)), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn gt_similarity_maps_canonical_to_world() {
        let base = RigidPose::new(
            nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.7),
            Vector3::new(0.6, -0.1, 0.04),
        );
        let mut door = ArticulatedObject::door(0.9, base);
        door.set_joint_state(0.4);
        let (r, t, s) = door.gt_similarity();
        let p_can = Vector3::new(0.2, -0.1, 0.3);
        let direct = door
            .link_pose()
            .transform_point(&door.nocs.from_canonical(&p_can));
        let via = r * p_can * s + t;
        assert_abs_diff_eq!(via, direct, epsilon = 1e-12);
    }
}
