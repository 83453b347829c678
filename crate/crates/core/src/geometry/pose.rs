use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::GeometryError;

/// Rigid transform in SE(3): rotation stored as a unit quaternion plus a
/// translation in meters.
///
/// The quaternion is renormalized on construction and after composition so
/// its norm stays within 1e-9 of one over arbitrarily long chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        let mut rotation = rotation;
        rotation.renormalize();
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation_matrix(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix(rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    /// Rotation about `axis` (normalized internally) by `angle` radians.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Self::new(UnitQuaternion::from_axis_angle(&axis, angle), Vector3::zeros())
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidPose {
        let rot_inv = self.rotation.inverse();
        RigidPose::new(rot_inv, -(rot_inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotates a direction vector, ignoring the translation.
    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle in radians of `self` relative to `other`.
    pub fn rotation_angle_to(&self, other: &RigidPose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    /// Translation distance in meters between the two poses.
    pub fn translation_distance_to(&self, other: &RigidPose) -> f64 {
        (self.translation - other.translation).norm()
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.rotation.as_ref().norm()
    }
}

/// Continuous 6D rotation parameterization: the first two columns of a
/// rotation matrix, flattened column-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn from_matrix(r: &Matrix3<f64>) -> Self {
        Rot6D([
            r[(0, 0)],
            r[(1, 0)],
            r[(2, 0)],
            r[(0, 1)],
            r[(1, 1)],
            r[(2, 1)],
        ])
    }

    /// Recovers the full rotation by Gram-Schmidt on the two stored columns.
    ///
    /// Scaling either column leaves the result unchanged; columns parallel
    /// within 1e-9 are rejected as [`GeometryError::DegenerateBasis`].
    pub fn to_matrix(&self) -> Result<Matrix3<f64>, GeometryError> {
        let a = Vector3::new(self.0[0], self.0[1], self.0[2]);
        let b = Vector3::new(self.0[3], self.0[4], self.0[5]);
        let na = a.norm();
        if na < 1e-9 {
            return Err(GeometryError::DegenerateBasis);
        }
        let c0 = a / na;
        let b_perp = b - c0 * c0.dot(&b);
        let nb = b_perp.norm();
        if nb < 1e-9 * b.norm().max(1.0) {
            return Err(GeometryError::DegenerateBasis);
        }
        let c1 = b_perp / nb;
        let c2 = c0.cross(&c1);
        Ok(Matrix3::from_columns(&[c0, c1, c2]))
    }

    pub fn as_array(&self) -> [f64; 6] {
        self.0
    }
}

/// Orientation distance between two unit quaternions, sign-invariant
/// (q and -q denote the same rotation): `min(|q1-q2|, |q1+q2|)`.
pub(crate) fn quaternion_vec_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let qa: &Quaternion<f64> = a.as_ref();
    let qb: &Quaternion<f64> = b.as_ref();
    let d = (qa.coords - qb.coords).norm();
    let s = (qa.coords + qb.coords).norm();
    d.min(s)
}
