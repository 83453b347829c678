use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, RigidPose};

const MIN_DEPTH: f64 = 1e-9;

/// Pinhole intrinsics. Focal lengths and principal point are in pixels;
/// pixel (u, v) covers the unit square with center at (u + 0.5, v + 0.5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point must be finite, got cx={cx} cy={cy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "image size must be nonzero, got {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square-pixel intrinsics with the principal point at the image center.
    pub fn centered(f: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Projects a camera-frame point to pixel coordinates.
    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
        if p.z <= MIN_DEPTH {
            return Err(GeometryError::NonPositiveDepth(p.z));
        }
        Ok(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Camera-frame point at `depth` along +z through the given pixel position.
    pub fn unproject(&self, px: &Vector2<f64>, depth: f64) -> Result<Vector3<f64>, GeometryError> {
        if depth <= MIN_DEPTH {
            return Err(GeometryError::NonPositiveDepth(depth));
        }
        Ok(Vector3::new(
            (px.x - self.cx) / self.fx * depth,
            (px.y - self.cy) / self.fy * depth,
            depth,
        ))
    }

    /// Unit ray through the center of pixel (u, v).
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vector3<f64> {
        let d = Vector3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        );
        d / d.norm()
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

/// Camera-to-world pose looking from `eye` toward `target`.
///
/// Optical axis is +z, x points right, y points down. The image up direction
/// follows world +z; when the view direction is parallel to world +z within
/// 1e-9, world +x is used as the fallback up so the frame stays defined.
pub fn camera_look_at(eye: &Vector3<f64>, target: &Vector3<f64>) -> RigidPose {
    let forward = target - eye;
    let n = forward.norm();
    // Degenerate eye==target keeps the identity orientation.
    if n < 1e-12 {
        return RigidPose::from_translation(*eye);
    }
    let z_cam = forward / n;
    let up_world = if z_cam.cross(&Vector3::z()).norm() < 1e-9 {
        Vector3::x()
    } else {
        Vector3::z()
    };
    let x_cam = z_cam.cross(&up_world).normalize();
    let y_cam = z_cam.cross(&x_cam);
    let r = Matrix3::from_columns(&[x_cam, y_cam, z_cam]);
    RigidPose::new(
        UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r)),
        *eye,
    )
}
