use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, GeometryError, RigidPose};

const MIN_PLANE_DEPTH: f64 = 1e-6;

/// Uniformly spaced fronto-parallel depth hypotheses, in meters along the
/// reference camera's principal axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPlaneSet {
    depths: Vec<f64>,
}

impl DepthPlaneSet {
    /// Inclusive uniform grid: d_min, d_min + step, ... up to d_max.
    pub fn uniform(d_min: f64, d_max: f64, step: f64) -> Result<Self, GeometryError> {
        if !(d_min.is_finite() && d_max.is_finite() && step.is_finite()) {
            return Err(GeometryError::InvalidPlaneSet(
                "bounds and step must be finite".to_string(),
            ));
        }
        if d_min < MIN_PLANE_DEPTH {
            return Err(GeometryError::InvalidPlaneSet(format!(
                "minimum depth {d_min} is below {MIN_PLANE_DEPTH}"
            )));
        }
        if d_max < d_min {
            return Err(GeometryError::InvalidPlaneSet(format!(
                "maximum depth {d_max} is below minimum {d_min}"
            )));
        }
        if step <= 0.0 {
            return Err(GeometryError::InvalidPlaneSet(format!(
                "step {step} must be positive"
            )));
        }
        // The epsilon keeps d_max itself in the set when (d_max-d_min)/step
        // lands a hair under an integer.
        let count = ((d_max - d_min) / step + 1e-9).floor() as usize + 1;
        let depths = (0..count).map(|k| d_min + k as f64 * step).collect();
        Ok(Self { depths })
    }

    /// Default working range for a desk-scale scene: 0.1 m to 2.4 m every
    /// 0.1 m, 24 hypotheses.
    pub fn desk_range() -> Self {
        Self::uniform(0.1, 2.4, 0.1).expect("constant range is valid")
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn min_depth(&self) -> f64 {
        self.depths[0]
    }

    pub fn max_depth(&self) -> f64 {
        *self.depths.last().expect("plane set is nonempty")
    }
}

/// Homography induced by the fronto-parallel plane at `depth` in the
/// reference camera.
///
/// `rel` maps source-camera coordinates into reference-camera coordinates
/// (see [`super::relative_extrinsic`]). The returned matrix maps reference
/// pixel homogeneous coordinates to source pixel coordinates, so it warps
/// source-image content onto the reference grid. With `rel` the identity the
/// result is the identity for every depth; as `depth` grows the parallax
/// term decays and the map tends to the pure-rotation homography.
pub fn homography_for_depth(
    intrinsics: &CameraIntrinsics,
    rel: &RigidPose,
    depth: f64,
) -> Result<Matrix3<f64>, GeometryError> {
    if !(depth.is_finite() && depth >= MIN_PLANE_DEPTH) {
        return Err(GeometryError::DegenerateDepth(depth));
    }
    let k = intrinsics.matrix();
    let k_inv = Matrix3::new(
        1.0 / intrinsics.fx,
        0.0,
        -intrinsics.cx / intrinsics.fx,
        0.0,
        1.0 / intrinsics.fy,
        -intrinsics.cy / intrinsics.fy,
        0.0,
        0.0,
        1.0,
    );
    let r_t = rel.rotation_matrix().transpose();
    let t = rel.translation();
    let n = Vector3::new(0.0, 0.0, 1.0);
    // X_src = Rᵀ(X_ref - t); on the plane n·X_ref = depth, so
    // X_src ∝ Rᵀ(I - t nᵀ/depth) X_ref.
    let mid = Matrix3::identity() - t * n.transpose() / depth;
    Ok(k * r_t * mid * k_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{camera_look_at, relative_extrinsic};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn apply_h(h: &Matrix3<f64>, px: &Vector2<f64>) -> Vector2<f64> {
        let v = h * Vector3::new(px.x, px.y, 1.0);
        Vector2::new(v.x / v.z, v.y / v.z)
    }

    #[test]
    fn desk_range_has_24_planes() {
        let set = DepthPlaneSet::desk_range();
        assert_eq!(set.len(), 24);
        assert_abs_diff_eq!(set.min_depth(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(set.max_depth(), 2.4, epsilon = 1e-9);
        for (k, d) in set.depths().iter().enumerate() {
            assert_abs_diff_eq!(*d, 0.1 + k as f64 * 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_validation() {
        assert!(DepthPlaneSet::uniform(0.0, 1.0, 0.1).is_err());
        assert!(DepthPlaneSet::uniform(1.0, 0.5, 0.1).is_err());
        assert!(DepthPlaneSet::uniform(0.1, 1.0, 0.0).is_err());
        assert!(DepthPlaneSet::uniform(0.1, 1.0, -0.1).is_err());
        assert!(DepthPlaneSet::uniform(0.1, f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn uniform_single_plane() {
        let set = DepthPlaneSet::uniform(0.5, 0.5, 0.1).unwrap();
        assert_eq!(set.depths(), &[0.5]);
    }

    #[test]
    fn identity_extrinsic_gives_identity_homography() {
        let k = CameraIntrinsics::centered(300.0, 256, 256).unwrap();
        for depth in [0.1, 0.7, 2.4] {
            let h = homography_for_depth(&k, &RigidPose::identity(), depth).unwrap();
            assert_abs_diff_eq!(h, Matrix3::identity(), epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_depth_rejected() {
        let k = CameraIntrinsics::centered(300.0, 256, 256).unwrap();
        let rel = RigidPose::from_translation(Vector3::new(0.1, 0.0, 0.0));
        assert!(matches!(
            homography_for_depth(&k, &rel, 0.0),
            Err(GeometryError::DegenerateDepth(_))
        ));
        assert!(matches!(
            homography_for_depth(&k, &rel, -0.5),
            Err(GeometryError::DegenerateDepth(_))
        ));
        assert!(matches!(
            homography_for_depth(&k, &rel, f64::NAN),
            Err(GeometryError::DegenerateDepth(_))
        ));
    }

    /// Points sampled on the hypothesis plane must reproject through the
    /// homography to the same pixel as direct projection into the source
    /// camera, within 1e-6 px.
    #[test]
    fn plane_warp_matches_direct_projection() {
        let k = CameraIntrinsics::centered(400.0, 256, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let ref_eye = Vector3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(0.5..1.0),
            );
            let src_eye = ref_eye
                + Vector3::new(
                    rng.random_range(-0.15..0.15),
                    rng.random_range(-0.15..0.15),
                    rng.random_range(-0.1..0.1),
                );
            let target = Vector3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            );
            let cam_ref = camera_look_at(&ref_eye, &target);
            let cam_src = camera_look_at(&src_eye, &(target + Vector3::new(0.02, -0.01, 0.0)));
            let rel = relative_extrinsic(&cam_src, &cam_ref);
            let depth = rng.random_range(0.4..1.5);
            let h = homography_for_depth(&k, &rel, depth).unwrap();

            for _ in 0..25 {
                let px_ref =
                    Vector2::new(rng.random_range(20.0..236.0), rng.random_range(20.0..236.0));
                // Reference-frame point on the plane z = depth through this pixel.
                let p_ref_cam = k.unproject(&px_ref, depth).unwrap();
                let p_world = cam_ref.transform_point(&p_ref_cam);
                let p_src_cam = cam_src.inverse().transform_point(&p_world);
                if p_src_cam.z < 0.05 {
                    continue;
                }
                let px_direct = k.project(&p_src_cam).unwrap();
                let px_h = apply_h(&h, &px_ref);
                assert_abs_diff_eq!(px_h, px_direct, epsilon = 1e-6);
            }
        }
    }

    /// As depth grows the homography approaches the pure-rotation map
    /// K Rᵀ K⁻¹.
    #[test]
    fn far_plane_approaches_rotation_homography() {
        let k = CameraIntrinsics::centered(400.0, 256, 256).unwrap();
        let cam_ref = camera_look_at(&Vector3::new(0.0, -0.5, 0.7), &Vector3::zeros());
        let cam_src = camera_look_at(&Vector3::new(0.2, -0.45, 0.72), &Vector3::zeros());
        let rel = relative_extrinsic(&cam_src, &cam_ref);
        let h_far = homography_for_depth(&k, &rel, 1e9).unwrap();
        let h_inf = k.matrix() * rel.rotation_matrix().transpose() * k.matrix().try_inverse().unwrap();
        let scale = h_inf[(2, 2)] / h_far[(2, 2)];
        assert_abs_diff_eq!(h_far * scale, h_inf, epsilon = 1e-6);
    }
}
