use nalgebra::{Matrix3, Vector2, Vector3};
use rand::seq::SliceRandom;

use crate::geometry::CameraIntrinsics;
use crate::scene::Grid;
use crate::util::seeded_rng;

use super::PoseError;

/// Cap on correspondences fed to the solver; larger sets are subsampled.
pub const MAX_CORRESPONDENCES: usize = 2048;

/// Matched 3D points: `camera` in the reference-camera frame (metric),
/// `canonical` in the object's scale-free canonical frame.
#[derive(Debug, Clone)]
pub struct Correspondences {
    pub camera: Vec<Vector3<f64>>,
    pub canonical: Vec<Vector3<f64>>,
}

impl Correspondences {
    pub fn len(&self) -> usize {
        self.camera.len()
    }

    pub fn is_empty(&self) -> bool {
        self.camera.is_empty()
    }
}

/// Similarity transform mapping canonical coordinates into the solve frame:
/// `p = size * rotation * c + translation`, with fit diagnostics.
#[derive(Debug, Clone)]
pub struct PoseEstimate {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub size: f64,
    pub rmse: f64,
    pub n_inliers: usize,
}

impl PoseEstimate {
    pub fn apply(&self, c: &Vector3<f64>) -> Vector3<f64> {
        self.size * (self.rotation * c) + self.translation
    }
}

/// Collects (camera-frame, canonical) point pairs from masked pixels that
/// carry both a finite fused depth and a finite coordinate prediction.
/// Camera points are unprojected through pixel centers. Sets larger than
/// `cap` are subsampled with a seeded shuffle so downstream solves stay
/// deterministic.
pub fn lift_correspondences(
    coord_map: &Grid<[f64; 3]>,
    mask: &Grid<bool>,
    depth: &Grid<f64>,
    intrinsics: &CameraIntrinsics,
    cap: usize,
    seed: u64,
) -> Result<Correspondences, PoseError> {
    assert_eq!(coord_map.width(), mask.width());
    assert_eq!(coord_map.height(), mask.height());
    assert_eq!(depth.width(), mask.width());
    assert_eq!(depth.height(), mask.height());
    let mut pixels: Vec<(usize, usize)> = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.get(x, y) {
                continue;
            }
            let z = depth.get(x, y);
            let c = coord_map.get(x, y);
            if z.is_finite() && z > 1e-9 && c.iter().all(|v| v.is_finite()) {
                pixels.push((x, y));
            }
        }
    }
    if pixels.len() < 3 {
        return Err(PoseError::TooFewCorrespondences(pixels.len()));
    }
    if pixels.len() > cap {
        let mut rng = seeded_rng(seed, "corr-subsample");
        pixels.shuffle(&mut rng);
        pixels.truncate(cap);
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
    }
    let mut camera = Vec::with_capacity(pixels.len());
    let mut canonical = Vec::with_capacity(pixels.len());
    for (x, y) in pixels {
        let px = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
        let p = intrinsics
            .unproject(&px, depth.get(x, y))
            .expect("depth positivity checked above");
        camera.push(p);
        let c = coord_map.get(x, y);
        canonical.push(Vector3::new(c[0], c[1], c[2]));
    }
    Ok(Correspondences { camera, canonical })
}

fn umeyama(
    canonical: &[Vector3<f64>],
    camera: &[Vector3<f64>],
) -> Result<(Matrix3<f64>, Vector3<f64>, f64), PoseError> {
    let n = canonical.len();
    if n < 3 {
        return Err(PoseError::DegenerateConfiguration);
    }
    let nf = n as f64;
    let mu_c: Vector3<f64> = canonical.iter().sum::<Vector3<f64>>() / nf;
    let mu_m: Vector3<f64> = camera.iter().sum::<Vector3<f64>>() / nf;
    let mut sigma_c = 0.0;
    let mut cov = Matrix3::zeros();
    for (c, m) in canonical.iter().zip(camera) {
        let dc = c - mu_c;
        let dm = m - mu_m;
        sigma_c += dc.norm_squared();
        cov += dm * dc.transpose();
    }
    sigma_c /= nf;
    cov /= nf;
    if sigma_c < 1e-18 {
        return Err(PoseError::DegenerateConfiguration);
    }
    let svd = cov.svd(true, true);
    let u = svd.u.ok_or(PoseError::DegenerateConfiguration)?;
    let v_t = svd.v_t.ok_or(PoseError::DegenerateConfiguration)?;
    // Collinear point sets leave the rotation about the line unconstrained.
    if svd.singular_values[1] < 1e-12 * svd.singular_values[0].max(1e-300) {
        return Err(PoseError::DegenerateConfiguration);
    }
    let mut s_fix = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s_fix[(2, 2)] = -1.0;
    }
    let rotation = u * s_fix * v_t;
    let d = Matrix3::from_diagonal(&svd.singular_values);
    let size = (d * s_fix).trace() / sigma_c;
    if !(size.is_finite() && size > 0.0) {
        return Err(PoseError::DegenerateConfiguration);
    }
    let translation = mu_m - size * (rotation * mu_c);
    Ok((rotation, translation, size))
}

fn residuals(
    canonical: &[Vector3<f64>],
    camera: &[Vector3<f64>],
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    size: f64,
) -> Vec<f64> {
    canonical
        .iter()
        .zip(camera)
        .map(|(c, m)| (size * (rotation * c) + translation - m).norm())
        .collect()
}

fn rmse_of(res: &[f64]) -> f64 {
    (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt()
}

/// Closed-form least-squares similarity fit (rotation forced proper via the
/// SVD sign correction), followed by one trimmed re-fit that discards
/// correspondences whose residual exceeds three times the median residual.
pub fn solve_similarity(corr: &Correspondences) -> Result<PoseEstimate, PoseError> {
    let (rotation, translation, size) = umeyama(&corr.canonical, &corr.camera)?;
    let res = residuals(&corr.canonical, &corr.camera, &rotation, &translation, size);
    let mut sorted = res.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let thresh = 3.0 * median + 1e-12;
    let mut kept_canon = Vec::new();
    let mut kept_cam = Vec::new();
    for (i, r) in res.iter().enumerate() {
        if *r <= thresh {
            kept_canon.push(corr.canonical[i]);
            kept_cam.push(corr.camera[i]);
        }
    }
    if kept_canon.len() >= 3 && kept_canon.len() < corr.len() {
        if let Ok((r2, t2, s2)) = umeyama(&kept_canon, &kept_cam) {
            let res2 = residuals(&kept_canon, &kept_cam, &r2, &t2, s2);
            return Ok(PoseEstimate {
                rotation: r2,
                translation: t2,
                size: s2,
                rmse: rmse_of(&res2),
                n_inliers: kept_canon.len(),
            });
        }
    }
    Ok(PoseEstimate {
        rotation,
        translation,
        size,
        rmse: rmse_of(&res),
        n_inliers: corr.len(),
    })
}
