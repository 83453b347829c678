use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::geometry::{relative_extrinsic, DepthPlaneSet};
use crate::scene::{Grid, RenderedView};
use crate::util::seeded_rng;

use super::solve::{lift_correspondences, solve_similarity, PoseEstimate, MAX_CORRESPONDENCES};
use super::volume::{build_cost_volume, fuse_depth, DEFAULT_TAU};
use super::PoseError;

/// Perturbation applied to the reference coordinate map before lifting,
/// standing in for the prediction error of a learned coordinate regressor.
#[derive(Debug, Clone, Copy)]
pub struct NoiseConfig {
    /// Zero-mean Gaussian sigma per canonical component.
    pub coord_sigma: f64,
    /// Fraction of masked pixels dropped before lifting.
    pub dropout: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            coord_sigma: 0.01,
            dropout: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            coord_sigma: 0.0,
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    /// Soft-argmin temperature.
    pub tau: f64,
    /// Correspondence cap fed to the similarity solve.
    pub max_correspondences: usize,
    /// Pixels whose fusion confidence falls below this are not lifted.
    pub min_confidence: f64,
    pub noise: NoiseConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            max_correspondences: MAX_CORRESPONDENCES,
            min_confidence: 0.0,
            noise: NoiseConfig::default(),
        }
    }
}

/// Intermediate products of [`estimate_pose`], exposed for metric
/// evaluation and debugging dumps.
#[derive(Debug, Clone)]
pub struct EstimateDiagnostics {
    pub depth: Grid<f64>,
    pub confidence: Grid<f64>,
    pub coord: Grid<[f64; 3]>,
    /// Valid (mask, depth, coord) pixels before the subsampling cap.
    pub n_candidates: usize,
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Applies [`NoiseConfig`] to a coordinate map, returning the perturbed map
/// and the surviving mask. Draws only at masked pixels, row-major, so the
/// result is a pure function of (inputs, seed).
pub fn perturb_coord_map(
    coord: &Grid<[f64; 3]>,
    mask: &Grid<bool>,
    noise: &NoiseConfig,
    seed: u64,
) -> (Grid<[f64; 3]>, Grid<bool>) {
    let mut rng = seeded_rng(seed, "coord-noise");
    let mut out = coord.clone();
    let mut kept = mask.clone();
    for y in 0..coord.height() {
        for x in 0..coord.width() {
            if !mask.get(x, y) {
                continue;
            }
            let mut c = coord.get(x, y);
            for v in c.iter_mut() {
                *v += noise.coord_sigma * gauss(&mut rng);
            }
            out.set(x, y, c);
            if noise.dropout > 0.0 && rng.random::<f64>() < noise.dropout {
                kept.set(x, y, false);
            }
        }
    }
    (out, kept)
}

fn count_candidates(coord: &Grid<[f64; 3]>, mask: &Grid<bool>, depth: &Grid<f64>) -> usize {
    let mut n = 0;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let z = depth.get(x, y);
            if mask.get(x, y)
                && z.is_finite()
                && z > 0.0
                && coord.get(x, y).iter().all(|v| v.is_finite())
            {
                n += 1;
            }
        }
    }
    n
}

fn to_world(est: PoseEstimate, reference: &RenderedView) -> PoseEstimate {
    let r_cam = reference.camera_pose.rotation_matrix();
    PoseEstimate {
        rotation: r_cam * est.rotation,
        translation: reference.camera_pose.transform_point(&est.translation),
        size: est.size,
        rmse: est.rmse,
        n_inliers: est.n_inliers,
    }
}

/// Multi-view pose estimation: the last view is the reference, earlier
/// views are warped into it over the depth hypotheses, depth is fused by
/// soft-argmin, and a similarity transform is solved from lifted
/// correspondences. The estimate is returned in the world frame.
///
/// Relative extrinsics come from the recorded camera poses, standing in
/// for arm kinematics (exact in simulation).
pub fn estimate_pose(
    views: &[RenderedView],
    planes: &DepthPlaneSet,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<PoseEstimate, PoseError> {
    estimate_pose_detailed(views, planes, cfg, seed).map(|(est, _)| est)
}

pub fn estimate_pose_detailed(
    views: &[RenderedView],
    planes: &DepthPlaneSet,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<(PoseEstimate, EstimateDiagnostics), PoseError> {
    if views.len() < 2 {
        return Err(PoseError::InsufficientViews(views.len()));
    }
    let reference = views.last().expect("len checked");
    let sources: Vec<&RenderedView> = views[..views.len() - 1].iter().collect();
    let rels: Vec<_> = sources
        .iter()
        .map(|s| relative_extrinsic(&s.camera_pose, &reference.camera_pose))
        .collect();
    let volume = build_cost_volume(reference, &sources, &rels, planes)?;
    let (depth, confidence) = fuse_depth(&volume, cfg.tau);
    let (coord, mut mask) = perturb_coord_map(&reference.gt_coord, &reference.mask, &cfg.noise, seed);
    if cfg.min_confidence > 0.0 {
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if mask.get(x, y) && confidence.get(x, y) < cfg.min_confidence {
                    mask.set(x, y, false);
                }
            }
        }
    }
    let n_candidates = count_candidates(&coord, &mask, &depth);
    let corr = lift_correspondences(
        &coord,
        &mask,
        &depth,
        &reference.intrinsics,
        cfg.max_correspondences,
        seed,
    )?;
    let est = to_world(solve_similarity(&corr)?, reference);
    let diag = EstimateDiagnostics {
        depth,
        confidence,
        coord,
        n_candidates,
    };
    Ok((est, diag))
}

/// Single-view fallback: no fusion, every masked pixel assumed at one
/// constant depth. Exists to quantify what the multi-view machinery buys.
pub fn estimate_pose_naive(
    view: &RenderedView,
    depth_guess: f64,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<PoseEstimate, PoseError> {
    let (coord, mask) = perturb_coord_map(&view.gt_coord, &view.mask, &cfg.noise, seed);
    let depth = Grid::filled(view.mask.width(), view.mask.height(), depth_guess);
    let corr = lift_correspondences(
        &coord,
        &mask,
        &depth,
        &view.intrinsics,
        cfg.max_correspondences,
        seed,
    )?;
    Ok(to_world(solve_similarity(&corr)?, view))
}

/// Pose-error record: Frobenius rotation distance, Euclidean translation
/// distance, absolute scale difference, their sum, and the geodesic
/// rotation angle in degrees.
#[derive(Debug, Clone, Copy)]
pub struct PoseMetrics {
    pub rotation_term: f64,
    pub translation_term: f64,
    pub scale_term: f64,
    pub sum: f64,
    pub rotation_deg: f64,
}

pub fn pose_metrics(est: &PoseEstimate, gt: &PoseEstimate) -> PoseMetrics {
    let rotation_term = (est.rotation - gt.rotation).norm();
    let translation_term = (est.translation - gt.translation).norm();
    let scale_term = (est.size - gt.size).abs();
    let cos = ((est.rotation * gt.rotation.transpose()).trace() - 1.0) / 2.0;
    let rotation_deg = cos.clamp(-1.0, 1.0).acos().to_degrees();
    PoseMetrics {
        rotation_term,
        translation_term,
        scale_term,
        sum: rotation_term + translation_term + scale_term,
        rotation_deg,
    }
}

impl PoseEstimate {
    /// Ground-truth carrier for metric comparisons.
    pub fn exact(rotation: Matrix3<f64>, translation: Vector3<f64>, size: f64) -> Self {
        Self {
            rotation,
            translation,
            size,
            rmse: 0.0,
            n_inliers: 0,
        }
    }
}

/// Mean absolute error of coordinate and depth maps over masked pixels
/// where both prediction and ground truth are finite. The coordinate term
/// is the per-pixel L1 norm over the three components.
#[derive(Debug, Clone, Copy)]
pub struct MapMetrics {
    pub coord_mae: f64,
    pub depth_mae: f64,
    pub n_pixels: usize,
}

pub fn map_metrics(
    pred_coord: &Grid<[f64; 3]>,
    pred_depth: &Grid<f64>,
    gt_coord: &Grid<[f64; 3]>,
    gt_depth: &Grid<f64>,
    mask: &Grid<bool>,
) -> Result<MapMetrics, PoseError> {
    assert_eq!(pred_coord.width(), mask.width());
    assert_eq!(gt_coord.width(), mask.width());
    assert_eq!(pred_depth.width(), mask.width());
    assert_eq!(gt_depth.width(), mask.width());
    let mut coord_sum = 0.0;
    let mut depth_sum = 0.0;
    let mut n = 0usize;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.get(x, y) {
                continue;
            }
            let pc = pred_coord.get(x, y);
            let gc = gt_coord.get(x, y);
            let pd = pred_depth.get(x, y);
            let gd = gt_depth.get(x, y);
            if !pc.iter().chain(gc.iter()).all(|v| v.is_finite())
                || !pd.is_finite()
                || !gd.is_finite()
            {
                continue;
            }
            coord_sum += (pc[0] - gc[0]).abs() + (pc[1] - gc[1]).abs() + (pc[2] - gc[2]).abs();
            depth_sum += (pd - gd).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(PoseError::EmptyMask);
    }
    Ok(MapMetrics {
        coord_mae: coord_sum / n as f64,
        depth_mae: depth_sum / n as f64,
        n_pixels: n,
    })
}
