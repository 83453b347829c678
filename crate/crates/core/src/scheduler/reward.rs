use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Rot6D;
use crate::scene::BBox;

use super::SchedError;

/// Reference point for the camera-travel penalty: 0.9 m above the arm base.
pub const PROP_HEIGHT: f64 = 0.9;

/// View-diversity indicator threshold on the inner product of view
/// directions (cosine of roughly 72.5 degrees when normalized).
pub const DIVERSITY_THRESHOLD: f64 = 0.3;

pub const N_REWARD_TERMS: usize = 14;

/// Names of the reward terms, in breakdown order. Shared by the curve CSV
/// header and the per-term logging.
pub const TERM_NAMES: [&str; N_REWARD_TERMS] = [
    "move_target_diff",
    "move_success",
    "move_period",
    "distance_prop",
    "orientation_cam",
    "look_at_reg",
    "bbox_mid",
    "bbox_boundary",
    "object_in_view",
    "center",
    "orientation_pose",
    "view_diversity",
    "moving_distance",
    "success",
];

/// Weights of the shaping terms. All coefficients are non-negative; terms
/// named penalties enter the total with a minus sign. The moving-distance
/// weight is not stored: it is always `alpha * precision`, so the
/// accuracy/efficiency ratio cannot drift from its declared value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    /// Shared weight of the two pose-precision rewards (center and
    /// orientation); the denominator of alpha.
    pub precision: f64,
    /// Ratio of the moving-distance penalty weight to `precision`.
    pub alpha: f64,
    pub move_target_diff: f64,
    pub move_success: f64,
    pub move_period: f64,
    pub distance_prop: f64,
    pub orientation_cam: f64,
    pub look_at_reg: f64,
    pub bbox_mid: f64,
    pub bbox_boundary: f64,
    pub object_in_view: f64,
    pub view_diversity: f64,
    /// Terminal bonus weight on task success.
    pub success_bonus: f64,
    /// Evaluate the diversity indicator on unit directions (default) or on
    /// raw difference vectors.
    pub normalized_diversity: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            precision: 1.0,
            alpha: 0.1,
            move_target_diff: 0.1,
            move_success: 0.1,
            move_period: 0.1,
            distance_prop: 0.1,
            orientation_cam: 0.1,
            look_at_reg: 0.1,
            bbox_mid: 0.1,
            bbox_boundary: 0.1,
            object_in_view: 0.1,
            view_diversity: 0.1,
            success_bonus: 1.0,
            normalized_diversity: true,
        }
    }
}

impl RewardWeights {
    /// The moving-distance penalty weight, derived so that
    /// alpha = moving_distance / precision holds by construction.
    pub fn moving_distance(&self) -> f64 {
        self.alpha * self.precision
    }
}

/// Everything one reward evaluation reads. Optional fields model stages of
/// the episode where a quantity does not exist yet (no pose estimate before
/// the second view, no previous camera before the second move, success only
/// on the terminal step); their terms contribute zero.
#[derive(Debug, Clone)]
pub struct RewardSnapshot {
    /// Achieved camera position after the move.
    pub p_cam: Vector3<f64>,
    /// Commanded waypoint position.
    pub p_tar: Vector3<f64>,
    pub q_cam: UnitQuaternion<f64>,
    /// Orientation that would face the object center exactly.
    pub q_prop: UnitQuaternion<f64>,
    /// Commanded look-at point.
    pub p_lookat: Vector3<f64>,
    /// True object center, the anchor of view directions.
    pub p_obj: Vector3<f64>,
    /// None when the object is not in the current view.
    pub bbox: Option<BBox>,
    /// Predicted (center, orientation); None before the first estimate.
    pub estimate: Option<(Vector3<f64>, Rot6D)>,
    pub gt_center: Vector3<f64>,
    pub gt_orientation: Rot6D,
    /// Previous camera position; None on the first move.
    pub prev_cam: Option<Vector3<f64>>,
    pub move_success: bool,
    /// Controller steps the move consumed.
    pub move_steps: usize,
    /// Controller step size in seconds.
    pub dt: f64,
    /// Terminal task outcome; None on non-terminal steps.
    pub success: Option<bool>,
    /// Terminal steps carry no camera motion, so every shaping term reads
    /// zero and only the precision rewards and the success bonus remain.
    pub terminal: bool,
}

/// One reward term: its raw value per the shaping formula and its weighted,
/// signed contribution to the total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermRecord {
    pub name: &'static str,
    pub value: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone)]
pub struct RewardBreakdown {
    pub terms: [TermRecord; N_REWARD_TERMS],
    pub total: f64,
}

impl RewardBreakdown {
    pub fn term(&self, name: &str) -> &TermRecord {
        self.terms
            .iter()
            .find(|t| t.name == name)
            .expect("term names are fixed")
    }
}

fn finite3(v: &Vector3<f64>, name: &'static str) -> Result<(), SchedError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SchedError::MissingSnapshotField(name))
    }
}

/// Indicator that two view directions (camera minus object) differ enough:
/// their inner product, on unit vectors by default, exceeds
/// [`DIVERSITY_THRESHOLD`]. Note the reward favors SIMILAR directions under
/// the literal formula; it reads as a small movement prior between
/// consecutive views.
pub fn view_diversity(
    p_cam_new: &Vector3<f64>,
    p_cam_prev: &Vector3<f64>,
    p_obj: &Vector3<f64>,
    normalized: bool,
) -> Result<f64, SchedError> {
    let a = p_cam_new - p_obj;
    let b = p_cam_prev - p_obj;
    if a.norm() < 1e-12 || b.norm() < 1e-12 {
        return Err(SchedError::ZeroLengthDirection);
    }
    let dot = if normalized {
        a.normalize().dot(&b.normalize())
    } else {
        a.dot(&b)
    };
    Ok(if dot > DIVERSITY_THRESHOLD { 1.0 } else { 0.0 })
}

/// Weighted shaping reward. Every term follows its stated formula exactly;
/// the total is the sum of the returned per-term contributions, nothing
/// else, so the breakdown always reconciles.
pub fn compute_reward(
    weights: &RewardWeights,
    snap: &RewardSnapshot,
) -> Result<RewardBreakdown, SchedError> {
    finite3(&snap.p_cam, "p_cam")?;
    finite3(&snap.p_tar, "p_tar")?;
    finite3(&snap.p_lookat, "p_lookat")?;
    finite3(&snap.p_obj, "p_obj")?;
    finite3(&snap.gt_center, "gt_center")?;
    if !snap.dt.is_finite() || snap.dt <= 0.0 {
        return Err(SchedError::MissingSnapshotField("dt"));
    }

    let shaping = if snap.terminal {
        None
    } else {
        let move_target_diff = (snap.p_cam - snap.p_tar).norm();
        let move_success = if snap.move_success { 1.0 } else { 0.0 };
        let move_period = snap.move_steps as f64 * snap.dt;
        let p_prop = Vector3::new(0.0, 0.0, PROP_HEIGHT);
        let distance_prop = (snap.p_cam - p_prop).norm();
        // Quaternion dot folded onto one hemisphere: q and -q are one rotation.
        let orientation_cam = snap.q_cam.as_ref().dot(snap.q_prop.as_ref()).abs();
        let look_at_reg = ((snap.p_lookat - snap.p_tar).norm() - 1.0).powi(2);
        let (bbox_mid, bbox_boundary, object_in_view) = match &snap.bbox {
            Some(b) => {
                let mid = b.mid();
                let mid_dist = ((mid[0] - 0.5).powi(2) + (mid[1] - 0.5).powi(2)).sqrt();
                let boundary = [b.l <= 0.1, b.r >= 0.9, b.d <= 0.1, b.u >= 0.9]
                    .iter()
                    .filter(|&&hit| hit)
                    .count() as f64;
                (mid_dist, boundary, 1.0)
            }
            None => (0.0, 0.0, 0.0),
        };
        let (diversity, moving_distance) = match &snap.prev_cam {
            Some(prev) => (
                view_diversity(&snap.p_cam, prev, &snap.p_obj, weights.normalized_diversity)?,
                (snap.p_cam - prev).norm(),
            ),
            None => (0.0, 0.0),
        };
        Some([
            move_target_diff,
            move_success,
            move_period,
            distance_prop,
            orientation_cam,
            look_at_reg,
            bbox_mid,
            bbox_boundary,
            object_in_view,
            diversity,
            moving_distance,
        ])
    };
    let [move_target_diff, move_success, move_period, distance_prop, orientation_cam, look_at_reg, bbox_mid, bbox_boundary, object_in_view, diversity, moving_distance] =
        shaping.unwrap_or([0.0; 11]);
    let (center, orientation_pose) = match &snap.estimate {
        Some((p_pred, o_pred)) => {
            finite3(p_pred, "p_pred")?;
            let dp = (p_pred - snap.gt_center).norm_squared();
            let mut do2 = 0.0;
            for k in 0..6 {
                let d = o_pred.0[k] - snap.gt_orientation.0[k];
                do2 += d * d;
            }
            (1.0 / (1.0 + dp), 1.0 / (1.0 + do2))
        }
        None => (0.0, 0.0),
    };
    let success = match snap.success {
        Some(true) => 1.0,
        _ => 0.0,
    };

    let rec = |name: &'static str, value: f64, weight: f64, sign: f64| TermRecord {
        name,
        value,
        weighted: sign * weight * value,
    };
    let terms = [
        rec("move_target_diff", move_target_diff, weights.move_target_diff, -1.0),
        rec("move_success", move_success, weights.move_success, 1.0),
        rec("move_period", move_period, weights.move_period, -1.0),
        rec("distance_prop", distance_prop, weights.distance_prop, -1.0),
        rec("orientation_cam", orientation_cam, weights.orientation_cam, 1.0),
        rec("look_at_reg", look_at_reg, weights.look_at_reg, -1.0),
        rec("bbox_mid", bbox_mid, weights.bbox_mid, -1.0),
        rec("bbox_boundary", bbox_boundary, weights.bbox_boundary, -1.0),
        rec("object_in_view", object_in_view, weights.object_in_view, 1.0),
        rec("center", center, weights.precision, 1.0),
        rec("orientation_pose", orientation_pose, weights.precision, 1.0),
        rec("view_diversity", diversity, weights.view_diversity, 1.0),
        rec("moving_distance", moving_distance, weights.moving_distance(), -1.0),
        rec("success", success, weights.success_bonus, 1.0),
    ];
    let total = terms.iter().map(|t| t.weighted).sum();
    Ok(RewardBreakdown { terms, total })
}
