use nalgebra::{DVector, Vector3};

use crate::control::{
    execute_plan, forward_kinematics, plan_manipulation, regulate_counted, ControlError,
    ControllerGains, ExecutionConfig, KinematicChain, RobotState, DEFAULT_DT,
};
use crate::geometry::{camera_look_at, DepthPlaneSet, Rot6D};
use crate::pose::{
    estimate_pose, estimate_pose_naive, pose_metrics, EstimatorConfig, PoseEstimate,
};
use crate::scene::{
    canonical_scene, mask_bbox, place_object, render_view, sample_scene, success,
    ArticulatedObject, RenderSettings, RenderedView, SceneConfig, TaskId,
};
use crate::util::{derive_seed, seeded_rng};

use super::policy::{SchedAction, SchedObservation, ViewSummary};
use super::reward::{compute_reward, RewardBreakdown, RewardSnapshot, RewardWeights, N_REWARD_TERMS};
use super::SchedError;

/// Episode interface the trainer drives. Observations are flat vectors so
/// the same loop trains toy diagnostics and the full simulator.
pub trait RolloutEnv {
    fn obs_dim(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<DVector<f64>, SchedError>;
    fn step(&mut self, action: &SchedAction) -> Result<EnvOutcome, SchedError>;
}

#[derive(Debug, Clone)]
pub struct EnvOutcome {
    pub obs: DVector<f64>,
    pub reward: f64,
    pub done: bool,
    pub breakdown: Option<RewardBreakdown>,
    /// Present exactly on the terminal step.
    pub summary: Option<EpisodeSummary>,
}

/// Per-episode aggregates logged by the trainer and the evaluation harness.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeSummary {
    pub success: bool,
    /// Views captured, the initial one included.
    pub views: usize,
    /// Sum of straight-line camera displacements over the episode.
    pub moving_distance: f64,
    /// Final-estimate errors against ground truth; infinite when the
    /// episode ended without any estimate.
    pub rot_err_deg: f64,
    pub trans_err_m: f64,
    pub reward_total: f64,
    /// Per-term sums of weighted contributions, breakdown order.
    pub term_sums: [f64; N_REWARD_TERMS],
    pub steps: usize,
    /// Simulated robot seconds consumed: camera moves plus the terminal
    /// manipulation. Deterministic, unlike wall-clock time.
    pub sim_seconds: f64,
}

/// One-armed diagnostic task: terminating pays 1, moving pays 0. A policy
/// that cannot learn to terminate here cannot learn anything harder.
#[derive(Debug, Clone, Default)]
pub struct BanditEnv;

impl RolloutEnv for BanditEnv {
    fn obs_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> Result<DVector<f64>, SchedError> {
        Ok(DVector::from_element(1, 1.0))
    }

    fn step(&mut self, action: &SchedAction) -> Result<EnvOutcome, SchedError> {
        let reward = if action.terminate { 1.0 } else { 0.0 };
        Ok(EnvOutcome {
            obs: DVector::from_element(1, 1.0),
            reward,
            done: true,
            breakdown: None,
            summary: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SchedulerEnvConfig {
    pub task: TaskId,
    /// Hard cap on captured views; reaching it forces termination.
    pub v_max: usize,
    pub render: RenderSettings,
    pub planes: DepthPlaneSet,
    pub estimator: EstimatorConfig,
    pub weights: RewardWeights,
    pub gains: ControllerGains,
    /// Wall-clock budget of one camera move, seconds.
    pub move_budget: f64,
    pub dt: f64,
    /// Waypoint positions clamp into this axis-aligned box.
    pub workspace_min: Vector3<f64>,
    pub workspace_max: Vector3<f64>,
    /// Look-at points clamp into this box.
    pub look_min: Vector3<f64>,
    pub look_max: Vector3<f64>,
    /// Sample scene appearance and placement per episode; off uses the
    /// canonical midpoint scene every time.
    pub domain_rand: bool,
    /// Multi-view plane-sweep fusion; off falls back to the single-view
    /// constant-depth estimator on the newest view.
    pub fusion: bool,
    /// Terminal manipulation settings (loop mode, disturbance).
    pub exec: ExecutionConfig,
}

impl SchedulerEnvConfig {
    pub fn for_task(task: TaskId) -> Self {
        Self {
            task,
            v_max: 6,
            render: RenderSettings::scheduler(),
            planes: DepthPlaneSet::uniform(0.20, 0.95, 0.0125).expect("static plane range"),
            estimator: EstimatorConfig::default(),
            weights: RewardWeights::default(),
            gains: ControllerGains::default(),
            move_budget: 2.5,
            dt: DEFAULT_DT,
            workspace_min: Vector3::new(0.05, -0.6, 0.1),
            workspace_max: Vector3::new(0.85, 0.6, 0.95),
            look_min: Vector3::new(0.0, -0.7, 0.0),
            look_max: Vector3::new(1.0, 0.7, 0.8),
            domain_rand: true,
            fusion: true,
            exec: ExecutionConfig::default(),
        }
    }
}

fn clamp_box(v: Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(
        v.x.clamp(lo.x, hi.x),
        v.y.clamp(lo.y, hi.y),
        v.z.clamp(lo.z, hi.z),
    )
}

/// The full active-perception episode: the policy steers an eye-on-hand
/// camera (the camera frame IS the end-effector frame), each move runs the
/// impedance controller against its waypoint, each new view re-estimates
/// the object pose, and the terminal step runs the manipulation plan built
/// from the final estimate.
pub struct SchedulerEnv {
    pub cfg: SchedulerEnvConfig,
    chain: KinematicChain,
    state: RobotState,
    scene: SceneConfig,
    object: ArticulatedObject,
    views: Vec<ViewSummary>,
    rendered: Vec<RenderedView>,
    estimate: Option<PoseEstimate>,
    ep_seed: u64,
    estimates_done: usize,
    moving_distance: f64,
    term_sums: [f64; N_REWARD_TERMS],
    reward_total: f64,
    steps: usize,
    sim_seconds: f64,
    done: bool,
}

impl SchedulerEnv {
    pub fn new(cfg: SchedulerEnvConfig) -> Self {
        let chain = KinematicChain::panda_like();
        let state = RobotState::rest(&chain);
        let scene = canonical_scene(cfg.task);
        let object = place_object(&scene);
        Self {
            cfg,
            chain,
            state,
            scene,
            object,
            views: Vec::new(),
            rendered: Vec::new(),
            estimate: None,
            ep_seed: 0,
            estimates_done: 0,
            moving_distance: 0.0,
            term_sums: [0.0; N_REWARD_TERMS],
            reward_total: 0.0,
            steps: 0,
            sim_seconds: 0.0,
            done: true,
        }
    }

    pub fn estimate(&self) -> Option<&PoseEstimate> {
        self.estimate.as_ref()
    }

    pub fn views_taken(&self) -> usize {
        self.views.len()
    }

    /// True object part center; the anchor fixed-pattern schedulers aim at.
    pub fn object_center(&self) -> Vector3<f64> {
        self.object.gt_similarity().1
    }

    fn view_summary(&self, r: &RenderedView) -> ViewSummary {
        let fill = r.mask.count_true() as f64 / (r.mask.width() * r.mask.height()) as f64;
        ViewSummary {
            position: r.camera_pose.translation(),
            look_dir: r.camera_pose.rotation_matrix().column(2).into_owned(),
            bbox: if r.visible {
                mask_bbox(&r.mask).ok()
            } else {
                None
            },
            fill,
        }
    }

    fn capture(&mut self) -> Result<(), SchedError> {
        let cam = forward_kinematics(&self.chain, &self.state.q)?;
        let r = render_view(&self.scene, &self.object, &cam, &self.cfg.render);
        self.views.push(self.view_summary(&r));
        self.rendered.push(r);
        let seed = derive_seed(self.ep_seed, &format!("estimate-{}", self.estimates_done));
        if !self.cfg.fusion {
            // Fusion ablated: single newest view, one depth guess for every
            // pixel, taken at the middle of the hypothesis range.
            let guess = (self.cfg.planes.min_depth() + self.cfg.planes.max_depth()) / 2.0;
            self.estimates_done += 1;
            let view = self.rendered.last().expect("just pushed");
            if let Ok(est) = estimate_pose_naive(view, guess, &self.cfg.estimator, seed) {
                self.estimate = Some(est);
            }
        } else if self.rendered.len() >= 2 {
            self.estimates_done += 1;
            if let Ok(est) =
                estimate_pose(&self.rendered, &self.cfg.planes, &self.cfg.estimator, seed)
            {
                // A failed refinement keeps the previous estimate alive.
                self.estimate = Some(est);
            }
        }
        Ok(())
    }

    fn observation(&self) -> DVector<f64> {
        SchedObservation::encode(
            &self.views,
            self.estimate.as_ref(),
            self.cfg.v_max,
            self.cfg.task,
        )
        .0
    }

    fn record(&mut self, b: &RewardBreakdown) {
        for (sum, t) in self.term_sums.iter_mut().zip(&b.terms) {
            *sum += t.weighted;
        }
        self.reward_total += b.total;
        self.moving_distance += b.term("moving_distance").value;
    }

    fn gt_pose(&self) -> PoseEstimate {
        let (r, t, s) = self.object.gt_similarity();
        PoseEstimate::exact(r, t, s)
    }

    fn terminal_step(&mut self) -> Result<EnvOutcome, SchedError> {
        self.done = true;
        // No estimate means no plan: the episode fails, it does not crash.
        // A controller blowup during manipulation is likewise a failure.
        let task_success = match self.estimate.clone() {
            Some(est) => {
                let plan = plan_manipulation(self.cfg.task, &est);
                self.sim_seconds += plan.total_time;
                match execute_plan(
                    &self.chain,
                    &self.state,
                    &plan,
                    &mut self.object,
                    &self.cfg.exec,
                ) {
                    Ok(_) => success(self.cfg.task, &self.object)?,
                    Err(_) => false,
                }
            }
            None => false,
        };
        let gt = self.gt_pose();
        let (rot_err_deg, trans_err_m) = match &self.estimate {
            Some(est) => {
                let m = pose_metrics(est, &gt);
                (m.rotation_deg, m.translation_term)
            }
            None => (f64::INFINITY, f64::INFINITY),
        };
        let here = self
            .views
            .last()
            .map(|v| v.position)
            .unwrap_or_else(Vector3::zeros);
        let snap = RewardSnapshot {
            p_cam: here,
            p_tar: here,
            q_cam: nalgebra::UnitQuaternion::identity(),
            q_prop: nalgebra::UnitQuaternion::identity(),
            p_lookat: here + Vector3::z(),
            p_obj: gt.translation,
            bbox: None,
            estimate: self
                .estimate
                .as_ref()
                .map(|e| (e.translation, Rot6D::from_matrix(&e.rotation))),
            gt_center: gt.translation,
            gt_orientation: Rot6D::from_matrix(&gt.rotation),
            prev_cam: None,
            move_success: false,
            move_steps: 0,
            dt: self.cfg.dt,
            success: Some(task_success),
            terminal: true,
        };
        let breakdown = compute_reward(&self.cfg.weights, &snap)?;
        self.record(&breakdown);
        let summary = EpisodeSummary {
            success: task_success,
            views: self.views.len(),
            moving_distance: self.moving_distance,
            rot_err_deg,
            trans_err_m,
            reward_total: self.reward_total,
            term_sums: self.term_sums,
            steps: self.steps,
            sim_seconds: self.sim_seconds,
        };
        Ok(EnvOutcome {
            obs: self.observation(),
            reward: breakdown.total,
            done: true,
            breakdown: Some(breakdown),
            summary: Some(summary),
        })
    }

    fn move_step(&mut self, action: &SchedAction) -> Result<EnvOutcome, SchedError> {
        let pos = clamp_box(
            action.position(),
            &self.cfg.workspace_min,
            &self.cfg.workspace_max,
        );
        let mut look = clamp_box(action.look_at(), &self.cfg.look_min, &self.cfg.look_max);
        if (look - pos).norm() < 1e-6 {
            // Degenerate gaze command: point the camera straight down.
            look = pos - Vector3::new(0.0, 0.0, 0.1);
        }
        let target = camera_look_at(&pos, &look);
        let budget_steps = (self.cfg.move_budget / self.cfg.dt).round() as usize;
        let (move_success, move_steps) = match regulate_counted(
            &self.chain,
            &self.state,
            &target,
            &self.cfg.gains,
            self.cfg.move_budget,
            self.cfg.dt,
            None,
        ) {
            Ok((s, converged, n)) => {
                self.state = s;
                (converged, n)
            }
            // Unreachable waypoints burn the whole budget and move nothing.
            Err(ControlError::TargetUnreachable) => (false, budget_steps),
            Err(e) => return Err(e.into()),
        };
        self.sim_seconds += move_steps as f64 * self.cfg.dt;
        let prev_cam = self.views.last().map(|v| v.position);
        self.capture()?;
        let view = self.views.last().expect("capture pushed a view");
        let gt = self.gt_pose();
        let cam_pose = self.rendered.last().expect("capture pushed").camera_pose;
        let snap = RewardSnapshot {
            p_cam: view.position,
            p_tar: pos,
            q_cam: *cam_pose.rotation(),
            q_prop: *camera_look_at(&view.position, &gt.translation).rotation(),
            p_lookat: look,
            p_obj: gt.translation,
            bbox: view.bbox.clone(),
            estimate: self
                .estimate
                .as_ref()
                .map(|e| (e.translation, Rot6D::from_matrix(&e.rotation))),
            gt_center: gt.translation,
            gt_orientation: Rot6D::from_matrix(&gt.rotation),
            prev_cam,
            move_success,
            move_steps,
            dt: self.cfg.dt,
            success: None,
            terminal: false,
        };
        let breakdown = compute_reward(&self.cfg.weights, &snap)?;
        self.record(&breakdown);
        Ok(EnvOutcome {
            obs: self.observation(),
            reward: breakdown.total,
            done: false,
            breakdown: Some(breakdown),
            summary: None,
        })
    }
}

impl RolloutEnv for SchedulerEnv {
    fn obs_dim(&self) -> usize {
        SchedObservation::dim(self.cfg.v_max)
    }

    fn reset(&mut self, seed: u64) -> Result<DVector<f64>, SchedError> {
        self.ep_seed = seed;
        self.scene = if self.cfg.domain_rand {
            let mut rng = seeded_rng(seed, "scene");
            sample_scene(self.cfg.task, &mut rng)
        } else {
            canonical_scene(self.cfg.task)
        };
        self.object = place_object(&self.scene);
        self.state = RobotState::rest(&self.chain);
        self.views.clear();
        self.rendered.clear();
        self.estimate = None;
        self.estimates_done = 0;
        self.moving_distance = 0.0;
        self.term_sums = [0.0; N_REWARD_TERMS];
        self.reward_total = 0.0;
        self.steps = 0;
        self.done = false;
        self.capture()?;
        Ok(self.observation())
    }

    fn step(&mut self, action: &SchedAction) -> Result<EnvOutcome, SchedError> {
        if self.done {
            return Err(SchedError::EpisodeFinished);
        }
        self.steps += 1;
        if action.terminate || self.views.len() >= self.cfg.v_max {
            self.terminal_step()
        } else {
            self.move_step(action)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::reward::TERM_NAMES;

    fn door_env() -> SchedulerEnv {
        SchedulerEnv::new(SchedulerEnvConfig::for_task(TaskId::OpenDoor))
    }

    #[test]
    fn bandit_pays_for_termination() {
        let mut env = BanditEnv;
        let obs = env.reset(0).unwrap();
        assert_eq!(obs.len(), env.obs_dim());
        let out = env.step(&SchedAction::terminate()).unwrap();
        assert_eq!(out.reward, 1.0);
        assert!(out.done);
        let out = env
            .step(&SchedAction::waypoint(Vector3::zeros(), Vector3::x()))
            .unwrap();
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn immediate_termination_fails_cleanly() {
        let mut env = door_env();
        env.reset(11).unwrap();
        // One view can never produce an estimate, so the episode must fail
        // without erroring.
        let out = env.step(&SchedAction::terminate()).unwrap();
        assert!(out.done);
        let s = out.summary.unwrap();
        assert!(!s.success);
        assert_eq!(s.views, 1);
        assert!(s.rot_err_deg.is_infinite());
        assert!(matches!(
            env.step(&SchedAction::terminate()),
            Err(SchedError::EpisodeFinished)
        ));
    }

    #[test]
    fn moves_track_waypoints_and_accumulate_distance() {
        let mut env = door_env();
        env.reset(3).unwrap();
        let object_center = env.gt_pose().translation;
        let eye = object_center + Vector3::new(-0.25, 0.25, 0.30);
        let act = SchedAction::waypoint(eye, object_center);
        let out1 = env.step(&act).unwrap();
        let b1 = out1.breakdown.unwrap();
        assert_eq!(b1.term("move_success").value, 1.0, "first move converges");
        assert!(
            b1.term("move_target_diff").value < 5e-3,
            "tracked waypoint to {}",
            b1.term("move_target_diff").value
        );
        // Repeating the same waypoint barely moves the camera.
        let out2 = env.step(&act).unwrap();
        let b2 = out2.breakdown.unwrap();
        assert!(b2.term("moving_distance").value < 1e-2);
        // The accumulator is exactly the sum of the per-step term values.
        let expect = b1.term("moving_distance").value + b2.term("moving_distance").value;
        assert_eq!(env.moving_distance, expect);
        assert_eq!(env.views_taken(), 3);
        assert!(env.estimate().is_some(), "two views produce an estimate");
    }

    #[test]
    fn scripted_episode_reconciles_summary_with_steps() {
        let mut env = door_env();
        env.reset(7).unwrap();
        let c = env.gt_pose().translation;
        let acts = [
            SchedAction::waypoint(c + Vector3::new(-0.30, 0.18, 0.25), c),
            SchedAction::waypoint(c + Vector3::new(-0.28, -0.20, 0.28), c),
            SchedAction::terminate(),
        ];
        let mut totals = 0.0;
        let mut term_sums = [0.0; N_REWARD_TERMS];
        let mut last = None;
        for act in &acts {
            let out = env.step(act).unwrap();
            let b = out.breakdown.as_ref().unwrap();
            totals += b.total;
            for (s, t) in term_sums.iter_mut().zip(&b.terms) {
                *s += t.weighted;
            }
            last = out.summary;
        }
        let s = last.expect("terminal step yields a summary");
        assert_eq!(s.views, 3);
        assert_eq!(s.steps, 3);
        assert!((s.reward_total - totals).abs() < 1e-9);
        for (k, (got, want)) in s.term_sums.iter().zip(term_sums).enumerate() {
            assert!(
                (got - want).abs() < 1e-12,
                "term {} diverged: {got} vs {want}",
                TERM_NAMES[k]
            );
        }
        assert!(s.rot_err_deg.is_finite());
        assert!(s.trans_err_m.is_finite());
    }

    #[test]
    fn termination_is_forced_at_view_cap() {
        let mut cfg = SchedulerEnvConfig::for_task(TaskId::OpenDoor);
        cfg.v_max = 2;
        let mut env = SchedulerEnv::new(cfg);
        env.reset(5).unwrap();
        let c = env.gt_pose().translation;
        let act = SchedAction::waypoint(c + Vector3::new(-0.3, 0.2, 0.3), c);
        let out = env.step(&act).unwrap();
        assert!(!out.done);
        // Cap reached: the same move action is treated as terminate.
        let out = env.step(&act).unwrap();
        assert!(out.done);
        assert_eq!(out.summary.unwrap().views, 2);
    }

    #[test]
    fn same_seed_same_actions_same_numbers() {
        let run = || -> Vec<f64> {
            let mut env = door_env();
            env.reset(42).unwrap();
            let c = env.gt_pose().translation;
            let acts = [
                SchedAction::waypoint(c + Vector3::new(-0.3, 0.2, 0.3), c),
                SchedAction::terminate(),
            ];
            let mut out = Vec::new();
            for a in &acts {
                let o = env.step(a).unwrap();
                out.push(o.reward);
                out.extend(o.obs.iter());
            }
            out
        };
        assert_eq!(run(), run());
    }
}
