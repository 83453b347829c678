use nalgebra::{DMatrix, DVector, Matrix6, Matrix6xX, UnitQuaternion, Vector3, Vector6};

use super::chain::{forward_kinematics, jacobian, pose_error, KinematicChain, RobotState};
use super::ControlError;
use crate::geometry::RigidPose;

pub const DEFAULT_DT: f64 = 1e-3;

/// Task-space stiffness/damping plus the trajectory-prediction horizons.
/// Defaults are tuned for the `panda_like` chain: stiffness 400 N/m and
/// 30 N m/rad with near-critical damping against its task-space inertia,
/// and k2 = k1^2 / 2 so the predicted target is a second-order Taylor step
/// of k1 seconds along the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    /// Stiffness: rows 0..3 N/m, rows 3..6 N m/rad. All entries >= 0.
    pub k: Vector6<f64>,
    /// Damping on the end-effector twist, same row split.
    pub b: Vector6<f64>,
    /// Velocity lookahead, seconds.
    pub k1: f64,
    /// Acceleration lookahead, seconds squared.
    pub k2: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k: Vector6::new(400.0, 400.0, 400.0, 30.0, 30.0, 30.0),
            b: Vector6::new(70.0, 70.0, 70.0, 8.0, 8.0, 8.0),
            k1: 0.1,
            k2: 0.005,
        }
    }
}

impl ControllerGains {
    pub fn without_prediction(mut self) -> Self {
        self.k1 = 0.0;
        self.k2 = 0.0;
        self
    }
}

/// End-effector trajectory sample with analytic derivatives; twist rows
/// 0..3 are linear, 3..6 angular, matching the Jacobian split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub p: RigidPose,
    pub pdot: Vector6<f64>,
    pub pddot: Vector6<f64>,
}

impl TrajectoryState {
    pub fn hold(p: RigidPose) -> Self {
        Self { p, pdot: Vector6::zeros(), pddot: Vector6::zeros() }
    }
}

/// Joint torques tau = J^T(-k .* (X; Rerr) - b .* (J qdot)) + N. Gains act
/// elementwise on the stacked 6-error and the end-effector twist.
pub fn impedance_torque(
    j: &Matrix6xX<f64>,
    x_err: &Vector3<f64>,
    r_err: &Vector3<f64>,
    qdot: &DVector<f64>,
    gains: &ControllerGains,
    n_term: &DVector<f64>,
) -> Result<DVector<f64>, ControlError> {
    let n = j.ncols();
    if qdot.len() != n || n_term.len() != n {
        return Err(ControlError::DimensionMismatch { expected: n, got: qdot.len().min(n_term.len()) });
    }
    let mut e = Vector6::zeros();
    e.fixed_rows_mut::<3>(0).copy_from(x_err);
    e.fixed_rows_mut::<3>(3).copy_from(r_err);
    let twist = j * qdot;
    let f = -gains.k.component_mul(&e) - gains.b.component_mul(&twist);
    Ok(j.transpose() * f + n_term)
}

/// Posture torque projected into the Jacobian nullspace through the
/// dynamically consistent pseudoinverse under diagonal inertia:
/// N = (I - J^T Jbar^T)(-k_n (q - q_rest) - b_n qdot). A small ridge keeps
/// the 6x6 system invertible near singular postures; if inversion still
/// fails the term degrades to zero rather than fighting the task.
pub fn nullspace_posture(
    j: &Matrix6xX<f64>,
    inertia: &DVector<f64>,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    q_rest: &DVector<f64>,
    k_n: f64,
    b_n: f64,
) -> DVector<f64> {
    let n = j.ncols();
    let u = -(q - q_rest) * k_n - qdot * b_n;
    let m_inv = DMatrix::from_diagonal(&inertia.map(|m| 1.0 / m));
    let a: Matrix6<f64> = j * &m_inv * j.transpose() + Matrix6::identity() * 1e-9;
    let Some(a_inv) = a.try_inverse() else {
        return DVector::zeros(n);
    };
    let jbar = m_inv * j.transpose() * a_inv;
    let projected = j.transpose() * (jbar.transpose() * &u);
    u - projected
}

/// Anticipatory target p* = p + k1 pdot + k2 pddot; the rotational part
/// advances by the exponential map of (k1 w + k2 wdot) so the update stays
/// on the rotation group and reduces to the identity when k1 = k2 = 0.
pub fn trajectory_target(ts: &TrajectoryState, gains: &ControllerGains) -> RigidPose {
    let v = ts.pdot.fixed_rows::<3>(0);
    let a = ts.pddot.fixed_rows::<3>(0);
    let t = ts.p.translation() + v * gains.k1 + a * gains.k2;
    let w = ts.pdot.fixed_rows::<3>(3) * gains.k1 + ts.pddot.fixed_rows::<3>(3) * gains.k2;
    let r = UnitQuaternion::from_scaled_axis(w.into_owned()) * ts.p.rotation();
    RigidPose::new(r, t)
}

/// Semi-implicit Euler on qddot = M^{-1}(tau - c qdot); joint limits clamp
/// the position and zero the offending joint's velocity.
pub fn step_dynamics(
    chain: &KinematicChain,
    state: &RobotState,
    torque: &DVector<f64>,
    dt: f64,
) -> Result<RobotState, ControlError> {
    if dt <= 0.0 {
        return Err(ControlError::NonPositiveDt(dt));
    }
    if dt > 0.01 {
        return Err(ControlError::DtTooLarge(dt));
    }
    let n = chain.n_joints();
    if state.q.len() != n || torque.len() != n {
        return Err(ControlError::DimensionMismatch { expected: n, got: state.q.len().min(torque.len()) });
    }
    let mut qdot = state.qdot.clone();
    let mut q = state.q.clone();
    for i in 0..n {
        let qdd = (torque[i] - chain.friction[i] * qdot[i]) / chain.inertia[i];
        qdot[i] += dt * qdd;
        q[i] += dt * qdot[i];
        let [lo, hi] = chain.joints()[i].limits;
        if q[i] < lo {
            q[i] = lo;
            qdot[i] = 0.0;
        } else if q[i] > hi {
            q[i] = hi;
            qdot[i] = 0.0;
        }
    }
    Ok(RobotState { q, qdot })
}

const CONVERGE_TRANS: f64 = 1e-3;
const CONVERGE_ROT: f64 = 0.5 * std::f64::consts::PI / 180.0;

/// Damped-least-squares reachability probe: true when an IK descent from q
/// reaches the target within the regulation tolerances.
fn ik_reaches(chain: &KinematicChain, q0: &DVector<f64>, target: &RigidPose) -> bool {
    let mut q = q0.clone();
    let lambda2 = 0.05 * 0.05;
    for _ in 0..300 {
        let Ok(pose) = forward_kinematics(chain, &q) else { return false };
        let e = pose_error(&pose, target);
        if e.fixed_rows::<3>(0).norm() < CONVERGE_TRANS && e.fixed_rows::<3>(3).norm() < CONVERGE_ROT
        {
            return true;
        }
        let Ok(j) = jacobian(chain, &q) else { return false };
        let a = &j * j.transpose() + Matrix6::identity() * lambda2;
        let Some(a_inv) = a.try_inverse() else { return false };
        let dq = j.transpose() * (a_inv * (-e)) * 0.8;
        q += dq;
        for (i, joint) in chain.joints().iter().enumerate() {
            q[i] = q[i].clamp(joint.limits[0], joint.limits[1]);
        }
    }
    false
}

/// Closed-loop regulation to a fixed pose; returns the final state and a
/// convergence flag (error below 1 mm and 0.5 degrees).
pub fn regulate_to(
    chain: &KinematicChain,
    state: &RobotState,
    target: &RigidPose,
    gains: &ControllerGains,
    max_time: f64,
) -> Result<(RobotState, bool), ControlError> {
    regulate_with(chain, state, target, gains, max_time, DEFAULT_DT, None)
}

/// Regulation loop with explicit step size and an optional constant
/// end-effector wrench (rows 0..3 force N, 3..6 torque N m) switched on at
/// the given onset time. The wrench enters the dynamics as J^T w.
pub fn regulate_with(
    chain: &KinematicChain,
    state: &RobotState,
    target: &RigidPose,
    gains: &ControllerGains,
    max_time: f64,
    dt: f64,
    disturbance: Option<(Vector6<f64>, f64)>,
) -> Result<(RobotState, bool), ControlError> {
    regulate_counted(chain, state, target, gains, max_time, dt, disturbance)
        .map(|(s, converged, _)| (s, converged))
}

/// [`regulate_with`] that also reports the number of controller steps
/// consumed before convergence (or the full budget on timeout).
pub fn regulate_counted(
    chain: &KinematicChain,
    state: &RobotState,
    target: &RigidPose,
    gains: &ControllerGains,
    max_time: f64,
    dt: f64,
    disturbance: Option<(Vector6<f64>, f64)>,
) -> Result<(RobotState, bool, usize), ControlError> {
    if !ik_reaches(chain, &state.q, target) {
        return Err(ControlError::TargetUnreachable);
    }
    let q_rest = state.q.clone();
    let mut s = state.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    while t <= max_time {
        let pose = forward_kinematics(chain, &s.q)?;
        let e = pose_error(&pose, target);
        if e.fixed_rows::<3>(0).norm() < CONVERGE_TRANS && e.fixed_rows::<3>(3).norm() < CONVERGE_ROT
        {
            return Ok((s, true, steps));
        }
        let j = jacobian(chain, &s.q)?;
        let n_term = nullspace_posture(&j, &chain.inertia, &s.q, &s.qdot, &q_rest, 5.0, 2.0);
        let mut tau = impedance_torque(
            &j,
            &e.fixed_rows::<3>(0).into_owned(),
            &e.fixed_rows::<3>(3).into_owned(),
            &s.qdot,
            gains,
            &n_term,
        )?;
        if let Some((w, onset)) = &disturbance {
            if t >= *onset {
                tau += j.transpose() * w;
            }
        }
        s = step_dynamics(chain, &s, &tau, dt)?;
        t += dt;
        steps += 1;
    }
    Ok((s, false, steps))
}
