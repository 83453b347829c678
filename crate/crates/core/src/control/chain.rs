use nalgebra::{DVector, Matrix6xX, UnitQuaternion, Vector3, Vector6};

use super::ControlError;
use crate::geometry::RigidPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub kind: JointKind,
    /// Unit axis in this joint's local frame.
    pub axis: Vector3<f64>,
    /// Fixed transform from the parent frame to this joint's frame.
    pub origin: RigidPose,
    /// [lo, hi] in rad (revolute) or m (prismatic).
    pub limits: [f64; 2],
}

/// Serial manipulator with diagonal constant joint-space inertia and
/// viscous friction. The chain root sits at the world origin; callers that
/// need a different mount compose poses externally.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    joints: Vec<Joint>,
    pub end_effector_offset: RigidPose,
    /// Diagonal inertia per joint, kg m^2 or kg.
    pub inertia: DVector<f64>,
    /// Viscous friction coefficient per joint.
    pub friction: DVector<f64>,
}

impl KinematicChain {
    /// Axes are normalized here so downstream math can rely on unit norm.
    pub fn new(joints: Vec<Joint>, end_effector_offset: RigidPose) -> Result<Self, ControlError> {
        if joints.is_empty() {
            return Err(ControlError::EmptyChain);
        }
        let n = joints.len();
        let mut joints = joints;
        for j in &mut joints {
            let norm = j.axis.norm();
            if norm < 1e-9 {
                return Err(ControlError::DegenerateAxis);
            }
            j.axis /= norm;
        }
        Ok(Self {
            joints,
            end_effector_offset,
            inertia: DVector::from_element(n, 1.0),
            friction: DVector::from_element(n, 0.5),
        })
    }

    pub fn with_dynamics(
        mut self,
        inertia: DVector<f64>,
        friction: DVector<f64>,
    ) -> Result<Self, ControlError> {
        if inertia.len() != self.joints.len() || friction.len() != self.joints.len() {
            return Err(ControlError::DimensionMismatch {
                expected: self.joints.len(),
                got: inertia.len().min(friction.len()),
            });
        }
        self.inertia = inertia;
        self.friction = friction;
        Ok(self)
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    /// Seven-revolute-joint arm with link lengths in the range of common
    /// desk-scale cobots; all joints rotate about their local z axis.
    pub fn panda_like() -> Self {
        let deg90 = std::f64::consts::FRAC_PI_2;
        let z = Vector3::z();
        let joint = |roll: f64, trans: Vector3<f64>, limits: [f64; 2]| Joint {
            kind: JointKind::Revolute,
            axis: z,
            origin: RigidPose::new(UnitQuaternion::from_euler_angles(roll, 0.0, 0.0), trans),
            limits,
        };
        let joints = vec![
            joint(0.0, Vector3::new(0.0, 0.0, 0.333), [-2.897, 2.897]),
            joint(-deg90, Vector3::zeros(), [-1.762, 1.762]),
            joint(deg90, Vector3::new(0.0, -0.316, 0.0), [-2.897, 2.897]),
            joint(deg90, Vector3::new(0.0825, 0.0, 0.0), [-3.071, -0.069]),
            joint(-deg90, Vector3::new(-0.0825, 0.384, 0.0), [-2.897, 2.897]),
            joint(deg90, Vector3::zeros(), [-0.017, 3.752]),
            joint(deg90, Vector3::new(0.088, 0.0, 0.0), [-2.897, 2.897]),
        ];
        let ee = RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.107));
        let chain = Self::new(joints, ee).expect("static chain is valid");
        let inertia = DVector::from_vec(vec![1.2, 1.2, 1.0, 1.0, 0.6, 0.4, 0.3]);
        let friction = DVector::from_vec(vec![0.8, 0.8, 0.6, 0.6, 0.4, 0.3, 0.2]);
        chain.with_dynamics(inertia, friction).expect("lengths match")
    }

    /// Mid-range posture, used as the rest target for nullspace torques.
    pub fn mid_limits(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.joints.len(),
            self.joints.iter().map(|j| (j.limits[0] + j.limits[1]) / 2.0),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl RobotState {
    pub fn rest(chain: &KinematicChain) -> Self {
        Self {
            q: chain.mid_limits(),
            qdot: DVector::zeros(chain.n_joints()),
        }
    }
}

fn joint_motion(joint: &Joint, q: f64) -> RigidPose {
    match joint.kind {
        JointKind::Revolute => RigidPose::from_axis_angle(&joint.axis, q),
        JointKind::Prismatic => RigidPose::from_translation(joint.axis * q),
    }
}

fn check_dims(chain: &KinematicChain, q: &DVector<f64>) -> Result<(), ControlError> {
    if q.len() != chain.n_joints() {
        return Err(ControlError::DimensionMismatch {
            expected: chain.n_joints(),
            got: q.len(),
        });
    }
    Ok(())
}

pub fn forward_kinematics(
    chain: &KinematicChain,
    q: &DVector<f64>,
) -> Result<RigidPose, ControlError> {
    check_dims(chain, q)?;
    let mut pose = RigidPose::identity();
    for (joint, &qi) in chain.joints().iter().zip(q.iter()) {
        pose = pose.compose(&joint.origin).compose(&joint_motion(joint, qi));
    }
    Ok(pose.compose(&chain.end_effector_offset))
}

/// World-frame geometric Jacobian; rows 0..3 map joint rates to linear
/// end-effector velocity, rows 3..6 to angular velocity.
pub fn jacobian(chain: &KinematicChain, q: &DVector<f64>) -> Result<Matrix6xX<f64>, ControlError> {
    check_dims(chain, q)?;
    let n = chain.n_joints();
    let mut frames = Vec::with_capacity(n);
    let mut pose = RigidPose::identity();
    for (joint, &qi) in chain.joints().iter().zip(q.iter()) {
        pose = pose.compose(&joint.origin);
        frames.push(pose);
        pose = pose.compose(&joint_motion(joint, qi));
    }
    let p_ee = pose.compose(&chain.end_effector_offset).translation();
    let mut j = Matrix6xX::zeros(n);
    for (i, (joint, frame)) in chain.joints().iter().zip(frames.iter()).enumerate() {
        let axis_w = frame.rotate_vector(&joint.axis);
        match joint.kind {
            JointKind::Prismatic => {
                j.fixed_view_mut::<3, 1>(0, i).copy_from(&axis_w);
            }
            JointKind::Revolute => {
                let lin = axis_w.cross(&(p_ee - frame.translation()));
                j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
                j.fixed_view_mut::<3, 1>(3, i).copy_from(&axis_w);
            }
        }
    }
    Ok(j)
}

/// Pose difference current minus target: rows 0..3 translation, rows 3..6
/// the axis-angle of R_cur R_tgt^T (world frame). This is the error
/// convention the torque law negates.
pub fn pose_error(current: &RigidPose, target: &RigidPose) -> Vector6<f64> {
    let lin = current.translation() - target.translation();
    let rel = current.rotation() * target.rotation().inverse();
    let ang = rel.scaled_axis();
    let mut e = Vector6::zeros();
    e.fixed_rows_mut::<3>(0).copy_from(&lin);
    e.fixed_rows_mut::<3>(3).copy_from(&ang);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix4;
    use rand::Rng;

    fn random_chain<R: Rng>(rng: &mut R, n: usize) -> KinematicChain {
        let joints = (0..n)
            .map(|_| {
                let axis = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0f64),
                );
                let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis };
                let origin = RigidPose::new(
                    UnitQuaternion::from_euler_angles(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ),
                    Vector3::new(
                        rng.random_range(-0.3..0.3),
                        rng.random_range(-0.3..0.3),
                        rng.random_range(-0.3..0.3),
                    ),
                );
                let kind = if rng.random_bool(0.5) { JointKind::Revolute } else { JointKind::Prismatic };
                Joint { kind, axis, origin, limits: [-2.0, 2.0] }
            })
            .collect();
        KinematicChain::new(joints, RigidPose::from_translation(Vector3::new(0.05, 0.0, 0.1)))
            .unwrap()
    }

    #[test]
    fn zero_q_composes_origins() {
        let mut rng = seeded_rng(7, "chain-zero");
        let chain = random_chain(&mut rng, 6);
        let fk = forward_kinematics(&chain, &DVector::zeros(6)).unwrap();
        let mut expect = RigidPose::identity();
        for j in chain.joints() {
            expect = expect.compose(&j.origin);
        }
        expect = expect.compose(&chain.end_effector_offset);
        assert_abs_diff_eq!(fk.translation(), expect.translation(), epsilon = 1e-15);
        assert!(fk.rotation_angle_to(&expect) < 1e-15);
    }

    #[test]
    fn prismatic_z_joint_translates_along_z() {
        let joints = vec![Joint {
            kind: JointKind::Prismatic,
            axis: Vector3::z(),
            origin: RigidPose::identity(),
            limits: [-1.0, 1.0],
        }];
        let chain = KinematicChain::new(joints, RigidPose::identity()).unwrap();
        let base = forward_kinematics(&chain, &DVector::zeros(1)).unwrap();
        let moved = forward_kinematics(&chain, &DVector::from_vec(vec![0.3])).unwrap();
        let delta = moved.translation() - base.translation();
        assert_abs_diff_eq!(delta, Vector3::new(0.0, 0.0, 0.3), epsilon = 1e-15);
    }

    /// Straight-line homogeneous-matrix product, kept deliberately separate
    /// from the RigidPose composition path.
    fn fk_matrix(chain: &KinematicChain, q: &DVector<f64>) -> Matrix4<f64> {
        let mut m: Matrix4<f64> = Matrix4::identity();
        let to_mat = |p: &RigidPose| {
            let mut h = Matrix4::identity();
            h.fixed_view_mut::<3, 3>(0, 0).copy_from(&p.rotation_matrix());
            h.fixed_view_mut::<3, 1>(0, 3).copy_from(&p.translation());
            h
        };
        for (joint, &qi) in chain.joints().iter().zip(q.iter()) {
            m *= to_mat(&joint.origin);
            m *= to_mat(&joint_motion(joint, qi));
        }
        m * to_mat(&chain.end_effector_offset)
    }

    #[test]
    fn fk_matches_homogeneous_matrix_product() {
        let mut rng = seeded_rng(11, "chain-dup");
        for _ in 0..20 {
            let chain = random_chain(&mut rng, 7);
            let q = DVector::from_iterator(7, (0..7).map(|_| rng.random_range(-1.5..1.5)));
            let fk = forward_kinematics(&chain, &q).unwrap();
            let m = fk_matrix(&chain, &q);
            let r = fk.rotation_matrix();
            for i in 0..3 {
                for k in 0..3 {
                    assert_abs_diff_eq!(r[(i, k)], m[(i, k)], epsilon = 1e-12);
                }
                assert_abs_diff_eq!(fk.translation()[i], m[(i, 3)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_columns_match_definitions() {
        // Single prismatic joint: column is (axis; 0).
        let chain = KinematicChain::new(
            vec![Joint {
                kind: JointKind::Prismatic,
                axis: Vector3::new(0.0, 1.0, 0.0),
                origin: RigidPose::identity(),
                limits: [-1.0, 1.0],
            }],
            RigidPose::identity(),
        )
        .unwrap();
        let j = jacobian(&chain, &DVector::zeros(1)).unwrap();
        assert_abs_diff_eq!(j.column(0).fixed_rows::<3>(0).into_owned(), Vector3::y(), epsilon = 1e-15);
        assert_abs_diff_eq!(j.column(0).fixed_rows::<3>(3).into_owned(), Vector3::zeros(), epsilon = 1e-15);

        // Single revolute z joint with lever (L, 0, 0): column is (z x r; z).
        let lever = RigidPose::from_translation(Vector3::new(0.4, 0.0, 0.0));
        let chain = KinematicChain::new(
            vec![Joint {
                kind: JointKind::Revolute,
                axis: Vector3::z(),
                origin: RigidPose::identity(),
                limits: [-3.0, 3.0],
            }],
            lever,
        )
        .unwrap();
        let j = jacobian(&chain, &DVector::zeros(1)).unwrap();
        let expect = Vector3::z().cross(&Vector3::new(0.4, 0.0, 0.0));
        assert_abs_diff_eq!(j.column(0).fixed_rows::<3>(0).into_owned(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(j.column(0).fixed_rows::<3>(3).into_owned(), Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let chain = KinematicChain::panda_like();
        let mut rng = seeded_rng(3, "chain-fd");
        let eps = 1e-7;
        for _ in 0..100 {
            let q = DVector::from_iterator(
                7,
                chain.joints().iter().map(|j| rng.random_range(j.limits[0] * 0.9..j.limits[1] * 0.9)),
            );
            let j = jacobian(&chain, &q).unwrap();
            let base = forward_kinematics(&chain, &q).unwrap();
            for i in 0..7 {
                let mut qp = q.clone();
                qp[i] += eps;
                let fd = pose_error(&forward_kinematics(&chain, &qp).unwrap(), &base) / eps;
                let col = j.column(i);
                assert!(
                    (fd - col).norm() < 1e-5,
                    "joint {i}: fd {fd:?} vs jacobian {col:?}"
                );
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let chain = KinematicChain::panda_like();
        assert!(matches!(
            forward_kinematics(&chain, &DVector::zeros(5)),
            Err(ControlError::DimensionMismatch { expected: 7, got: 5 })
        ));
        assert!(jacobian(&chain, &DVector::zeros(3)).is_err());
    }
}
