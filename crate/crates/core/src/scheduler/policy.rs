use nalgebra::{DVector, Vector3, Vector6};
use rand::Rng;

use crate::geometry::Rot6D;
use crate::pose::PoseEstimate;
use crate::scene::{BBox, TaskId};
use crate::util::seeded_rng;

use super::mlp::{Mlp, MlpGrads};
use super::SchedError;

/// Continuous action dimensionality: waypoint position plus look-at point.
pub const ACTION_DIM: usize = 6;

/// Entries per view block in the observation vector: validity bit, camera
/// position, camera look direction, bbox 5-vector, object-in-view bit.
pub const VIEW_BLOCK: usize = 13;

/// Entries in the pose-estimate block: 6D orientation, center, size, rmse.
pub const ESTIMATE_BLOCK: usize = 11;

const LN_2PI: f64 = 1.8378770664093453;

/// Compact per-view record kept by the environment for observation
/// encoding: where the camera was, where it looked, and what the mask saw.
#[derive(Debug, Clone)]
pub struct ViewSummary {
    pub position: Vector3<f64>,
    /// Camera optical axis in world coordinates.
    pub look_dir: Vector3<f64>,
    pub bbox: Option<BBox>,
    /// Mask pixel fraction, the fifth bbox feature.
    pub fill: f64,
}

/// Fixed-size policy input. The layout is
/// `[view blocks x v_max | estimate | step | task one-hot]`; padding view
/// slots are all-zero with their validity bit clear.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedObservation(pub DVector<f64>);

impl SchedObservation {
    pub fn dim(v_max: usize) -> usize {
        VIEW_BLOCK * v_max + ESTIMATE_BLOCK + 1 + 6
    }

    pub fn encode(
        views: &[ViewSummary],
        estimate: Option<&PoseEstimate>,
        v_max: usize,
        task: TaskId,
    ) -> Self {
        let mut data = DVector::zeros(Self::dim(v_max));
        for (i, view) in views.iter().take(v_max).enumerate() {
            let base = i * VIEW_BLOCK;
            data[base] = 1.0;
            data.fixed_rows_mut::<3>(base + 1).copy_from(&view.position);
            data.fixed_rows_mut::<3>(base + 4).copy_from(&view.look_dir);
            if let Some(b) = &view.bbox {
                data[base + 7] = b.l;
                data[base + 8] = b.r;
                data[base + 9] = b.d;
                data[base + 10] = b.u;
                data[base + 11] = view.fill;
                data[base + 12] = 1.0;
            }
        }
        let eb = VIEW_BLOCK * v_max;
        if let Some(est) = estimate {
            let o = Rot6D::from_matrix(&est.rotation);
            for k in 0..6 {
                data[eb + k] = o.0[k];
            }
            data.fixed_rows_mut::<3>(eb + 6).copy_from(&est.translation);
            data[eb + 9] = est.size;
            data[eb + 10] = est.rmse;
        }
        data[eb + ESTIMATE_BLOCK] = views.len() as f64 / v_max as f64;
        data[eb + ESTIMATE_BLOCK + 1 + task.index()] = 1.0;
        Self(data)
    }
}

/// One scheduling decision: six continuous waypoint parameters (position,
/// then look-at point, both clamped by the environment) and the terminate
/// flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedAction {
    pub params: Vector6<f64>,
    pub terminate: bool,
}

impl SchedAction {
    pub fn terminate() -> Self {
        Self {
            params: Vector6::zeros(),
            terminate: true,
        }
    }

    pub fn waypoint(position: Vector3<f64>, look_at: Vector3<f64>) -> Self {
        let mut params = Vector6::zeros();
        params.fixed_rows_mut::<3>(0).copy_from(&position);
        params.fixed_rows_mut::<3>(3).copy_from(&look_at);
        Self {
            params,
            terminate: false,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.params.fixed_rows::<3>(0).into_owned()
    }

    pub fn look_at(&self) -> Vector3<f64> {
        self.params.fixed_rows::<3>(3).into_owned()
    }
}

/// Distribution parameters produced by one policy forward pass.
#[derive(Debug, Clone)]
pub struct PolicyHead {
    pub mean: Vector6<f64>,
    pub log_std: Vector6<f64>,
    /// Terminate-probability logit.
    pub logit: f64,
}

impl PolicyHead {
    pub fn terminate_prob(&self) -> f64 {
        1.0 / (1.0 + (-self.logit).exp())
    }

    /// Joint log density of (waypoint params, terminate bit).
    pub fn log_prob(&self, action: &SchedAction) -> f64 {
        let mut lp = 0.0;
        for i in 0..ACTION_DIM {
            let sigma = self.log_std[i].exp();
            let z = (action.params[i] - self.mean[i]) / sigma;
            lp += -0.5 * z * z - self.log_std[i] - 0.5 * LN_2PI;
        }
        let p = self.terminate_prob();
        lp += if action.terminate { p.ln() } else { (1.0 - p).ln() };
        lp
    }

    /// Differential entropy of the Gaussian plus the Bernoulli entropy.
    pub fn entropy(&self) -> f64 {
        let gauss: f64 = self
            .log_std
            .iter()
            .map(|ls| ls + 0.5 * (1.0 + LN_2PI))
            .sum();
        let p = self.terminate_prob();
        let bern = if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
        };
        gauss + bern
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SchedAction {
        let mut params = Vector6::zeros();
        for i in 0..ACTION_DIM {
            params[i] = self.mean[i] + self.log_std[i].exp() * gauss(rng);
        }
        let terminate = rng.random::<f64>() < self.terminate_prob();
        SchedAction { params, terminate }
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Policy and value networks plus the state-independent Gaussian log-std.
/// Flat parameter order: policy layers, log_std, value layers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet {
    pub policy: Mlp,
    pub log_std: Vector6<f64>,
    pub value: Mlp,
}

/// Gradients mirroring [`PolicyValueNet`].
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub policy: MlpGrads,
    pub log_std: Vector6<f64>,
    pub value: MlpGrads,
}

impl PolicyValueNet {
    /// Hidden sizes apply to both networks; the policy head emits the six
    /// waypoint means plus the terminate logit.
    pub fn new(obs_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut p_sizes = vec![obs_dim];
        p_sizes.extend_from_slice(hidden);
        p_sizes.push(ACTION_DIM + 1);
        let mut v_sizes = vec![obs_dim];
        v_sizes.extend_from_slice(hidden);
        v_sizes.push(1);
        let mut rng_p = seeded_rng(seed, "init-policy");
        let mut rng_v = seeded_rng(seed, "init-value");
        Self {
            policy: Mlp::new(&p_sizes, &mut rng_p, 0.01),
            log_std: Vector6::repeat(-0.5),
            value: Mlp::new(&v_sizes, &mut rng_v, 1.0),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
    }

    fn check_dim(&self, obs: &DVector<f64>) -> Result<(), SchedError> {
        if obs.len() != self.obs_dim() {
            return Err(SchedError::DimensionMismatch {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &DVector<f64>) -> Result<(PolicyHead, f64), SchedError> {
        self.check_dim(obs)?;
        let out = self.policy.forward(obs);
        let mut mean = Vector6::zeros();
        for i in 0..ACTION_DIM {
            mean[i] = out[i];
        }
        let head = PolicyHead {
            mean,
            log_std: self.log_std,
            logit: out[ACTION_DIM],
        };
        let v = self.value.forward(obs)[0];
        Ok((head, v))
    }

    pub fn sample<R: Rng>(
        &self,
        obs: &DVector<f64>,
        rng: &mut R,
    ) -> Result<(SchedAction, f64, f64), SchedError> {
        let (head, v) = self.forward(obs)?;
        let action = head.sample(rng);
        let lp = head.log_prob(&action);
        Ok((action, lp, v))
    }

    pub fn zero_grads(&self) -> NetGrads {
        NetGrads {
            policy: self.policy.zero_grads(),
            log_std: Vector6::zeros(),
            value: self.value.zero_grads(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.policy.n_params() + ACTION_DIM + self.value.n_params()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        self.policy.flatten_into(&mut flat);
        flat.extend(self.log_std.iter());
        self.value.flatten_into(&mut flat);
        flat
    }

    pub fn unflatten(&mut self, data: &[f64]) {
        let k = self.policy.unflatten_from(data);
        for i in 0..ACTION_DIM {
            self.log_std[i] = data[k + i];
        }
        self.value.unflatten_from(&data[k + ACTION_DIM..]);
    }

    pub fn flatten_grads(grads: &NetGrads) -> Vec<f64> {
        let mut flat = Vec::new();
        Mlp::grads_flatten_into(&grads.policy, &mut flat);
        flat.extend(grads.log_std.iter());
        Mlp::grads_flatten_into(&grads.value, &mut flat);
        flat
    }

    pub fn apply_flat_step(&mut self, step: &[f64]) {
        let k = self.policy.apply_flat_step(step);
        for i in 0..ACTION_DIM {
            self.log_std[i] += step[k + i];
        }
        self.value.apply_flat_step(&step[k + ACTION_DIM..]);
    }

    /// Accumulates gradients of the scalar objective
    /// `c_lp * log_prob(action) + c_ent * entropy + c_v * value` into
    /// `grads`, returning (log_prob, entropy, value). The coefficients
    /// encode whichever loss the caller is assembling.
    pub fn accumulate_grads(
        &self,
        obs: &DVector<f64>,
        action: &SchedAction,
        c_lp: f64,
        c_ent: f64,
        c_v: f64,
        grads: &mut NetGrads,
    ) -> Result<(f64, f64, f64), SchedError> {
        self.check_dim(obs)?;
        let cache = self.policy.forward_cached(obs);
        let out = cache.out();
        let mut mean = Vector6::zeros();
        for i in 0..ACTION_DIM {
            mean[i] = out[i];
        }
        let head = PolicyHead {
            mean,
            log_std: self.log_std,
            logit: out[ACTION_DIM],
        };
        let lp = head.log_prob(action);
        let ent = head.entropy();
        let p = head.terminate_prob();

        // d(logp)/d(head outputs) and d(entropy)/d(head outputs).
        let mut dout = DVector::zeros(ACTION_DIM + 1);
        for i in 0..ACTION_DIM {
            let sigma = self.log_std[i].exp();
            let z = (action.params[i] - mean[i]) / sigma;
            dout[i] = c_lp * z / sigma;
            // d(logp)/d(log_std_i) = z^2 - 1; d(entropy)/d(log_std_i) = 1.
            grads.log_std[i] += c_lp * (z * z - 1.0) + c_ent;
        }
        let f = if action.terminate { 1.0 } else { 0.0 };
        let dent_dlogit = if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            p * (1.0 - p) * ((1.0 - p).ln() - p.ln())
        };
        dout[ACTION_DIM] = c_lp * (f - p) + c_ent * dent_dlogit;
        self.policy.backward(&cache, &dout, &mut grads.policy);

        let v_cache = self.value.forward_cached(obs);
        let v = v_cache.out()[0];
        if c_v != 0.0 {
            self.value
                .backward(&v_cache, &DVector::from_element(1, c_v), &mut grads.value);
        }
        Ok((lp, ent, v))
    }
}
