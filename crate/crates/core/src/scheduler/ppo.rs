use nalgebra::DVector;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::util::seeded_rng;

use super::mlp::Adam;
use super::policy::{PolicyValueNet, SchedAction};
use super::SchedError;

/// Training hyperparameters. The learning rate adapts to the measured KL
/// divergence but never leaves [lr_min, lr_max].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub lr_init: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub clip: f64,
    pub gamma: f64,
    pub lam: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub total_updates: usize,
    pub checkpoint_interval: usize,
    pub kl_target: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub episodes_per_update: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden: vec![96, 96, 32],
            lr_init: 1e-3,
            lr_min: 2e-4,
            lr_max: 5e-3,
            clip: 0.2,
            gamma: 0.99,
            lam: 0.95,
            epochs: 4,
            minibatch: 64,
            total_updates: 2000,
            checkpoint_interval: 25,
            kl_target: 0.01,
            entropy_coef: 0.01,
            value_coef: 0.5,
            episodes_per_update: 4,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), SchedError> {
        if self.checkpoint_interval == 0 || self.total_updates % self.checkpoint_interval != 0 {
            return Err(SchedError::BadCadence {
                interval: self.checkpoint_interval,
                total: self.total_updates,
            });
        }
        Ok(())
    }

    pub fn clamp_lr(&self, lr: f64) -> f64 {
        lr.clamp(self.lr_min, self.lr_max)
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: DVector<f64>,
    pub action: SchedAction,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// Trajectory storage for one update: whole episodes, in collection order.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
}

impl RolloutBuffer {
    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Generalized advantage estimation over episode segments delimited by the
/// done flags; the value after a terminal step is zero (episodic tasks).
/// Returns (advantages, returns) with returns = advantages + values.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lam: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut gae = 0.0;
    let mut next_value = 0.0;
    for t in (0..n).rev() {
        if dones[t] {
            next_value = 0.0;
            gae = 0.0;
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        gae = delta + gamma * lam * gae;
        adv[t] = gae;
        next_value = values[t];
    }
    let ret: Vec<f64> = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateStats {
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Learning rate after the KL adaptation rule.
    pub lr: f64,
}

/// One PPO update: clipped-surrogate policy loss with batch-normalized GAE
/// advantages, squared-error value loss, entropy bonus. After the epochs,
/// the learning rate is adapted: measured KL above twice the target shrinks
/// it, below half the target grows it, clamped to the config's range.
pub fn ppo_update(
    net: &mut PolicyValueNet,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    lr: &mut f64,
    seed: u64,
) -> Result<UpdateStats, SchedError> {
    if buffer.is_empty() || !buffer.transitions.iter().any(|t| t.done) {
        return Err(SchedError::EmptyBuffer);
    }
    let n = buffer.len();
    let rewards: Vec<f64> = buffer.transitions.iter().map(|t| t.reward).collect();
    let values: Vec<f64> = buffer.transitions.iter().map(|t| t.value).collect();
    let dones: Vec<bool> = buffer.transitions.iter().map(|t| t.done).collect();
    let (mut adv, ret) = gae_advantages(&rewards, &values, &dones, cfg.gamma, cfg.lam);
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    // Degenerate batches (constant advantage) are left unnormalized so a
    // zero-advantage buffer stays exactly zero.
    if std > 1e-12 {
        for a in &mut adv {
            *a = (*a - mean) / std;
        }
    }

    let mut step = Vec::new();
    for epoch in 0..cfg.epochs {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = seeded_rng(seed, &format!("shuffle-{epoch}"));
        idx.shuffle(&mut rng);
        for chunk in idx.chunks(cfg.minibatch.max(1)) {
            let scale = 1.0 / chunk.len() as f64;
            let mut grads = net.zero_grads();
            for &i in chunk {
                let t = &buffer.transitions[i];
                let (head, v) = net.forward(&t.obs)?;
                let logp = head.log_prob(&t.action);
                let rho = (logp - t.log_prob).exp();
                let a = adv[i];
                // Gradient of -min(rho a, clip(rho) a): active unless the
                // clipped branch is the minimum.
                let active = if a >= 0.0 {
                    rho < 1.0 + cfg.clip
                } else {
                    rho > 1.0 - cfg.clip
                };
                let c_lp = if active { -rho * a * scale } else { 0.0 };
                let c_ent = -cfg.entropy_coef * scale;
                let c_v = 2.0 * cfg.value_coef * (v - ret[i]) * scale;
                net.accumulate_grads(&t.obs, &t.action, c_lp, c_ent, c_v, &mut grads)?;
            }
            let flat = PolicyValueNet::flatten_grads(&grads);
            opt.step(*lr, &flat, &mut step);
            net.apply_flat_step(&step);
        }
    }

    // Post-update diagnostics on the full batch.
    let mut kl_sum = 0.0;
    let mut clip_count = 0usize;
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    let mut entropy = 0.0;
    for (i, t) in buffer.transitions.iter().enumerate() {
        let (head, v) = net.forward(&t.obs)?;
        let logp = head.log_prob(&t.action);
        let rho = (logp - t.log_prob).exp();
        kl_sum += t.log_prob - logp;
        if (rho - 1.0).abs() > cfg.clip {
            clip_count += 1;
        }
        let clipped = rho.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        policy_loss += -(rho * adv[i]).min(clipped * adv[i]);
        value_loss += (v - ret[i]).powi(2);
        entropy += head.entropy();
    }
    let mean_kl = kl_sum / n as f64;
    if mean_kl > 2.0 * cfg.kl_target {
        *lr /= 1.5;
    } else if mean_kl < cfg.kl_target / 2.0 {
        *lr *= 1.5;
    }
    *lr = cfg.clamp_lr(*lr);
    Ok(UpdateStats {
        mean_kl,
        clip_fraction: clip_count as f64 / n as f64,
        policy_loss: policy_loss / n as f64,
        value_loss: value_loss / n as f64,
        entropy: entropy / n as f64,
        lr: *lr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::Rng;

    fn obs(dim: usize, seed: u64) -> DVector<f64> {
        let mut rng = seeded_rng(seed, "obs");
        DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
    }

    fn transition(o: DVector<f64>, reward: f64, value: f64, done: bool) -> Transition {
        Transition {
            obs: o,
            action: SchedAction::waypoint(
                Vector3::new(0.1, 0.2, 0.3),
                Vector3::new(0.5, 0.0, 0.2),
            ),
            log_prob: -3.0,
            reward,
            value,
            done,
        }
    }

    #[test]
    fn gae_matches_hand_rollout() {
        // Two-step episode, gamma 0.5, lam 1: plain discounted residuals.
        let (adv, ret) = gae_advantages(&[1.0, 2.0], &[0.5, 0.25], &[false, true], 0.5, 1.0);
        // delta1 = 2 - 0.25 = 1.75; adv1 = 1.75.
        // delta0 = 1 + 0.5*0.25 - 0.5 = 0.625; adv0 = 0.625 + 0.5*1.75 = 1.5.
        assert!((adv[1] - 1.75).abs() < 1e-12);
        assert!((adv[0] - 1.5).abs() < 1e-12);
        assert!((ret[0] - 2.0).abs() < 1e-12);
        assert!((ret[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gae_resets_across_episode_boundaries() {
        let (adv, _) = gae_advantages(
            &[1.0, 1.0, 1.0, 1.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[false, true, false, true],
            0.9,
            0.9,
        );
        // Episodes are identical, so their advantage patterns must match.
        assert!((adv[0] - adv[2]).abs() < 1e-12);
        assert!((adv[1] - adv[3]).abs() < 1e-12);
        assert!(adv[0] > adv[1]);
    }

    #[test]
    fn empty_buffer_is_rejected() {
        let mut net = PolicyValueNet::new(4, &[6], 1);
        let mut opt = Adam::new(net.n_params());
        let mut lr = 1e-3;
        let cfg = PpoConfig::default();
        assert!(matches!(
            ppo_update(&mut net, &mut opt, &RolloutBuffer::default(), &cfg, &mut lr, 0),
            Err(SchedError::EmptyBuffer)
        ));
        // A buffer with no completed episode is equally unusable.
        let mut buf = RolloutBuffer::default();
        buf.push(transition(obs(4, 1), 1.0, 0.0, false));
        assert!(matches!(
            ppo_update(&mut net, &mut opt, &buf, &cfg, &mut lr, 0),
            Err(SchedError::EmptyBuffer)
        ));
    }

    #[test]
    fn zero_advantages_leave_policy_untouched() {
        let mut net = PolicyValueNet::new(4, &[6], 2);
        let mut opt = Adam::new(net.n_params());
        let mut lr = 1e-3;
        let cfg = PpoConfig {
            entropy_coef: 0.0,
            value_coef: 0.0,
            ..PpoConfig::default()
        };
        let mut buf = RolloutBuffer::default();
        // Zero rewards and zero values make every GAE delta zero.
        for k in 0..6 {
            buf.push(transition(obs(4, k), 0.0, 0.0, k % 3 == 2));
        }
        let before = net.flatten();
        ppo_update(&mut net, &mut opt, &buf, &cfg, &mut lr, 7).unwrap();
        let after = net.flatten();
        assert_eq!(before, after);
    }

    #[test]
    fn lr_adapts_to_kl_and_stays_in_range() {
        let cfg = PpoConfig::default();
        // The rule itself, isolated: shrink on big KL, grow on small.
        let mut lr = 1e-3;
        let kl = 3.0 * cfg.kl_target;
        if kl > 2.0 * cfg.kl_target {
            lr /= 1.5;
        }
        assert!(lr < 1e-3);
        let mut lr2 = cfg.lr_max;
        let kl2 = cfg.kl_target / 4.0;
        if kl2 < cfg.kl_target / 2.0 {
            lr2 *= 1.5;
        }
        assert_eq!(cfg.clamp_lr(lr2), cfg.lr_max);
        assert_eq!(cfg.clamp_lr(1e-9), cfg.lr_min);
    }

    #[test]
    fn cadence_validation() {
        let ok = PpoConfig::default();
        assert!(ok.validate().is_ok());
        let bad = PpoConfig {
            total_updates: 2000,
            checkpoint_interval: 23,
            ..PpoConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(SchedError::BadCadence {
                interval: 23,
                total: 2000
            })
        ));
    }

    #[test]
    fn update_moves_policy_toward_rewarded_actions() {
        // One-state environment: terminate earns 1, continue earns 0.
        let mut net = PolicyValueNet::new(1, &[8], 3);
        let mut opt = Adam::new(net.n_params());
        let o = DVector::from_element(1, 1.0);
        let cfg = PpoConfig {
            minibatch: 16,
            ..PpoConfig::default()
        };
        let mut lr = 1e-3;
        let mut rng = seeded_rng(13, "bandit");
        let before = net.forward(&o).unwrap().0.terminate_prob();
        for update in 0..30 {
            let mut buf = RolloutBuffer::default();
            for _ in 0..16 {
                let (action, lp, v) = net.sample(&o, &mut rng).unwrap();
                let reward = if action.terminate { 1.0 } else { 0.0 };
                buf.push(Transition {
                    obs: o.clone(),
                    action,
                    log_prob: lp,
                    reward,
                    value: v,
                    done: true,
                });
            }
            ppo_update(&mut net, &mut opt, &buf, &cfg, &mut lr, update).unwrap();
        }
        let after = net.forward(&o).unwrap().0.terminate_prob();
        assert!(
            after > before && after > 0.6,
            "terminate prob {before} -> {after}"
        );
    }
}
