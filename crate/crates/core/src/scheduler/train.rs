use std::path::Path;

use rayon::prelude::*;

use crate::util::{derive_seed, mean, seeded_rng, sha256_hex};

use super::ckpt::{save_checkpoint, write_curve_csv, Checkpoint, CurveRow};
use super::env::{EpisodeSummary, RolloutEnv};
use super::mlp::Adam;
use super::policy::PolicyValueNet;
use super::ppo::{ppo_update, PpoConfig, RolloutBuffer, Transition};
use super::reward::N_REWARD_TERMS;
use super::SchedError;

#[derive(Debug)]
pub struct TrainReport {
    pub curve: Vec<CurveRow>,
    /// Steps at which checkpoints were cut, in order.
    pub checkpoint_steps: Vec<u64>,
    /// Step whose collection policy had the highest mean episode reward.
    pub best_step: u64,
    pub config_hash: String,
    /// Network after the final update.
    pub net: PolicyValueNet,
    /// Network as of `best_step`, before that step's update.
    pub best_net: PolicyValueNet,
}

struct EpisodeRecord {
    transitions: Vec<Transition>,
    total_reward: f64,
    term_sums: [f64; N_REWARD_TERMS],
    #[allow(dead_code)]
    summary: Option<EpisodeSummary>,
}

fn collect_episode<E: RolloutEnv>(
    env: &mut E,
    net: &PolicyValueNet,
    ep_seed: u64,
) -> Result<EpisodeRecord, SchedError> {
    let mut rng = seeded_rng(ep_seed, "actions");
    let mut obs = env.reset(ep_seed)?;
    let mut rec = EpisodeRecord {
        transitions: Vec::new(),
        total_reward: 0.0,
        term_sums: [0.0; N_REWARD_TERMS],
        summary: None,
    };
    loop {
        let (action, log_prob, value) = net.sample(&obs, &mut rng)?;
        let out = env.step(&action)?;
        rec.total_reward += out.reward;
        if let Some(b) = &out.breakdown {
            for (s, t) in rec.term_sums.iter_mut().zip(&b.terms) {
                *s += t.weighted;
            }
        }
        rec.transitions.push(Transition {
            obs,
            action,
            log_prob,
            reward: out.reward,
            value,
            done: out.done,
        });
        obs = out.obs;
        if out.done {
            rec.summary = out.summary;
            return Ok(rec);
        }
    }
}

/// Short stable identifier of the training configuration, stamped into
/// checkpoints and the curve CSV.
pub fn config_hash(cfg: &PpoConfig) -> String {
    let text = toml::to_string(cfg).expect("config serializes");
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// Full PPO training loop. Per update, `episodes_per_update` episodes are
/// collected in parallel (each env instance and action stream seeded from
/// the update and slot indices alone, so results do not depend on thread
/// scheduling), then one update runs on the combined buffer. Checkpoints
/// are cut every `checkpoint_interval` updates; when `out_dir` is given
/// they are written there along with `curve.csv` and `best.txt`.
pub fn train<E, F>(
    make_env: F,
    cfg: &PpoConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<TrainReport, SchedError>
where
    E: RolloutEnv + Send,
    F: Fn() -> E + Sync,
{
    cfg.validate()?;
    let hash = config_hash(cfg);
    let obs_dim = make_env().obs_dim();
    let mut net = PolicyValueNet::new(obs_dim, &cfg.hidden, derive_seed(seed, "net-init"));
    let mut opt = Adam::new(net.n_params());
    let mut lr = cfg.lr_init;
    let mut curve = Vec::with_capacity(cfg.total_updates);
    let mut checkpoint_steps = Vec::new();
    let mut best_reward = f64::NEG_INFINITY;
    let mut best_step = 0u64;
    let mut best_params = net.flatten();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    for u in 0..cfg.total_updates {
        let records: Vec<Result<EpisodeRecord, SchedError>> = (0..cfg.episodes_per_update)
            .into_par_iter()
            .map(|e| {
                let mut env = make_env();
                collect_episode(&mut env, &net, derive_seed(seed, &format!("update-{u}-env-{e}")))
            })
            .collect();
        let mut buffer = RolloutBuffer::default();
        let mut returns = Vec::with_capacity(cfg.episodes_per_update);
        let mut term_means = [0.0; N_REWARD_TERMS];
        for r in records {
            let rec = r?;
            buffer.transitions.extend(rec.transitions);
            returns.push(rec.total_reward);
            for (m, s) in term_means.iter_mut().zip(rec.term_sums) {
                *m += s;
            }
        }
        for m in &mut term_means {
            *m /= cfg.episodes_per_update as f64;
        }
        let mean_reward = mean(&returns);
        let step = (u + 1) as u64;
        // The curve scores the collection policy, i.e. the net before this
        // step's update; best-checkpoint selection uses the same snapshot.
        if mean_reward > best_reward {
            best_reward = mean_reward;
            best_step = step;
            best_params = net.flatten();
        }
        let stats = ppo_update(
            &mut net,
            &mut opt,
            &buffer,
            cfg,
            &mut lr,
            derive_seed(seed, &format!("update-{u}")),
        )?;
        curve.push(CurveRow {
            step,
            mean_reward,
            term_means,
            kl: stats.mean_kl,
            lr: stats.lr,
        });
        if step % cfg.checkpoint_interval as u64 == 0 {
            checkpoint_steps.push(step);
            if let Some(dir) = out_dir {
                let ckpt =
                    Checkpoint::of_net(&net, obs_dim, &cfg.hidden, step, mean_reward, &hash);
                save_checkpoint(&dir.join(format!("ckpt_{step:05}.bin")), &ckpt)?;
            }
        }
    }

    let mut best_net = PolicyValueNet::new(obs_dim, &cfg.hidden, 0);
    best_net.unflatten(&best_params);
    if let Some(dir) = out_dir {
        write_curve_csv(&dir.join("curve.csv"), &curve, &hash)?;
        let ckpt = Checkpoint::of_net(&best_net, obs_dim, &cfg.hidden, best_step, best_reward, &hash);
        save_checkpoint(&dir.join("ckpt_best.bin"), &ckpt)?;
        std::fs::write(
            dir.join("best.txt"),
            format!("step {best_step} mean_reward {}\n", crate::util::format_exact(best_reward)),
        )?;
    }
    Ok(TrainReport {
        curve,
        checkpoint_steps,
        best_step,
        config_hash: hash,
        net,
        best_net,
    })
}
