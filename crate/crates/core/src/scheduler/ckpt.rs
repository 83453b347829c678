use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::util::format_exact;

use super::policy::PolicyValueNet;
use super::reward::{N_REWARD_TERMS, TERM_NAMES};
use super::SchedError;

const MAGIC: &[u8; 8] = b"MVCKPT01";

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized policy snapshot: enough architecture to rebuild the network,
/// the flat parameter vector, and provenance (training step, the mean
/// episode reward at that step, a hash of the training configuration).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub step: u64,
    pub mean_reward: f64,
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn of_net(
        net: &PolicyValueNet,
        obs_dim: usize,
        hidden: &[usize],
        step: u64,
        mean_reward: f64,
        config_hash: &str,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.to_string(),
            step,
            mean_reward,
            obs_dim,
            hidden: hidden.to_vec(),
            params: net.flatten(),
        }
    }

    /// Rebuilds the network this checkpoint captured.
    pub fn restore(&self) -> Result<PolicyValueNet, SchedError> {
        let mut net = PolicyValueNet::new(self.obs_dim, &self.hidden, 0);
        if net.n_params() != self.params.len() {
            return Err(SchedError::BadCheckpoint(format!(
                "architecture holds {} parameters, file carries {}",
                net.n_params(),
                self.params.len()
            )));
        }
        net.unflatten(&self.params);
        Ok(net)
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), SchedError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&ckpt.version.to_le_bytes());
    let hash = ckpt.config_hash.as_bytes();
    buf.extend_from_slice(&(hash.len() as u32).to_le_bytes());
    buf.extend_from_slice(hash);
    buf.extend_from_slice(&ckpt.step.to_le_bytes());
    buf.extend_from_slice(&ckpt.mean_reward.to_le_bytes());
    buf.extend_from_slice(&(ckpt.obs_dim as u64).to_le_bytes());
    buf.extend_from_slice(&(ckpt.hidden.len() as u32).to_le_bytes());
    for h in &ckpt.hidden {
        buf.extend_from_slice(&(*h as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(ckpt.params.len() as u64).to_le_bytes());
    for p in &ckpt.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SchedError> {
        if self.at + n > self.data.len() {
            return Err(SchedError::BadCheckpoint(format!(
                "truncated at byte {} needing {}",
                self.at, n
            )));
        }
        let s = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SchedError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SchedError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SchedError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, SchedError> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let mut r = Reader { data: &data, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(SchedError::BadCheckpoint("bad magic".to_string()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(SchedError::BadCheckpoint(format!(
            "version {version} unsupported (this build reads {CHECKPOINT_VERSION})"
        )));
    }
    let hash_len = r.u32()? as usize;
    let config_hash = String::from_utf8(r.take(hash_len)?.to_vec())
        .map_err(|_| SchedError::BadCheckpoint("config hash not utf-8".to_string()))?;
    let step = r.u64()?;
    let mean_reward = r.f64()?;
    let obs_dim = r.u64()? as usize;
    let n_hidden = r.u32()? as usize;
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(r.u64()? as usize);
    }
    let n_params = r.u64()? as usize;
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(r.f64()?);
    }
    if r.at != data.len() {
        return Err(SchedError::BadCheckpoint(format!(
            "{} trailing bytes",
            data.len() - r.at
        )));
    }
    Ok(Checkpoint {
        version,
        config_hash,
        step,
        mean_reward,
        obs_dim,
        hidden,
        params,
    })
}

/// One training-curve record: mean episode reward for the update, mean
/// per-term weighted sums, and optimizer diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub step: u64,
    pub mean_reward: f64,
    pub term_means: [f64; N_REWARD_TERMS],
    pub kl: f64,
    pub lr: f64,
}

/// Renders the training curve as CSV text. Floats are written with full
/// round-trip precision so identical runs produce identical bytes.
pub fn curve_csv_string(rows: &[CurveRow], config_hash: &str) -> String {
    let mut s = String::from("step,mean_reward");
    for name in TERM_NAMES {
        s.push(',');
        s.push_str(name);
    }
    s.push_str(",kl,lr,config_hash\n");
    for row in rows {
        s.push_str(&row.step.to_string());
        s.push(',');
        s.push_str(&format_exact(row.mean_reward));
        for t in &row.term_means {
            s.push(',');
            s.push_str(&format_exact(*t));
        }
        s.push(',');
        s.push_str(&format_exact(row.kl));
        s.push(',');
        s.push_str(&format_exact(row.lr));
        s.push(',');
        s.push_str(config_hash);
        s.push('\n');
    }
    s
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow], config_hash: &str) -> Result<(), SchedError> {
    fs::write(path, curve_csv_string(rows, config_hash))?;
    Ok(())
}
