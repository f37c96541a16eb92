//! Versioned binary policy checkpoints.
//!
//! Layout: the magic bytes `FSBLCKPT`, a little-endian `u32` header length,
//! the JSON header, then little-endian blobs: every network tensor as `f32`
//! in [`ActorCritic::tensors`] order, followed by the normaliser mean,
//! variance and count as `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{ActorCritic, NetShape};
use super::normalizer::ObsNormalizer;
use super::policy::Policy;
use crate::env::TaskSpec;
use crate::error::{Error, Result};
use crate::physics::Team;

pub const MAGIC: &[u8; 8] = b"FSBLCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub task: TaskSpec,
    pub config_hash: String,
    pub update: u64,
    pub seed: u64,
}

impl CheckpointMeta {
    /// Rejects a policy whose input or output width does not fit `task`.
    pub fn check_task(&self, shape: &NetShape, task: &TaskSpec) -> Result<()> {
        let (obs, act) = (task.obs_dim(), task.action_dim(Team::White));
        if shape.obs_dim != obs || shape.action_dim != act {
            return Err(Error::Incompatible(format!(
                "checkpoint network is {}->{}, task {} needs {}->{}",
                shape.obs_dim,
                shape.action_dim,
                task.kind.name(),
                obs,
                act
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    shape: NetShape,
    tensor_lens: Vec<usize>,
    meta: CheckpointMeta,
}

pub fn encode_checkpoint(policy: &Policy, meta: &CheckpointMeta) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        shape: policy.net.shape(),
        tensor_lens: policy.net.tensors().iter().map(|t| t.len()).collect(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(12 + json.len() + policy.net.num_params() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in policy.net.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in policy
        .norm
        .mean
        .iter()
        .chain(&policy.norm.var)
        .chain([&policy.norm.count])
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Malformed("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Policy, CheckpointMeta)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Malformed("not a policy checkpoint".into()));
    }
    let len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
    let header: Header = serde_json::from_slice(r.take(len)?)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint format {} but this build reads {}",
            header.format_version, FORMAT_VERSION
        )));
    }
    let mut net = ActorCritic::<f32>::zeros(&header.shape);
    let lens: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
    if lens != header.tensor_lens {
        return Err(Error::Malformed(
            "tensor sizes disagree with the declared shape".into(),
        ));
    }
    for t in net.tensors_mut() {
        for v in t.iter_mut() {
            *v = r.f32()?;
        }
    }
    let dim = header.shape.obs_dim;
    let mut norm = ObsNormalizer::new(dim);
    for v in norm.mean.iter_mut().chain(norm.var.iter_mut()) {
        *v = r.f64()?;
    }
    norm.count = r.f64()?;
    if r.pos != bytes.len() {
        return Err(Error::Malformed("trailing bytes after checkpoint".into()));
    }
    Ok((Policy { net, norm }, header.meta))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    policy: &Policy,
    meta: &CheckpointMeta,
) -> Result<()> {
    fs::write(path, encode_checkpoint(policy, meta))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Policy, CheckpointMeta)> {
    decode_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint and verifies that it fits `task` and, when given, the
/// training configuration hash.
pub fn load_for_task(
    path: impl AsRef<Path>,
    task: &TaskSpec,
    config_hash: Option<&str>,
) -> Result<(Policy, CheckpointMeta)> {
    let (policy, meta) = load_checkpoint(path)?;
    meta.check_task(&policy.net.shape(), task)?;
    if let Some(h) = config_hash {
        if h != meta.config_hash {
            return Err(Error::Incompatible(format!(
                "config hash {} does not match {h}",
                meta.config_hash
            )));
        }
    }
    Ok((policy, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::TaskKind;

    fn fixture() -> (Policy, CheckpointMeta) {
        let task = TaskSpec::preset(TaskKind::Blocking);
        let mut p = Policy::new(&NetShape::new(task.obs_dim(), &[16, 8], 1), 9);
        p.norm
            .update(ndarray::array![[0.1, 0.2, 0.3, 0.4, 0.5], [1.0, -1.0, 0.7, 0.0, 2.0]].view());
        p.net.log_std[0] = -0.37;
        let meta = CheckpointMeta {
            task,
            config_hash: "abc".into(),
            update: 12,
            seed: 3,
        };
        (p, meta)
    }

    #[test]
    fn bytes_round_trip() {
        let (p, meta) = fixture();
        let bytes = encode_checkpoint(&p, &meta);
        let (q, meta2) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(meta, meta2);
        assert_eq!(encode_checkpoint(&q, &meta2), bytes);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let (p, meta) = fixture();
        let bytes = encode_checkpoint(&p, &meta);
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 1]),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(
            decode_checkpoint(b"NOTACKPT0000"),
            Err(Error::Malformed(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
    }

    #[test]
    fn format_version_is_checked() {
        let (p, meta) = fixture();
        let bytes = encode_checkpoint(&p, &meta);
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let json = String::from_utf8(bytes[12..12 + len].to_vec()).unwrap();
        let bumped = json.replace("\"format_version\":1", "\"format_version\":2");
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(bumped.len() as u32).to_le_bytes());
        out.extend_from_slice(bumped.as_bytes());
        out.extend_from_slice(&bytes[12 + len..]);
        assert!(matches!(
            decode_checkpoint(&out),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn task_guard() {
        let (p, meta) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_checkpoint(&path, &p, &meta).unwrap();
        load_for_task(&path, &TaskSpec::preset(TaskKind::Blocking), Some("abc")).unwrap();
        let wrong = TaskSpec::preset(TaskKind::KeeperVsKeeper);
        assert!(matches!(
            load_for_task(&path, &wrong, None),
            Err(Error::Incompatible(_))
        ));
        assert!(matches!(
            load_for_task(&path, &TaskSpec::preset(TaskKind::Blocking), Some("zzz")),
            Err(Error::Incompatible(_))
        ));
    }
}
