//! Configuration fingerprinting.
//!
//! The fingerprint is SHA-256 over a canonical little-endian byte encoding
//! of every config field, rendered as lowercase hex. The encoding is pinned
//! here (field order, tags, widths), so equal configs digest equally on any
//! platform and any field change shows up in the digest.

use super::{ExperimentConfig, PrecisionTag, SeedPolicy};
use crate::distributed::ShardingStrategy;
use crate::index::IndexParams;
use sha2::{Digest, Sha256};

/// Canonical encoding version; bump if the field layout ever changes.
const ENCODING_VERSION: u16 = 1;

pub fn config_fingerprint(config: &ExperimentConfig) -> String {
    let mut buf = Vec::with_capacity(64);
    buf.extend_from_slice(&ENCODING_VERSION.to_le_bytes());
    encode_index_params(&mut buf, &config.index_params);
    buf.extend_from_slice(&(config.k as u64).to_le_bytes());
    match config.seed_policy {
        SeedPolicy::Deterministic { seed } => {
            buf.push(0);
            buf.extend_from_slice(&seed.to_le_bytes());
        }
        SeedPolicy::NonDeterministic => buf.push(1),
    }
    buf.push(precision_tag_byte(config.precision));
    buf.extend_from_slice(&(config.n_runs as u64).to_le_bytes());
    match &config.shard_plan {
        None => buf.push(0),
        Some(plan) => {
            buf.push(1);
            buf.extend_from_slice(&plan.n_nodes.to_le_bytes());
            match plan.strategy {
                ShardingStrategy::Hash => buf.push(0),
                ShardingStrategy::Range => buf.push(1),
                ShardingStrategy::Random { seed } => {
                    buf.push(2);
                    buf.extend_from_slice(&seed.to_le_bytes());
                }
            }
        }
    }
    let digest = Sha256::digest(&buf);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn precision_tag_byte(tag: PrecisionTag) -> u8 {
    match tag {
        PrecisionTag::FP32 => 0,
        PrecisionTag::FP16 => 1,
        PrecisionTag::BF16 => 2,
        PrecisionTag::TF32 => 3,
    }
}

fn encode_index_params(buf: &mut Vec<u8>, params: &IndexParams) {
    match params {
        IndexParams::FlatL2 => buf.push(0),
        IndexParams::FlatIP => buf.push(1),
        IndexParams::Ivf {
            nlist,
            nprobe,
            kmeans_iters,
        } => {
            buf.push(2);
            buf.extend_from_slice(&(*nlist as u64).to_le_bytes());
            buf.extend_from_slice(&(*nprobe as u64).to_le_bytes());
            buf.extend_from_slice(&(*kmeans_iters as u64).to_le_bytes());
        }
        IndexParams::Hnsw {
            m,
            ef_construction,
            ef_search,
        } => {
            buf.push(3);
            buf.extend_from_slice(&(*m as u64).to_le_bytes());
            buf.extend_from_slice(&(*ef_construction as u64).to_le_bytes());
            buf.extend_from_slice(&(*ef_search as u64).to_le_bytes());
        }
        IndexParams::Lsh { n_bits } => {
            buf.push(4);
            buf.extend_from_slice(&(*n_bits as u64).to_le_bytes());
        }
    }
}
