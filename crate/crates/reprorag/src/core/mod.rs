//! Domain types shared by every module: embedding matrices, corpora, ranked
//! result lists under a canonical total order, experiment configuration, and
//! run records.

mod fingerprint;
mod synth;

pub use fingerprint::config_fingerprint;
pub use synth::{gen_synthetic, gen_synthetic_with, SynthOptions};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Opaque document identifier, compared by raw byte order.
///
/// Identifiers are UTF-8 at the ingestion boundary (id sidecar files are one
/// id per line), and Rust string ordering is byte-wise, so `Ord` on the inner
/// string is exactly the byte order the tie-break rule requires.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(pub String);

impl DocId {
    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl std::fmt::Display for DocId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        DocId(s.to_string())
    }
}

/// Query identifier; same representation rules as [`DocId`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub String);

impl std::fmt::Display for QueryId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QueryId {
    fn from(s: &str) -> Self {
        QueryId(s.to_string())
    }
}

/// Storage precision tag for an embedding matrix. Values are always held
/// full-width (f32); a non-FP32 tag asserts that every value lies exactly on
/// that format's representable grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrecisionTag {
    FP32,
    FP16,
    BF16,
    TF32,
}

impl PrecisionTag {
    pub const ALL: [PrecisionTag; 4] = [
        PrecisionTag::FP32,
        PrecisionTag::FP16,
        PrecisionTag::BF16,
        PrecisionTag::TF32,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PrecisionTag::FP32 => "FP32",
            PrecisionTag::FP16 => "FP16",
            PrecisionTag::BF16 => "BF16",
            PrecisionTag::TF32 => "TF32",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FP32" => Ok(PrecisionTag::FP32),
            "FP16" => Ok(PrecisionTag::FP16),
            "BF16" => Ok(PrecisionTag::BF16),
            "TF32" => Ok(PrecisionTag::TF32),
            other => Err(Error::InvalidArgument(format!(
                "unknown precision format {other:?}"
            ))),
        }
    }
}

/// Dense n x d block of finite f32 values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dims: usize,
    data: Vec<f32>,
    precision_tag: PrecisionTag,
}

impl EmbeddingMatrix {
    /// Build a matrix, validating shape, finiteness, and (for non-FP32 tags)
    /// that every value already sits on the tagged format's grid.
    pub fn new(
        rows: usize,
        dims: usize,
        data: Vec<f32>,
        precision_tag: PrecisionTag,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidArgument("dims must be >= 1".into()));
        }
        if data.len() != rows * dims {
            return Err(Error::ShapeMismatch(format!(
                "matrix data length {} != rows {} x dims {}",
                data.len(),
                rows,
                dims
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "embedding matrix at flat index {pos}"
            )));
        }
        if precision_tag != PrecisionTag::FP32 {
            let fmt = crate::precision::PrecisionFormat::from_tag(precision_tag);
            if let Some(pos) = data.iter().position(|&v| fmt.quantize_value(v) != v) {
                return Err(Error::InvalidArgument(format!(
                    "value at flat index {pos} is not representable in {}",
                    precision_tag.name()
                )));
            }
        }
        Ok(Self {
            rows,
            dims,
            data,
            precision_tag,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn precision_tag(&self) -> PrecisionTag {
        self.precision_tag
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dims)
    }
}

/// A corpus: unique document ids plus one embedding row per id.
#[derive(Debug, Clone)]
pub struct DocumentCorpus {
    pub ids: Vec<DocId>,
    pub embeddings: EmbeddingMatrix,
}

impl DocumentCorpus {
    pub fn new(ids: Vec<DocId>, embeddings: EmbeddingMatrix) -> Result<Self> {
        if ids.len() != embeddings.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids vs {} embedding rows",
                ids.len(),
                embeddings.rows()
            )));
        }
        check_unique(ids.iter().map(|id| id.0.as_str()))?;
        Ok(Self { ids, embeddings })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sub-corpus of the given row positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<DocumentCorpus> {
        let dims = self.embeddings.dims();
        let mut ids = Vec::with_capacity(positions.len());
        let mut data = Vec::with_capacity(positions.len() * dims);
        for &p in positions {
            ids.push(self.ids[p].clone());
            data.extend_from_slice(self.embeddings.row(p));
        }
        let embeddings =
            EmbeddingMatrix::new(positions.len(), dims, data, self.embeddings.precision_tag())?;
        DocumentCorpus::new(ids, embeddings)
    }
}

/// A query set; dims must match whatever corpus it is searched against
/// (checked at search time).
#[derive(Debug, Clone)]
pub struct QuerySet {
    pub ids: Vec<QueryId>,
    pub embeddings: EmbeddingMatrix,
}

impl QuerySet {
    pub fn new(ids: Vec<QueryId>, embeddings: EmbeddingMatrix) -> Result<Self> {
        if ids.len() != embeddings.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids vs {} embedding rows",
                ids.len(),
                embeddings.rows()
            )));
        }
        check_unique(ids.iter().map(|id| id.0.as_str()))?;
        Ok(Self { ids, embeddings })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// How scores order results: distances ascend, inner products descend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Distance,
    InnerProduct,
}

/// One retrieved document with its score (distance or inner product,
/// depending on the index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub doc_id: DocId,
    pub score: f32,
}

impl ResultEntry {
    pub fn new(doc_id: impl Into<DocId>, score: f32) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// One query's ranked top-k list under the canonical total order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultList {
    pub query_id: QueryId,
    pub entries: Vec<ResultEntry>,
}

impl ResultList {
    pub fn ids(&self) -> impl Iterator<Item = &DocId> {
        self.entries.iter().map(|e| &e.doc_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sort result entries into the canonical total order: ascending score for
/// distance metrics, descending for inner product, ties broken by ascending
/// doc id byte order. Rejects non-finite scores.
///
/// The order is total (ids are unique), so the output is a pure function of
/// the entry *set* — any permutation of the input sorts identically.
pub fn canonical_sort(mut entries: Vec<ResultEntry>, metric: MetricKind) -> Result<Vec<ResultEntry>> {
    for e in &entries {
        if !e.score.is_finite() {
            return Err(Error::NonFinite(format!(
                "score for doc {:?}",
                e.doc_id.0
            )));
        }
    }
    entries.sort_unstable_by(|a, b| canonical_cmp(a, b, metric));
    Ok(entries)
}

/// The canonical comparison used by [`canonical_sort`] and by every index's
/// top-k selection. Scores must be finite.
#[inline]
pub fn canonical_cmp(a: &ResultEntry, b: &ResultEntry, metric: MetricKind) -> std::cmp::Ordering {
    let by_score = match metric {
        MetricKind::Distance => a.score.partial_cmp(&b.score).unwrap(),
        MetricKind::InnerProduct => b.score.partial_cmp(&a.score).unwrap(),
    };
    by_score.then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Seed control: a fixed 64-bit seed, or one drawn from the wall clock at
/// run start. Either way the seed actually used is recorded in the run
/// record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SeedPolicy {
    Deterministic { seed: u64 },
    NonDeterministic,
}

impl SeedPolicy {
    /// Resolve the effective seed for one run.
    pub fn effective_seed(&self) -> u64 {
        match self {
            SeedPolicy::Deterministic { seed } => *seed,
            SeedPolicy::NonDeterministic => {
                let nanos = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_nanos() as u64)
                    .unwrap_or(0);
                crate::rng::mix64(nanos)
            }
        }
    }
}

/// Shard plan for distributed runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardPlan {
    pub n_nodes: u32,
    pub strategy: crate::distributed::ShardingStrategy,
}

/// Everything that determines a run: index parameters, retrieval depth,
/// seed policy, precision format, repetition count, and optional shard plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub index_params: crate::index::IndexParams,
    pub k: usize,
    pub seed_policy: SeedPolicy,
    pub precision: PrecisionTag,
    pub n_runs: usize,
    pub shard_plan: Option<ShardPlan>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidArgument("n_runs must be >= 1".into()));
        }
        self.index_params.validate()?;
        if let Some(plan) = &self.shard_plan {
            if plan.n_nodes == 0 {
                return Err(Error::InvalidArgument("n_nodes must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        config_fingerprint(self)
    }
}

/// Build/search wall-clock durations, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub build_ms: f64,
    pub search_ms: f64,
}

/// One execution: the config fingerprint, the seed actually used, one
/// result list per query, and timings.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_fingerprint: String,
    pub effective_seed: u64,
    pub results: Vec<ResultList>,
    pub timings: Timings,
}
