//! The retrieval core: exact and approximate vector indexes with explicit,
//! seeded randomness, append-only insertion, and centroid introspection.
//!
//! Four families:
//! - Flat (L2 or inner product): brute-force scan, exact by definition.
//! - IVF: k-means coarse quantizer, probes the `nprobe` nearest partitions.
//! - HNSW: layered proximity graph; randomness is the level assignment.
//! - LSH: random-hyperplane binary codes ranked by Hamming distance.
//!
//! Scores are squared L2 distances (ascending) for the distance-metric
//! indexes and raw inner products (descending) for FlatIP. All distance
//! accumulation is sequential f32, so a given (inputs, seed) pair produces
//! bit-identical results on every run; parallelism is only ever across
//! queries, never inside one.

mod hnsw;
mod kmeans;
mod lsh;

pub use kmeans::{kmeans, CentroidSet};

use crate::core::{
    canonical_cmp, DocId, DocumentCorpus, MetricKind, QuerySet, ResultEntry,
    ResultList,
};
use crate::parallel::{par_map_indexed, seq_map};
use crate::wire::{ByteReader, ByteWriter};
use crate::{Error, Result};
use hnsw::HnswGraph;
use lsh::LshTable;
use serde::{Deserialize, Serialize};

/// Squared Euclidean distance, sequential f32 accumulation.
#[inline]
pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Inner product, sequential f32 accumulation.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Index family and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum IndexParams {
    FlatL2,
    FlatIP,
    Ivf {
        nlist: usize,
        nprobe: usize,
        kmeans_iters: usize,
    },
    Hnsw {
        m: usize,
        ef_construction: usize,
        ef_search: usize,
    },
    Lsh {
        n_bits: usize,
    },
}

impl IndexParams {
    /// The "accurate" HNSW preset.
    pub fn hnsw_accurate() -> Self {
        IndexParams::Hnsw {
            m: 32,
            ef_construction: 200,
            ef_search: 128,
        }
    }

    /// The "fast" HNSW preset.
    pub fn hnsw_fast() -> Self {
        IndexParams::Hnsw {
            m: 16,
            ef_construction: 40,
            ef_search: 16,
        }
    }

    /// IVF sized for a corpus of `n` documents: nlist = ceil(sqrt(n)),
    /// nprobe = max(1, nlist/8), 20 fixed k-means iterations.
    pub fn ivf_for(n: usize) -> Self {
        let nlist = ((n as f64).sqrt().ceil() as usize).max(1);
        IndexParams::Ivf {
            nlist,
            nprobe: (nlist / 8).max(1),
            kmeans_iters: 20,
        }
    }

    /// Default LSH preset: 128 hyperplanes.
    pub fn lsh_default() -> Self {
        IndexParams::Lsh { n_bits: 128 }
    }

    /// Resolve a named preset against a corpus size.
    pub fn preset(name: &str, n_docs: usize) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "flat_l2" => Ok(IndexParams::FlatL2),
            "flat_ip" => Ok(IndexParams::FlatIP),
            "ivf" => Ok(IndexParams::ivf_for(n_docs)),
            "hnsw" | "hnsw_fast" => Ok(IndexParams::hnsw_fast()),
            "hnsw_accurate" => Ok(IndexParams::hnsw_accurate()),
            "lsh" => Ok(IndexParams::lsh_default()),
            other => Err(Error::InvalidArgument(format!(
                "unknown index preset {other:?} (expected flat_l2, flat_ip, ivf, hnsw_accurate, hnsw_fast, lsh)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            IndexParams::FlatL2 => "flat_l2",
            IndexParams::FlatIP => "flat_ip",
            IndexParams::Ivf { .. } => "ivf",
            IndexParams::Hnsw { .. } => "hnsw",
            IndexParams::Lsh { .. } => "lsh",
        }
    }

    pub fn metric_kind(&self) -> MetricKind {
        match self {
            IndexParams::FlatIP => MetricKind::InnerProduct,
            _ => MetricKind::Distance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            IndexParams::FlatL2 | IndexParams::FlatIP => Ok(()),
            IndexParams::Ivf { nlist, nprobe, .. } => {
                if nlist == 0 {
                    return Err(Error::InvalidArgument("nlist must be >= 1".into()));
                }
                if nprobe == 0 || nprobe > nlist {
                    return Err(Error::InvalidArgument(format!(
                        "nprobe must be in [1, nlist={nlist}], got {nprobe}"
                    )));
                }
                Ok(())
            }
            IndexParams::Hnsw {
                m, ef_construction, ..
            } => {
                if m < 2 {
                    return Err(Error::InvalidArgument("HNSW M must be >= 2".into()));
                }
                if ef_construction == 0 {
                    return Err(Error::InvalidArgument(
                        "ef_construction must be >= 1".into(),
                    ));
                }
                Ok(())
            }
            IndexParams::Lsh { n_bits } => {
                if n_bits == 0 {
                    return Err(Error::InvalidArgument("n_bits must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Structure {
    Flat,
    Ivf {
        centroids: CentroidSet,
        lists: Vec<Vec<u32>>,
    },
    Hnsw(HnswGraph),
    Lsh(LshTable),
}

/// A built index: parameters, the seed it was built with, stored vectors
/// and ids, plus the variant-specific structure.
#[derive(Debug, Clone)]
pub struct BuiltIndex {
    params: IndexParams,
    seed: u64,
    dims: usize,
    ids: Vec<DocId>,
    vectors: Vec<f32>,
    structure: Structure,
}

/// Build an index over a corpus with an explicit seed.
///
/// IVF trains k-means on the corpus and assigns every document; HNSW
/// inserts documents in corpus order, drawing levels from the seed; LSH
/// draws its hyperplanes from the seed; Flat stores rows verbatim.
/// Identical (params, corpus, seed) build identical structures.
pub fn build(params: IndexParams, corpus: &DocumentCorpus, seed: u64) -> Result<BuiltIndex> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("index build corpus".into()));
    }
    let dims = corpus.embeddings.dims();
    let vectors = corpus.embeddings.data().to_vec();
    let n = corpus.len();

    let structure = match params {
        IndexParams::FlatL2 | IndexParams::FlatIP => Structure::Flat,
        IndexParams::Ivf {
            nlist,
            kmeans_iters,
            ..
        } => {
            let centroids = kmeans(&corpus.embeddings, nlist, kmeans_iters, seed)?;
            let mut lists = vec![Vec::new(); nlist];
            for i in 0..n {
                lists[centroids.nearest(corpus.embeddings.row(i))].push(i as u32);
            }
            Structure::Ivf { centroids, lists }
        }
        IndexParams::Hnsw {
            m, ef_construction, ..
        } => {
            let mut graph = HnswGraph::new(m, ef_construction, seed);
            for i in 0..n {
                graph.insert(i as u32, &vectors, dims);
            }
            Structure::Hnsw(graph)
        }
        IndexParams::Lsh { n_bits } => {
            let mut table = LshTable::build(n_bits, dims, seed);
            for i in 0..n {
                table.add(corpus.embeddings.row(i), dims);
            }
            Structure::Lsh(table)
        }
    };

    Ok(BuiltIndex {
        params,
        seed,
        dims,
        ids: corpus.ids.clone(),
        vectors,
        structure,
    })
}

impl BuiltIndex {
    pub fn params(&self) -> IndexParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn doc_count(&self) -> usize {
        self.ids.len()
    }

    /// IVF cluster centroids, when this is an IVF index.
    pub fn centroids(&self) -> Option<&CentroidSet> {
        match &self.structure {
            Structure::Ivf { centroids, .. } => Some(centroids),
            _ => None,
        }
    }

    /// HNSW base-layer connectivity: (reachable from entry, total).
    #[doc(hidden)]
    pub fn hnsw_layer0_reachability(&self) -> Option<(usize, usize)> {
        match &self.structure {
            Structure::Hnsw(graph) => Some(graph.layer0_reachability()),
            _ => None,
        }
    }

    /// Append documents without retraining or restructuring.
    ///
    /// IVF assigns new documents to the existing (frozen) centroids; HNSW
    /// keeps drawing levels from its continuing seeded stream; LSH codes
    /// them with the existing hyperplanes; Flat appends rows. Existing
    /// stored vectors are never modified.
    pub fn add(&mut self, docs: &DocumentCorpus) -> Result<()> {
        if docs.is_empty() {
            return Ok(());
        }
        if docs.embeddings.dims() != self.dims {
            return Err(Error::ShapeMismatch(format!(
                "add dims {} != index dims {}",
                docs.embeddings.dims(),
                self.dims
            )));
        }
        let existing: std::collections::HashSet<&DocId> = self.ids.iter().collect();
        if let Some(dup) = docs.ids.iter().find(|id| existing.contains(id)) {
            return Err(Error::DuplicateId(dup.0.clone()));
        }
        drop(existing);

        match &mut self.structure {
            Structure::Flat => self.vectors.extend_from_slice(docs.embeddings.data()),
            Structure::Ivf { centroids, lists } => {
                for (offset, row) in docs.embeddings.iter_rows().enumerate() {
                    let internal = (self.ids.len() + offset) as u32;
                    lists[centroids.nearest(row)].push(internal);
                }
                self.vectors.extend_from_slice(docs.embeddings.data());
            }
            Structure::Lsh(table) => {
                for row in docs.embeddings.iter_rows() {
                    table.add(row, self.dims);
                }
                self.vectors.extend_from_slice(docs.embeddings.data());
            }
            Structure::Hnsw(graph) => {
                // each insert needs its vector already appended
                for row in docs.embeddings.iter_rows() {
                    let internal = (self.vectors.len() / self.dims) as u32;
                    self.vectors.extend_from_slice(row);
                    graph.insert(internal, &self.vectors, self.dims);
                }
            }
        }
        self.ids.extend(docs.ids.iter().cloned());
        Ok(())
    }

    fn vector_row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dims..(i + 1) * self.dims]
    }

    /// Top-k for one query vector under the canonical order.
    fn search_one(&self, q: &[f32], k: usize) -> Vec<ResultEntry> {
        let metric = self.params.metric_kind();
        let mut entries: Vec<ResultEntry> = match &self.structure {
            Structure::Flat => {
                let score = |row: &[f32]| match metric {
                    MetricKind::Distance => l2_sq(q, row),
                    MetricKind::InnerProduct => dot(q, row),
                };
                (0..self.doc_count())
                    .map(|i| ResultEntry {
                        doc_id: self.ids[i].clone(),
                        score: score(self.vector_row(i)),
                    })
                    .collect()
            }
            Structure::Ivf { centroids, lists } => {
                let nprobe = match self.params {
                    IndexParams::Ivf { nprobe, .. } => nprobe,
                    _ => unreachable!(),
                };
                let mut ranked: Vec<(f32, usize)> = (0..centroids.nlist())
                    .map(|c| (l2_sq(q, centroids.row(c)), c))
                    .collect();
                ranked.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                ranked
                    .iter()
                    .take(nprobe)
                    .flat_map(|&(_, c)| lists[c].iter())
                    .map(|&i| ResultEntry {
                        doc_id: self.ids[i as usize].clone(),
                        score: l2_sq(q, self.vector_row(i as usize)),
                    })
                    .collect()
            }
            Structure::Hnsw(graph) => {
                let ef = match self.params {
                    IndexParams::Hnsw { ef_search, .. } => ef_search.max(k),
                    _ => unreachable!(),
                };
                graph
                    .search(q, ef, &self.vectors, self.dims)
                    .into_iter()
                    .map(|(d, i)| ResultEntry {
                        doc_id: self.ids[i as usize].clone(),
                        score: d,
                    })
                    .collect()
            }
            Structure::Lsh(table) => {
                let code = table.encode(q, self.dims);
                (0..self.doc_count())
                    .map(|i| ResultEntry {
                        doc_id: self.ids[i].clone(),
                        score: table.hamming(&code, i) as f32,
                    })
                    .collect()
            }
        };
        entries.sort_unstable_by(|a, b| canonical_cmp(a, b, metric));
        entries.truncate(k);
        entries
    }

    /// Per-query top-k lists; parallel across queries, read-only, and
    /// bit-identical across repeats and thread counts.
    ///
    /// Requesting more results than documents returns every document.
    pub fn search(&self, queries: &QuerySet, k: usize) -> Result<Vec<ResultList>> {
        self.check_search(queries, k)?;
        let lists = par_map_indexed(queries.len(), |qi| ResultList {
            query_id: queries.ids[qi].clone(),
            entries: self.search_one(queries.embeddings.row(qi), k),
        });
        Ok(lists)
    }

    /// Always-sequential variant of [`search`](Self::search), for measuring
    /// the parallel speedup.
    pub fn search_sequential(&self, queries: &QuerySet, k: usize) -> Result<Vec<ResultList>> {
        self.check_search(queries, k)?;
        let indices: Vec<usize> = (0..queries.len()).collect();
        Ok(seq_map(&indices, |&qi| ResultList {
            query_id: queries.ids[qi].clone(),
            entries: self.search_one(queries.embeddings.row(qi), k),
        }))
    }

    fn check_search(&self, queries: &QuerySet, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if queries.embeddings.dims() != self.dims {
            return Err(Error::ShapeMismatch(format!(
                "query dims {} != index dims {}",
                queries.embeddings.dims(),
                self.dims
            )));
        }
        Ok(())
    }

    /// Serialize to the versioned "VXIX" binary blob. Round-tripping
    /// preserves search results bit-for-bit, including the position of the
    /// HNSW level stream for later `add` calls.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_raw(b"VXIX");
        w.put_u16(1);
        encode_params(&mut w, &self.params);
        w.put_u64(self.seed);
        w.put_u64(self.dims as u64);
        w.put_u64(self.ids.len() as u64);
        for id in &self.ids {
            w.put_str(&id.0);
        }
        w.put_f32_slice(&self.vectors);
        match &self.structure {
            Structure::Flat => {}
            Structure::Ivf { centroids, lists } => {
                w.put_u64(centroids.nlist() as u64);
                w.put_f32_slice(centroids.data());
                for list in lists {
                    w.put_u64(list.len() as u64);
                    for &i in list {
                        w.put_u32(i);
                    }
                }
            }
            Structure::Hnsw(graph) => graph.encode(&mut w),
            Structure::Lsh(table) => table.encode_blob(&mut w),
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<BuiltIndex> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(b"VXIX")?;
        let version = r.get_u16()?;
        if version != 1 {
            return Err(Error::UnsupportedVersion(version));
        }
        let params = decode_params(&mut r)?;
        let seed = r.get_u64()?;
        let dims = r.get_u64()? as usize;
        let n = r.get_u64()? as usize;
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            ids.push(DocId(r.get_str()?));
        }
        let vectors = r.get_f32_vec(n * dims)?;
        let structure = match params {
            IndexParams::FlatL2 | IndexParams::FlatIP => Structure::Flat,
            IndexParams::Ivf { .. } => {
                let nlist = r.get_u64()? as usize;
                let data = r.get_f32_vec(nlist * dims)?;
                let centroids = CentroidSet::new(nlist, dims, data)?;
                let mut lists = Vec::with_capacity(nlist);
                for _ in 0..nlist {
                    let len = r.get_u64()? as usize;
                    let mut list = Vec::with_capacity(len);
                    for _ in 0..len {
                        list.push(r.get_u32()?);
                    }
                    lists.push(list);
                }
                Structure::Ivf { centroids, lists }
            }
            IndexParams::Hnsw {
                m, ef_construction, ..
            } => Structure::Hnsw(HnswGraph::decode(&mut r, m, ef_construction)?),
            IndexParams::Lsh { .. } => Structure::Lsh(LshTable::decode_blob(&mut r)?),
        };
        r.expect_end()?;
        Ok(BuiltIndex {
            params,
            seed,
            dims,
            ids,
            vectors,
            structure,
        })
    }
}

fn encode_params(w: &mut ByteWriter, params: &IndexParams) {
    match *params {
        IndexParams::FlatL2 => w.put_u8(0),
        IndexParams::FlatIP => w.put_u8(1),
        IndexParams::Ivf {
            nlist,
            nprobe,
            kmeans_iters,
        } => {
            w.put_u8(2);
            w.put_u64(nlist as u64);
            w.put_u64(nprobe as u64);
            w.put_u64(kmeans_iters as u64);
        }
        IndexParams::Hnsw {
            m,
            ef_construction,
            ef_search,
        } => {
            w.put_u8(3);
            w.put_u64(m as u64);
            w.put_u64(ef_construction as u64);
            w.put_u64(ef_search as u64);
        }
        IndexParams::Lsh { n_bits } => {
            w.put_u8(4);
            w.put_u64(n_bits as u64);
        }
    }
}

fn decode_params(r: &mut ByteReader<'_>) -> Result<IndexParams> {
    match r.get_u8()? {
        0 => Ok(IndexParams::FlatL2),
        1 => Ok(IndexParams::FlatIP),
        2 => Ok(IndexParams::Ivf {
            nlist: r.get_u64()? as usize,
            nprobe: r.get_u64()? as usize,
            kmeans_iters: r.get_u64()? as usize,
        }),
        3 => Ok(IndexParams::Hnsw {
            m: r.get_u64()? as usize,
            ef_construction: r.get_u64()? as usize,
            ef_search: r.get_u64()? as usize,
        }),
        4 => Ok(IndexParams::Lsh {
            n_bits: r.get_u64()? as usize,
        }),
        tag => Err(Error::MalformedFrame(format!("unknown index tag {tag}"))),
    }
}

/// Mean matched L2 distance between centroid sets across run pairs.
///
/// For each pair of runs, centroids are matched greedily by ascending
/// distance (globally nearest unmatched pair first), which absorbs
/// permutation: identical sets in any order score exactly 0.
pub fn centroid_stability(runs: &[CentroidSet]) -> Result<f64> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument(
            "centroid_stability needs at least 2 runs".into(),
        ));
    }
    let (nlist, dims) = (runs[0].nlist(), runs[0].dims());
    for r in runs {
        if r.nlist() != nlist || r.dims() != dims {
            return Err(Error::ShapeMismatch("centroid set shapes differ".into()));
        }
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            total += greedy_matched_l2(&runs[i], &runs[j]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

fn greedy_matched_l2(a: &CentroidSet, b: &CentroidSet) -> f64 {
    let n = a.nlist();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let d = crate::metrics::vector_l2(a.row(i), b.row(j)).expect("equal dims");
            edges.push((d, i, j));
        }
    }
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut used_a = vec![false; n];
    let mut used_b = vec![false; n];
    let mut matched = 0usize;
    let mut sum = 0.0;
    for (d, i, j) in edges {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            sum += d;
            matched += 1;
            if matched == n {
                break;
            }
        }
    }
    sum / n as f64
}
