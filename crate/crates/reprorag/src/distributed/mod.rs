//! Shared-nothing scatter-gather retrieval: deterministic sharding,
//! barrier-synchronized local indexing, candidate gather, and centralized
//! re-ranking at the root.
//!
//! Nodes are workers behind a message-passing interface; every message is
//! encoded through the versioned wire protocol whether it crosses a thread
//! channel or a localhost socket, so both transports exercise identical
//! bytes. The final lists are a pure function of (corpus, queries, k,
//! n_nodes, strategy, index params, seed): sharding is deterministic, each
//! node's index seed is derived by the RNG's stream-split rule, the barrier
//! orders indexing strictly before querying, and the root merge is
//! order-invariant.

pub mod protocol;

use crate::core::{
    DocumentCorpus, EmbeddingMatrix, MetricKind, QueryId, QuerySet, ResultEntry, ResultList,
};
use crate::index::{build, BuiltIndex, IndexParams};
use crate::rng::{derive_stream, fnv1a64, SplitMix64};
use crate::{Error, Result};
use protocol::Message;
use serde::{Deserialize, Serialize};
use std::sync::mpsc::{channel, Receiver, Sender};

/// Stream id reserved for deriving the seed of random sharding from a
/// top-level experiment seed.
pub const RANDOM_SHARD_STREAM: u64 = 0x5348_4152_4644;

/// How documents map to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShardingStrategy {
    /// FNV-1a-64(doc id bytes) mod n_nodes.
    Hash,
    /// Contiguous blocks in corpus order; the first (n mod n_nodes) nodes
    /// take the larger share.
    Range,
    /// Seeded permutation of the corpus, then range split.
    Random { seed: u64 },
}

impl ShardingStrategy {
    /// Random sharding whose seed is split off an experiment seed.
    pub fn random_from(seed: u64) -> Self {
        ShardingStrategy::Random {
            seed: derive_stream(seed, RANDOM_SHARD_STREAM),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShardingStrategy::Hash => "hash",
            ShardingStrategy::Range => "range",
            ShardingStrategy::Random { .. } => "random",
        }
    }
}

/// A complete partition of the corpus across nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardAssignment {
    pub n_nodes: u32,
    /// node of the document at each corpus position
    pub node_of: Vec<u32>,
}

impl ShardAssignment {
    /// Corpus positions owned by `node`, in corpus order.
    pub fn positions_for(&self, node: u32) -> Vec<usize> {
        self.node_of
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == node)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Partition a corpus across `n_nodes` under the given strategy. Pure:
/// identical inputs always produce the identical assignment.
pub fn shard(corpus: &DocumentCorpus, n_nodes: u32, strategy: ShardingStrategy) -> Result<ShardAssignment> {
    if n_nodes == 0 {
        return Err(Error::InvalidArgument("n_nodes must be >= 1".into()));
    }
    let n = corpus.len();
    let node_of = match strategy {
        ShardingStrategy::Hash => corpus
            .ids
            .iter()
            .map(|id| (fnv1a64(id.as_bytes()) % n_nodes as u64) as u32)
            .collect(),
        ShardingStrategy::Range => range_split(n, n_nodes, None),
        ShardingStrategy::Random { seed } => {
            let mut order: Vec<usize> = (0..n).collect();
            SplitMix64::new(seed).shuffle(&mut order);
            range_split(n, n_nodes, Some(&order))
        }
    };
    Ok(ShardAssignment { n_nodes, node_of })
}

/// Contiguous block split: the first (n mod m) nodes get ceil(n/m) items,
/// the rest floor(n/m). With `order` given, blocks are taken over the
/// permuted sequence.
fn range_split(n: usize, n_nodes: u32, order: Option<&[usize]>) -> Vec<u32> {
    let m = n_nodes as usize;
    let base = n / m;
    let extra = n % m;
    let mut node_of = vec![0u32; n];
    let mut pos = 0usize;
    for node in 0..m {
        let size = base + usize::from(node < extra);
        for i in pos..pos + size {
            let target = order.map_or(i, |o| o[i]);
            node_of[target] = node as u32;
        }
        pos += size;
    }
    node_of
}

/// Candidates from one node for one query, canonically sorted, carrying the
/// true metric scores so the root can re-rank without touching any vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub node_id: u32,
    pub query_id: QueryId,
    pub entries: Vec<ResultEntry>,
}

/// Merge per-node candidate batches into the global top-k list.
///
/// The union is canonically sorted and truncated, so the output cannot
/// depend on batch arrival order. Candidate sets from distinct shards are
/// disjoint; if overlapping ids ever arrive the best-ranked copy wins.
pub fn merge_candidates(
    batches: &[CandidateBatch],
    k: usize,
    metric: MetricKind,
) -> Result<ResultList> {
    if batches.is_empty() {
        return Err(Error::EmptyInput("merge_candidates batches".into()));
    }
    let query_id = batches[0].query_id.clone();
    if batches.iter().any(|b| b.query_id != query_id) {
        return Err(Error::InvalidArgument(
            "merge_candidates received mixed query ids".into(),
        ));
    }
    let union: Vec<ResultEntry> = batches.iter().flat_map(|b| b.entries.iter().cloned()).collect();
    let mut sorted = crate::core::canonical_sort(union, metric)?;
    let mut seen = std::collections::HashSet::new();
    sorted.retain(|e| seen.insert(e.doc_id.clone()));
    sorted.truncate(k);
    Ok(ResultList {
        query_id,
        entries: sorted,
    })
}

/// Transport abstraction: frames are opaque byte vectors.
trait FrameTransport {
    fn send(&mut self, frame: Vec<u8>) -> Result<()>;
    fn recv(&mut self) -> Result<Vec<u8>>;
}

struct ChannelTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl FrameTransport for ChannelTransport {
    fn send(&mut self, frame: Vec<u8>) -> Result<()> {
        self.tx
            .send(frame)
            .map_err(|_| Error::MalformedFrame("peer hung up".into()))
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        self.rx
            .recv()
            .map_err(|_| Error::MalformedFrame("peer hung up".into()))
    }
}

struct SocketTransport {
    stream: std::net::TcpStream,
}

impl FrameTransport for SocketTransport {
    fn send(&mut self, frame: Vec<u8>) -> Result<()> {
        protocol::write_frame(&mut self.stream, &frame)
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        protocol::read_frame(&mut self.stream)
    }
}

/// Worker side of the protocol. The build configuration arrives out of
/// band (every node launches with the same arguments, as MPI ranks would);
/// node identity, documents, and queries arrive as messages.
fn worker_loop<T: FrameTransport>(
    mut transport: T,
    params: IndexParams,
    experiment_seed: u64,
) -> Result<()> {
    let mut node_id: u32 = u32::MAX;
    let mut index: Option<BuiltIndex> = None;
    loop {
        let msg = Message::decode(&transport.recv()?)?;
        match msg {
            Message::Hello { node_id: id } => node_id = id,
            Message::Shard { dims, ids, vectors } => {
                if !ids.is_empty() {
                    let embeddings =
                        EmbeddingMatrix::new(ids.len(), dims as usize, vectors, crate::core::PrecisionTag::FP32)?;
                    let corpus = DocumentCorpus::new(ids, embeddings)?;
                    let node_seed = derive_stream(experiment_seed, node_id as u64);
                    index = Some(build(params, &corpus, node_seed)?);
                }
                transport.send(Message::BarrierAck { node_id }.encode())?;
            }
            Message::Query {
                query_id,
                vector,
                k,
            } => {
                let entries = match &index {
                    Some(idx) => {
                        let queries = QuerySet::new(
                            vec![query_id.clone()],
                            EmbeddingMatrix::new(
                                1,
                                vector.len(),
                                vector,
                                crate::core::PrecisionTag::FP32,
                            )?,
                        )?;
                        idx.search(&queries, k as usize)?
                            .pop()
                            .map(|l| l.entries)
                            .unwrap_or_default()
                    }
                    None => Vec::new(), // empty shard: legal, answer empty
                };
                transport.send(
                    Message::Candidates {
                        node_id,
                        query_id,
                        entries,
                    }
                    .encode(),
                )?;
            }
            Message::Done => return Ok(()),
            other => {
                return Err(Error::MalformedFrame(format!(
                    "unexpected message at worker: {other:?}"
                )))
            }
        }
    }
}

/// Root side: shard, hello+shard each node, wait for every barrier ack,
/// then broadcast queries one at a time and gather candidate batches.
fn root_loop<T: FrameTransport>(
    transports: &mut [T],
    corpus: &DocumentCorpus,
    queries: &QuerySet,
    k: usize,
    assignment: &ShardAssignment,
) -> Result<Vec<Vec<CandidateBatch>>> {
    let dims = corpus.embeddings.dims() as u32;
    for (node, transport) in transports.iter_mut().enumerate() {
        transport.send(Message::Hello { node_id: node as u32 }.encode())?;
        let positions = assignment.positions_for(node as u32);
        let shard_corpus = corpus.select(&positions)?;
        transport.send(
            Message::Shard {
                dims,
                ids: shard_corpus.ids.clone(),
                vectors: shard_corpus.embeddings.data().to_vec(),
            }
            .encode(),
        )?;
    }

    // Barrier: every node must have finished indexing before any query is
    // broadcast.
    let mut acked = vec![false; transports.len()];
    for (node, transport) in transports.iter_mut().enumerate() {
        match Message::decode(&transport.recv()?)? {
            Message::BarrierAck { node_id } => acked[node_id as usize] = true,
            other => {
                return Err(Error::MalformedFrame(format!(
                    "expected BARRIER_ACK from node {node}, got {other:?}"
                )))
            }
        }
    }
    if !acked.iter().all(|&a| a) {
        return Err(Error::MalformedFrame("missing barrier ack".into()));
    }

    let mut gathered = Vec::with_capacity(queries.len());
    for qi in 0..queries.len() {
        let query_msg = Message::Query {
            query_id: queries.ids[qi].clone(),
            vector: queries.embeddings.row(qi).to_vec(),
            k: k as u64,
        }
        .encode();
        for transport in transports.iter_mut() {
            transport.send(query_msg.clone())?;
        }
        let mut batches = Vec::with_capacity(transports.len());
        for transport in transports.iter_mut() {
            match Message::decode(&transport.recv()?)? {
                Message::Candidates {
                    node_id,
                    query_id,
                    entries,
                } => batches.push(CandidateBatch {
                    node_id,
                    query_id,
                    entries,
                }),
                other => {
                    return Err(Error::MalformedFrame(format!(
                        "expected CANDIDATES, got {other:?}"
                    )))
                }
            }
        }
        gathered.push(batches);
    }

    for transport in transports.iter_mut() {
        transport.send(Message::Done.encode())?;
    }
    Ok(gathered)
}

/// Which transport carries the frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// In-process workers over thread channels.
    Channel,
    /// Worker threads behind localhost TCP sockets; same frames, real
    /// byte streams.
    Socket,
}

/// Scatter a corpus, run the protocol, and return the raw per-query
/// candidate batches (one inner vec per query, one batch per node).
pub fn scatter_gather(
    corpus: &DocumentCorpus,
    queries: &QuerySet,
    k: usize,
    n_nodes: u32,
    strategy: ShardingStrategy,
    index_params: IndexParams,
    seed: u64,
    transport: Transport,
) -> Result<Vec<Vec<CandidateBatch>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    index_params.validate()?;
    let assignment = shard(corpus, n_nodes, strategy)?;

    match transport {
        Transport::Channel => {
            let mut root_sides = Vec::with_capacity(n_nodes as usize);
            let mut worker_sides = Vec::with_capacity(n_nodes as usize);
            for _ in 0..n_nodes {
                let (to_worker_tx, to_worker_rx) = channel();
                let (to_root_tx, to_root_rx) = channel();
                root_sides.push(ChannelTransport {
                    tx: to_worker_tx,
                    rx: to_root_rx,
                });
                worker_sides.push(ChannelTransport {
                    tx: to_root_tx,
                    rx: to_worker_rx,
                });
            }
            run_with_workers(worker_sides, &mut root_sides, corpus, queries, k, &assignment, index_params, seed)
        }
        Transport::Socket => {
            let mut listeners = Vec::with_capacity(n_nodes as usize);
            let mut root_sides = Vec::with_capacity(n_nodes as usize);
            for _ in 0..n_nodes {
                let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
                let addr = listener.local_addr()?;
                listeners.push(listener);
                root_sides.push(SocketTransport {
                    stream: std::net::TcpStream::connect(addr)?,
                });
            }
            let worker_sides: Vec<SocketTransport> = listeners
                .into_iter()
                .map(|l| {
                    let (stream, _) = l.accept()?;
                    Ok(SocketTransport { stream })
                })
                .collect::<Result<_>>()?;
            run_with_workers(worker_sides, &mut root_sides, corpus, queries, k, &assignment, index_params, seed)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_with_workers<T: FrameTransport + Send>(
    worker_sides: Vec<T>,
    root_sides: &mut [impl FrameTransport],
    corpus: &DocumentCorpus,
    queries: &QuerySet,
    k: usize,
    assignment: &ShardAssignment,
    index_params: IndexParams,
    seed: u64,
) -> Result<Vec<Vec<CandidateBatch>>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = worker_sides
            .into_iter()
            .map(|transport| scope.spawn(move || worker_loop(transport, index_params, seed)))
            .collect();
        let gathered = root_loop(root_sides, corpus, queries, k, assignment)?;
        for handle in handles {
            handle
                .join()
                .map_err(|_| Error::MalformedFrame("worker panicked".into()))??;
        }
        Ok(gathered)
    })
}

/// Full distributed search: scatter, gather, and merge into final global
/// top-k lists.
#[allow(clippy::too_many_arguments)]
pub fn distributed_search(
    corpus: &DocumentCorpus,
    queries: &QuerySet,
    k: usize,
    n_nodes: u32,
    strategy: ShardingStrategy,
    index_params: IndexParams,
    seed: u64,
    transport: Transport,
) -> Result<Vec<ResultList>> {
    let gathered = scatter_gather(corpus, queries, k, n_nodes, strategy, index_params, seed, transport)?;
    let metric = index_params.metric_kind();
    gathered
        .iter()
        .map(|batches| merge_candidates(batches, k, metric))
        .collect()
}
