//! Hierarchical navigable small world graph over squared-L2 distance.
//!
//! Randomness enters only through the level assignment, drawn from the
//! index's own SplitMix64 stream: level = floor(-ln(u) * mL), mL = 1/ln(M).
//! The stream lives in the graph and keeps advancing across later
//! insertions, so "build then add" equals one longer build with the same
//! seed. The entry point is the first node to reach the current top layer.
//!
//! Neighbor selection uses the standard diversity heuristic (keep a
//! candidate only if it is closer to the base point than to every
//! already-kept neighbor, then fill any remaining slots with the nearest
//! discards). Plain nearest-M selection leaves clustered corpora as
//! disconnected per-cluster islands — a cluster with no representative on
//! the upper layers becomes unreachable and its queries return arbitrary
//! results. The heuristic is exactly as deterministic: candidates are
//! processed in (distance, id) order. Layer 0 allows 2M links (the usual
//! degree doubling).
//!
//! Every candidate ordering is by (distance, node id), a total order, so
//! construction and search are deterministic regardless of input timing.

use super::l2_sq;
use crate::rng::SplitMix64;
use crate::wire::{ByteReader, ByteWriter};
use crate::Result;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Level cap; the geometric tail beyond this is unreachable in practice.
const MAX_LEVEL: usize = 32;

/// f32 ordered by total order; distances here are finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF32(pub f32);

impl Eq for OrdF32 {}

impl PartialOrd for OrdF32 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF32 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HnswGraph {
    m: usize,
    ef_construction: usize,
    ml: f64,
    entry: u32,
    max_level: usize,
    /// levels[i] = top layer of node i
    levels: Vec<u8>,
    /// neighbors[i][layer] = adjacency of node i at that layer
    neighbors: Vec<Vec<Vec<u32>>>,
    rng: SplitMix64,
}

impl HnswGraph {
    pub fn new(m: usize, ef_construction: usize, seed: u64) -> Self {
        Self {
            m,
            ef_construction,
            ml: 1.0 / (m as f64).ln(),
            entry: 0,
            max_level: 0,
            levels: Vec::new(),
            neighbors: Vec::new(),
            rng: SplitMix64::new(seed),
        }
    }

    fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            self.m * 2
        } else {
            self.m
        }
    }

    fn sample_level(&mut self) -> usize {
        let mut u = self.rng.next_f64();
        if u <= 0.0 {
            u = f64::MIN_POSITIVE;
        }
        ((-u.ln() * self.ml).floor() as usize).min(MAX_LEVEL)
    }

    /// Insert the node whose vector is row `id` of `vectors` (n x dims,
    /// row-major, rows 0..=id present).
    pub fn insert(&mut self, id: u32, vectors: &[f32], dims: usize) {
        let level = self.sample_level();
        self.levels.push(level as u8);
        self.neighbors.push(vec![Vec::new(); level + 1]);
        debug_assert_eq!(self.levels.len() as u32, id + 1);

        if id == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }

        let q = row(vectors, dims, id as usize);
        let mut ep = self.entry;
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.greedy_descend(q, ep, layer, vectors, dims);
        }

        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(q, ep, self.ef_construction, layer, vectors, dims);
            let cap = self.max_degree(layer);
            let selected = select_diverse(&found, self.m, vectors, dims);
            for &nb in &selected {
                self.neighbors[id as usize][layer].push(nb);
                self.neighbors[nb as usize][layer].push(id);
                if self.neighbors[nb as usize][layer].len() > cap {
                    self.prune(nb, layer, vectors, dims);
                }
            }
            ep = found[0].1;
        }

        if level > self.max_level {
            self.entry = id;
            self.max_level = level;
        }
    }

    /// Re-select an overfull node's adjacency with the diversity heuristic.
    fn prune(&mut self, node: u32, layer: usize, vectors: &[f32], dims: usize) {
        let cap = self.max_degree(layer);
        let base = row(vectors, dims, node as usize);
        let mut ranked: Vec<(f32, u32)> = self.neighbors[node as usize][layer]
            .iter()
            .map(|&nb| (l2_sq(base, row(vectors, dims, nb as usize)), nb))
            .collect();
        ranked.sort_unstable_by_key(|&(d, id)| (OrdF32(d), id));
        self.neighbors[node as usize][layer] = select_diverse(&ranked, cap, vectors, dims);
    }

    /// Hill-climb to the (distance, id)-minimal reachable node on a layer.
    fn greedy_descend(&self, q: &[f32], start: u32, layer: usize, vectors: &[f32], dims: usize) -> u32 {
        let mut current = start;
        let mut current_d = l2_sq(q, row(vectors, dims, current as usize));
        loop {
            let mut improved = false;
            for &nb in &self.neighbors[current as usize][layer] {
                let d = l2_sq(q, row(vectors, dims, nb as usize));
                if (OrdF32(d), nb) < (OrdF32(current_d), current) {
                    current = nb;
                    current_d = d;
                    improved = true;
                }
            }
            if !improved {
                return current;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` nodes sorted ascending
    /// by (distance, id).
    fn search_layer(
        &self,
        q: &[f32],
        ep: u32,
        ef: usize,
        layer: usize,
        vectors: &[f32],
        dims: usize,
    ) -> Vec<(f32, u32)> {
        let n = self.levels.len();
        let mut visited = vec![false; n];
        let mut candidates: BinaryHeap<Reverse<(OrdF32, u32)>> = BinaryHeap::new();
        let mut best: BinaryHeap<(OrdF32, u32)> = BinaryHeap::new();

        let d0 = l2_sq(q, row(vectors, dims, ep as usize));
        visited[ep as usize] = true;
        candidates.push(Reverse((OrdF32(d0), ep)));
        best.push((OrdF32(d0), ep));

        while let Some(Reverse((d, u))) = candidates.pop() {
            if best.len() >= ef && (d, u) > *best.peek().unwrap() {
                break;
            }
            for &v in &self.neighbors[u as usize][layer] {
                if visited[v as usize] {
                    continue;
                }
                visited[v as usize] = true;
                let dv = OrdF32(l2_sq(q, row(vectors, dims, v as usize)));
                if best.len() < ef || (dv, v) < *best.peek().unwrap() {
                    candidates.push(Reverse((dv, v)));
                    best.push((dv, v));
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }

        let mut out: Vec<(f32, u32)> = best.into_iter().map(|(d, id)| (d.0, id)).collect();
        out.sort_unstable_by_key(|&(d, id)| (OrdF32(d), id));
        out
    }

    /// Top-`ef` candidates for a query, ascending (distance, id).
    pub fn search(&self, q: &[f32], ef: usize, vectors: &[f32], dims: usize) -> Vec<(f32, u32)> {
        if self.levels.is_empty() {
            return Vec::new();
        }
        let mut ep = self.entry;
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy_descend(q, ep, layer, vectors, dims);
        }
        self.search_layer(q, ep, ef, 0, vectors, dims)
    }

    /// (reachable nodes from the entry at layer 0, total nodes); used by
    /// connectivity diagnostics.
    pub fn layer0_reachability(&self) -> (usize, usize) {
        let n = self.levels.len();
        if n == 0 {
            return (0, 0);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.entry];
        seen[self.entry as usize] = true;
        let mut count = 0;
        while let Some(u) = stack.pop() {
            count += 1;
            for &v in &self.neighbors[u as usize][0] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
        (count, n)
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.put_u32(self.entry);
        w.put_u32(self.max_level as u32);
        w.put_u64(self.rng.state());
        w.put_u64(self.levels.len() as u64);
        for (i, &level) in self.levels.iter().enumerate() {
            w.put_u8(level);
            for layer in &self.neighbors[i] {
                w.put_u32(layer.len() as u32);
                for &nb in layer {
                    w.put_u32(nb);
                }
            }
        }
    }

    pub fn decode(r: &mut ByteReader<'_>, m: usize, ef_construction: usize) -> Result<Self> {
        let entry = r.get_u32()?;
        let max_level = r.get_u32()? as usize;
        let rng = SplitMix64::from_state(r.get_u64()?);
        let n = r.get_u64()? as usize;
        let mut levels = Vec::with_capacity(n);
        let mut neighbors = Vec::with_capacity(n);
        for _ in 0..n {
            let level = r.get_u8()?;
            levels.push(level);
            let mut layers = Vec::with_capacity(level as usize + 1);
            for _ in 0..=level {
                let len = r.get_u32()? as usize;
                let mut adj = Vec::with_capacity(len);
                for _ in 0..len {
                    adj.push(r.get_u32()?);
                }
                layers.push(adj);
            }
            neighbors.push(layers);
        }
        Ok(Self {
            m,
            ef_construction,
            ml: 1.0 / (m as f64).ln(),
            entry,
            max_level,
            levels,
            neighbors,
            rng,
        })
    }
}

/// Diversity selection over candidates sorted ascending by (distance to
/// the base point, id): keep a candidate only when it is closer to the
/// base point than to every neighbor kept so far, then fill remaining
/// slots with the nearest discarded candidates. Keeps one link per
/// "direction", which is what holds clustered graphs together.
fn select_diverse(candidates: &[(f32, u32)], max: usize, vectors: &[f32], dims: usize) -> Vec<u32> {
    let mut kept: Vec<(f32, u32)> = Vec::with_capacity(max);
    let mut discarded: Vec<u32> = Vec::new();
    for &(d_base, c) in candidates {
        if kept.len() == max {
            break;
        }
        let c_row = row(vectors, dims, c as usize);
        let diverse = kept
            .iter()
            .all(|&(_, r)| l2_sq(c_row, row(vectors, dims, r as usize)) > d_base);
        if diverse {
            kept.push((d_base, c));
        } else {
            discarded.push(c);
        }
    }
    let mut out: Vec<u32> = kept.into_iter().map(|(_, id)| id).collect();
    for c in discarded {
        if out.len() == max {
            break;
        }
        out.push(c);
    }
    out
}

#[inline]
fn row(vectors: &[f32], dims: usize, i: usize) -> &[f32] {
    &vectors[i * dims..(i + 1) * dims]
}
