//! Random-hyperplane LSH with Hamming ranking.
//!
//! Build draws `n_bits` Gaussian hyperplanes from the index seed; each
//! vector's code sets bit i when it lies on the non-negative side of plane
//! i. Queries rank documents by Hamming distance between codes, ties broken
//! by doc id — no exact re-rank, so the only randomness source is the
//! hyperplane draw.

use super::dot;
use crate::rng::SplitMix64;
use crate::wire::{ByteReader, ByteWriter};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LshTable {
    n_bits: usize,
    words: usize,
    /// n_bits x dims hyperplane normals
    planes: Vec<f32>,
    /// `words` u64 words per document
    codes: Vec<u64>,
}

impl LshTable {
    pub fn build(n_bits: usize, dims: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let planes: Vec<f32> = (0..n_bits * dims).map(|_| rng.next_gaussian() as f32).collect();
        Self {
            n_bits,
            words: n_bits.div_ceil(64),
            planes,
            codes: Vec::new(),
        }
    }

    pub fn encode(&self, v: &[f32], dims: usize) -> Vec<u64> {
        let mut code = vec![0u64; self.words];
        for bit in 0..self.n_bits {
            let plane = &self.planes[bit * dims..(bit + 1) * dims];
            if dot(plane, v) >= 0.0 {
                code[bit / 64] |= 1u64 << (bit % 64);
            }
        }
        code
    }

    pub fn add(&mut self, v: &[f32], dims: usize) {
        let code = self.encode(v, dims);
        self.codes.extend_from_slice(&code);
    }

    /// Hamming distance between the query code and document i's code.
    pub fn hamming(&self, query_code: &[u64], i: usize) -> u32 {
        let doc = &self.codes[i * self.words..(i + 1) * self.words];
        query_code
            .iter()
            .zip(doc)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn encode_blob(&self, w: &mut ByteWriter) {
        w.put_u64(self.n_bits as u64);
        w.put_u64((self.planes.len()) as u64);
        w.put_f32_slice(&self.planes);
        w.put_u64(self.codes.len() as u64);
        for &c in &self.codes {
            w.put_u64(c);
        }
    }

    pub fn decode_blob(r: &mut ByteReader<'_>) -> Result<Self> {
        let n_bits = r.get_u64()? as usize;
        let plane_len = r.get_u64()? as usize;
        let planes = r.get_f32_vec(plane_len)?;
        let code_len = r.get_u64()? as usize;
        let mut codes = Vec::with_capacity(code_len);
        for _ in 0..code_len {
            codes.push(r.get_u64()?);
        }
        Ok(Self {
            n_bits,
            words: n_bits.div_ceil(64),
            planes,
            codes,
        })
    }
}
