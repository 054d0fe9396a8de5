//! File formats: binary embedding files ("RRE1"), JSON report files, and
//! plot-data CSV emission.
//!
//! Embedding file layout (little-endian):
//! `"RRE1" | u16 version | u32 dims | u64 count | u8 dtype (0 = FP32) |
//! count*dims f32 values, row-major`. An optional sidecar at
//! `<path>.ids` carries one UTF-8 id per line; without it, ids default to
//! zero-padded decimal indices. Reports are JSON (diffable, full
//! round-trip float precision); embeddings are binary (compact,
//! bit-exact).

use crate::core::{DocId, DocumentCorpus, EmbeddingMatrix, PrecisionTag, QueryId, QuerySet};
use crate::harness::ReproReport;
use crate::wire::{ByteReader, ByteWriter};
use crate::{Error, Result};
use std::path::{Path, PathBuf};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"RRE1";
pub const EMBEDDING_VERSION: u16 = 1;
const DTYPE_FP32: u8 = 0;

/// Write a matrix as an RRE1 file; ids, when given, go to the `<path>.ids`
/// sidecar (one per line).
pub fn write_embeddings(path: &Path, matrix: &EmbeddingMatrix, ids: Option<&[String]>) -> Result<()> {
    if let Some(ids) = ids {
        if ids.len() != matrix.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids vs {} rows",
                ids.len(),
                matrix.rows()
            )));
        }
    }
    let mut w = ByteWriter::new();
    w.put_raw(EMBEDDING_MAGIC);
    w.put_u16(EMBEDDING_VERSION);
    w.put_u32(matrix.dims() as u32);
    w.put_u64(matrix.rows() as u64);
    w.put_u8(DTYPE_FP32);
    w.put_f32_slice(matrix.data());
    std::fs::write(path, w.into_bytes())?;
    if let Some(ids) = ids {
        let mut sidecar = String::with_capacity(ids.len() * 8);
        for id in ids {
            sidecar.push_str(id);
            sidecar.push('\n');
        }
        std::fs::write(sidecar_path(path), sidecar)?;
    }
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".ids");
    PathBuf::from(os)
}

/// Read an RRE1 file plus its optional id sidecar.
pub fn read_embeddings(path: &Path) -> Result<(EmbeddingMatrix, Option<Vec<String>>)> {
    let bytes = std::fs::read(path)?;
    let mut r = ByteReader::new(&bytes);
    r.expect_magic(EMBEDDING_MAGIC)?;
    let version = r.get_u16()?;
    if version != EMBEDDING_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dims = r.get_u32()? as usize;
    let count = r.get_u64()? as usize;
    let dtype = r.get_u8()?;
    if dtype != DTYPE_FP32 {
        return Err(Error::MalformedFrame(format!(
            "unsupported dtype tag {dtype}"
        )));
    }
    let expected = (count * dims * 4) as u64;
    let found = r.remaining() as u64;
    if expected != found {
        return Err(Error::PayloadMismatch { expected, found });
    }
    let data = r.get_f32_vec(count * dims)?;
    // matrix construction validates finiteness
    let matrix = EmbeddingMatrix::new(count, dims, data, PrecisionTag::FP32)?;

    let sidecar = sidecar_path(path);
    let ids = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)?;
        let ids: Vec<String> = text.lines().map(|l| l.to_string()).collect();
        if ids.len() != count {
            return Err(Error::ShapeMismatch(format!(
                "sidecar has {} ids for {} rows",
                ids.len(),
                count
            )));
        }
        Some(ids)
    } else {
        None
    };
    Ok((matrix, ids))
}

/// Zero-padded default ids when no sidecar is present.
fn default_ids(count: usize) -> Vec<String> {
    let width = count.saturating_sub(1).to_string().len().max(6);
    (0..count).map(|i| format!("{i:0width$}")).collect()
}

/// Read an embedding file as a document corpus (duplicate ids rejected).
pub fn read_corpus(path: &Path) -> Result<DocumentCorpus> {
    let (matrix, ids) = read_embeddings(path)?;
    let ids = ids.unwrap_or_else(|| default_ids(matrix.rows()));
    DocumentCorpus::new(ids.into_iter().map(DocId).collect(), matrix)
}

/// Read an embedding file as a query set.
pub fn read_queries(path: &Path) -> Result<QuerySet> {
    let (matrix, ids) = read_embeddings(path)?;
    let ids = ids.unwrap_or_else(|| default_ids(matrix.rows()));
    QuerySet::new(ids.into_iter().map(QueryId).collect(), matrix)
}

/// Write a report as pretty JSON; with `redact_metadata` the wall-clock
/// block is dropped so files from equal-seed runs compare byte-equal.
pub fn write_report(report: &ReproReport, path: &Path, redact_metadata: bool) -> Result<()> {
    let json = if redact_metadata {
        report.to_redacted_json()?
    } else {
        report.to_json()?
    };
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<ReproReport> {
    let text = std::fs::read_to_string(path)?;
    ReproReport::from_json(&text)
}

/// Emit one CSV per figure analogue from a report:
/// `distribution_<metric>.csv` (one row per query), `drift_heatmap_l2.csv`
/// and `drift_heatmap_cosine.csv` (4x4 format grid), and `latency_ms.csv`.
/// Emission is deterministic: the same report always produces the same
/// bytes.
pub fn emit_plot_csv(report: &ReproReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    for (metric, values) in &report.per_query {
        let mut csv = String::from("query_index,value\n");
        for (i, v) in values.iter().enumerate() {
            csv.push_str(&format!("{i},{v}\n"));
        }
        let path = out_dir.join(format!("distribution_{metric}.csv"));
        std::fs::write(&path, csv)?;
        written.push(path);
    }

    if let Some(drift) = &report.drift {
        for (name, grid) in [("l2", &drift.l2), ("cosine", &drift.cosine)] {
            let mut csv = String::from("format");
            for f in &drift.formats {
                csv.push(',');
                csv.push_str(f);
            }
            csv.push('\n');
            for (i, f) in drift.formats.iter().enumerate() {
                csv.push_str(f);
                for v in &grid[i] {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
            let path = out_dir.join(format!("drift_heatmap_{name}.csv"));
            std::fs::write(&path, csv)?;
            written.push(path);
        }
    }

    if !report.metadata.timings_ms.is_empty() {
        let mut csv = String::from("label,milliseconds\n");
        for (label, ms) in &report.metadata.timings_ms {
            csv.push_str(&format!("{label},{ms}\n"));
        }
        let path = out_dir.join("latency_ms.csv");
        std::fs::write(&path, csv)?;
        written.push(path);
    }

    Ok(written)
}
