//! Wire protocol for scatter-gather retrieval: little-endian,
//! length-prefixed frames, each carrying the 4-byte magic "VXRP" and a u16
//! format version.
//!
//! Frame layout: `u32 payload_len | payload`, where payload is
//! `"VXRP" | u16 version | u8 tag | fields`. The same bytes flow over
//! in-process channels and over localhost sockets; only the transport
//! differs.

use crate::core::{DocId, QueryId, ResultEntry};
use crate::wire::{ByteReader, ByteWriter};
use crate::{Error, Result};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"VXRP";
pub const VERSION: u16 = 1;

/// Messages exchanged between the root and node workers.
///
/// Flow: root sends `Hello` (assigning the node id) and `Shard` (the node's
/// documents); the worker builds its local index and answers `BarrierAck`.
/// The root releases queries only after collecting every ack — that is the
/// barrier. Each `Query` is answered by one `Candidates`; `Done` ends the
/// session.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        node_id: u32,
    },
    Shard {
        dims: u32,
        ids: Vec<DocId>,
        vectors: Vec<f32>,
    },
    BarrierAck {
        node_id: u32,
    },
    Query {
        query_id: QueryId,
        vector: Vec<f32>,
        k: u64,
    },
    Candidates {
        node_id: u32,
        query_id: QueryId,
        entries: Vec<ResultEntry>,
    },
    Done,
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_raw(MAGIC);
        w.put_u16(VERSION);
        match self {
            Message::Hello { node_id } => {
                w.put_u8(0);
                w.put_u32(*node_id);
            }
            Message::Shard { dims, ids, vectors } => {
                w.put_u8(1);
                w.put_u32(*dims);
                w.put_u64(ids.len() as u64);
                for id in ids {
                    w.put_str(&id.0);
                }
                w.put_f32_slice(vectors);
            }
            Message::BarrierAck { node_id } => {
                w.put_u8(2);
                w.put_u32(*node_id);
            }
            Message::Query {
                query_id,
                vector,
                k,
            } => {
                w.put_u8(3);
                w.put_str(&query_id.0);
                w.put_u32(vector.len() as u32);
                w.put_f32_slice(vector);
                w.put_u64(*k);
            }
            Message::Candidates {
                node_id,
                query_id,
                entries,
            } => {
                w.put_u8(4);
                w.put_u32(*node_id);
                w.put_str(&query_id.0);
                w.put_u32(entries.len() as u32);
                for e in entries {
                    w.put_str(&e.doc_id.0);
                    w.put_f32(e.score);
                }
            }
            Message::Done => w.put_u8(5),
        }
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Message> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(MAGIC)?;
        let version = r.get_u16()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let msg = match r.get_u8()? {
            0 => Message::Hello {
                node_id: r.get_u32()?,
            },
            1 => {
                let dims = r.get_u32()?;
                let count = r.get_u64()? as usize;
                let mut ids = Vec::with_capacity(count);
                for _ in 0..count {
                    ids.push(DocId(r.get_str()?));
                }
                let vectors = r.get_f32_vec(count * dims as usize)?;
                Message::Shard { dims, ids, vectors }
            }
            2 => Message::BarrierAck {
                node_id: r.get_u32()?,
            },
            3 => {
                let query_id = QueryId(r.get_str()?);
                let len = r.get_u32()? as usize;
                let vector = r.get_f32_vec(len)?;
                let k = r.get_u64()?;
                Message::Query {
                    query_id,
                    vector,
                    k,
                }
            }
            4 => {
                let node_id = r.get_u32()?;
                let query_id = QueryId(r.get_str()?);
                let count = r.get_u32()? as usize;
                let mut entries = Vec::with_capacity(count);
                for _ in 0..count {
                    let doc_id = DocId(r.get_str()?);
                    let score = r.get_f32()?;
                    entries.push(ResultEntry { doc_id, score });
                }
                Message::Candidates {
                    node_id,
                    query_id,
                    entries,
                }
            }
            5 => Message::Done,
            tag => return Err(Error::MalformedFrame(format!("unknown message tag {tag}"))),
        };
        r.expect_end()?;
        Ok(msg)
    }
}

/// One frame = u32 payload length + payload bytes.
pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let len = u32::from_le_bytes(len_bytes) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(msg: Message) {
        let bytes = msg.encode();
        assert_eq!(Message::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn all_message_types_roundtrip() {
        roundtrip(Message::Hello { node_id: 3 });
        roundtrip(Message::Shard {
            dims: 2,
            ids: vec![DocId("d0".into()), DocId("d1".into())],
            vectors: vec![0.1, -0.2, 0.3, 0.4],
        });
        roundtrip(Message::BarrierAck { node_id: 1 });
        roundtrip(Message::Query {
            query_id: QueryId("q7".into()),
            vector: vec![1.0, 2.0, 3.0],
            k: 50,
        });
        roundtrip(Message::Candidates {
            node_id: 2,
            query_id: QueryId("q7".into()),
            entries: vec![
                ResultEntry {
                    doc_id: DocId("a".into()),
                    score: 0.5,
                },
                ResultEntry {
                    doc_id: DocId("b".into()),
                    score: 1.5,
                },
            ],
        });
        roundtrip(Message::Done);
    }

    #[test]
    fn bad_magic_and_version_rejected() {
        let mut bytes = Message::Done.encode();
        bytes[0] = b'Z';
        assert!(matches!(
            Message::decode(&bytes),
            Err(Error::BadMagic { .. })
        ));
        let mut bytes = Message::Done.encode();
        bytes[4] = 9;
        assert!(matches!(
            Message::decode(&bytes),
            Err(Error::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn trailing_garbage_rejected() {
        let mut bytes = Message::Hello { node_id: 0 }.encode();
        bytes.push(0);
        assert!(Message::decode(&bytes).is_err());
    }

    #[test]
    fn frames_roundtrip_over_a_byte_stream() {
        let messages = vec![
            Message::Hello { node_id: 0 },
            Message::Query {
                query_id: QueryId("q".into()),
                vector: vec![0.5; 8],
                k: 3,
            },
            Message::Done,
        ];
        let mut stream = Vec::new();
        for m in &messages {
            write_frame(&mut stream, &m.encode()).unwrap();
        }
        let mut cursor = std::io::Cursor::new(stream);
        for m in &messages {
            let payload = read_frame(&mut cursor).unwrap();
            assert_eq!(&Message::decode(&payload).unwrap(), m);
        }
    }
}
