//! Checkpoint container shared by every learned module.
//!
//! Layout: an 8-byte little-endian header length, a JSON header
//! describing the parameter blocks, then the raw little-endian f64
//! blocks in header order. Round-trips are byte-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DiffError;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockDesc {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub seed: u64,
    pub step: u64,
    pub blocks: Vec<BlockDesc>,
    /// Module-specific metadata (normalization statistics, head counts, ...).
    /// BTreeMap keeps serialization order stable.
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    /// Block payloads in header order.
    pub data: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn block(&self, name: &str) -> Result<(&BlockDesc, &[f64]), DiffError> {
        self.header
            .blocks
            .iter()
            .position(|b| b.name == name)
            .map(|i| (&self.header.blocks[i], self.data[i].as_slice()))
            .ok_or_else(|| DiffError::MissingBlock(name.to_string()))
    }

    pub fn meta_u64(&self, key: &str) -> Result<u64, DiffError> {
        self.header
            .meta
            .get(key)
            .and_then(|v| v.as_u64())
            .ok_or_else(|| DiffError::MissingMeta(key.to_string()))
    }

    pub fn meta_str(&self, key: &str) -> Result<&str, DiffError> {
        self.header
            .meta
            .get(key)
            .and_then(|v| v.as_str())
            .ok_or_else(|| DiffError::MissingMeta(key.to_string()))
    }
}

pub fn save(path: &Path, header: &CheckpointHeader, blocks: &[&[f64]]) -> Result<(), DiffError> {
    if header.blocks.len() != blocks.len() {
        return Err(DiffError::ShapeMismatch {
            context: "checkpoint::save",
            expected: (header.blocks.len(), 0),
            got: (blocks.len(), 0),
        });
    }
    for (desc, data) in header.blocks.iter().zip(blocks) {
        if desc.rows * desc.cols != data.len() {
            return Err(DiffError::ShapeMismatch {
                context: "checkpoint::save block",
                expected: (desc.rows, desc.cols),
                got: (data.len(), 1),
            });
        }
    }
    let head = serde_json::to_vec(header).map_err(|e| DiffError::Io(e.to_string()))?;
    let mut f = File::create(path).map_err(|e| DiffError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(&(head.len() as u64).to_le_bytes())
        .and_then(|_| f.write_all(&head))
        .map_err(|e| DiffError::Io(e.to_string()))?;
    for data in blocks {
        let mut bytes = Vec::with_capacity(data.len() * 8);
        for v in *data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&bytes).map_err(|e| DiffError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, DiffError> {
    let mut f = File::open(path).map_err(|e| DiffError::Io(format!("{}: {e}", path.display())))?;
    let mut len_bytes = [0u8; 8];
    f.read_exact(&mut len_bytes)
        .map_err(|e| DiffError::Io(format!("{}: truncated header length: {e}", path.display())))?;
    let head_len = u64::from_le_bytes(len_bytes) as usize;
    let mut head = vec![0u8; head_len];
    f.read_exact(&mut head)
        .map_err(|e| DiffError::Io(format!("{}: truncated header: {e}", path.display())))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&head).map_err(|e| DiffError::Io(format!("bad header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(DiffError::Io(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    let mut data = Vec::with_capacity(header.blocks.len());
    for desc in &header.blocks {
        let n = desc.rows * desc.cols;
        let mut bytes = vec![0u8; n * 8];
        f.read_exact(&mut bytes).map_err(|e| {
            DiffError::Io(format!("{}: truncated block '{}': {e}", path.display(), desc.name))
        })?;
        let mut vals = Vec::with_capacity(n);
        for chunk in bytes.chunks_exact(8) {
            vals.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        data.push(vals);
    }
    Ok(Checkpoint { header, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let mut meta = BTreeMap::new();
        meta.insert("kind".into(), serde_json::json!("test"));
        meta.insert("m".into(), serde_json::json!(4));
        let header = CheckpointHeader {
            version: CHECKPOINT_VERSION,
            seed: 42,
            step: 17,
            blocks: vec![
                BlockDesc { name: "w".into(), rows: 2, cols: 3, activation: Some("tanh".into()) },
                BlockDesc { name: "b".into(), rows: 1, cols: 2, activation: None },
            ],
            meta,
        };
        let w = [0.1, -0.25, f64::MIN_POSITIVE, 1.0 / 3.0, 1e300, -0.0];
        let b = [std::f64::consts::PI, -2.5e-17];
        save(&p1, &header, &[&w, &b]).unwrap();

        let ck = load(&p1).unwrap();
        assert_eq!(ck.header.seed, 42);
        assert_eq!(ck.header.step, 17);
        let (_, wb) = ck.block("w").unwrap();
        assert_eq!(wb, &w[..]);
        // bit-exactness including -0.0
        assert!(ck.block("b").unwrap().1[1].to_bits() == b[1].to_bits());
        assert!(ck.data[0][5].to_bits() == (-0.0f64).to_bits());

        let blocks: Vec<&[f64]> = ck.data.iter().map(|v| v.as_slice()).collect();
        save(&p2, &ck.header, &blocks).unwrap();
        let bytes1 = std::fs::read(&p1).unwrap();
        let bytes2 = std::fs::read(&p2).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn truncated_file_reports_block_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ckpt");
        let header = CheckpointHeader {
            version: CHECKPOINT_VERSION,
            seed: 0,
            step: 0,
            blocks: vec![BlockDesc { name: "big".into(), rows: 4, cols: 4, activation: None }],
            meta: BTreeMap::new(),
        };
        save(&p, &header, &[&[0.0; 16]]).unwrap();
        let full = std::fs::read(&p).unwrap();
        std::fs::write(&p, &full[..full.len() - 9]).unwrap();
        let err = load(&p).unwrap_err().to_string();
        assert!(err.contains("big"), "error was: {err}");
    }
}
