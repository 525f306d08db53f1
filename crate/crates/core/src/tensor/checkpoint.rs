//! Parameter checkpoints: a self-describing JSON container mapping
//! parameter names to shapes and values, tagged `molfuse-v1`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::ParamStore;
use super::Tensor;

pub const CHECKPOINT_FORMAT: &str = "molfuse-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format {found:?}, expected {expected:?}")]
    BadFormat { found: String, expected: &'static str },
    #[error("parameter {name:?}: {reason}")]
    BadParameter { name: String, reason: String },
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    params: Vec<CheckpointParam>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointParam {
    name: String,
    shape: Vec<usize>,
    l2_exempt: bool,
    data: Vec<f64>,
}

/// Serialize the store to checkpoint bytes. Parameter order is the
/// registration order, so identical stores produce identical bytes.
pub fn store_to_bytes(store: &ParamStore) -> Vec<u8> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        params: store
            .iter()
            .map(|p| CheckpointParam {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                l2_exempt: p.l2_exempt,
                data: p.value.data().to_vec(),
            })
            .collect(),
    };
    serde_json::to_vec(&file).expect("checkpoint serialization cannot fail")
}

pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, store_to_bytes(store))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore, CheckpointError> {
    let bytes = fs::read(path)?;
    let file: CheckpointFile = serde_json::from_slice(&bytes)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(CheckpointError::BadFormat {
            found: file.format,
            expected: CHECKPOINT_FORMAT,
        });
    }
    let mut store = ParamStore::new();
    for p in file.params {
        let value = Tensor::new(p.shape, p.data).map_err(|e| CheckpointError::BadParameter {
            name: p.name.clone(),
            reason: e.to_string(),
        })?;
        if p.l2_exempt {
            store.register_embedding(p.name, value);
        } else {
            store.register(p.name, value);
        }
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits_and_order() {
        let mut store = ParamStore::new();
        store.register("b.second", Tensor::vector(vec![0.1, -0.2, 1.0 / 3.0]));
        store.register_embedding("a.first", Tensor::matrix(2, 2, vec![1e-17, 2.0, -3.5, 4.0]).unwrap());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&store, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        let names: Vec<_> = loaded.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["b.second", "a.first"]);
        assert!(loaded.get(loaded.lookup("a.first").unwrap()).l2_exempt);
        for (orig, back) in store.iter().zip(loaded.iter()) {
            assert_eq!(orig.value, back.value);
        }
        assert_eq!(store_to_bytes(&store), store_to_bytes(&loaded));
    }

    #[test]
    fn rejects_unknown_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, br#"{"format":"molfuse-v9","params":[]}"#).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BadFormat { .. })
        ));
    }
}
