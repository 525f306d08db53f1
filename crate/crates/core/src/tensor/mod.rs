//! Dense f64 tensors with reverse-mode differentiation.
//!
//! Everything is row-major, 64-bit and single-threaded. The models in this
//! crate are small enough that precision and reproducibility matter more
//! than throughput, so there is no broadcasting machinery beyond what the
//! encoders actually use.

mod adam;
mod checkpoint;
mod gradcheck;
mod graph;
mod params;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, store_to_bytes, CheckpointError, CHECKPOINT_FORMAT};
pub use gradcheck::{gradient_check, gradient_check_params};
pub use graph::{Graph, NodeId};
pub use params::{ParamId, ParamStore, Parameter};
pub use rng::{glorot_uniform, stable_hash, uniform_tensor, EngineRng};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Numerical floor inside `log` when computing cross-entropy.
pub const CROSS_ENTROPY_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("backward requires a scalar loss, got shape {got:?}")]
    NotScalar { got: Vec<usize> },
    #[error("{op}: index {index} out of range for size {size}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        size: usize,
    },
    #[error("adam: parameter {name:?} has no gradient (run backward first)")]
    MissingGrad { name: String },
    #[error("cross_entropy: prediction row {row} sums to {sum}, expected 1 within 1e-6")]
    NotNormalized { row: usize, sum: f64 },
    #[error("shape {shape:?} implies {expected} elements, got {got}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
}

/// Dense n-dimensional array of f64, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// True when the tensor holds exactly one element.
    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar(), "item() on non-scalar {:?}", self.shape);
        self.data[0]
    }

    /// Row count of a 2-D tensor.
    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    /// Column count of a 2-D tensor.
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }
}
