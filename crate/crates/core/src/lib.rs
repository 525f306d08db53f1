//! Drug-drug interaction extraction from sentences and molecular structure.
//!
//! A convolutional encoder reads masked sentences; graph encoders over
//! molecules parsed from SMILES produce drug-pair vectors; the molecular
//! model is trained first on interacting-pair data, then its encoders are
//! frozen and the text model is trained on the fused representation.

pub mod config;
pub mod corpus;
pub mod eval;
pub mod label;
pub mod mol;
pub mod smiles;
pub mod tensor;
pub mod text;
pub mod train;
