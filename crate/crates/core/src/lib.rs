//! Measures whether single- and triple-encrypted ciphertexts can be told apart
//! from hex-digit frequency features.
//!
//! The crate is organised bottom-up:
//!
//! * [`cipher`]: AES-128/256 with ECB, CBC and CTR, and layered encryption.
//! * [`forge`]: seeded corpora of random and all-zero plaintexts and their
//!   single (`R1`, `Z1`) and triple (`R3`, `Z3`) encryptions.
//! * [`features`]: per-payload hex-digit counts and ratios.
//! * [`stats`]: summaries, the Mann-Whitney U test, binomial null intervals.
//! * [`learn`]: decision tree, random forest and k-NN classifiers.
//! * [`pcap`]: classic pcap reading/writing and TCP payload extraction.
//! * [`experiment`]: the end-to-end runs and their reports.

pub mod cipher;
pub mod error;
pub mod experiment;
pub mod features;
pub mod forge;
pub mod learn;
pub mod pcap;
pub mod stats;

pub use cipher::{BlockKey, CipherMode, InitVector, Sample};
pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureMatrix, FeatureVector};
pub use forge::{CorpusSet, CorpusSpec, SetName};
pub use learn::{ConfusionMatrix, LabeledDataset, Model, ModelKind, ModelSpec};
