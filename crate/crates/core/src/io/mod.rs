//! Persistence formats and run configuration.
//!
//! Covariances and operators use one binary container ([`matrix`]); vectors,
//! metadata and specs are JSON; tabular data is CSV with 17 significant
//! digits so every `f64` survives a round trip.

pub mod config;
pub mod manifest;
pub mod matrix;
pub mod store;
pub mod svg;

pub use manifest::{Artifact, Manifest, ManifestEntry, OutputDir, MANIFEST_FILE};
pub use matrix::{decode_matrix, encode_matrix, read_matrix, sha256_hex, write_matrix};
pub use store::{
    chain_artifacts, density_artifacts, load_chain, load_density, load_observation, load_operator, load_parameters, load_or_assemble_operator,
    observation_artifacts, observation_spec_path, operator_cache_key, parameter_artifact, save_density, save_operator, ChainMetadata, StoredDensity,
    OBSERVATION_HEADER,
};
pub use config::{ForwardKind, InferenceConfig, InferenceMode, LayoutKind, ModelConfig, NoiseConfig, ObservablesConfig, PriorConfig, ProfileConfig, RunConfig, ValidationSection};
