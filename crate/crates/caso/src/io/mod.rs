//! File formats: edge-list/membership ingestion, flat key = value run
//! configuration, and the binary checkpoint container.

pub mod checkpoint;
pub mod config;
pub mod dataset;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, MAGIC};
pub use config::{apply_config_text, config_echo, load_config_file, RunConfig};
pub use dataset::{
    content_hash, edge_list_text, load_dataset, load_edge_list, load_memberships,
    membership_text, write_dataset, DatasetBundle, Provenance,
};
