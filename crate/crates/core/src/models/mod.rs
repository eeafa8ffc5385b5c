//! Declarative network configs, preset architectures, network assembly and
//! checkpoints.

pub mod checkpoint;
pub mod config;
pub mod network;
pub mod presets;

pub use checkpoint::{load_checkpoint, load_checkpoint_as, read_checkpoint, save_checkpoint, Checkpoint, NamedTensor};
pub use config::{Dims, Domain, LayerSpec, LayerTrace, NetworkConfig};
pub use network::{build_network, Network};
pub use presets::{preset, preset_names, presets};
