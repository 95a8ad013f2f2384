//! Diffusion-bridge core: grids, the model contract and guided bridges.

pub mod bridge;
pub mod grid;
pub mod model;

pub use bridge::{
    bridge_log_weight, bridge_path_term, euler_bridge_path, guided_drift, l_integrand,
    log_radon_nikodym, simulate_unconditioned, BridgeWeight, BridgeWorkspace,
};
pub use grid::{fill_increments, LatticePath, SegmentSpec, WienerIncrements};
pub use model::{AuxProcess, BridgeEnds, DiffusionModel};
