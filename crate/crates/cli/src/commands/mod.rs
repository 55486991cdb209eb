pub mod characterize;
pub mod run_protocol;
pub mod simulate_channel;
pub mod tomography;
pub mod vortex_track;
