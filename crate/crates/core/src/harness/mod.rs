//! Configuration, trial pipeline, sweeps, presets and identity checks.

pub mod config;
pub mod identities;
pub mod pipeline;
pub mod presets;
pub mod sweep;

pub use config::{Axis, ExperimentConfig, Polarization, ReceiverSpec, SweepSpec, SCHEMA_VERSION};
pub use identities::{verify_identities, IdentityCheck, IdentityReport};
pub use pipeline::{run_trial, simulate, TrialTrace};
pub use presets::{preset, PRESET_NAMES};
pub use sweep::{emit_csv, sweep, write_csv, SweepResult, SweepRow};
