//! Receiver DSP after field recovery.

pub mod cpe;
pub mod delay;
pub mod foe;
pub mod metrics;
pub mod mimo;
pub mod sync;

pub use delay::{calibrate_branch_delay, calibration_probe, estimate_delay};
pub use cpe::{carrier_phase_estimate, frame_reference, CpeSpec};
pub use foe::{cd_compensate, estimate_freq_offset, estimate_freq_offset_joint};
pub use metrics::{compute_metrics, q_from_ber, Metrics};
pub use mimo::{mimo_equalize, MimoMode, MimoOutput, MimoSpec};
pub use sync::{synchronize, synchronize_joint, SyncResult};
