//! Jones-space field recovery for carrier-assisted direct-detection PDM-SSB links.

pub mod channel;
pub mod dsp;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod recovery;
pub mod rng;
pub mod signal;
pub mod tx;

pub use error::{Error, Result};
pub use signal::{ComplexSignal, JonesSignal, RrcSpec, C64};
