//! Committed experiment configurations, embedded at build time.

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

pub const PRESET_NAMES: [&str; 7] = ["fig2a", "fig2b", "fig3a", "fig3b", "cspr-sweep", "xi-sweep", "carrier-boost"];

/// Raw TOML text of a preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    Ok(match name {
        "fig2a" => include_str!("../../presets/fig2a.toml"),
        "fig2b" => include_str!("../../presets/fig2b.toml"),
        "fig3a" => include_str!("../../presets/fig3a.toml"),
        "fig3b" => include_str!("../../presets/fig3b.toml"),
        "cspr-sweep" => include_str!("../../presets/cspr-sweep.toml"),
        "xi-sweep" => include_str!("../../presets/xi-sweep.toml"),
        "carrier-boost" => include_str!("../../presets/carrier-boost.toml"),
        _ => return Err(Error::UnknownPreset(name.into())),
    })
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(preset_text(name)?)
}
