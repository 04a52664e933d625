//! Experiment configuration and sweep axes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{LinkSpec, SopState};
use crate::dsp::{CpeSpec, MimoSpec};
use crate::error::{Error, Result};
use crate::frontend::{DetectionMode, Scheme};
use crate::recovery::{GrSpec, Selection};
use crate::signal::RrcSpec;
use crate::tx::{CarrierSpec, FrameSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// Signal and carrier on X only, detected by one branch.
    Single,
    #[default]
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverSpec {
    pub scheme: Scheme,
    pub mode: DetectionMode,
    pub selection: Selection,
    /// Signal-to-noise ratio of each photocurrent; `None` for noiseless detectors.
    pub electrical_snr_db: Option<f64>,
    pub polarization: Polarization,
    /// Received SOP for single-point runs; a `sop_grid` axis overrides it.
    pub sop: SopState,
    /// Optical filter margin beyond the carrier and the upper band edge, in units of baud.
    pub obpf_margin: f64,
}

impl Default for ReceiverSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::Coupler2x2,
            mode: DetectionMode::Direct,
            selection: Selection::All,
            electrical_snr_db: None,
            polarization: Polarization::Dual,
            sop: SopState::default(),
            obpf_margin: 0.02,
        }
    }
}

/// One sweep dimension. Axes combine as a Cartesian product, first axis outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum Axis {
    /// Evenly spaced α ∈ [0, π/2] × θ ∈ [0, π], endpoints included.
    SopGrid { alpha_points: usize, theta_points: usize },
    /// Explicit (α, θ) pairs, radians.
    SopList { points: Vec<[f64; 2]> },
    OsnrDb { values: Vec<f64> },
    CsprDb { values: Vec<f64> },
    /// DGD in symbol periods.
    DgdSymbols { values: Vec<f64> },
    Xi { values: Vec<f64> },
    Taps { values: Vec<usize> },
    /// 1 for single polarization, 2 for dual.
    Pols { values: Vec<usize> },
}

impl Axis {
    pub fn columns(&self) -> Vec<&'static str> {
        match self {
            Axis::SopGrid { .. } | Axis::SopList { .. } => vec!["alpha", "theta"],
            Axis::OsnrDb { .. } => vec!["osnr_db"],
            Axis::CsprDb { .. } => vec!["cspr_db"],
            Axis::DgdSymbols { .. } => vec!["dgd_symbols"],
            Axis::Xi { .. } => vec!["xi"],
            Axis::Taps { .. } => vec!["taps"],
            Axis::Pols { .. } => vec!["pols"],
        }
    }

    /// Axis values; each entry holds one number per column.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let lin = |n: usize, hi: f64| -> Vec<f64> {
            if n <= 1 {
                vec![0.0]
            } else {
                (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
            }
        };
        match self {
            Axis::SopGrid { alpha_points, theta_points } => {
                let thetas = lin(*theta_points, PI);
                lin(*alpha_points, FRAC_PI_2)
                    .into_iter()
                    .flat_map(|a| thetas.iter().map(move |&t| vec![a, t]))
                    .collect()
            }
            Axis::SopList { points } => points.iter().map(|p| p.to_vec()).collect(),
            Axis::OsnrDb { values } | Axis::CsprDb { values } | Axis::DgdSymbols { values } | Axis::Xi { values } => {
                values.iter().map(|&v| vec![v]).collect()
            }
            Axis::Taps { values } | Axis::Pols { values } => values.iter().map(|&v| vec![v as f64]).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points().is_empty() || matches!(self, Axis::SopGrid { alpha_points: 0, .. } | Axis::SopGrid { theta_points: 0, .. }) {
            return Err(Error::Config(format!("empty sweep axis {:?}", self.columns())));
        }
        match self {
            Axis::Pols { values } if values.iter().any(|v| !(1..=2).contains(v)) => {
                Err(Error::Config("pols values must be 1 or 2".into()))
            }
            Axis::Taps { values } if values.iter().any(|v| v % 2 == 0) => {
                Err(Error::Config("taps values must be odd".into()))
            }
            Axis::DgdSymbols { values } if values.iter().any(|v| !(*v >= 0.0)) => {
                Err(Error::Config("dgd_symbols values must be >= 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Apply one axis point to a configuration.
    pub fn apply(&self, value: &[f64], cfg: &mut ExperimentConfig) {
        match self {
            Axis::SopGrid { .. } | Axis::SopList { .. } => cfg.receiver.sop = SopState::new(value[0], value[1]),
            Axis::OsnrDb { .. } => cfg.link.osnr_db = Some(value[0]),
            Axis::CsprDb { .. } => cfg.carrier.cspr_db = value[0],
            Axis::DgdSymbols { .. } => cfg.link.dgd = Some(value[0] / cfg.frame.baud),
            Axis::Xi { .. } => cfg.carrier.xi = value[0],
            Axis::Taps { .. } => cfg.mimo.taps = value[0] as usize,
            Axis::Pols { .. } => {
                cfg.receiver.polarization = if value[0] == 1.0 { Polarization::Single } else { Polarization::Dual }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
}

/// Everything one experiment needs. Every field has a default, so a config
/// file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub trials_per_point: usize,
    pub frame: FrameSpec,
    pub rrc: RrcSpec,
    pub carrier: CarrierSpec,
    pub link: LinkSpec,
    pub receiver: ReceiverSpec,
    pub gr: GrSpec,
    pub mimo: MimoSpec,
    pub cpe: CpeSpec,
    pub sweep: SweepSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: "default".into(),
            seed: 1,
            trials_per_point: 1,
            frame: FrameSpec { payload_len: 8192, ..FrameSpec::default() },
            rrc: RrcSpec::default(),
            carrier: CarrierSpec::default(),
            link: LinkSpec::default(),
            receiver: ReceiverSpec::default(),
            gr: GrSpec::default(),
            mimo: MimoSpec { taps: 7, ..MimoSpec::default() },
            cpe: CpeSpec::default(),
            sweep: SweepSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.trials_per_point == 0 {
            return Err(Error::Config("trials_per_point must be at least 1".into()));
        }
        self.frame.validate().map_err(wrap)?;
        self.link.validate().map_err(wrap)?;
        self.gr.validate().map_err(wrap)?;
        self.cpe.validate().map_err(wrap)?;
        let mimo = crate::dsp::MimoSpec { n_inputs: 2, ..self.mimo };
        mimo.validate().map_err(wrap)?;
        if self.rrc.sps < 4 {
            return Err(Error::Config(format!("rrc.sps must be >= 4 for generation, got {}", self.rrc.sps)));
        }
        if self.gr.working_sps != self.rrc.sps {
            return Err(Error::Config("gr.working_sps must equal rrc.sps".into()));
        }
        if !(0.0..=1.0).contains(&self.rrc.rolloff) || self.rrc.span < 16 {
            return Err(Error::Config("rrc needs rolloff in [0, 1] and span >= 16".into()));
        }
        if self.receiver.polarization == Polarization::Single && self.receiver.scheme != Scheme::PbsBaseline {
            return Err(Error::Config("single polarization runs use the pbs_baseline scheme".into()));
        }
        if self.receiver.scheme == Scheme::PbsBaseline && self.receiver.mode != DetectionMode::Direct {
            return Err(Error::Config("the PBS baseline only supports direct detection".into()));
        }
        if !(self.receiver.obpf_margin >= 0.0) {
            return Err(Error::Config("obpf_margin must be >= 0".into()));
        }
        for axis in &self.sweep.axes {
            axis.validate()?;
            if let Axis::Pols { values } = axis {
                if values.contains(&1) && self.receiver.scheme != Scheme::PbsBaseline {
                    return Err(Error::Config("a pols axis with 1 needs the pbs_baseline scheme".into()));
                }
            }
        }
        Ok(())
    }

    /// Column names of the sweep axes, in point order.
    pub fn axis_columns(&self) -> Vec<&'static str> {
        self.sweep.axes.iter().flat_map(|a| a.columns()).collect()
    }

    /// Cartesian product of all axis points, first axis outermost. A config
    /// without axes has one empty point.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.sweep.axes.iter().fold(vec![Vec::new()], |acc, axis| {
            let pts = axis.points();
            acc.iter()
                .flat_map(|prefix| {
                    pts.iter().map(move |p| {
                        let mut v = prefix.clone();
                        v.extend_from_slice(p);
                        v
                    })
                })
                .collect()
        })
    }

    /// Configuration with one sweep point applied.
    pub fn at_point(&self, point: &[f64]) -> Result<ExperimentConfig> {
        let mut cfg = self.clone();
        let mut rest = point;
        for axis in &self.sweep.axes {
            let k = axis.columns().len();
            if rest.len() < k {
                return Err(Error::Config("sweep point shorter than the axes".into()));
            }
            axis.apply(&rest[..k], &mut cfg);
            rest = &rest[k..];
        }
        Ok(cfg)
    }
}
