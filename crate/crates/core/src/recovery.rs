//! Branch CSPR geometry, branch selection and Kramers-Kronig field recovery.
//!
//! CSPR multipliers are branch CSPRs in units of the transmit CSPR, so a
//! value of 1 means the branch sees exactly the launched carrier ratio.

use serde::{Deserialize, Serialize};

use crate::channel::SopState;
use crate::error::{invalid, Error, Result};
use crate::frontend::{coupler_constants, BranchLabel, Scheme};
use crate::signal::{self, ComplexSignal, C64};

/// `(X, Y, X+Y, X−Y)` multipliers of the 2×2-coupler receiver.
pub fn cspr_2x2(alpha: f64, theta: f64) -> [f64; 4] {
    let (s, c) = alpha.sin_cos();
    let k = 2.0 * c * s * theta.cos();
    let q = 2.0 * c * c * theta.cos().powi(2);
    [1.0 - k, 1.0 + k, q, 2.0 - q]
}

/// `(X+Y, X−Y, X+jY, X−jY)` multipliers of the 90°-hybrid receiver.
pub fn cspr_hybrid(alpha: f64, theta: f64) -> [f64; 4] {
    let c2 = alpha.cos().powi(2);
    let q = 2.0 * c2 * theta.cos().powi(2);
    let k = 2.0 * c2 * theta.cos() * theta.sin();
    [q, 2.0 - q, 1.0 + k, 1.0 - k]
}

/// `(aX+bY, bX+bY, bX+aY)` multipliers of the 3×3-coupler receiver.
pub fn cspr_3x3(alpha: f64, theta: f64) -> [f64; 3] {
    let (a, b) = coupler_constants();
    let g = C64::from_polar(alpha.cos().powi(2), 2.0 * theta) - alpha.sin().powi(2);
    [
        1.0 + 3.0 * (a * b.conj() * g).re,
        2.0 * alpha.cos().powi(2) * theta.cos().powi(2),
        1.0 + 3.0 * (b * a.conj() * g).re,
    ]
}

/// Brute-force multiplier of one branch: carrier over signal power of the
/// branch field built from the rotated transmit Jones vector `(C+S_x, C+S_y)`.
pub fn branch_cspr_direct(label: BranchLabel, sop: &SopState) -> f64 {
    let (cx, cy) = label.coefficients();
    let m = sop.matrix();
    // branch row vector times the rotation
    let v = [cx * m[0][0] + cy * m[1][0], cx * m[0][1] + cy * m[1][1]];
    let carrier = (v[0] + v[1]).norm_sqr();
    let sig = v[0].norm_sqr() + v[1].norm_sqr();
    carrier / sig
}

/// Second-largest element.
pub fn second_max(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(invalid(format!("second_max needs at least 2 values, got {}", values.len())));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v[1])
}

/// Per-branch CSPR in units of the transmit CSPR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsprProfile {
    pub scheme: Scheme,
    pub labels: Vec<BranchLabel>,
    pub values: Vec<f64>,
    pub c_req_db: f64,
}

impl CsprProfile {
    /// Closed-form profile for the branches a scheme exposes.
    pub fn theoretical(scheme: Scheme, sop: &SopState, c_req_db: f64) -> Self {
        let (a, t) = (sop.alpha, sop.theta);
        let values = match scheme {
            Scheme::PbsBaseline => cspr_2x2(a, t)[..2].to_vec(),
            Scheme::Coupler2x2 => cspr_2x2(a, t).to_vec(),
            Scheme::Hybrid90 => cspr_hybrid(a, t).to_vec(),
            Scheme::Coupler3x3 => cspr_3x3(a, t).to_vec(),
        };
        Self { scheme, labels: scheme.labels().to_vec(), values, c_req_db }
    }

    /// Profile from measured branch CSPRs in dB, rescaled to units of `C_req`.
    pub fn measured(scheme: Scheme, labels: Vec<BranchLabel>, cspr_db: &[f64], c_req_db: f64) -> Result<Self> {
        if labels.len() != cspr_db.len() {
            return Err(Error::LengthMismatch(labels.len(), cspr_db.len()));
        }
        let values = cspr_db.iter().map(|d| 10f64.powf((d - c_req_db) / 10.0)).collect();
        Ok(Self { scheme, labels, values, c_req_db })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Top2,
    #[default]
    All,
}

/// Branches to hand to the equalizer. `Top2` returns the two largest
/// values, highest first; ties keep the profile's label order.
pub fn select_branches(profile: &CsprProfile, mode: Selection) -> Vec<BranchLabel> {
    match mode {
        Selection::All => profile.labels.clone(),
        Selection::Top2 => {
            let mut idx: Vec<usize> = (0..profile.labels.len()).collect();
            idx.sort_by(|&i, &j| profile.values[j].total_cmp(&profile.values[i]));
            idx.into_iter().take(2).map(|i| profile.labels[i]).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrKind {
    #[default]
    Kkr,
}

/// Single-polarization field-recovery receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrSpec {
    pub kind: GrKind,
    /// Minimum branch CSPR at which recovery works, dB.
    pub c_req_db: f64,
    pub working_sps: usize,
}

impl Default for GrSpec {
    fn default() -> Self {
        Self { kind: GrKind::Kkr, c_req_db: 6.0, working_sps: 8 }
    }
}

impl GrSpec {
    pub fn validate(&self) -> Result<()> {
        if self.working_sps < 4 {
            return Err(invalid(format!("working_sps must be >= 4, got {}", self.working_sps)));
        }
        Ok(())
    }
}

/// Kramers-Kronig recovery of the branch field from its photocurrent:
/// `√I·exp(j·H{½·ln I})`, then shifted so the signal sits at baseband.
///
/// The current is processed at `gr.working_sps` samples per symbol and the
/// field returned at the input rate.
pub fn kkr_recover(current: &[f64], gr: &GrSpec, carrier_offset: f64, rate: f64, baud: f64) -> Result<ComplexSignal> {
    gr.validate()?;
    if current.is_empty() {
        return Err(Error::EmptySignal);
    }
    if current.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroCurrent);
    }
    let input = ComplexSignal::new(current.iter().map(|&v| C64::new(v, 0.0)).collect(), rate)?;
    let working_rate = baud * gr.working_sps as f64;
    let work = if (working_rate - rate).abs() > 1e-9 * rate { signal::resample(&input, working_rate)? } else { input };
    let i: Vec<f64> = work.samples.iter().map(|v| v.re).collect();
    let mean = i.iter().sum::<f64>() / i.len() as f64;
    let floor = 1e-12 * mean.abs().max(f64::MIN_POSITIVE);
    let i: Vec<f64> = i.into_iter().map(|v| v.max(floor)).collect();
    let half_log: Vec<f64> = i.iter().map(|v| 0.5 * v.ln()).collect();
    let phase = signal::hilbert_phase(&half_log)?;
    let field: Vec<C64> = i.iter().zip(&phase).map(|(&v, &p)| C64::from_polar(v.sqrt(), p)).collect();
    let field = work.with_samples(field);
    let shifted = signal::frequency_shift(&field, -carrier_offset)?;
    if (shifted.sample_rate - rate).abs() > 1e-9 * rate {
        signal::resample(&shifted, rate)
    } else {
        Ok(shifted)
    }
}

const CSPR_CAP_DB: f64 = 60.0;

fn ratio_db(carrier: f64, sig: f64) -> f64 {
    if sig <= 0.0 {
        return if carrier > 0.0 { CSPR_CAP_DB } else { -CSPR_CAP_DB };
    }
    if carrier <= 0.0 {
        return -CSPR_CAP_DB;
    }
    (10.0 * (carrier / sig).log10()).clamp(-CSPR_CAP_DB, CSPR_CAP_DB)
}

/// Branch CSPR of an optical field: power in the carrier's FFT bin against
/// everything else, in dB (capped at ±60 dB).
pub fn estimate_cspr_field(field: &ComplexSignal, carrier_offset: f64) -> Result<f64> {
    if field.is_empty() {
        return Err(Error::EmptySignal);
    }
    let k = signal::frequency_bin(carrier_offset, field.len(), field.sample_rate);
    let spec = field.spectrum();
    let tone = spec[k].norm_sqr();
    let rest: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() - tone;
    Ok(ratio_db(tone, rest))
}

/// Branch CSPR from a photocurrent alone. For `I = |C + S|²` with a
/// Gaussian signal, `mean² − var = |C|⁴`, which splits the mean into
/// carrier and signal power. No real root means no usable carrier.
///
/// Shaped QAM has a lighter-tailed envelope than a Gaussian, so this reads
/// high at low CSPR; it is accurate near and above the usual operating points.
pub fn estimate_cspr_current(current: &[f64]) -> Result<f64> {
    if current.is_empty() {
        return Err(Error::EmptySignal);
    }
    let n = current.len() as f64;
    let m = current.iter().sum::<f64>() / n;
    let v = current.iter().map(|i| (i - m).powi(2)).sum::<f64>() / n;
    let disc = m * m - v;
    if disc <= 0.0 {
        return Ok(-CSPR_CAP_DB);
    }
    let pc = disc.sqrt();
    Ok(ratio_db(pc, m - pc))
}
