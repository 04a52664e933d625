//! BER, EVM and Q-factor.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::signal::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ber: f64,
    pub evm_db: f64,
    pub q_db: f64,
    /// CSPR seen by each detected branch, dB.
    pub per_branch_cspr: Vec<f64>,
    pub converged: bool,
}

impl Metrics {
    /// Placeholder for a trial that could not be demodulated.
    pub fn failed(per_branch_cspr: Vec<f64>) -> Self {
        Self { ber: 0.5, evm_db: 0.0, q_db: q_from_ber(0.5, 1), per_branch_cspr, converged: false }
    }
}

/// Q factor in dB from BER via `Q = √2·erfc⁻¹(2·BER)`. A zero count is floored
/// at half an error so the result stays finite.
pub fn q_from_ber(ber: f64, bits: usize) -> f64 {
    let floor = 0.5 / bits.max(1) as f64;
    let b = ber.max(floor).min(0.5);
    let q = std::f64::consts::SQRT_2 * erfc_inv(2.0 * b);
    20.0 * q.max(1e-3).log10()
}

/// Metrics over the data payload. Callers pass payload bits and symbols only.
pub fn compute_metrics(decided_bits: &[u8], tx_bits: &[u8], rx_syms: &[C64], tx_syms: &[C64]) -> Result<Metrics> {
    if decided_bits.len() != tx_bits.len() {
        return Err(Error::LengthMismatch(decided_bits.len(), tx_bits.len()));
    }
    if rx_syms.len() != tx_syms.len() {
        return Err(Error::LengthMismatch(rx_syms.len(), tx_syms.len()));
    }
    if tx_bits.is_empty() || tx_syms.is_empty() {
        return Err(Error::EmptySignal);
    }
    let errors = decided_bits.iter().zip(tx_bits).filter(|(a, b)| (*a & 1) != (*b & 1)).count();
    let ber = errors as f64 / tx_bits.len() as f64;
    let err: f64 = rx_syms.iter().zip(tx_syms).map(|(r, t)| (r - t).norm_sqr()).sum();
    let reference: f64 = tx_syms.iter().map(|t| t.norm_sqr()).sum();
    Ok(Metrics {
        ber,
        evm_db: 10.0 * (err / reference).log10(),
        q_db: q_from_ber(ber, tx_bits.len()),
        per_branch_cspr: Vec::new(),
        converged: true,
    })
}
