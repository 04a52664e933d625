//! Inter-branch delay calibration with a known probe.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frontend::BranchSet;
use crate::signal::{self, ComplexSignal, JonesSignal, C64};

/// Minimum power ratio between the correlation peak and any lag outside the guard.
const MIN_PEAK_RATIO_DB: f64 = 3.0;
const GUARD: usize = 8;

/// Launch a probe on both polarizations with a π/3 relative phase, so that
/// every branch of every front-end sees a nonzero copy of it.
pub fn calibration_probe(probe: &ComplexSignal) -> JonesSignal {
    let rot = C64::from_polar(1.0, PI / 3.0);
    let y = probe.with_samples(probe.samples.iter().map(|v| v * rot).collect());
    JonesSignal::new(probe.clone(), y).expect("same-shaped polarizations")
}

/// Cross-spectrum magnitude at a fractional lag.
fn correlation_at(cross: &[C64], delay: f64) -> f64 {
    let n = cross.len();
    cross
        .iter()
        .enumerate()
        .map(|(k, c)| c * C64::from_polar(1.0, 2.0 * PI * signal::bin_frequency(k, n, 1.0) * delay))
        .sum::<C64>()
        .norm()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-4 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Delay of `field` relative to `probe` in samples (positive means late).
pub fn estimate_delay(field: &ComplexSignal, probe: &ComplexSignal) -> Result<f64> {
    let n = field.len();
    if n == 0 {
        return Err(Error::EmptySignal);
    }
    if probe.len() != n {
        return Err(Error::LengthMismatch(probe.len(), n));
    }
    let mut a = field.samples.clone();
    let mut p = probe.samples.clone();
    signal::fft(&mut a);
    signal::fft(&mut p);
    let cross: Vec<C64> = a.iter().zip(&p).map(|(x, y)| x * y.conj()).collect();
    let mut lags = cross.clone();
    signal::ifft(&mut lags);
    let power: Vec<f64> = lags.iter().map(|v| v.norm_sqr()).collect();
    let peak = (0..n).max_by(|&i, &j| power[i].total_cmp(&power[j])).unwrap_or(0);
    let second = (0..n)
        .filter(|&d| {
            let dist = (d as isize - peak as isize).rem_euclid(n as isize) as usize;
            dist.min(n - dist) > GUARD
        })
        .map(|d| power[d])
        .fold(0.0, f64::max);
    let ratio_db = if second > 0.0 { 10.0 * (power[peak] / second).log10() } else { f64::INFINITY };
    if !(ratio_db >= MIN_PEAK_RATIO_DB) {
        return Err(Error::AmbiguousPeak(ratio_db));
    }
    let coarse = if peak > n / 2 { peak as f64 - n as f64 } else { peak as f64 };
    Ok(golden_max(|d| correlation_at(&cross, d), coarse - 1.0, coarse + 1.0))
}

/// Per-branch delays of a probe launched through a front-end, in samples.
/// Apply the negated values with [`BranchSet::with_delays`] to align.
pub fn calibrate_branch_delay(branches: &BranchSet, probe: &ComplexSignal) -> Result<Vec<f64>> {
    if branches.fields.is_empty() {
        return Err(Error::EmptySignal);
    }
    branches.fields.iter().map(|f| estimate_delay(f, probe)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{split_branches, Scheme};
    use crate::rng;
    use crate::tx::{self, FrameSpec};
    use crate::RrcSpec;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::Rng;

    fn probe(seed: u64) -> ComplexSignal {
        let spec = FrameSpec { qam_order: 4, payload_len: 2048, train_len: 0, pilot_ratio: 0.0, ..Default::default() };
        let f = tx::generate_frame(&spec, seed).unwrap();
        tx::shape(&f.symbols[0], spec.baud, &RrcSpec { sps: 2, rolloff: 0.1, ..Default::default() }).unwrap()
    }

    #[test]
    fn aligned_branches_read_zero() {
        let p = probe(1);
        for scheme in Scheme::ALL {
            let b = split_branches(&calibration_probe(&p), scheme);
            for d in calibrate_branch_delay(&b, &p).unwrap() {
                assert!(d.abs() < 0.05, "{scheme}: {d}");
            }
        }
    }

    #[test]
    fn injected_fractional_delay() {
        let p = probe(2);
        let b = split_branches(&calibration_probe(&p), Scheme::Hybrid90);
        let skewed = b.with_delays(&[0.0, 3.5, 0.0, 0.0]).unwrap();
        let d = calibrate_branch_delay(&skewed, &p).unwrap();
        assert!((d[1] - 3.5).abs() < 0.1, "{d:?}");
        assert!(d[0].abs() < 0.05);
    }

    #[test]
    fn noise_probe_is_ambiguous() {
        let p = probe(3);
        let other = probe(4);
        let b = split_branches(&calibration_probe(&other), Scheme::PbsBaseline);
        assert!(matches!(calibrate_branch_delay(&b, &p), Err(Error::AmbiguousPeak(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn residual_after_calibration(seed in 0u64..1000) {
            let p = probe(seed);
            let mut r = rng::stream(seed, "delay-test", 0);
            let skew: Vec<f64> = (0..4).map(|_| r.random_range(-10.0..10.0)).collect();
            let b = split_branches(&calibration_probe(&p), Scheme::Coupler2x2).with_delays(&skew).unwrap();
            let est = calibrate_branch_delay(&b, &p).unwrap();
            let neg: Vec<f64> = est.iter().map(|d| -d).collect();
            let fixed = b.with_delays(&neg).unwrap();
            for d in calibrate_branch_delay(&fixed, &p).unwrap() {
                prop_assert!(d.abs() < 0.1);
            }
        }
    }
}
