//! Frame synchronization on the training head.

use crate::error::{Error, Result};
use crate::signal::{self, ComplexSignal, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// Sample index where the training starts.
    pub offset: usize,
    /// Correlation peak over the strongest other lag, dB (power).
    pub ratio_db: f64,
}

/// Lags closer than this to the peak are not candidates for the second peak.
pub const DEFAULT_GUARD: usize = 8;

/// Circular cross-correlation power `|Σ r[n+d]·t*[n]|²` for every lag `d`.
fn correlation_power(received: &ComplexSignal, template: &ComplexSignal) -> Result<Vec<f64>> {
    let n = received.len();
    if n == 0 || template.is_empty() {
        return Err(Error::EmptySignal);
    }
    if template.len() > n {
        return Err(Error::LengthMismatch(template.len(), n));
    }
    let mut r = received.samples.clone();
    let mut t = template.samples.clone();
    t.resize(n, C64::new(0.0, 0.0));
    signal::fft(&mut r);
    signal::fft(&mut t);
    r.iter_mut().zip(&t).for_each(|(a, b)| *a *= b.conj());
    signal::ifft(&mut r);
    Ok(r.into_iter().map(|v| v.norm_sqr()).collect())
}

/// Joint synchronization: correlation powers of every (received, template)
/// pair are summed before peak picking, so whichever input carries the
/// training contributes.
pub fn synchronize_joint(received: &[ComplexSignal], templates: &[ComplexSignal], guard: usize) -> Result<SyncResult> {
    let first = received.first().ok_or(Error::EmptySignal)?;
    let n = first.len();
    let mut total = vec![0.0; n];
    for r in received {
        if r.len() != n {
            return Err(Error::LengthMismatch(r.len(), n));
        }
        for t in templates {
            for (acc, p) in total.iter_mut().zip(correlation_power(r, t)?) {
                *acc += p;
            }
        }
    }
    let peak = (0..n).max_by(|&a, &b| total[a].total_cmp(&total[b])).unwrap_or(0);
    let second = (0..n)
        .filter(|&d| {
            let dist = (d as isize - peak as isize).rem_euclid(n as isize) as usize;
            dist.min(n - dist) > guard
        })
        .map(|d| total[d])
        .fold(0.0, f64::max);
    let ratio_db = if second > 0.0 { 10.0 * (total[peak] / second).log10() } else { f64::INFINITY };
    if !(ratio_db >= 3.0) {
        return Err(Error::SyncFailure(ratio_db));
    }
    Ok(SyncResult { offset: peak, ratio_db })
}

/// Locate `training` inside `field`. Fails when the peak is less than
/// 3 dB above every other lag.
pub fn synchronize(field: &ComplexSignal, training: &ComplexSignal) -> Result<SyncResult> {
    synchronize_joint(std::slice::from_ref(field), std::slice::from_ref(training), DEFAULT_GUARD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tx::{self, FrameSpec};
    use crate::RrcSpec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn frame_waveform(seed: u64) -> (ComplexSignal, ComplexSignal) {
        let spec = FrameSpec { payload_len: 4096, ..Default::default() };
        let f = tx::generate_frame(&spec, seed).unwrap();
        let rrc = RrcSpec { sps: 2, ..Default::default() };
        let wave = tx::shape(&f.symbols[0], spec.baud, &rrc).unwrap();
        let train = tx::shape(f.training(0), spec.baud, &rrc).unwrap();
        (wave, train)
    }

    fn add_noise(s: &ComplexSignal, snr_db: f64, seed: u64) -> ComplexSignal {
        let sigma = (s.power().unwrap() / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        let mut r = rng::stream(seed, "test", 0);
        s.with_samples(
            s.samples
                .iter()
                .map(|v| v + C64::new(r.sample(StandardNormal), r.sample(StandardNormal)) * sigma)
                .collect(),
        )
    }

    #[test]
    fn finds_inserted_delay() {
        let (wave, train) = frame_waveform(1);
        let delayed = wave.rotate(-1234);
        assert_eq!(synchronize(&delayed, &train).unwrap().offset, 1234);
    }

    #[test]
    fn noisy_delay() {
        let (wave, train) = frame_waveform(2);
        let noisy = add_noise(&wave.rotate(-1234), 15.0, 3);
        let r = synchronize(&noisy, &train).unwrap();
        assert_eq!(r.offset, 1234);
        assert!(r.ratio_db > 6.0);
    }

    #[test]
    fn noise_only_fails() {
        let (wave, train) = frame_waveform(4);
        let mut r = rng::stream(5, "test", 0);
        let noise = wave.with_samples(
            (0..wave.len()).map(|_| C64::new(r.sample(StandardNormal), r.sample(StandardNormal))).collect(),
        );
        assert!(matches!(synchronize(&noise, &train), Err(Error::SyncFailure(_))));
    }
}
