//! Fourth-power frequency-offset estimation and CD compensation.

use crate::channel;
use crate::signal::{self, ComplexSignal};

/// Peak of the `field⁴` spectrum divided by four. Resolution is `rate/(4N)`.
pub fn estimate_freq_offset(field: &ComplexSignal) -> f64 {
    estimate_freq_offset_joint(std::slice::from_ref(field))
}

/// Fourth-power estimate from several fields of equal length and rate.
/// Each field is scaled to unit power and the `field⁴` power spectra are
/// summed, so a field whose tone cancels (a 45° mix of two independent
/// polarizations) is outvoted by the others.
pub fn estimate_freq_offset_joint(fields: &[ComplexSignal]) -> f64 {
    let Some(first) = fields.first().filter(|f| !f.is_empty()) else {
        return 0.0;
    };
    let n = first.len();
    let mut total = vec![0.0; n];
    for f in fields.iter().filter(|f| f.len() == n) {
        let p = signal::mean_power(&f.samples).unwrap_or(0.0);
        if !(p > 0.0) {
            continue;
        }
        let mut q: Vec<_> = f.samples.iter().map(|v| (v * v) * (v * v) / (p * p)).collect();
        signal::fft(&mut q);
        for (acc, v) in total.iter_mut().zip(&q) {
            *acc += v.norm_sqr();
        }
    }
    let peak = (0..n).max_by(|&a, &b| total[a].total_cmp(&total[b])).unwrap_or(0);
    signal::bin_frequency(peak, n, first.sample_rate) / 4.0
}

/// Inverse of the link dispersion: `exp(+j·β2·ω²·L/2)`.
pub fn cd_compensate(field: &ComplexSignal, fiber_km: f64, beta2: f64) -> ComplexSignal {
    channel::dispersion(field, fiber_km, -beta2)
}
