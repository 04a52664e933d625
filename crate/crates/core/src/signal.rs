//! Signal containers and the DSP primitives everything else is built on.
//!
//! Frames are simulated as one period of a periodic transmission, so the
//! spectral operations here (filters, resampling, Hilbert transform) work on
//! the whole capture as a single FFT block.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT (unnormalized).
pub fn fft(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse FFT, normalized by `1/n`.
pub fn ifft(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// Signed frequency of FFT bin `k` for an `n`-point transform at `rate`.
pub fn bin_frequency(k: usize, n: usize, rate: f64) -> f64 {
    let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    k * rate / n as f64
}

/// FFT bin index nearest to frequency `freq`.
pub fn frequency_bin(freq: f64, n: usize, rate: f64) -> usize {
    let k = (freq * n as f64 / rate).round() as i64;
    k.rem_euclid(n as i64) as usize
}

/// Uniformly sampled complex baseband waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSignal {
    pub samples: Vec<C64>,
    /// Samples per second.
    pub sample_rate: f64,
    /// Carrier-frequency offset of this baseband relative to the reference, Hz.
    pub center_offset: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<C64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(Self { samples, sample_rate, center_offset: 0.0 })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<C64>) -> Self {
        Self { samples, sample_rate: self.sample_rate, center_offset: self.center_offset }
    }

    pub fn power(&self) -> Result<f64> {
        power(self)
    }

    pub fn scale(&mut self, k: f64) {
        self.samples.iter_mut().for_each(|v| *v *= k);
    }

    pub fn spectrum(&self) -> Vec<C64> {
        let mut buf = self.samples.clone();
        fft(&mut buf);
        buf
    }

    /// Circular shift: output[n] = input[n + shift].
    pub fn rotate(&self, shift: isize) -> Self {
        let n = self.len() as isize;
        if n == 0 {
            return self.clone();
        }
        let s = shift.rem_euclid(n) as usize;
        let mut samples = self.samples.clone();
        samples.rotate_left(s);
        self.with_samples(samples)
    }
}

/// Jones vector per sample: the X and Y polarization fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JonesSignal {
    pub x: ComplexSignal,
    pub y: ComplexSignal,
}

impl JonesSignal {
    pub fn new(x: ComplexSignal, y: ComplexSignal) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if x.sample_rate != y.sample_rate || x.center_offset != y.center_offset {
            return Err(invalid("X and Y must share sample rate and center offset"));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.x.sample_rate
    }

    /// Total power over both polarizations.
    pub fn power(&self) -> Result<f64> {
        Ok(power(&self.x)? + power(&self.y)?)
    }

    pub fn map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&ComplexSignal) -> Result<ComplexSignal>,
    {
        Self::new(f(&self.x)?, f(&self.y)?)
    }
}

/// Mean of `|s|²`.
pub fn power(s: &ComplexSignal) -> Result<f64> {
    mean_power(&s.samples)
}

pub fn mean_power(samples: &[C64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    Ok(samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64)
}

/// Root-raised-cosine pulse parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrcSpec {
    pub rolloff: f64,
    /// Filter length in symbols.
    pub span: usize,
    /// Samples per symbol.
    pub sps: usize,
}

impl Default for RrcSpec {
    fn default() -> Self {
        Self { rolloff: 0.01, span: 64, sps: 8 }
    }
}

impl RrcSpec {
    pub fn with_sps(self, sps: usize) -> Self {
        Self { sps, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(invalid(format!("RRC roll-off {} outside [0, 1]", self.rolloff)));
        }
        if self.sps < 2 {
            return Err(invalid(format!("RRC needs sps >= 2, got {}", self.sps)));
        }
        if self.span < 2 {
            return Err(invalid("RRC span must be at least 2 symbols"));
        }
        Ok(())
    }
}

/// Unit-energy RRC taps, `span * sps + 1` long (odd, centered).
pub fn rrc_taps(spec: &RrcSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let beta = spec.rolloff;
    let half = (spec.span * spec.sps / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|i| {
            let t = i as f64 / spec.sps as f64;
            if t.abs() < 1e-12 {
                1.0 - beta + 4.0 * beta / PI
            } else if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-9 {
                beta / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                        + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos())
            } else {
                ((PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos())
                    / (PI * t * (1.0 - (4.0 * beta * t).powi(2)))
            }
        })
        .collect();
    let norm = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= norm);
    Ok(taps)
}

/// Linear convolution with a centered, odd-length real kernel; output has the
/// input's length (group delay removed, zeros assumed outside the input).
pub fn convolve_same(x: &[C64], taps: &[f64]) -> Vec<C64> {
    if x.is_empty() {
        return Vec::new();
    }
    let center = taps.len() / 2;
    let n = (x.len() + taps.len() - 1).next_power_of_two();
    let mut a = vec![C64::new(0.0, 0.0); n];
    a[..x.len()].copy_from_slice(x);
    let mut b = vec![C64::new(0.0, 0.0); n];
    for (dst, &h) in b.iter_mut().zip(taps) {
        *dst = C64::new(h, 0.0);
    }
    fft(&mut a);
    fft(&mut b);
    a.iter_mut().zip(&b).for_each(|(u, v)| *u *= v);
    ifft(&mut a);
    a[center..center + x.len()].to_vec()
}

/// Circular convolution with a centered, odd-length real kernel.
pub fn convolve_circular(x: &[C64], taps: &[f64]) -> Vec<C64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let center = taps.len() / 2;
    let mut kernel = vec![C64::new(0.0, 0.0); n];
    for (i, &h) in taps.iter().enumerate() {
        let lag = (i as isize - center as isize).rem_euclid(n as isize) as usize;
        kernel[lag] += h;
    }
    let mut a = x.to_vec();
    fft(&mut a);
    fft(&mut kernel);
    a.iter_mut().zip(&kernel).for_each(|(u, v)| *u *= v);
    ifft(&mut a);
    a
}

/// RRC filtering with group-delay compensation; output length equals input length.
pub fn rrc_filter(s: &ComplexSignal, spec: &RrcSpec) -> Result<ComplexSignal> {
    let taps = rrc_taps(spec)?;
    Ok(s.with_samples(convolve_same(&s.samples, &taps)))
}

/// RRC filtering of one period of a periodic waveform.
pub fn rrc_filter_periodic(s: &ComplexSignal, spec: &RrcSpec) -> Result<ComplexSignal> {
    let taps = rrc_taps(spec)?;
    Ok(s.with_samples(convolve_circular(&s.samples, &taps)))
}

/// Discrete Hilbert transform via spectral sign flip (`-j·sign(f)`).
pub fn hilbert_phase(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(invalid(format!("Hilbert transform needs at least 2 samples, got {n}")));
    }
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft(&mut buf);
    let positive_end = n.div_ceil(2);
    buf[0] = C64::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        *v *= if k < positive_end {
            C64::new(0.0, -1.0)
        } else if n.is_multiple_of(2) && k == n / 2 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.0, 1.0)
        };
    }
    ifft(&mut buf);
    Ok(buf.into_iter().map(|v| v.re).collect())
}

/// Best rational approximation `p/q` with `q <= max_den`, if it is exact to 1e-9.
fn rational(ratio: f64, max_den: u64) -> Option<(u64, u64)> {
    (1..=max_den).find_map(|q| {
        let p = (ratio * q as f64).round();
        (p >= 1.0 && (p / q as f64 - ratio).abs() <= 1e-9 * ratio).then_some((p as u64, q))
    })
}

/// Band-limited rate conversion of one period via the spectrum.
pub fn resample(s: &ComplexSignal, new_rate: f64) -> Result<ComplexSignal> {
    if !(new_rate.is_finite() && new_rate > 0.0) {
        return Err(invalid(format!("new rate must be positive, got {new_rate}")));
    }
    if s.is_empty() {
        return Err(Error::EmptySignal);
    }
    let ratio = new_rate / s.sample_rate;
    let (p, q) = rational(ratio, 1024).ok_or(Error::UnsupportedRatio(ratio))?;
    let n = s.len();
    if !(n as u64 * p).is_multiple_of(q) {
        return Err(Error::UnsupportedRatio(ratio));
    }
    let m = (n as u64 * p / q) as usize;
    if m == n {
        return Ok(ComplexSignal { sample_rate: new_rate, ..s.clone() });
    }
    let spec = s.spectrum();
    let mut out = vec![C64::new(0.0, 0.0); m];
    let nmin = n.min(m);
    let half = nmin.div_ceil(2);
    out[..half].copy_from_slice(&spec[..half]);
    for k in 1..half {
        out[m - k] = spec[n - k];
    }
    if nmin.is_multiple_of(2) {
        let k = nmin / 2;
        if m > n {
            out[k] = spec[k] * 0.5;
            out[m - k] = spec[k] * 0.5;
        } else {
            out[k] = spec[k] + spec[n - k];
        }
    }
    ifft(&mut out);
    let gain = m as f64 / n as f64;
    out.iter_mut().for_each(|v| *v *= gain);
    Ok(ComplexSignal { samples: out, sample_rate: new_rate, center_offset: s.center_offset })
}

/// Mix down by `df`: samples times `exp(-j2π·df·t)`.
pub fn frequency_shift(s: &ComplexSignal, df: f64) -> Result<ComplexSignal> {
    if df.abs() >= s.sample_rate / 2.0 {
        return Err(Error::Aliasing { freq: df, rate: s.sample_rate });
    }
    if df == 0.0 {
        return Ok(s.clone());
    }
    let w = -2.0 * PI * df / s.sample_rate;
    let samples = s
        .samples
        .iter()
        .enumerate()
        .map(|(n, &v)| v * C64::from_polar(1.0, w * n as f64))
        .collect();
    Ok(ComplexSignal {
        samples,
        sample_rate: s.sample_rate,
        center_offset: s.center_offset - df,
    })
}

/// Fractional circular delay by `delay` samples (positive delays the signal).
pub fn fractional_delay(s: &ComplexSignal, delay: f64) -> ComplexSignal {
    if delay == 0.0 || s.is_empty() {
        return s.clone();
    }
    let n = s.len();
    let mut buf = s.samples.clone();
    fft(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = bin_frequency(k, n, 1.0);
        if n.is_multiple_of(2) && k == n / 2 {
            // keep real-valued inputs real
            *v *= (2.0 * PI * f * delay).cos();
        } else {
            *v *= C64::from_polar(1.0, -2.0 * PI * f * delay);
        }
    }
    ifft(&mut buf);
    s.with_samples(buf)
}
