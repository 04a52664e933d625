//! Transmitter: framing, pulse shaping and carrier insertion.

pub mod qam;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::signal::{self, ComplexSignal, JonesSignal, RrcSpec, C64};
use qam::Constellation;

/// Frame layout. Training sits at the head, pilots are spread evenly over
/// the payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSpec {
    pub qam_order: usize,
    pub train_len: usize,
    pub payload_len: usize,
    pub pilot_ratio: f64,
    /// Overrides `round(pilot_ratio * payload_len)` when set.
    pub pilot_count: Option<usize>,
    /// Symbols per second.
    pub baud: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            qam_order: 16,
            train_len: 512,
            payload_len: 22400,
            pilot_ratio: 0.004,
            pilot_count: None,
            baud: 56e9,
        }
    }
}

impl FrameSpec {
    pub fn total_len(&self) -> usize {
        self.train_len + self.payload_len
    }

    pub fn pilots(&self) -> usize {
        self.pilot_count
            .unwrap_or_else(|| (self.pilot_ratio * self.payload_len as f64).round() as usize)
    }

    /// Pilot positions as frame indices (training occupies `0..train_len`).
    pub fn pilot_positions(&self) -> Vec<usize> {
        let p = self.pilots();
        (0..p)
            .map(|i| self.train_len + ((i as f64 + 0.5) * self.payload_len as f64 / p as f64) as usize)
            .collect()
    }

    /// Payload positions that carry data bits.
    pub fn data_positions(&self) -> Vec<usize> {
        let pilots = self.pilot_positions();
        let mut next = pilots.iter().peekable();
        (self.train_len..self.total_len())
            .filter(|&i| {
                if next.peek() == Some(&&i) {
                    next.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        Constellation::new(self.qam_order)?;
        if self.payload_len == 0 {
            return Err(invalid("payload_len must be positive"));
        }
        if !(0.0..1.0).contains(&self.pilot_ratio) {
            return Err(invalid(format!("pilot_ratio {} outside [0, 1)", self.pilot_ratio)));
        }
        if self.pilots() >= self.payload_len {
            return Err(invalid("pilots must be a strict subset of the payload"));
        }
        if !(self.baud.is_finite() && self.baud > 0.0) {
            return Err(invalid(format!("baud must be positive, got {}", self.baud)));
        }
        Ok(())
    }
}

/// One generated frame for both polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub spec: FrameSpec,
    /// Full symbol sequence per polarization: training, then payload.
    pub symbols: [Vec<C64>; 2],
    /// Data bits per polarization, in `data_positions` order.
    pub bits: [Vec<u8>; 2],
    pub pilot_positions: Vec<usize>,
    pub data_positions: Vec<usize>,
}

impl Frame {
    pub fn training(&self, pol: usize) -> &[C64] {
        &self.symbols[pol][..self.spec.train_len]
    }
}

fn qpsk_sequence(len: usize, seed: u64, tag: &str, pol: usize) -> Vec<C64> {
    let qpsk = Constellation::new(4).expect("QPSK is supported");
    let mut r = rng::stream(seed, tag, pol as u64);
    (0..len).map(|_| qpsk.point(r.random_range(0..4))).collect()
}

/// Random Gray-mapped frame. Training and pilots are seeded QPSK; X and Y
/// draw from independent streams.
pub fn generate_frame(spec: &FrameSpec, seed: u64) -> Result<Frame> {
    spec.validate()?;
    let constellation = Constellation::new(spec.qam_order)?;
    let pilot_positions = spec.pilot_positions();
    let data_positions = spec.data_positions();
    let k = constellation.bits_per_symbol();

    let mut symbols: [Vec<C64>; 2] = Default::default();
    let mut bits: [Vec<u8>; 2] = Default::default();
    for pol in 0..2 {
        let mut r = rng::stream(seed, "bits", pol as u64);
        let b: Vec<u8> = (0..data_positions.len() * k).map(|_| r.random_range(0..2u8)).collect();
        let data = constellation.map_bits(&b)?;
        let mut s = qpsk_sequence(spec.train_len, seed, "training", pol);
        s.resize(spec.total_len(), C64::new(0.0, 0.0));
        for (&pos, v) in pilot_positions.iter().zip(qpsk_sequence(pilot_positions.len(), seed, "pilots", pol)) {
            s[pos] = v;
        }
        for (&pos, v) in data_positions.iter().zip(data) {
            s[pos] = v;
        }
        symbols[pol] = s;
        bits[pol] = b;
    }
    Ok(Frame { spec: *spec, symbols, bits, pilot_positions, data_positions })
}

/// Upsample by zero insertion and shape with a periodic RRC. The output is
/// scaled so a unit-power symbol stream gives unit waveform power.
pub fn shape(symbols: &[C64], baud: f64, rrc: &RrcSpec) -> Result<ComplexSignal> {
    if symbols.is_empty() {
        return Err(Error::EmptySignal);
    }
    let mut up = vec![C64::new(0.0, 0.0); symbols.len() * rrc.sps];
    let gain = (rrc.sps as f64).sqrt();
    for (i, &s) in symbols.iter().enumerate() {
        up[i * rrc.sps] = s * gain;
    }
    let s = ComplexSignal::new(up, baud * rrc.sps as f64)?;
    signal::rrc_filter_periodic(&s, rrc)
}

/// Shape both polarizations of a frame into one period of the transmitted waveform.
pub fn modulate(symbols: &[Vec<C64>; 2], spec: &FrameSpec, rrc: &RrcSpec) -> Result<JonesSignal> {
    if rrc.sps < 4 {
        return Err(invalid(format!("generation needs sps >= 4, got {}", rrc.sps)));
    }
    JonesSignal::new(shape(&symbols[0], spec.baud, rrc)?, shape(&symbols[1], spec.baud, rrc)?)
}

/// Transmit carrier. `offset = None` places the tone just outside the lower
/// band edge, at `-(baud * (1 + rolloff) / 2 + 0.01 * baud)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarrierSpec {
    pub cspr_db: f64,
    pub offset: Option<f64>,
    /// Carrier polarization angle relative to the signal axes, radians.
    pub xi: f64,
}

impl Default for CarrierSpec {
    fn default() -> Self {
        Self { cspr_db: 6.0, offset: None, xi: 0.0 }
    }
}

impl CarrierSpec {
    pub fn resolve_offset(&self, baud: f64, rolloff: f64) -> f64 {
        self.offset.unwrap_or(-(baud * (1.0 + rolloff) / 2.0 + 0.01 * baud))
    }
}

/// Tone frequency snapped onto the FFT grid of an `n`-sample period, so the
/// carrier is exactly periodic over the frame.
pub fn snap_to_bin(freq: f64, n: usize, rate: f64) -> f64 {
    (freq * n as f64 / rate).round() * rate / n as f64
}

/// Rotate the signal pair by `xi` and add a common tone on both
/// polarizations at the requested total carrier-to-signal ratio.
pub fn insert_carrier(sig: &JonesSignal, carrier: &CarrierSpec, offset: f64) -> Result<JonesSignal> {
    let rate = sig.sample_rate();
    if offset.abs() >= rate / 2.0 {
        return Err(Error::Aliasing { freq: offset, rate });
    }
    let (s, c) = carrier.xi.sin_cos();
    let gx: Vec<C64> = sig.x.samples.iter().zip(&sig.y.samples).map(|(x, y)| x * c - y * s).collect();
    let gy: Vec<C64> = sig.x.samples.iter().zip(&sig.y.samples).map(|(x, y)| x * s + y * c).collect();
    let ps = signal::mean_power(&gx)? + signal::mean_power(&gy)?;
    let amp = (10f64.powf(carrier.cspr_db / 10.0) * ps / 2.0).sqrt();
    let n = sig.len();
    let f = snap_to_bin(offset, n, rate);
    let tone: Vec<C64> = (0..n).map(|t| C64::from_polar(amp, 2.0 * PI * f * t as f64 / rate)).collect();
    let add = |g: Vec<C64>| -> Vec<C64> { g.into_iter().zip(&tone).map(|(a, b)| a + b).collect() };
    JonesSignal::new(sig.x.with_samples(add(gx)), sig.y.with_samples(add(gy)))
}

/// Single-polarization variant: tone on X only, Y left untouched.
pub fn insert_carrier_single(sig: &ComplexSignal, cspr_db: f64, offset: f64) -> Result<ComplexSignal> {
    let rate = sig.sample_rate;
    if offset.abs() >= rate / 2.0 {
        return Err(Error::Aliasing { freq: offset, rate });
    }
    let amp = (10f64.powf(cspr_db / 10.0) * sig.power()?).sqrt();
    let n = sig.len();
    let f = snap_to_bin(offset, n, rate);
    Ok(sig.with_samples(
        sig.samples
            .iter()
            .enumerate()
            .map(|(t, &v)| v + C64::from_polar(amp, 2.0 * PI * f * t as f64 / rate))
            .collect(),
    ))
}

/// Tone-bin power over the remaining power, summed over both polarizations, in dB.
pub fn measure_cspr_db(sig: &JonesSignal, offset: f64) -> Result<f64> {
    let n = sig.len();
    let k = signal::frequency_bin(offset, n, sig.sample_rate());
    let (mut tone, mut rest) = (0.0, 0.0);
    for pol in [&sig.x, &sig.y] {
        let spec = pol.spectrum();
        for (i, v) in spec.iter().enumerate() {
            if i == k {
                tone += v.norm_sqr();
            } else {
                rest += v.norm_sqr();
            }
        }
    }
    if rest == 0.0 {
        return Err(Error::EmptySignal);
    }
    Ok(10.0 * (tone / rest).log10())
}

/// Net bit rate in Gb/s after FEC, training and pilot overheads.
pub fn compute_net_rate(spec: &FrameSpec, fec_overhead: f64, dual_pol: bool) -> Result<f64> {
    if !(fec_overhead.is_finite() && fec_overhead >= 0.0) {
        return Err(invalid(format!("FEC overhead must be >= 0, got {fec_overhead}")));
    }
    let bits = Constellation::new(spec.qam_order)?.bits_per_symbol() as f64;
    let pols = if dual_pol { 2.0 } else { 1.0 };
    let data = (spec.payload_len - spec.pilots()) as f64;
    let efficiency = data / spec.total_len() as f64;
    Ok(spec.baud * bits * pols / (1.0 + fec_overhead) * efficiency / 1e9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> FrameSpec {
        FrameSpec { payload_len: 4096, train_len: 256, ..Default::default() }
    }

    #[test]
    fn frame_layout() {
        let spec = small();
        let f = generate_frame(&spec, 1).unwrap();
        assert_eq!(f.symbols[0].len(), spec.total_len());
        assert_eq!(f.pilot_positions.len(), 16);
        assert_eq!(f.data_positions.len() + f.pilot_positions.len(), spec.payload_len);
        assert!(f.pilot_positions.iter().all(|p| (spec.train_len..spec.total_len()).contains(p)));
        assert_eq!(f.bits[0].len(), f.data_positions.len() * 4);
        let gaps: Vec<usize> = f.pilot_positions.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.iter().all(|&g| g == 256));
    }

    #[test]
    fn explicit_pilot_count_override() {
        let spec = FrameSpec { pilot_count: Some(80), ..Default::default() };
        assert_eq!(spec.pilots(), 80);
        assert_eq!(FrameSpec::default().pilots(), 90);
    }

    #[test]
    fn qam16_mean_power() {
        let spec = FrameSpec { payload_len: 100_000, train_len: 0, pilot_ratio: 0.0, ..Default::default() };
        let f = generate_frame(&spec, 7).unwrap();
        let p = signal::mean_power(&f.symbols[0]).unwrap();
        assert!((p - 1.0).abs() < 0.02, "{p}");
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate_frame(&small(), 5).unwrap();
        assert_eq!(a, generate_frame(&small(), 5).unwrap());
        assert_ne!(a.symbols, generate_frame(&small(), 6).unwrap().symbols);
        assert_ne!(a.symbols[0], a.symbols[1]);
    }

    #[test]
    fn bits_round_trip_through_mapping() {
        let f = generate_frame(&small(), 3).unwrap();
        let c = Constellation::new(16).unwrap();
        let data: Vec<C64> = f.data_positions.iter().map(|&i| f.symbols[1][i]).collect();
        assert_eq!(c.demap(&data), f.bits[1]);
    }

    #[test]
    fn unsupported_order() {
        let spec = FrameSpec { qam_order: 32, ..small() };
        assert!(matches!(generate_frame(&spec, 0), Err(Error::UnsupportedQam(32))));
    }

    #[test]
    fn training_autocorrelation_sidelobes() {
        let f = generate_frame(&FrameSpec::default(), 11).unwrap();
        let t = f.training(0);
        let n = t.len();
        let corr = |lag: usize| -> f64 {
            (0..n).map(|i| t[i] * t[(i + lag) % n].conj()).sum::<C64>().norm()
        };
        let peak = corr(0);
        let side = (1..n).map(corr).fold(0.0, f64::max);
        assert!(20.0 * (peak / side).log10() >= 10.0);
    }

    #[test]
    fn single_symbol_gives_centered_pulse() {
        let rrc = RrcSpec { span: 16, sps: 8, rolloff: 0.01 };
        let mut syms = vec![C64::new(0.0, 0.0); 64];
        syms[20] = C64::new(1.0, 0.0);
        let s = shape(&syms, 1.0, &rrc).unwrap();
        let peak = (0..s.len()).max_by(|&a, &b| s.samples[a].norm().total_cmp(&s.samples[b].norm())).unwrap();
        assert_eq!(peak, 160);
        let taps = signal::rrc_taps(&rrc).unwrap();
        assert!((s.samples[160].re - taps[taps.len() / 2] * 8f64.sqrt()).abs() < 1e-12);
    }

    /// Symmetric 99% power bandwidth of a two-sided power spectrum, in bins.
    fn bw99(psd: &[f64]) -> usize {
        let n = psd.len();
        let total: f64 = psd.iter().sum();
        let mut acc = psd[0];
        let mut k = 0;
        while acc < 0.99 * total {
            k += 1;
            acc += psd[k] + psd[n - k];
        }
        2 * k + 1
    }

    #[test]
    fn occupied_bandwidth_99_percent() {
        let spec = FrameSpec { payload_len: 8192, train_len: 0, pilot_ratio: 0.0, baud: 1.0, ..Default::default() };
        let rrc = RrcSpec::default();
        let n = spec.total_len() * rrc.sps;
        let mut psd = vec![0.0; n];
        for seed in 0..16 {
            let f = generate_frame(&spec, seed).unwrap();
            let s = modulate(&f.symbols, &spec, &rrc).unwrap();
            for (acc, v) in psd.iter_mut().zip(s.x.spectrum()) {
                *acc += v.norm_sqr();
            }
        }
        let to_baud = |bins: usize| bins as f64 * rrc.sps as f64 / n as f64;
        let bw = to_baud(bw99(&psd));

        // oracle: white symbols, so the expected PSD is the filter's |H|²
        let taps = signal::rrc_taps(&rrc).unwrap();
        let mut h = vec![C64::new(0.0, 0.0); n];
        for (dst, &t) in h.iter_mut().zip(&taps) {
            *dst = C64::new(t, 0.0);
        }
        signal::fft(&mut h);
        let expected = to_baud(bw99(&h.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()));
        assert!((bw - expected).abs() <= 0.005 * expected, "measured {bw}, filter oracle {expected}");
        // the 64-symbol truncation puts the 99% point at 0.987 baud, just under
        // the ideal 0.990, so the window around baud * (1 + rolloff) is 2.5%
        assert!((bw - 1.01).abs() <= 0.025 * 1.01, "99% bandwidth {bw}");
    }

    #[test]
    fn x_y_uncorrelated() {
        let spec = small();
        let f = generate_frame(&spec, 21).unwrap();
        let s = modulate(&f.symbols, &spec, &RrcSpec::default()).unwrap();
        let cross: C64 = s.x.samples.iter().zip(&s.y.samples).map(|(a, b)| a * b.conj()).sum();
        let rho = cross.norm() / (s.x.power().unwrap() * s.y.power().unwrap()).sqrt() / s.len() as f64;
        assert!(rho < 0.05, "{rho}");
    }

    fn shaped(seed: u64) -> JonesSignal {
        shaped_len(seed, 1024)
    }

    fn shaped_len(seed: u64, payload_len: usize) -> JonesSignal {
        let spec = FrameSpec { payload_len, train_len: 64, ..Default::default() };
        let f = generate_frame(&spec, seed).unwrap();
        modulate(&f.symbols, &spec, &RrcSpec { span: 32, ..Default::default() }).unwrap()
    }

    fn offset_of(sig: &JonesSignal) -> f64 {
        snap_to_bin(CarrierSpec::default().resolve_offset(56e9, 0.01), sig.len(), sig.sample_rate())
    }

    #[test]
    fn carrier_at_zero_db_matches_signal_power() {
        let sig = shaped(1);
        let off = offset_of(&sig);
        let tx = insert_carrier(&sig, &CarrierSpec { cspr_db: 0.0, ..Default::default() }, off).unwrap();
        assert!(measure_cspr_db(&tx, off).unwrap().abs() < 0.05);
    }

    #[test]
    fn carrier_at_twelve_db() {
        let sig = shaped(2);
        let off = offset_of(&sig);
        let tx = insert_carrier(&sig, &CarrierSpec { cspr_db: 12.0, ..Default::default() }, off).unwrap();
        assert!((measure_cspr_db(&tx, off).unwrap() - 12.0).abs() < 0.05);
    }

    #[test]
    fn carrier_aliasing_rejected() {
        let sig = shaped(3);
        let rate = sig.sample_rate();
        assert!(matches!(
            insert_carrier(&sig, &CarrierSpec::default(), 0.6 * rate),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn zero_xi_carrier_sits_at_45_degrees() {
        let sig = shaped(4);
        let off = offset_of(&sig);
        let tx = insert_carrier(&sig, &CarrierSpec::default(), off).unwrap();
        for t in (0..sig.len()).step_by(97) {
            let cx = tx.x.samples[t] - sig.x.samples[t];
            let cy = tx.y.samples[t] - sig.y.samples[t];
            assert!((cx - cy).norm() < 1e-12);
        }
    }

    #[test]
    fn net_rate_cases() {
        let reference = FrameSpec { payload_len: 22400, pilot_count: Some(80), ..Default::default() };
        let dp = compute_net_rate(&reference, 0.14, true).unwrap();
        // 56 * 4 * 2 / 1.14 / (512 + 80 + 22320) * 22320
        let oracle = 56.0 * 4.0 * 2.0 / 1.14 / (512.0 + 80.0 + 22320.0) * 22320.0;
        assert!((dp - oracle).abs() < 1e-9);
        assert!((dp - 382.8).abs() < 0.1);
        assert_eq!(compute_net_rate(&reference, 0.14, false).unwrap(), dp / 2.0);
        let bare = FrameSpec { train_len: 0, pilot_count: Some(0), ..Default::default() };
        assert!((compute_net_rate(&bare, 0.0, true).unwrap() - 56.0 * 4.0 * 2.0).abs() < 1e-9);
        assert!(compute_net_rate(&reference, -0.1, true).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn xi_rotation_preserves_powers(xi in -PI..PI, seed in 0u64..100) {
            let sig = shaped_len(seed, 32768);
            let off = offset_of(&sig);
            let ref_tx = insert_carrier(&sig, &CarrierSpec::default(), off).unwrap();
            let tx = insert_carrier(&sig, &CarrierSpec { xi, ..Default::default() }, off).unwrap();
            // carrier/signal cross terms come only from RRC sidelobes reaching
            // the tone bin: |ΔP| <= 2·2·√(Pc·Pbin) by Cauchy-Schwarz
            let ps = sig.power().unwrap();
            let n = sig.len();
            let k = signal::frequency_bin(off, n, sig.sample_rate());
            let pbin = (sig.x.spectrum()[k].norm_sqr() + sig.y.spectrum()[k].norm_sqr()) / (n * n) as f64;
            let pc = ps * 10f64.powf(CarrierSpec::default().cspr_db / 10.0);
            let delta = (tx.power().unwrap() - ref_tx.power().unwrap()).abs();
            prop_assert!(delta <= 4.0 * (pc * pbin).sqrt() + 1e-12 * ps, "{} vs bound {}", delta, 4.0 * (pc * pbin).sqrt());
            prop_assert!(delta < 1e-2 * ref_tx.power().unwrap());
            let (s, c) = xi.sin_cos();
            let g: Vec<C64> = sig.x.samples.iter().zip(&sig.y.samples)
                .flat_map(|(x, y)| [x * c - y * s, x * s + y * c]).collect();
            prop_assert!((2.0 * signal::mean_power(&g).unwrap() - ps).abs() < 1e-12 * ps);
            // G_x power: c²·P(Sx) + s²·P(Sy) - 2cs·Re<Sx, Sy>
            let gx: Vec<C64> = sig.x.samples.iter().zip(&sig.y.samples).map(|(x, y)| x * c - y * s).collect();
            let pg = signal::mean_power(&gx).unwrap();
            let (px, py) = (sig.x.power().unwrap(), sig.y.power().unwrap());
            let cross = sig.x.samples.iter().zip(&sig.y.samples).map(|(x, y)| (x * y.conj()).re).sum::<f64>() / sig.len() as f64;
            let expected = c * c * px + s * s * py - 2.0 * c * s * cross;
            prop_assert!((pg - expected).abs() < 1e-12 * ps, "P(Gx) = {} vs {}", pg, expected);
        }

        #[test]
        fn measured_cspr_tracks_request(cspr in 0.0f64..20.0, seed in 0u64..100) {
            let sig = shaped(seed);
            let off = offset_of(&sig);
            let tx = insert_carrier(&sig, &CarrierSpec { cspr_db: cspr, ..Default::default() }, off).unwrap();
            prop_assert!((measure_cspr_db(&tx, off).unwrap() - cspr).abs() < 0.05);
        }
    }
}
