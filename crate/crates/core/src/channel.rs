//! Link model: polarization rotation, chromatic dispersion, sectioned PMD,
//! laser mismatch and ASE loading.
//!
//! Spectral operators use the FFT sign convention (`exp(+jωt)` synthesis),
//! so a delay `τ` is the factor `exp(-jωτ)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;
use crate::signal::{self, ComplexSignal, JonesSignal, C64};
use crate::tx::snap_to_bin;

/// 2×2 complex matrix, row-major.
pub type Jones = [[C64; 2]; 2];

pub const IDENTITY: Jones = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];

pub fn mat_mul(a: &Jones, b: &Jones) -> Jones {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn hermitian(a: &Jones) -> Jones {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// 0.1 nm at 1550 nm.
pub const OSNR_REF_BANDWIDTH: f64 = 12.5e9;

/// β2 in s²/m from a dispersion parameter in ps/(nm·km).
pub fn beta2_from_dispersion(d_ps_nm_km: f64, wavelength_m: f64) -> f64 {
    -(d_ps_nm_km * 1e-6) * wavelength_m * wavelength_m / (2.0 * PI * C_LIGHT)
}

/// Static polarization rotation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SopState {
    pub alpha: f64,
    pub theta: f64,
}

impl SopState {
    pub fn new(alpha: f64, theta: f64) -> Self {
        Self { alpha, theta }
    }

    /// `[[cos α·e^{jθ}, −sin α], [sin α, cos α·e^{−jθ}]]`
    pub fn matrix(&self) -> Jones {
        let (s, c) = self.alpha.sin_cos();
        [
            [C64::from_polar(c, self.theta), C64::new(-s, 0.0)],
            [C64::new(s, 0.0), C64::from_polar(c, -self.theta)],
        ]
    }
}

/// Fiber and noise parameters of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkSpec {
    pub fiber_km: f64,
    /// s²/m
    pub beta2: f64,
    pub pmd_sections: usize,
    /// ps/√km
    pub pmd_param: f64,
    /// Exact DGD in seconds at the band center; overrides `pmd_param` when set.
    pub dgd: Option<f64>,
    /// `None` disables ASE loading.
    pub osnr_db: Option<f64>,
    /// Signal-laser frequency offset relative to the carrier laser, Hz.
    pub freq_offset: f64,
    /// Combined laser linewidth, Hz.
    pub linewidth: f64,
    pub seed: u64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self {
            fiber_km: 0.0,
            beta2: beta2_from_dispersion(17.0, 1550e-9),
            pmd_sections: 15,
            pmd_param: 0.1,
            dgd: None,
            osnr_db: Some(30.0),
            freq_offset: 0.0,
            linewidth: 0.0,
            seed: 0,
        }
    }
}

impl LinkSpec {
    /// Ensemble-mean DGD in seconds.
    pub fn mean_dgd(&self) -> f64 {
        self.pmd_param * 1e-12 * self.fiber_km.max(0.0).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pmd_sections == 0 {
            return Err(invalid("pmd_sections must be at least 1"));
        }
        if !(self.fiber_km.is_finite() && self.fiber_km >= 0.0) {
            return Err(invalid(format!("fiber_km must be >= 0, got {}", self.fiber_km)));
        }
        if self.osnr_db.is_some_and(|o| !o.is_finite()) {
            return Err(invalid("osnr_db must be finite"));
        }
        if self.dgd.is_some_and(|d| !(d.is_finite() && d >= 0.0)) {
            return Err(invalid("dgd must be finite and >= 0"));
        }
        if !(self.linewidth.is_finite() && self.linewidth >= 0.0) {
            return Err(invalid("linewidth must be >= 0"));
        }
        Ok(())
    }
}

fn apply_matrix(sig: &JonesSignal, m: &Jones) -> Result<JonesSignal> {
    let (x, y): (Vec<C64>, Vec<C64>) = sig
        .x
        .samples
        .iter()
        .zip(&sig.y.samples)
        .map(|(&a, &b)| (m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b))
        .unzip();
    JonesSignal::new(sig.x.with_samples(x), sig.y.with_samples(y))
}

pub fn apply_jones(sig: &JonesSignal, m: &Jones) -> Result<JonesSignal> {
    apply_matrix(sig, m)
}

pub fn apply_rotation(sig: &JonesSignal, sop: &SopState) -> Result<JonesSignal> {
    apply_matrix(sig, &sop.matrix())
}

fn angular_frequencies(n: usize, rate: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| 2.0 * PI * signal::bin_frequency(k, n, rate))
}

/// All-pass dispersion filter `exp(-j·β2·ω²·L/2)` applied to one waveform.
pub fn dispersion(s: &ComplexSignal, fiber_km: f64, beta2: f64) -> ComplexSignal {
    if fiber_km == 0.0 || beta2 == 0.0 {
        return s.clone();
    }
    let l = fiber_km * 1e3;
    let mut spec = s.spectrum();
    for (v, w) in spec.iter_mut().zip(angular_frequencies(s.len(), s.sample_rate)) {
        *v *= C64::from_polar(1.0, -beta2 * w * w * l / 2.0);
    }
    signal::ifft(&mut spec);
    s.with_samples(spec)
}

pub fn apply_cd(sig: &JonesSignal, fiber_km: f64, beta2: f64) -> Result<JonesSignal> {
    JonesSignal::new(dispersion(&sig.x, fiber_km, beta2), dispersion(&sig.y, fiber_km, beta2))
}

/// Haar-random SU(2) matrix from a normalized Gaussian quaternion.
fn random_unitary<R: Rng>(r: &mut R) -> Jones {
    let mut q: [f64; 4] = std::array::from_fn(|_| r.sample(StandardNormal));
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= norm);
    [
        [C64::new(q[0], q[1]), C64::new(q[2], q[3])],
        [C64::new(-q[2], q[3]), C64::new(q[0], -q[1])],
    ]
}

/// Sectioned all-order PMD emulator: each section is a random rotation
/// followed by a birefringent element delaying X by `τ/2` and advancing Y by `τ/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PmdEmulator {
    pub rotations: Vec<Jones>,
    /// Per-section differential delay, seconds.
    pub taus: Vec<f64>,
}

impl PmdEmulator {
    /// Section delays `|N(0,1)|·σ` with `σ = mean_dgd·sqrt(3π/(8N))`, which
    /// makes the ensemble-mean DGD equal `mean_dgd` for a Maxwellian total.
    pub fn random(sections: usize, mean_dgd: f64, seed: u64) -> Result<Self> {
        if sections == 0 {
            return Err(invalid("pmd_sections must be at least 1"));
        }
        let mut r = rng::stream(seed, "pmd", 0);
        let sigma = mean_dgd * (3.0 * PI / (8.0 * sections as f64)).sqrt();
        let mut rotations = Vec::with_capacity(sections);
        let mut taus = Vec::with_capacity(sections);
        for _ in 0..sections {
            rotations.push(random_unitary(&mut r));
            taus.push(r.sample::<f64, _>(StandardNormal).abs() * sigma);
        }
        Ok(Self { rotations, taus })
    }

    pub fn from_spec(spec: &LinkSpec) -> Result<Self> {
        spec.validate()?;
        let pmd = Self::random(spec.pmd_sections, spec.mean_dgd(), spec.seed)?;
        match spec.dgd {
            Some(target) => {
                // a fixed target needs nonzero section delays to scale
                let base = if pmd.taus.iter().all(|&t| t == 0.0) {
                    Self::random(spec.pmd_sections, 1e-12, spec.seed)?
                } else {
                    pmd
                };
                Ok(base.scaled_to_dgd(target))
            }
            None => Ok(pmd),
        }
    }

    /// Total Jones matrix at angular frequency `w` (rad/s).
    pub fn matrix(&self, w: f64) -> Jones {
        self.rotations.iter().zip(&self.taus).fold(IDENTITY, |acc, (u, &tau)| {
            let b = [
                [C64::from_polar(1.0, -w * tau / 2.0), C64::new(0.0, 0.0)],
                [C64::new(0.0, 0.0), C64::from_polar(1.0, w * tau / 2.0)],
            ];
            mat_mul(&b, &mat_mul(u, &acc))
        })
    }

    /// DGD at angular frequency `w` from the eigenvalues of `M(w+dw)·M(w)^H`.
    pub fn dgd_at(&self, w: f64) -> f64 {
        let dw = 2.0 * PI * 1e6;
        let m = mat_mul(&self.matrix(w + dw), &hermitian(&self.matrix(w - dw)));
        // eigenvalues of a 2×2 unitary: roots of λ² − tr·λ + det
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr - det * 4.0).sqrt();
        let l1 = (tr + disc) / 2.0;
        let l2 = (tr - disc) / 2.0;
        (l1 / l2).arg().abs() / (2.0 * dw)
    }

    /// Scale every section delay so the DGD at the band center is `target`.
    /// DGD at ω = 0 is linear in a common delay scale, so this is exact.
    pub fn scaled_to_dgd(&self, target: f64) -> Self {
        let now = self.dgd_at(0.0);
        let k = if now > 0.0 { target / now } else { 0.0 };
        Self { rotations: self.rotations.clone(), taus: self.taus.iter().map(|t| t * k).collect() }
    }

    pub fn apply(&self, sig: &JonesSignal) -> Result<JonesSignal> {
        let mut x = sig.x.spectrum();
        let mut y = sig.y.spectrum();
        for (k, w) in angular_frequencies(sig.len(), sig.sample_rate()).enumerate() {
            let m = self.matrix(w);
            let (a, b) = (x[k], y[k]);
            x[k] = m[0][0] * a + m[0][1] * b;
            y[k] = m[1][0] * a + m[1][1] * b;
        }
        signal::ifft(&mut x);
        signal::ifft(&mut y);
        JonesSignal::new(sig.x.with_samples(x), sig.y.with_samples(y))
    }
}

pub fn apply_pmd(sig: &JonesSignal, spec: &LinkSpec) -> Result<JonesSignal> {
    PmdEmulator::from_spec(spec)?.apply(sig)
}

/// White circular Gaussian noise on both polarizations at the requested OSNR
/// (total signal power over ASE power in 12.5 GHz, both polarizations).
pub fn load_ase(sig: &JonesSignal, osnr_db: Option<f64>, seed: u64) -> Result<JonesSignal> {
    let Some(osnr_db) = osnr_db else {
        return Ok(sig.clone());
    };
    if !osnr_db.is_finite() {
        return Err(invalid("osnr_db must be finite"));
    }
    let p = sig.power()?;
    let psd_both = p / (10f64.powf(osnr_db / 10.0) * OSNR_REF_BANDWIDTH);
    let sigma = (psd_both / 2.0 * sig.sample_rate() / 2.0).sqrt();
    let mut r = rng::stream(seed, "ase", 0);
    let mut noisy = |s: &ComplexSignal| -> ComplexSignal {
        s.with_samples(
            s.samples
                .iter()
                .map(|&v| {
                    v + C64::new(r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal)) * sigma
                })
                .collect(),
        )
    };
    let x = noisy(&sig.x);
    let y = noisy(&sig.y);
    JonesSignal::new(x, y)
}

/// Ideal rectangular optical filter passing `lo..=hi` Hz.
pub fn optical_bandpass(sig: &JonesSignal, lo: f64, hi: f64) -> Result<JonesSignal> {
    if lo >= hi {
        return Err(invalid(format!("empty passband [{lo}, {hi}]")));
    }
    sig.map(|s| {
        let mut spec = s.spectrum();
        for (k, v) in spec.iter_mut().enumerate() {
            let f = signal::bin_frequency(k, s.len(), s.sample_rate);
            if f < lo || f > hi {
                *v = C64::new(0.0, 0.0);
            }
        }
        signal::ifft(&mut spec);
        Ok(s.with_samples(spec))
    })
}

/// Frequency offset and Wiener phase noise of the signal laser relative to
/// the carrier laser. The offset is snapped to the frame's FFT grid.
pub fn laser_mismatch(sig: &JonesSignal, freq_offset: f64, linewidth: f64, seed: u64) -> Result<JonesSignal> {
    if freq_offset == 0.0 && linewidth == 0.0 {
        return Ok(sig.clone());
    }
    let rate = sig.sample_rate();
    let f = snap_to_bin(freq_offset, sig.len(), rate);
    let step = (2.0 * PI * linewidth / rate).sqrt();
    let mut r = rng::stream(seed, "laser", 0);
    let mut phi = 0.0;
    let rot: Vec<C64> = (0..sig.len())
        .map(|t| {
            let v = C64::from_polar(1.0, 2.0 * PI * f * t as f64 / rate + phi);
            phi += step * r.sample::<f64, _>(StandardNormal);
            v
        })
        .collect();
    sig.map(|s| Ok(s.with_samples(s.samples.iter().zip(&rot).map(|(a, b)| a * b).collect())))
}
