//! Receiver front-ends and square-law detection.
//!
//! Branch fields follow the unit-gain convention: a 2×2 coupler output is
//! `X + Y`, not `(X + Y)/√2`. The 3×3 coupler uses its exact unitary matrix.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::signal::{self, ComplexSignal, JonesSignal, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Polarization beam splitter and two detectors.
    PbsBaseline,
    Coupler2x2,
    Hybrid90,
    Coupler3x3,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::PbsBaseline, Scheme::Coupler2x2, Scheme::Hybrid90, Scheme::Coupler3x3];

    /// Optical outputs in fixed label order.
    pub fn labels(&self) -> &'static [BranchLabel] {
        use BranchLabel::*;
        match self {
            Scheme::PbsBaseline => &[X, Y],
            Scheme::Coupler2x2 => &[X, Y, XPlusY, XMinusY],
            Scheme::Hybrid90 => &[XPlusY, XMinusY, XPlusJY, XMinusJY],
            Scheme::Coupler3x3 => &[AXBY, BXBY, BXAY],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::PbsBaseline => "pbs_baseline",
            Scheme::Coupler2x2 => "coupler_2x2",
            Scheme::Hybrid90 => "hybrid_90",
            Scheme::Coupler3x3 => "coupler_3x3",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| invalid(format!("unknown scheme `{s}`")))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Branch identity as a linear combination of the received X and Y fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BranchLabel {
    X,
    Y,
    XPlusY,
    XMinusY,
    XPlusJY,
    XMinusJY,
    AXBY,
    BXBY,
    BXAY,
}

impl BranchLabel {
    /// `(cx, cy)` with branch field `cx·X + cy·Y`.
    pub fn coefficients(&self) -> (C64, C64) {
        let one = C64::new(1.0, 0.0);
        let j = C64::new(0.0, 1.0);
        let (a, b) = coupler_constants();
        match self {
            BranchLabel::X => (one, C64::new(0.0, 0.0)),
            BranchLabel::Y => (C64::new(0.0, 0.0), one),
            BranchLabel::XPlusY => (one, one),
            BranchLabel::XMinusY => (one, -one),
            BranchLabel::XPlusJY => (one, j),
            BranchLabel::XMinusJY => (one, -j),
            BranchLabel::AXBY => (a, b),
            BranchLabel::BXBY => (b, b),
            BranchLabel::BXAY => (b, a),
        }
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchLabel::X => "X",
            BranchLabel::Y => "Y",
            BranchLabel::XPlusY => "X+Y",
            BranchLabel::XMinusY => "X-Y",
            BranchLabel::XPlusJY => "X+jY",
            BranchLabel::XMinusJY => "X-jY",
            BranchLabel::AXBY => "aX+bY",
            BranchLabel::BXBY => "bX+bY",
            BranchLabel::BXAY => "bX+aY",
        })
    }
}

/// 3×3 coupler constants `a = (2e^{j2π/9} + e^{−j4π/9})/3`, `b = (e^{−j4π/9} − e^{j2π/9})/3`.
pub fn coupler_constants() -> (C64, C64) {
    let p = C64::from_polar(1.0, 2.0 * PI / 9.0);
    let m = C64::from_polar(1.0, -4.0 * PI / 9.0);
    ((p * 2.0 + m) / 3.0, (m - p) / 3.0)
}

/// Symmetric 3×3 coupler transfer matrix (`a` on the diagonal, `b` elsewhere).
pub fn coupler_3x3_matrix() -> [[C64; 3]; 3] {
    let (a, b) = coupler_constants();
    [[a, b, b], [b, a, b], [b, b, a]]
}

/// Which photocurrents a receiver produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// One detector per optical output.
    #[default]
    Direct,
    /// Three detectors; the remaining currents are rebuilt from them.
    Reconstruct,
    /// Three detectors and nothing else.
    Reduced,
}

/// Per-branch optical fields and/or photocurrents of one front-end.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSet {
    pub scheme: Scheme,
    pub labels: Vec<BranchLabel>,
    /// Pre-detection fields, parallel to `labels` (empty after reconstruction).
    pub fields: Vec<ComplexSignal>,
    /// Photocurrents, parallel to `labels` (empty before detection).
    pub currents: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

impl BranchSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: BranchLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn current(&self, label: BranchLabel) -> Option<&[f64]> {
        self.index_of(label).and_then(|i| self.currents.get(i)).map(Vec::as_slice)
    }

    /// Keep only the listed branches, in the given order.
    pub fn select(&self, keep: &[BranchLabel]) -> Result<BranchSet> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|&l| self.index_of(l).ok_or_else(|| invalid(format!("branch {l} not present"))))
            .collect::<Result<_>>()?;
        Ok(BranchSet {
            scheme: self.scheme,
            labels: keep.to_vec(),
            fields: if self.fields.is_empty() { vec![] } else { idx.iter().map(|&i| self.fields[i].clone()).collect() },
            currents: if self.currents.is_empty() { vec![] } else { idx.iter().map(|&i| self.currents[i].clone()).collect() },
            sample_rate: self.sample_rate,
        })
    }

    /// Pre-detection filter `h` on every branch field (circular convolution,
    /// `taps[0]` at zero lag).
    pub fn filter_fields(&self, taps: &[C64]) -> Result<BranchSet> {
        if taps.is_empty() {
            return Err(invalid("empty branch filter"));
        }
        let fields = self
            .fields
            .iter()
            .map(|f| {
                let n = f.len();
                let mut h = vec![C64::new(0.0, 0.0); n];
                for (i, &t) in taps.iter().enumerate() {
                    h[i % n] += t;
                }
                signal::fft(&mut h);
                let mut spec = f.spectrum();
                spec.iter_mut().zip(&h).for_each(|(a, b)| *a *= b);
                signal::ifft(&mut spec);
                f.with_samples(spec)
            })
            .collect();
        Ok(BranchSet { fields, currents: vec![], ..self.clone() })
    }

    /// Optical path mismatch: delay each branch by the given (fractional) sample count.
    pub fn with_delays(&self, delays: &[f64]) -> Result<BranchSet> {
        if delays.len() != self.fields.len() {
            return Err(Error::LengthMismatch(delays.len(), self.fields.len()));
        }
        let fields = self.fields.iter().zip(delays).map(|(f, &d)| signal::fractional_delay(f, d)).collect();
        Ok(BranchSet { fields, currents: vec![], ..self.clone() })
    }
}

/// Optical branch fields of a front-end.
pub fn split_branches(sig: &JonesSignal, scheme: Scheme) -> BranchSet {
    let labels = scheme.labels().to_vec();
    let fields = labels
        .iter()
        .map(|l| {
            let (cx, cy) = l.coefficients();
            sig.x.with_samples(sig.x.samples.iter().zip(&sig.y.samples).map(|(&x, &y)| cx * x + cy * y).collect())
        })
        .collect();
    BranchSet { scheme, labels, fields, currents: vec![], sample_rate: sig.sample_rate() }
}

/// Square-law detection with unit responsivity. With `electrical_snr_db`
/// set, white Gaussian noise is added so that the variance of each clean
/// current over the noise variance equals that SNR.
pub fn detect(branches: &BranchSet, electrical_snr_db: Option<f64>, seed: u64) -> Result<BranchSet> {
    if branches.fields.is_empty() {
        return Err(invalid("no optical fields to detect"));
    }
    let currents = branches
        .fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let clean: Vec<f64> = f.samples.iter().map(|v| v.norm_sqr()).collect();
            match electrical_snr_db {
                None => Ok(clean),
                Some(snr) => {
                    let n = clean.len() as f64;
                    let mean = clean.iter().sum::<f64>() / n;
                    let var = clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let sigma = (var / 10f64.powf(snr / 10.0)).sqrt();
                    let mut r = rng::stream(seed, "electrical", i as u64);
                    Ok(clean.into_iter().map(|v| v + sigma * r.sample::<f64, _>(StandardNormal)).collect())
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchSet { currents, ..branches.clone() })
}

fn check3(a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() != c.len() {
        return Err(Error::LengthMismatch(a.len(), c.len()));
    }
    Ok(())
}

/// `|X−Y|² = 2|X|² + 2|Y|² − |X+Y|²`
pub fn reconstruct_missing_2x2(i_x: &[f64], i_y: &[f64], i_sum: &[f64]) -> Result<Vec<f64>> {
    check3(i_x, i_y, i_sum)?;
    Ok(i_x.iter().zip(i_y).zip(i_sum).map(|((x, y), s)| 2.0 * x + 2.0 * y - s).collect())
}

/// `|X−jY|² = |X+Y|² + |X−Y|² − |X+jY|²`
pub fn reconstruct_missing_hybrid(i_sum: &[f64], i_diff: &[f64], i_pjy: &[f64]) -> Result<Vec<f64>> {
    check3(i_sum, i_diff, i_pjy)?;
    Ok(i_sum.iter().zip(i_diff).zip(i_pjy).map(|((s, d), p)| s + d - p).collect())
}

/// The four hybrid-basis currents `(|X+Y|², |X−Y|², |X+jY|², |X−jY|²)`
/// from the three 3×3-coupler currents.
pub fn reconstruct_from_3x3(i1: &[f64], i2: &[f64], i3: &[f64]) -> Result<[Vec<f64>; 4]> {
    check3(i1, i2, i3)?;
    let r3 = 3f64.sqrt();
    let zip = || i1.iter().zip(i2).zip(i3).map(|((a, b), c)| (*a, *b, *c));
    Ok([
        zip().map(|(_, b, _)| 3.0 * b).collect(),
        zip().map(|(a, b, c)| 2.0 * a - b + 2.0 * c).collect(),
        zip().map(|(a, b, c)| (1.0 - r3) * a + b + (1.0 + r3) * c).collect(),
        zip().map(|(a, b, c)| (1.0 + r3) * a + b + (1.0 - r3) * c).collect(),
    ])
}

/// Detectors a scheme uses when only three are fitted.
pub fn three_detector_labels(scheme: Scheme) -> Result<&'static [BranchLabel]> {
    use BranchLabel::*;
    match scheme {
        Scheme::Coupler2x2 => Ok(&[X, Y, XPlusY]),
        Scheme::Hybrid90 => Ok(&[XPlusY, XMinusY, XPlusJY]),
        Scheme::Coupler3x3 => Ok(&[AXBY, BXBY, BXAY]),
        Scheme::PbsBaseline => Err(invalid("the PBS baseline has only two detectors")),
    }
}

/// Front-end output currents for a detection mode. `detected` must hold
/// currents for every optical output of its scheme.
pub fn apply_mode(detected: &BranchSet, mode: DetectionMode) -> Result<BranchSet> {
    use BranchLabel::*;
    let need = |l: BranchLabel| detected.current(l).ok_or_else(|| invalid(format!("missing current {l}")));
    match mode {
        DetectionMode::Direct => Ok(detected.clone()),
        DetectionMode::Reduced => {
            let labels = three_detector_labels(detected.scheme)?;
            let mut out = detected.select(labels)?;
            out.fields.clear();
            Ok(out)
        }
        DetectionMode::Reconstruct => {
            let (labels, currents) = match detected.scheme {
                Scheme::Coupler2x2 => {
                    let (x, y, s) = (need(X)?, need(Y)?, need(XPlusY)?);
                    let d = reconstruct_missing_2x2(x, y, s)?;
                    (vec![X, Y, XPlusY, XMinusY], vec![x.to_vec(), y.to_vec(), s.to_vec(), d])
                }
                Scheme::Hybrid90 => {
                    let (s, d, p) = (need(XPlusY)?, need(XMinusY)?, need(XPlusJY)?);
                    let m = reconstruct_missing_hybrid(s, d, p)?;
                    (vec![XPlusY, XMinusY, XPlusJY, XMinusJY], vec![s.to_vec(), d.to_vec(), p.to_vec(), m])
                }
                Scheme::Coupler3x3 => {
                    let [a, b, c, d] = reconstruct_from_3x3(need(AXBY)?, need(BXBY)?, need(BXAY)?)?;
                    (vec![XPlusY, XMinusY, XPlusJY, XMinusJY], vec![a, b, c, d])
                }
                Scheme::PbsBaseline => return Err(invalid("the PBS baseline has nothing to reconstruct")),
            };
            Ok(BranchSet { scheme: detected.scheme, labels, fields: vec![], currents, sample_rate: detected.sample_rate })
        }
    }
}

/// Split, detect and apply the detection mode in one step.
pub fn receive(
    sig: &JonesSignal,
    scheme: Scheme,
    mode: DetectionMode,
    electrical_snr_db: Option<f64>,
    seed: u64,
) -> Result<BranchSet> {
    apply_mode(&detect(&split_branches(sig, scheme), electrical_snr_db, seed)?, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn pair(x: C64, y: C64) -> JonesSignal {
        JonesSignal::new(
            ComplexSignal::new(vec![x], 1.0).unwrap(),
            ComplexSignal::new(vec![y], 1.0).unwrap(),
        )
        .unwrap()
    }

    fn random_pairs(n: usize, seed: u64) -> JonesSignal {
        let mut r = rng::stream(seed, "test", 0);
        let mut draw = || -> Vec<C64> {
            (0..n).map(|_| C64::new(r.sample(StandardNormal), r.sample(StandardNormal))).collect()
        };
        JonesSignal::new(ComplexSignal::new(draw(), 1.0).unwrap(), ComplexSignal::new(draw(), 1.0).unwrap()).unwrap()
    }

    fn powers(b: &BranchSet) -> Vec<f64> {
        b.fields.iter().map(|f| f.samples[0].norm_sqr()).collect()
    }

    #[test]
    fn coupler_constants_and_unitarity() {
        let (a, b) = coupler_constants();
        assert!((a.norm_sqr() - 1.0 / 3.0).abs() < 1e-12);
        assert!((b.norm_sqr() - 1.0 / 3.0).abs() < 1e-12);
        let m = coupler_3x3_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let dot: C64 = (0..3).map(|k| m[i][k] * m[j][k].conj()).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((dot - C64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn split_examples() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let b = split_branches(&pair(one, zero), Scheme::Coupler2x2);
        let mags: Vec<f64> = b.fields.iter().map(|f| f.samples[0].norm()).collect();
        assert_eq!(mags, vec![1.0, 0.0, 1.0, 1.0]);
        for p in powers(&split_branches(&pair(one, zero), Scheme::Coupler3x3)) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        let h = powers(&split_branches(&pair(one, one), Scheme::Hybrid90));
        for (p, e) in h.iter().zip([4.0, 0.0, 2.0, 2.0]) {
            assert!((p - e).abs() < 1e-12);
        }
        assert_eq!("hybrid_90".parse::<Scheme>().unwrap(), Scheme::Hybrid90);
        assert!("coupler_5x5".parse::<Scheme>().is_err());
    }

    #[test]
    fn detect_cases() {
        let s = JonesSignal::new(
            ComplexSignal::new(vec![C64::new(1.0, 0.0); 16], 1.0).unwrap(),
            ComplexSignal::new(vec![C64::new(0.0, 0.0); 16], 1.0).unwrap(),
        )
        .unwrap();
        let d = detect(&split_branches(&s, Scheme::PbsBaseline), None, 0).unwrap();
        assert!(d.currents[0].iter().all(|&v| v == 1.0));
        let r = random_pairs(256, 1);
        let b = split_branches(&r, Scheme::Hybrid90);
        let d = detect(&b, None, 0).unwrap();
        for (f, c) in b.fields.iter().zip(&d.currents) {
            for (v, i) in f.samples.iter().zip(c) {
                assert_eq!(v.norm_sqr(), *i);
            }
        }
    }

    #[test]
    fn electrical_snr() {
        let r = random_pairs(1 << 16, 2);
        let b = split_branches(&r, Scheme::Coupler2x2);
        let clean = detect(&b, None, 0).unwrap();
        let noisy = detect(&b, Some(20.0), 3).unwrap();
        for (c, n) in clean.currents.iter().zip(&noisy.currents) {
            let len = c.len() as f64;
            let mean = c.iter().sum::<f64>() / len;
            let var_s = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
            let var_n = c.iter().zip(n).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / len;
            let snr = 10.0 * (var_s / var_n).log10();
            assert!((snr - 20.0).abs() < 0.2, "{snr}");
        }
    }

    #[test]
    fn reconstruction_examples() {
        assert_eq!(reconstruct_missing_2x2(&[1.0], &[0.0], &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(reconstruct_missing_2x2(&[1.0], &[1.0], &[4.0]).unwrap(), vec![0.0]);
        assert_eq!(reconstruct_missing_hybrid(&[1.0], &[1.0], &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(reconstruct_missing_hybrid(&[4.0], &[0.0], &[2.0]).unwrap(), vec![2.0]);
        assert!(matches!(reconstruct_missing_2x2(&[1.0], &[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(..))));
        assert!(reconstruct_from_3x3(&[1.0], &[1.0], &[]).is_err());

        let third = 1.0 / 3.0;
        let out = reconstruct_from_3x3(&[third], &[third], &[third]).unwrap();
        for v in &out {
            assert!((v[0] - 1.0).abs() < 1e-12);
        }
        let zero = reconstruct_from_3x3(&[0.0], &[0.0], &[0.0]).unwrap();
        assert!(zero.iter().all(|v| v[0] == 0.0));
        // X = Y = 1: the 3×3 inputs come straight from the coupler fields
        let i = powers(&split_branches(&pair(C64::new(1.0, 0.0), C64::new(1.0, 0.0)), Scheme::Coupler3x3));
        for (v, e) in i.iter().zip([third, 4.0 * third, third]) {
            assert!((v - e).abs() < 1e-12);
        }
        let out = reconstruct_from_3x3(&[i[0]], &[i[1]], &[i[2]]).unwrap();
        for (v, e) in out.iter().zip([4.0, 0.0, 2.0, 2.0]) {
            assert!((v[0] - e).abs() < 1e-12);
        }
    }

    fn direct(r: &JonesSignal, cx: C64, cy: C64) -> Vec<f64> {
        r.x.samples.iter().zip(&r.y.samples).map(|(&x, &y)| (cx * x + cy * y).norm_sqr()).collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identities_on_random_fields() {
        let r = random_pairs(10_000, 4);
        let one = C64::new(1.0, 0.0);
        let j = C64::new(0.0, 1.0);
        let d = detect(&split_branches(&r, Scheme::Coupler2x2), None, 0).unwrap();
        let xm = reconstruct_missing_2x2(&d.currents[0], &d.currents[1], &d.currents[2]).unwrap();
        assert!(max_err(&xm, &direct(&r, one, -one)) < 1e-10);

        let h = detect(&split_branches(&r, Scheme::Hybrid90), None, 0).unwrap();
        let mj = reconstruct_missing_hybrid(&h.currents[0], &h.currents[1], &h.currents[2]).unwrap();
        assert!(max_err(&mj, &direct(&r, one, -j)) < 1e-10);
        // the other form of the same identity
        let alt: Vec<f64> = d.currents[0]
            .iter()
            .zip(&d.currents[1])
            .zip(&h.currents[2])
            .map(|((x, y), p)| 2.0 * (x + y) - p)
            .collect();
        assert!(max_err(&alt, &mj) < 1e-10);

        let c = detect(&split_branches(&r, Scheme::Coupler3x3), None, 0).unwrap();
        let four = reconstruct_from_3x3(&c.currents[0], &c.currents[1], &c.currents[2]).unwrap();
        for (got, (cx, cy)) in four.iter().zip([(one, one), (one, -one), (one, j), (one, -j)]) {
            assert!(max_err(got, &direct(&r, cx, cy)) < 1e-10);
        }
    }

    #[test]
    fn identities_hold_with_dispersive_kernel() {
        let r = random_pairs(512, 5);
        let kernel: Vec<C64> = (0..9).map(|k| C64::from_polar(1.0 / (1.0 + k as f64), 0.3 * (k * k) as f64)).collect();
        let b = split_branches(&r, Scheme::Coupler2x2).filter_fields(&kernel).unwrap();
        let d = detect(&b, None, 0).unwrap();
        let xm = reconstruct_missing_2x2(&d.currents[0], &d.currents[1], &d.currents[2]).unwrap();
        assert!(max_err(&xm, &d.currents[3]) < 1e-9);
    }

    #[test]
    fn modes() {
        let r = random_pairs(128, 6);
        let rec = receive(&r, Scheme::Coupler3x3, DetectionMode::Reconstruct, None, 0).unwrap();
        let hyb = receive(&r, Scheme::Hybrid90, DetectionMode::Direct, None, 0).unwrap();
        assert_eq!(rec.labels, hyb.labels);
        for (a, b) in rec.currents.iter().zip(&hyb.currents) {
            assert!(max_err(a, b) < 1e-10);
        }
        let red = receive(&r, Scheme::Coupler2x2, DetectionMode::Reduced, None, 0).unwrap();
        assert_eq!(red.labels, vec![BranchLabel::X, BranchLabel::Y, BranchLabel::XPlusY]);
        let rec2 = receive(&r, Scheme::Coupler2x2, DetectionMode::Reconstruct, None, 0).unwrap();
        let dir2 = receive(&r, Scheme::Coupler2x2, DetectionMode::Direct, None, 0).unwrap();
        assert!(max_err(&rec2.currents[3], &dir2.currents[3]) < 1e-10);
        assert!(receive(&r, Scheme::PbsBaseline, DetectionMode::Reduced, None, 0).is_err());
    }

    #[test]
    fn branch_delay() {
        let r = random_pairs(64, 7);
        let b = split_branches(&r, Scheme::PbsBaseline);
        let d = b.with_delays(&[2.0, 0.0]).unwrap();
        for i in 0..64 {
            assert!((d.fields[0].samples[(i + 2) % 64] - b.fields[0].samples[i]).norm() < 1e-12);
        }
        assert!(b.with_delays(&[1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn coupler_conserves_power(seed in 0u64..1000) {
            let r = random_pairs(32, seed);
            let c = split_branches(&r, Scheme::Coupler3x3);
            for t in 0..32 {
                let branch: f64 = c.fields.iter().map(|f| f.samples[t].norm_sqr()).sum();
                let input = r.x.samples[t].norm_sqr() + r.y.samples[t].norm_sqr();
                prop_assert!((branch - input).abs() < 1e-10);
            }
        }

        #[test]
        fn split_is_linear(seed in 0u64..1000, ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0) {
            let (a, b) = (C64::new(ar, ai), C64::new(br, 0.5));
            let e1 = random_pairs(16, seed);
            let e2 = random_pairs(16, seed + 1);
            let mix = |u: &ComplexSignal, v: &ComplexSignal| {
                u.with_samples(u.samples.iter().zip(&v.samples).map(|(p, q)| a * p + b * q).collect())
            };
            let m = JonesSignal::new(mix(&e1.x, &e2.x), mix(&e1.y, &e2.y)).unwrap();
            for scheme in Scheme::ALL {
                let s1 = split_branches(&e1, scheme);
                let s2 = split_branches(&e2, scheme);
                let sm = split_branches(&m, scheme);
                for k in 0..sm.len() {
                    for t in 0..16 {
                        let expect = a * s1.fields[k].samples[t] + b * s2.fields[k].samples[t];
                        prop_assert!((sm.fields[k].samples[t] - expect).norm() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn eq9_identity_any_fields(seed in 0u64..1000) {
            let r = random_pairs(64, seed);
            let d = detect(&split_branches(&r, Scheme::Coupler2x2), None, 0).unwrap();
            let xm = reconstruct_missing_2x2(&d.currents[0], &d.currents[1], &d.currents[2]).unwrap();
            prop_assert!(max_err(&xm, &d.currents[3]) < 1e-10);
        }
    }
}
