//! Square Gray-coded QAM.
//!
//! Symbol bits are split in half: the leading half picks the in-phase level,
//! the trailing half the quadrature level. Each half is a Gray code over the
//! axis levels, ordered from the most positive level down, so for QPSK:
//!
//! | bits | point          |
//! |------|----------------|
//! | 00   | ( 1 + j) / √2  |
//! | 01   | ( 1 − j) / √2  |
//! | 11   | (−1 − j) / √2  |
//! | 10   | (−1 + j) / √2  |

use crate::error::{Error, Result};
use crate::signal::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    /// Levels per axis.
    side: usize,
    bits_per_axis: usize,
    /// Unit-average-power scale applied to odd-integer levels.
    scale: f64,
}

fn gray_encode(g: usize) -> usize {
    g ^ (g >> 1)
}

fn gray_decode(mut b: usize) -> usize {
    let mut g = b;
    while b > 0 {
        b >>= 1;
        g ^= b;
    }
    g
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(Error::UnsupportedQam(order));
        }
        let side = (order as f64).sqrt().round() as usize;
        Ok(Self {
            order,
            side,
            bits_per_axis: side.trailing_zeros() as usize,
            scale: (1.5 / (order as f64 - 1.0)).sqrt(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    fn level(&self, axis_bits: usize) -> f64 {
        (self.side as f64 - 1.0) - 2.0 * gray_decode(axis_bits) as f64
    }

    /// Constellation point for symbol index (bits read MSB first).
    pub fn point(&self, index: usize) -> C64 {
        let mask = (1 << self.bits_per_axis) - 1;
        let i = self.level(index >> self.bits_per_axis);
        let q = self.level(index & mask);
        C64::new(i, q) * self.scale
    }

    fn axis_bits(&self, v: f64) -> usize {
        let top = self.side as f64 - 1.0;
        let g = ((top - v / self.scale) / 2.0).round().clamp(0.0, top);
        gray_encode(g as usize)
    }

    /// Nearest-point decision, returned as a symbol index.
    pub fn decide(&self, z: C64) -> usize {
        (self.axis_bits(z.re) << self.bits_per_axis) | self.axis_bits(z.im)
    }

    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let k = self.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(crate::error::invalid(format!(
                "{} bits is not a whole number of {k}-bit symbols",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(k)
            .map(|c| self.point(c.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)))
            .collect())
    }

    /// Hard decisions back to bits.
    pub fn demap(&self, symbols: &[C64]) -> Vec<u8> {
        let k = self.bits_per_symbol();
        let mut out = Vec::with_capacity(symbols.len() * k);
        for &z in symbols {
            let idx = self.decide(z);
            out.extend((0..k).rev().map(|s| ((idx >> s) & 1) as u8));
        }
        out
    }

    /// Snap to the nearest constellation point.
    pub fn slice(&self, z: C64) -> C64 {
        self.point(self.decide(z))
    }
}
