//! Fractionally spaced N×M MIMO FFE trained by recursive least squares.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{ComplexSignal, C64};
use crate::tx::qam::Constellation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MimoMode {
    /// Taps are fixed once the training head has been processed.
    #[default]
    TrainThenFreeze,
    /// Keep adapting on hard decisions after training.
    TrainThenDd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MimoSpec {
    /// Expected number of input branches.
    pub n_inputs: usize,
    /// Taps per input at 2 samples/symbol (odd).
    pub taps: usize,
    pub train_len: usize,
    pub rls_lambda: f64,
    /// Inverse-correlation matrix starts at `I/delta`.
    pub delta: f64,
    pub mode: MimoMode,
}

impl Default for MimoSpec {
    fn default() -> Self {
        Self { n_inputs: 4, taps: 51, train_len: 512, rls_lambda: 0.999, delta: 0.01, mode: MimoMode::TrainThenFreeze }
    }
}

impl MimoSpec {
    pub fn validate(&self) -> Result<()> {
        if self.taps.is_multiple_of(2) {
            return Err(invalid(format!("MIMO taps must be odd, got {}", self.taps)));
        }
        if !(self.rls_lambda > 0.0 && self.rls_lambda <= 1.0) {
            return Err(invalid(format!("rls_lambda {} outside (0, 1]", self.rls_lambda)));
        }
        if !(1..=4).contains(&self.n_inputs) {
            return Err(invalid(format!("n_inputs must be 1..=4, got {}", self.n_inputs)));
        }
        if !(self.delta > 0.0) {
            return Err(invalid("delta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimoOutput {
    /// One symbol stream per reference, 1 sample/symbol.
    pub outputs: Vec<Vec<C64>>,
    pub converged: bool,
    /// Mean a-priori training error power over the first and last 100 symbols.
    pub mse_first: f64,
    pub mse_last: f64,
}

struct Rls {
    len: usize,
    lambda: f64,
    /// Hermitian inverse correlation matrix, row-major.
    p: Vec<C64>,
    /// Tap vectors per output.
    w: Vec<Vec<C64>>,
    pi: Vec<C64>,
    gain: Vec<C64>,
}

impl Rls {
    fn new(len: usize, outputs: usize, lambda: f64, delta: f64) -> Self {
        let mut p = vec![C64::new(0.0, 0.0); len * len];
        for i in 0..len {
            p[i * len + i] = C64::new(1.0 / delta, 0.0);
        }
        Self {
            len,
            lambda,
            p,
            w: vec![vec![C64::new(0.0, 0.0); len]; outputs],
            pi: vec![C64::new(0.0, 0.0); len],
            gain: vec![C64::new(0.0, 0.0); len],
        }
    }

    fn output(&self, o: usize, u: &[C64]) -> C64 {
        self.w[o].iter().zip(u).map(|(w, x)| w.conj() * x).sum()
    }

    /// One update; `desired[o]` per output, returns the a-priori errors.
    fn update(&mut self, u: &[C64], desired: &[C64], errors: &mut [C64]) {
        let n = self.len;
        for i in 0..n {
            let row = &self.p[i * n..(i + 1) * n];
            self.pi[i] = row.iter().zip(u).map(|(a, b)| a * b).sum();
        }
        let denom: C64 = u.iter().zip(&self.pi).map(|(a, b)| a.conj() * b).sum::<C64>() + self.lambda;
        for i in 0..n {
            self.gain[i] = self.pi[i] / denom;
        }
        for (o, &d) in desired.iter().enumerate() {
            let e = d - self.output(o, u);
            errors[o] = e;
            for (w, k) in self.w[o].iter_mut().zip(&self.gain) {
                *w += k * e.conj();
            }
        }
        let inv = 1.0 / self.lambda;
        for i in 0..n {
            let k = self.gain[i];
            for j in 0..n {
                let v = &mut self.p[i * n + j];
                *v = (*v - k * self.pi[j].conj()) * inv;
            }
        }
    }
}

fn regressor(inputs: &[ComplexSignal], taps: usize, k: usize, u: &mut [C64]) {
    let half = (taps / 2) as isize;
    for (i, s) in inputs.iter().enumerate() {
        let n = s.len() as isize;
        for t in 0..taps {
            let idx = (2 * k as isize + t as isize - half).rem_euclid(n) as usize;
            u[i * taps + t] = s.samples[idx];
        }
    }
}

/// Equalize 2-sample/symbol inputs whose symbol `k` sits at sample `2k`.
/// `training[o]` holds the known head of output `o`.
pub fn mimo_equalize(
    inputs: &[ComplexSignal],
    training: &[Vec<C64>],
    spec: &MimoSpec,
    constellation: &Constellation,
) -> Result<MimoOutput> {
    spec.validate()?;
    if inputs.len() != spec.n_inputs {
        return Err(Error::LengthMismatch(inputs.len(), spec.n_inputs));
    }
    if training.is_empty() {
        return Err(invalid("need at least one training reference"));
    }
    let n = inputs[0].len();
    if n < 2 || inputs.iter().any(|s| s.len() != n) {
        return Err(invalid("MIMO inputs must share one even length"));
    }
    let symbols = n / 2;
    let train_len = spec.train_len.min(symbols);
    if training.iter().any(|t| t.len() < train_len) {
        return Err(invalid("training reference shorter than train_len"));
    }
    let outputs_n = training.len();
    let len = inputs.len() * spec.taps;
    let mut rls = Rls::new(len, outputs_n, spec.rls_lambda, spec.delta);
    let mut u = vec![C64::new(0.0, 0.0); len];
    let mut err = vec![C64::new(0.0, 0.0); outputs_n];
    let mut desired = vec![C64::new(0.0, 0.0); outputs_n];
    let mut mse = Vec::with_capacity(train_len);

    for k in 0..train_len {
        regressor(inputs, spec.taps, k, &mut u);
        for (d, t) in desired.iter_mut().zip(training) {
            *d = t[k];
        }
        rls.update(&u, &desired, &mut err);
        mse.push(err.iter().map(|e| e.norm_sqr()).sum::<f64>() / outputs_n as f64);
    }

    let window = 100.min(mse.len());
    let mean = |s: &[f64]| if s.is_empty() { f64::NAN } else { s.iter().sum::<f64>() / s.len() as f64 };
    let mse_first = mean(&mse[..window]);
    let mse_last = mean(&mse[mse.len() - window..]);
    let converged = mse_last.is_finite() && mse_last <= mse_first && mse_last < 1.0;

    let mut outputs = vec![vec![C64::new(0.0, 0.0); symbols]; outputs_n];
    for k in 0..symbols {
        regressor(inputs, spec.taps, k, &mut u);
        for (o, out) in outputs.iter_mut().enumerate() {
            out[k] = rls.output(o, &u);
        }
        if spec.mode == MimoMode::TrainThenDd && k >= train_len {
            for (d, out) in desired.iter_mut().zip(&outputs) {
                *d = constellation.slice(out[k]);
            }
            rls.update(&u, &desired, &mut err);
        }
    }
    Ok(MimoOutput { outputs, converged, mse_first, mse_last })
}
