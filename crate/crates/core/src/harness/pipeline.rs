//! One end-to-end trial: transmitter, link, front-end, field recovery, DSP.

use crate::channel;
use crate::dsp::{self, Metrics, MimoSpec};
use crate::error::{Error, Result};
use crate::frontend::{self, BranchLabel, Scheme};
use crate::harness::config::{ExperimentConfig, Polarization};
use crate::recovery::{self, CsprProfile};
use crate::rng::{self, derive_seed};
use crate::signal::{self, ComplexSignal, JonesSignal, C64};
use crate::tx::{self, qam::Constellation, Frame};
use rand::Rng;

/// Intermediate results a caller may want besides the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub labels: Vec<BranchLabel>,
    /// Estimated CSPR of every detected branch, dB.
    pub branch_cspr_db: Vec<f64>,
    pub selected: Vec<BranchLabel>,
    pub freq_offset: f64,
    pub sync_offset: usize,
}

/// Run the trial at one sweep point. Receiver failures (no sync, no carrier)
/// come back as flagged metrics; only configuration errors are returned.
pub fn run_trial(cfg: &ExperimentConfig, point: &[f64], seed: u64) -> Result<Metrics> {
    let cfg = cfg.at_point(point)?;
    cfg.validate()?;
    let mut trace = None;
    match simulate(&cfg, seed, &mut trace) {
        Ok(m) => Ok(m),
        Err(Error::SyncFailure(_) | Error::AmbiguousPeak(_) | Error::ZeroCurrent) => {
            Ok(Metrics::failed(trace.map(|t| t.branch_cspr_db).unwrap_or_default()))
        }
        Err(e) => Err(e),
    }
}

/// Transmit waveform before any channel effect, at the generation rate.
fn transmit(cfg: &ExperimentConfig, frame: &Frame, carrier_freq: f64, seed: u64) -> Result<JonesSignal> {
    let rrc = &cfg.rrc;
    let link = &cfg.link;
    let baud = cfg.frame.baud;
    let laser_seed = derive_seed(seed, "laser", 0);
    match cfg.receiver.polarization {
        Polarization::Dual => {
            let sig = tx::modulate(&frame.symbols, &cfg.frame, rrc)?;
            let sig = channel::laser_mismatch(&sig, link.freq_offset, link.linewidth, laser_seed)?;
            tx::insert_carrier(&sig, &cfg.carrier, carrier_freq)
        }
        Polarization::Single => {
            let x = tx::shape(&frame.symbols[0], baud, rrc)?;
            let y = ComplexSignal::zeros(x.len(), x.sample_rate)?;
            let sig = channel::laser_mismatch(&JonesSignal::new(x, y)?, link.freq_offset, link.linewidth, laser_seed)?;
            let x = tx::insert_carrier_single(&sig.x, cfg.carrier.cspr_db, carrier_freq)?;
            JonesSignal::new(x, sig.y)
        }
    }
}

fn propagate(cfg: &ExperimentConfig, sig: JonesSignal, seed: u64) -> Result<JonesSignal> {
    let link = cfg.link;
    let mut sig = sig;
    let pmd_on = match link.dgd {
        Some(d) => d > 0.0,
        None => link.fiber_km > 0.0 && link.pmd_param > 0.0,
    };
    if pmd_on {
        let l = channel::LinkSpec { seed: derive_seed(seed, "pmd", 0), ..link };
        sig = channel::apply_pmd(&sig, &l)?;
    }
    if link.fiber_km > 0.0 {
        sig = channel::apply_cd(&sig, link.fiber_km, link.beta2)?;
    }
    if cfg.receiver.polarization == Polarization::Dual {
        sig = channel::apply_rotation(&sig, &cfg.receiver.sop)?;
    }
    // unknown capture instant, whole samples at 2 samples/symbol
    let step = (cfg.rrc.sps / 2).max(1);
    let slots = sig.len() / step;
    let delay = (rng::stream(seed, "capture", 0).random_range(0..slots) * step) as isize;
    sig = sig.map(|s| Ok(s.rotate(-delay)))?;
    sig = channel::load_ase(&sig, link.osnr_db, derive_seed(seed, "ase", 0))?;
    Ok(sig)
}

fn remove_bin(field: &ComplexSignal, freq: f64) -> ComplexSignal {
    let mut spec = field.spectrum();
    let k = signal::frequency_bin(freq, field.len(), field.sample_rate);
    spec[k] = C64::new(0.0, 0.0);
    signal::ifft(&mut spec);
    field.with_samples(spec)
}

fn normalize(s: &ComplexSignal) -> ComplexSignal {
    let p = signal::mean_power(&s.samples).unwrap_or(0.0);
    let k = if p > 0.0 { 1.0 / p.sqrt() } else { 1.0 };
    s.with_samples(s.samples.iter().map(|v| v * k).collect())
}

/// Full chain on an already-resolved configuration. `trace` is filled as
/// soon as the branch CSPRs are known, so failures can still report them.
pub fn simulate(cfg: &ExperimentConfig, seed: u64, trace: &mut Option<TrialTrace>) -> Result<Metrics> {
    let baud = cfg.frame.baud;
    let sps = cfg.rrc.sps;
    let rate = baud * sps as f64;
    let frame = tx::generate_frame(&cfg.frame, derive_seed(seed, "frame", 0))?;
    let n = frame.spec.total_len() * sps;
    let carrier_freq = tx::snap_to_bin(cfg.carrier.resolve_offset(baud, cfg.rrc.rolloff), n, rate);
    let dual = cfg.receiver.polarization == Polarization::Dual;
    let npol = if dual { 2 } else { 1 };

    let sig = transmit(cfg, &frame, carrier_freq, seed)?;
    let sig = propagate(cfg, sig, seed)?;
    let margin = cfg.receiver.obpf_margin * baud;
    let sig = channel::optical_bandpass(&sig, carrier_freq - margin, baud * (1.0 + cfg.rrc.rolloff) / 2.0 + margin)?;

    let detect_seed = derive_seed(seed, "detect", 0);
    let branches = if dual {
        frontend::receive(&sig, cfg.receiver.scheme, cfg.receiver.mode, cfg.receiver.electrical_snr_db, detect_seed)?
    } else {
        let b = frontend::split_branches(&sig, Scheme::PbsBaseline);
        frontend::detect(&b, cfg.receiver.electrical_snr_db, detect_seed)?.select(&[BranchLabel::X])?
    };
    let branch_cspr_db = branches
        .currents
        .iter()
        .map(|c| recovery::estimate_cspr_current(c))
        .collect::<Result<Vec<f64>>>()?;
    let profile = CsprProfile::measured(branches.scheme, branches.labels.clone(), &branch_cspr_db, cfg.gr.c_req_db)?;
    let selected = if dual { recovery::select_branches(&profile, cfg.receiver.selection) } else { vec![BranchLabel::X] };
    *trace = Some(TrialTrace {
        labels: branches.labels.clone(),
        branch_cspr_db: branch_cspr_db.clone(),
        selected: selected.clone(),
        freq_offset: 0.0,
        sync_offset: 0,
    });

    let rrc2 = cfg.rrc.with_sps(2);
    let mut fields = Vec::with_capacity(selected.len());
    let mut strength = Vec::with_capacity(selected.len());
    for label in &selected {
        let i = branches.index_of(*label).expect("selected labels come from the branch set");
        let f = recovery::kkr_recover(&branches.currents[i], &cfg.gr, carrier_freq, rate, baud)?;
        fields.push(signal::resample(&remove_bin(&f, carrier_freq), 2.0 * baud)?);
        strength.push(branch_cspr_db[i]);
    }

    // branches near or above the required CSPR recovered cleanly
    let top = strength.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = (cfg.gr.c_req_db - 1.0).min(top);
    // the fourth-power tone fades under dispersion; a shift commutes with
    // the dispersion filter up to a delay, so estimate on compensated copies
    let probes: Vec<ComplexSignal> = fields
        .iter()
        .zip(&strength)
        .filter(|(_, &s)| s >= floor)
        .map(|(f, _)| if cfg.link.fiber_km > 0.0 { dsp::cd_compensate(f, cfg.link.fiber_km, cfg.link.beta2) } else { f.clone() })
        .collect();
    let freq_offset = dsp::estimate_freq_offset_joint(&probes);
    let mut aligned = Vec::with_capacity(fields.len());
    for f in &fields {
        let mut f = signal::frequency_shift(f, freq_offset)?;
        if cfg.link.fiber_km > 0.0 {
            f = dsp::cd_compensate(&f, cfg.link.fiber_km, cfg.link.beta2);
        }
        // a branch whose recovery failed can carry far more power than the rest
        aligned.push(normalize(&signal::rrc_filter_periodic(&f, &rrc2)?));
    }

    let templates = (0..npol)
        .map(|p| {
            let mut head = frame.training(p).to_vec();
            head.resize(frame.spec.total_len(), C64::new(0.0, 0.0));
            signal::rrc_filter_periodic(&tx::shape(&head, baud, &rrc2)?, &rrc2)
        })
        .collect::<Result<Vec<_>>>()?;
    let sync = dsp::synchronize_joint(&aligned, &templates, dsp::sync::DEFAULT_GUARD)?;
    if let Some(t) = trace.as_mut() {
        t.freq_offset = freq_offset;
        t.sync_offset = sync.offset;
    }
    let inputs: Vec<ComplexSignal> = aligned.iter().map(|f| f.rotate(sync.offset as isize)).collect();

    let constellation = Constellation::new(cfg.frame.qam_order)?;
    let training: Vec<Vec<C64>> = (0..npol).map(|p| frame.training(p).to_vec()).collect();
    let mimo = MimoSpec { n_inputs: inputs.len(), ..cfg.mimo };
    let eq = dsp::mimo_equalize(&inputs, &training, &mimo, &constellation)?;

    let (mut rx_bits, mut tx_bits, mut rx_syms, mut tx_syms) = (vec![], vec![], vec![], vec![]);
    for (p, stream) in eq.outputs.iter().enumerate() {
        let known = dsp::frame_reference(&frame.symbols[p], frame.spec.train_len, &frame.pilot_positions);
        let corrected = dsp::carrier_phase_estimate(stream, &known, &constellation, &cfg.cpe)?;
        let data: Vec<C64> = frame.data_positions.iter().map(|&k| corrected[k]).collect();
        rx_bits.extend(constellation.demap(&data));
        tx_bits.extend_from_slice(&frame.bits[p]);
        tx_syms.extend(frame.data_positions.iter().map(|&k| frame.symbols[p][k]));
        rx_syms.extend(data);
    }
    let mut m = dsp::compute_metrics(&rx_bits, &tx_bits, &rx_syms, &tx_syms)?;
    m.converged = eq.converged;
    m.per_branch_cspr = branch_cspr_db;
    Ok(m)
}
