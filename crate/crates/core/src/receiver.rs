//! Frame sync and bi-orthogonal symbol decisions.
//!
//! A frame is the sync code, its complement, then one codeword per payload
//! symbol. The receiver slides the modulated `2N`-chip sync reference over
//! a search window, refines that lock against the energy of the whole
//! frame, removes the carrier error, turns each chip interval into a real
//! estimate and runs the correlator bank over each `N`-chip symbol.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Interferer, InterfererKind};
use crate::codebook::{ChipSequence, Codebook, CodebookError};
use crate::waveform::{modulate, BasebandSignal, Modulation, ModulationScheme, WaveformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceiverError {
    #[error("frame payload is empty")]
    EmptyPayload,
    #[error("codebook has no sync code")]
    NoSyncCode,
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error("sync search window is empty")]
    EmptyWindow,
    #[error("sync not detected (peak {peak:.3}, threshold {threshold:.3})")]
    SyncNotDetected { peak: f64, threshold: f64 },
    #[error("expected {expected} chip estimates, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("signal ends before symbol {0} of the payload")]
    Truncated(usize),
    #[error("despreading probe needs a tone interferer")]
    NotATone,
    #[error("despreading probe needs at least one code and one trial")]
    EmptyProbe,
}

/// Default sync detection threshold as a fraction of the ideal `2N` peak.
pub const DEFAULT_SYNC_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChipMode {
    /// Real-valued chip estimates into the correlators.
    Soft,
    /// Chip estimates quantized to `±1` first.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarrierRecovery {
    /// Fit phase and frequency across the sync segment.
    SyncAided,
    /// For BPSK, a line fit through the squared correlations of
    /// non-coherently decided payload symbols. Holds coherence over long
    /// payloads, where a frequency fitted on the sync alone drifts. CPFSK
    /// chip estimates are differential, so it keeps the sync-aided estimate.
    FrameAided,
    /// Assume zero phase and zero frequency error.
    Known,
}


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    /// Fraction `θ` of the ideal sync peak required for detection.
    pub threshold: f64,
    /// Number of candidate sample offsets, starting at 0.
    pub search_window: usize,
    /// Payload symbols per frame; `None` takes every whole symbol that fits.
    pub payload_symbols: Option<usize>,
    pub chip_mode: ChipMode,
    pub carrier: CarrierRecovery,
}

impl ReceiverConfig {
    pub fn new(search_window: usize) -> Self {
        ReceiverConfig {
            threshold: DEFAULT_SYNC_THRESHOLD,
            search_window,
            payload_symbols: None,
            chip_mode: ChipMode::Soft,
            carrier: CarrierRecovery::FrameAided,
        }
    }

    pub fn with_payload_symbols(mut self, n: usize) -> Self {
        self.payload_symbols = Some(n);
        self
    }

    pub fn with_carrier(mut self, carrier: CarrierRecovery) -> Self {
        self.carrier = carrier;
        self
    }

    pub fn with_chip_mode(mut self, mode: ChipMode) -> Self {
        self.chip_mode = mode;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub sample_offset: usize,
    /// Chip-domain peak, `2N` on a clean frame.
    pub peak_metric: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub word: u32,
    pub code_index: usize,
    pub complement: bool,
    /// Signed correlation of the chosen code.
    pub metric: f64,
}

/// Sync code followed by its complement.
pub fn sync_pattern(cb: &Codebook) -> Result<Vec<i8>, ReceiverError> {
    let sync = cb.sync_code().ok_or(ReceiverError::NoSyncCode)?;
    Ok(sync
        .chips()
        .iter()
        .chain(sync.negated().chips())
        .copied()
        .collect())
}

/// Chips of a whole frame: sync pattern then one codeword per word.
pub fn frame_chips(cb: &Codebook, payload_words: &[u32]) -> Result<Vec<i8>, ReceiverError> {
    if payload_words.is_empty() {
        return Err(ReceiverError::EmptyPayload);
    }
    let mut chips = sync_pattern(cb)?;
    chips.reserve(payload_words.len() * cb.order());
    for &w in payload_words {
        chips.extend_from_slice(cb.encode_bits(w)?.chips());
    }
    Ok(chips)
}

pub fn build_frame(
    cb: &Codebook,
    payload_words: &[u32],
    scheme: &ModulationScheme,
) -> Result<BasebandSignal, ReceiverError> {
    Ok(modulate(&frame_chips(cb, payload_words)?, scheme)?)
}

/// Correlation of chip estimates against every data code.
pub fn correlate(estimates: &[f64], cb: &Codebook) -> Result<Vec<f64>, ReceiverError> {
    if estimates.len() != cb.order() {
        return Err(ReceiverError::LengthMismatch {
            expected: cb.order(),
            got: estimates.len(),
        });
    }
    Ok(cb
        .data_codes()
        .iter()
        .map(|code| {
            code.chips()
                .iter()
                .zip(estimates)
                .map(|(&c, &e)| c as f64 * e)
                .sum()
        })
        .collect())
}

/// Picks the code with the largest `|correlation|` (lowest index on ties);
/// a negative correlation selects the complement.
pub fn decide(metrics: &[f64], cb: &Codebook) -> Decision {
    let mut best = 0;
    for (i, m) in metrics.iter().enumerate().skip(1) {
        if m.abs() > metrics[best].abs() {
            best = i;
        }
    }
    let metric = metrics[best];
    let complement = metric < 0.0;
    Decision {
        word: cb.word_for(best, complement),
        code_index: best,
        complement,
        metric,
    }
}

pub fn demodulate_symbol(estimates: &[f64], cb: &Codebook) -> Result<Decision, ReceiverError> {
    Ok(decide(&correlate(estimates, cb)?, cb))
}

/// Everything recovered from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDemod {
    pub sync: SyncResult,
    pub decisions: Vec<Decision>,
    /// Correlator outputs per symbol, one entry per data code.
    pub metrics: Vec<Vec<f64>>,
    /// Complex variance of an amplitude-normalized chip estimate.
    pub noise_variance: f64,
    /// Carrier frequency error, Hz.
    pub carrier_offset_hz: f64,
}

impl FrameDemod {
    pub fn words(&self) -> Vec<u32> {
        self.decisions.iter().map(|d| d.word).collect()
    }
}

/// Line `phase(t) = base + slope·t` through complex points, with
/// `|slope| ≤ max_slope`: the slope maximizing `|Σ z·e^{-i·slope·t}|`
/// (coarse grid, then golden-section refinement), and the phase of that sum.
fn fit_phase_line(times: &[f64], points: &[Complex64], max_slope: f64) -> (f64, f64) {
    let response = |w: f64| -> Complex64 {
        points
            .iter()
            .zip(times)
            .map(|(z, &t)| z * Complex64::from_polar(1.0, -w * t))
            .sum()
    };
    let span = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - times.iter().cloned().fold(f64::INFINITY, f64::min);
    // Four grid points per main-lobe width keeps the peak inside one cell.
    let cell = if span > 0.0 { PI / (2.0 * span) } else { max_slope };
    let steps = (max_slope / cell).ceil().max(1.0) as i64;
    let (mut best, mut best_mag) = (0.0, response(0.0).norm());
    for k in -steps..=steps {
        let w = k as f64 * max_slope / steps as f64;
        let mag = response(w).norm();
        if mag > best_mag {
            best = w;
            best_mag = mag;
        }
    }
    let step = max_slope / steps as f64;
    let (mut lo, mut hi) = (best - step, best + step);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..40 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if response(a).norm() > response(b).norm() {
            hi = b;
        } else {
            lo = a;
        }
    }
    let slope = 0.5 * (lo + hi);
    (response(slope).arg(), slope)
}

/// Correlator bank and sync reference for one codebook and modulation.
#[derive(Debug, Clone)]
pub struct Receiver {
    codebook: Codebook,
    scheme: ModulationScheme,
    config: ReceiverConfig,
    sync_chips: Vec<i8>,
    sync_reference: Vec<Complex64>,
    /// Modulated symbol waveforms used for timing refinement. BPSK keeps one
    /// per data code, since a complement only flips the sign.
    symbol_references: Vec<Vec<Complex64>>,
}

impl Receiver {
    pub fn new(
        codebook: Codebook,
        scheme: ModulationScheme,
        config: ReceiverConfig,
    ) -> Result<Self, ReceiverError> {
        scheme.validate()?;
        let sync_chips = sync_pattern(&codebook)?;
        let sync_reference = modulate(&sync_chips, &scheme)?.samples;
        let words = match scheme.kind {
            Modulation::Bpsk => codebook.data_codes().len() as u32,
            Modulation::Cpfsk { .. } => 1 << codebook.bits_per_symbol(),
        };
        let symbol_references = (0..words)
            .map(|w| Ok(modulate(codebook.encode_bits(w)?.chips(), &scheme)?.samples))
            .collect::<Result<_, ReceiverError>>()?;
        Ok(Receiver {
            codebook,
            scheme,
            config,
            sync_chips,
            sync_reference,
            symbol_references,
        })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.config
    }

    fn sps(&self) -> usize {
        self.scheme.samples_per_chip
    }

    /// Per-chip correlation of the received samples against the sync
    /// reference, starting at `offset`.
    fn sync_blocks(&self, samples: &[Complex64], offset: usize) -> Vec<Complex64> {
        let sps = self.sps();
        let seg = &samples[offset..offset + self.sync_reference.len()];
        seg.chunks(sps)
            .zip(self.sync_reference.chunks(sps))
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| a * b.conj()).sum())
            .collect()
    }

    /// Normalized chip-domain correlation `|Σ b_j|·√(2N) / √(Σ |b_j|²)`.
    /// Equals `2N` exactly when every chip block has the same value, and
    /// drops when blocks disagree in phase or in magnitude.
    fn sync_metric(blocks: &[Complex64]) -> f64 {
        let energy: f64 = blocks.iter().map(|b| b.norm_sqr()).sum();
        if energy == 0.0 {
            return 0.0;
        }
        let sum: Complex64 = blocks.iter().sum();
        sum.norm() * (blocks.len() as f64 / energy).sqrt()
    }

    /// Best sync offset in the search window, whether or not it clears the
    /// detection threshold.
    pub fn acquire_sync(&self, signal: &BasebandSignal) -> Result<SyncResult, ReceiverError> {
        let span = self.sync_reference.len();
        let last = signal.len().checked_sub(span).map(|l| l + 1).unwrap_or(0);
        let candidates = self.config.search_window.min(last);
        if candidates == 0 {
            return Err(ReceiverError::EmptyWindow);
        }
        let mut best = SyncResult {
            sample_offset: 0,
            peak_metric: -1.0,
            detected: false,
        };
        for offset in 0..candidates {
            let m = Self::sync_metric(&self.sync_blocks(&signal.samples, offset));
            if m > best.peak_metric {
                best.sample_offset = offset;
                best.peak_metric = m;
            }
        }
        best.detected = best.peak_metric > self.config.threshold * self.sync_chips.len() as f64;
        Ok(best)
    }

    /// Carrier phase at `offset` and per-sample frequency, from the sync
    /// blocks: a coarse frequency from averaged block-to-block phase steps,
    /// then a least-squares line through the residual block phases.
    fn estimate_carrier(&self, blocks: &[Complex64]) -> (f64, f64) {
        let sps = self.sps() as f64;
        let centre = |j: usize| j as f64 * sps + (sps - 1.0) / 2.0;

        let step: Complex64 = blocks.windows(2).map(|w| w[1] * w[0].conj()).sum();
        let coarse = if step.norm() > 0.0 { step.arg() / sps } else { 0.0 };

        let derot: Vec<Complex64> = blocks
            .iter()
            .enumerate()
            .map(|(j, b)| b * Complex64::from_polar(1.0, -coarse * centre(j)))
            .collect();
        let mean: Complex64 = derot.iter().sum();
        let base = mean.arg();
        let n = derot.len() as f64;
        let xs: Vec<f64> = (0..derot.len()).map(centre).collect();
        let ys: Vec<f64> = derot
            .iter()
            .map(|b| (b * Complex64::from_polar(1.0, -base)).arg())
            .collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = my - slope * mx;
        (base + intercept, coarse + slope)
    }

    /// Rotates complex BPSK chip values (sync then payload) by a linear
    /// phase fitted across the whole frame and returns the fitted frequency
    /// in radians per chip. Squaring each symbol's best correlation removes
    /// the data sign; the known sync pattern then picks between the two
    /// square roots. A second fit on coherent decisions removes the residue.
    fn refine_phase(&self, chips: &mut [Complex64]) -> f64 {
        let n = self.codebook.order();
        let sync_len = self.sync_chips.len();
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (s, half) in self.sync_chips.chunks(n).enumerate() {
            let z: Complex64 = chips[s * n..(s + 1) * n]
                .iter()
                .zip(half)
                .map(|(c, &r)| c * r as f64)
                .sum();
            times.push((s * n) as f64 + (n as f64 - 1.0) / 2.0);
            points.push(z * z);
        }
        for (s, sym) in chips[sync_len..].chunks(n).enumerate() {
            let best = self
                .codebook
                .data_codes()
                .iter()
                .map(|code| {
                    sym.iter()
                        .zip(code.chips())
                        .map(|(c, &r)| c * r as f64)
                        .sum::<Complex64>()
                })
                .fold(Complex64::new(0.0, 0.0), |a, b| if b.norm_sqr() > a.norm_sqr() { b } else { a });
            times.push((sync_len + s * n) as f64 + (n as f64 - 1.0) / 2.0);
            points.push(best * best);
        }
        // Squared points advance 2·ω per chip; neighbours must not alias.
        let (base, slope) = fit_phase_line(&times, &points, PI / n as f64);
        let half_phase = |t: f64| 0.5 * (base + slope * t);

        let check: Complex64 = chips[..sync_len]
            .iter()
            .zip(&self.sync_chips)
            .enumerate()
            .map(|(i, (c, &r))| c * r as f64 * Complex64::from_polar(1.0, -half_phase(i as f64)))
            .sum();
        let flip = if check.re < 0.0 { PI } else { 0.0 };
        for (i, c) in chips.iter_mut().enumerate() {
            *c *= Complex64::from_polar(1.0, -(half_phase(i as f64) + flip));
        }

        // Second pass on unsquared correlations of coherent decisions.
        let mut points = Vec::with_capacity(times.len());
        for (s, half) in self.sync_chips.chunks(n).enumerate() {
            points.push(
                chips[s * n..(s + 1) * n]
                    .iter()
                    .zip(half)
                    .map(|(c, &r)| c * r as f64)
                    .sum::<Complex64>(),
            );
        }
        for sym in chips[sync_len..].chunks(n) {
            let real: Vec<f64> = sym.iter().map(|c| c.re).collect();
            let Ok(reference) = correlate(&real, &self.codebook)
                .map(|m| decide(&m, &self.codebook))
                .and_then(|d| Ok(self.codebook.encode_bits(d.word)?))
            else {
                return 0.5 * slope;
            };
            points.push(
                sym.iter()
                    .zip(reference.chips())
                    .map(|(c, &r)| c * r as f64)
                    .sum::<Complex64>(),
            );
        }
        let (base, residual) = fit_phase_line(&times, &points, PI / (4.0 * n as f64));
        for (i, c) in chips.iter_mut().enumerate() {
            *c *= Complex64::from_polar(1.0, -(base + residual * i as f64));
        }
        0.5 * slope + residual
    }

    /// Payload symbols to demodulate for a sync at `offset`.
    fn payload_len(&self, signal_len: usize, offset: usize) -> Result<usize, ReceiverError> {
        let sync_len = self.sync_reference.len();
        if offset + sync_len > signal_len {
            return Err(ReceiverError::Truncated(0));
        }
        let available = (signal_len - offset - sync_len) / (self.codebook.order() * self.sps());
        let symbols = match self.config.payload_symbols {
            Some(s) if s > available => return Err(ReceiverError::Truncated(available)),
            Some(s) => s,
            None => available,
        };
        if symbols == 0 {
            return Err(ReceiverError::Truncated(0));
        }
        Ok(symbols)
    }

    /// Non-coherent matched-filter energy of a whole frame starting at
    /// `offset`: the sync term plus, per payload symbol, the best word.
    fn frame_energy(&self, samples: &[Complex64], offset: usize, symbols: usize) -> f64 {
        let energy = |seg: &[Complex64], reference: &[Complex64]| {
            seg.iter()
                .zip(reference)
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                .norm_sqr()
        };
        let sync_len = self.sync_reference.len();
        let symbol_len = self.codebook.order() * self.sps();
        let payload = &samples[offset + sync_len..offset + sync_len + symbols * symbol_len];
        energy(&samples[offset..offset + sync_len], &self.sync_reference)
            + payload
                .chunks(symbol_len)
                .map(|seg| {
                    self.symbol_references
                        .iter()
                        .map(|r| energy(seg, r))
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
    }

    /// Moves the sync offset to the frame-energy maximum within one symbol
    /// of the acquired peak, staying inside the search window.
    ///
    /// The normalized sync metric alone often peaks a sample early or late
    /// at moderate SNR, and sometimes a whole symbol off; every payload
    /// symbol votes here, and the sync term ties the choice to the frame
    /// start.
    pub fn refine_timing(
        &self,
        signal: &BasebandSignal,
        sync: SyncResult,
    ) -> Result<SyncResult, ReceiverError> {
        let symbols = self.payload_len(signal.len(), sync.sample_offset)?;
        let reach = self.codebook.order() * self.sps() - 1;
        let lo = sync.sample_offset.saturating_sub(reach);
        let hi = (sync.sample_offset + reach).min(self.config.search_window.max(1) - 1);
        let mut best = (sync.sample_offset, f64::NEG_INFINITY);
        for offset in lo..=hi.max(sync.sample_offset) {
            if !matches!(self.payload_len(signal.len(), offset), Ok(s) if s >= symbols) {
                continue;
            }
            let e = self.frame_energy(&signal.samples, offset, symbols);
            if e > best.1 {
                best = (offset, e);
            }
        }
        Ok(SyncResult {
            sample_offset: best.0,
            ..sync
        })
    }

    /// Demodulates the payload of a frame whose sync starts at `sync.sample_offset`.
    pub fn demodulate_at(
        &self,
        signal: &BasebandSignal,
        sync: SyncResult,
    ) -> Result<FrameDemod, ReceiverError> {
        let sps = self.sps();
        let n = self.codebook.order();
        let offset = sync.sample_offset;
        let sync_len = self.sync_reference.len();
        let symbol_len = n * sps;
        let symbols = self.payload_len(signal.len(), offset)?;

        let blocks = self.sync_blocks(&signal.samples, offset);
        let (phase, mut freq) = match self.config.carrier {
            CarrierRecovery::SyncAided => self.estimate_carrier(&blocks),
            // For BPSK the sync-only frequency adds more drift than it
            // removes; the frame-wide fit below starts from zero instead.
            CarrierRecovery::FrameAided => match self.scheme.kind {
                Modulation::Bpsk => (0.0, 0.0),
                Modulation::Cpfsk { .. } => self.estimate_carrier(&blocks),
            },
            CarrierRecovery::Known => (0.0, 0.0),
        };
        let end = offset + sync_len + symbols * symbol_len;
        let derotated: Vec<Complex64> = signal.samples[offset..end]
            .iter()
            .enumerate()
            .map(|(k, s)| s * Complex64::from_polar(1.0, -(phase + freq * k as f64)))
            .collect();

        let amplitude = {
            let c: Complex64 = derotated[..sync_len]
                .iter()
                .zip(&self.sync_reference)
                .map(|(a, b)| a * b.conj())
                .sum();
            (c.norm() / sync_len as f64).max(f64::MIN_POSITIVE)
        };

        let (estimates, noise_variance) = match self.scheme.kind {
            Modulation::Bpsk => {
                let mut chips: Vec<Complex64> = derotated
                    .chunks(sps)
                    .map(|chip| chip.iter().sum::<Complex64>() / (sps as f64 * amplitude))
                    .collect();
                if self.config.carrier == CarrierRecovery::FrameAided {
                    freq += self.refine_phase(&mut chips) / sps as f64;
                }
                // The quadrature arm carries noise only.
                let quad: f64 = chips.iter().map(|c| c.im * c.im).sum();
                let var = 2.0 * quad / chips.len() as f64;
                (chips.iter().map(|c| c.re).collect(), var)
            }
            Modulation::Cpfsk { index } => {
                let scale = sps as f64 / (PI * index);
                let est: Vec<f64> = derotated
                    .chunks(sps)
                    .map(|chip| {
                        let z: Complex64 = chip.windows(2).map(|w| w[1] * w[0].conj()).sum();
                        z.arg() * scale
                    })
                    .collect();
                let resid: f64 = est[..self.sync_chips.len()]
                    .iter()
                    .zip(&self.sync_chips)
                    .map(|(e, &c)| (e - c as f64).powi(2))
                    .sum();
                (est, 2.0 * resid / self.sync_chips.len() as f64)
            }
        };

        let payload = &estimates[self.sync_chips.len()..];
        let mut decisions = Vec::with_capacity(symbols);
        let mut metrics = Vec::with_capacity(symbols);
        for sym in payload.chunks(n).take(symbols) {
            let chips: Vec<f64> = match self.config.chip_mode {
                ChipMode::Soft => sym.to_vec(),
                ChipMode::Hard => sym.iter().map(|&e| if e < 0.0 { -1.0 } else { 1.0 }).collect(),
            };
            let m = correlate(&chips, &self.codebook)?;
            decisions.push(decide(&m, &self.codebook));
            metrics.push(m);
        }

        Ok(FrameDemod {
            sync,
            decisions,
            metrics,
            noise_variance,
            carrier_offset_hz: freq * self.scheme.sample_rate / (2.0 * PI),
        })
    }

    /// Acquires sync and demodulates; fails when the sync peak stays below
    /// the threshold.
    pub fn demodulate_frame_detailed(
        &self,
        signal: &BasebandSignal,
    ) -> Result<FrameDemod, ReceiverError> {
        let sync = self.acquire_sync(signal)?;
        if !sync.detected {
            return Err(ReceiverError::SyncNotDetected {
                peak: sync.peak_metric,
                threshold: self.config.threshold * self.sync_chips.len() as f64,
            });
        }
        self.demodulate_at(signal, self.refine_timing(signal, sync)?)
    }

    pub fn demodulate_frame(&self, signal: &BasebandSignal) -> Result<Vec<u32>, ReceiverError> {
        Ok(self.demodulate_frame_detailed(signal)?.words())
    }
}

/// Interferer power before despreading over its residual in the correlator
/// output, in dB, for a tone of random frequency and phase.
///
/// Each trial draws a tone frequency uniformly over the chip-rate band, a
/// phase and one of `codes`, samples the tone once per chip and forms the
/// normalized correlator output `(1/N)·Σ i_j·c_j`.
pub fn despreading_gain_probe(
    codes: &[ChipSequence],
    interferer: &Interferer,
    trials: usize,
    seed: u64,
) -> Result<f64, ReceiverError> {
    if interferer.kind != InterfererKind::Tone {
        return Err(ReceiverError::NotATone);
    }
    if codes.is_empty() || trials == 0 {
        return Err(ReceiverError::EmptyProbe);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = interferer.power_ratio.sqrt();
    let mut residual = 0.0;
    for _ in 0..trials {
        let w: f64 = rng.random_range(-PI..PI);
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        let code = &codes[rng.random_range(0..codes.len())];
        let n = code.len() as f64;
        let d: Complex64 = code
            .chips()
            .iter()
            .enumerate()
            .map(|(j, &c)| Complex64::from_polar(amp, w * j as f64 + phase) * c as f64)
            .sum::<Complex64>()
            / n;
        residual += d.norm_sqr();
    }
    residual /= trials as f64;
    Ok(10.0 * (interferer.power_ratio / residual).log10())
}
