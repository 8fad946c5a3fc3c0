//! Baseband channel: delay, carrier offset, narrowband interferers, AWGN.
//!
//! Every random component draws from its own ChaCha stream derived from the
//! config seed, so the noise and each interferer are identical across runs
//! and independent of the transmitted samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::db_to_linear;
use crate::waveform::{power, BasebandSignal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("input signal is empty")]
    EmptySignal,
    #[error("energy per bit must be positive when noise is enabled, got {0}")]
    EnergyPerBit(f64),
    #[error("reference signal power must be positive to scale interferers, got {0}")]
    SignalPower(f64),
    #[error("interferer {index}: {reason}")]
    Interferer { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterfererKind {
    Tone,
    FilteredNoise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    /// Hz relative to the carrier.
    pub center_offset_hz: f64,
    /// `S_ni/S`, linear.
    pub power_ratio: f64,
    /// Occupied bandwidth, Hz. Only used by filtered-noise interferers.
    pub bandwidth_hz: f64,
    pub kind: InterfererKind,
    /// Initial phase of a tone, radians.
    pub phase: f64,
}

impl Interferer {
    pub fn tone(center_offset_hz: f64, power_ratio: f64) -> Self {
        Interferer {
            center_offset_hz,
            power_ratio,
            bandwidth_hz: 0.0,
            kind: InterfererKind::Tone,
            phase: 0.0,
        }
    }

    pub fn filtered_noise(center_offset_hz: f64, power_ratio: f64, bandwidth_hz: f64) -> Self {
        Interferer {
            center_offset_hz,
            power_ratio,
            bandwidth_hz,
            kind: InterfererKind::FilteredNoise,
            phase: 0.0,
        }
    }

    fn validate(&self, index: usize) -> Result<(), ChannelError> {
        let fail = |reason: String| Err(ChannelError::Interferer { index, reason });
        if !(self.power_ratio >= 0.0 && self.power_ratio.is_finite()) {
            return fail(format!("power ratio {} is not a finite non-negative value", self.power_ratio));
        }
        if self.kind == InterfererKind::FilteredNoise && !(self.bandwidth_hz > 0.0) {
            return fail(format!("bandwidth {} must be positive", self.bandwidth_hz));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// `None` disables thermal noise.
    pub ebn0_db: Option<f64>,
    pub interferers: Vec<Interferer>,
    pub carrier_offset_hz: f64,
    /// Whole samples of leading delay.
    pub timing_offset: usize,
    pub seed: u64,
    /// Reference `S` for interferer powers. `None` measures it from the input.
    pub signal_power: Option<f64>,
}

impl ChannelConfig {
    /// No impairments at all.
    pub fn identity() -> Self {
        ChannelConfig {
            ebn0_db: None,
            interferers: Vec::new(),
            carrier_offset_hz: 0.0,
            timing_offset: 0,
            seed: 0,
            signal_power: None,
        }
    }

    pub fn awgn(ebn0_db: f64, seed: u64) -> Self {
        ChannelConfig {
            ebn0_db: Some(ebn0_db),
            seed,
            ..ChannelConfig::identity()
        }
    }
}

/// `E_b = S·T_b` for a signal of power `S` carrying `bits` over its duration.
pub fn energy_per_bit(signal_power: f64, samples: usize, sample_rate: f64, bits: usize) -> f64 {
    signal_power * samples as f64 / sample_rate / bits as f64
}

/// Complex per-sample noise variance for a given `E_b/N0`: `N0·f_s`.
pub fn noise_variance(energy_per_bit: f64, ebn0_db: f64, sample_rate: f64) -> f64 {
    energy_per_bit / db_to_linear(ebn0_db) * sample_rate
}

fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let sigma = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * sigma, im * sigma)
}

/// Moving-average taps for a lowpass of roughly `bandwidth_hz`.
fn moving_average_len(bandwidth_hz: f64, sample_rate: f64) -> usize {
    ((sample_rate / bandwidth_hz).round() as usize).max(1)
}

/// Samples of one interferer over `len` output samples, at absolute power
/// `interferer_power`.
pub fn interferer_samples(
    intf: &Interferer,
    interferer_power: f64,
    len: usize,
    sample_rate: f64,
    seed: u64,
    stream: u64,
) -> Vec<Complex64> {
    let amp = interferer_power.sqrt();
    let w = 2.0 * PI * intf.center_offset_hz / sample_rate;
    match intf.kind {
        InterfererKind::Tone => (0..len)
            .map(|n| Complex64::from_polar(amp, w * n as f64 + intf.phase))
            .collect(),
        InterfererKind::FilteredNoise => {
            let taps = moving_average_len(intf.bandwidth_hz, sample_rate);
            let mut rng = component_rng(seed, stream);
            let white: Vec<Complex64> = (0..len + taps - 1)
                .map(|_| complex_gaussian(&mut rng, 1.0))
                .collect();
            // Averaging L unit-variance samples leaves variance 1/L.
            let gain = amp / (taps as f64).sqrt();
            let mut acc: Complex64 = white[..taps - 1].iter().sum();
            (0..len)
                .map(|n| {
                    acc += white[n + taps - 1];
                    let y = acc * gain;
                    acc -= white[n];
                    y * Complex64::from_polar(1.0, w * n as f64 + intf.phase)
                })
                .collect()
        }
    }
}

/// Passes `signal` through the configured impairments.
///
/// The output is the input delayed by `timing_offset` samples (so it is that
/// much longer), rotated by the carrier offset, plus every interferer and
/// complex AWGN whose per-sample variance is `N0·f_s` with
/// `N0 = E_b / (E_b/N0)`.
pub fn apply(
    signal: &BasebandSignal,
    cfg: &ChannelConfig,
    energy_per_bit: f64,
) -> Result<BasebandSignal, ChannelError> {
    if signal.is_empty() {
        return Err(ChannelError::EmptySignal);
    }
    let fs = signal.sample_rate;
    let len = signal.len() + cfg.timing_offset;

    let mut out = vec![Complex64::new(0.0, 0.0); len];
    out[cfg.timing_offset..].copy_from_slice(&signal.samples);
    if cfg.carrier_offset_hz != 0.0 {
        let w = 2.0 * PI * cfg.carrier_offset_hz / fs;
        for (n, s) in out.iter_mut().enumerate() {
            *s *= Complex64::from_polar(1.0, w * n as f64);
        }
    }

    if !cfg.interferers.is_empty() {
        let s = match cfg.signal_power {
            Some(p) => p,
            None => power(signal).map_err(|_| ChannelError::EmptySignal)?,
        };
        if !(s > 0.0 && s.is_finite()) {
            return Err(ChannelError::SignalPower(s));
        }
        for (i, intf) in cfg.interferers.iter().enumerate() {
            intf.validate(i)?;
            let samples = interferer_samples(intf, intf.power_ratio * s, len, fs, cfg.seed, 1 + i as u64);
            for (o, x) in out.iter_mut().zip(samples) {
                *o += x;
            }
        }
    }

    if let Some(ebn0_db) = cfg.ebn0_db {
        if !(energy_per_bit > 0.0 && energy_per_bit.is_finite()) {
            return Err(ChannelError::EnergyPerBit(energy_per_bit));
        }
        let var = noise_variance(energy_per_bit, ebn0_db, fs);
        let mut rng = component_rng(cfg.seed, 0);
        for o in out.iter_mut() {
            *o += complex_gaussian(&mut rng, var);
        }
    }

    Ok(BasebandSignal {
        samples: out,
        sample_rate: fs,
    })
}

/// Fraction of the spread band covered by interferers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyReport {
    pub occupancy: f64,
}

/// `p = count·W_ni/W`, clamped to `[0, 1]`.
pub fn occupancy(count: usize, bandwidth_hz: f64, spacing_hz: f64) -> OccupancyReport {
    let p = count as f64 * spacing_hz / bandwidth_hz;
    OccupancyReport {
        occupancy: p.clamp(0.0, 1.0),
    }
}

/// `count` interferers at uniformly spaced offsets `(i - (count-1)/2)·W/count`,
/// symmetric about the carrier. Tone phases are drawn from `seed`.
pub fn place_interferers(
    count: usize,
    bandwidth_hz: f64,
    spacing_hz: f64,
    power_ratio: f64,
    kind: InterfererKind,
    seed: u64,
) -> Vec<Interferer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = bandwidth_hz / count.max(1) as f64;
    (0..count)
        .map(|i| Interferer {
            center_offset_hz: (i as f64 - (count as f64 - 1.0) / 2.0) * step,
            power_ratio,
            bandwidth_hz: spacing_hz,
            kind,
            phase: rng.random_range(0.0..2.0 * PI),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{modulate, ModulationScheme};

    const FS: f64 = 1.6e6;

    fn test_signal(len: usize) -> BasebandSignal {
        let chips: Vec<i8> = (0..len).map(|i| if (i * 7 + 3) % 5 < 2 { 1 } else { -1 }).collect();
        modulate(&chips, &ModulationScheme::bpsk(4, FS)).unwrap()
    }

    #[test]
    fn identity_channel() {
        let sig = test_signal(100);
        let out = apply(&sig, &ChannelConfig::identity(), 1.0).unwrap();
        assert_eq!(out, sig);
    }

    #[test]
    fn delay_and_rotation() {
        let sig = test_signal(10);
        let cfg = ChannelConfig {
            timing_offset: 7,
            carrier_offset_hz: 1e3,
            ..ChannelConfig::identity()
        };
        let out = apply(&sig, &cfg, 1.0).unwrap();
        assert_eq!(out.len(), sig.len() + 7);
        assert!(out.samples[..7].iter().all(|s| s.norm() == 0.0));
        for (n, s) in sig.samples.iter().enumerate() {
            let m = n + 7;
            let expected = s * Complex64::from_polar(1.0, 2.0 * PI * 1e3 * m as f64 / FS);
            assert!((out.samples[m] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn tone_power_into_silence() {
        let silence = BasebandSignal::zeros(100_000, FS);
        let cfg = ChannelConfig {
            interferers: vec![Interferer::tone(30e3, 1.0)],
            signal_power: Some(1.0),
            ..ChannelConfig::identity()
        };
        let out = apply(&silence, &cfg, 1.0).unwrap();
        let p = power(&out).unwrap();
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn silence_without_reference_power_is_rejected() {
        let silence = BasebandSignal::zeros(100, FS);
        let cfg = ChannelConfig {
            interferers: vec![Interferer::tone(0.0, 1.0)],
            ..ChannelConfig::identity()
        };
        assert_eq!(apply(&silence, &cfg, 1.0), Err(ChannelError::SignalPower(0.0)));
    }

    #[test]
    fn filtered_noise_power() {
        // 8-tap average: ~1e6/8 independent power samples per estimate.
        let silence = BasebandSignal::zeros(1_000_000, FS);
        for ratio in [0.5, 2.0] {
            let cfg = ChannelConfig {
                interferers: vec![Interferer::filtered_noise(-50e3, ratio, 200e3)],
                signal_power: Some(1.0),
                seed: 9,
                ..ChannelConfig::identity()
            };
            let p = power(&apply(&silence, &cfg, 1.0).unwrap()).unwrap();
            assert!((p / ratio - 1.0).abs() < 0.01, "{p} vs {ratio}");
        }
    }

    #[test]
    fn awgn_calibration() {
        let sig = test_signal(250_000);
        let eb = energy_per_bit(1.0, sig.len(), FS, 1000);
        let out = apply(&sig, &ChannelConfig::awgn(10.0, 3), eb).unwrap();
        let noise_power: f64 = out
            .samples
            .iter()
            .zip(&sig.samples)
            .map(|(o, s)| (o - s).norm_sqr())
            .sum::<f64>()
            / sig.len() as f64;
        let n0 = noise_power / FS;
        let measured_db = 10.0 * (eb / n0).log10();
        assert!((measured_db - 10.0).abs() < 0.1, "{measured_db}");
    }

    #[test]
    fn noise_requires_energy() {
        let sig = test_signal(4);
        assert_eq!(
            apply(&sig, &ChannelConfig::awgn(3.0, 1), 0.0),
            Err(ChannelError::EnergyPerBit(0.0))
        );
        assert_eq!(
            apply(&BasebandSignal::zeros(0, FS), &ChannelConfig::identity(), 1.0),
            Err(ChannelError::EmptySignal)
        );
    }

    #[test]
    fn deterministic_and_additive() {
        let a = test_signal(500);
        let b = a.scaled(-0.5);
        let cfg = ChannelConfig {
            ebn0_db: Some(3.0),
            interferers: place_interferers(3, 400e3, 35e3, 2.0, InterfererKind::FilteredNoise, 5),
            signal_power: Some(1.0),
            seed: 42,
            ..ChannelConfig::identity()
        };
        let out_a = apply(&a, &cfg, 1e-5).unwrap();
        assert_eq!(out_a, apply(&a, &cfg, 1e-5).unwrap());

        let sum = BasebandSignal {
            samples: a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect(),
            sample_rate: FS,
        };
        let out_sum = apply(&sum, &cfg, 1e-5).unwrap();
        for ((s, x), y) in out_sum.samples.iter().zip(&out_a.samples).zip(&b.samples) {
            assert!((s - (x + y)).norm() < 1e-12);
        }
    }

    #[test]
    fn occupancy_examples() {
        assert_eq!(occupancy(0, 400e3, 35e3).occupancy, 0.0);
        assert!((occupancy(8, 400e3, 35e3).occupancy - 0.7).abs() < 1e-12);
        assert_eq!(occupancy(12, 400e3, 35e3).occupancy, 1.0);
    }

    #[test]
    fn placement() {
        assert!(place_interferers(0, 400e3, 35e3, 1.0, InterfererKind::Tone, 1).is_empty());
        let one = place_interferers(1, 400e3, 35e3, 1.0, InterfererKind::Tone, 1);
        assert_eq!(one[0].center_offset_hz, 0.0);
        let eight = place_interferers(8, 400e3, 35e3, 2.0, InterfererKind::Tone, 1);
        let offsets: Vec<f64> = eight.iter().map(|i| i.center_offset_hz).collect();
        assert_eq!(
            offsets,
            vec![-175e3, -125e3, -75e3, -25e3, 25e3, 75e3, 125e3, 175e3]
        );
        assert_eq!(eight, place_interferers(8, 400e3, 35e3, 2.0, InterfererKind::Tone, 1));
    }
}
