//! Chip modulation to complex baseband.
//!
//! BPSK maps each chip to a constant real sample. Continuous-phase FSK
//! advances the phase linearly by `±π·h` across each chip, so a balanced
//! code returns to its starting phase at the end of the symbol.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("no chips to modulate")]
    EmptyChips,
    #[error("signal has no samples")]
    EmptySignal,
    #[error("samples per chip must be at least 2, got {0}")]
    SamplesPerChip(usize),
    #[error("modulation index must be positive, got {0}")]
    ModulationIndex(f64),
    #[error("sample rate must be positive, got {0}")]
    SampleRate(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulation {
    Bpsk,
    /// Continuous-phase FSK with modulation index `h`.
    Cpfsk { index: f64 },
}

/// Default CPFSK modulation index (MSK).
pub const DEFAULT_MODULATION_INDEX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationScheme {
    pub kind: Modulation,
    pub samples_per_chip: usize,
    /// Hz.
    pub sample_rate: f64,
}

impl ModulationScheme {
    pub fn bpsk(samples_per_chip: usize, sample_rate: f64) -> Self {
        ModulationScheme {
            kind: Modulation::Bpsk,
            samples_per_chip,
            sample_rate,
        }
    }

    pub fn cpfsk(index: f64, samples_per_chip: usize, sample_rate: f64) -> Self {
        ModulationScheme {
            kind: Modulation::Cpfsk { index },
            samples_per_chip,
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        if self.samples_per_chip < 2 {
            return Err(WaveformError::SamplesPerChip(self.samples_per_chip));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(WaveformError::SampleRate(self.sample_rate));
        }
        if let Modulation::Cpfsk { index } = self.kind {
            if !(index > 0.0 && index.is_finite()) {
                return Err(WaveformError::ModulationIndex(index));
            }
        }
        Ok(())
    }

    /// Chips per second.
    pub fn chip_rate(&self) -> f64 {
        self.sample_rate / self.samples_per_chip as f64
    }
}

/// Complex sample stream at a declared sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub samples: Vec<Complex64>,
    /// Hz.
    pub sample_rate: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self, WaveformError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(WaveformError::SampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(WaveformError::NonFinite(i));
        }
        Ok(BasebandSignal {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        BasebandSignal {
            samples: vec![Complex64::new(0.0, 0.0); len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn scaled(&self, gain: f64) -> BasebandSignal {
        BasebandSignal {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// `index,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,re,im")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(out, "{i},{},{}", s.re, s.im)?;
        }
        Ok(())
    }
}

/// Mean of `|sample|²`.
pub fn power(signal: &BasebandSignal) -> Result<f64, WaveformError> {
    if signal.is_empty() {
        return Err(WaveformError::EmptySignal);
    }
    Ok(signal.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / signal.len() as f64)
}

/// Modulates a chip stream. Output has `chips.len() * samples_per_chip`
/// unit-power samples.
///
/// For CPFSK, sample `k` of chip `j` sits at phase `φ_j + c_j·π·h·k/sps`
/// where `φ_j` is the phase accumulated over all earlier chips, so the first
/// sample of the stream has phase zero.
pub fn modulate(chips: &[i8], scheme: &ModulationScheme) -> Result<BasebandSignal, WaveformError> {
    scheme.validate()?;
    if chips.is_empty() {
        return Err(WaveformError::EmptyChips);
    }
    let sps = scheme.samples_per_chip;
    let mut samples = Vec::with_capacity(chips.len() * sps);
    match scheme.kind {
        Modulation::Bpsk => {
            for &c in chips {
                samples.extend(std::iter::repeat_n(Complex64::new(c as f64, 0.0), sps));
            }
        }
        Modulation::Cpfsk { index } => {
            // Integer running sum keeps chip-boundary phases exact.
            let mut acc: i64 = 0;
            for &c in chips {
                let start = PI * index * acc as f64;
                for k in 0..sps {
                    let phase = start + c as f64 * PI * index * k as f64 / sps as f64;
                    samples.push(Complex64::from_polar(1.0, phase));
                }
                acc += c as i64;
            }
        }
    }
    Ok(BasebandSignal {
        samples,
        sample_rate: scheme.sample_rate,
    })
}

/// Phase at each chip boundary, starting at zero: `chips.len() + 1` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub phases: Vec<f64>,
}

impl PhaseTrajectory {
    pub fn end(&self) -> f64 {
        *self.phases.last().expect("trajectory has at least the start point")
    }

    /// `index,phase_radians`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,phase_radians")?;
        for (i, p) in self.phases.iter().enumerate() {
            writeln!(out, "{i},{p}")?;
        }
        Ok(())
    }
}

/// Cumulative `±π·h` phase steps of a CPFSK chip stream.
pub fn phase_trajectory(chips: &[i8], index: f64) -> Result<PhaseTrajectory, WaveformError> {
    if !(index > 0.0 && index.is_finite()) {
        return Err(WaveformError::ModulationIndex(index));
    }
    let mut phases = Vec::with_capacity(chips.len() + 1);
    let mut acc: i64 = 0;
    phases.push(0.0);
    for &c in chips {
        acc += c as i64;
        phases.push(PI * index * acc as f64);
    }
    Ok(PhaseTrajectory { phases })
}
