//! Experiment runner behind the `mary-sim` binary.
//!
//! An [`ExperimentSpec`] is read from TOML, resolved (scenario files are
//! inlined) and hashed. Every CSV starts with a `#` comment carrying the tool
//! version and that hash, followed by a header row. Monte Carlo trials use
//! seed `base_seed + trial` and are merged in trial order, so the worker
//! count never changes the output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::capacity::{
    db_to_linear, degraded_capacity, mary_bit_rate, max_rate, pole_capacity,
    InterferenceEnv, LinkParams,
};
use crate::channel::{self, place_interferers, ChannelConfig, InterfererKind};
use crate::codebook::Codebook;
use crate::fec::{bits_to_words, symbol_llrs_to_bit_llrs, words_to_bits, LdpcCode};
use crate::receiver::{build_frame, CarrierRecovery, Receiver, ReceiverConfig};
use crate::waveform::{power, ModulationScheme};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Slack when flooring a user count, so `N = 1 − 1e-15` still counts one user.
const USER_FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Runtime(String),
}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::InvalidSpec(_) => 1,
            SimError::Runtime(_) => 2,
        }
    }
}

fn invalid(msg: impl std::fmt::Display) -> SimError {
    SimError::InvalidSpec(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> SimError {
    SimError::Runtime(msg.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Capacity,
    Codebook,
    Ber,
    Throughput,
}

/// Inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// A swept parameter: one value, an explicit list, or a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    Value(f64),
    List(Vec<f64>),
    Range(Range),
}

impl Sweep {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, SimError> {
        let values = match self {
            Sweep::Value(v) => vec![*v],
            Sweep::List(vs) => vs.clone(),
            Sweep::Range(r) => {
                if !(r.start.is_finite() && r.stop.is_finite() && r.step.is_finite()) {
                    return Err(invalid(format!("{name}: range bounds must be finite")));
                }
                if r.step <= 0.0 {
                    return Err(invalid(format!("{name}: step must be positive")));
                }
                if r.start > r.stop {
                    return Err(invalid(format!("{name}: empty range")));
                }
                let count = ((r.stop - r.start) / r.step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| r.start + i as f64 * r.step).collect()
            }
        };
        if values.is_empty() {
            return Err(invalid(format!("{name}: empty sweep")));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid(format!("{name}: NaN in sweep")));
        }
        Ok(values)
    }
}

impl From<f64> for Sweep {
    fn from(v: f64) -> Self {
        Sweep::Value(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSpec {
    pub order: usize,
    pub bits_per_symbol: u32,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        CodebookSpec {
            order: 12,
            bits_per_symbol: 4,
        }
    }
}

/// Link and interference parameters; every sweep is crossed with the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySpec {
    pub bandwidth_hz: f64,
    pub data_rate_bps: Sweep,
    pub sinr_req_db: Sweep,
    pub occupancy: Sweep,
    /// `S_ni/S` in dB.
    pub interferer_power_db: Sweep,
    pub interferer_bandwidth_hz: f64,
    pub signal_power: f64,
    pub noise_density: f64,
}

impl Default for CapacitySpec {
    fn default() -> Self {
        CapacitySpec {
            bandwidth_hz: 400e3,
            data_rate_bps: 25e3.into(),
            sinr_req_db: 0.0.into(),
            occupancy: 0.0.into(),
            interferer_power_db: 0.0.into(),
            interferer_bandwidth_hz: 35e3,
            signal_power: 1.0,
            noise_density: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThroughputSpec {
    /// `(N, K)` pairs for the single-user M-ary rate.
    pub codebooks: Vec<CodebookSpec>,
    pub chip_rate: Sweep,
}

impl Default for ThroughputSpec {
    fn default() -> Self {
        ThroughputSpec {
            codebooks: vec![CodebookSpec::default()],
            chip_rate: 400e3.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulationKind {
    Bpsk,
    Cpfsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpcSpec {
    pub n: usize,
    pub col_weight: usize,
    pub row_weight: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for LdpcSpec {
    fn default() -> Self {
        LdpcSpec {
            n: 240,
            col_weight: 3,
            row_weight: 6,
            seed: 1,
            max_iterations: crate::fec::DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Channel conditions for a BER run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Used when the sweep gives no `ebn0_db`.
    pub ebn0_db: Option<f64>,
    pub interferers: usize,
    pub bandwidth_hz: f64,
    pub interferer_bandwidth_hz: f64,
    pub power_ratio_db: f64,
    pub kind: InterfererKind,
    /// Each frame moves every interferer by a uniform draw in
    /// `[-spread/2, spread/2)` Hz and gives it a fresh phase.
    pub offset_spread_hz: f64,
    pub carrier_offset_hz: f64,
    pub timing_offset: usize,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            ebn0_db: None,
            interferers: 0,
            bandwidth_hz: 400e3,
            interferer_bandwidth_hz: 35e3,
            power_ratio_db: 0.0,
            kind: InterfererKind::Tone,
            offset_spread_hz: 0.0,
            carrier_offset_hz: 0.0,
            timing_offset: 0,
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| invalid(format!("scenario: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerSpec {
    pub ebn0_db: Option<Sweep>,
    /// Adds a noise-free row, printed with `EbN0_dB = inf`.
    pub include_noise_free: bool,
    pub coded: bool,
    pub modulation: ModulationKind,
    pub modulation_index: f64,
    pub samples_per_chip: usize,
    pub chip_rate: f64,
    pub carrier: CarrierRecovery,
    /// Payload symbols per uncoded frame. Coded frames carry one codeword.
    pub payload_symbols: usize,
    pub frames_per_trial: usize,
    pub ldpc: LdpcSpec,
    /// Fail when no frame at some sweep point reaches sync detection.
    pub require_lock: bool,
    /// Path to a scenario TOML file, relative to the spec file.
    pub scenario_file: Option<PathBuf>,
    pub scenario: Scenario,
}

impl Default for BerSpec {
    fn default() -> Self {
        BerSpec {
            ebn0_db: Some(Sweep::Range(Range {
                start: 0.0,
                stop: 10.0,
                step: 2.0,
            })),
            include_noise_free: false,
            coded: false,
            modulation: ModulationKind::Bpsk,
            modulation_index: crate::waveform::DEFAULT_MODULATION_INDEX,
            samples_per_chip: 4,
            chip_rate: 400e3,
            carrier: CarrierRecovery::FrameAided,
            payload_symbols: 60,
            frames_per_trial: 10,
            ldpc: LdpcSpec::default(),
            require_lock: false,
            scenario_file: None,
            scenario: Scenario::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Checked against the requested subcommand when present.
    pub mode: Option<Mode>,
    pub seed: u64,
    pub trials: usize,
    /// Thread count; never affects results and is excluded from the hash.
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub codebook: CodebookSpec,
    pub capacity: CapacitySpec,
    pub throughput: ThroughputSpec,
    pub ber: BerSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            mode: None,
            seed: 1,
            trials: 1,
            workers: None,
            output: None,
            codebook: CodebookSpec::default(),
            capacity: CapacitySpec::default(),
            throughput: ThroughputSpec::default(),
            ber: BerSpec::default(),
        }
    }
}

impl ExperimentSpec {
    /// Parses TOML. A `scenario_file` is resolved against `base_dir` and
    /// inlined.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, SimError> {
        let mut spec: ExperimentSpec = toml::from_str(text).map_err(invalid)?;
        if let Some(file) = spec.ber.scenario_file.take() {
            let path = base_dir.join(&file);
            let body = std::fs::read_to_string(&path)
                .map_err(|e| invalid(format!("scenario file {}: {e}", path.display())))?;
            spec.ber.scenario = Scenario::from_toml(&body)?;
        }
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the resolved spec, excluding
    /// `workers` and `output`.
    pub fn hash(&self) -> String {
        let canonical = ExperimentSpec {
            workers: None,
            output: None,
            ..self.clone()
        };
        let text = toml::to_string(&canonical).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn comment_line(&self) -> String {
        format!("# mary-sim {VERSION} spec_sha256={}\n", self.hash())
    }
}

fn fmt(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub bandwidth_hz: f64,
    pub data_rate_bps: f64,
    pub sinr_req_db: f64,
    pub occupancy: f64,
    pub interferer_power_db: f64,
    pub interferer_bandwidth_hz: f64,
    /// Approximate pole, `(W/R)/SINR`.
    pub n_pole: f64,
    /// Exact pole less the interference term.
    pub n_degraded: f64,
    pub max_rate_bps: f64,
}

fn link_for(c: &CapacitySpec, rate: f64, sinr_db: f64) -> Result<LinkParams, SimError> {
    let lp = LinkParams::new(c.bandwidth_hz, rate)
        .with_signal_power(c.signal_power)
        .with_noise_density(c.noise_density)
        .with_sinr_req(db_to_linear(sinr_db));
    lp.validate().map_err(invalid)?;
    Ok(lp)
}

pub fn run_capacity_table(spec: &ExperimentSpec) -> Result<Vec<CapacityRow>, SimError> {
    let c = &spec.capacity;
    let rates = c.data_rate_bps.values("data_rate_bps")?;
    let sinrs = c.sinr_req_db.values("sinr_req_db")?;
    let ps = c.occupancy.values("occupancy")?;
    let ratios = c.interferer_power_db.values("interferer_power_db")?;
    let mut rows = Vec::new();
    for &rate in &rates {
        for &sinr_db in &sinrs {
            let lp = link_for(c, rate, sinr_db)?;
            for &p in &ps {
                for &ratio_db in &ratios {
                    let env = InterferenceEnv::new(
                        p,
                        db_to_linear(ratio_db) * c.signal_power,
                        c.interferer_bandwidth_hz,
                    );
                    env.validate().map_err(invalid)?;
                    rows.push(CapacityRow {
                        bandwidth_hz: c.bandwidth_hz,
                        data_rate_bps: rate,
                        sinr_req_db: sinr_db,
                        occupancy: p,
                        interferer_power_db: ratio_db,
                        interferer_bandwidth_hz: c.interferer_bandwidth_hz,
                        n_pole: pole_capacity(&lp, false),
                        n_degraded: degraded_capacity(&lp, &env),
                        max_rate_bps: max_rate(&lp, &env),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn capacity_csv(spec: &ExperimentSpec, rows: &[CapacityRow]) -> String {
    let mut s = spec.comment_line();
    s.push_str("W,R,SINR_req_dB,p,S_ni_over_S_dB,W_ni,N_pole,N_degraded,max_rate_bps\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            fmt(r.bandwidth_hz),
            fmt(r.data_rate_bps),
            fmt(r.sinr_req_db),
            fmt(r.occupancy),
            fmt(r.interferer_power_db),
            fmt(r.interferer_bandwidth_hz),
            fmt(r.n_pole),
            fmt(r.n_degraded),
            fmt(r.max_rate_bps),
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub order: usize,
    pub bits_per_symbol: u32,
    pub chip_rate: f64,
    pub data_rate_bps: f64,
    pub occupancy: f64,
    pub interferer_power_db: f64,
    pub n_pole: f64,
    /// `N_pole·R`, interference-free.
    pub multiuser_bps: f64,
    pub n_degraded: f64,
    /// Whole users supported under interference, times `R`.
    pub degraded_bps: f64,
    /// One user sending `K` bits per symbol: `K·R_c/N`.
    pub mary_bps: f64,
}

pub fn run_throughput_compare(spec: &ExperimentSpec) -> Result<Vec<ThroughputRow>, SimError> {
    let t = &spec.throughput;
    if t.codebooks.is_empty() {
        return Err(invalid("throughput: no codebooks"));
    }
    let chip_rates = t.chip_rate.values("chip_rate")?;
    if chip_rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(invalid("throughput: chip rate must be positive"));
    }
    let mut rows = Vec::new();
    for cb in &t.codebooks {
        Codebook::for_order(cb.order, cb.bits_per_symbol).map_err(invalid)?;
        for &chip_rate in &chip_rates {
            for cap in run_capacity_table(spec)? {
                let users = (cap.n_degraded + USER_FLOOR_SLACK).floor().max(0.0);
                rows.push(ThroughputRow {
                    order: cb.order,
                    bits_per_symbol: cb.bits_per_symbol,
                    chip_rate,
                    data_rate_bps: cap.data_rate_bps,
                    occupancy: cap.occupancy,
                    interferer_power_db: cap.interferer_power_db,
                    n_pole: cap.n_pole,
                    multiuser_bps: cap.n_pole * cap.data_rate_bps,
                    n_degraded: cap.n_degraded,
                    degraded_bps: users * cap.data_rate_bps,
                    mary_bps: mary_bit_rate(chip_rate, cb.order, cb.bits_per_symbol),
                });
            }
        }
    }
    Ok(rows)
}

pub fn throughput_csv(spec: &ExperimentSpec, rows: &[ThroughputRow]) -> String {
    let mut s = spec.comment_line();
    s.push_str("N,K,R_c,R,p,S_ni_over_S_dB,N_pole,multiuser_bps,N_degraded,degraded_bps,mary_bps\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.order,
            r.bits_per_symbol,
            fmt(r.chip_rate),
            fmt(r.data_rate_bps),
            fmt(r.occupancy),
            fmt(r.interferer_power_db),
            fmt(r.n_pole),
            fmt(r.multiuser_bps),
            fmt(r.n_degraded),
            fmt(r.degraded_bps),
            fmt(r.mary_bps),
        );
    }
    s
}

pub fn dump_codebook(spec: &ExperimentSpec) -> Result<String, SimError> {
    let cb = Codebook::for_order(spec.codebook.order, spec.codebook.bits_per_symbol)
        .map_err(invalid)?;
    let mut body = Vec::new();
    cb.write_csv(&mut body).map_err(runtime)?;
    let mut s = spec.comment_line();
    s.push_str(&String::from_utf8(body).map_err(runtime)?);
    Ok(s)
}

/// Error counts at one `E_b/N0`; `ebn0_db = +inf` marks the noise-free row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    /// Channel symbol (word) errors, before any decoding.
    pub symbol_errors: u64,
    pub symbols: u64,
    pub coded: bool,
    pub frames: u64,
    pub sync_misses: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }

    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols as f64
    }

    fn absorb(&mut self, f: &FrameDiag) {
        self.bit_errors += f.bit_errors;
        self.bits += f.bits;
        self.symbol_errors += f.word_errors;
        self.symbols += f.symbols;
        self.frames += 1;
        self.sync_misses += (!f.detected) as u64;
    }
}

/// One frame's outcome, for the per-trial diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDiag {
    pub trial: usize,
    pub frame: usize,
    pub seed: u64,
    pub ebn0_db: f64,
    pub interferers: usize,
    pub sync_offset: usize,
    pub detected: bool,
    pub word_errors: u64,
    pub bit_errors: u64,
    pub bits: u64,
    pub symbols: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerSweep {
    pub points: Vec<BerPoint>,
    pub frames: Vec<FrameDiag>,
}

/// Everything fixed across trials of a BER sweep.
struct BerSetup {
    codebook: Codebook,
    scheme: ModulationScheme,
    receiver: Receiver,
    code: Option<LdpcCode>,
    symbols: usize,
    info_bits: usize,
    interferers: Vec<channel::Interferer>,
}

fn ber_setup(spec: &ExperimentSpec) -> Result<BerSetup, SimError> {
    let b = &spec.ber;
    let codebook = Codebook::for_order(spec.codebook.order, spec.codebook.bits_per_symbol)
        .map_err(invalid)?;
    if codebook.sync_code().is_none() {
        return Err(invalid("codebook has no sync code"));
    }
    let fs = b.chip_rate * b.samples_per_chip as f64;
    let scheme = match b.modulation {
        ModulationKind::Bpsk => ModulationScheme::bpsk(b.samples_per_chip, fs),
        ModulationKind::Cpfsk => ModulationScheme::cpfsk(b.modulation_index, b.samples_per_chip, fs),
    };
    scheme.validate().map_err(invalid)?;
    if !(b.scenario.offset_spread_hz >= 0.0 && b.scenario.offset_spread_hz.is_finite()) {
        return Err(invalid("scenario.offset_spread_hz must be finite and non-negative"));
    }
    if b.frames_per_trial == 0 {
        return Err(invalid("frames_per_trial must be at least 1"));
    }
    let k = codebook.bits_per_symbol() as usize;
    let (code, symbols, info_bits) = if b.coded {
        let l = b.ldpc;
        if l.max_iterations == 0 {
            return Err(invalid("ldpc.max_iterations must be at least 1"));
        }
        let code = LdpcCode::build_gallager(l.n, l.col_weight, l.row_weight, l.seed).map_err(invalid)?;
        let symbols = code.n().div_ceil(k);
        let info = code.k();
        (Some(code), symbols, info)
    } else {
        if b.payload_symbols == 0 {
            return Err(invalid("payload_symbols must be at least 1"));
        }
        (None, b.payload_symbols, b.payload_symbols * k)
    };
    let sc = &b.scenario;
    let interferers = place_interferers(
        sc.interferers,
        sc.bandwidth_hz,
        sc.interferer_bandwidth_hz,
        db_to_linear(sc.power_ratio_db),
        sc.kind,
        sc.seed,
    );
    let window = sc.timing_offset + codebook.order() * b.samples_per_chip;
    let config = ReceiverConfig::new(window)
        .with_payload_symbols(symbols)
        .with_carrier(b.carrier);
    let receiver = Receiver::new(codebook.clone(), scheme, config).map_err(invalid)?;
    Ok(BerSetup {
        codebook,
        scheme,
        receiver,
        code,
        symbols,
        info_bits,
        interferers,
    })
}

fn count_bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

/// Runs one frame at `ebn0_db` (`None` for noise-free).
fn run_frame(
    setup: &BerSetup,
    spec: &ExperimentSpec,
    ebn0_db: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, bool, u64, u64, u64), SimError> {
    let k = setup.codebook.bits_per_symbol();
    let info: Vec<u8> = (0..setup.info_bits).map(|_| rng.random_range(0..2u8)).collect();
    let words = match &setup.code {
        Some(code) => bits_to_words(&code.encode(&info).map_err(runtime)?, k),
        None => bits_to_words(&info, k),
    };
    let frame = build_frame(&setup.codebook, &words, &setup.scheme).map_err(runtime)?;
    let s = power(&frame).map_err(runtime)?;
    let payload_samples = setup.symbols * setup.codebook.order() * setup.scheme.samples_per_chip;
    let eb = channel::energy_per_bit(s, payload_samples, setup.scheme.sample_rate, setup.info_bits);
    let sc = &spec.ber.scenario;
    let mut interferers = setup.interferers.clone();
    if sc.offset_spread_hz > 0.0 {
        for intf in &mut interferers {
            intf.center_offset_hz += (rng.random::<f64>() - 0.5) * sc.offset_spread_hz;
            intf.phase = rng.random_range(0.0..std::f64::consts::TAU);
        }
    }
    let cfg = ChannelConfig {
        ebn0_db,
        interferers,
        carrier_offset_hz: sc.carrier_offset_hz,
        timing_offset: sc.timing_offset,
        seed: rng.random(),
        signal_power: Some(s),
    };
    // One symbol of trailing silence keeps a late sync lock inside the capture.
    let mut padded = frame;
    padded.samples.resize(
        padded.len() + setup.codebook.order() * setup.scheme.samples_per_chip,
        Default::default(),
    );
    let rx = channel::apply(&padded, &cfg, eb).map_err(runtime)?;
    let acquired = setup.receiver.acquire_sync(&rx).map_err(runtime)?;
    let sync = setup.receiver.refine_timing(&rx, acquired).map_err(runtime)?;
    // Demodulate at the best offset even below threshold; misses are counted.
    let demod = setup.receiver.demodulate_at(&rx, sync).map_err(runtime)?;
    let got = demod.words();
    let word_errors = words.iter().zip(&got).filter(|(a, b)| a != b).count() as u64;
    let bit_errors = match &setup.code {
        Some(code) => {
            let mut llrs = Vec::with_capacity(setup.symbols * k as usize);
            let variance = demod.noise_variance.max(1e-12);
            for m in &demod.metrics {
                llrs.extend(symbol_llrs_to_bit_llrs(m, variance).map_err(runtime)?);
            }
            llrs.truncate(code.n());
            let out = code
                .decode(&llrs, spec.ber.ldpc.max_iterations)
                .map_err(runtime)?;
            count_bit_errors(&out.bits[..code.k()], &info)
        }
        None => count_bit_errors(&words_to_bits(&got, k), &info),
    };
    Ok((sync.sample_offset, sync.detected, word_errors, bit_errors, got.len() as u64))
}

fn run_trial(
    setup: &BerSetup,
    spec: &ExperimentSpec,
    ebn0_db: Option<f64>,
    trial: usize,
) -> Result<Vec<FrameDiag>, SimError> {
    let seed = spec.seed.wrapping_add(trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.ber.frames_per_trial)
        .map(|frame| {
            let (sync_offset, detected, word_errors, bit_errors, symbols) =
                run_frame(setup, spec, ebn0_db, &mut rng)?;
            Ok(FrameDiag {
                trial,
                frame,
                seed,
                ebn0_db: ebn0_db.unwrap_or(f64::INFINITY),
                interferers: setup.interferers.len(),
                sync_offset,
                detected,
                word_errors,
                bit_errors,
                bits: setup.info_bits as u64,
                symbols,
            })
        })
        .collect()
}

pub fn run_ber_sweep(spec: &ExperimentSpec) -> Result<BerSweep, SimError> {
    spec.validate()?;
    let setup = ber_setup(spec)?;
    let mut grid: Vec<Option<f64>> = match (&spec.ber.ebn0_db, spec.ber.scenario.ebn0_db) {
        (Some(sweep), _) => sweep.values("ebn0_db")?.into_iter().map(Some).collect(),
        (None, Some(v)) => vec![Some(v)],
        (None, None) => Vec::new(),
    };
    if spec.ber.include_noise_free {
        grid.push(None);
    }
    if grid.is_empty() {
        return Err(invalid("ber: no Eb/N0 points"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.unwrap_or(0))
        .build()
        .map_err(runtime)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut frames = Vec::new();
    for ebn0 in grid {
        let per_trial: Vec<Result<Vec<FrameDiag>, SimError>> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(&setup, spec, ebn0, t))
                .collect()
        });
        let mut point = BerPoint {
            ebn0_db: ebn0.unwrap_or(f64::INFINITY),
            bit_errors: 0,
            bits: 0,
            symbol_errors: 0,
            symbols: 0,
            coded: spec.ber.coded,
            frames: 0,
            sync_misses: 0,
        };
        for trial in per_trial {
            for f in trial? {
                point.absorb(&f);
                frames.push(f);
            }
        }
        if spec.ber.require_lock && point.sync_misses == point.frames {
            return Err(runtime(format!(
                "sync lost in every frame at Eb/N0 = {} dB",
                fmt(point.ebn0_db)
            )));
        }
        points.push(point);
    }
    Ok(BerSweep { points, frames })
}

pub fn ber_csv(spec: &ExperimentSpec, points: &[BerPoint]) -> String {
    let mut s = spec.comment_line();
    s.push_str("EbN0_dB,coded,bit_errors,bits,ber,symbol_errors,symbols,ser,frames,sync_misses\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt(p.ebn0_db),
            p.coded as u8,
            p.bit_errors,
            p.bits,
            fmt(p.ber()),
            p.symbol_errors,
            p.symbols,
            fmt(p.ser()),
            p.frames,
            p.sync_misses,
        );
    }
    s
}

pub fn diagnostics_csv(spec: &ExperimentSpec, frames: &[FrameDiag]) -> String {
    let mut s = spec.comment_line();
    s.push_str("trial,frame,seed,EbN0_dB,n_interferers,sync_offset,sync_detected,word_errors,bit_errors,bits,symbols\n");
    for f in frames {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            f.trial,
            f.frame,
            f.seed,
            fmt(f.ebn0_db),
            f.interferers,
            f.sync_offset,
            f.detected as u8,
            f.word_errors,
            f.bit_errors,
            f.bits,
            f.symbols,
        );
    }
    s
}

/// CSV text produced by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    /// Per-frame diagnostics; BER mode only.
    pub diagnostics: Option<String>,
}

/// Runs `mode` end to end and renders its CSV.
pub fn run(spec: &ExperimentSpec, mode: Mode) -> Result<RunOutput, SimError> {
    if let Some(m) = spec.mode {
        if m != mode {
            return Err(invalid(format!("spec is for {m:?} mode, not {mode:?}")));
        }
    }
    spec.validate()?;
    let (csv, diagnostics) = match mode {
        Mode::Capacity => (capacity_csv(spec, &run_capacity_table(spec)?), None),
        Mode::Throughput => (throughput_csv(spec, &run_throughput_compare(spec)?), None),
        Mode::Codebook => (dump_codebook(spec)?, None),
        Mode::Ber => {
            let sweep = run_ber_sweep(spec)?;
            (
                ber_csv(spec, &sweep.points),
                Some(diagnostics_csv(spec, &sweep.frames)),
            )
        }
    };
    Ok(RunOutput { csv, diagnostics })
}
