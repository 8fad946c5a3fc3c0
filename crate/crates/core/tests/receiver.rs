use mary_walsh::channel::{self, ChannelConfig};
use mary_walsh::codebook::Codebook;
use mary_walsh::receiver::*;
use mary_walsh::waveform::{power, BasebandSignal, ModulationScheme};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FS: f64 = 1.6e6;

/// Every `(N, K)` the codebook supports among the tabulated code lengths.
fn supported_pairs() -> Vec<(usize, u32)> {
    let mut pairs = Vec::new();
    for order in [2, 4, 8, 12, 16, 20, 24, 32, 40, 64] {
        for k in 1..=7 {
            if Codebook::for_order(order, k).is_ok() {
                pairs.push((order, k));
            }
        }
    }
    pairs
}

#[test]
fn noiseless_symbol_decisions_are_exhaustively_correct() {
    let pairs = supported_pairs();
    assert!(pairs.contains(&(12, 4)) && pairs.contains(&(20, 5)) && pairs.contains(&(40, 6)));
    for (order, k) in pairs {
        let cb = Codebook::for_order(order, k).unwrap();
        for word in 0..1u32 << k {
            let est = cb.encode_bits(word).unwrap().to_f64();
            let d = demodulate_symbol(&est, &cb).unwrap();
            assert_eq!(d.word, word, "N={order} K={k}");
            assert_eq!(d.metric.abs(), order as f64);
        }
    }
}

fn random_words(cb: &Codebook, count: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| rng.random_range(0..1u32 << cb.bits_per_symbol()))
        .collect()
}

fn run_link(scheme: ModulationScheme, carrier: CarrierRecovery, cfg: &ChannelConfig, words: &[u32]) -> Vec<u32> {
    let cb = Codebook::for_order(12, 4).unwrap();
    let frame = build_frame(&cb, words, &scheme).unwrap();
    let s = power(&frame).unwrap();
    let payload = words.len() * 12 * scheme.samples_per_chip;
    let eb = channel::energy_per_bit(s, payload, FS, words.len() * 4);
    let rx = channel::apply(&frame, cfg, eb).unwrap();
    let receiver = Receiver::new(
        cb,
        scheme,
        ReceiverConfig::new(cfg.timing_offset + 48)
            .with_payload_symbols(words.len())
            .with_carrier(carrier),
    )
    .unwrap();
    receiver.demodulate_frame(&rx).unwrap()
}

#[test]
fn high_snr_frames_are_error_free() {
    let cb = Codebook::for_order(12, 4).unwrap();
    let words = random_words(&cb, 1000, 3);
    let cfg = ChannelConfig {
        timing_offset: 17,
        ..ChannelConfig::awgn(20.0, 9)
    };
    let bpsk = ModulationScheme::bpsk(4, FS);
    let cpfsk = ModulationScheme::cpfsk(0.5, 4, FS);
    for (scheme, carrier) in [
        (bpsk, CarrierRecovery::FrameAided),
        (bpsk, CarrierRecovery::Known),
        (cpfsk, CarrierRecovery::FrameAided),
        (cpfsk, CarrierRecovery::SyncAided),
    ] {
        assert_eq!(run_link(scheme, carrier, &cfg, &words), words, "{scheme:?} {carrier:?}");
    }
}

#[test]
fn frame_aided_carrier_holds_coherence_with_offset() {
    let cb = Codebook::for_order(12, 4).unwrap();
    let words = random_words(&cb, 200, 4);
    let cfg = ChannelConfig {
        carrier_offset_hz: 2500.0,
        timing_offset: 5,
        ..ChannelConfig::awgn(8.0, 10)
    };
    let got = run_link(ModulationScheme::bpsk(4, FS), CarrierRecovery::FrameAided, &cfg, &words);
    let errors = got.iter().zip(&words).filter(|(a, b)| a != b).count();
    assert!(errors <= 2, "{errors} symbol errors");
}

#[test]
fn false_alarm_rate_on_noise() {
    let cb = Codebook::for_order(12, 4).unwrap();
    let scheme = ModulationScheme::bpsk(4, FS);
    let symbol = 12 * 4;
    let receiver = Receiver::new(cb, scheme, ReceiverConfig::new(symbol)).unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let trials = 2000;
    let mut alarms = 0;
    for _ in 0..trials {
        let samples: Vec<Complex64> = (0..4 * symbol)
            .map(|_| Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let sig = BasebandSignal::new(samples, FS).unwrap();
        alarms += receiver.acquire_sync(&sig).unwrap().detected as usize;
    }
    let rate = alarms as f64 / trials as f64;
    assert!(rate <= 0.10, "false alarm rate {rate}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Positive scaling never changes a decision.
    #[test]
    fn decisions_are_scale_invariant(seed in any::<u64>(), scale in 1e-3..1e3f64) {
        let cb = Codebook::for_order(20, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let est: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
        let scaled: Vec<f64> = est.iter().map(|e| e * scale).collect();
        prop_assert_eq!(
            demodulate_symbol(&est, &cb).unwrap().word,
            demodulate_symbol(&scaled, &cb).unwrap().word
        );
    }

    /// Balanced codes cancel any constant added to every chip estimate.
    /// Estimates are dyadic so every sum is exact.
    #[test]
    fn decisions_ignore_dc(seed in any::<u64>(), dc in -4096i32..4096) {
        let cb = Codebook::for_order(40, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let est: Vec<f64> = (0..40).map(|_| rng.random_range(-2048i32..2048) as f64 / 1024.0).collect();
        let shifted: Vec<f64> = est.iter().map(|e| e + dc as f64 / 1024.0).collect();
        prop_assert_eq!(correlate(&est, &cb).unwrap(), correlate(&shifted, &cb).unwrap());
        prop_assert_eq!(demodulate_symbol(&est, &cb).unwrap(), demodulate_symbol(&shifted, &cb).unwrap());
    }
}
