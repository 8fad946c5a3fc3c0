use mary_walsh::codebook::Codebook;
use mary_walsh::fec::*;
use mary_walsh::receiver::correlate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::sync::OnceLock;

fn default_code() -> &'static LdpcCode {
    static CODE: OnceLock<LdpcCode> = OnceLock::new();
    CODE.get_or_init(|| LdpcCode::build_gallager(240, 3, 6, 1).unwrap())
}

fn to_llrs(codeword: &[u8], magnitude: f64) -> Vec<f64> {
    codeword
        .iter()
        .map(|&b| if b == 0 { magnitude } else { -magnitude })
        .collect()
}

#[test]
fn toy_code_corrects_every_single_flip() {
    let code = LdpcCode::build_gallager(24, 3, 6, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let cw = code.encode(&info).unwrap();
        for pos in 0..code.n() {
            let mut llrs = to_llrs(&cw, 4.0);
            llrs[pos] = -llrs[pos];
            let out = code.decode(&llrs, DEFAULT_MAX_ITERATIONS).unwrap();
            assert!(out.converged, "flip at {pos} did not converge");
            assert_eq!(out.bits, cw, "flip at {pos}");
        }
    }
}

#[test]
fn default_code_corrects_every_single_flip() {
    let code = default_code();
    let cw = code.encode(&vec![1; code.k()]).unwrap();
    for pos in 0..code.n() {
        let mut llrs = to_llrs(&cw, 4.0);
        llrs[pos] = -llrs[pos];
        assert_eq!(code.decode(&llrs, DEFAULT_MAX_ITERATIONS).unwrap().bits, cw);
    }
}

/// Exact log-domain bit marginals for the same scoring convention: word `w`
/// has log-likelihood `2·score(w)/σ²` up to a common constant.
fn exact_bit_llrs(metrics: &[f64], noise_variance: f64) -> Vec<f64> {
    let half = metrics.len();
    let bits = half.trailing_zeros() as usize + 1;
    let log_lik = |w: usize| {
        let m = metrics[w & (half - 1)];
        2.0 * if w & half != 0 { -m } else { m } / noise_variance
    };
    let lse = |xs: Vec<f64>| {
        let top = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
    };
    (0..bits)
        .map(|b| {
            let mask = 1 << (bits - 1 - b);
            let zero = lse((0..2 * half).filter(|w| w & mask == 0).map(log_lik).collect());
            let one = lse((0..2 * half).filter(|w| w & mask != 0).map(log_lik).collect());
            zero - one
        })
        .collect()
}

#[test]
fn max_log_tracks_exact_marginal() {
    let cb = Codebook::for_order(12, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for snr_db in [6.0, 8.0, 10.0] {
        // symbol energy over complex noise density per chip estimate
        let sigma2 = 12.0 / 10f64.powf(snr_db / 10.0);
        let noise = Normal::new(0.0, (sigma2 / 2.0).sqrt()).unwrap();
        let (mut total, mut count, mut agree) = (0.0, 0usize, 0usize);
        let trials = 5000;
        for _ in 0..trials {
            let word = rng.random_range(0..16u32);
            let chips = cb.encode_bits(word).unwrap();
            let est: Vec<f64> = chips
                .chips()
                .iter()
                .map(|&c| c as f64 + noise.sample(&mut rng))
                .collect();
            let metrics = correlate(&est, &cb).unwrap();
            let approx = symbol_llrs_to_bit_llrs(&metrics, sigma2).unwrap();
            let exact = exact_bit_llrs(&metrics, sigma2);
            for (a, e) in approx.iter().zip(&exact) {
                total += (a - e).abs();
                count += 1;
                agree += (a.signum() == e.signum()) as usize;
            }
        }
        let mean = total / count as f64;
        assert!(mean <= 0.7, "{snr_db} dB: mean |max-log - exact| = {mean}");
        assert!(agree as f64 / count as f64 > 0.98, "{snr_db} dB sign agreement");
    }
}

#[test]
fn clean_metrics_match_word_bits() {
    let cb = Codebook::for_order(20, 5).unwrap();
    for word in 0..32u32 {
        let est = cb.encode_bits(word).unwrap().to_f64();
        let llrs = symbol_llrs_to_bit_llrs(&correlate(&est, &cb).unwrap(), 0.5).unwrap();
        assert_eq!(llrs.len(), 5);
        for (b, l) in llrs.iter().enumerate() {
            let bit = (word >> (4 - b)) & 1;
            assert_eq!(*l > 0.0, bit == 0, "word {word} bit {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encodings_have_zero_syndrome(seed in any::<u64>()) {
        let code = default_code();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let cw = code.encode(&info).unwrap();
        prop_assert_eq!(&cw[..code.k()], &info[..]);
        prop_assert!(code.syndrome(&cw).iter().all(|&s| s == 0));
    }

    #[test]
    fn codewords_are_closed_under_addition(a in any::<u64>(), b in any::<u64>()) {
        let code = default_code();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            code.encode(&(0..code.k()).map(|_| rng.random_range(0..2)).collect::<Vec<u8>>()).unwrap()
        };
        let sum: Vec<u8> = draw(a).iter().zip(draw(b)).map(|(x, y)| x ^ y).collect();
        prop_assert!(code.is_codeword(&sum));
    }

    #[test]
    fn clean_codeword_is_a_fixed_point(seed in any::<u64>(), mag in 0.1..20.0f64) {
        let code = default_code();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cw = code.encode(&(0..code.k()).map(|_| rng.random_range(0..2)).collect::<Vec<u8>>()).unwrap();
        let out = code.decode(&to_llrs(&cw, mag), DEFAULT_MAX_ITERATIONS).unwrap();
        prop_assert!(out.converged);
        prop_assert_eq!(out.iterations, 0);
        prop_assert_eq!(out.bits, cw);
    }

    #[test]
    fn word_grouping_round_trips(bits in proptest::collection::vec(0u8..2, 0..64), k in 1u32..7) {
        let words = bits_to_words(&bits, k);
        let back = words_to_bits(&words, k);
        prop_assert_eq!(&back[..bits.len()], &bits[..]);
        prop_assert!(back[bits.len()..].iter().all(|&b| b == 0));
    }
}
