//! Classical baselines: BPSK modulation, the (7,4) Hamming code with
//! hard-decision syndrome decoding, and closed-form AWGN block error rates.
//!
//! Codeword layout is systematic: `[d₁ d₂ d₃ d₄ p₁ p₂ p₃]` with
//! `p₁ = d₁⊕d₂⊕d₃`, `p₂ = d₁⊕d₂⊕d₄`, `p₃ = d₁⊕d₃⊕d₄`. Every single-bit error
//! has a unique syndrome; double errors miscorrect, as hard-decision Hamming
//! does.
//!
//! Baselines keep unit energy per transmitted symbol and plot against the
//! same per-symbol SNR axis as the autoencoder, under the complex-baseband
//! reading: total noise power is `σ² = 10^(−SNR/10)` per symbol, of which the
//! in-phase half (`σ²/2`) lands on the BPSK decision statistic. That is what
//! makes the simulated error rate equal the textbook `Q(√(2·Es/N₀))`.

use crate::bler::{parallel_blocks, BlerEstimate};
use crate::channel::{draw_rayleigh_amplitude, draw_rician_amplitude, ChannelKind, ChannelModel};
use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::seed::substream;
use rand::Rng;

/// Syndrome (s₁s₂s₃ as an index) → codeword position to flip; 0 means clean.
const SYNDROME_FLIP: [Option<usize>; 8] = [
    None,    // 000
    Some(6), // 001 → p₃
    Some(5), // 010 → p₂
    Some(3), // 011 → d₄
    Some(4), // 100 → p₁
    Some(2), // 101 → d₃
    Some(1), // 110 → d₂
    Some(0), // 111 → d₁
];

/// BPSK mapping: bit 0 → +1, bit 1 → −1.
pub fn bpsk_modulate<T: Scalar>(bits: &[u8]) -> Vec<T> {
    bits.iter()
        .map(|b| if *b == 0 { T::one() } else { -T::one() })
        .collect()
}

/// Sign demodulation; an exact 0 resolves to bit 0.
pub fn bpsk_demodulate<T: Scalar>(symbols: &[T]) -> Vec<u8> {
    symbols
        .iter()
        .map(|s| if *s < T::zero() { 1 } else { 0 })
        .collect()
}

pub fn hamming_encode(data: [u8; 4]) -> [u8; 7] {
    let [d1, d2, d3, d4] = data;
    [
        d1,
        d2,
        d3,
        d4,
        d1 ^ d2 ^ d3,
        d1 ^ d2 ^ d4,
        d1 ^ d3 ^ d4,
    ]
}

/// Hard-decision syndrome decoding; corrects any single-bit error.
pub fn hamming_decode(code: [u8; 7]) -> [u8; 4] {
    let [d1, d2, d3, d4, p1, p2, p3] = code;
    let s1 = p1 ^ d1 ^ d2 ^ d3;
    let s2 = p2 ^ d1 ^ d2 ^ d4;
    let s3 = p3 ^ d1 ^ d3 ^ d4;
    let syndrome = ((s1 as usize) << 2) | ((s2 as usize) << 1) | (s3 as usize);
    let mut fixed = code;
    if let Some(pos) = SYNDROME_FLIP[syndrome] {
        fixed[pos] ^= 1;
    }
    [fixed[0], fixed[1], fixed[2], fixed[3]]
}

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Four uncoded BPSK symbols per block.
    UncodedBpskK4,
    /// (7,4) Hamming code over BPSK, hard-decision decoding.
    Hamming74Bpsk,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::UncodedBpskK4 => "uncoded",
            Scheme::Hamming74Bpsk => "hamming",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uncoded" => Ok(Scheme::UncodedBpskK4),
            "hamming" => Ok(Scheme::Hamming74Bpsk),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheme `{other}` (expected uncoded|hamming)"
            ))),
        }
    }
}

/// Closed-form AWGN block error rate.
///
/// With unit symbol energy, `p = Q(√(2·Es/N₀))` per BPSK symbol. Uncoded:
/// `1 − (1−p)⁴`; Hamming(7,4) hard decision: `1 − (1−p)⁷ − 7p(1−p)⁶`.
pub fn analytic_bler(scheme: Scheme, channel_kind: ChannelKind, snr_db: f64) -> Result<f64> {
    if channel_kind != ChannelKind::Awgn {
        return Err(Error::InvalidConfig(
            "closed-form BLER is defined for the AWGN channel only; use Monte Carlo for fading"
                .into(),
        ));
    }
    let es_n0 = 10f64.powf(snr_db / 10.0);
    let p = q_function((2.0 * es_n0).sqrt());
    Ok(match scheme {
        Scheme::UncodedBpskK4 => 1.0 - (1.0 - p).powi(4),
        Scheme::Hamming74Bpsk => 1.0 - (1.0 - p).powi(7) - 7.0 * p * (1.0 - p).powi(6),
    })
}

fn simulate_chunk<T: Scalar, R: Rng + ?Sized>(
    scheme: Scheme,
    channel: &ChannelModel,
    blocks: u64,
    rng: &mut R,
) -> u64 {
    // In-phase noise component on the matched-filter output.
    let sigma_i = real::<T>((channel.noise_variance() / 2.0).sqrt());
    let noiseless = channel.noise_variance() == 0.0;
    let k_linear = channel.k_factor_linear();

    let mut errors = 0;
    for _ in 0..blocks {
        let data: [u8; 4] = [
            rng.gen_range(0..2u8),
            rng.gen_range(0..2u8),
            rng.gen_range(0..2u8),
            rng.gen_range(0..2u8),
        ];
        let tx_bits: Vec<u8> = match scheme {
            Scheme::UncodedBpskK4 => data.to_vec(),
            Scheme::Hamming74Bpsk => hamming_encode(data).to_vec(),
        };
        let mut symbols: Vec<T> = bpsk_modulate(&tx_bits);
        for s in &mut symbols {
            let amp: T = match channel.kind {
                ChannelKind::Awgn => T::one(),
                ChannelKind::RayleighFast => draw_rayleigh_amplitude(rng),
                ChannelKind::RicianHsr => draw_rician_amplitude(k_linear, rng),
            };
            *s = *s * amp;
            if !noiseless {
                *s += sigma_i * T::standard_normal(rng);
            }
        }
        let rx_bits = bpsk_demodulate(&symbols);
        let decoded: [u8; 4] = match scheme {
            Scheme::UncodedBpskK4 => [rx_bits[0], rx_bits[1], rx_bits[2], rx_bits[3]],
            Scheme::Hamming74Bpsk => {
                hamming_decode(rx_bits.as_slice().try_into().expect("7 bits"))
            }
        };
        if decoded != data {
            errors += 1;
        }
    }
    errors
}

/// Monte Carlo BLER of a classical scheme over any channel kind.
/// Deterministic in (scheme, channel, n_blocks, seed).
pub fn simulate_bler<T: Scalar>(
    scheme: Scheme,
    channel: &ChannelModel,
    n_blocks: u64,
    seed: u64,
) -> BlerEstimate {
    parallel_blocks(n_blocks, |ci, blocks| {
        let mut rng = substream(seed, "classical", ci);
        simulate_chunk::<T, _>(scheme, channel, blocks, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_mapping_and_sign_rule() {
        assert_eq!(bpsk_modulate::<f64>(&[0, 1]), vec![1.0, -1.0]);
        assert_eq!(bpsk_demodulate(&[0.3f64, -0.0001]), vec![0, 1]);
        assert_eq!(bpsk_demodulate(&[0.0f64]), vec![0]);
        for bits in 0..16u8 {
            let b = [(bits >> 3) & 1, (bits >> 2) & 1, (bits >> 1) & 1, bits & 1];
            assert_eq!(bpsk_demodulate(&bpsk_modulate::<f64>(&b)), b.to_vec());
        }
    }

    #[test]
    fn zero_codeword_and_parity_example() {
        assert_eq!(hamming_encode([0, 0, 0, 0]), [0, 0, 0, 0, 0, 0, 0]);
        // 1011 → 1011001: p₁=1⊕0⊕1=0, p₂=1⊕0⊕1=0, p₃=1⊕1⊕1=1.
        assert_eq!(hamming_encode([1, 0, 1, 1]), [1, 0, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn exhaustive_single_error_correction() {
        // All 16 data words × (no flip + 7 single flips) = 128 cases.
        for bits in 0..16u8 {
            let data = [(bits >> 3) & 1, (bits >> 2) & 1, (bits >> 1) & 1, bits & 1];
            let code = hamming_encode(data);
            assert_eq!(hamming_decode(code), data);
            for flip in 0..7 {
                let mut corrupted = code;
                corrupted[flip] ^= 1;
                assert_eq!(
                    hamming_decode(corrupted),
                    data,
                    "data {data:?} flip {flip}"
                );
            }
        }
    }

    #[test]
    fn q_function_at_sqrt_two() {
        // Q(√2) ≈ 0.07865.
        assert!((q_function(2f64.sqrt()) - 0.07865).abs() < 5e-6);
    }

    #[test]
    fn analytic_bler_limits() {
        let b0 = analytic_bler(Scheme::UncodedBpskK4, ChannelKind::Awgn, 0.0).unwrap();
        let p = q_function(2f64.sqrt());
        assert!((b0 - (1.0 - (1.0 - p).powi(4))).abs() < 1e-15);

        for scheme in [Scheme::UncodedBpskK4, Scheme::Hamming74Bpsk] {
            let hi = analytic_bler(scheme, ChannelKind::Awgn, 40.0).unwrap();
            assert!(hi < 1e-12, "{hi}");
        }

        assert!(analytic_bler(Scheme::UncodedBpskK4, ChannelKind::RayleighFast, 0.0).is_err());
    }

    #[test]
    fn coding_gain_region() {
        // Hamming beats uncoded analytically for SNR ≥ 3 dB.
        for snr_tenths in 30..=100 {
            let snr = snr_tenths as f64 / 10.0;
            let u = analytic_bler(Scheme::UncodedBpskK4, ChannelKind::Awgn, snr).unwrap();
            let h = analytic_bler(Scheme::Hamming74Bpsk, ChannelKind::Awgn, snr).unwrap();
            assert!(h < u, "snr {snr}: hamming {h} vs uncoded {u}");
        }
    }

    #[test]
    fn monte_carlo_matches_analytic_at_moderate_n() {
        // Smoke-level agreement; the acceptance suite runs 10⁶ blocks.
        for snr in [0.0, 4.0] {
            let channel = ChannelModel::awgn(snr);
            for scheme in [Scheme::UncodedBpskK4, Scheme::Hamming74Bpsk] {
                let est = simulate_bler::<f64>(scheme, &channel, 100_000, 17);
                let formula = analytic_bler(scheme, ChannelKind::Awgn, snr).unwrap();
                assert!(
                    (est.bler() - formula).abs() <= est.three_sigma().max(1e-4),
                    "{scheme:?} at {snr} dB: mc {} vs analytic {formula}",
                    est.bler()
                );
            }
        }
    }

    #[test]
    fn determinism_across_identical_calls() {
        let channel = ChannelModel::awgn(2.0);
        let a = simulate_bler::<f64>(Scheme::Hamming74Bpsk, &channel, 20_000, 5);
        let b = simulate_bler::<f64>(Scheme::Hamming74Bpsk, &channel, 20_000, 5);
        assert_eq!(a, b);
    }
}
