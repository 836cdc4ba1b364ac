//! Stochastic channel models with a fixed SNR convention.
//!
//! Symbols are normalized to unit average power, so the per-symbol noise
//! variance is `σ² = 10^(−SNR_dB/10)`. Fading draws are i.i.d. per symbol and
//! per block (fast fading); the fading *amplitude* `|h|` multiplies each real
//! symbol, which keeps the receiver input dimension unchanged and is the
//! phase-agnostic equivalent of a complex single-tap channel.
//!
//! The diffuse component is scaled so that `E[|h|²] = 1` for both Rayleigh
//! and Rician fading at any K; without that normalization the effective SNR
//! would silently shift by up to 3 dB.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::tensor::Tensor;

/// Mean Rician K factor of the suburban high-speed-railway link, in dB.
pub const RICIAN_K_MEAN_DB: f64 = 2.83;
/// Two-slope K(d) model coefficients (dB domain) and breakpoint distance.
pub const RICIAN_ZETA1: f64 = -0.027;
pub const RICIAN_ZETA2: f64 = 8.48;
pub const RICIAN_ZETA3: f64 = -0.0023;
pub const RICIAN_ZETA4: f64 = 4.024;
pub const RICIAN_BREAKPOINT_M: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    RayleighFast,
    RicianHsr,
}

impl ChannelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::RayleighFast => "rayleigh",
            ChannelKind::RicianHsr => "rician",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::RayleighFast),
            "rician" => Ok(ChannelKind::RicianHsr),
            other => Err(Error::InvalidConfig(format!(
                "unknown channel kind `{other}` (expected awgn|rayleigh|rician)"
            ))),
        }
    }
}

/// Rician parameterization. Resolution order for K: fixed override,
/// distance-dependent two-slope model, mean value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianConfig {
    pub k_mean_db: f64,
    pub distance_m: Option<f64>,
    pub k_override_db: Option<f64>,
}

impl Default for RicianConfig {
    fn default() -> Self {
        Self {
            k_mean_db: RICIAN_K_MEAN_DB,
            distance_m: None,
            k_override_db: None,
        }
    }
}

/// Two-slope K(d) in dB: `ζ₁·d + ζ₂` up to the breakpoint, `ζ₃·d + ζ₄`
/// beyond it.
pub fn rician_k_factor_db(distance_m: f64) -> f64 {
    if distance_m <= RICIAN_BREAKPOINT_M {
        RICIAN_ZETA1 * distance_m + RICIAN_ZETA2
    } else {
        RICIAN_ZETA3 * distance_m + RICIAN_ZETA4
    }
}

/// Rician K as a linear power ratio; without a distance the mean value
/// (2.83 dB) applies.
pub fn rician_k_factor(distance_m: Option<f64>) -> f64 {
    let db = match distance_m {
        Some(d) => rician_k_factor_db(d),
        None => RICIAN_K_MEAN_DB,
    };
    10f64.powf(db / 10.0)
}

/// `|h|` for `h = (ψ₁ + jψ₂)/√2`, ψᵢ ~ N(0,1); Rayleigh with `E[|h|²] = 1`.
pub fn draw_rayleigh_amplitude<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let a = T::standard_normal(rng);
    let b = T::standard_normal(rng);
    ((a * a + b * b) / real::<T>(2.0)).sqrt()
}

/// `|h|` for `h = √(K/(K+1)) + √(1/(2(K+1)))·(ψ₁ + jψ₂)`; `E[|h|²] = 1`.
pub fn draw_rician_amplitude<T: Scalar, R: Rng + ?Sized>(k_linear: f64, rng: &mut R) -> T {
    debug_assert!(k_linear >= 0.0);
    let los = real::<T>((k_linear / (k_linear + 1.0)).sqrt());
    let sigma = real::<T>((1.0 / (2.0 * (k_linear + 1.0))).sqrt());
    let re = los + sigma * T::standard_normal(rng);
    let im = sigma * T::standard_normal(rng);
    (re * re + im * im).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub snr_db: f64,
    pub rician: RicianConfig,
}

impl ChannelModel {
    pub fn awgn(snr_db: f64) -> Self {
        Self {
            kind: ChannelKind::Awgn,
            snr_db,
            rician: RicianConfig::default(),
        }
    }

    pub fn rayleigh(snr_db: f64) -> Self {
        Self {
            kind: ChannelKind::RayleighFast,
            snr_db,
            rician: RicianConfig::default(),
        }
    }

    pub fn rician(snr_db: f64, rician: RicianConfig) -> Self {
        Self {
            kind: ChannelKind::RicianHsr,
            snr_db,
            rician,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    /// `σ² = 10^(−SNR_dB/10)` under unit average symbol power; an infinite
    /// SNR is the noiseless sentinel (σ² = 0).
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }

    /// Effective K for the Rician kind, as a linear ratio.
    pub fn k_factor_linear(&self) -> f64 {
        if let Some(db) = self.rician.k_override_db {
            return 10f64.powf(db / 10.0);
        }
        match self.rician.distance_m {
            Some(d) => 10f64.powf(rician_k_factor_db(d) / 10.0),
            None => 10f64.powf(self.rician.k_mean_db / 10.0),
        }
    }

    fn draw_amplitude<T: Scalar, R: Rng + ?Sized>(&self, k_linear: f64, rng: &mut R) -> T {
        match self.kind {
            ChannelKind::Awgn => T::one(),
            ChannelKind::RayleighFast => draw_rayleigh_amplitude(rng),
            ChannelKind::RicianHsr => draw_rician_amplitude(k_linear, rng),
        }
    }

    /// `r = |h| ⊙ s + n`. Per entry, the fading amplitude is drawn first and
    /// the noise sample second (fixed order, so streams are reproducible).
    pub fn apply<T: Scalar, R: Rng + ?Sized>(
        &self,
        s: &Tensor<T>,
        rng: &mut R,
    ) -> Result<Tensor<T>> {
        Ok(self.apply_detailed(s, rng)?.0)
    }

    /// As [`Self::apply`], additionally returning the drawn amplitudes
    /// (all ones for AWGN). End-to-end training backpropagates through the
    /// channel by scaling the received-signal gradient with these amplitudes.
    pub fn apply_detailed<T: Scalar, R: Rng + ?Sized>(
        &self,
        s: &Tensor<T>,
        rng: &mut R,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        s.check_finite("channel.apply")?;
        let sigma = real::<T>(self.noise_variance().sqrt());
        let k_linear = self.k_factor_linear();
        let noiseless = self.noise_variance() == 0.0;

        let mut amps = Tensor::filled(s.shape().to_vec(), T::one());
        let mut out = s.clone();
        for (ri, ai) in out.values_mut().iter_mut().zip(amps.values_mut()) {
            if self.kind != ChannelKind::Awgn {
                *ai = self.draw_amplitude(k_linear, rng);
                *ri *= *ai;
            }
            if !noiseless {
                *ri += sigma * T::standard_normal(rng);
            }
        }
        out.check_finite("channel.apply")?;
        Ok((out, amps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_sq(xs: impl Iterator<Item = f64>) -> (f64, usize) {
        let mut sum = 0.0;
        let mut n = 0;
        for x in xs {
            sum += x * x;
            n += 1;
        }
        (sum / n as f64, n)
    }

    #[test]
    fn noiseless_awgn_is_identity() {
        let ch = ChannelModel::awgn(f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Tensor::<f64>::randn(vec![4, 7], &mut rng);
        let r = ch.apply(&s, &mut rng).unwrap();
        assert_eq!(r.values(), s.values());
    }

    #[test]
    fn awgn_noise_variance_tracks_snr() {
        // At 0 dB the convention gives σ² = 1 exactly.
        let ch = ChannelModel::awgn(0.0);
        assert_eq!(ch.noise_variance(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Tensor::<f64>::zeros(vec![20_000, 7]);
        let r = ch.apply(&s, &mut rng).unwrap();
        let (p, n) = mean_sq(r.values().iter().copied());
        // 3σ bound for the variance of a sample variance: √(2/n)·σ².
        let bound = 3.0 * (2.0 / n as f64).sqrt();
        assert!((p - 1.0).abs() < bound, "measured {p}");
    }

    #[test]
    fn rayleigh_amplitude_has_unit_mean_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p, _) = mean_sq((0..100_000).map(|_| draw_rayleigh_amplitude::<f64, _>(&mut rng)));
        assert!((p - 1.0).abs() < 0.02, "E|h|^2 = {p}");
    }

    #[test]
    fn rician_amplitude_has_unit_mean_power_at_any_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in [0.0, 1.918, 50.0] {
            let (p, _) =
                mean_sq((0..100_000).map(|_| draw_rician_amplitude::<f64, _>(k, &mut rng)));
            assert!((p - 1.0).abs() < 0.02, "K={k}: E|h|^2 = {p}");
        }
    }

    #[test]
    fn k_limits_reduce_to_rayleigh_and_los() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // K → ∞: |h| → 1 (no fading).
        for _ in 0..100 {
            let a: f64 = draw_rician_amplitude(1e6, &mut rng);
            assert!((a - 1.0).abs() < 0.01, "LOS limit broken: {a}");
        }
    }

    #[test]
    fn mean_k_factor_matches_quoted_value() {
        // 2.83 dB → ≈ 1.918 linear (exactly 1.91867).
        let k = rician_k_factor(None);
        assert!((k - 1.9186687406702896).abs() < 1e-12, "{k}");
        assert!((k - 1.918).abs() < 1e-3, "{k}");
    }

    #[test]
    fn two_slope_k_is_continuous_in_pieces() {
        // Below the breakpoint the first slope applies, above it the second.
        assert_eq!(rician_k_factor_db(100.0), RICIAN_ZETA1 * 100.0 + RICIAN_ZETA2);
        assert_eq!(rician_k_factor_db(500.0), RICIAN_ZETA3 * 500.0 + RICIAN_ZETA4);
        // At the breakpoint itself the first branch is used.
        assert_eq!(
            rician_k_factor_db(RICIAN_BREAKPOINT_M),
            RICIAN_ZETA1 * RICIAN_BREAKPOINT_M + RICIAN_ZETA2
        );
    }

    #[test]
    fn identical_seeds_give_identical_outputs() {
        let ch = ChannelModel::rayleigh(6.0);
        let s = Tensor::<f64>::filled(vec![8, 7], 0.5);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let ra = ch.apply(&s, &mut a).unwrap();
        let rb = ch.apply(&s, &mut b).unwrap();
        assert_eq!(ra.values(), rb.values());
    }

    #[test]
    fn awgn_is_additive_in_the_signal() {
        // With the same noise realization, apply(s1+s2) == apply(s1) + s2.
        let ch = ChannelModel::awgn(3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s1 = Tensor::<f64>::randn(vec![4, 7], &mut rng);
        let s2 = Tensor::<f64>::randn(vec![4, 7], &mut rng);
        let sum = Tensor::new(
            vec![4, 7],
            s1.values()
                .iter()
                .zip(s2.values())
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let mut ra = ChaCha8Rng::seed_from_u64(11);
        let mut rb = ChaCha8Rng::seed_from_u64(11);
        let r1 = ch.apply(&s1, &mut ra).unwrap();
        let r12 = ch.apply(&sum, &mut rb).unwrap();
        for ((a, b), s) in r1.values().iter().zip(r12.values()).zip(s2.values()) {
            assert!((a + s - b).abs() < 1e-12);
        }
    }

    #[test]
    fn k_override_beats_distance() {
        let ch = ChannelModel::rician(
            10.0,
            RicianConfig {
                k_mean_db: RICIAN_K_MEAN_DB,
                distance_m: Some(350.0),
                k_override_db: Some(0.0),
            },
        );
        assert_eq!(ch.k_factor_linear(), 1.0);
    }
}
