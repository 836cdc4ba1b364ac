//! Comparison attacks: Gaussian jamming, a gradient-based universal
//! perturbation, and a penalized C&W-style perturbation.
//!
//! The universal and C&W bodies are SIMPLIFIED stand-ins (the benchmark
//! methods they stand in for are not specified end to end anywhere we can
//! reproduce); they are labeled as such in artifact metadata. All three emit
//! raw perturbations through the same artifact container and PNR scaling path
//! as the trained generator, so BLER comparisons share one power accounting.


use crate::advgan::{AttackArtifact, AttackKind, AttackPayload, GanDataset};
use crate::autoenc::{AutoencoderModel, CODE_LENGTH, NUM_MESSAGES};
use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::seed::substream;
use crate::tensor::Tensor;

/// Deployment-time Gaussian jamming: i.i.d. N(0,1) rows, PNR-scaled later.
pub fn jamming_artifact<T: Scalar>() -> AttackArtifact<T> {
    AttackArtifact {
        payload: AttackPayload::Jamming,
        meta: vec![("simplified".into(), "false".into())],
    }
}

#[derive(Debug, Clone)]
pub struct BaselineAttackConfig {
    /// Received-signal samples used to fit the fixed direction.
    pub dataset_size: usize,
    pub iters: usize,
    /// Ascent step of the universal sign iteration.
    pub step: f64,
    /// Gradient-descent rate of the C&W-style optimization.
    pub lr: f64,
    /// Weight of the decoder-loss reward in the C&W-style objective.
    pub kappa: f64,
    pub train_snrs_db: Vec<f64>,
}

impl Default for BaselineAttackConfig {
    fn default() -> Self {
        Self {
            dataset_size: 4096,
            iters: 75,
            step: 0.05,
            lr: 0.01,
            kappa: 1.0,
            train_snrs_db: vec![0.0, 4.0, 8.0],
        }
    }
}

fn normalize_to_root_block<T: Scalar>(p: &mut Tensor<T>) {
    // Unit average symbol power for a 7-vector means an L2 norm of √7.
    let norm = p
        .values()
        .iter()
        .map(|v| *v * *v)
        .sum::<T>()
        .sqrt();
    if norm > T::zero() {
        let target = real::<T>((CODE_LENGTH as f64).sqrt());
        p.scale(target / norm);
    }
}

/// Mean cross-entropy of the frozen decoder at `received + p`, together with
/// the mean input gradient over the batch. The decoder clone accumulates and
/// then discards its own parameter gradients.
fn decoder_loss_and_mean_grad<T: Scalar>(
    decoder: &mut crate::nn::LayerStack<T>,
    received: &Tensor<T>,
    labels: &[u8],
    p: &Tensor<T>,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(T, Tensor<T>)> {
    let n = received.batch();
    let mut fake = received.clone();
    for bi in 0..n {
        for (f, pv) in fake.row_mut(bi).iter_mut().zip(p.values()) {
            *f += *pv;
        }
    }
    let log_probs = decoder.forward_t(&fake, rng)?;
    let inv_n = T::one() / real::<T>(n as f64);
    let mut loss = T::zero();
    let mut dlp = vec![T::zero(); log_probs.len()];
    for (bi, label) in labels.iter().enumerate() {
        loss -= log_probs.row(bi)[*label as usize];
        dlp[bi * NUM_MESSAGES + *label as usize] = -inv_n;
    }
    loss *= inv_n;
    let grad = decoder.backward(&Tensor::new(log_probs.shape().to_vec(), dlp)?)?;
    decoder.zero_grad();

    let mut mean = vec![T::zero(); CODE_LENGTH];
    for bi in 0..n {
        for (m, g) in mean.iter_mut().zip(grad.row(bi)) {
            *m += *g * inv_n;
        }
    }
    Ok((loss, Tensor::new(vec![CODE_LENGTH], mean)?))
}

/// Fixed unit-power direction that maximizes the decoder's average loss:
/// `p ← normalize(p + step·mean_batch sign(∂loss/∂r at r+p))`, the whole
/// dataset serving as the batch each iteration.
pub fn universal_grad_perturbation<T: Scalar>(
    victim: &AutoencoderModel<T>,
    dataset: &GanDataset<T>,
    iters: usize,
    step: f64,
    seed: u64,
) -> Result<Tensor<T>> {
    let mut rng = substream(seed, "universal-init", 0);
    let mut p = Tensor::<T>::randn(vec![CODE_LENGTH], &mut rng);
    normalize_to_root_block(&mut p);
    if iters == 0 {
        return Ok(p);
    }

    let mut decoder = victim.decoder.clone();
    let step_t = real::<T>(step);
    let n = dataset.received.batch();
    let inv_n = T::one() / real::<T>(n as f64);
    for _ in 0..iters {
        let mut fake = dataset.received.clone();
        for bi in 0..n {
            for (f, pv) in fake.row_mut(bi).iter_mut().zip(p.values()) {
                *f += *pv;
            }
        }
        let log_probs = decoder.forward_t(&fake, &mut rng)?;
        let mut dlp = vec![T::zero(); log_probs.len()];
        for (bi, label) in dataset.labels.iter().enumerate() {
            dlp[bi * NUM_MESSAGES + *label as usize] = -inv_n;
        }
        let grad = decoder.backward(&Tensor::new(log_probs.shape().to_vec(), dlp)?)?;
        decoder.zero_grad();

        // Mean of elementwise gradient signs over the batch.
        let mut direction = vec![T::zero(); CODE_LENGTH];
        for bi in 0..n {
            for (d, g) in direction.iter_mut().zip(grad.row(bi)) {
                *d += g.signum() * inv_n;
            }
        }
        for (pv, d) in p.values_mut().iter_mut().zip(&direction) {
            *pv += step_t * *d;
        }
        normalize_to_root_block(&mut p);
        p.check_finite("universal_grad_perturbation")?;
    }
    Ok(p)
}

/// Penalized fixed-vector optimization: full-batch gradient descent on
/// `J(p) = ‖p‖² − κ·mean decoder loss at r+p`. Returns the vector and the
/// per-iteration objective trace (length `iters + 1`).
pub fn cw_style_perturbation<T: Scalar>(
    victim: &AutoencoderModel<T>,
    dataset: &GanDataset<T>,
    iters: usize,
    lr: f64,
    kappa: f64,
    seed: u64,
) -> Result<(Tensor<T>, Vec<f64>)> {
    let mut rng = substream(seed, "cw-init", 0);
    let mut p = Tensor::<T>::randn(vec![CODE_LENGTH], &mut rng);
    p.scale(real::<T>(0.1));

    let mut decoder = victim.decoder.clone();
    let lr_t = real::<T>(lr);
    let kappa_t = real::<T>(kappa);
    let two = real::<T>(2.0);

    let objective = |loss: T, p: &Tensor<T>| -> f64 {
        let norm_sq: T = p.values().iter().map(|v| *v * *v).sum();
        (norm_sq - kappa_t * loss).to_f64().unwrap()
    };

    let (loss, _) = decoder_loss_and_mean_grad(&mut decoder, &dataset.received, &dataset.labels, &p, &mut rng)?;
    let mut trace = vec![objective(loss, &p)];

    for _ in 0..iters {
        let (_, mean_grad) =
            decoder_loss_and_mean_grad(&mut decoder, &dataset.received, &dataset.labels, &p, &mut rng)?;
        for (pv, g) in p.values_mut().iter_mut().zip(mean_grad.values()) {
            // ∂J/∂p = 2p − κ·mean ∂loss/∂r.
            *pv -= lr_t * (two * *pv - kappa_t * *g);
        }
        p.check_finite("cw_style_perturbation")?;
        let (loss, _) =
            decoder_loss_and_mean_grad(&mut decoder, &dataset.received, &dataset.labels, &p, &mut rng)?;
        trace.push(objective(loss, &p));
    }
    Ok((p, trace))
}

/// Builds a kind-tagged baseline artifact against a frozen victim.
pub fn train_baseline_artifact<T: Scalar>(
    kind: AttackKind,
    cfg: &BaselineAttackConfig,
    victim: &AutoencoderModel<T>,
    channel_template: &crate::channel::ChannelModel,
    seed: u64,
) -> Result<AttackArtifact<T>> {
    let simplified_meta = |vector_seed: u64| {
        vec![
            ("simplified".into(), "true".into()),
            ("dataset_seed".into(), vector_seed.to_string()),
            (
                "train_snrs_db".into(),
                cfg.train_snrs_db
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        ]
    };
    match kind {
        AttackKind::Jamming => Ok(jamming_artifact()),
        AttackKind::UniversalGrad => {
            let dataset = crate::advgan::build_dataset(
                victim,
                channel_template,
                &cfg.train_snrs_db,
                cfg.dataset_size,
                seed,
            )?;
            let vector =
                universal_grad_perturbation(victim, &dataset, cfg.iters, cfg.step, seed)?;
            Ok(AttackArtifact {
                payload: AttackPayload::Fixed {
                    kind: AttackKind::UniversalGrad,
                    vector,
                },
                meta: simplified_meta(seed),
            })
        }
        AttackKind::CwStyle => {
            let dataset = crate::advgan::build_dataset(
                victim,
                channel_template,
                &cfg.train_snrs_db,
                cfg.dataset_size,
                seed,
            )?;
            let (vector, _trace) =
                cw_style_perturbation(victim, &dataset, cfg.iters, cfg.lr, cfg.kappa, seed)?;
            Ok(AttackArtifact {
                payload: AttackPayload::Fixed {
                    kind: AttackKind::CwStyle,
                    vector,
                },
                meta: simplified_meta(seed),
            })
        }
        AttackKind::Gan => Err(Error::InvalidConfig(
            "the gan attack is trained by train_attack, not as a baseline".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_dataset(victim: &AutoencoderModel<f64>) -> GanDataset<f64> {
        crate::advgan::build_dataset(victim, &ChannelModel::awgn(6.0), &[6.0], 256, 3).unwrap()
    }

    #[test]
    fn jamming_rows_have_unit_empirical_power() {
        let artifact = jamming_artifact::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = crate::advgan::generate_perturbation(&artifact, 50_000, &mut rng).unwrap();
        let power = p.mean_square();
        assert!((power - 1.0).abs() < 0.01, "power {power}");

        let mut a = ChaCha8Rng::seed_from_u64(2);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        let pa = crate::advgan::generate_perturbation(&artifact, 8, &mut a).unwrap();
        let pb = crate::advgan::generate_perturbation(&artifact, 8, &mut b).unwrap();
        assert_eq!(pa.values(), pb.values());
    }

    #[test]
    fn universal_direction_is_unit_power_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let victim = AutoencoderModel::<f64>::init(&mut rng);
        let dataset = tiny_dataset(&victim);

        let p = universal_grad_perturbation(&victim, &dataset, 5, 0.05, 7).unwrap();
        let norm: f64 = p.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 7f64.sqrt()).abs() < 1e-9, "norm {norm}");

        // Zero iterations: the seeded initial direction, reproducibly.
        let p0a = universal_grad_perturbation(&victim, &dataset, 0, 0.05, 9).unwrap();
        let p0b = universal_grad_perturbation(&victim, &dataset, 0, 0.05, 9).unwrap();
        assert_eq!(p0a.values(), p0b.values());
        let p0c = universal_grad_perturbation(&victim, &dataset, 0, 0.05, 10).unwrap();
        assert_ne!(p0a.values(), p0c.values());
    }

    #[test]
    fn cw_with_zero_kappa_decays_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let victim = AutoencoderModel::<f64>::init(&mut rng);
        let dataset = tiny_dataset(&victim);
        let (p, trace) = cw_style_perturbation(&victim, &dataset, 300, 0.01, 0.0, 11).unwrap();
        let norm: f64 = p.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "norm {norm}");
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn cw_objective_decreases_monotonically_with_small_lr() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let victim = AutoencoderModel::<f64>::init(&mut rng);
        let dataset = tiny_dataset(&victim);
        let (_, trace) = cw_style_perturbation(&victim, &dataset, 40, 0.005, 1.0, 12).unwrap();
        assert!(
            trace.windows(2).all(|w| w[1] <= w[0] + 1e-9),
            "trace {trace:?}"
        );

        let (pa, _) = cw_style_perturbation(&victim, &dataset, 10, 0.005, 1.0, 12).unwrap();
        let (pb, _) = cw_style_perturbation(&victim, &dataset, 10, 0.005, 1.0, 12).unwrap();
        assert_eq!(pa.values(), pb.values());
    }

    #[test]
    fn baseline_artifacts_are_kind_tagged_and_simplified() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let victim = AutoencoderModel::<f64>::init(&mut rng);
        let cfg = BaselineAttackConfig {
            dataset_size: 128,
            iters: 3,
            ..BaselineAttackConfig::default()
        };
        let channel = ChannelModel::awgn(6.0);
        for kind in [AttackKind::Jamming, AttackKind::UniversalGrad, AttackKind::CwStyle] {
            let artifact = train_baseline_artifact(kind, &cfg, &victim, &channel, 5).unwrap();
            assert_eq!(artifact.kind(), kind);
        }
        assert!(
            train_baseline_artifact(AttackKind::Gan, &cfg, &victim, &channel, 5).is_err()
        );
    }
}
