//! WGAN-trained input-agnostic perturbation generator.
//!
//! The generator maps a 5-dimensional Gaussian latent vector to a
//! 7-symbol perturbation; the critic scores received-signal batches with an
//! unbounded Wasserstein estimate, Lipschitz-constrained by clipping every
//! weight to `[−c, c]` after each update. The critic trains on
//! `mean D(r + G(m)) − mean D(r)`; the generator trains on the composite
//!
//! ```text
//! L_G = −λ·D(r + G(m)) + (1−λ)·Σᵢ cᵢ log I(rᵢ + G(mᵢ))
//! ```
//!
//! whose second term is the true-class log-likelihood under the victim's
//! decoder — minimizing it drives misclassification while the first term
//! keeps perturbed samples close to the critic's notion of clean traffic.
//!
//! Perturbations depend only on the latent draw, never on the transmitted
//! signal, so they can be generated ahead of any transmission. Raw generator
//! output is power-scaled to a target perturbation-to-noise ratio only at
//! validation/deployment time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autoenc::{AutoencoderModel, Perturber, CODE_LENGTH, NUM_MESSAGES};
use crate::bler::BlerEstimate;
use crate::channel::ChannelModel;
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::nn::{Conv1d, ConvTranspose1d, Dropout, Layer, LayerStack, LeakyRelu, Linear, Relu, Reshape};
use crate::optim::{clip_weights, max_abs_weight, Optimizer};
use crate::scalar::{real, Scalar};
use crate::seed::substream;
use crate::tensor::Tensor;

pub const LATENT_DIM: usize = 5;

/// Generator: 5 → FC8 → reshape 2×4 → tconv(2→6,k4) → ReLU →
/// conv(6→20,k3,p1) → ReLU → conv(20→1,k3,p1) → flatten 7. 543 parameters.
pub fn build_generator<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> LayerStack<T> {
    LayerStack::new(
        vec![LATENT_DIM],
        vec![
            Layer::Linear(Linear::new(LATENT_DIM, 8, rng)),
            Layer::Reshape(Reshape::new(vec![2, 4])),
            Layer::ConvTranspose1d(ConvTranspose1d::new(2, 6, 4, rng)),
            Layer::Relu(Relu::new()),
            Layer::Conv1d(Conv1d::new(6, 20, 3, 1, rng)),
            Layer::Relu(Relu::new()),
            Layer::Conv1d(Conv1d::new(20, 1, 3, 1, rng)),
            Layer::Reshape(Reshape::new(vec![CODE_LENGTH])),
        ],
    )
    .expect("generator shapes are static")
}

/// Critic: 7 → reshape 1×7 → conv(1→8,k3,p1) → LeakyReLU(0.2) → Dropout(0.2)
/// → conv(8→12,k3,p1) → LeakyReLU(0.2) → Dropout(0.2) → flatten 84 → FC1.
/// 417 parameters; output is an unbounded score.
pub fn build_critic<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> LayerStack<T> {
    LayerStack::new(
        vec![CODE_LENGTH],
        vec![
            Layer::Reshape(Reshape::new(vec![1, CODE_LENGTH])),
            Layer::Conv1d(Conv1d::new(1, 8, 3, 1, rng)),
            Layer::LeakyRelu(LeakyRelu::new(real(0.2)).expect("static slope")),
            Layer::Dropout(Dropout::new(real(0.2)).expect("static rate")),
            Layer::Conv1d(Conv1d::new(8, 12, 3, 1, rng)),
            Layer::LeakyRelu(LeakyRelu::new(real(0.2)).expect("static slope")),
            Layer::Dropout(Dropout::new(real(0.2)).expect("static rate")),
            Layer::Reshape(Reshape::new(vec![84])),
            Layer::Linear(Linear::new(84, 1, rng)),
        ],
    )
    .expect("critic shapes are static")
}

fn mean_score<T: Scalar>(scores: &Tensor<T>) -> T {
    let sum: T = scores.values().iter().copied().sum();
    sum / real::<T>(scores.batch() as f64)
}

/// Wasserstein critic loss `mean D(fake) − mean D(real)`, evaluated without
/// dropout (evaluation-mode forwards).
pub fn critic_loss<T: Scalar>(
    critic: &LayerStack<T>,
    real_batch: &Tensor<T>,
    fake_batch: &Tensor<T>,
) -> Result<T> {
    if real_batch.shape() != fake_batch.shape() {
        return Err(Error::ShapeMismatch {
            op: "critic_loss",
            expected: real_batch.shape().to_vec(),
            got: fake_batch.shape().to_vec(),
        });
    }
    let fake = critic.infer(fake_batch)?;
    let real = critic.infer(real_batch)?;
    Ok(mean_score(&fake) - mean_score(&real))
}

/// Composite generator loss of the module docs, evaluated without dropout.
/// `labels` are one-hot rows matching `received`.
#[allow(clippy::too_many_arguments)]
pub fn generator_loss<T: Scalar>(
    critic: &LayerStack<T>,
    decoder: &LayerStack<T>,
    generator: &LayerStack<T>,
    received: &Tensor<T>,
    labels: &Tensor<T>,
    latent: &Tensor<T>,
    lambda: f64,
) -> Result<T> {
    let perturbation = generator.infer(latent)?;
    if perturbation.shape() != received.shape() {
        return Err(Error::ShapeMismatch {
            op: "generator_loss",
            expected: received.shape().to_vec(),
            got: perturbation.shape().to_vec(),
        });
    }
    let mut fake = received.clone();
    for (f, p) in fake.values_mut().iter_mut().zip(perturbation.values()) {
        *f += *p;
    }

    let lam = real::<T>(lambda);
    let scores = critic.infer(&fake)?;
    let log_probs = decoder.infer(&fake)?;
    let n = received.batch();
    let mut true_lp = T::zero();
    for bi in 0..n {
        let lp: T = log_probs
            .row(bi)
            .iter()
            .zip(labels.row(bi))
            .map(|(l, c)| *l * *c)
            .sum();
        true_lp += lp;
    }
    true_lp /= real::<T>(n as f64);

    Ok(-lam * mean_score(&scores) + (T::one() - lam) * true_lp)
}

#[derive(Debug, Clone)]
pub struct GanTrainConfig {
    /// RMSprop learning rate for both networks.
    pub lr: f64,
    /// Critic weight-clipping bound c.
    pub clip: f64,
    pub batch: usize,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub latent_dim: usize,
    /// Loss weight λ between imperceptibility and misclassification.
    pub lambda: f64,
    pub dataset_size: usize,
    pub epochs: usize,
    /// Per-sample training SNRs; one artifact serves all of them.
    pub train_snrs_db: Vec<f64>,
    /// Stop when the critic loss stagnates.
    pub early_stop: bool,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            clip: 0.1,
            batch: 32,
            n_critic: 5,
            latent_dim: LATENT_DIM,
            lambda: 0.5,
            dataset_size: 100_000,
            epochs: 50,
            train_snrs_db: vec![0.0, 4.0, 8.0],
            early_stop: true,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0,1], got {}",
                self.lambda
            )));
        }
        if self.lr <= 0.0 || self.clip <= 0.0 {
            return Err(Error::InvalidConfig(
                "gan lr and clip must be positive".into(),
            ));
        }
        if self.batch == 0 || self.n_critic == 0 || self.dataset_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig(
                "gan batch, n_critic, dataset_size and epochs must be positive".into(),
            ));
        }
        if self.latent_dim != LATENT_DIM {
            return Err(Error::InvalidConfig(format!(
                "generator architecture is fixed to latent_dim {LATENT_DIM}"
            )));
        }
        if self.train_snrs_db.is_empty() {
            return Err(Error::InvalidConfig("train_snrs_db must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GanTrainStats {
    pub epochs_run: usize,
    pub batches_per_epoch: usize,
    pub critic_updates: u64,
    pub generator_updates: u64,
    /// Worst-case |w| observed over every post-clip critic state.
    pub max_abs_critic_weight: f64,
    pub critic_epoch_losses: Vec<f64>,
    pub generator_epoch_losses: Vec<f64>,
    pub early_stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Gan,
    Jamming,
    UniversalGrad,
    CwStyle,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Gan => "gan",
            AttackKind::Jamming => "jamming",
            AttackKind::UniversalGrad => "universal",
            AttackKind::CwStyle => "cw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gan" => Ok(AttackKind::Gan),
            "jamming" => Ok(AttackKind::Jamming),
            "universal" => Ok(AttackKind::UniversalGrad),
            "cw" => Ok(AttackKind::CwStyle),
            other => Err(Error::InvalidConfig(format!(
                "unknown attack kind `{other}` (expected gan|jamming|universal|cw)"
            ))),
        }
    }
}

/// Deployable attack: either a trained generator, i.i.d. Gaussian jamming, or
/// a fixed universal vector. All kinds emit raw perturbations that go through
/// the same PNR power-scaling path.
#[derive(Debug, Clone)]
pub enum AttackPayload<T: Scalar> {
    Gan {
        generator: LayerStack<T>,
        latent_dim: usize,
        lambda: f64,
    },
    Jamming,
    Fixed {
        kind: AttackKind,
        vector: Tensor<T>,
    },
}

#[derive(Debug, Clone)]
pub struct AttackArtifact<T: Scalar> {
    pub payload: AttackPayload<T>,
    /// Provenance carried into the checkpoint container.
    pub meta: Vec<(String, String)>,
}

impl<T: Scalar> AttackArtifact<T> {
    pub fn kind(&self) -> AttackKind {
        match &self.payload {
            AttackPayload::Gan { .. } => AttackKind::Gan,
            AttackPayload::Jamming => AttackKind::Jamming,
            AttackPayload::Fixed { kind, .. } => *kind,
        }
    }
}

/// Draws `n` raw perturbation rows from an artifact. Input-agnostic by
/// construction: there is no signal argument to depend on.
pub fn generate_perturbation<T: Scalar>(
    artifact: &AttackArtifact<T>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor<T>> {
    match &artifact.payload {
        AttackPayload::Gan {
            generator,
            latent_dim,
            ..
        } => {
            let latent = Tensor::randn(vec![n, *latent_dim], rng);
            generator.infer(&latent)
        }
        AttackPayload::Jamming => Ok(Tensor::randn(vec![n, CODE_LENGTH], rng)),
        AttackPayload::Fixed { vector, .. } => {
            let mut values = Vec::with_capacity(n * CODE_LENGTH);
            for _ in 0..n {
                values.extend_from_slice(vector.values());
            }
            Tensor::new(vec![n, CODE_LENGTH], values)
        }
    }
}

impl<T: Scalar> Perturber<T> for AttackArtifact<T> {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        generate_perturbation(self, n, rng)
    }

    fn name(&self) -> &str {
        self.kind().name()
    }
}

/// Scales a perturbation so its mean-square power is exactly
/// `σ²·10^(pnr_db/10)`. Direction is preserved; only the magnitude changes.
pub fn scale_to_pnr<T: Scalar>(p: &Tensor<T>, sigma2: f64, pnr_db: f64) -> Result<Tensor<T>> {
    if sigma2 <= 0.0 {
        return Err(Error::InvalidConfig(
            "pnr scaling needs a positive noise power".into(),
        ));
    }
    let measured = p.mean_square().to_f64().unwrap();
    if measured <= 0.0 {
        return Err(Error::InvalidConfig(
            "cannot pnr-scale a zero-power perturbation".into(),
        ));
    }
    let target = sigma2 * 10f64.powf(pnr_db / 10.0);
    let mut out = p.clone();
    out.scale(real::<T>((target / measured).sqrt()));
    Ok(out)
}

/// Labeled received-signal dataset drawn through the victim encoder.
pub struct GanDataset<T: Scalar> {
    pub received: Tensor<T>,
    pub labels: Vec<u8>,
}

/// Builds the training dataset: random messages through the frozen encoder
/// and the channel, with the SNR sampled uniformly from `snrs_db` per sample.
pub fn build_dataset<T: Scalar>(
    victim: &AutoencoderModel<T>,
    channel_template: &ChannelModel,
    snrs_db: &[f64],
    size: usize,
    seed: u64,
) -> Result<GanDataset<T>> {
    let codebook = victim.codebook()?;
    let mut msg_rng = substream(seed, "gan-dataset-msg", 0);
    let mut ch_rng = substream(seed, "gan-dataset-channel", 0);

    let mut labels = Vec::with_capacity(size);
    let mut rows = Vec::with_capacity(size * CODE_LENGTH);
    for _ in 0..size {
        let idx = msg_rng.gen_range(0..NUM_MESSAGES as u8);
        labels.push(idx);
        let snr = snrs_db[msg_rng.gen_range(0..snrs_db.len())];
        let channel = channel_template.with_snr(snr);
        let s = Tensor::new(vec![1, CODE_LENGTH], codebook.row(idx as usize).to_vec())?;
        let r = channel.apply(&s, &mut ch_rng)?;
        rows.extend_from_slice(r.values());
    }
    Ok(GanDataset {
        received: Tensor::new(vec![size, CODE_LENGTH], rows)?,
        labels,
    })
}

fn gather_rows<T: Scalar>(data: &Tensor<T>, indices: &[usize]) -> Tensor<T> {
    let w = data.sample_len();
    let mut values = Vec::with_capacity(indices.len() * w);
    for &i in indices {
        values.extend_from_slice(data.row(i));
    }
    Tensor::new(vec![indices.len(), w], values).expect("gathered rows stay finite")
}

/// Trains the perturbation generator against a frozen victim.
///
/// Per batch: one critic update (loss backprop, RMSprop step, clip to
/// `[−c, c]`); every `n_critic`-th batch additionally one generator update on
/// the composite loss. The victim's parameters are never stepped; its
/// checksum is asserted unchanged.
pub fn train_attack<T: Scalar>(
    cfg: &GanTrainConfig,
    victim: &AutoencoderModel<T>,
    channel_template: &ChannelModel,
    seed: u64,
) -> Result<(AttackArtifact<T>, GanTrainStats)> {
    cfg.validate()?;
    let victim_checksum = victim.encoder.param_checksum() + &victim.decoder.param_checksum();

    let dataset = build_dataset(victim, channel_template, &cfg.train_snrs_db, cfg.dataset_size, seed)?;
    let mut decoder = victim.decoder.clone();

    let mut init_rng = substream(seed, "gan-init", 0);
    let mut generator = build_generator::<T, _>(&mut init_rng);
    let mut critic = build_critic::<T, _>(&mut init_rng);
    let mut latent_rng = substream(seed, "gan-latent", 0);
    let mut shuffle_rng = substream(seed, "gan-shuffle", 0);
    let mut dropout_rng = substream(seed, "gan-dropout", 0);

    let mut opt_g = Optimizer::rmsprop(real::<T>(cfg.lr), real(0.9), real(1e-8))?;
    let mut opt_d = Optimizer::rmsprop(real::<T>(cfg.lr), real(0.9), real(1e-8))?;
    let clip = real::<T>(cfg.clip);
    let lam = real::<T>(cfg.lambda);

    let batches_per_epoch = cfg.dataset_size.div_ceil(cfg.batch);
    let mut stats = GanTrainStats {
        epochs_run: 0,
        batches_per_epoch,
        critic_updates: 0,
        generator_updates: 0,
        max_abs_critic_weight: 0.0,
        critic_epoch_losses: Vec::new(),
        generator_epoch_losses: Vec::new(),
        early_stopped: false,
    };

    let mut order: Vec<usize> = (0..cfg.dataset_size).collect();
    for _epoch in 0..cfg.epochs {
        // Fisher-Yates with the dedicated shuffle stream.
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut critic_loss_sum = 0.0;
        let mut gen_loss_sum = 0.0;
        let mut gen_loss_count = 0usize;

        for (batch_i, batch_idx) in order.chunks(cfg.batch).enumerate() {
            let real_batch = gather_rows(&dataset.received, batch_idx);
            let n = batch_idx.len();
            let inv_n = T::one() / real::<T>(n as f64);
            let latent = Tensor::<T>::randn(vec![n, cfg.latent_dim], &mut latent_rng);

            // Critic update. The generator only provides samples here.
            let perturbation = generator.infer(&latent)?;
            let mut fake_batch = real_batch.clone();
            for (f, p) in fake_batch
                .values_mut()
                .iter_mut()
                .zip(perturbation.values())
            {
                *f += *p;
            }

            critic.zero_grad();
            let fake_scores = critic.forward_t(&fake_batch, &mut dropout_rng)?;
            critic.backward(&Tensor::filled(fake_scores.shape().to_vec(), inv_n))?;
            let real_scores = critic.forward_t(&real_batch, &mut dropout_rng)?;
            critic.backward(&Tensor::filled(real_scores.shape().to_vec(), -inv_n))?;
            let loss_d = mean_score(&fake_scores) - mean_score(&real_scores);
            if !loss_d.to_f64().unwrap().is_finite() {
                return Err(Error::Diverged("non-finite critic loss".into()));
            }
            critic_loss_sum += loss_d.to_f64().unwrap();
            opt_d.step(&mut critic)?;
            clip_weights(&mut critic, clip)?;
            stats.critic_updates += 1;
            let w = max_abs_weight(&critic).to_f64().unwrap();
            stats.max_abs_critic_weight = stats.max_abs_critic_weight.max(w);

            // Generator update on every n_critic-th batch (1-indexed).
            if (batch_i + 1) % cfg.n_critic == 0 {
                generator.zero_grad();
                let perturbation = generator.forward_t(&latent, &mut dropout_rng)?;
                let mut fake_batch = real_batch.clone();
                for (f, p) in fake_batch
                    .values_mut()
                    .iter_mut()
                    .zip(perturbation.values())
                {
                    *f += *p;
                }

                let scores = critic.forward_t(&fake_batch, &mut dropout_rng)?;
                let d_scores = Tensor::filled(scores.shape().to_vec(), -lam * inv_n);
                let g_from_critic = critic.backward(&d_scores)?;

                let log_probs = decoder.forward_t(&fake_batch, &mut dropout_rng)?;
                let mut dlp = vec![T::zero(); log_probs.len()];
                let mut true_lp = T::zero();
                for (bi, &global) in batch_idx.iter().enumerate() {
                    let label = dataset.labels[global] as usize;
                    true_lp += log_probs.row(bi)[label];
                    dlp[bi * NUM_MESSAGES + label] = (T::one() - lam) * inv_n;
                }
                let g_from_decoder =
                    decoder.backward(&Tensor::new(log_probs.shape().to_vec(), dlp)?)?;

                let mut g_fake = g_from_critic;
                for (g, d) in g_fake.values_mut().iter_mut().zip(g_from_decoder.values()) {
                    *g += *d;
                }
                generator.backward(&g_fake)?;
                opt_g.step(&mut generator)?;
                stats.generator_updates += 1;

                // The victim and critic both accumulated gradients on this
                // pass; neither may carry them into its own next update.
                critic.zero_grad();
                decoder.zero_grad();

                let loss_g =
                    (-lam * mean_score(&scores) + (T::one() - lam) * true_lp * inv_n).to_f64().unwrap();
                if !loss_g.is_finite() {
                    return Err(Error::Diverged("non-finite generator loss".into()));
                }
                gen_loss_sum += loss_g;
                gen_loss_count += 1;
            }
        }

        stats.epochs_run += 1;
        stats
            .critic_epoch_losses
            .push(critic_loss_sum / batches_per_epoch as f64);
        stats
            .generator_epoch_losses
            .push(gen_loss_sum / gen_loss_count.max(1) as f64);

        if cfg.early_stop && critic_loss_stagnant(&stats.critic_epoch_losses) {
            stats.early_stopped = true;
            break;
        }
    }

    let after = victim.encoder.param_checksum() + &victim.decoder.param_checksum();
    if after != victim_checksum {
        return Err(Error::Diverged(
            "victim parameters changed during attack training".into(),
        ));
    }

    let meta = vec![
        ("dataset_seed".to_string(), seed.to_string()),
        ("train_channel".to_string(), channel_template.kind.name().to_string()),
        (
            "train_snrs_db".to_string(),
            cfg.train_snrs_db
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("pnr_rule".to_string(), "power-match".to_string()),
    ];
    Ok((
        AttackArtifact {
            payload: AttackPayload::Gan {
                generator,
                latent_dim: cfg.latent_dim,
                lambda: cfg.lambda,
            },
            meta,
        },
        stats,
    ))
}

/// Stagnation rule: after 15 epochs, stop once the critic-loss moving average
/// changes by less than 1% (relative) across the last five epochs.
fn critic_loss_stagnant(losses: &[f64]) -> bool {
    const MIN_EPOCHS: usize = 15;
    const PATIENCE: usize = 5;
    const REL_TOL: f64 = 0.01;
    if losses.len() < MIN_EPOCHS.max(PATIENCE + 1) {
        return false;
    }
    let tail = &losses[losses.len() - (PATIENCE + 1)..];
    let scale = tail.iter().map(|l| l.abs()).fold(0.0f64, f64::max).max(1e-9);
    tail.windows(2)
        .all(|w| (w[1] - w[0]).abs() / scale < REL_TOL)
}

/// Monte Carlo BLER of the victim under this artifact at a given PNR;
/// the Algorithm-2 validation loop.
pub fn validate_attack<T: Scalar>(
    artifact: &AttackArtifact<T>,
    victim: &AutoencoderModel<T>,
    channel: &ChannelModel,
    pnr_db: f64,
    n_blocks: u64,
    seed: u64,
) -> Result<BlerEstimate> {
    let spec = crate::autoenc::AttackSpec {
        perturber: artifact,
        pnr_db,
    };
    crate::autoenc::evaluate_bler(victim, channel, n_blocks, seed, Some(&spec))
}

pub fn artifact_to_checkpoint<T: Scalar>(
    artifact: &AttackArtifact<T>,
    config_hash: &str,
) -> Checkpoint<T> {
    let mut ck = Checkpoint::new(config_hash);
    ck.set_meta("kind", "attack");
    ck.set_meta("attack_kind", artifact.kind().name());
    for (k, v) in &artifact.meta {
        ck.set_meta(k.clone(), v.clone());
    }
    match &artifact.payload {
        AttackPayload::Gan {
            generator,
            latent_dim,
            lambda,
        } => {
            ck.set_meta("latent_dim", latent_dim.to_string());
            ck.set_meta("lambda", lambda.to_string());
            ck.stacks.push(("generator".into(), generator.clone()));
        }
        AttackPayload::Jamming => {}
        AttackPayload::Fixed { vector, .. } => {
            ck.tensors.push(("perturbation".into(), vector.clone()));
        }
    }
    ck
}

pub fn artifact_from_checkpoint<T: Scalar>(ck: &Checkpoint<T>) -> Result<AttackArtifact<T>> {
    if ck.meta_value("kind") != Some("attack") {
        return Err(Error::Checkpoint(format!(
            "expected an attack artifact, found kind {:?}",
            ck.meta_value("kind")
        )));
    }
    let kind = AttackKind::parse(
        ck.meta_value("attack_kind")
            .ok_or_else(|| Error::Checkpoint("artifact missing attack_kind".into()))?,
    )?;
    let meta = ck
        .meta
        .iter()
        .filter(|(k, _)| {
            k != "kind" && k != "attack_kind" && k != "latent_dim" && k != "lambda"
        })
        .cloned()
        .collect();
    let payload = match kind {
        AttackKind::Gan => {
            let latent_dim = ck
                .meta_value("latent_dim")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| Error::Checkpoint("gan artifact missing latent_dim".into()))?;
            let lambda = ck
                .meta_value("lambda")
                .and_then(|v| v.parse::<f64>().ok())
                .unwrap_or(0.5);
            AttackPayload::Gan {
                generator: ck.stack("generator")?.clone(),
                latent_dim,
                lambda,
            }
        }
        AttackKind::Jamming => AttackPayload::Jamming,
        AttackKind::UniversalGrad | AttackKind::CwStyle => AttackPayload::Fixed {
            kind,
            vector: ck.tensor("perturbation")?.clone(),
        },
    };
    Ok(AttackArtifact { payload, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn reference_architectures_hit_published_parameter_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let generator = build_generator::<f64, _>(&mut rng);
        let critic = build_critic::<f64, _>(&mut rng);
        assert_eq!(generator.count_params(), 543);
        assert_eq!(critic.count_params(), 417);
        assert_eq!(generator.output_shape(), &[7]);
        assert_eq!(critic.output_shape(), &[1]);
    }

    fn sum_critic() -> LayerStack<f64> {
        // D(x) = Σx: a single linear layer with unit weights.
        let weight = Tensor::new(vec![1, 7], vec![1.0; 7]).unwrap();
        let bias = Tensor::zeros(vec![1]);
        LayerStack::new(
            vec![7],
            vec![Layer::Linear(Linear::from_parts(weight, bias).unwrap())],
        )
        .unwrap()
    }

    fn constant_critic(k: f64) -> LayerStack<f64> {
        let weight = Tensor::zeros(vec![1, 7]);
        let bias = Tensor::new(vec![1], vec![k]).unwrap();
        LayerStack::new(
            vec![7],
            vec![Layer::Linear(Linear::from_parts(weight, bias).unwrap())],
        )
        .unwrap()
    }

    #[test]
    fn critic_loss_on_identical_batches_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let critic = build_critic::<f64, _>(&mut rng);
        let batch = Tensor::randn(vec![8, 7], &mut rng);
        let loss = critic_loss(&critic, &batch, &batch).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn constant_critic_cancels() {
        let critic = constant_critic(3.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let real_b = Tensor::randn(vec![6, 7], &mut rng);
        let fake_b = Tensor::randn(vec![6, 7], &mut rng);
        let loss = critic_loss(&critic, &real_b, &fake_b).unwrap();
        assert_relative_eq!(loss, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_critic_arithmetic() {
        // D(x) = Σx, fake = real + 0.1 per entry → loss = 0.7.
        let critic = sum_critic();
        let real_b = Tensor::filled(vec![4, 7], 1.0);
        let mut fake_b = real_b.clone();
        for v in fake_b.values_mut() {
            *v += 0.1;
        }
        let loss = critic_loss(&critic, &real_b, &fake_b).unwrap();
        assert_relative_eq!(loss, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn generator_loss_reduces_to_each_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let critic = build_critic::<f64, _>(&mut rng);
        let generator = build_generator::<f64, _>(&mut rng);
        let victim = crate::autoenc::AutoencoderModel::<f64>::init(&mut rng);
        let received = Tensor::randn(vec![6, 7], &mut rng);
        let labels = crate::autoenc::one_hot_batch::<f64>(&[0, 3, 7, 11, 15, 2]).unwrap();
        let latent = Tensor::randn(vec![6, 5], &mut rng);

        // λ = 1: pure −mean critic score of the fakes.
        let l1 = generator_loss(
            &critic,
            &victim.decoder,
            &generator,
            &received,
            &labels,
            &latent,
            1.0,
        )
        .unwrap();
        let perturbation = generator.infer(&latent).unwrap();
        let mut fake = received.clone();
        for (f, p) in fake.values_mut().iter_mut().zip(perturbation.values()) {
            *f += *p;
        }
        let scores = critic.infer(&fake).unwrap();
        let expected = -scores.values().iter().sum::<f64>() / 6.0;
        assert_relative_eq!(l1, expected, epsilon = 1e-12);

        // λ = 0: mean true-class log-probability (≤ 0 by construction).
        let l0 = generator_loss(
            &critic,
            &victim.decoder,
            &generator,
            &received,
            &labels,
            &latent,
            0.0,
        )
        .unwrap();
        let log_probs = victim.decoder.infer(&fake).unwrap();
        let expected0: f64 = [0usize, 3, 7, 11, 15, 2]
            .iter()
            .enumerate()
            .map(|(bi, &l)| log_probs.row(bi)[l])
            .sum::<f64>()
            / 6.0;
        assert_relative_eq!(l0, expected0, epsilon = 1e-12);
        assert!(l0 <= 0.0);
    }

    #[test]
    fn pnr_scaling_hits_the_target_power_exactly() {
        // Power 0.5, σ² = 0.1, PNR −3 dB → target ≈ 0.05012, scale ≈ 0.3166.
        let p = Tensor::new(vec![2, 7], vec![0.5f64.sqrt(); 14]).unwrap();
        assert_relative_eq!(p.mean_square(), 0.5, epsilon = 1e-12);
        let scaled = scale_to_pnr(&p, 0.1, -3.0).unwrap();
        let target = 0.1 * 10f64.powf(-0.3);
        assert_relative_eq!(scaled.mean_square(), target, max_relative = 1e-9);
        assert_relative_eq!(
            scaled.values()[0] / p.values()[0],
            (target / 0.5).sqrt(),
            epsilon = 1e-9
        );
        assert!((0.3166 - (target / 0.5).sqrt()).abs() < 1e-4);

        // PNR 0 dB at σ² = 1 → unit power.
        let unit = scale_to_pnr(&p, 1.0, 0.0).unwrap();
        assert_relative_eq!(unit.mean_square(), 1.0, max_relative = 1e-9);

        // Direction is preserved.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = Tensor::<f64>::randn(vec![3, 7], &mut rng);
        let sq = scale_to_pnr(&q, 0.5, -2.0).unwrap();
        let ratio = sq.values()[0] / q.values()[0];
        for (a, b) in sq.values().iter().zip(q.values()) {
            assert_relative_eq!(a / b, ratio, max_relative = 1e-9);
        }

        assert!(scale_to_pnr(&Tensor::<f64>::zeros(vec![1, 7]), 1.0, 0.0).is_err());
        assert!(scale_to_pnr(&p, 0.0, 0.0).is_err());
    }

    #[test]
    fn perturbations_are_seeded_and_signal_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let artifact = AttackArtifact {
            payload: AttackPayload::Gan {
                generator: build_generator::<f64, _>(&mut rng),
                latent_dim: 5,
                lambda: 0.5,
            },
            meta: vec![],
        };
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let pa = generate_perturbation(&artifact, 4, &mut a).unwrap();
        let pb = generate_perturbation(&artifact, 4, &mut b).unwrap();
        assert_eq!(pa.values(), pb.values());

        let mut c = ChaCha8Rng::seed_from_u64(10);
        let pc = generate_perturbation(&artifact, 4, &mut c).unwrap();
        assert_ne!(pa.values(), pc.values());
    }

    #[test]
    fn artifact_checkpoints_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let artifact = AttackArtifact {
            payload: AttackPayload::Gan {
                generator: build_generator::<f64, _>(&mut rng),
                latent_dim: 5,
                lambda: 0.25,
            },
            meta: vec![("dataset_seed".into(), "3".into())],
        };
        let ck = artifact_to_checkpoint(&artifact, "h");
        let back = artifact_from_checkpoint(&ck).unwrap();
        assert_eq!(back.kind(), AttackKind::Gan);
        match (&artifact.payload, &back.payload) {
            (
                AttackPayload::Gan { generator: a, .. },
                AttackPayload::Gan {
                    generator: b,
                    lambda,
                    ..
                },
            ) => {
                assert_eq!(a.param_checksum(), b.param_checksum());
                assert_eq!(*lambda, 0.25);
            }
            _ => panic!("payload kind changed"),
        }

        let fixed = AttackArtifact::<f64> {
            payload: AttackPayload::Fixed {
                kind: AttackKind::UniversalGrad,
                vector: Tensor::new(vec![7], vec![0.5; 7]).unwrap(),
            },
            meta: vec![],
        };
        let ck = artifact_to_checkpoint(&fixed, "h");
        let back = artifact_from_checkpoint(&ck).unwrap();
        assert_eq!(back.kind(), AttackKind::UniversalGrad);
    }

    #[test]
    fn smoke_training_obeys_the_wgan_contract() {
        // Tiny run: the structural contract (clip bound, update cadence,
        // frozen victim) must hold regardless of convergence.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let victim = crate::autoenc::AutoencoderModel::<f64>::init(&mut rng);
        let cfg = GanTrainConfig {
            dataset_size: 640,
            epochs: 2,
            early_stop: false,
            ..GanTrainConfig::default()
        };
        let channel = ChannelModel::awgn(4.0);
        let checksum_before =
            victim.encoder.param_checksum() + &victim.decoder.param_checksum();
        let (artifact, stats) = train_attack(&cfg, &victim, &channel, 13).unwrap();
        assert_eq!(
            victim.encoder.param_checksum() + &victim.decoder.param_checksum(),
            checksum_before
        );
        assert_eq!(stats.batches_per_epoch, 20);
        assert_eq!(stats.critic_updates, 40);
        // floor(20 / 5) generator updates per epoch.
        assert_eq!(stats.generator_updates, 8);
        assert!(stats.max_abs_critic_weight <= cfg.clip + 1e-15);
        assert_eq!(artifact.kind(), AttackKind::Gan);
    }
}
