//! The (7,4) end-to-end autoencoder transceiver.
//!
//! The encoder maps a 16-way one-hot message to 7 real channel symbols
//! (FC16/ReLU → FC7 → BatchNorm7); the decoder maps the received vector back
//! to 16 log-probabilities (FC16/ReLU → FC16/LogSoftmax). Training minimizes
//! cross-entropy through the channel: the additive noise is a constant input
//! perturbation, and fading enters the backward pass as an elementwise
//! amplitude factor on the received-signal gradient.
//!
//! The batch-norm affine pair is rescaled after every optimizer step so the
//! average transmit power stays at 1; without that projection the optimizer
//! inflates the constellation to buy SNR and the power constraint silently
//! breaks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bler::{parallel_blocks, BlerEstimate};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::nn::{BatchNorm1d, Layer, LayerStack, Linear, LogSoftmax, Relu};
use crate::scalar::{real, Scalar};
use crate::seed::substream;
use crate::tensor::Tensor;

pub const MESSAGE_BITS: usize = 4;
pub const NUM_MESSAGES: usize = 16;
pub const CODE_LENGTH: usize = 7;

/// One of the 16 transmittable messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message(u8);

impl Message {
    pub fn new(index: u8) -> Result<Self> {
        if (index as usize) < NUM_MESSAGES {
            Ok(Self(index))
        } else {
            Err(Error::InvalidConfig(format!(
                "message index {index} out of range 0..{NUM_MESSAGES}"
            )))
        }
    }

    pub fn index(&self) -> usize {
        self.0 as usize
    }

    /// Most-significant bit first.
    pub fn bits(&self) -> [u8; MESSAGE_BITS] {
        let i = self.0;
        [(i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1]
    }

    pub fn from_bits(bits: [u8; MESSAGE_BITS]) -> Self {
        Self(bits[0] << 3 | bits[1] << 2 | bits[2] << 1 | bits[3])
    }
}

/// One-hot rows for a slice of message indices.
pub fn one_hot_batch<T: Scalar>(indices: &[u8]) -> Result<Tensor<T>> {
    let mut values = vec![T::zero(); indices.len() * NUM_MESSAGES];
    for (bi, idx) in indices.iter().enumerate() {
        if (*idx as usize) >= NUM_MESSAGES {
            return Err(Error::InvalidConfig(format!(
                "message index {idx} out of range 0..{NUM_MESSAGES}"
            )));
        }
        values[bi * NUM_MESSAGES + *idx as usize] = T::one();
    }
    Tensor::new(vec![indices.len(), NUM_MESSAGES], values)
}

/// Encoder of Table-1 shape: 16 → FC16/ReLU → FC7 → BatchNorm7.
pub fn build_encoder<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> LayerStack<T> {
    LayerStack::new(
        vec![NUM_MESSAGES],
        vec![
            Layer::Linear(Linear::new(NUM_MESSAGES, 16, rng)),
            Layer::Relu(Relu::new()),
            Layer::Linear(Linear::new(16, CODE_LENGTH, rng)),
            Layer::BatchNorm1d(BatchNorm1d::new(CODE_LENGTH)),
        ],
    )
    .expect("encoder shapes are static")
}

/// Decoder of Table-2 shape: 7 → FC16/ReLU → FC16/LogSoftmax.
pub fn build_decoder<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> LayerStack<T> {
    LayerStack::new(
        vec![CODE_LENGTH],
        vec![
            Layer::Linear(Linear::new(CODE_LENGTH, 16, rng)),
            Layer::Relu(Relu::new()),
            Layer::Linear(Linear::new(16, NUM_MESSAGES, rng)),
            Layer::LogSoftmax(LogSoftmax::new()),
        ],
    )
    .expect("decoder shapes are static")
}

#[derive(Debug, Clone)]
pub struct AutoencoderModel<T: Scalar> {
    pub encoder: LayerStack<T>,
    pub decoder: LayerStack<T>,
}

impl<T: Scalar> AutoencoderModel<T> {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            encoder: build_encoder(rng),
            decoder: build_decoder(rng),
        }
    }

    /// Deterministic evaluation-mode encoding of message indices to symbols.
    pub fn encode(&self, indices: &[u8]) -> Result<Tensor<T>> {
        let one_hot = one_hot_batch::<T>(indices)?;
        self.encoder.infer(&one_hot)
    }

    /// All 16 codewords as rows, in message order.
    pub fn codebook(&self) -> Result<Tensor<T>> {
        let indices: Vec<u8> = (0..NUM_MESSAGES as u8).collect();
        self.encode(&indices)
    }

    /// Log-probabilities and argmax estimates (ties resolve to the lowest
    /// index).
    pub fn decode(&self, received: &Tensor<T>) -> Result<(Tensor<T>, Vec<u8>)> {
        let log_probs = self.decoder.infer(received)?;
        let estimates = argmax_rows(&log_probs);
        Ok((log_probs, estimates))
    }
}

/// Row-wise argmax; the lowest index wins ties.
pub fn argmax_rows<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    (0..t.batch())
        .map(|bi| {
            let row = t.row(bi);
            let mut best = 0usize;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            best as u8
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AutoencTrainConfig {
    pub channel: ChannelModel,
    pub epochs: usize,
    pub messages_per_epoch: usize,
    pub batch: usize,
    pub lr: f64,
}

impl AutoencTrainConfig {
    /// Training defaults: AWGN at 4 dB; fading kinds at 10 dB.
    pub fn for_channel(channel: ChannelModel) -> Self {
        Self {
            channel,
            epochs: 100,
            messages_per_epoch: 10_000,
            batch: 256,
            lr: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.messages_per_epoch == 0 {
            return Err(Error::InvalidConfig(
                "autoencoder training needs epochs > 0 and messages_per_epoch > 0".into(),
            ));
        }
        if self.batch < 2 {
            return Err(Error::InvalidConfig(
                "autoencoder training needs batch >= 2 (batch norm)".into(),
            ));
        }
        if self.lr <= 0.0 {
            return Err(Error::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AutoencTrainReport {
    /// Mean cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Rescales the encoder's batch-norm affine pair so the average per-symbol
/// output power `mean_j(γ_j² + β_j²)` is exactly 1.
fn project_unit_power<T: Scalar>(encoder: &mut LayerStack<T>) {
    let mut sum = T::zero();
    let mut features = 0usize;
    encoder.visit_params(&mut |_, tag, t| {
        if tag == "gamma" || tag == "beta" {
            if tag == "gamma" {
                features = t.len();
            }
            sum += t.values().iter().map(|v| *v * *v).sum();
        }
    });
    if features == 0 {
        return;
    }
    let mean = sum / real::<T>(features as f64);
    if mean <= T::zero() {
        return;
    }
    let factor = T::one() / mean.sqrt();
    encoder.visit_params_mut(&mut |_, tag, t| {
        if tag == "gamma" || tag == "beta" {
            t.scale(factor);
        }
    });
}

/// Trains the transceiver end to end. Deterministic in (config, seed).
pub fn train_autoencoder<T: Scalar>(
    cfg: &AutoencTrainConfig,
    seed: u64,
) -> Result<(AutoencoderModel<T>, AutoencTrainReport)> {
    cfg.validate()?;
    let mut init_rng = substream(seed, "ae-init", 0);
    let mut data_rng = substream(seed, "ae-data", 0);
    let mut channel_rng = substream(seed, "ae-channel", 0);

    let mut model = AutoencoderModel::<T>::init(&mut init_rng);
    let mut opt_enc = crate::optim::Optimizer::adam_default(real::<T>(cfg.lr))?;
    let mut opt_dec = crate::optim::Optimizer::adam_default(real::<T>(cfg.lr))?;
    project_unit_power(&mut model.encoder);

    let steps_per_epoch = (cfg.messages_per_epoch / cfg.batch).max(1);
    let batch_t = real::<T>(cfg.batch as f64);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for _ in 0..steps_per_epoch {
            let indices: Vec<u8> = (0..cfg.batch)
                .map(|_| data_rng.gen_range(0..NUM_MESSAGES as u8))
                .collect();
            let one_hot = one_hot_batch::<T>(&indices)?;

            let symbols = model.encoder.forward_t(&one_hot, &mut data_rng)?;
            let (received, amps) = cfg.channel.apply_detailed(&symbols, &mut channel_rng)?;
            let log_probs = model.decoder.forward_t(&received, &mut data_rng)?;

            // Cross-entropy against the one-hot labels.
            let mut loss = T::zero();
            let mut dlogp = vec![T::zero(); log_probs.len()];
            for (bi, idx) in indices.iter().enumerate() {
                let lp = log_probs.row(bi)[*idx as usize];
                loss -= lp;
                dlogp[bi * NUM_MESSAGES + *idx as usize] = -T::one() / batch_t;
            }
            loss /= batch_t;
            let loss_f = loss.to_f64().unwrap();
            if !loss_f.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            loss_sum += loss_f;

            let dlogp = Tensor::new(log_probs.shape().to_vec(), dlogp)?;
            let drecv = model.decoder.backward(&dlogp)?;
            // d(received)/d(symbols) is the drawn fading amplitude.
            let mut dsym = drecv;
            for (g, a) in dsym.values_mut().iter_mut().zip(amps.values()) {
                *g *= *a;
            }
            model.encoder.backward(&dsym)?;

            opt_dec.step(&mut model.decoder)?;
            opt_enc.step(&mut model.encoder)?;
            project_unit_power(&mut model.encoder);
        }
        epoch_losses.push(loss_sum / steps_per_epoch as f64);
    }

    // The running batch-norm statistics lag the constellation they tracked
    // during training; settle them on the frozen weights so evaluation-mode
    // encoding carries the projected unit power.
    for _ in 0..100 {
        let indices: Vec<u8> = (0..512)
            .map(|_| data_rng.gen_range(0..NUM_MESSAGES as u8))
            .collect();
        let one_hot = one_hot_batch::<T>(&indices)?;
        model.encoder.forward_t(&one_hot, &mut data_rng)?;
    }

    Ok((model, AutoencTrainReport { epoch_losses }))
}

/// Raw (pre-scaling) perturbation source used by attacked evaluations.
/// Implementations must be deterministic in the rng stream they are handed.
pub trait Perturber<T: Scalar>: Sync {
    /// `n` perturbation rows of width [`CODE_LENGTH`].
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor<T>>;
    fn name(&self) -> &str;
}

/// Attack applied during evaluation: raw perturbations from `perturber`,
/// power-scaled to `pnr_db` against the channel's noise power.
pub struct AttackSpec<'a, T: Scalar> {
    pub perturber: &'a dyn Perturber<T>,
    pub pnr_db: f64,
}

/// Monte Carlo block error rate of the transceiver over a channel, optionally
/// under attack. Pure function of (model, channel, n_blocks, seed, attack).
pub fn evaluate_bler<T: Scalar>(
    model: &AutoencoderModel<T>,
    channel: &ChannelModel,
    n_blocks: u64,
    seed: u64,
    attack: Option<&AttackSpec<'_, T>>,
) -> Result<BlerEstimate> {
    let codebook = model.codebook()?;
    let sigma2 = channel.noise_variance();
    if let Some(a) = attack {
        if sigma2 <= 0.0 && a.pnr_db.is_finite() {
            return Err(Error::InvalidConfig(
                "perturbation-to-noise scaling needs a positive noise power".into(),
            ));
        }
    }

    let est = parallel_blocks(n_blocks, |ci, blocks| {
        let mut rng = substream(seed, "eval", ci);
        let n = blocks as usize;
        let indices: Vec<u8> = (0..n)
            .map(|_| rng.gen_range(0..NUM_MESSAGES as u8))
            .collect();
        let mut symbols = vec![T::zero(); n * CODE_LENGTH];
        for (bi, idx) in indices.iter().enumerate() {
            symbols[bi * CODE_LENGTH..(bi + 1) * CODE_LENGTH]
                .copy_from_slice(codebook.row(*idx as usize));
        }
        let s = Tensor::new(vec![n, CODE_LENGTH], symbols).expect("finite symbols");
        let mut received = channel.apply(&s, &mut rng).expect("channel");

        if let Some(a) = attack {
            let raw = a.perturber.sample(n, &mut rng).expect("perturber");
            let scaled = crate::advgan::scale_to_pnr(&raw, sigma2, a.pnr_db).expect("pnr scale");
            for (r, p) in received.values_mut().iter_mut().zip(scaled.values()) {
                *r += *p;
            }
        }

        let (_, estimates) = model.decode(&received).expect("decode");
        estimates
            .iter()
            .zip(&indices)
            .filter(|(est, tx)| est != tx)
            .count() as u64
    });
    Ok(est)
}

/// Serializes a model into the checkpoint container.
pub fn model_to_checkpoint<T: Scalar>(
    model: &AutoencoderModel<T>,
    config_hash: &str,
    train_meta: &[(String, String)],
) -> crate::checkpoint::Checkpoint<T> {
    let mut ck = crate::checkpoint::Checkpoint::new(config_hash);
    ck.set_meta("kind", "autoencoder");
    for (k, v) in train_meta {
        ck.set_meta(k.clone(), v.clone());
    }
    ck.stacks.push(("encoder".into(), model.encoder.clone()));
    ck.stacks.push(("decoder".into(), model.decoder.clone()));
    ck
}

pub fn model_from_checkpoint<T: Scalar>(
    ck: &crate::checkpoint::Checkpoint<T>,
) -> Result<AutoencoderModel<T>> {
    if ck.meta_value("kind") != Some("autoencoder") {
        return Err(Error::Checkpoint(format!(
            "expected an autoencoder checkpoint, found kind {:?}",
            ck.meta_value("kind")
        )));
    }
    Ok(AutoencoderModel {
        encoder: ck.stack("encoder")?.clone(),
        decoder: ck.stack("decoder")?.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn message_bits_round_trip() {
        for i in 0..16u8 {
            let m = Message::new(i).unwrap();
            assert_eq!(Message::from_bits(m.bits()), m);
            let value = m.bits().iter().fold(0u8, |acc, b| (acc << 1) | b);
            assert_eq!(value, i);
        }
        assert!(Message::new(16).is_err());
    }

    #[test]
    fn parameter_counts_match_table_structures() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = build_encoder::<f64, _>(&mut rng);
        let dec = build_decoder::<f64, _>(&mut rng);
        // 16·16+16 + 16·7+7 + 2·7 = 405; 7·16+16 + 16·16+16 = 400.
        assert_eq!(enc.count_params(), 405);
        assert_eq!(dec.count_params(), 400);
    }

    #[test]
    fn encode_is_deterministic_in_eval_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = AutoencoderModel::<f64>::init(&mut rng);
        let a = model.encode(&[3, 7]).unwrap();
        let b = model.encode(&[3, 7]).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.shape(), &[2, 7]);
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        let t = Tensor::new(vec![2, 3], vec![0.5f64, 0.5, 0.1, -1.0, -2.0, -1.0]).unwrap();
        assert_eq!(argmax_rows(&t), vec![0, 0]);
    }

    #[test]
    fn decode_rows_are_normalized_log_probs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = AutoencoderModel::<f64>::init(&mut rng);
        let r = Tensor::randn(vec![5, 7], &mut rng);
        let (log_probs, est) = model.decode(&r).unwrap();
        assert_eq!(est.len(), 5);
        for bi in 0..5 {
            let s: f64 = log_probs.row(bi).iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn untrained_model_guesses_uniformly_in_heavy_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = AutoencoderModel::<f64>::init(&mut rng);
        let channel = ChannelModel::awgn(-10.0);
        let est = evaluate_bler(&model, &channel, 20_000, 11, None).unwrap();
        let expected = 15.0 / 16.0;
        assert!(
            (est.bler() - expected).abs() < 0.04,
            "bler {} vs {expected}",
            est.bler()
        );
    }

    #[test]
    fn training_smoke_run_decreases_loss_and_is_deterministic() {
        let cfg = AutoencTrainConfig {
            channel: ChannelModel::awgn(4.0),
            epochs: 10,
            messages_per_epoch: 2000,
            batch: 250,
            lr: 1e-3,
        };
        let (model_a, report) = train_autoencoder::<f64>(&cfg, 42).unwrap();
        let (model_b, _) = train_autoencoder::<f64>(&cfg, 42).unwrap();
        assert_eq!(
            model_a.encoder.param_checksum(),
            model_b.encoder.param_checksum()
        );
        assert_eq!(
            model_a.decoder.param_checksum(),
            model_b.decoder.param_checksum()
        );

        assert!(report.epoch_losses.iter().all(|l| l.is_finite()));
        let head: f64 = report.epoch_losses[..3].iter().sum::<f64>() / 3.0;
        let tail: f64 = report.epoch_losses[7..].iter().sum::<f64>() / 3.0;
        assert!(tail <= head, "loss did not trend down: {report:?}");

        // Power projection keeps the constellation at unit average power.
        let codebook = model_a.codebook().unwrap();
        let power = codebook.mean_square();
        assert!((power - 1.0).abs() < 0.05, "codebook power {power}");
    }

    #[test]
    fn checkpoint_round_trip_preserves_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = AutoencoderModel::<f64>::init(&mut rng);
        let ck = model_to_checkpoint(&model, "hash", &[]);
        let back = model_from_checkpoint(&ck).unwrap();
        assert_eq!(
            back.encoder.param_checksum(),
            model.encoder.param_checksum()
        );
        assert_eq!(
            back.decoder.param_checksum(),
            model.decoder.param_checksum()
        );
    }
}
