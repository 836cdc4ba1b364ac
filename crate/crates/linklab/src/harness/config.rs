//! Experiment and training configuration, parsed from a sectioned TOML file.
//!
//! Every key is documented in the repository README. Unknown keys are
//! rejected so a typo cannot silently change an experiment.

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::advgan::GanTrainConfig;
use crate::attacks::BaselineAttackConfig;
use crate::autoenc::AutoencTrainConfig;
use crate::channel::{ChannelKind, ChannelModel, RicianConfig};
use crate::error::{Error, Result};

/// Minimum Monte Carlo size for statistical experiments.
pub const MIN_STATISTICAL_BLOCKS: u64 = 10_000;

/// Short hash identifying the exact configuration that produced a result.
pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BlerVsSnr,
    BlerVsPnr,
    Outage,
    Covertness,
    Complexity,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BlerVsSnr => "bler_vs_snr",
            ExperimentKind::BlerVsPnr => "bler_vs_pnr",
            ExperimentKind::Outage => "outage",
            ExperimentKind::Covertness => "covertness",
            ExperimentKind::Complexity => "complexity",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_blocks")]
    pub blocks: u64,
}

fn default_seed() -> u64 {
    0
}

fn default_blocks() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SweepSection {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.step_db <= 0.0 || self.stop_db < self.start_db {
            return Err(Error::InvalidConfig(format!(
                "sweep axis must satisfy step > 0 and stop >= start, got {self:?}"
            )));
        }
        let mut points = Vec::new();
        let mut i = 0u32;
        loop {
            let v = self.start_db + self.step_db * i as f64;
            if v > self.stop_db + 1e-9 {
                break;
            }
            points.push(v);
            i += 1;
        }
        if points.is_empty() {
            return Err(Error::InvalidConfig("sweep axis is empty".into()));
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub kind: String,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub distance_m: Option<f64>,
    #[serde(default)]
    pub k_factor_db: Option<f64>,
}

fn default_snr() -> f64 {
    8.0
}

impl ChannelSection {
    pub fn model(&self) -> Result<ChannelModel> {
        let kind = ChannelKind::parse(&self.kind)?;
        Ok(ChannelModel {
            kind,
            snr_db: self.snr_db,
            rician: RicianConfig {
                distance_m: self.distance_m,
                k_override_db: self.k_factor_db,
                ..RicianConfig::default()
            },
        })
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            kind: "awgn".into(),
            snr_db: default_snr(),
            distance_m: None,
            k_factor_db: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    #[serde(default)]
    pub victim: Option<String>,
    #[serde(default)]
    pub artifact: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    /// SNR curves of a PNR sweep.
    #[serde(default = "default_attack_snrs")]
    pub snrs_db: Vec<f64>,
    /// Fixed PNR for experiments that are not PNR sweeps.
    #[serde(default)]
    pub pnr_db: f64,
    #[serde(default = "default_true")]
    pub include_no_attack: bool,
}

fn default_attack_snrs() -> Vec<f64> {
    vec![0.0, 4.0, 8.0]
}

fn default_true() -> bool {
    true
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            snrs_db: default_attack_snrs(),
            pnr_db: 0.0,
            include_no_attack: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageSection {
    #[serde(default = "default_rate")]
    pub rate_mbps: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_mhz: f64,
    #[serde(default = "default_draws")]
    pub draws: u64,
}

fn default_rate() -> f64 {
    50.0
}

fn default_bandwidth() -> f64 {
    18.0
}

fn default_draws() -> u64 {
    1_000_000
}

impl Default for OutageSection {
    fn default() -> Self {
        Self {
            rate_mbps: default_rate(),
            bandwidth_mhz: default_bandwidth(),
            draws: default_draws(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovertnessSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    200
}

impl Default for CovertnessSection {
    fn default() -> Self {
        Self {
            samples: default_samples(),
        }
    }
}

/// Top-level experiment configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub outage: OutageSection,
    #[serde(default)]
    pub covertness: CovertnessSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.model()?;
        match self.experiment.kind {
            ExperimentKind::BlerVsSnr | ExperimentKind::BlerVsPnr | ExperimentKind::Outage => {
                if self.experiment.blocks < MIN_STATISTICAL_BLOCKS {
                    return Err(Error::InvalidConfig(format!(
                        "statistical experiments need blocks >= {MIN_STATISTICAL_BLOCKS}"
                    )));
                }
                if self.sweep.is_none() {
                    return Err(Error::InvalidConfig(
                        "this experiment kind needs a [sweep] section".into(),
                    ));
                }
                self.sweep.as_ref().unwrap().points()?;
            }
            ExperimentKind::Covertness | ExperimentKind::Complexity => {}
        }
        if matches!(
            self.experiment.kind,
            ExperimentKind::BlerVsSnr | ExperimentKind::BlerVsPnr | ExperimentKind::Covertness
        ) && self.models.victim.is_none()
        {
            return Err(Error::InvalidConfig(
                "this experiment kind needs models.victim".into(),
            ));
        }
        Ok(())
    }
}

/// Training configuration file shared by the train-* subcommands.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default)]
    pub autoencoder: AutoencSection,
    #[serde(default)]
    pub attack: GanSection,
    #[serde(default)]
    pub baseline: BaselineSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencSection {
    #[serde(default = "d_ae_epochs")]
    pub epochs: usize,
    #[serde(default = "d_ae_messages")]
    pub messages_per_epoch: usize,
    #[serde(default = "d_ae_batch")]
    pub batch: usize,
    #[serde(default = "d_ae_lr")]
    pub lr: f64,
    /// Training SNR; unset means 4 dB on AWGN and 10 dB on fading kinds.
    #[serde(default)]
    pub snr_db: Option<f64>,
}

fn d_ae_epochs() -> usize {
    100
}
fn d_ae_messages() -> usize {
    10_000
}
fn d_ae_batch() -> usize {
    256
}
fn d_ae_lr() -> f64 {
    1e-3
}

impl Default for AutoencSection {
    fn default() -> Self {
        Self {
            epochs: d_ae_epochs(),
            messages_per_epoch: d_ae_messages(),
            batch: d_ae_batch(),
            lr: d_ae_lr(),
            snr_db: None,
        }
    }
}

impl AutoencSection {
    pub fn build(&self, channel: &ChannelModel) -> AutoencTrainConfig {
        let train_snr = self.snr_db.unwrap_or(match channel.kind {
            crate::channel::ChannelKind::Awgn => 4.0,
            _ => 10.0,
        });
        AutoencTrainConfig {
            channel: channel.with_snr(train_snr),
            epochs: self.epochs,
            messages_per_epoch: self.messages_per_epoch,
            batch: self.batch,
            lr: self.lr,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanSection {
    #[serde(default = "d_gan_epochs")]
    pub epochs: usize,
    #[serde(default = "d_gan_lr")]
    pub lr: f64,
    #[serde(default = "d_gan_clip")]
    pub clip: f64,
    #[serde(default = "d_gan_batch")]
    pub batch: usize,
    #[serde(default = "d_gan_n_critic")]
    pub n_critic: usize,
    #[serde(default = "d_gan_latent")]
    pub latent_dim: usize,
    #[serde(default = "d_gan_lambda")]
    pub lambda: f64,
    #[serde(default = "d_gan_dataset")]
    pub dataset_size: usize,
    #[serde(default = "default_attack_snrs")]
    pub snrs_db: Vec<f64>,
    #[serde(default = "default_true")]
    pub early_stop: bool,
}

fn d_gan_epochs() -> usize {
    50
}
fn d_gan_lr() -> f64 {
    5e-4
}
fn d_gan_clip() -> f64 {
    0.1
}
fn d_gan_batch() -> usize {
    32
}
fn d_gan_n_critic() -> usize {
    5
}
fn d_gan_latent() -> usize {
    5
}
fn d_gan_lambda() -> f64 {
    0.5
}
fn d_gan_dataset() -> usize {
    100_000
}

impl Default for GanSection {
    fn default() -> Self {
        Self {
            epochs: d_gan_epochs(),
            lr: d_gan_lr(),
            clip: d_gan_clip(),
            batch: d_gan_batch(),
            n_critic: d_gan_n_critic(),
            latent_dim: d_gan_latent(),
            lambda: d_gan_lambda(),
            dataset_size: d_gan_dataset(),
            snrs_db: default_attack_snrs(),
            early_stop: true,
        }
    }
}

impl GanSection {
    pub fn build(&self) -> GanTrainConfig {
        GanTrainConfig {
            lr: self.lr,
            clip: self.clip,
            batch: self.batch,
            n_critic: self.n_critic,
            latent_dim: self.latent_dim,
            lambda: self.lambda,
            dataset_size: self.dataset_size,
            epochs: self.epochs,
            train_snrs_db: self.snrs_db.clone(),
            early_stop: self.early_stop,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default = "d_base_dataset")]
    pub dataset_size: usize,
    #[serde(default = "d_base_iters")]
    pub iters: usize,
    #[serde(default = "d_base_step")]
    pub step: f64,
    #[serde(default = "d_base_lr")]
    pub lr: f64,
    #[serde(default = "d_base_kappa")]
    pub kappa: f64,
    #[serde(default = "default_attack_snrs")]
    pub snrs_db: Vec<f64>,
}

fn d_base_dataset() -> usize {
    4096
}
fn d_base_iters() -> usize {
    75
}
fn d_base_step() -> f64 {
    0.05
}
fn d_base_lr() -> f64 {
    0.01
}
fn d_base_kappa() -> f64 {
    1.0
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            dataset_size: d_base_dataset(),
            iters: d_base_iters(),
            step: d_base_step(),
            lr: d_base_lr(),
            kappa: d_base_kappa(),
            snrs_db: default_attack_snrs(),
        }
    }
}

impl BaselineSection {
    pub fn build(&self) -> BaselineAttackConfig {
        BaselineAttackConfig {
            dataset_size: self.dataset_size,
            iters: self.iters,
            step: self.step,
            lr: self.lr,
            kappa: self.kappa,
            train_snrs_db: self.snrs_db.clone(),
        }
    }
}

impl TrainFileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_experiment_config() {
        let text = r#"
            [experiment]
            kind = "bler_vs_pnr"
            seed = 7
            blocks = 100000

            [sweep]
            start_db = -10.0
            stop_db = 0.0
            step_db = 1.0

            [channel]
            kind = "awgn"
            snr_db = 8.0

            [models]
            victim = "victim.ckpt"
            artifact = "attack.ckpt"

            [attack]
            snrs_db = [0.0, 4.0, 8.0]
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.experiment.kind, ExperimentKind::BlerVsPnr);
        assert_eq!(cfg.sweep.unwrap().points().unwrap().len(), 11);
        assert_eq!(cfg.attack.snrs_db, vec![0.0, 4.0, 8.0]);
    }

    #[test]
    fn rejects_unknown_keys_and_small_blocks() {
        let bad_key = r#"
            [experiment]
            kind = "complexity"
            typo_key = 1
        "#;
        assert!(ExperimentConfig::parse(bad_key).is_err());

        let small = r#"
            [experiment]
            kind = "bler_vs_snr"
            blocks = 100

            [sweep]
            start_db = 0.0
            stop_db = 8.0
            step_db = 2.0

            [models]
            victim = "v.ckpt"
        "#;
        assert!(ExperimentConfig::parse(small).is_err());
    }

    #[test]
    fn sweep_points_are_inclusive_of_the_endpoint() {
        let sweep = SweepSection {
            start_db: -10.0,
            stop_db: 0.0,
            step_db: 1.0,
        };
        let pts = sweep.points().unwrap();
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[0], -10.0);
        assert_eq!(*pts.last().unwrap(), 0.0);
    }

    #[test]
    fn train_defaults_match_quoted_settings() {
        let cfg = TrainFileConfig::parse("").unwrap();
        let gan = cfg.train.attack.build();
        assert_eq!(gan.lr, 5e-4);
        assert_eq!(gan.clip, 0.1);
        assert_eq!(gan.batch, 32);
        assert_eq!(gan.n_critic, 5);
        assert_eq!(gan.latent_dim, 5);
        assert_eq!(gan.dataset_size, 100_000);

        let channel = cfg.channel.model().unwrap();
        let ae = cfg.train.autoencoder.build(&channel);
        assert_eq!(ae.epochs, 100);
        assert_eq!(ae.batch, 256);
        assert_eq!(ae.channel.snr_db, 4.0);

        let rayleigh = ChannelSection {
            kind: "rayleigh".into(),
            ..ChannelSection::default()
        };
        let ae_fading = cfg.train.autoencoder.build(&rayleigh.model().unwrap());
        assert_eq!(ae_fading.channel.snr_db, 10.0);
    }

    #[test]
    fn config_hash_is_stable_and_content_sensitive() {
        let a = hash_bytes(b"one");
        assert_eq!(a, hash_bytes(b"one"));
        assert_ne!(a, hash_bytes(b"two"));
        assert_eq!(a.len(), 16);
    }
}
