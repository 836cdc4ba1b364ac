//! Command-line front end: training, evaluation, sweeps and reports.
//!
//! Every subcommand is deterministic in its arguments (and config file
//! contents); result CSVs carry a hash of that configuration so files from
//! different configurations cannot be merged by `export`. Progress goes to
//! stderr; result CSV goes to stdout and, when `--out` is given, to disk.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use linklab::advgan::{
    artifact_from_checkpoint, artifact_to_checkpoint, train_attack, validate_attack,
    AttackArtifact, AttackKind,
};
use linklab::attacks::{jamming_artifact, train_baseline_artifact};
use linklab::autoenc::{
    evaluate_bler, model_from_checkpoint, model_to_checkpoint, train_autoencoder, AttackSpec,
    AutoencoderModel,
};
use linklab::channel::{ChannelKind, ChannelModel, RicianConfig};
use linklab::checkpoint::Checkpoint;
use linklab::classical::{analytic_bler, simulate_bler, Scheme};
use linklab::harness::{
    complexity_report, covertness_dump, export_merge, hash_bytes, outage_curve, rows_to_csv,
    run_sweep, ExperimentConfig, ResultRow, TrainFileConfig,
};

type Model = AutoencoderModel<f64>;
type Artifact = AttackArtifact<f64>;

#[derive(Parser)]
#[command(
    name = "linklab",
    about = "Link-level lab: (7,4) autoencoder transceiver, fading channels, perturbation attacks",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ChannelArgs {
    /// Channel kind: awgn | rayleigh | rician
    #[arg(long, default_value = "awgn")]
    channel: String,
    /// Per-symbol SNR in dB (inf = noiseless)
    #[arg(long, default_value_t = 8.0)]
    snr_db: f64,
    /// Transmitter-receiver distance for the two-slope Rician K model
    #[arg(long)]
    distance_m: Option<f64>,
    /// Fixed Rician K override in dB
    #[arg(long)]
    k_factor_db: Option<f64>,
}

impl ChannelArgs {
    fn model(&self) -> Result<ChannelModel> {
        Ok(ChannelModel {
            kind: ChannelKind::parse(&self.channel)?,
            snr_db: self.snr_db,
            rician: RicianConfig {
                distance_m: self.distance_m,
                k_override_db: self.k_factor_db,
                ..RicianConfig::default()
            },
        })
    }

    fn canon(&self) -> String {
        format!(
            "channel={};snr_db={};distance_m={:?};k_factor_db={:?}",
            self.channel, self.snr_db, self.distance_m, self.k_factor_db
        )
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the (7,4) autoencoder transceiver and save a checkpoint.
    TrainAutoencoder {
        /// TOML training config; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the WGAN perturbation generator against a frozen victim.
    TrainAttack {
        #[arg(long)]
        victim: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a baseline attack artifact (jamming, universal, cw).
    TrainBaselineAttack {
        /// jamming | universal | cw
        #[arg(long)]
        kind: String,
        #[arg(long)]
        victim: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo BLER of a trained model, optionally under attack.
    EvalBler {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 1_000_000)]
        blocks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Attack artifact path, or the literal `jamming`
        #[arg(long)]
        attack: Option<String>,
        #[arg(long)]
        pnr_db: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BLER of a classical baseline (Monte Carlo, or closed form on AWGN).
    BaselineBler {
        /// uncoded | hamming
        #[arg(long)]
        scheme: String,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 1_000_000)]
        blocks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Closed-form instead of Monte Carlo (AWGN only)
        #[arg(long)]
        analytic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BLER of a victim under a trained attack artifact at a given PNR.
    ValidateAttack {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        victim: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, allow_hyphen_values = true)]
        pnr_db: f64,
        #[arg(long, default_value_t = 1_000_000)]
        blocks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configured sweep; one CSV per curve into --out-dir.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Outage-probability experiment on the Rician HSR channel.
    Outage {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump paired clean/adversarial waveforms plus summary statistics.
    Covertness {
        #[arg(long)]
        victim: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        pnr_db: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parameter and FLOP accounting next to the published numbers.
    ReportComplexity {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge result CSVs, rejecting mixed config hashes.
    Export {
        #[arg(long)]
        out: PathBuf,
        inputs: Vec<PathBuf>,
    },
}

fn read_config(path: &Option<PathBuf>) -> Result<(String, String)> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let hash = hash_bytes(text.as_bytes());
            Ok((text, hash))
        }
        None => Ok((String::new(), hash_bytes(b"default"))),
    }
}

fn load_model(path: &Path) -> Result<Model> {
    let ck = Checkpoint::<f64>::load(path)
        .with_context(|| format!("loading model {}", path.display()))?;
    Ok(model_from_checkpoint(&ck)?)
}

fn load_artifact(path: &Path) -> Result<Artifact> {
    let ck = Checkpoint::<f64>::load(path)
        .with_context(|| format!("loading artifact {}", path.display()))?;
    Ok(artifact_from_checkpoint(&ck)?)
}

fn resolve_attack(spec: &str) -> Result<Artifact> {
    if spec == "jamming" {
        Ok(jamming_artifact())
    } else {
        load_artifact(Path::new(spec))
    }
}

fn emit(rows: &[ResultRow], out: &Option<PathBuf>) -> Result<()> {
    let bytes = rows_to_csv(rows)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    if let Some(path) = out {
        fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn bler_row(
    experiment: &str,
    channel: &ChannelModel,
    est: linklab::bler::BlerEstimate,
    pnr_db: Option<f64>,
    attack: Option<String>,
    seed: u64,
    config_hash: &str,
) -> ResultRow {
    ResultRow {
        experiment: experiment.into(),
        channel: channel.kind.name().into(),
        snr_db: channel.snr_db,
        pnr_db,
        attack,
        blocks: est.blocks,
        errors: est.errors,
        bler: Some(est.bler()),
        bler_ci95: Some(est.ci95_halfwidth()),
        outage_prob: None,
        seed,
        config_hash: config_hash.into(),
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::TrainAutoencoder { config, out, seed } => {
            let (text, hash) = read_config(&config)?;
            let cfg = TrainFileConfig::parse(&text)?;
            let channel = cfg.channel.model()?;
            let train_cfg = cfg.train.autoencoder.build(&channel);
            eprintln!(
                "training autoencoder: {} epochs x {} messages on {} at {} dB (seed {seed})",
                train_cfg.epochs,
                train_cfg.messages_per_epoch,
                train_cfg.channel.kind.name(),
                train_cfg.channel.snr_db
            );
            let (model, report) = train_autoencoder::<f64>(&train_cfg, seed)?;
            let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
            eprintln!("final epoch loss {last:.6}");
            let meta = vec![
                ("train_channel".to_string(), train_cfg.channel.kind.name().to_string()),
                ("train_snr_db".to_string(), train_cfg.channel.snr_db.to_string()),
                ("epochs".to_string(), train_cfg.epochs.to_string()),
                ("seed".to_string(), seed.to_string()),
            ];
            model_to_checkpoint(&model, &hash, &meta).save(&out)?;
            eprintln!("saved {}", out.display());
            Ok(())
        }

        Cmd::TrainAttack {
            victim,
            config,
            out,
            seed,
        } => {
            let (text, hash) = read_config(&config)?;
            let cfg = TrainFileConfig::parse(&text)?;
            let channel = cfg.channel.model()?;
            let gan_cfg = cfg.train.attack.build();
            let victim_model = load_model(&victim)?;
            eprintln!(
                "training attack generator: {} epochs over {} samples, lambda {} (seed {seed})",
                gan_cfg.epochs, gan_cfg.dataset_size, gan_cfg.lambda
            );
            let (artifact, stats) = train_attack(&gan_cfg, &victim_model, &channel, seed)?;
            eprintln!(
                "ran {} epochs ({} critic / {} generator updates), max |critic w| {:.4}{}",
                stats.epochs_run,
                stats.critic_updates,
                stats.generator_updates,
                stats.max_abs_critic_weight,
                if stats.early_stopped { ", early-stopped" } else { "" }
            );
            artifact_to_checkpoint(&artifact, &hash).save(&out)?;
            eprintln!("saved {}", out.display());
            Ok(())
        }

        Cmd::TrainBaselineAttack {
            kind,
            victim,
            config,
            out,
            seed,
        } => {
            let (text, hash) = read_config(&config)?;
            let cfg = TrainFileConfig::parse(&text)?;
            let channel = cfg.channel.model()?;
            let base_cfg = cfg.train.baseline.build();
            let victim_model = load_model(&victim)?;
            let kind = AttackKind::parse(&kind)?;
            let artifact =
                train_baseline_artifact(kind, &base_cfg, &victim_model, &channel, seed)?;
            artifact_to_checkpoint(&artifact, &hash).save(&out)?;
            eprintln!("saved {} artifact to {}", kind.name(), out.display());
            Ok(())
        }

        Cmd::EvalBler {
            model,
            channel,
            blocks,
            seed,
            attack,
            pnr_db,
            out,
        } => {
            let ch = channel.model()?;
            let victim = load_model(&model)?;
            let canon = format!(
                "eval-bler;model={};{};blocks={blocks};seed={seed};attack={:?};pnr_db={:?}",
                model.display(),
                channel.canon(),
                attack,
                pnr_db
            );
            let hash = hash_bytes(canon.as_bytes());
            let row = match attack {
                Some(spec) => {
                    let pnr = pnr_db
                        .ok_or_else(|| anyhow::anyhow!("--attack requires --pnr-db"))?;
                    let artifact = resolve_attack(&spec)?;
                    let attack_spec = AttackSpec {
                        perturber: &artifact,
                        pnr_db: pnr,
                    };
                    let est = evaluate_bler(&victim, &ch, blocks, seed, Some(&attack_spec))?;
                    bler_row(
                        "eval_bler",
                        &ch,
                        est,
                        Some(pnr),
                        Some(artifact.kind().name().into()),
                        seed,
                        &hash,
                    )
                }
                None => {
                    let est = evaluate_bler(&victim, &ch, blocks, seed, None)?;
                    bler_row("eval_bler", &ch, est, None, None, seed, &hash)
                }
            };
            emit(&[row], &out)
        }

        Cmd::BaselineBler {
            scheme,
            channel,
            blocks,
            seed,
            analytic,
            out,
        } => {
            let ch = channel.model()?;
            let scheme = Scheme::parse(&scheme)?;
            let canon = format!(
                "baseline-bler;scheme={};{};blocks={blocks};seed={seed};analytic={analytic}",
                scheme.name(),
                channel.canon()
            );
            let hash = hash_bytes(canon.as_bytes());
            let row = if analytic {
                let bler = analytic_bler(scheme, ch.kind, ch.snr_db)?;
                ResultRow {
                    experiment: "baseline_bler_analytic".into(),
                    channel: ch.kind.name().into(),
                    snr_db: ch.snr_db,
                    pnr_db: None,
                    attack: Some(scheme.name().into()),
                    blocks: 0,
                    errors: 0,
                    bler: Some(bler),
                    bler_ci95: None,
                    outage_prob: None,
                    seed,
                    config_hash: hash,
                }
            } else {
                let est = simulate_bler::<f64>(scheme, &ch, blocks, seed);
                bler_row(
                    "baseline_bler",
                    &ch,
                    est,
                    None,
                    Some(scheme.name().into()),
                    seed,
                    &hash,
                )
            };
            emit(&[row], &out)
        }

        Cmd::ValidateAttack {
            artifact,
            victim,
            channel,
            pnr_db,
            blocks,
            seed,
            out,
        } => {
            let ch = channel.model()?;
            let victim_model = load_model(&victim)?;
            let art = load_artifact(&artifact)?;
            let canon = format!(
                "validate-attack;artifact={};victim={};{};pnr_db={pnr_db};blocks={blocks};seed={seed}",
                artifact.display(),
                victim.display(),
                channel.canon()
            );
            let hash = hash_bytes(canon.as_bytes());
            let est = validate_attack(&art, &victim_model, &ch, pnr_db, blocks, seed)?;
            let row = bler_row(
                "validate_attack",
                &ch,
                est,
                Some(pnr_db),
                Some(art.kind().name().into()),
                seed,
                &hash,
            );
            emit(&[row], &out)
        }

        Cmd::Sweep { config, out_dir } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            let hash = hash_bytes(text.as_bytes());
            let cfg = ExperimentConfig::parse(&text)?;
            let victim = cfg
                .models
                .victim
                .as_ref()
                .map(|p| load_model(Path::new(p)))
                .transpose()?;
            let artifact = cfg
                .models
                .artifact
                .as_ref()
                .map(|p| resolve_attack(p))
                .transpose()?;
            let outputs = run_sweep(&cfg, &hash, victim.as_ref(), artifact.as_ref())?;
            fs::create_dir_all(&out_dir)?;
            for output in &outputs {
                let path = out_dir.join(format!(
                    "{}_{}.csv",
                    cfg.experiment.kind.name(),
                    output.name
                ));
                fs::write(&path, rows_to_csv(&output.rows)?)?;
                eprintln!("wrote {} ({} rows)", path.display(), output.rows.len());
            }
            Ok(())
        }

        Cmd::Outage { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            let hash = hash_bytes(text.as_bytes());
            let cfg = ExperimentConfig::parse(&text)?;
            let victim = cfg
                .models
                .victim
                .as_ref()
                .map(|p| load_model(Path::new(p)))
                .transpose()?;
            let artifact = cfg
                .models
                .artifact
                .as_ref()
                .map(|p| resolve_attack(p))
                .transpose()?;
            let rows = outage_curve(&cfg, &hash, victim.as_ref(), artifact.as_ref())?;
            let bytes = rows_to_csv(&rows)?;
            print!("{}", String::from_utf8_lossy(&bytes));
            fs::write(&out, &bytes)?;
            eprintln!("wrote {} ({} rows)", out.display(), rows.len());
            Ok(())
        }

        Cmd::Covertness {
            victim,
            artifact,
            channel,
            pnr_db,
            samples,
            seed,
            out,
        } => {
            let ch = channel.model()?;
            let victim_model = load_model(&victim)?;
            let art = load_artifact(&artifact)?;
            let (csv, summary) = covertness_dump(&victim_model, &art, &ch, pnr_db, samples, seed)?;
            fs::write(&out, &csv)?;
            eprintln!("wrote {} ({} samples)", out.display(), summary.samples);
            println!("noise_power {}", summary.noise_power);
            println!("perturbation_power {}", summary.perturbation_power);
            println!("power_ratio {}", summary.power_ratio);
            println!("mean_l2_difference {}", summary.mean_l2_difference);
            println!("max_symbol_deviation {}", summary.max_symbol_deviation);
            println!(
                "max_deviation_noise_sigmas {}",
                summary.max_deviation_noise_sigmas
            );
            Ok(())
        }

        Cmd::ReportComplexity { out } => {
            let rows = complexity_report();
            let mut text = String::from(
                "network,params,published_params,params_match,flops,published_flops,flops_match\n",
            );
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.network,
                    r.params,
                    r.published_params,
                    r.params_match(),
                    r.flops,
                    r.published_flops,
                    r.flops_match()
                ));
            }
            print!("{text}");
            if let Some(path) = out {
                fs::write(path, text.as_bytes())?;
            }
            Ok(())
        }

        Cmd::Export { out, inputs } => {
            if inputs.is_empty() {
                bail!("export needs at least one input CSV");
            }
            let rows = export_merge(&inputs, &out)?;
            eprintln!("merged {rows} rows into {}", out.display());
            Ok(())
        }
    }
}
