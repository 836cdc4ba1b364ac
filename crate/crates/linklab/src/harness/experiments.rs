//! Experiment bodies behind the CLI subcommands.

use crate::advgan::{scale_to_pnr, AttackArtifact};
use crate::autoenc::{evaluate_bler, AttackSpec, AutoencoderModel, NUM_MESSAGES};
use crate::bler::parallel_blocks;
use crate::channel::{draw_rician_amplitude, ChannelKind, ChannelModel};
use crate::classical::{simulate_bler, Scheme};
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, ExperimentKind, ResultRow};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, substream};
use rand::Rng;

/// One curve file of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub name: String,
    pub rows: Vec<ResultRow>,
}

fn base_row(cfg: &ExperimentConfig, config_hash: &str, snr_db: f64) -> ResultRow {
    ResultRow {
        experiment: cfg.experiment.kind.name().into(),
        channel: cfg.channel.kind.clone(),
        snr_db,
        pnr_db: None,
        attack: None,
        blocks: 0,
        errors: 0,
        bler: None,
        bler_ci95: None,
        outage_prob: None,
        seed: cfg.experiment.seed,
        config_hash: config_hash.into(),
    }
}

/// BLER sweeps (Figs. of BLER vs SNR and BLER vs PNR). One output per curve;
/// every point owns a derived seed, so adding curves never shifts results.
pub fn run_sweep<T: Scalar>(
    cfg: &ExperimentConfig,
    config_hash: &str,
    victim: Option<&AutoencoderModel<T>>,
    artifact: Option<&AttackArtifact<T>>,
) -> Result<Vec<SweepOutput>> {
    let channel = cfg.channel.model()?;
    let blocks = cfg.experiment.blocks;
    let master = cfg.experiment.seed;

    match cfg.experiment.kind {
        ExperimentKind::BlerVsSnr => {
            let victim = victim.ok_or_else(|| {
                Error::InvalidConfig("bler_vs_snr needs a victim model".into())
            })?;
            let points = cfg.sweep.as_ref().unwrap().points()?;

            let mut ae = Vec::new();
            let mut uncoded = Vec::new();
            let mut hamming = Vec::new();
            let mut attacked = Vec::new();
            for (i, &snr) in points.iter().enumerate() {
                let ch = channel.with_snr(snr);

                let est = evaluate_bler(victim, &ch, blocks, derive_seed(master, "sweep-ae", i as u64), None)?;
                let mut row = base_row(cfg, config_hash, snr);
                row.blocks = est.blocks;
                row.errors = est.errors;
                row.bler = Some(est.bler());
                row.bler_ci95 = Some(est.ci95_halfwidth());
                ae.push(row);

                for (scheme, out) in [
                    (Scheme::UncodedBpskK4, &mut uncoded),
                    (Scheme::Hamming74Bpsk, &mut hamming),
                ] {
                    let label = format!("sweep-{}", scheme.name());
                    let est = simulate_bler::<T>(scheme, &ch, blocks, derive_seed(master, &label, i as u64));
                    let mut row = base_row(cfg, config_hash, snr);
                    row.attack = Some("none".into());
                    row.attack = None;
                    row.blocks = est.blocks;
                    row.errors = est.errors;
                    row.bler = Some(est.bler());
                    row.bler_ci95 = Some(est.ci95_halfwidth());
                    out.push(row);
                }

                if let Some(artifact) = artifact {
                    let spec = AttackSpec {
                        perturber: artifact,
                        pnr_db: cfg.attack.pnr_db,
                    };
                    let est = evaluate_bler(
                        victim,
                        &ch,
                        blocks,
                        derive_seed(master, "sweep-ae-attacked", i as u64),
                        Some(&spec),
                    )?;
                    let mut row = base_row(cfg, config_hash, snr);
                    row.pnr_db = Some(cfg.attack.pnr_db);
                    row.attack = Some(artifact.kind().name().into());
                    row.blocks = est.blocks;
                    row.errors = est.errors;
                    row.bler = Some(est.bler());
                    row.bler_ci95 = Some(est.ci95_halfwidth());
                    attacked.push(row);
                }
            }

            let mut outputs = vec![
                SweepOutput { name: "autoencoder".into(), rows: ae },
                SweepOutput { name: "uncoded".into(), rows: uncoded },
                SweepOutput { name: "hamming".into(), rows: hamming },
            ];
            if !attacked.is_empty() {
                outputs.push(SweepOutput { name: "autoencoder_attacked".into(), rows: attacked });
            }
            Ok(outputs)
        }

        ExperimentKind::BlerVsPnr => {
            let victim = victim.ok_or_else(|| {
                Error::InvalidConfig("bler_vs_pnr needs a victim model".into())
            })?;
            let artifact = artifact.ok_or_else(|| {
                Error::InvalidConfig("bler_vs_pnr needs an attack artifact".into())
            })?;
            let pnrs = cfg.sweep.as_ref().unwrap().points()?;

            let mut outputs = Vec::new();
            for (si, &snr) in cfg.attack.snrs_db.iter().enumerate() {
                let ch = channel.with_snr(snr);
                let mut rows = Vec::new();

                if cfg.attack.include_no_attack {
                    let est = evaluate_bler(
                        victim,
                        &ch,
                        blocks,
                        derive_seed(master, "pnr-clean", si as u64),
                        None,
                    )?;
                    let mut row = base_row(cfg, config_hash, snr);
                    row.blocks = est.blocks;
                    row.errors = est.errors;
                    row.bler = Some(est.bler());
                    row.bler_ci95 = Some(est.ci95_halfwidth());
                    rows.push(row);
                }

                for (pi, &pnr) in pnrs.iter().enumerate() {
                    let spec = AttackSpec {
                        perturber: artifact,
                        pnr_db: pnr,
                    };
                    let est = evaluate_bler(
                        victim,
                        &ch,
                        blocks,
                        derive_seed(master, &format!("pnr-attacked-{si}"), pi as u64),
                        Some(&spec),
                    )?;
                    let mut row = base_row(cfg, config_hash, snr);
                    row.pnr_db = Some(pnr);
                    row.attack = Some(artifact.kind().name().into());
                    row.blocks = est.blocks;
                    row.errors = est.errors;
                    row.bler = Some(est.bler());
                    row.bler_ci95 = Some(est.ci95_halfwidth());
                    rows.push(row);
                }

                outputs.push(SweepOutput {
                    name: format!("snr{snr}db"),
                    rows,
                });
            }
            Ok(outputs)
        }

        other => Err(Error::InvalidConfig(format!(
            "run_sweep does not handle experiment kind {}; use its dedicated command",
            other.name()
        ))),
    }
}

/// Capacity-outage threshold on `|h|²·SNR_linear`: `2^(R/B) − 1`.
pub fn outage_threshold(rate_mbps: f64, bandwidth_mhz: f64) -> f64 {
    2f64.powf(rate_mbps / bandwidth_mhz) - 1.0
}

/// Outage probability vs SNR for the Rician HSR channel, optionally paired
/// with the victim's (attacked) BLER at each point.
pub fn outage_curve<T: Scalar>(
    cfg: &ExperimentConfig,
    config_hash: &str,
    victim: Option<&AutoencoderModel<T>>,
    artifact: Option<&AttackArtifact<T>>,
) -> Result<Vec<ResultRow>> {
    let channel = cfg.channel.model()?;
    if channel.kind != ChannelKind::RicianHsr {
        return Err(Error::InvalidConfig(
            "the outage experiment is defined on the rician channel".into(),
        ));
    }
    let points = cfg.sweep.as_ref().unwrap().points()?;
    let master = cfg.experiment.seed;
    let threshold = outage_threshold(cfg.outage.rate_mbps, cfg.outage.bandwidth_mhz);
    let k_linear = channel.k_factor_linear();

    let mut rows = Vec::new();
    for (i, &snr) in points.iter().enumerate() {
        let snr_linear = 10f64.powf(snr / 10.0);
        let gain_floor = threshold / snr_linear;
        let point_seed = derive_seed(master, "outage-point", i as u64);
        let est = parallel_blocks(cfg.outage.draws, |ci, draws| {
            let mut rng = substream(point_seed, "outage-draws", ci);
            let mut outages = 0;
            for _ in 0..draws {
                let amp: f64 = draw_rician_amplitude(k_linear, &mut rng);
                if amp * amp < gain_floor {
                    outages += 1;
                }
            }
            outages
        });
        let p_out = est.bler();

        let ch = channel.with_snr(snr);
        let mut clean = base_row(cfg, config_hash, snr);
        clean.outage_prob = Some(p_out);
        if let Some(victim) = victim {
            let est = evaluate_bler(
                victim,
                &ch,
                cfg.experiment.blocks,
                derive_seed(master, "outage-bler", i as u64),
                None,
            )?;
            clean.blocks = est.blocks;
            clean.errors = est.errors;
            clean.bler = Some(est.bler());
            clean.bler_ci95 = Some(est.ci95_halfwidth());
        }
        rows.push(clean);

        if let (Some(victim), Some(artifact)) = (victim, artifact) {
            let spec = AttackSpec {
                perturber: artifact,
                pnr_db: cfg.attack.pnr_db,
            };
            let est = evaluate_bler(
                victim,
                &ch,
                cfg.experiment.blocks,
                derive_seed(master, "outage-bler-attacked", i as u64),
                Some(&spec),
            )?;
            let mut row = base_row(cfg, config_hash, snr);
            row.pnr_db = Some(cfg.attack.pnr_db);
            row.attack = Some(artifact.kind().name().into());
            row.blocks = est.blocks;
            row.errors = est.errors;
            row.bler = Some(est.bler());
            row.bler_ci95 = Some(est.ci95_halfwidth());
            row.outage_prob = Some(p_out);
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct CovertnessSummary {
    pub samples: usize,
    pub noise_power: f64,
    pub perturbation_power: f64,
    /// Perturbation power over noise power; equals `10^(PNR/10)` by the
    /// scaling rule.
    pub power_ratio: f64,
    pub mean_l2_difference: f64,
    pub max_symbol_deviation: f64,
    pub max_deviation_noise_sigmas: f64,
}

/// Paired clean/adversarial waveform dump (Fig.-7-style data): CSV columns
/// `index, clean0..clean6, adv0..adv6`, plus summary statistics.
pub fn covertness_dump<T: Scalar>(
    victim: &AutoencoderModel<T>,
    artifact: &AttackArtifact<T>,
    channel: &ChannelModel,
    pnr_db: f64,
    samples: usize,
    seed: u64,
) -> Result<(Vec<u8>, CovertnessSummary)> {
    let sigma2 = channel.noise_variance();
    let mut rng = substream(seed, "covertness", 0);
    let indices: Vec<u8> = (0..samples)
        .map(|_| rng.gen_range(0..NUM_MESSAGES as u8))
        .collect();
    let symbols = victim.encode(&indices)?;
    let clean = channel.apply(&symbols, &mut rng)?;
    let raw = crate::advgan::generate_perturbation(artifact, samples, &mut rng)?;
    let perturbation = scale_to_pnr(&raw, sigma2, pnr_db)?;

    let mut adv = clean.clone();
    for (a, p) in adv.values_mut().iter_mut().zip(perturbation.values()) {
        *a += *p;
    }

    let mut csv = String::new();
    csv.push_str("index");
    for i in 0..7 {
        csv.push_str(&format!(",clean{i}"));
    }
    for i in 0..7 {
        csv.push_str(&format!(",adv{i}"));
    }
    csv.push('\n');
    for bi in 0..samples {
        csv.push_str(&format!("{bi}"));
        for v in clean.row(bi) {
            csv.push_str(&format!(",{}", v.to_f64().unwrap()));
        }
        for v in adv.row(bi) {
            csv.push_str(&format!(",{}", v.to_f64().unwrap()));
        }
        csv.push('\n');
    }

    let p_power = perturbation.mean_square().to_f64().unwrap();
    let mut l2_sum = 0.0;
    let mut max_dev = 0.0f64;
    for bi in 0..samples {
        let mut sq = 0.0;
        for p in perturbation.row(bi) {
            let pf = p.to_f64().unwrap();
            sq += pf * pf;
            max_dev = max_dev.max(pf.abs());
        }
        l2_sum += sq.sqrt();
    }
    let summary = CovertnessSummary {
        samples,
        noise_power: sigma2,
        perturbation_power: p_power,
        power_ratio: p_power / sigma2,
        mean_l2_difference: l2_sum / samples as f64,
        max_symbol_deviation: max_dev,
        max_deviation_noise_sigmas: max_dev / sigma2.sqrt(),
    };
    Ok((csv.into_bytes(), summary))
}

/// Parameter/FLOP accounting of the four networks next to the published
/// numbers, with match flags.
#[derive(Debug, Clone)]
pub struct ComplexityRow {
    pub network: &'static str,
    pub params: usize,
    pub published_params: usize,
    pub flops: u64,
    pub published_flops: u64,
}

impl ComplexityRow {
    pub fn params_match(&self) -> bool {
        self.params == self.published_params
    }

    pub fn flops_match(&self) -> bool {
        self.flops == self.published_flops
    }
}

pub fn complexity_report() -> Vec<ComplexityRow> {
    // Counts depend only on the architectures, not on the weights.
    let mut rng = substream(0, "complexity", 0);
    let generator = crate::advgan::build_generator::<f64, _>(&mut rng);
    let critic = crate::advgan::build_critic::<f64, _>(&mut rng);
    let encoder = crate::autoenc::build_encoder::<f64, _>(&mut rng);
    let decoder = crate::autoenc::build_decoder::<f64, _>(&mut rng);
    vec![
        ComplexityRow {
            network: "gan_generator",
            params: generator.count_params(),
            published_params: 543,
            flops: generator.count_flops(),
            published_flops: 50_180,
        },
        ComplexityRow {
            network: "gan_discriminator",
            params: critic.count_params(),
            published_params: 417,
            flops: critic.count_flops(),
            published_flops: 12_290,
        },
        ComplexityRow {
            network: "intelligent_encoder",
            params: encoder.count_params(),
            published_params: 133,
            flops: encoder.count_flops(),
            published_flops: 4_480,
        },
        ComplexityRow {
            network: "intelligent_decoder",
            params: decoder.count_params(),
            published_params: 400,
            flops: decoder.count_flops(),
            published_flops: 11_780,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn outage_threshold_matches_capacity_inversion() {
        // 2^(50/18) − 1 ≈ 5.858, i.e. about 7.68 dB.
        let t = outage_threshold(50.0, 18.0);
        assert_relative_eq!(t, 2f64.powf(50.0 / 18.0) - 1.0, epsilon = 1e-15);
        assert!((t - 5.858).abs() < 1e-3, "{t}");
        assert!((10.0 * t.log10() - 7.68).abs() < 0.01);
    }

    #[test]
    fn complexity_report_flags_the_encoder_mismatch() {
        let rows = complexity_report();
        let by_name = |n: &str| rows.iter().find(|r| r.network == n).unwrap().clone();
        assert!(by_name("gan_generator").params_match());
        assert!(by_name("gan_discriminator").params_match());
        assert!(by_name("intelligent_decoder").params_match());
        let enc = by_name("intelligent_encoder");
        assert!(!enc.params_match());
        assert_eq!(enc.params, 405);
    }
}
