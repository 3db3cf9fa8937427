//! Command-line interface: data generation, training, sampling, evaluation,
//! parameter census, and verification harnesses.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::adaptors::{controlled_denoise_tensor, AdaptorBranch, AdaptorVariant};
use crate::backbone::{Backbone, SamplerConfig, StyleCond};
use crate::conditions::{read_condition_csv, write_condition_csv, ConditionKind, ConditionMap};
use crate::error::{Error, Result};
use crate::numerics::rng::RngKey;
use crate::numerics::tensor::Tensor;
use crate::numerics::Real;
use crate::trainer::{
    load_checkpoint, save_checkpoint, store_digest, train_adaptor, train_backbone, Checkpoint,
    CheckpointKind,
};

use super::codec::LatentCodec;
use super::configfile::ExperimentConfig;
use super::data::{generate_dataset, SyntheticSample};
use super::eval::{
    condition_map_for, eval_adherence, eval_conflict, report_params, to_train_items,
    ConflictSetting, EvalReport,
};
use super::gradsuite::standard_grad_checks;
use super::sampling::{sample, GenConditions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Parser, Debug)]
#[command(name = "lilac", version, about = "Desk-scale controllable diffusion: adaptor branches over a frozen denoiser")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output directory for checkpoints, logs, and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate the synthetic dataset manifest (and optional condition dumps).
    GenData {
        /// Write chroma/chord condition CSVs for the first N samples.
        #[arg(long, default_value_t = 0)]
        dump_conditions: usize,
    },
    /// Pre-train the denoiser backbone.
    TrainBackbone,
    /// Train an adaptor branch against a frozen backbone checkpoint.
    TrainAdaptor {
        #[arg(long)]
        variant: String,
        #[arg(long, default_value = "chroma")]
        condition: String,
        #[arg(long)]
        backbone: Option<PathBuf>,
    },
    /// Generate one latent and write its decoded chromagram.
    Sample {
        #[arg(long)]
        backbone: Option<PathBuf>,
        #[arg(long)]
        adaptor: Option<PathBuf>,
        /// Condition map CSV (required when an adaptor is given).
        #[arg(long)]
        condition_csv: Option<PathBuf>,
        /// Style id; omitted = null style.
        #[arg(long)]
        style: Option<usize>,
        #[arg(long, default_value_t = 30)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        cfg_weight: f64,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Condition-adherence report over the held-out set.
    EvalAdherence {
        #[arg(long)]
        backbone: Option<PathBuf>,
        /// Adaptor checkpoints to evaluate (repeatable).
        #[arg(long = "adaptor")]
        adaptors: Vec<PathBuf>,
    },
    /// Conflictive-conditioning report for one setting.
    EvalConflict {
        #[arg(long)]
        setting: String,
        #[arg(long)]
        backbone: Option<PathBuf>,
        #[arg(long)]
        adaptor: Option<PathBuf>,
    },
    /// Parameter census (all variants, or one).
    Params {
        #[arg(long)]
        variant: Option<String>,
    },
    /// Assert initialization equivalence for adaptor variants.
    InitCheck {
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Finite-difference verification of gradients (always runs in f64).
    GradCheck,
}

/// Entry point; returns the process exit code (0 ok, 1 contract-level
/// failures, 2 file-level failures).
pub fn cli_main(args: impl Iterator<Item = String>) -> i32 {
    let argv = std::iter::once("lilac".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.precision {
        Precision::F32 => run::<f32>(cli),
        Precision::F64 => run::<f64>(cli),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match cli_config {
        Some(path) => ExperimentConfig::load(path),
        None => {
            let cfg = ExperimentConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn split_dataset<R: Real>(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Vec<SyntheticSample<R>>, Vec<SyntheticSample<R>>)> {
    let total = cfg.data.n_samples + cfg.eval.samples;
    let mut all = generate_dataset::<R>(&cfg.data, total, seed)?;
    let test = all.split_off(cfg.data.n_samples);
    Ok((all, test))
}

fn codec_for(cfg: &ExperimentConfig, seed: u64) -> Result<LatentCodec> {
    LatentCodec::new(
        cfg.backbone.latent_channels,
        cfg.data.num_styles,
        cfg.data.texture_sigma,
        seed,
    )
}

fn backbone_meta(cfg: &ExperimentConfig, seed: u64) -> serde_json::Value {
    json!({
        "kind": "backbone",
        "config": cfg,
        "seed": seed,
        "config_digest": cfg.digest(),
    })
}

/// Rebuilds a backbone (and its experiment config and seed) from a checkpoint.
fn load_backbone_ckpt<R: Real>(path: &Path) -> Result<(Backbone<R>, ExperimentConfig, u64)> {
    let ck = load_checkpoint(path)?;
    if ck.kind != CheckpointKind::Backbone {
        return Err(Error::Format(format!("{} is not a backbone checkpoint", path.display())));
    }
    let cfg: ExperimentConfig = serde_json::from_value(ck.meta["config"].clone())
        .map_err(|e| Error::Format(format!("backbone checkpoint metadata: {e}")))?;
    cfg.validate()?;
    let seed = ck.meta["seed"]
        .as_u64()
        .ok_or_else(|| Error::Format("backbone checkpoint missing seed".into()))?;
    let mut backbone = Backbone::<R>::new(cfg.backbone.clone(), seed)?;
    ck.load_into(&mut backbone.params)?;
    Ok((backbone, cfg, seed))
}

/// Rebuilds an adaptor against a backbone, verifying the recorded backbone
/// digest.
fn load_adaptor_ckpt<R: Real>(
    path: &Path,
    backbone: &Backbone<R>,
) -> Result<(AdaptorBranch<R>, ConditionKind, u64)> {
    let ck: Checkpoint = load_checkpoint(path)?;
    if ck.kind != CheckpointKind::Adaptor {
        return Err(Error::Format(format!("{} is not an adaptor checkpoint", path.display())));
    }
    let variant: AdaptorVariant = serde_json::from_value(ck.meta["variant"].clone())
        .map_err(|e| Error::Format(format!("adaptor checkpoint metadata: {e}")))?;
    let kind = ConditionKind::parse(
        ck.meta["condition"]
            .as_str()
            .ok_or_else(|| Error::Format("adaptor checkpoint missing condition kind".into()))?,
    )?;
    let expected = ck.meta["backbone_digest"]
        .as_str()
        .ok_or_else(|| Error::Format("adaptor checkpoint missing backbone digest".into()))?;
    let actual = store_digest(&backbone.params);
    if expected != actual {
        return Err(Error::Integrity(format!(
            "adaptor was trained against backbone {expected}, loaded backbone is {actual}"
        )));
    }
    let seed = ck.meta["seed"].as_u64().unwrap_or(0);
    let mut branch = AdaptorBranch::<R>::new(backbone, variant, 12, seed)?;
    ck.load_into(&mut branch.params)?;
    Ok((branch, kind, seed))
}

fn default_backbone_path(out: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out.join("backbone.ckpt"))
}

fn run<R: Real>(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Cmd::GenData { dump_conditions } => {
            let cfg = load_config(&cli.config)?;
            let (train, test) = split_dataset::<R>(&cfg, cli.seed)?;
            let manifest = json!({
                "seed": cli.seed,
                "n_train": train.len(),
                "n_eval": test.len(),
                "t_latent": cfg.data.t_latent,
                "num_styles": cfg.data.num_styles,
                "config_digest": cfg.digest(),
            });
            let manifest_toml = toml::to_string_pretty(&manifest)
                .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
            std::fs::write(cli.out.join("dataset.toml"), manifest_toml)?;
            cfg.save(&cli.out.join("config.toml"))?;
            if *dump_conditions > 0 {
                let dir = cli.out.join("conditions");
                std::fs::create_dir_all(&dir)?;
                for (i, s) in train.iter().take(*dump_conditions).enumerate() {
                    let ch = condition_map_for(s, ConditionKind::Chroma)?;
                    write_condition_csv(
                        &dir.join(format!("sample{i}_chroma.csv")),
                        &ch,
                        Some(cfg.backbone.frame_rate_hz),
                    )?;
                    let cd = condition_map_for(s, ConditionKind::Chord)?;
                    write_condition_csv(
                        &dir.join(format!("sample{i}_chord.csv")),
                        &cd,
                        Some(cfg.backbone.frame_rate_hz),
                    )?;
                }
            }
            println!(
                "dataset: {} train + {} eval samples, {} frames, {} styles (seed {})",
                train.len(),
                test.len(),
                cfg.data.t_latent,
                cfg.data.num_styles,
                cli.seed
            );
            Ok(())
        }

        Cmd::TrainBackbone => {
            let cfg = load_config(&cli.config)?;
            let (train_samples, _) = split_dataset::<R>(&cfg, cli.seed)?;
            let codec = codec_for(&cfg, cli.seed)?;
            let items = to_train_items(&train_samples, &codec, None)?;
            let (backbone, log) = train_backbone(&cfg.backbone, &cfg.train, &items, cli.seed)?;
            let path = cli.out.join("backbone.ckpt");
            save_checkpoint(
                &path,
                CheckpointKind::Backbone,
                &backbone_meta(&cfg, cli.seed),
                &backbone.params,
            )?;
            log.write_csv(&cli.out.join("train_backbone.csv"))?;
            println!(
                "backbone: {} params, loss {:.4} -> {:.4}, digest {}, saved {}",
                backbone.total_params(),
                log.mean_loss_first(50),
                log.mean_loss_last(50),
                store_digest(&backbone.params),
                path.display()
            );
            Ok(())
        }

        Cmd::TrainAdaptor { variant, condition, backbone } => {
            let variant = AdaptorVariant::parse(variant)?;
            let kind = ConditionKind::parse(condition)?;
            let bpath = default_backbone_path(&cli.out, backbone);
            let (backbone_model, cfg, data_seed) = load_backbone_ckpt::<R>(&bpath)?;
            let (train_samples, _) = split_dataset::<R>(&cfg, data_seed)?;
            let codec = codec_for(&cfg, data_seed)?;
            let items = to_train_items(&train_samples, &codec, Some(kind))?;
            let digest_before = store_digest(&backbone_model.params);
            let (branch, log) =
                train_adaptor(&backbone_model, variant, 12, &cfg.train, &items, cli.seed)?;
            assert_eq!(digest_before, store_digest(&backbone_model.params));
            let meta = json!({
                "kind": "adaptor",
                "variant": variant,
                "condition": kind.label(),
                "seed": cli.seed,
                "config_digest": cfg.digest(),
                "backbone_digest": digest_before,
            });
            let name = format!("adaptor_{}_{}", variant.label(), kind.label());
            let path = cli.out.join(format!("{name}.ckpt"));
            save_checkpoint(&path, CheckpointKind::Adaptor, &meta, &branch.params)?;
            log.write_csv(&cli.out.join(format!("train_{name}.csv")))?;
            println!(
                "adaptor {}: {} params, loss {:.4} -> {:.4}, saved {}",
                variant.label(),
                branch.total_params(),
                log.mean_loss_first(50),
                log.mean_loss_last(50),
                path.display()
            );
            Ok(())
        }

        Cmd::Sample { backbone, adaptor, condition_csv, style, steps, cfg_weight, out_csv } => {
            let bpath = default_backbone_path(&cli.out, backbone);
            let (backbone_model, cfg, data_seed) = load_backbone_ckpt::<R>(&bpath)?;
            let branch = match adaptor {
                Some(p) => Some(load_adaptor_ckpt::<R>(p, &backbone_model)?),
                None => None,
            };
            let t = cfg.data.t_latent;
            let cond_tensor: Option<Tensor<R>> = match condition_csv {
                Some(p) => {
                    let (map, _) = read_condition_csv::<R>(p)?;
                    Some(map.resample(t)?.to_tensor())
                }
                None => None,
            };
            if branch.is_some() && cond_tensor.is_none() {
                return Err(Error::Contract(
                    "sampling with an adaptor needs --condition-csv".into(),
                ));
            }
            let style_cond = match style {
                Some(s) => StyleCond::Style(*s),
                None => StyleCond::Null,
            };
            let sampler = SamplerConfig {
                steps: *steps,
                sigma_min: cfg.eval.sigma_min,
                sigma_max: cfg.eval.sigma_max,
                rho: cfg.eval.rho,
            };
            let z = sample(
                &backbone_model,
                branch.as_ref().map(|(b, _, _)| b),
                GenConditions {
                    style: style_cond,
                    context: None,
                    condition: cond_tensor.as_ref(),
                },
                t,
                sampler,
                *cfg_weight,
                RngKey::root(cli.seed).child(40),
            )?;
            let codec = codec_for(&cfg, data_seed)?;
            let probe = codec.decode_probe(&z)?;
            let decoded = ConditionMap::<f64>::new(
                ConditionKind::Chroma,
                probe.chroma.clone(),
                t,
            )?;
            let path = out_csv.clone().unwrap_or_else(|| cli.out.join("sample_chroma.csv"));
            write_condition_csv(&path, &decoded, Some(cfg.backbone.frame_rate_hz))?;
            let style_line: Vec<String> = (0..cfg.data.num_styles)
                .map(|s| format!("style{}={:.3}", s, probe.style_cosine(s)))
                .collect();
            println!("sample: wrote {} ({})", path.display(), style_line.join(" "));
            if let Some(ct) = &cond_tensor {
                let target = crate::conditions::chroma_from_noteroll(
                    &ct.data().iter().map(|v| v.to_f64().clamp(0.0, 1.0)).collect::<Vec<_>>(),
                    t,
                    cfg.backbone.frame_rate_hz,
                )?;
                let got = crate::conditions::Chromagram::from_values(
                    probe.chroma.clone(),
                    t,
                    cfg.backbone.frame_rate_hz,
                )?;
                println!("cmse vs condition: {:.5}", crate::conditions::cmse(&target, &got)?);
            }
            Ok(())
        }

        Cmd::EvalAdherence { backbone, adaptors } => {
            let bpath = default_backbone_path(&cli.out, backbone);
            let (backbone_model, cfg, data_seed) = load_backbone_ckpt::<R>(&bpath)?;
            let (_, test) = split_dataset::<R>(&cfg, data_seed)?;
            let codec = codec_for(&cfg, data_seed)?;
            let mut loaded = Vec::new();
            for p in adaptors {
                let (branch, kind, _) = load_adaptor_ckpt::<R>(p, &backbone_model)?;
                let label = branch.variant.label();
                loaded.push((label, branch, kind));
            }
            let entries: Vec<(String, &AdaptorBranch<R>, ConditionKind)> =
                loaded.iter().map(|(l, b, k)| (l.clone(), b, *k)).collect();
            let report = eval_adherence(
                &backbone_model,
                &entries,
                &test,
                &codec,
                &cfg.eval,
                &cfg.digest(),
                cli.seed,
            )?;
            let path = cli.out.join("adherence.csv");
            report.write_csv(&path)?;
            print!("{}", report.to_csv_string());
            println!("wrote {}", path.display());
            Ok(())
        }

        Cmd::EvalConflict { setting, backbone, adaptor } => {
            let setting = ConflictSetting::parse(setting)?;
            let bpath = default_backbone_path(&cli.out, backbone);
            let (backbone_model, cfg, data_seed) = load_backbone_ckpt::<R>(&bpath)?;
            let (_, test) = split_dataset::<R>(&cfg, data_seed)?;
            let codec = codec_for(&cfg, data_seed)?;
            let mut report = EvalReport {
                seed: cli.seed,
                config_digest: cfg.digest(),
                rows: Vec::new(),
            };
            let baseline = eval_conflict(
                &backbone_model,
                None,
                &test,
                &codec,
                &cfg.eval,
                setting,
                &cfg.digest(),
                cli.seed,
            )?;
            report.rows.extend(baseline.rows);
            if let Some(p) = adaptor {
                let (branch, kind, _) = load_adaptor_ckpt::<R>(p, &backbone_model)?;
                let label = branch.variant.label();
                let branch_report = eval_conflict(
                    &backbone_model,
                    Some((&label, &branch, kind)),
                    &test,
                    &codec,
                    &cfg.eval,
                    setting,
                    &cfg.digest(),
                    cli.seed,
                )?;
                report.rows.extend(branch_report.rows);
            }
            let path = cli.out.join(format!("conflict_{}.csv", setting.label()));
            report.write_csv(&path)?;
            print!("{}", report.to_csv_string());
            println!("wrote {}", path.display());
            Ok(())
        }

        Cmd::Params { variant } => {
            let cfg = load_config(&cli.config)?;
            let backbone = Backbone::<R>::new(cfg.backbone.clone(), cli.seed)?;
            let variants = match variant {
                Some(v) => vec![AdaptorVariant::parse(v)?],
                None => AdaptorVariant::all(),
            };
            let csv = report_params(&backbone, &variants, 12, &cfg.digest())?;
            print!("{csv}");
            Ok(())
        }

        Cmd::InitCheck { variant, trials } => {
            let cfg = load_config(&cli.config)?;
            let variants = match variant {
                Some(v) => vec![AdaptorVariant::parse(v)?],
                None => AdaptorVariant::all(),
            };
            let worst = init_check::<R>(&cfg, &variants, *trials, cli.seed)?;
            println!("init-check ok: worst relative deviation {worst:e}");
            Ok(())
        }

        Cmd::GradCheck => {
            // FD checks are meaningless in f32; always run in f64.
            let results = standard_grad_checks()?;
            let mut failed = false;
            for (name, err) in &results {
                let threshold = 1e-4;
                let ok = *err <= threshold;
                failed |= !ok;
                println!("{name}: max rel err {err:e} {}", if ok { "ok" } else { "FAIL" });
            }
            if failed {
                return Err(Error::Contract("gradient check failed".into()));
            }
            Ok(())
        }
    }
}

/// Asserts that the adapted model matches the frozen backbone exactly at
/// initialization (exact in f64; <= 1e-6 relative in f32) on random inputs
/// against a weight-randomized backbone. Returns the worst deviation.
fn init_check<R: Real>(
    cfg: &ExperimentConfig,
    variants: &[AdaptorVariant],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut backbone = Backbone::<R>::new(cfg.backbone.clone(), seed)?;
    let mut stream = RngKey::root(seed).child(98).stream();
    for idx in 0..backbone.params.len() {
        for v in backbone.params.tensor_at_mut(idx).data_mut() {
            *v = R::of(stream.normal() * 0.3);
        }
    }
    let t = cfg.data.t_latent;
    let tol = if R::type_name() == "f64" { 0.0 } else { 1e-6 };
    let mut worst = 0.0f64;
    for variant in variants {
        let branch = AdaptorBranch::<R>::new(&backbone, *variant, 12, seed)?;
        for trial in 0..trials {
            let x = Tensor::<R>::randn(&[cfg.backbone.latent_channels, t], 1.0, &mut stream);
            let c = Tensor::<R>::randn(&[12, t], 1.0, &mut stream);
            let sigma = 0.05 + 0.4 * trial as f64;
            let style =
                if trial % 2 == 0 { StyleCond::Null } else { StyleCond::Style(0) };
            let plain = backbone.denoise_tensor(&x, sigma, style, None)?;
            let adapted =
                controlled_denoise_tensor(&backbone, &branch, &x, sigma, style, None, &c)?;
            for (p, a) in plain.data().iter().zip(adapted.data()) {
                let denom = p.to_f64().abs().max(1.0);
                let rel = (p.to_f64() - a.to_f64()).abs() / denom;
                worst = worst.max(rel);
                if rel > tol {
                    return Err(Error::Contract(format!(
                        "variant {} deviates from the frozen backbone at init (rel {rel:e})",
                        variant.label()
                    )));
                }
            }
        }
    }
    Ok(worst)
}
