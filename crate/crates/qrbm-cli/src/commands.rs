//! Implementations of the dataset / train / audit / compare commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qrbm::datapipe::{
    build_dataset, ingest, render_minibatch, synth_generate, write_quantizer, CompressedDataset,
};
use qrbm::rbm::RbmParams;
use qrbm::samplers::SamplerKind;
use qrbm::thermometry::{
    estimate_beta, ks_vs_coupling_report, seed_advantage, steps_to_boltzmann,
    boltzmann_reference, SeedAdvantageOptions,
};
use qrbm::training::{
    initial_params, read_metrics_csv, train_with_callback, Algorithm, BetaCorrection, TrainConfig,
};

use crate::config::{base_manifest, write_manifest, FileConfig};
use crate::samplers::{build_named_sampler, resolve_sampler_config, resolve_seed_source, sampler_manifest};
use crate::{
    AuditBetaArgs, AuditCommonArgs, AuditKsArgs, AuditSeedArgs, AuditStepsArgs, CliError,
    CliResult, CompareArgs, DatasetArgs, TrainArgs,
};

fn ensure_out_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

pub fn run_dataset(args: DatasetArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let section = file.section("dataset");
    let source = section
        .resolve_opt(args.source.clone(), "source")?
        .ok_or_else(|| CliError::Usage("--source synth|dir is required".into()))?;
    let bits = section.resolve(args.bits, "bits", 64usize)?;
    if bits == 0 || bits % 8 != 0 {
        return Err(CliError::Usage(format!(
            "--bits must be a positive multiple of 8 (whole PCA components), got {bits}"
        )));
    }
    let seed = section.resolve(args.seed, "seed", 0u64)?;
    let fit_fraction = section.resolve(args.fit_fraction, "fit-fraction", 1.0 / 3.0)?;
    let mut manifest = base_manifest("dataset");
    manifest.push(("source".into(), source.clone()));
    manifest.push(("bits".into(), bits.to_string()));
    manifest.push(("seed".into(), seed.to_string()));
    manifest.push(("fit_fraction".into(), fit_fraction.to_string()));

    let (images, labels) = match source.as_str() {
        "synth" => {
            let n = section.resolve(args.n, "n", 1000usize)?;
            let side = section.resolve(args.side, "side", 24usize)?;
            manifest.push(("n_per_class".into(), n.to_string()));
            manifest.push(("side".into(), side.to_string()));
            synth_generate::<f64>(n, side, seed).map_err(runtime)?
        }
        "dir" => {
            let dir = section
                .resolve_path(args.dir.clone(), "dir")?
                .ok_or_else(|| CliError::Usage("--dir is required for --source dir".into()))?;
            let manifest_path = section
                .resolve_path(args.manifest.clone(), "manifest")?
                .ok_or_else(|| CliError::Usage("--manifest is required for --source dir".into()))?;
            let crop = section.resolve(args.crop, "crop", 200usize)?;
            manifest.push(("dir".into(), dir.display().to_string()));
            manifest.push(("manifest".into(), manifest_path.display().to_string()));
            manifest.push(("crop".into(), crop.to_string()));
            ingest::<f64>(&dir, &manifest_path, crop).map_err(runtime)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown source {other:?} (expected synth or dir)"
            )))
        }
    };

    let (model, quantizer, train_set, test_set) =
        build_dataset(&images, &labels, fit_fraction, bits, seed).map_err(runtime)?;
    ensure_out_dir(&args.out)?;
    let mut pca_file = std::io::BufWriter::new(std::fs::File::create(args.out.join("pca.txt"))?);
    model.write_to(&mut pca_file).map_err(runtime)?;
    drop(pca_file);
    let mut q_file =
        std::io::BufWriter::new(std::fs::File::create(args.out.join("quantizer.txt"))?);
    write_quantizer(&mut q_file, &quantizer).map_err(runtime)?;
    drop(q_file);
    train_set.save(&args.out.join("train.cds")).map_err(runtime)?;
    test_set.save(&args.out.join("test.cds")).map_err(runtime)?;
    let preview_rows = train_set.rows.len().min(50);
    let preview = render_minibatch(&train_set, 0..preview_rows).map_err(runtime)?;
    std::fs::write(args.out.join("preview.pgm"), &preview.pgm)?;
    std::fs::write(args.out.join("preview.txt"), format!("{}\n", preview.caption))?;
    manifest.push(("train_rows".into(), train_set.rows.len().to_string()));
    manifest.push(("test_rows".into(), test_set.rows.len().to_string()));
    manifest.push(("provenance".into(), train_set.provenance.clone()));
    write_manifest(&args.out, &manifest)?;
    eprintln!(
        "dataset: {} train rows, {} test rows, {} feature bits -> {}",
        train_set.rows.len(),
        test_set.rows.len(),
        bits,
        args.out.display()
    );
    Ok(())
}

fn parse_algorithm(name: &str) -> CliResult<Algorithm> {
    match name {
        "cd" => Ok(Algorithm::Cd),
        "sampler_generative" | "generative" => Ok(Algorithm::SamplerGenerative),
        "discriminative" => Ok(Algorithm::Discriminative),
        "hybrid" => Ok(Algorithm::Hybrid),
        "annealed_hybrid" => Ok(Algorithm::AnnealedHybrid),
        other => Err(CliError::Usage(format!(
            "unknown algorithm {other:?} (expected cd | sampler_generative | discriminative | hybrid | annealed_hybrid)"
        ))),
    }
}

fn parse_rbm_shape(text: &str) -> CliResult<(usize, usize)> {
    let (v, h) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Usage(format!("--rbm must look like 65x12, got {text:?}")))?;
    let n_v = v
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::Usage(format!("bad visible count in --rbm {text:?}")))?;
    let n_h = h
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::Usage(format!("bad hidden count in --rbm {text:?}")))?;
    if n_v < 2 || n_h == 0 {
        return Err(CliError::Usage(format!("--rbm {text:?} is too small")));
    }
    Ok((n_v, n_h))
}

pub fn run_train(args: TrainArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let section = file.section("train");
    let data_dir = section
        .resolve_path(args.data.clone(), "data")?
        .ok_or_else(|| CliError::Usage("--data <dataset dir> is required".into()))?;
    let rbm_text = section
        .resolve_opt(args.rbm.clone(), "rbm")?
        .ok_or_else(|| CliError::Usage("--rbm NxM is required".into()))?;
    let (n_visible, n_hidden) = parse_rbm_shape(&rbm_text)?;
    let algo_name =
        section.resolve(args.algo.clone(), "algo", "discriminative".to_string())?;
    let algorithm = parse_algorithm(&algo_name)?;
    let seed = section.resolve(args.seed, "seed", 0u64)?;
    let sampler = resolve_sampler_config(
        &args.sampler,
        &section,
        SamplerKind::SimulatedAnnealing,
        seed,
    )?;
    let beta_mode =
        section.resolve(args.beta_correction.clone(), "beta-correction", "off".to_string())?;
    let beta_0 = section.resolve(args.beta0, "beta0", 3.0)?;
    let beta_n = section.resolve(args.beta_n, "beta-n", 2000usize)?;
    let beta_correction = match beta_mode.as_str() {
        "off" => BetaCorrection::Off,
        "at-start" | "at_start" => BetaCorrection::AtStart { beta_0, n_samples: beta_n },
        "every-step" | "every_step" => BetaCorrection::EveryStep { beta_0, n_samples: beta_n },
        other => {
            return Err(CliError::Usage(format!(
                "unknown --beta-correction {other:?} (expected off | at-start | every-step)"
            )))
        }
    };
    let config = TrainConfig {
        algorithm,
        lambda: section.resolve(args.lambda, "lambda", 0.01)?,
        switch_epoch: section.resolve(args.switch_epoch, "switch-epoch", 0usize)?,
        learning_rate: section.resolve(args.lr, "lr", 0.05)?,
        batch_size: section.resolve(args.batch, "batch", 128usize)?,
        n_epochs: section.resolve(args.epochs, "epochs", 100usize)?,
        sampler,
        cd_k: section.resolve(args.cd_k, "cd-k", 1usize)?,
        weight_clip: section.resolve_opt(args.weight_clip, "weight-clip")?,
        l2: 0.0,
        beta_correction,
        rng_seed: seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let checkpoint_every = section.resolve(args.checkpoint_every, "checkpoint-every", 1usize)?;
    if checkpoint_every == 0 {
        return Err(CliError::Usage("--checkpoint-every must be >= 1".into()));
    }

    let load_split = |name: &str| {
        let path = data_dir.join(name);
        CompressedDataset::load(&path)
            .map_err(|e| CliError::Runtime(format!("cannot load {}: {e}", path.display())))
    };
    let train_set = load_split("train.cds")?;
    let test_set = load_split("test.cds")?;
    if train_set.n_feature_bits + 1 != n_visible {
        return Err(CliError::Usage(format!(
            "--rbm {rbm_text} has {n_visible} visible units but the dataset provides {} feature \
             bits (+1 class bit = {} visible units required)",
            train_set.n_feature_bits,
            train_set.n_feature_bits + 1
        )));
    }
    let train_rows = train_set.visible_rows();
    let test_rows = test_set.visible_rows();
    ensure_out_dir(&args.out)?;
    let out_dir = args.out.clone();
    let n_epochs = config.n_epochs;
    let initial = initial_params::<f64>(n_visible, n_hidden, seed);
    let mut checkpoint_failures: Vec<String> = Vec::new();
    let (final_params, metrics) = train_with_callback(
        initial,
        &train_rows,
        &test_rows,
        &config,
        |epoch, params, _| {
            if (epoch + 1) % checkpoint_every == 0 || epoch + 1 == n_epochs {
                let path = out_dir.join(format!("ckpt_{epoch:05}.rbm"));
                if let Err(e) = params.save(&path) {
                    checkpoint_failures.push(format!("{}: {e}", path.display()));
                }
            }
        },
    )
    .map_err(runtime)?;
    if let Some(first) = checkpoint_failures.first() {
        return Err(CliError::Runtime(format!("failed to write checkpoint {first}")));
    }
    let mut metrics_file =
        std::io::BufWriter::new(std::fs::File::create(args.out.join("metrics.csv"))?);
    qrbm::training::write_metrics_csv(&mut metrics_file, &metrics).map_err(runtime)?;
    drop(metrics_file);
    final_params.save(&args.out.join("final.rbm")).map_err(runtime)?;
    let mut manifest = base_manifest("train");
    manifest.push(("data".into(), data_dir.display().to_string()));
    manifest.push(("algo".into(), algo_name.clone()));
    manifest.push(("rbm".into(), format!("{n_visible}x{n_hidden}")));
    manifest.push(("batch".into(), config.batch_size.to_string()));
    manifest.push(("epochs".into(), config.n_epochs.to_string()));
    manifest.push(("lr".into(), config.learning_rate.to_string()));
    manifest.push(("lambda".into(), config.lambda.to_string()));
    manifest.push(("switch_epoch".into(), config.switch_epoch.to_string()));
    manifest.push(("cd_k".into(), config.cd_k.to_string()));
    manifest.push(("seed".into(), seed.to_string()));
    manifest.push(("checkpoint_every".into(), checkpoint_every.to_string()));
    manifest.push(("beta_correction".into(), beta_mode.clone()));
    if beta_mode != "off" {
        manifest.push(("beta0".into(), beta_0.to_string()));
        manifest.push(("beta_n".into(), beta_n.to_string()));
    }
    if let Some(clip) = config.weight_clip {
        manifest.push(("weight_clip".into(), clip.to_string()));
    }
    manifest.extend(sampler_manifest("sampler", &config.sampler));
    write_manifest(&args.out, &manifest)?;
    let last = metrics.last().expect("at least one epoch");
    eprintln!(
        "train: {} epochs of {} -> train acc {:.4}, test acc {:.4} ({})",
        metrics.len(),
        algo_name,
        last.train_accuracy,
        last.test_accuracy,
        args.out.display()
    );
    Ok(())
}

/// Load `ckpt_*.rbm` files sorted by epoch, honoring `--every`.
fn load_checkpoints(
    common: &AuditCommonArgs,
    section: &crate::config::SectionView<'_>,
) -> CliResult<Vec<(usize, RbmParams<f64>)>> {
    let dir = section
        .resolve_path(common.checkpoints.clone(), "checkpoints")?
        .ok_or_else(|| CliError::Usage("--checkpoints <dir> is required".into()))?;
    let every = section.resolve(common.every, "every", 1usize)?.max(1);
    let mut entries: BTreeMap<usize, PathBuf> = BTreeMap::new();
    let listing = std::fs::read_dir(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot list {}: {e}", dir.display())))?;
    for item in listing {
        let path = item?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(epoch_text) =
            name.strip_prefix("ckpt_").and_then(|s| s.strip_suffix(".rbm"))
        {
            if let Ok(epoch) = epoch_text.parse::<usize>() {
                entries.insert(epoch, path);
            }
        }
    }
    if entries.is_empty() {
        return Err(CliError::Runtime(format!(
            "no ckpt_*.rbm checkpoints found in {}",
            dir.display()
        )));
    }
    entries
        .into_iter()
        .enumerate()
        .filter(|(i, _)| i % every == 0)
        .map(|(_, (epoch, path))| Ok((epoch, RbmParams::<f64>::load(&path).map_err(runtime)?)))
        .collect()
}

pub fn run_audit_beta(args: AuditBetaArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let section = file.section("audit");
    let seed = section.resolve(args.common.seed, "seed", 0u64)?;
    let sampler_config =
        resolve_sampler_config(&args.sampler, &section, SamplerKind::SimulatedAnnealing, seed)?;
    let sampler = qrbm::samplers::sampler_from_config::<f64>(&sampler_config).map_err(runtime)?;
    let beta0 = section.resolve(args.beta0, "beta0", 3.0)?;
    let n = section.resolve(args.n, "n", 2000usize)?;
    let window = section.resolve(args.window, "window", 50usize)?.max(1);
    let checkpoints = load_checkpoints(&args.common, &section)?;
    ensure_out_dir(&args.common.out)?;
    let mut rows = String::from("step,epoch,status,beta_eff,sigma,x,slope,n_bins,rolling_mean\n");
    let mut recent: Vec<f64> = Vec::new();
    for (step, (epoch, params)) in checkpoints.iter().enumerate() {
        match estimate_beta(params, sampler.as_ref(), beta0, n, qrbm::rng::mix(seed, *epoch as u64))
        {
            Ok(est) => {
                recent.push(est.beta_eff);
                let start = recent.len().saturating_sub(window);
                let rolling =
                    recent[start..].iter().sum::<f64>() / (recent.len() - start) as f64;
                rows.push_str(&format!(
                    "{step},{epoch},ok,{},{},{},{},{},{}\n",
                    est.beta_eff, est.sigma, est.x, est.slope, est.n_bins_used, rolling
                ));
            }
            Err(err) => {
                rows.push_str(&format!("{step},{epoch},failed:{},,,,,\n", compact(&err)));
            }
        }
    }
    std::fs::write(args.common.out.join("beta.csv"), rows)?;
    let mut manifest = base_manifest("audit-beta");
    manifest.push(("beta0".into(), beta0.to_string()));
    manifest.push(("n".into(), n.to_string()));
    manifest.push(("window".into(), window.to_string()));
    manifest.push(("seed".into(), seed.to_string()));
    manifest.push(("checkpoints".into(), checkpoints.len().to_string()));
    manifest.extend(sampler_manifest("sampler", &sampler_config));
    write_manifest(&args.common.out, &manifest)?;
    eprintln!("audit beta: {} checkpoints -> {}", checkpoints.len(), args.common.out.display());
    Ok(())
}

pub fn run_audit_ks(args: AuditKsArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let section = file.section("audit");
    let seed = section.resolve(args.common.seed, "seed", 0u64)?;
    let sampler_config =
        resolve_sampler_config(&args.sampler, &section, SamplerKind::SimulatedAnnealing, seed)?;
    let sampler = qrbm::samplers::sampler_from_config::<f64>(&sampler_config).map_err(runtime)?;
    let n = section.resolve(args.n, "n", 1000usize)?;
    let checkpoints = load_checkpoints(&args.common, &section)?;
    ensure_out_dir(&args.common.out)?;
    let report = ks_vs_coupling_report(&checkpoints, sampler.as_ref(), n, seed).map_err(runtime)?;
    let mut rows = String::from("epoch,mean_abs_coupling,max_abs_coupling,ks_statistic,reference\n");
    for row in &report {
        rows.push_str(&format!(
            "{},{},{},{},{}\n",
            row.epoch, row.mean_abs_coupling, row.max_abs_coupling, row.ks_statistic, row.reference
        ));
    }
    std::fs::write(args.common.out.join("ks.csv"), rows)?;
    let mut manifest = base_manifest("audit-ks");
    manifest.push(("n".into(), n.to_string()));
    manifest.push(("seed".into(), seed.to_string()));
    manifest.push(("checkpoints".into(), checkpoints.len().to_string()));
    manifest.extend(sampler_manifest("sampler", &sampler_config));
    write_manifest(&args.common.out, &manifest)?;
    eprintln!("audit ks: {} checkpoints -> {}", checkpoints.len(), args.common.out.display());
    Ok(())
}

pub fn run_audit_steps(args: AuditStepsArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let section = file.section("audit");
    let seed = section.resolve(args.common.seed, "seed", 0u64)?;
    let (sampler_name, sampler_config, sampler) =
        resolve_seed_source(&args.sampler, &section, "sa", seed)?;
    let max_sweeps = section.resolve(args.max_sweeps, "max-sweeps", 100usize)?;
    let n = section.resolve(args.n, "n", 500usize)?;
    let trials = section.resolve(args.trials, "trials", 3usize)?.max(1);
    let checkpoints = load_checkpoints(&args.common, &section)?;
    ensure_out_dir(&args.common.out)?;
    let mut rows = String::from("epoch,mean_steps,stderr\n");
    for (epoch, params) in &checkpoints {
        let mut counts = Vec::with_capacity(trials);
        for trial in 0..trials {
            let trial_seed = qrbm::rng::mix(seed, ((*epoch as u64) << 16) ^ trial as u64);
            let (reference, _) =
                boltzmann_reference(params, n.max(1000), qrbm::rng::mix(trial_seed, 1))
                    .map_err(runtime)?;
            let seeds = sampler
                .draw(params, n, qrbm::rng::mix(trial_seed, 2))
                .map_err(runtime)?;
            let steps = steps_to_boltzmann(
                params,
                &seeds,
                &reference,
                max_sweeps,
                qrbm::rng::mix(trial_seed, 3),
            )
            .map_err(runtime)?;
            counts.push(steps as f64);
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let stderr = if counts.len() > 1 {
            let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>()
                / (counts.len() - 1) as f64;
            (var / counts.len() as f64).sqrt()
        } else {
            0.0
        };
        rows.push_str(&format!("{epoch},{mean},{stderr}\n"));
    }
    std::fs::write(args.common.out.join("steps.csv"), rows)?;
    let mut manifest = base_manifest("audit-steps");
    manifest.push(("seed_source".into(), sampler_name.clone()));
    manifest.push(("max_sweeps".into(), max_sweeps.to_string()));
    manifest.push(("n".into(), n.to_string()));
    manifest.push(("trials".into(), trials.to_string()));
    manifest.push(("seed".into(), seed.to_string()));
    manifest.push(("checkpoints".into(), checkpoints.len().to_string()));
    manifest.extend(sampler_manifest("sampler", &sampler_config));
    write_manifest(&args.common.out, &manifest)?;
    eprintln!("audit steps: {} checkpoints -> {}", checkpoints.len(), args.common.out.display());
    Ok(())
}

pub fn run_audit_seed_advantage(args: AuditSeedArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let section = file.section("audit");
    let seed = section.resolve(args.common.seed, "seed", 0u64)?;
    let sampler_config =
        resolve_sampler_config(&args.sampler, &section, SamplerKind::SimulatedAnnealing, seed)?;
    let name_a = section.resolve(args.sampler_a.clone(), "sampler-a", "sa".to_string())?;
    let name_b = section.resolve(args.sampler_b.clone(), "sampler-b", "random".to_string())?;
    let sampler_a = build_named_sampler(&name_a, &sampler_config)?;
    let sampler_b = build_named_sampler(&name_b, &sampler_config)?;
    let options = SeedAdvantageOptions {
        n_samples: section.resolve(args.n, "n", 500usize)?,
        max_sweeps: section.resolve(args.max_sweeps, "max-sweeps", 100usize)?,
        reference_samples: 1000,
    };
    let checkpoints = load_checkpoints(&args.common, &section)?;
    let snapshots: Vec<RbmParams<f64>> =
        checkpoints.iter().map(|(_, p)| p.clone()).collect();
    let outcome = seed_advantage(&snapshots, sampler_a.as_ref(), sampler_b.as_ref(), &options, seed)
        .map_err(runtime)?;
    ensure_out_dir(&args.common.out)?;
    let mut rows = String::from(
        "sampler_a,sampler_b,mean_steps_a,mean_steps_b,mean_ratio,p_hat,ci_low,ci_high,n_snapshots,n_ties\n",
    );
    let (p_text, lo_text, hi_text) = match (outcome.p_hat, outcome.wilson_ci) {
        (Some(p), Some((lo, hi))) => (p.to_string(), lo.to_string(), hi.to_string()),
        _ => (String::new(), String::new(), String::new()),
    };
    rows.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        name_a,
        name_b,
        outcome.mean_steps_a,
        outcome.mean_steps_b,
        outcome.mean_ratio,
        p_text,
        lo_text,
        hi_text,
        outcome.n_snapshots,
        outcome.n_ties
    ));
    std::fs::write(args.common.out.join("seed_advantage.csv"), rows)?;
    let mut manifest = base_manifest("audit-seed-advantage");
    manifest.push(("sampler_a".into(), name_a));
    manifest.push(("sampler_b".into(), name_b));
    manifest.push(("n".into(), options.n_samples.to_string()));
    manifest.push(("max_sweeps".into(), options.max_sweeps.to_string()));
    manifest.push(("seed".into(), seed.to_string()));
    manifest.extend(sampler_manifest("sampler", &sampler_config));
    write_manifest(&args.common.out, &manifest)?;
    eprintln!(
        "audit seed-advantage: ratio {:.3}, ties {}/{} -> {}",
        outcome.mean_ratio,
        outcome.n_ties,
        outcome.n_snapshots,
        args.common.out.display()
    );
    Ok(())
}

pub fn run_compare(args: CompareArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let section = file.section("compare");
    if args.runs.len() < 2 {
        return Err(CliError::Usage("--runs needs at least two metrics files".into()));
    }
    let mut names = Vec::new();
    let mut tables: Vec<BTreeMap<usize, f64>> = Vec::new();
    for path in &args.runs {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(|s| s.to_string())
            .unwrap_or_else(|| path.display().to_string());
        let mut reader = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| {
            CliError::Runtime(format!("cannot open {}: {e}", path.display()))
        })?);
        let metrics = read_metrics_csv(&mut reader).map_err(runtime)?;
        let table: BTreeMap<usize, f64> =
            metrics.iter().map(|m| (m.epoch, m.test_accuracy)).collect();
        names.push(stem);
        tables.push(table);
    }
    // Duplicate stems would collide in the joined header.
    for i in 0..names.len() {
        if names[..i].contains(&names[i]) {
            names[i] = format!("{}_{i}", names[i]);
        }
    }
    let reference_name = section
        .resolve_opt(args.reference.clone(), "reference")?
        .unwrap_or_else(|| names[0].clone());
    let ref_index = names
        .iter()
        .position(|n| *n == reference_name)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "reference {reference_name:?} is not one of the runs: {names:?}"
            ))
        })?;
    // All runs must share the reference's epoch axis exactly.
    let epochs: Vec<usize> = tables[ref_index].keys().copied().collect();
    for (name, table) in names.iter().zip(&tables) {
        for &epoch in &epochs {
            if !table.contains_key(&epoch) {
                return Err(CliError::Runtime(format!(
                    "run {name} is missing epoch {epoch} present in reference {reference_name}"
                )));
            }
        }
        if let Some(extra) = table.keys().find(|e| !tables[ref_index].contains_key(e)) {
            return Err(CliError::Runtime(format!(
                "run {name} has epoch {extra} absent from reference {reference_name}"
            )));
        }
    }
    let mut out = String::from("epoch");
    for name in &names {
        out.push_str(&format!(",acc_{name}"));
    }
    for name in &names {
        out.push_str(&format!(",ratio_{name}"));
    }
    out.push('\n');
    for &epoch in &epochs {
        out.push_str(&epoch.to_string());
        let ref_acc = tables[ref_index][&epoch];
        for table in &tables {
            out.push_str(&format!(",{}", table[&epoch]));
        }
        for table in &tables {
            out.push_str(&format!(",{}", table[&epoch] / ref_acc));
        }
        out.push('\n');
    }
    ensure_out_dir(&args.out)?;
    std::fs::write(args.out.join("compare.csv"), out)?;
    let mut manifest = base_manifest("compare");
    manifest.push(("reference".into(), reference_name.clone()));
    for (i, path) in args.runs.iter().enumerate() {
        manifest.push((format!("run.{i}"), path.display().to_string()));
    }
    write_manifest(&args.out, &manifest)?;
    eprintln!(
        "compare: {} runs x {} epochs (reference {}) -> {}",
        names.len(),
        epochs.len(),
        reference_name,
        args.out.display()
    );
    Ok(())
}

fn runtime(err: qrbm::Error) -> CliError {
    CliError::Runtime(err.to_string())
}

fn compact(err: &qrbm::Error) -> String {
    err.to_string().replace(',', ";")
}
