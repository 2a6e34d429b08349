//! Resolution of sampler flags/config into `SamplerConfig` values and named
//! seed-source trait objects.

use qrbm::samplers::{
    sampler_from_config, RandomStateSampler, SaSchedule, Sampler, SamplerConfig, SamplerKind,
    ZeroStateSampler,
};

use crate::config::SectionView;
use crate::{CliError, CliResult, SamplerArgs};

pub fn parse_kind(name: &str) -> CliResult<SamplerKind> {
    match name {
        "gibbs" => Ok(SamplerKind::Gibbs),
        "sa" | "simulated_annealing" => Ok(SamplerKind::SimulatedAnnealing),
        "exact" => Ok(SamplerKind::Exact),
        "chimera" => Ok(SamplerKind::Chimera),
        other => Err(CliError::Usage(format!(
            "unknown sampler {other:?} (expected gibbs | sa | exact | chimera)"
        ))),
    }
}

fn apply_sampler_settings(
    config: &mut SamplerConfig,
    args: &SamplerArgs,
    section: &SectionView<'_>,
) -> CliResult<()> {
    config.n_samples = section.resolve(args.n_samples, "n-samples", config.n_samples)?;
    config.gibbs_postprocess_sweeps =
        section.resolve(args.post_sweeps, "post-sweeps", config.gibbs_postprocess_sweeps)?;
    config.burn_in_sweeps = section.resolve(args.burn_in, "burn-in", config.burn_in_sweeps)?;
    config.sa_schedule = SaSchedule {
        beta_start: section.resolve(
            args.sa_beta_start,
            "sa-beta-start",
            config.sa_schedule.beta_start,
        )?,
        beta_end: section.resolve(args.sa_beta_end, "sa-beta-end", config.sa_schedule.beta_end)?,
        n_sweeps: section.resolve(args.sa_sweeps, "sa-sweeps", config.sa_schedule.n_sweeps)?,
    };
    config.chimera.m = section.resolve_opt(args.chimera_m, "chimera-m")?;
    config.chimera.chain_strength =
        section.resolve_opt(args.chain_strength, "chain-strength")?;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(())
}

/// Resolve the sampler flag set against a config section (the four
/// configured kinds only).
pub fn resolve_sampler_config(
    args: &SamplerArgs,
    section: &SectionView<'_>,
    default_kind: SamplerKind,
    seed: u64,
) -> CliResult<SamplerConfig> {
    let kind = match section.resolve_opt(args.sampler.clone(), "sampler")? {
        Some(name) => parse_kind(&name)?,
        None => default_kind,
    };
    let mut config = SamplerConfig::new(kind).with_seed(seed);
    apply_sampler_settings(&mut config, args, section)?;
    Ok(config)
}

/// Resolve a seed source by name: the four configured kinds plus the
/// dynamics-free "random" and "zeros" sources.
pub fn resolve_seed_source(
    args: &SamplerArgs,
    section: &SectionView<'_>,
    default_name: &str,
    seed: u64,
) -> CliResult<(String, SamplerConfig, Box<dyn Sampler<f64>>)> {
    let name = section.resolve(args.sampler.clone(), "sampler", default_name.to_string())?;
    let kind = match name.as_str() {
        "random" | "zeros" => SamplerKind::SimulatedAnnealing,
        other => parse_kind(other)?,
    };
    let mut config = SamplerConfig::new(kind).with_seed(seed);
    apply_sampler_settings(&mut config, args, section)?;
    let sampler = build_named_sampler(&name, &config)?;
    Ok((name, config, sampler))
}

/// Build a seed-source sampler by name; extends the four configured kinds
/// with the dynamics-free "random" and "zeros" sources.
pub fn build_named_sampler(
    name: &str,
    config: &SamplerConfig,
) -> CliResult<Box<dyn Sampler<f64>>> {
    match name {
        "random" => Ok(Box::new(RandomStateSampler)),
        "zeros" => Ok(Box::new(ZeroStateSampler)),
        other => {
            let mut cfg = config.clone();
            cfg.kind = parse_kind(other)?;
            sampler_from_config::<f64>(&cfg).map_err(|e| CliError::Runtime(e.to_string()))
        }
    }
}

/// Manifest entries describing a resolved sampler configuration.
pub fn sampler_manifest(prefix: &str, config: &SamplerConfig) -> Vec<(String, String)> {
    let kind = match config.kind {
        SamplerKind::Gibbs => "gibbs",
        SamplerKind::SimulatedAnnealing => "sa",
        SamplerKind::Exact => "exact",
        SamplerKind::Chimera => "chimera",
    };
    let mut entries = vec![
        (format!("{prefix}.kind"), kind.to_string()),
        (format!("{prefix}.n_samples"), config.n_samples.to_string()),
        (format!("{prefix}.post_sweeps"), config.gibbs_postprocess_sweeps.to_string()),
        (format!("{prefix}.burn_in"), config.burn_in_sweeps.to_string()),
        (format!("{prefix}.sa_beta_start"), config.sa_schedule.beta_start.to_string()),
        (format!("{prefix}.sa_beta_end"), config.sa_schedule.beta_end.to_string()),
        (format!("{prefix}.sa_sweeps"), config.sa_schedule.n_sweeps.to_string()),
    ];
    if let Some(m) = config.chimera.m {
        entries.push((format!("{prefix}.chimera_m"), m.to_string()));
    }
    if let Some(s) = config.chimera.chain_strength {
        entries.push((format!("{prefix}.chain_strength"), s.to_string()));
    }
    entries
}
