//! Sampler audits: is the output Boltzmann at beta = 1?
//!
//! Provides the two-draw effective-temperature estimator, two-sample
//! Kolmogorov-Smirnov consistency tests on energies, the steps-to-Boltzmann
//! measurement, and seed-comparison statistics.

use crate::rbm::RbmParams;
use crate::rng::mix;
use crate::samplers::{exact_sample, gibbs_sweep, ChainState, SampleSet, Sampler};
use crate::scalar::Scalar;
use crate::{Error, Result, ENUM_BUDGET};

/// Two-sample Kolmogorov-Smirnov outcome.
#[derive(Clone, Copy, Debug)]
pub struct KsResult {
    /// Sup distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value at effective size `n1*n2/(n1+n2)`.
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Exact sup-distance between empirical CDFs plus the asymptotic
/// Kolmogorov p-value (with the usual small-sample correction to the
/// effective size).
pub fn ks_two_sample<T: Scalar>(xs: &[T], ys: &[T]) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyInput("ks_two_sample"));
    }
    let mut a: Vec<f64> = xs.iter().map(|x| x.f64()).collect();
    let mut b: Vec<f64> = ys.iter().map(|y| y.f64()).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n1, n2) = (a.len(), b.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda), n1, n2 })
}

/// Complementary CDF of the Kolmogorov distribution,
/// `Q(x) = 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x <= 1e-9 {
        return 1.0;
    }
    if x < 1.18 {
        // Dual (theta-function) series converges fast for small x.
        let t = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let cdf =
            ((2.0 * std::f64::consts::PI).sqrt() / x) * (t + t.powi(9) + t.powi(25));
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        total += sign * term;
        if term < 1e-14 {
            break;
        }
        sign = -sign;
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Effective-temperature estimate from the two-draw log-ratio regression.
#[derive(Clone, Copy, Debug)]
pub struct TempEstimate {
    pub beta_eff: f64,
    /// Prior estimate used to scale the programmed couplings.
    pub beta_0: f64,
    /// Second-draw coupling scale factor `x = 1 + 1/(beta_0 sigma)`.
    pub x: f64,
    /// Standard deviation of the first draw's energies.
    pub sigma: f64,
    pub slope: f64,
    /// Regression intercept, an estimate of `log Z1/Z2`.
    pub intercept: f64,
    pub n_bins_used: usize,
}

/// Estimate the effective inverse temperature of `sampler`:
///
/// 1. program couplings `J1 = A/beta_0` and draw `n` samples,
/// 2. bin their energies (measured under the unscaled couplings `A`) into
///    `ceil(sqrt(2n))` equal-width bins,
/// 3. draw `n` more samples at `J2 = x J1` with `x = 1 + 1/(beta_0 sigma)`,
/// 4. reuse the same bin edges,
/// 5. regress `log(n2/n1)` on bin-center energy over bins holding at least
///    five samples in both draws; then `beta_eff = beta_0 *
///    slope / (1 - x)`.
pub fn estimate_beta<T: Scalar>(
    params: &RbmParams<T>,
    sampler: &dyn Sampler<T>,
    beta_0: f64,
    n: usize,
    seed: u64,
) -> Result<TempEstimate> {
    if n < 50 {
        return Err(Error::InvalidConfig("temperature estimation needs n >= 50".into()));
    }
    if !(beta_0.is_finite() && beta_0 > 0.0) {
        return Err(Error::InvalidConfig("beta_0 must be positive".into()));
    }
    let j1 = params.scaled(T::of(1.0 / beta_0));
    let first = sampler.draw(&j1, n, mix(seed, 0xB1))?;
    let e1 = energies_under(params, &first)?;
    let mean = e1.iter().sum::<f64>() / n as f64;
    let var = e1.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sigma = var.sqrt();
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::TempEstimation(
            "first draw has zero energy variance; no regression is possible".into(),
        ));
    }
    let x = 1.0 + 1.0 / (beta_0 * sigma);
    if !x.is_finite() || x == 1.0 {
        return Err(Error::TempEstimation(format!("degenerate scale factor x = {x}")));
    }
    let n_bins = (2.0 * n as f64).sqrt().ceil() as usize;
    let lo = e1.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = e1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::TempEstimation("single-energy first draw".into()));
    }
    let width = (hi - lo) / n_bins as f64;
    let bin_of = |e: f64| -> Option<usize> {
        if e < lo || e > hi {
            return None;
        }
        Some((((e - lo) / width) as usize).min(n_bins - 1))
    };
    let mut counts1 = vec![0usize; n_bins];
    for &e in &e1 {
        counts1[bin_of(e).expect("first draw inside its own range")] += 1;
    }
    let j2 = params.scaled(T::of(x / beta_0));
    let second = sampler.draw(&j2, n, mix(seed, 0xB2))?;
    let mut counts2 = vec![0usize; n_bins];
    for e in energies_under(params, &second)? {
        if let Some(bin) = bin_of(e) {
            counts2[bin] += 1;
        }
    }
    let mut points = Vec::new();
    for bin in 0..n_bins {
        if counts1[bin] >= 5 && counts2[bin] >= 5 {
            let center = lo + (bin as f64 + 0.5) * width;
            points.push((center, (counts2[bin] as f64 / counts1[bin] as f64).ln()));
        }
    }
    if points.len() < 2 {
        return Err(Error::TempEstimation(format!(
            "only {} usable bins (need at least 2 with >= 5 samples in both draws)",
            points.len()
        )));
    }
    let (slope, intercept) = least_squares(&points);
    Ok(TempEstimate {
        beta_eff: beta_0 * slope / (1.0 - x),
        beta_0,
        x,
        sigma,
        slope,
        intercept,
        n_bins_used: points.len(),
    })
}

fn energies_under<T: Scalar>(params: &RbmParams<T>, samples: &SampleSet<T>) -> Result<Vec<f64>> {
    samples
        .states
        .iter()
        .map(|(v, h)| params.energy(v, h).map(|e| e.f64()))
        .collect()
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Sampler wrapper that programs couplings at `A / beta_eff`, so a device
/// returning Boltzmann statistics at inverse temperature `beta_eff` yields
/// samples for `A` at beta = 1.
pub struct BetaScaledSampler<'a, T: Scalar> {
    pub inner: &'a dyn Sampler<T>,
    pub beta_eff: f64,
}

impl<T: Scalar> Sampler<T> for BetaScaledSampler<'_, T> {
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, seed: u64) -> Result<SampleSet<T>> {
        let scaled = params.scaled(T::of(1.0 / self.beta_eff));
        let mut out = self.inner.draw(&scaled, n_samples, seed)?;
        // Energies are reported under the requested couplings.
        out.energies = out
            .states
            .iter()
            .map(|(v, h)| params.energy(v, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(out)
    }

    fn source(&self) -> crate::samplers::SampleSource {
        self.inner.source()
    }
}

/// Estimate the sampler's effective inverse temperature on `params` once
/// and wrap it so subsequent draws are corrected (the
/// estimate-at-training-start cadence).
pub fn calibrated_sampler<'a, T: Scalar>(
    inner: &'a dyn Sampler<T>,
    params: &RbmParams<T>,
    beta_0: f64,
    n: usize,
    seed: u64,
) -> Result<(BetaScaledSampler<'a, T>, TempEstimate)> {
    let estimate = estimate_beta(params, inner, beta_0, n, seed)?;
    Ok((BetaScaledSampler { inner, beta_eff: estimate.beta_eff }, estimate))
}

/// Where the Boltzmann reference for a KS comparison came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Exact enumeration (models within the budget).
    Exact,
    /// Long Gibbs chain, 10^4 burn-in sweeps and x10 thinning.
    LongChain,
}

impl std::fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReferenceKind::Exact => write!(f, "exact"),
            ReferenceKind::LongChain => write!(f, "long_chain"),
        }
    }
}

/// Draw `n` reference Boltzmann samples: exact enumeration within the
/// budget, otherwise a long Gibbs chain (10^4 burn-in sweeps, thinned x10).
pub fn boltzmann_reference<T: Scalar>(
    params: &RbmParams<T>,
    n: usize,
    seed: u64,
) -> Result<(SampleSet<T>, ReferenceKind)> {
    if params.n_visible() + params.n_hidden() <= ENUM_BUDGET {
        return Ok((exact_sample(params, n, seed)?, ReferenceKind::Exact));
    }
    let mut rng = crate::rng::stream_rng(seed, 0);
    let mut state = ChainState::random(params, &mut rng);
    for _ in 0..10_000 {
        gibbs_sweep(params, &mut state, &mut rng)?;
    }
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..10 {
            gibbs_sweep(params, &mut state, &mut rng)?;
        }
        states.push((state.v.clone(), state.h.clone()));
    }
    Ok((
        SampleSet::new(params, states, crate::samplers::SampleSource::Other("long_chain".into()))?,
        ReferenceKind::LongChain,
    ))
}

/// Smallest sweep count `s <= max_sweeps` after which the seed states'
/// energies pass the KS test (p > 0.05) against the reference energies;
/// `max_sweeps + 1` when never reached.
pub fn steps_to_boltzmann<T: Scalar>(
    params: &RbmParams<T>,
    seed_states: &SampleSet<T>,
    reference: &SampleSet<T>,
    max_sweeps: usize,
    seed: u64,
) -> Result<usize> {
    if seed_states.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("steps_to_boltzmann sample sets"));
    }
    let ref_energies = reference.energies_f64();
    let mut chains: Vec<ChainState> = seed_states
        .states
        .iter()
        .map(|(v, h)| ChainState { v: v.clone(), h: h.clone() })
        .collect();
    let mut rngs: Vec<_> =
        (0..chains.len()).map(|i| crate::rng::stream_rng(seed, i as u64)).collect();
    for sweeps in 0..=max_sweeps {
        let energies: Vec<f64> = chains
            .iter()
            .map(|s| params.energy(&s.v, &s.h).map(|e| e.f64()))
            .collect::<Result<_>>()?;
        let ks = ks_two_sample(&energies, &ref_energies)?;
        if ks.p_value > 0.05 {
            return Ok(sweeps);
        }
        if sweeps < max_sweeps {
            for (state, rng) in chains.iter_mut().zip(rngs.iter_mut()) {
                gibbs_sweep(params, state, rng)?;
            }
        }
    }
    Ok(max_sweeps + 1)
}

/// Outcome of comparing two seed sources across parameter snapshots.
#[derive(Clone, Debug)]
pub struct SeedAdvantage {
    pub mean_steps_a: f64,
    pub mean_steps_b: f64,
    /// Ratio of mean step counts, `mean_a / mean_b`.
    pub mean_ratio: f64,
    /// Estimate of `P(steps_a < steps_b)` with ties excluded; `None` when
    /// every comparison tied.
    pub p_hat: Option<f64>,
    /// Wilson 95% interval for `p_hat`.
    pub wilson_ci: Option<(f64, f64)>,
    pub n_snapshots: usize,
    pub n_ties: usize,
}

/// Options for [`seed_advantage`].
#[derive(Clone, Copy, Debug)]
pub struct SeedAdvantageOptions {
    pub n_samples: usize,
    pub max_sweeps: usize,
    pub reference_samples: usize,
}

impl Default for SeedAdvantageOptions {
    fn default() -> Self {
        Self { n_samples: 500, max_sweeps: 100, reference_samples: 1000 }
    }
}

/// For each parameter snapshot, measure steps-to-Boltzmann for seeds drawn
/// from both samplers and summarize which needs fewer sweeps.
pub fn seed_advantage<T: Scalar>(
    snapshots: &[RbmParams<T>],
    sampler_a: &dyn Sampler<T>,
    sampler_b: &dyn Sampler<T>,
    options: &SeedAdvantageOptions,
    seed: u64,
) -> Result<SeedAdvantage> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidConfig("seed_advantage needs at least 2 snapshots".into()));
    }
    let mut steps_a = Vec::with_capacity(snapshots.len());
    let mut steps_b = Vec::with_capacity(snapshots.len());
    for (i, params) in snapshots.iter().enumerate() {
        let snap_seed = mix(seed, i as u64);
        let (reference, _) =
            boltzmann_reference(params, options.reference_samples, mix(snap_seed, 1))?;
        // Paired design: both sides share the draw and sweep seeds, so
        // identical samplers tie exactly and comparisons use common
        // random numbers.
        let seeds_a = sampler_a.draw(params, options.n_samples, mix(snap_seed, 2))?;
        let seeds_b = sampler_b.draw(params, options.n_samples, mix(snap_seed, 2))?;
        steps_a.push(steps_to_boltzmann(
            params,
            &seeds_a,
            &reference,
            options.max_sweeps,
            mix(snap_seed, 3),
        )?);
        steps_b.push(steps_to_boltzmann(
            params,
            &seeds_b,
            &reference,
            options.max_sweeps,
            mix(snap_seed, 3),
        )?);
    }
    let mean_a = steps_a.iter().sum::<usize>() as f64 / steps_a.len() as f64;
    let mean_b = steps_b.iter().sum::<usize>() as f64 / steps_b.len() as f64;
    // Equal means (both zero included) are a ratio of exactly 1.
    let mean_ratio = if mean_a == mean_b { 1.0 } else { mean_a / mean_b };
    let mut wins = 0usize;
    let mut ties = 0usize;
    for (&a, &b) in steps_a.iter().zip(&steps_b) {
        if a == b {
            ties += 1;
        } else if a < b {
            wins += 1;
        }
    }
    let decisive = snapshots.len() - ties;
    let (p_hat, wilson_ci) = if decisive == 0 {
        (None, None)
    } else {
        let p = wins as f64 / decisive as f64;
        (Some(p), Some(wilson_interval(wins, decisive, 1.96)))
    };
    Ok(SeedAdvantage {
        mean_steps_a: mean_a,
        mean_steps_b: mean_b,
        mean_ratio,
        p_hat,
        wilson_ci,
        n_snapshots: snapshots.len(),
        n_ties: ties,
    })
}

/// Wilson score interval for `wins` successes out of `n` trials.
pub fn wilson_interval(wins: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = wins as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One row of the KS-versus-coupling report.
#[derive(Clone, Debug)]
pub struct KsCouplingRow {
    pub epoch: usize,
    pub mean_abs_coupling: f64,
    pub max_abs_coupling: f64,
    pub ks_statistic: f64,
    pub reference: ReferenceKind,
}

/// For each training checkpoint, the KS statistic between `n` sampler draws
/// and `n` Boltzmann reference draws, ordered by mean coupling magnitude.
pub fn ks_vs_coupling_report<T: Scalar>(
    checkpoints: &[(usize, RbmParams<T>)],
    sampler: &dyn Sampler<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<KsCouplingRow>> {
    if checkpoints.is_empty() {
        return Err(Error::EmptyInput("checkpoints"));
    }
    let mut rows = Vec::with_capacity(checkpoints.len());
    for (epoch, params) in checkpoints {
        let run_seed = mix(seed, *epoch as u64);
        let draws = sampler.draw(params, n, mix(run_seed, 1))?;
        let (reference, kind) = boltzmann_reference(params, n, mix(run_seed, 2))?;
        let ks = ks_two_sample(&draws.energies, &reference.energies)?;
        rows.push(KsCouplingRow {
            epoch: *epoch,
            mean_abs_coupling: params.mean_abs_coupling(),
            max_abs_coupling: params.max_abs_coupling(),
            ks_statistic: ks.statistic,
            reference: kind,
        });
    }
    rows.sort_by(|a, b| a.mean_abs_coupling.partial_cmp(&b.mean_abs_coupling).unwrap());
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::samplers::{
        ExactSampler, SaSchedule, SamplerConfig, SamplerKind, SimulatedAnnealer, ZeroStateSampler,
    };
    use rand::Rng;

    fn random_params(n_v: usize, n_h: usize, seed: u64, scale: f64) -> RbmParams<f64> {
        let mut rng = stream_rng(seed, 0);
        let w = (0..n_v * n_h).map(|_| rng.gen_range(-scale..scale)).collect();
        let b = (0..n_v).map(|_| rng.gen_range(-scale..scale)).collect();
        let c = (0..n_h).map(|_| rng.gen_range(-scale..scale)).collect();
        RbmParams::from_parts(n_v, n_h, w, b, c).unwrap()
    }

    /// Samples the Boltzmann distribution of `factor * params`: a sampler
    /// that runs "colder" than the couplings it is programmed with.
    struct ColdSampler {
        factor: f64,
    }

    impl Sampler<f64> for ColdSampler {
        fn draw(&self, params: &RbmParams<f64>, n: usize, seed: u64) -> Result<SampleSet<f64>> {
            exact_sample(&params.scaled(self.factor), n, seed)
        }

        fn source(&self) -> crate::samplers::SampleSource {
            crate::samplers::SampleSource::Other("cold".into())
        }
    }

    #[test]
    fn ks_identical_samples() {
        let xs = [1.0f64, 2.0, 3.0];
        let ks = ks_two_sample(&xs, &xs).unwrap();
        assert_eq!(ks.statistic, 0.0);
        assert!(ks.p_value > 0.99);
    }

    #[test]
    fn ks_disjoint_supports() {
        let ks = ks_two_sample(&[0.0f64, 0.0, 0.0], &[1.0f64, 1.0, 1.0]).unwrap();
        assert_eq!(ks.statistic, 1.0);
    }

    #[test]
    fn ks_rejects_empty_inputs() {
        assert!(ks_two_sample::<f64>(&[], &[1.0]).is_err());
        assert!(ks_two_sample::<f64>(&[1.0], &[]).is_err());
    }

    #[test]
    fn ks_statistic_matches_direct_computation() {
        // Hand case: xs = {1,2}, ys = {2,3}; D = 1/2 at x in [1,2).
        let ks = ks_two_sample(&[1.0f64, 2.0], &[2.0f64, 3.0]).unwrap();
        assert!((ks.statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ks_is_symmetric_and_permutation_invariant() {
        let mut rng = stream_rng(3, 0);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = (0..150).map(|_| rng.gen::<f64>() * 1.1).collect();
        let forward = ks_two_sample(&xs, &ys).unwrap();
        let backward = ks_two_sample(&ys, &xs).unwrap();
        assert_eq!(forward.statistic, backward.statistic);
        assert_eq!(forward.p_value, backward.p_value);
        let mut shuffled = xs.clone();
        shuffled.reverse();
        let perm = ks_two_sample(&shuffled, &ys).unwrap();
        assert_eq!(forward.statistic, perm.statistic);
    }

    #[test]
    fn ks_p_values_calibrated_on_exact_draws() {
        let p = random_params(3, 3, 5, 0.4);
        let mut deciles = [0usize; 10];
        let reps = 200;
        for rep in 0..reps {
            let a = exact_sample(&p, 1000, mix(7, rep as u64)).unwrap();
            let b = exact_sample(&p, 1000, mix(11, rep as u64)).unwrap();
            let ks = ks_two_sample(&a.energies, &b.energies).unwrap();
            let bin = ((ks.p_value * 10.0) as usize).min(9);
            deciles[bin] += 1;
        }
        let expect = reps as f64 / 10.0;
        let chi2: f64 =
            deciles.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // chi-square, 9 dof, alpha = 0.01.
        assert!(chi2 < 21.666, "chi2 = {chi2}, deciles {deciles:?}");
    }

    #[test]
    fn kolmogorov_q_known_values() {
        // Q(0.8276...) ~ 0.5 (the distribution's median).
        assert!((kolmogorov_q(0.82757) - 0.5).abs() < 1e-3);
        assert!(kolmogorov_q(0.5) > 0.95);
        assert!(kolmogorov_q(2.0) < 0.001);
    }

    #[test]
    fn beta_estimate_recovers_unit_temperature() {
        let p = random_params(3, 3, 13, 1.0);
        let mut estimates = Vec::new();
        for run in 0..20 {
            let est = estimate_beta(&p, &ExactSampler, 1.0, 10_000, mix(17, run)).unwrap();
            estimates.push(est.beta_eff);
        }
        let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean beta_eff = {mean}");
    }

    #[test]
    fn beta_estimate_detects_a_colder_sampler() {
        let p = random_params(3, 3, 19, 1.0);
        let cold = ColdSampler { factor: 2.0 };
        let mut estimates = Vec::new();
        for run in 0..20 {
            let est = estimate_beta(&p, &cold, 1.0, 10_000, mix(23, run)).unwrap();
            estimates.push(est.beta_eff);
        }
        let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
        assert!((mean - 2.0).abs() < 0.2, "mean beta_eff = {mean}");
    }

    #[test]
    fn beta_estimate_reports_degenerate_models() {
        let p = RbmParams::<f64>::zeros(3, 3).unwrap();
        let err = estimate_beta(&p, &ExactSampler, 1.0, 1000, 29).unwrap_err();
        assert!(matches!(err, Error::TempEstimation(_)));
    }

    #[test]
    fn beta_estimate_enforces_minimum_sample_count() {
        let p = random_params(2, 2, 31, 1.0);
        assert!(estimate_beta(&p, &ExactSampler, 1.0, 10, 31).is_err());
    }

    #[test]
    fn beta_estimate_invariant_fields() {
        let p = random_params(3, 3, 37, 1.0);
        let est = estimate_beta(&p, &ExactSampler, 1.0, 5000, 41).unwrap();
        assert!(est.n_bins_used >= 2);
        assert!((est.beta_eff - est.beta_0 * est.slope / (1.0 - est.x)).abs() < 1e-12);
    }

    #[test]
    fn beta_estimate_scale_consistency() {
        // Estimating (A, beta_0) and (2A, 2 beta_0) against the same
        // physical sampler programs identical first draws and must agree
        // on average.
        let p = random_params(3, 3, 43, 1.0);
        let doubled = p.scaled(2.0);
        let mut diff = Vec::new();
        for run in 0..10 {
            let a = estimate_beta(&p, &ExactSampler, 1.0, 10_000, mix(47, run)).unwrap();
            let b = estimate_beta(&doubled, &ExactSampler, 2.0, 10_000, mix(47, run)).unwrap();
            diff.push(a.beta_eff - b.beta_eff);
        }
        let mean_diff = diff.iter().sum::<f64>() / diff.len() as f64;
        assert!(mean_diff.abs() < 0.1, "mean difference {mean_diff}");
    }

    #[test]
    fn beta_scaled_wrapper_recovers_unit_temperature_statistics() {
        let p = random_params(3, 3, 211, 1.2);
        let cold = ColdSampler { factor: 2.0 };
        // Calibrate on the cold device, then draw corrected samples.
        let (corrected, estimate) = calibrated_sampler(&cold, &p, 1.0, 10_000, 223).unwrap();
        assert!((estimate.beta_eff - 2.0).abs() < 0.3, "estimate {}", estimate.beta_eff);
        let draws = corrected.draw(&p, 4000, 227).unwrap();
        draws.verify_energies(&p, 1e-9).unwrap();
        let reference = exact_sample(&p, 4000, 229).unwrap();
        let ks = ks_two_sample(&draws.energies, &reference.energies).unwrap();
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
        // Uncorrected draws from the same device fail the same test.
        let raw = cold.draw(&p, 4000, 233).unwrap();
        let ks_raw = ks_two_sample(&raw.energies, &reference.energies).unwrap();
        assert!(ks_raw.p_value < 0.01, "uncorrected KS p = {}", ks_raw.p_value);
    }

    #[test]
    fn equilibrated_seeds_need_no_sweeps() {
        let p = random_params(3, 3, 53, 1.0);
        let mut zero_count = 0;
        for trial in 0..100u64 {
            let seeds = exact_sample(&p, 1000, mix(59, trial)).unwrap();
            let reference = exact_sample(&p, 1000, mix(61, trial)).unwrap();
            let steps = steps_to_boltzmann(&p, &seeds, &reference, 50, mix(67, trial)).unwrap();
            if steps == 0 {
                zero_count += 1;
            }
        }
        assert!(zero_count >= 90, "only {zero_count}/100 trials needed 0 sweeps");
    }

    #[test]
    fn cold_start_seeds_need_strictly_more_sweeps() {
        let p = random_params(4, 4, 71, 2.5);
        let zeros = ZeroStateSampler;
        let seeds = Sampler::<f64>::draw(&zeros, &p, 1000, 73).unwrap();
        let reference = exact_sample(&p, 1000, 79).unwrap();
        let steps = steps_to_boltzmann(&p, &seeds, &reference, 100, 83).unwrap();
        assert!(steps >= 1, "expected positive step count, got {steps}");
    }

    #[test]
    fn never_reached_returns_sentinel() {
        let p = random_params(4, 4, 89, 2.5);
        let zeros = ZeroStateSampler;
        let seeds = Sampler::<f64>::draw(&zeros, &p, 1000, 97).unwrap();
        let reference = exact_sample(&p, 1000, 101).unwrap();
        let steps = steps_to_boltzmann(&p, &seeds, &reference, 0, 103).unwrap();
        assert_eq!(steps, 1);
    }

    #[test]
    fn seed_advantage_same_sampler_is_all_ties() {
        let snapshots = vec![random_params(3, 3, 107, 1.0), random_params(3, 3, 109, 1.0)];
        let options = SeedAdvantageOptions { n_samples: 300, max_sweeps: 30, reference_samples: 500 };
        let exact = ExactSampler;
        let out = seed_advantage(&snapshots, &exact, &exact, &options, 113).unwrap();
        assert_eq!(out.n_ties, 2);
        assert!(out.p_hat.is_none());
        assert!((out.mean_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seed_advantage_exact_beats_zero_seeds() {
        let snapshots: Vec<_> =
            (0..6).map(|i| random_params(4, 4, 127 + i, 2.5)).collect();
        let options = SeedAdvantageOptions { n_samples: 400, max_sweeps: 60, reference_samples: 800 };
        let out =
            seed_advantage(&snapshots, &ExactSampler, &ZeroStateSampler, &options, 131).unwrap();
        assert!(out.p_hat.unwrap_or(0.0) > 0.9, "p_hat = {:?}", out.p_hat);
        assert!(out.mean_ratio < 1.0);
    }

    #[test]
    fn wilson_interval_narrows_like_inverse_sqrt_n() {
        let (lo10, hi10) = wilson_interval(6, 10, 1.96);
        let (lo40, hi40) = wilson_interval(24, 40, 1.96);
        assert!(hi40 - lo40 < 0.7 * (hi10 - lo10));
    }

    #[test]
    fn ks_report_small_couplings_stay_below_point_one() {
        let p = random_params(4, 4, 137, 0.1);
        let sa = SimulatedAnnealer {
            schedule: SaSchedule { beta_start: 0.5, beta_end: 1.0, n_sweeps: 150 },
            postprocess_sweeps: 2,
        };
        let rows = ks_vs_coupling_report(&[(0, p)], &sa, 1000, 139).unwrap();
        assert!(rows[0].ks_statistic < 0.1, "KS = {}", rows[0].ks_statistic);
        assert_eq!(rows[0].reference, ReferenceKind::Exact);
    }

    #[test]
    fn ks_report_identical_sampler_matches_calibration() {
        let p = random_params(3, 3, 149, 0.5);
        let checkpoints: Vec<_> = (0..5).map(|e| (e, p.clone())).collect();
        let rows = ks_vs_coupling_report(&checkpoints, &ExactSampler, 1000, 151).unwrap();
        // Two-exact-sample KS statistics concentrate near 1.36/sqrt(n_eff).
        for row in &rows {
            assert!(row.ks_statistic < 0.1);
        }
    }

    #[test]
    fn ks_report_quenched_sampler_is_farther_from_boltzmann() {
        let checkpoints: Vec<_> =
            (0..4).map(|e| (e, random_params(4, 4, 157 + e as u64, 1.0 + e as f64 * 0.5))).collect();
        let equilibrium = SimulatedAnnealer {
            schedule: SaSchedule { beta_start: 1.0, beta_end: 1.0, n_sweeps: 250 },
            postprocess_sweeps: 0,
        };
        let quenched = SimulatedAnnealer {
            schedule: SaSchedule { beta_start: 0.2, beta_end: 10.0, n_sweeps: 60 },
            postprocess_sweeps: 0,
        };
        let eq_rows = ks_vs_coupling_report(&checkpoints, &equilibrium, 800, 163).unwrap();
        let q_rows = ks_vs_coupling_report(&checkpoints, &quenched, 800, 167).unwrap();
        for (e, q) in eq_rows.iter().zip(&q_rows) {
            assert!(
                q.ks_statistic > e.ks_statistic,
                "epoch {}: quenched {} vs equilibrium {}",
                e.epoch,
                q.ks_statistic,
                e.ks_statistic
            );
        }
    }

    #[test]
    fn sampler_config_round_trips_through_dispatch() {
        let p = random_params(3, 3, 173, 0.5);
        let cfg = SamplerConfig::new(SamplerKind::Exact).with_seed(7);
        let sampler = crate::samplers::sampler_from_config::<f64>(&cfg).unwrap();
        let out = sampler.draw(&p, 10, cfg.rng_seed).unwrap();
        assert_eq!(out.len(), 10);
    }

    #[test]
    fn reference_falls_back_to_long_chain_over_budget() {
        // 30 units: beyond the enumeration budget, so the reference must
        // come from a long Gibbs chain instead of erroring.
        let big = RbmParams::<f64>::zeros(20, 10).unwrap();
        let (_, kind) = boltzmann_reference(&big, 5, 3).unwrap();
        assert_eq!(kind, ReferenceKind::LongChain);
        let small = RbmParams::<f64>::zeros(3, 3).unwrap();
        let (_, kind) = boltzmann_reference(&small, 5, 3).unwrap();
        assert_eq!(kind, ReferenceKind::Exact);
    }
}
