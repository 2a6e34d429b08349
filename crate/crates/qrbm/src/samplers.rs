//! Negative-phase sample sources behind one sampler contract: block Gibbs
//! chains, data-seeded CD chains, simulated annealing, and exact Boltzmann
//! sampling by enumeration.
//!
//! Every sampler is a pure function of (params, config, seed): chains get
//! per-index generator streams, so results are independent of execution
//! order and identical across runs.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::bits::BitVector;
use crate::rbm::RbmParams;
use crate::rng::{mix, stream_rng};
use crate::scalar::{logistic, Scalar};
use crate::{Error, Result};

/// Which sample source produced a [`SampleSet`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SampleSource {
    Gibbs,
    DataSeededCd,
    SimulatedAnnealing,
    Exact,
    Chimera,
    Other(String),
}

impl std::fmt::Display for SampleSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleSource::Gibbs => write!(f, "gibbs"),
            SampleSource::DataSeededCd => write!(f, "cd"),
            SampleSource::SimulatedAnnealing => write!(f, "sa"),
            SampleSource::Exact => write!(f, "exact"),
            SampleSource::Chimera => write!(f, "chimera"),
            SampleSource::Other(name) => write!(f, "{name}"),
        }
    }
}

/// A weighted batch of joint states with their energies.
#[derive(Clone, Debug)]
pub struct SampleSet<T> {
    pub states: Vec<(BitVector, BitVector)>,
    pub energies: Vec<T>,
    pub source: SampleSource,
    /// Fraction of logical chains that decoded non-unanimously
    /// (Chimera sampler only).
    pub broken_chain_fraction: Option<f64>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(
        params: &RbmParams<T>,
        states: Vec<(BitVector, BitVector)>,
        source: SampleSource,
    ) -> Result<Self> {
        let energies = states
            .iter()
            .map(|(v, h)| params.energy(v, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { states, energies, source, broken_chain_fraction: None })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn energies_f64(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e.f64()).collect()
    }

    /// Recompute every energy and check it against the stored value.
    pub fn verify_energies(&self, params: &RbmParams<T>, tol: f64) -> Result<()> {
        for ((v, h), &e) in self.states.iter().zip(&self.energies) {
            let fresh = params.energy(v, h)?;
            if (fresh - e).abs().f64() > tol {
                return Err(Error::Data(format!(
                    "stored energy {} disagrees with recomputed {}",
                    e.f64(),
                    fresh.f64()
                )));
            }
        }
        Ok(())
    }

    /// Diagnostic CSV dump: `chain_id,energy,v_bits,h_bits`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "chain_id,energy,v_bits,h_bits")?;
        for (i, ((v, h), e)) in self.states.iter().zip(&self.energies).enumerate() {
            writeln!(out, "{},{},{},{}", i, e.f64(), v.to_bit_string(), h.to_bit_string())?;
        }
        Ok(())
    }
}

/// One joint state of a Markov chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub v: BitVector,
    pub h: BitVector,
}

impl ChainState {
    pub fn zeros<T: Scalar>(params: &RbmParams<T>) -> Self {
        Self { v: BitVector::zeros(params.n_visible()), h: BitVector::zeros(params.n_hidden()) }
    }

    pub fn random<T: Scalar, R: Rng>(params: &RbmParams<T>, rng: &mut R) -> Self {
        let v: Vec<u8> = (0..params.n_visible()).map(|_| rng.gen_range(0..2u8)).collect();
        let h: Vec<u8> = (0..params.n_hidden()).map(|_| rng.gen_range(0..2u8)).collect();
        Self {
            v: BitVector::from_bits(&v).expect("binary"),
            h: BitVector::from_bits(&h).expect("binary"),
        }
    }
}

/// Linear inverse-temperature ramp for simulated annealing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaSchedule {
    pub beta_start: f64,
    pub beta_end: f64,
    pub n_sweeps: usize,
}

impl SaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_start > 0.0 && self.beta_end >= self.beta_start) {
            return Err(Error::InvalidConfig(format!(
                "schedule requires beta_end >= beta_start > 0, got {} .. {}",
                self.beta_start, self.beta_end
            )));
        }
        if self.n_sweeps == 0 {
            return Err(Error::InvalidConfig("schedule needs at least one sweep".into()));
        }
        Ok(())
    }

    /// Beta for sweep `s` in `0..n_sweeps`, linear between the endpoints.
    pub fn beta_at(&self, s: usize) -> f64 {
        if self.n_sweeps <= 1 {
            return self.beta_end;
        }
        let t = s as f64 / (self.n_sweeps - 1) as f64;
        self.beta_start + (self.beta_end - self.beta_start) * t
    }
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self { beta_start: 0.1, beta_end: 1.0, n_sweeps: 100 }
    }
}

/// Sample source selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Gibbs,
    SimulatedAnnealing,
    Exact,
    Chimera,
}

/// Configuration for every negative-phase sample source.
#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Samples drawn per call (default 100, the per-step batch).
    pub n_samples: usize,
    /// Post-anneal Gibbs sweeps at beta = 1 (SA and Chimera kinds).
    pub gibbs_postprocess_sweeps: usize,
    /// Equilibration sweeps for the Gibbs kind.
    pub burn_in_sweeps: usize,
    pub sa_schedule: SaSchedule,
    pub rng_seed: u64,
    /// Chimera-specific knobs; ignored by the other kinds.
    pub chimera: crate::chimera::ChimeraOptions,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind) -> Self {
        let sa_schedule = match kind {
            // The annealer stand-in runs cold by default, like the hardware
            // it imitates; plain SA targets beta = 1.
            SamplerKind::Chimera => SaSchedule { beta_start: 0.1, beta_end: 3.0, n_sweeps: 100 },
            _ => SaSchedule::default(),
        };
        Self {
            kind,
            n_samples: 100,
            gibbs_postprocess_sweeps: 2,
            burn_in_sweeps: 100,
            sa_schedule,
            rng_seed: 0,
            chimera: crate::chimera::ChimeraOptions::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        self.sa_schedule.validate()
    }
}

/// The sampler contract every negative-phase source implements.
pub trait Sampler<T: Scalar>: Send + Sync {
    /// Draw `n_samples` joint states for `params`, deterministically in
    /// `(params, self, seed)`.
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, seed: u64) -> Result<SampleSet<T>>;

    fn source(&self) -> SampleSource;
}

/// Build the sampler selected by a [`SamplerConfig`].
pub fn sampler_from_config<T: Scalar>(config: &SamplerConfig) -> Result<Box<dyn Sampler<T>>> {
    config.validate()?;
    Ok(match config.kind {
        SamplerKind::Gibbs => Box::new(GibbsSampler { burn_in_sweeps: config.burn_in_sweeps }),
        SamplerKind::SimulatedAnnealing => Box::new(SimulatedAnnealer {
            schedule: config.sa_schedule,
            postprocess_sweeps: config.gibbs_postprocess_sweeps,
        }),
        SamplerKind::Exact => Box::new(ExactSampler),
        SamplerKind::Chimera => Box::new(crate::chimera::ChimeraSampler {
            options: config.chimera.clone(),
            schedule: config.sa_schedule,
            postprocess_sweeps: config.gibbs_postprocess_sweeps,
        }),
    })
}

/// Draw a sample set as configured (kind, n_samples, seed all from `config`).
pub fn draw_with_config<T: Scalar>(
    params: &RbmParams<T>,
    config: &SamplerConfig,
) -> Result<SampleSet<T>> {
    sampler_from_config(config)?.draw(params, config.n_samples, config.rng_seed)
}

/// One block Gibbs sweep at inverse temperature `beta`: resample all hidden
/// units from `p(h|v)`, then all visible units from `p(v|h)`.
pub fn gibbs_sweep_beta<T: Scalar, R: Rng>(
    params: &RbmParams<T>,
    state: &mut ChainState,
    beta: T,
    rng: &mut R,
) -> Result<()> {
    if state.v.len() != params.n_visible() || state.h.len() != params.n_hidden() {
        return Err(Error::DimensionMismatch(format!(
            "chain state {}x{} does not match model {}x{}",
            state.v.len(),
            state.h.len(),
            params.n_visible(),
            params.n_hidden()
        )));
    }
    let acts = params.hidden_activation(&state.v);
    for (j, a) in acts.into_iter().enumerate() {
        let p = logistic(beta * a).f64();
        state.h.set(j, u8::from(rng.gen::<f64>() < p));
    }
    let acts = params.visible_activation(&state.h);
    for (i, a) in acts.into_iter().enumerate() {
        let p = logistic(beta * a).f64();
        state.v.set(i, u8::from(rng.gen::<f64>() < p));
    }
    Ok(())
}

/// One block Gibbs sweep at beta = 1.
pub fn gibbs_sweep<T: Scalar, R: Rng>(
    params: &RbmParams<T>,
    state: &mut ChainState,
    rng: &mut R,
) -> Result<()> {
    gibbs_sweep_beta(params, state, T::one(), rng)
}

/// Contrastive-divergence negative phase: one chain per datapoint,
/// initialized at that datapoint and advanced `k` sweeps.
pub fn cd_negative_phase<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
    k: usize,
    seed: u64,
) -> Result<SampleSet<T>> {
    if minibatch.is_empty() {
        return Err(Error::EmptyInput("cd_negative_phase minibatch"));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("contrastive divergence requires k >= 1".into()));
    }
    let mut states = Vec::with_capacity(minibatch.len());
    for (chain, row) in minibatch.iter().enumerate() {
        let mut rng = stream_rng(seed, chain as u64);
        let mut state =
            ChainState { v: row.clone(), h: BitVector::zeros(params.n_hidden()) };
        for _ in 0..k {
            gibbs_sweep(params, &mut state, &mut rng)?;
        }
        states.push((state.v, state.h));
    }
    SampleSet::new(params, states, SampleSource::DataSeededCd)
}

/// Simulated annealing: independent runs of block Gibbs sweeps with beta
/// ramped linearly over the schedule, then post-anneal sweeps at beta = 1.
pub fn simulated_anneal<T: Scalar>(
    params: &RbmParams<T>,
    config: &SamplerConfig,
) -> Result<SampleSet<T>> {
    config.validate()?;
    SimulatedAnnealer {
        schedule: config.sa_schedule,
        postprocess_sweeps: config.gibbs_postprocess_sweeps,
    }
    .draw(params, config.n_samples, config.rng_seed)
}

/// MCMC Gibbs sampler: independent randomly-initialized chains equilibrated
/// for a fixed number of sweeps at beta = 1.
#[derive(Clone, Debug)]
pub struct GibbsSampler {
    pub burn_in_sweeps: usize,
}

impl<T: Scalar> Sampler<T> for GibbsSampler {
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, seed: u64) -> Result<SampleSet<T>> {
        let mut states = Vec::with_capacity(n_samples);
        for chain in 0..n_samples {
            let mut rng = stream_rng(seed, chain as u64);
            let mut state = ChainState::random(params, &mut rng);
            for _ in 0..self.burn_in_sweeps {
                gibbs_sweep(params, &mut state, &mut rng)?;
            }
            states.push((state.v, state.h));
        }
        SampleSet::new(params, states, SampleSource::Gibbs)
    }

    fn source(&self) -> SampleSource {
        SampleSource::Gibbs
    }
}

#[derive(Clone, Debug)]
pub struct SimulatedAnnealer {
    pub schedule: SaSchedule,
    pub postprocess_sweeps: usize,
}

impl<T: Scalar> Sampler<T> for SimulatedAnnealer {
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, seed: u64) -> Result<SampleSet<T>> {
        self.schedule.validate()?;
        let mut states = Vec::with_capacity(n_samples);
        for run in 0..n_samples {
            let mut rng = stream_rng(seed, run as u64);
            let mut state = ChainState::random(params, &mut rng);
            for s in 0..self.schedule.n_sweeps {
                let beta = T::of(self.schedule.beta_at(s));
                gibbs_sweep_beta(params, &mut state, beta, &mut rng)?;
            }
            for _ in 0..self.postprocess_sweeps {
                gibbs_sweep(params, &mut state, &mut rng)?;
            }
            states.push((state.v, state.h));
        }
        SampleSet::new(params, states, SampleSource::SimulatedAnnealing)
    }

    fn source(&self) -> SampleSource {
        SampleSource::SimulatedAnnealing
    }
}

/// Exact Boltzmann sampler: inverse-CDF over the enumerated marginal of the
/// smaller layer, then one conditional draw for the other layer.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactSampler;

/// Enumerated marginal distribution of the smaller layer, reusable across
/// draws.
pub struct ExactDistribution<T> {
    params: RbmParams<T>,
    visible_enumerated: bool,
    layer_len: usize,
    cumulative: Vec<f64>,
}

impl<T: Scalar> ExactDistribution<T> {
    pub fn build(params: &RbmParams<T>) -> Result<Self> {
        let logs = params.layer_log_weights()?;
        let log_z = crate::scalar::log_sum_exp(&logs);
        let mut cumulative = Vec::with_capacity(logs.len());
        let mut acc = 0.0f64;
        for lw in &logs {
            acc += (*lw - log_z).exp().f64();
            cumulative.push(acc);
        }
        // Guard against rounding: the last entry must close the interval.
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        let visible_enumerated = params.enumerates_visible_layer();
        let layer_len =
            if visible_enumerated { params.n_visible() } else { params.n_hidden() };
        Ok(Self { params: params.clone(), visible_enumerated, layer_len, cumulative })
    }

    fn draw_one(&self, rng: &mut ChaCha12Rng) -> Result<(BitVector, BitVector)> {
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        let first = BitVector::from_index(idx, self.layer_len);
        if self.visible_enumerated {
            let probs = self.params.cond_hidden(&first)?;
            let bits: Vec<u8> =
                probs.iter().map(|p| u8::from(rng.gen::<f64>() < p.f64())).collect();
            Ok((first, BitVector::from_bits(&bits)?))
        } else {
            let probs = self.params.cond_visible(&first)?;
            let bits: Vec<u8> =
                probs.iter().map(|p| u8::from(rng.gen::<f64>() < p.f64())).collect();
            Ok((BitVector::from_bits(&bits)?, first))
        }
    }
}

/// I.i.d. draws from the enumerated joint distribution at beta = 1.
pub fn exact_sample<T: Scalar>(
    params: &RbmParams<T>,
    n_samples: usize,
    seed: u64,
) -> Result<SampleSet<T>> {
    let dist = ExactDistribution::build(params)?;
    let mut states = Vec::with_capacity(n_samples);
    for draw in 0..n_samples {
        let mut rng = stream_rng(seed, draw as u64);
        states.push(dist.draw_one(&mut rng)?);
    }
    SampleSet::new(params, states, SampleSource::Exact)
}

impl<T: Scalar> Sampler<T> for ExactSampler {
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, seed: u64) -> Result<SampleSet<T>> {
        exact_sample(params, n_samples, seed)
    }

    fn source(&self) -> SampleSource {
        SampleSource::Exact
    }
}

/// Seed source producing uniform random states with no dynamics (the
/// "random bit string" baseline in seeding comparisons).
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomStateSampler;

impl<T: Scalar> Sampler<T> for RandomStateSampler {
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, seed: u64) -> Result<SampleSet<T>> {
        let states = (0..n_samples)
            .map(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let s = ChainState::random(params, &mut rng);
                (s.v, s.h)
            })
            .collect();
        SampleSet::new(params, states, SampleSource::Other("random".into()))
    }

    fn source(&self) -> SampleSource {
        SampleSource::Other("random".into())
    }
}

/// Seed source producing deterministic all-zero states.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroStateSampler;

impl<T: Scalar> Sampler<T> for ZeroStateSampler {
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, _seed: u64) -> Result<SampleSet<T>> {
        let states = (0..n_samples)
            .map(|_| {
                (BitVector::zeros(params.n_visible()), BitVector::zeros(params.n_hidden()))
            })
            .collect();
        SampleSet::new(params, states, SampleSource::Other("zeros".into()))
    }

    fn source(&self) -> SampleSource {
        SampleSource::Other("zeros".into())
    }
}

/// Derive the per-step sampler seed used by the training loop.
pub fn step_seed(master: u64, epoch: usize, step: usize) -> u64 {
    mix(master, mix(0x53414D50, ((epoch as u64) << 32) ^ step as u64))
}
