//! Gradient flavors (generative sampled, generative exact, discriminative
//! exact, hybrid) and the minibatch SGD loop with annealed-hybrid switching.
//!
//! All gradients are derivatives of the relevant negative log-likelihood,
//! so the update is always `theta <- theta - lr * grad`. Hidden units are
//! Rao-Blackwellized in both phases: expectations use `p(h|v)` instead of
//! sampled hidden bits.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bits::BitVector;
use crate::rbm::RbmParams;
use crate::rng::{mix, stream_rng};
use crate::samplers::{
    cd_negative_phase, draw_with_config, step_seed, SampleSet, SamplerConfig, SamplerKind,
};
use crate::scalar::Scalar;
use crate::{Error, Result, ENUM_BUDGET};

/// Per-parameter derivatives of a loss (or raw expectations for one phase).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate<T> {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// Row-major `n_visible x n_hidden`, like the weight matrix.
    pub dw: Vec<T>,
    pub db: Vec<T>,
    pub dc: Vec<T>,
}

impl<T: Scalar> GradientEstimate<T> {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            dw: vec![T::zero(); n_visible * n_hidden],
            db: vec![T::zero(); n_visible],
            dc: vec![T::zero(); n_hidden],
        }
    }

    /// `self + factor * other`, componentwise.
    pub fn add_scaled(&mut self, other: &Self, factor: T) {
        debug_assert_eq!((self.n_visible, self.n_hidden), (other.n_visible, other.n_hidden));
        for (a, &b) in self.dw.iter_mut().zip(&other.dw) {
            *a = *a + factor * b;
        }
        for (a, &b) in self.db.iter_mut().zip(&other.db) {
            *a = *a + factor * b;
        }
        for (a, &b) in self.dc.iter_mut().zip(&other.dc) {
            *a = *a + factor * b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for x in self.dw.iter_mut().chain(self.db.iter_mut()).chain(self.dc.iter_mut()) {
            *x = *x * factor;
        }
    }

    /// Flat view over (dw, db, dc) for norms and comparisons.
    pub fn flat(&self) -> impl Iterator<Item = T> + '_ {
        self.dw.iter().chain(self.db.iter()).chain(self.dc.iter()).copied()
    }
}

fn check_rows<T: Scalar>(params: &RbmParams<T>, rows: &[BitVector]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("minibatch"));
    }
    for row in rows {
        if row.len() != params.n_visible() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} bits, model expects {} visible units",
                row.len(),
                params.n_visible()
            )));
        }
    }
    Ok(())
}

/// Data-phase expectations over a minibatch of full visible rows (class bit
/// already appended): `<v_i>`, `<h_j>`, `<v_i h_j>` with hidden units
/// replaced by their conditional means.
pub fn positive_phase<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
) -> Result<GradientEstimate<T>> {
    check_rows(params, minibatch)?;
    let n_v = params.n_visible();
    let n_h = params.n_hidden();
    let mut phase = GradientEstimate::zeros(n_v, n_h);
    for row in minibatch {
        let probs = params.cond_hidden(row)?;
        for i in 0..n_v {
            if row.get(i) == 1 {
                phase.db[i] = phase.db[i] + T::one();
                for j in 0..n_h {
                    phase.dw[i * n_h + j] = phase.dw[i * n_h + j] + probs[j];
                }
            }
        }
        for j in 0..n_h {
            phase.dc[j] = phase.dc[j] + probs[j];
        }
    }
    let inv = T::one() / T::of(minibatch.len() as f64);
    phase.scale(inv);
    Ok(phase)
}

/// Model-phase expectations from a sample set, Rao-Blackwellized against
/// the sampled visibles.
pub fn sample_model_expectations<T: Scalar>(
    params: &RbmParams<T>,
    samples: &SampleSet<T>,
) -> Result<GradientEstimate<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("model sample set"));
    }
    let rows: Vec<BitVector> = samples.states.iter().map(|(v, _)| v.clone()).collect();
    positive_phase(params, &rows)
}

/// Exact model expectations by enumerating the smaller layer.
pub fn exact_model_expectations<T: Scalar>(params: &RbmParams<T>) -> Result<GradientEstimate<T>> {
    let log_z = params.log_partition()?;
    let n_v = params.n_visible();
    let n_h = params.n_hidden();
    let mut phase = GradientEstimate::zeros(n_v, n_h);
    if params.n_visible() <= params.n_hidden() {
        for idx in 0..(1usize << n_v) {
            let v = BitVector::from_index(idx, n_v);
            let weight = ((-params.free_energy(&v)?) - log_z).exp();
            let probs = params.cond_hidden(&v)?;
            for i in 0..n_v {
                if v.get(i) == 1 {
                    phase.db[i] = phase.db[i] + weight;
                    for j in 0..n_h {
                        phase.dw[i * n_h + j] = phase.dw[i * n_h + j] + weight * probs[j];
                    }
                }
            }
            for j in 0..n_h {
                phase.dc[j] = phase.dc[j] + weight * probs[j];
            }
        }
    } else {
        for idx in 0..(1usize << n_h) {
            let h = BitVector::from_index(idx, n_h);
            let weight = ((-params.hidden_free_energy(&h)?) - log_z).exp();
            let probs = params.cond_visible(&h)?;
            for j in 0..n_h {
                if h.get(j) == 1 {
                    phase.dc[j] = phase.dc[j] + weight;
                    for i in 0..n_v {
                        phase.dw[i * n_h + j] = phase.dw[i * n_h + j] + weight * probs[i];
                    }
                }
            }
            for i in 0..n_v {
                phase.db[i] = phase.db[i] + weight * probs[i];
            }
        }
    }
    Ok(phase)
}

/// Generative NLL gradient: model expectations minus data expectations.
///
/// With the exact sampler kind (and a model within the enumeration budget)
/// the model term is the enumerated expectation and carries no sampling
/// variance; otherwise it comes from the configured sampler's draws.
pub fn generative_gradient<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
    sampler: &SamplerConfig,
) -> Result<GradientEstimate<T>> {
    generative_gradient_corrected(params, minibatch, sampler, 1.0)
}

/// [`generative_gradient`] with temperature correction: the sampler is
/// programmed at couplings `params / beta_eff`, so a device that runs at
/// inverse temperature `beta_eff` effectively samples `params` at beta = 1.
/// Expectations are always computed under the uncorrected parameters.
pub fn generative_gradient_corrected<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
    sampler: &SamplerConfig,
    beta_eff: f64,
) -> Result<GradientEstimate<T>> {
    if !(beta_eff.is_finite() && beta_eff > 0.0) {
        return Err(Error::InvalidConfig(format!("beta_eff must be positive, got {beta_eff}")));
    }
    let data = positive_phase(params, minibatch)?;
    let model = if sampler.kind == SamplerKind::Exact
        && params.n_visible() + params.n_hidden() <= ENUM_BUDGET
    {
        exact_model_expectations(params)?
    } else {
        let samples = if beta_eff == 1.0 {
            draw_with_config(params, sampler)?
        } else {
            draw_with_config(&params.scaled(T::of(1.0 / beta_eff)), sampler)?
        };
        sample_model_expectations(params, &samples)?
    };
    let mut grad = model;
    grad.add_scaled(&data, -T::one());
    Ok(grad)
}

/// CD-k gradient: the model term comes from data-seeded chains advanced
/// `k` sweeps.
pub fn cd_gradient<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
    k: usize,
    seed: u64,
) -> Result<GradientEstimate<T>> {
    let data = positive_phase(params, minibatch)?;
    let samples = cd_negative_phase(params, minibatch, k, seed)?;
    let mut grad = sample_model_expectations(params, &samples)?;
    grad.add_scaled(&data, -T::one());
    Ok(grad)
}

/// Exact gradient of the mean conditional NLL `-log p(class | image)`.
///
/// The class bit is the last visible unit; contracting over its two values
/// gives, per row, posterior-weighted free-energy gradients against the
/// realized-class one. No Markov chains, linear in `n_hidden` per row.
pub fn discriminative_gradient<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
) -> Result<GradientEstimate<T>> {
    check_rows(params, minibatch)?;
    if params.n_visible() < 2 {
        return Err(Error::InvalidConfig(
            "discriminative training needs image bits plus the class bit".into(),
        ));
    }
    let n_v = params.n_visible();
    let n_h = params.n_hidden();
    let class = n_v - 1;
    let mut grad = GradientEstimate::zeros(n_v, n_h);
    for row in minibatch {
        let label = row.get(class);
        let mut v0 = row.clone();
        v0.set(class, 0);
        let pred = params.classify(&strip_class(&v0))?;
        let posteriors = [T::one() - pred.posterior_1, pred.posterior_1];
        for (y, &posterior) in posteriors.iter().enumerate() {
            // kappa = 1[y == label] - p(y | image); dNLL = sum_y kappa * dF(v_y).
            let kappa = if y as u8 == label { T::one() - posterior } else { -posterior };
            if kappa == T::zero() {
                continue;
            }
            let mut vy = v0.clone();
            vy.set(class, y as u8);
            let probs = params.cond_hidden(&vy)?;
            // dF/db_i = -v_i, dF/dc_j = -p(h_j|v), dF/dW_ij = -v_i p(h_j|v).
            for i in 0..n_v {
                if vy.get(i) == 1 {
                    grad.db[i] = grad.db[i] - kappa;
                    for j in 0..n_h {
                        grad.dw[i * n_h + j] = grad.dw[i * n_h + j] - kappa * probs[j];
                    }
                }
            }
            for j in 0..n_h {
                grad.dc[j] = grad.dc[j] - kappa * probs[j];
            }
        }
    }
    grad.scale(T::one() / T::of(minibatch.len() as f64));
    Ok(grad)
}

fn strip_class(row: &BitVector) -> BitVector {
    let bits = row.as_slice();
    BitVector::from_bits(&bits[..bits.len() - 1]).expect("binary")
}

/// Convex mix `lambda/(1+lambda) * generative + 1/(1+lambda) *
/// discriminative`. `lambda = 0` short-circuits to the discriminative
/// gradient (no sampling happens).
pub fn hybrid_gradient<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
    sampler: &SamplerConfig,
    lambda: f64,
) -> Result<GradientEstimate<T>> {
    hybrid_gradient_corrected(params, minibatch, sampler, lambda, 1.0)
}

/// [`hybrid_gradient`] with the generative term temperature-corrected as in
/// [`generative_gradient_corrected`].
pub fn hybrid_gradient_corrected<T: Scalar>(
    params: &RbmParams<T>,
    minibatch: &[BitVector],
    sampler: &SamplerConfig,
    lambda: f64,
    beta_eff: f64,
) -> Result<GradientEstimate<T>> {
    if lambda < 0.0 {
        return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
    }
    if lambda == 0.0 {
        return discriminative_gradient(params, minibatch);
    }
    let gen = generative_gradient_corrected(params, minibatch, sampler, beta_eff)?;
    let disc = discriminative_gradient(params, minibatch)?;
    let wg = T::of(lambda / (1.0 + lambda));
    let wd = T::of(1.0 / (1.0 + lambda));
    let mut grad = GradientEstimate::zeros(params.n_visible(), params.n_hidden());
    grad.add_scaled(&gen, wg);
    grad.add_scaled(&disc, wd);
    Ok(grad)
}

/// Mean conditional NLL `-log p(class | image)` over labeled rows.
pub fn discriminative_nll<T: Scalar>(params: &RbmParams<T>, rows: &[BitVector]) -> Result<T> {
    check_rows(params, rows)?;
    let class = params.n_visible() - 1;
    let mut total = T::zero();
    for row in rows {
        let pred = params.classify(&strip_class(row))?;
        let p = if row.get(class) == 1 {
            pred.posterior_1
        } else {
            T::one() - pred.posterior_1
        };
        total = total - p.max(T::of(1e-300)).ln();
    }
    Ok(total / T::of(rows.len() as f64))
}

/// Mean generative NLL `-log p(v) = F(v) + log Z` over rows (exact, so the
/// enumeration budget applies).
pub fn generative_nll<T: Scalar>(params: &RbmParams<T>, rows: &[BitVector]) -> Result<T> {
    check_rows(params, rows)?;
    let log_z = params.log_partition()?;
    let mut total = T::zero();
    for row in rows {
        total = total + params.free_energy(row)? + log_z;
    }
    Ok(total / T::of(rows.len() as f64))
}

/// Training algorithm selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Contrastive divergence with `cd_k` data-seeded sweeps.
    Cd,
    /// Generative gradient with the configured sampler's negative phase.
    SamplerGenerative,
    /// Exact conditional-likelihood gradient.
    Discriminative,
    /// lambda-mix of generative and discriminative gradients.
    Hybrid,
    /// Generative until `switch_epoch`, discriminative afterwards.
    AnnealedHybrid,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Cd => "cd",
            Algorithm::SamplerGenerative => "sampler_generative",
            Algorithm::Discriminative => "discriminative",
            Algorithm::Hybrid => "hybrid",
            Algorithm::AnnealedHybrid => "annealed_hybrid",
        }
    }
}

/// Effective-temperature correction cadence for the negative-phase sampler.
///
/// When enabled, the sampler is programmed at `params / beta_eff` with
/// `beta_eff` estimated from its own output; a failed estimate falls back
/// to the prior guess (`AtStart`) or keeps the previous value
/// (`EveryStep`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaCorrection {
    /// Program couplings as-is.
    Off,
    /// Estimate once on the initial parameters and reuse throughout.
    AtStart { beta_0: f64, n_samples: usize },
    /// Re-estimate before every gradient step.
    EveryStep { beta_0: f64, n_samples: usize },
}

/// Configuration of one training run.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Hybrid mix weight.
    pub lambda: f64,
    /// Epoch at which annealed-hybrid switches to discriminative updates.
    pub switch_epoch: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub sampler: SamplerConfig,
    /// Sweeps per CD chain.
    pub cd_k: usize,
    /// Clip every parameter to `[-weight_clip, weight_clip]` after each step.
    pub weight_clip: Option<f64>,
    /// L2 penalty on the couplings; off by default since it hurts the
    /// classifier even though it tames coupling growth.
    pub l2: f64,
    /// Temperature correction for sampler-backed negative phases.
    pub beta_correction: BetaCorrection,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Discriminative,
            lambda: 0.01,
            switch_epoch: 0,
            learning_rate: 0.05,
            batch_size: 128,
            n_epochs: 100,
            sampler: SamplerConfig::new(SamplerKind::Exact),
            cd_k: 1,
            weight_clip: None,
            l2: 0.0,
            beta_correction: BetaCorrection::Off,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
        }
        if self.switch_epoch > self.n_epochs {
            return Err(Error::InvalidConfig("switch_epoch must be <= n_epochs".into()));
        }
        if self.algorithm == Algorithm::Cd && self.cd_k == 0 {
            return Err(Error::InvalidConfig("cd_k must be >= 1".into()));
        }
        self.sampler.validate()
    }
}

/// Accuracy and coupling statistics recorded after each epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Gradient flavor that produced this epoch's updates.
    pub algorithm: String,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub mean_abs_coupling: f64,
    pub median_quadratic_coupling: f64,
    /// Effective inverse temperature in force at the end of the epoch;
    /// `None` when correction is off.
    pub beta_eff: Option<f64>,
    /// Seconds spent in the epoch; excluded from the CSV so that output
    /// bytes stay reproducible.
    pub wall_time: f64,
}

/// Small random initialization: `W ~ U(-0.1, 0.1)/sqrt(n_v)`, zero biases.
pub fn initial_params<T: Scalar>(n_visible: usize, n_hidden: usize, seed: u64) -> RbmParams<T> {
    let mut rng = stream_rng(seed, u64::from(u32::MAX));
    let spread = 0.1 / (n_visible as f64).sqrt();
    let w = (0..n_visible * n_hidden)
        .map(|_| T::of(rng.gen_range(-spread..spread)))
        .collect();
    RbmParams::from_parts(
        n_visible,
        n_hidden,
        w,
        vec![T::zero(); n_visible],
        vec![T::zero(); n_hidden],
    )
    .expect("valid initial parameters")
}

/// Fraction of rows whose free-energy classification matches the class bit.
pub fn classification_accuracy<T: Scalar>(
    params: &RbmParams<T>,
    rows: &[BitVector],
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("accuracy rows"));
    }
    let class = params.n_visible() - 1;
    let mut correct = 0usize;
    for row in rows {
        let pred = params.classify(&strip_class(row))?;
        if pred.class_bit == row.get(class) {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Minibatch SGD over the configured number of epochs.
pub fn train<T: Scalar>(
    initial: RbmParams<T>,
    train_rows: &[BitVector],
    test_rows: &[BitVector],
    config: &TrainConfig,
) -> Result<(RbmParams<T>, Vec<EpochMetrics>)> {
    train_with_callback(initial, train_rows, test_rows, config, |_, _, _| {})
}

/// [`train`] with a per-epoch callback (used for checkpointing).
pub fn train_with_callback<T: Scalar, F>(
    initial: RbmParams<T>,
    train_rows: &[BitVector],
    test_rows: &[BitVector],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<(RbmParams<T>, Vec<EpochMetrics>)>
where
    F: FnMut(usize, &RbmParams<T>, &EpochMetrics),
{
    config.validate()?;
    check_rows(&initial, train_rows)?;
    check_rows(&initial, test_rows)?;
    let mut params = initial;
    let mut metrics = Vec::with_capacity(config.n_epochs);
    let lr = T::of(config.learning_rate);
    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    let mut global_step = 0usize;
    // Temperature correction state: estimation failures keep the value in
    // force (initially the prior guess).
    let mut beta_state = match config.beta_correction {
        BetaCorrection::Off => None,
        BetaCorrection::AtStart { beta_0, n_samples } => {
            let sampler = crate::samplers::sampler_from_config::<T>(&config.sampler)?;
            let estimate_seed = mix(config.rng_seed, 0xBE7A);
            let beta = estimate_beta_or(
                &params,
                sampler.as_ref(),
                beta_0,
                n_samples,
                estimate_seed,
                beta_0,
            );
            Some(beta)
        }
        BetaCorrection::EveryStep { beta_0, .. } => Some(beta_0),
    };
    for epoch in 0..config.n_epochs {
        let started = std::time::Instant::now();
        let mut shuffle_rng = stream_rng(config.rng_seed, mix(0x45504F43, epoch as u64));
        order.shuffle(&mut shuffle_rng);
        let algorithm = effective_algorithm(config, epoch);
        for batch_indices in order.chunks(config.batch_size) {
            let batch: Vec<BitVector> =
                batch_indices.iter().map(|&i| train_rows[i].clone()).collect();
            let seed = step_seed(config.rng_seed, epoch, global_step);
            let uses_sampler =
                matches!(algorithm, Algorithm::SamplerGenerative | Algorithm::Hybrid);
            if uses_sampler {
                if let BetaCorrection::EveryStep { beta_0, n_samples } = config.beta_correction {
                    let sampler = crate::samplers::sampler_from_config::<T>(&config.sampler)?;
                    let prev = beta_state.unwrap_or(beta_0);
                    beta_state = Some(estimate_beta_or(
                        &params,
                        sampler.as_ref(),
                        prev,
                        n_samples,
                        mix(seed, 0xBE7A),
                        prev,
                    ));
                }
            }
            let beta_eff = beta_state.unwrap_or(1.0);
            let grad = match algorithm {
                Algorithm::Cd => cd_gradient(&params, &batch, config.cd_k, seed)?,
                Algorithm::SamplerGenerative => {
                    let mut sampler = config.sampler.clone();
                    sampler.rng_seed = seed;
                    generative_gradient_corrected(&params, &batch, &sampler, beta_eff)?
                }
                Algorithm::Discriminative => discriminative_gradient(&params, &batch)?,
                Algorithm::Hybrid => {
                    let mut sampler = config.sampler.clone();
                    sampler.rng_seed = seed;
                    hybrid_gradient_corrected(&params, &batch, &sampler, config.lambda, beta_eff)?
                }
                Algorithm::AnnealedHybrid => unreachable!("resolved by effective_algorithm"),
            };
            apply_update(&mut params, &grad, lr, config);
            global_step += 1;
        }
        let entry = EpochMetrics {
            epoch,
            algorithm: algorithm.name().to_string(),
            train_accuracy: classification_accuracy(&params, train_rows)?,
            test_accuracy: classification_accuracy(&params, test_rows)?,
            mean_abs_coupling: params.mean_abs_coupling(),
            median_quadratic_coupling: params.median_abs_coupling(),
            beta_eff: beta_state,
            wall_time: started.elapsed().as_secs_f64(),
        };
        on_epoch(epoch, &params, &entry);
        metrics.push(entry);
    }
    Ok((params, metrics))
}

/// Run the estimator, falling back to `fallback` when it reports failure.
fn estimate_beta_or<T: Scalar>(
    params: &RbmParams<T>,
    sampler: &dyn crate::samplers::Sampler<T>,
    beta_0: f64,
    n_samples: usize,
    seed: u64,
    fallback: f64,
) -> f64 {
    crate::thermometry::estimate_beta(params, sampler, beta_0, n_samples, seed)
        .map(|est| if est.beta_eff.is_finite() && est.beta_eff > 0.0 { est.beta_eff } else { fallback })
        .unwrap_or(fallback)
}

fn effective_algorithm(config: &TrainConfig, epoch: usize) -> Algorithm {
    match config.algorithm {
        Algorithm::AnnealedHybrid => {
            if epoch < config.switch_epoch {
                Algorithm::SamplerGenerative
            } else {
                Algorithm::Discriminative
            }
        }
        other => other,
    }
}

fn apply_update<T: Scalar>(
    params: &mut RbmParams<T>,
    grad: &GradientEstimate<T>,
    lr: T,
    config: &TrainConfig,
) {
    let l2 = T::of(config.l2);
    for (i, w) in params.weights_mut().iter_mut().enumerate() {
        let penalty = if config.l2 > 0.0 { l2 * *w } else { T::zero() };
        *w = *w - lr * (grad.dw[i] + penalty);
    }
    for (i, b) in params.visible_bias_mut().iter_mut().enumerate() {
        *b = *b - lr * grad.db[i];
    }
    for (j, c) in params.hidden_bias_mut().iter_mut().enumerate() {
        *c = *c - lr * grad.dc[j];
    }
    if let Some(clip) = config.weight_clip {
        let lo = T::of(-clip);
        let hi = T::of(clip);
        let (w, b, c) = params.parts_mut();
        for x in w.iter_mut().chain(b.iter_mut()).chain(c.iter_mut()) {
            *x = (*x).max(lo).min(hi);
        }
    }
}

/// Metrics CSV columns (wall time deliberately excluded so bytes are
/// deterministic in the seed).
pub const METRICS_HEADER: &str =
    "epoch,algorithm,train_accuracy,test_accuracy,mean_abs_coupling,median_quadratic_coupling";

pub fn write_metrics_csv<W: Write>(out: &mut W, metrics: &[EpochMetrics]) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            m.epoch,
            m.algorithm,
            m.train_accuracy,
            m.test_accuracy,
            m.mean_abs_coupling,
            m.median_quadratic_coupling
        )?;
    }
    Ok(())
}

pub fn read_metrics_csv<R: BufRead>(input: &mut R) -> Result<Vec<EpochMetrics>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty metrics file".into()))??;
    if header.trim() != METRICS_HEADER {
        return Err(Error::Parse(format!("unexpected metrics header {header:?}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!("bad metrics row {line:?}")));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {s:?} in metrics row")))
        };
        out.push(EpochMetrics {
            epoch: fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad epoch {:?}", fields[0])))?,
            algorithm: fields[1].to_string(),
            train_accuracy: parse_f(fields[2])?,
            test_accuracy: parse_f(fields[3])?,
            mean_abs_coupling: parse_f(fields[4])?,
            median_quadratic_coupling: parse_f(fields[5])?,
            beta_eff: None,
            wall_time: 0.0,
        });
    }
    Ok(out)
}
