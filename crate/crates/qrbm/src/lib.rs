//! Restricted Boltzmann machine training against pluggable Boltzmann samplers.
//!
//! The crate covers the full experiment loop for binary-image classification
//! with an RBM whose last visible unit carries the class label:
//!
//! - [`rbm`]: energies, free energies, conditionals, exact enumeration and
//!   free-energy classification,
//! - [`samplers`]: block Gibbs chains, data-seeded CD chains, simulated
//!   annealing and exact Boltzmann sampling behind one [`samplers::Sampler`]
//!   contract,
//! - [`chimera`]: a software stand-in for a Chimera-topology annealer with
//!   minor embedding of the RBM's complete bipartite graph,
//! - [`training`]: generative, discriminative, hybrid and annealed-hybrid
//!   gradients plus the SGD loop,
//! - [`thermometry`]: effective-temperature estimation and
//!   Kolmogorov-Smirnov consistency diagnostics for sampler output,
//! - [`datapipe`]: PCA compression to quantized bit rows, synthetic
//!   galaxy-like image generation and graymap ingestion,
//! - [`baselines`]: logistic regression and gradient boosted trees over the
//!   same bit rows.
//!
//! All numeric code is generic over the [`Scalar`] floating type; `f64` is
//! the type every concrete alias at the crate root uses.

pub mod baselines;
pub mod bits;
pub mod chimera;
pub mod datapipe;
pub mod rbm;
pub mod samplers;
pub mod scalar;
pub mod thermometry;
pub mod training;

pub use bits::BitVector;
pub use scalar::Scalar;

use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("enumeration budget exceeded: {units} units > {budget} (exact ops refuse instead of approximating)")]
    BudgetExceeded { units: usize, budget: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("embedding error: {0}")]
    Embedding(String),
    #[error("temperature estimation failed: {0}")]
    TempEstimation(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Total visible + hidden units beyond which exact enumeration refuses.
pub const ENUM_BUDGET: usize = 26;

/// Concrete aliases for the common scalar choices.
pub type Rbm64 = rbm::RbmParams<f64>;
pub type Rbm32 = rbm::RbmParams<f32>;
pub type SampleSet64 = samplers::SampleSet<f64>;
pub type SampleSet32 = samplers::SampleSet<f32>;
pub type Gradient64 = training::GradientEstimate<f64>;
pub type Gradient32 = training::GradientEstimate<f32>;
pub type Prediction64 = rbm::Prediction<f64>;
pub type Prediction32 = rbm::Prediction<f32>;

pub mod rng {
    //! Deterministic stream derivation: every chain, epoch and sampler call
    //! gets its own counter-based generator derived from (seed, stream id),
    //! so parallel or reordered execution cannot change results.

    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// splitmix64 step, used to decorrelate stream ids.
    pub fn mix(a: u64, b: u64) -> u64 {
        let mut z = a ^ b.rotate_left(31).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Generator for stream `stream` of the master `seed`.
    pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}
