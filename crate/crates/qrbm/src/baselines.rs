//! Classical comparison algorithms over the same binary feature rows:
//! logistic regression and gradient boosted decision trees.

use rand::seq::SliceRandom;

use crate::datapipe::LabeledBits;
use crate::rng::{mix, stream_rng};
use crate::scalar::{logistic, Scalar};
use crate::training::EpochMetrics;
use crate::{Error, Result};

/// Anything that scores a bit row; class 1 iff the score is positive.
pub trait ScoreModel<T: Scalar> {
    fn score(&self, bits: &[u8]) -> T;

    fn predict(&self, bits: &[u8]) -> u8 {
        u8::from(self.score(bits) > T::zero())
    }
}

/// Linear logistic classifier over feature bits.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRegModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> ScoreModel<T> for LogRegModel<T> {
    fn score(&self, bits: &[u8]) -> T {
        debug_assert_eq!(bits.len(), self.weights.len());
        let mut z = self.bias;
        for (w, &b) in self.weights.iter().zip(bits) {
            if b == 1 {
                z = z + *w;
            }
        }
        z
    }
}

#[derive(Clone, Debug)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub rng_seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, batch_size: 128, n_epochs: 100, rng_seed: 0 }
    }
}

/// Minibatch SGD on the logistic loss, recording train/test accuracy per
/// epoch in the shared metrics shape.
pub fn logreg_train<T: Scalar>(
    train: &[LabeledBits],
    test: &[LabeledBits],
    config: &LogRegConfig,
) -> Result<(LogRegModel<T>, Vec<EpochMetrics>)> {
    let n_features = check_rows(train)?;
    check_rows(test)?;
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    let mut model =
        LogRegModel { weights: vec![T::zero(); n_features], bias: T::zero() };
    let lr = T::of(config.learning_rate);
    let mut metrics = Vec::with_capacity(config.n_epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.n_epochs {
        let started = std::time::Instant::now();
        order.shuffle(&mut stream_rng(config.rng_seed, mix(0x4C52, epoch as u64)));
        for batch in order.chunks(config.batch_size) {
            let mut grad_w = vec![T::zero(); n_features];
            let mut grad_b = T::zero();
            for &idx in batch {
                let row = &train[idx];
                let err = logistic(model.score(row.bits.as_slice()))
                    - T::of(row.class as f64);
                grad_b = grad_b + err;
                for (g, &bit) in grad_w.iter_mut().zip(row.bits.as_slice()) {
                    if bit == 1 {
                        *g = *g + err;
                    }
                }
            }
            let scale = lr / T::of(batch.len() as f64);
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w = *w - scale * *g;
            }
            model.bias = model.bias - scale * grad_b;
        }
        metrics.push(EpochMetrics {
            epoch,
            algorithm: "logreg".into(),
            train_accuracy: evaluate(&model, train)?,
            test_accuracy: evaluate(&model, test)?,
            mean_abs_coupling: 0.0,
            median_quadratic_coupling: 0.0,
            beta_eff: None,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, metrics))
}

/// One node of a depth-limited regression tree over binary features: a
/// split holds only the feature index (bit 0 goes left, bit 1 right).
#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode<T> {
    Leaf { value: T },
    Split { feature: usize, left: Box<TreeNode<T>>, right: Box<TreeNode<T>> },
}

impl<T: Scalar> TreeNode<T> {
    pub fn output(&self, bits: &[u8]) -> T {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split { feature, left, right } => {
                if bits[*feature] == 1 {
                    right.output(bits)
                } else {
                    left.output(bits)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Boosted ensemble: `score(x) = initial_score + lr * sum_t tree_t(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GbtModel<T> {
    pub trees: Vec<TreeNode<T>>,
    pub learning_rate: T,
    /// Log-odds of the training base rate.
    pub initial_score: T,
}

impl<T: Scalar> ScoreModel<T> for GbtModel<T> {
    fn score(&self, bits: &[u8]) -> T {
        let mut s = self.initial_score;
        for tree in &self.trees {
            s = s + self.learning_rate * tree.output(bits);
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: 3, learning_rate: 0.1 }
    }
}

/// Gradient boosting with logistic loss: each tree fits the residuals
/// `y - p` by greedy variance-reduction splits, leaves take a Newton step.
/// Accuracy is recorded after every tree ("epoch" = tree count).
pub fn gbt_train<T: Scalar>(
    train: &[LabeledBits],
    test: &[LabeledBits],
    config: &GbtConfig,
) -> Result<(GbtModel<T>, Vec<EpochMetrics>)> {
    let n_features = check_rows(train)?;
    check_rows(test)?;
    let n = train.len() as f64;
    let positives = train.iter().filter(|r| r.class == 1).count() as f64;
    let base_rate = (positives / n).clamp(1e-6, 1.0 - 1e-6);
    let initial_score = T::of((base_rate / (1.0 - base_rate)).ln());
    let mut model = GbtModel {
        trees: Vec::with_capacity(config.n_trees),
        learning_rate: T::of(config.learning_rate),
        initial_score,
    };
    let mut scores: Vec<T> = vec![initial_score; train.len()];
    let mut metrics = Vec::with_capacity(config.n_trees);
    for round in 0..config.n_trees {
        let started = std::time::Instant::now();
        let mut residuals = Vec::with_capacity(train.len());
        let mut hessians = Vec::with_capacity(train.len());
        for (row, &score) in train.iter().zip(&scores) {
            let p = logistic(score);
            residuals.push(T::of(row.class as f64) - p);
            hessians.push(p * (T::one() - p));
        }
        let indices: Vec<usize> = (0..train.len()).collect();
        let tree =
            build_tree(train, &residuals, &hessians, &indices, n_features, config.max_depth);
        for (idx, score) in scores.iter_mut().enumerate() {
            *score = *score + model.learning_rate * tree.output(train[idx].bits.as_slice());
        }
        model.trees.push(tree);
        // Epoch t corresponds to t+1 trees, keeping the axis joinable with
        // the other per-epoch metrics.
        metrics.push(EpochMetrics {
            epoch: round,
            algorithm: "gbt".into(),
            train_accuracy: evaluate(&model, train)?,
            test_accuracy: evaluate(&model, test)?,
            mean_abs_coupling: 0.0,
            median_quadratic_coupling: 0.0,
            beta_eff: None,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, metrics))
}

fn build_tree<T: Scalar>(
    rows: &[LabeledBits],
    residuals: &[T],
    hessians: &[T],
    indices: &[usize],
    n_features: usize,
    depth_left: usize,
) -> TreeNode<T> {
    if depth_left == 0 || indices.len() < 2 {
        return newton_leaf(residuals, hessians, indices);
    }
    // Greedy variance reduction: minimize the summed SSE of the two sides.
    let total_sum: T = indices.iter().map(|&i| residuals[i]).sum();
    let total_sq: T = indices.iter().map(|&i| residuals[i] * residuals[i]).sum();
    let parent_sse = total_sq - total_sum * total_sum / T::of(indices.len() as f64);
    let mut best: Option<(usize, T)> = None;
    for feature in 0..n_features {
        let mut right_sum = T::zero();
        let mut right_sq = T::zero();
        let mut right_n = 0usize;
        for &i in indices {
            if rows[i].bits.get(feature) == 1 {
                right_sum = right_sum + residuals[i];
                right_sq = right_sq + residuals[i] * residuals[i];
                right_n += 1;
            }
        }
        let left_n = indices.len() - right_n;
        if right_n == 0 || left_n == 0 {
            continue;
        }
        let left_sum = total_sum - right_sum;
        let left_sq = total_sq - right_sq;
        let sse = (left_sq - left_sum * left_sum / T::of(left_n as f64))
            + (right_sq - right_sum * right_sum / T::of(right_n as f64));
        let gain = parent_sse - sse;
        if gain > T::of(1e-12) && best.map_or(true, |(_, g)| gain > g) {
            best = Some((feature, gain));
        }
    }
    let Some((feature, _)) = best else {
        return newton_leaf(residuals, hessians, indices);
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.iter().partition(|&&i| rows[i].bits.get(feature) == 0);
    TreeNode::Split {
        feature,
        left: Box::new(build_tree(rows, residuals, hessians, &left_idx, n_features, depth_left - 1)),
        right: Box::new(build_tree(
            rows,
            residuals,
            hessians,
            &right_idx,
            n_features,
            depth_left - 1,
        )),
    }
}

fn newton_leaf<T: Scalar>(residuals: &[T], hessians: &[T], indices: &[usize]) -> TreeNode<T> {
    let num: T = indices.iter().map(|&i| residuals[i]).sum();
    let den: T = indices.iter().map(|&i| hessians[i]).sum();
    TreeNode::Leaf { value: num / (den + T::of(1e-16)) }
}

/// Fraction of rows whose thresholded score matches the label.
pub fn evaluate<T: Scalar, M: ScoreModel<T>>(model: &M, rows: &[LabeledBits]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("evaluation rows"));
    }
    let correct = rows
        .iter()
        .filter(|row| model.predict(row.bits.as_slice()) == row.class)
        .count();
    Ok(correct as f64 / rows.len() as f64)
}

fn check_rows(rows: &[LabeledBits]) -> Result<usize> {
    let first = rows.first().ok_or(Error::EmptyInput("labeled rows"))?;
    let n_features = first.bits.len();
    if rows.iter().any(|r| r.bits.len() != n_features) {
        return Err(Error::DimensionMismatch("ragged feature rows".into()));
    }
    Ok(n_features)
}
