//! RBM parameterization, energies, free energies, conditionals, exact
//! enumeration and free-energy classification.
//!
//! Parameters are stored in the canonical form
//! `p(v,h) ∝ exp(v'Wh + b'v + c'h)`, i.e. the joint energy is
//! `E(v,h) = -v'Wh - b'v - c'h` and `p ∝ exp(-E)`. All probability
//! arithmetic runs in log space.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::bits::BitVector;
use crate::scalar::{log_sum_exp, logistic, softplus, Scalar};
use crate::{Error, Result, ENUM_BUDGET};

/// Weights and biases of one restricted Boltzmann machine.
///
/// `w` is row-major `n_visible x n_hidden`: `w[i * n_hidden + j]` couples
/// visible unit `i` to hidden unit `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct RbmParams<T> {
    n_visible: usize,
    n_hidden: usize,
    w: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
}

/// Free-energy classification outcome for one image.
#[derive(Clone, Debug)]
pub struct Prediction<T> {
    /// Predicted class; ties in free energy resolve to 0.
    pub class_bit: u8,
    pub free_energy_0: T,
    pub free_energy_1: T,
    /// Exact `p(class=1 | image)`, equal to `logistic(F0 - F1)`.
    pub posterior_1: T,
}

impl<T: Scalar> RbmParams<T> {
    /// All-zero parameters.
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Result<Self> {
        Self::from_parts(
            n_visible,
            n_hidden,
            vec![T::zero(); n_visible * n_hidden],
            vec![T::zero(); n_visible],
            vec![T::zero(); n_hidden],
        )
    }

    /// Build from a row-major weight matrix and bias vectors.
    ///
    /// Every entry must be finite. Classification additionally needs
    /// `n_visible >= 2` (image bits plus the class bit); that is checked by
    /// [`RbmParams::classify`] so that single-unit models remain usable in
    /// tests and exact oracles.
    pub fn from_parts(
        n_visible: usize,
        n_hidden: usize,
        w: Vec<T>,
        b: Vec<T>,
        c: Vec<T>,
    ) -> Result<Self> {
        if n_visible == 0 || n_hidden == 0 {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        if w.len() != n_visible * n_hidden || b.len() != n_visible || c.len() != n_hidden {
            return Err(Error::DimensionMismatch(format!(
                "expected W {}x{}, b {}, c {}; got W len {}, b len {}, c len {}",
                n_visible,
                n_hidden,
                n_visible,
                n_hidden,
                w.len(),
                b.len(),
                c.len()
            )));
        }
        if w.iter().chain(b.iter()).chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        Ok(Self { n_visible, n_hidden, w, b, c })
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.w[i * self.n_hidden + j]
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn visible_bias(&self) -> &[T] {
        &self.b
    }

    pub fn hidden_bias(&self) -> &[T] {
        &self.c
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.w
    }

    pub fn visible_bias_mut(&mut self) -> &mut [T] {
        &mut self.b
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [T] {
        &mut self.c
    }

    /// Simultaneous mutable access to (W, b, c).
    pub fn parts_mut(&mut self) -> (&mut [T], &mut [T], &mut [T]) {
        (&mut self.w, &mut self.b, &mut self.c)
    }

    /// All parameters multiplied by `factor` (used to program a sampler at
    /// scaled couplings, e.g. `A / beta_0` in temperature estimation).
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n_visible: self.n_visible,
            n_hidden: self.n_hidden,
            w: self.w.iter().map(|&x| x * factor).collect(),
            b: self.b.iter().map(|&x| x * factor).collect(),
            c: self.c.iter().map(|&x| x * factor).collect(),
        }
    }

    /// Mean of |W_ij| over the coupling matrix.
    pub fn mean_abs_coupling(&self) -> f64 {
        if self.w.is_empty() {
            return 0.0;
        }
        self.w.iter().map(|x| x.f64().abs()).sum::<f64>() / self.w.len() as f64
    }

    /// Largest |W_ij|.
    pub fn max_abs_coupling(&self) -> f64 {
        self.w.iter().map(|x| x.f64().abs()).fold(0.0, f64::max)
    }

    /// Median of |W_ij| (the quadratic couplings of the energy).
    pub fn median_abs_coupling(&self) -> f64 {
        if self.w.is_empty() {
            return 0.0;
        }
        let mut mags: Vec<f64> = self.w.iter().map(|x| x.f64().abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = mags.len();
        if n % 2 == 1 {
            mags[n / 2]
        } else {
            0.5 * (mags[n / 2 - 1] + mags[n / 2])
        }
    }

    fn check_visible(&self, v: &BitVector) -> Result<()> {
        if v.len() != self.n_visible {
            return Err(Error::DimensionMismatch(format!(
                "visible vector has {} bits, model expects {}",
                v.len(),
                self.n_visible
            )));
        }
        Ok(())
    }

    fn check_hidden(&self, h: &BitVector) -> Result<()> {
        if h.len() != self.n_hidden {
            return Err(Error::DimensionMismatch(format!(
                "hidden vector has {} bits, model expects {}",
                h.len(),
                self.n_hidden
            )));
        }
        Ok(())
    }

    /// Joint energy `E(v,h) = -v'Wh - b'v - c'h`.
    pub fn energy(&self, v: &BitVector, h: &BitVector) -> Result<T> {
        self.check_visible(v)?;
        self.check_hidden(h)?;
        let mut acc = T::zero();
        for i in 0..self.n_visible {
            if v.get(i) == 1 {
                acc = acc + self.b[i];
                let row = &self.w[i * self.n_hidden..(i + 1) * self.n_hidden];
                for j in 0..self.n_hidden {
                    if h.get(j) == 1 {
                        acc = acc + row[j];
                    }
                }
            }
        }
        for j in 0..self.n_hidden {
            if h.get(j) == 1 {
                acc = acc + self.c[j];
            }
        }
        Ok(-acc)
    }

    /// Hidden pre-activations `c_j + sum_i v_i W_ij`.
    pub fn hidden_activation(&self, v: &BitVector) -> Vec<T> {
        let mut act = self.c.clone();
        for i in 0..self.n_visible {
            if v.get(i) == 1 {
                let row = &self.w[i * self.n_hidden..(i + 1) * self.n_hidden];
                for j in 0..self.n_hidden {
                    act[j] = act[j] + row[j];
                }
            }
        }
        act
    }

    /// Visible pre-activations `b_i + sum_j W_ij h_j`.
    pub fn visible_activation(&self, h: &BitVector) -> Vec<T> {
        let mut act = self.b.clone();
        for j in 0..self.n_hidden {
            if h.get(j) == 1 {
                for i in 0..self.n_visible {
                    act[i] = act[i] + self.w[i * self.n_hidden + j];
                }
            }
        }
        act
    }

    /// Free energy `F(v) = -b'v - sum_j softplus(c_j + (v'W)_j)`, so that
    /// `exp(-F(v)) = sum_h exp(-E(v,h))`.
    pub fn free_energy(&self, v: &BitVector) -> Result<T> {
        self.check_visible(v)?;
        let mut lin = T::zero();
        for i in 0..self.n_visible {
            if v.get(i) == 1 {
                lin = lin + self.b[i];
            }
        }
        let hidden: T = self.hidden_activation(v).into_iter().map(softplus).sum();
        Ok(-(lin + hidden))
    }

    /// Hidden-side counterpart: `exp(-G(h)) = sum_v exp(-E(v,h))`.
    pub fn hidden_free_energy(&self, h: &BitVector) -> Result<T> {
        self.check_hidden(h)?;
        let mut lin = T::zero();
        for j in 0..self.n_hidden {
            if h.get(j) == 1 {
                lin = lin + self.c[j];
            }
        }
        let visible: T = self.visible_activation(h).into_iter().map(softplus).sum();
        Ok(-(lin + visible))
    }

    /// `p(h_j = 1 | v)` for every hidden unit.
    pub fn cond_hidden(&self, v: &BitVector) -> Result<Vec<T>> {
        self.check_visible(v)?;
        Ok(self.hidden_activation(v).into_iter().map(logistic).collect())
    }

    /// `p(v_i = 1 | h)` for every visible unit.
    pub fn cond_visible(&self, h: &BitVector) -> Result<Vec<T>> {
        self.check_hidden(h)?;
        Ok(self.visible_activation(h).into_iter().map(logistic).collect())
    }

    fn check_budget(&self) -> Result<()> {
        let units = self.n_visible + self.n_hidden;
        if units > ENUM_BUDGET {
            return Err(Error::BudgetExceeded { units, budget: ENUM_BUDGET });
        }
        Ok(())
    }

    /// `log Z = log sum_{v,h} exp(-E(v,h))`, by enumerating the smaller
    /// layer and marginalizing the other analytically. Refuses beyond
    /// [`ENUM_BUDGET`] total units.
    pub fn log_partition(&self) -> Result<T> {
        self.check_budget()?;
        let logs = self.layer_log_weights()?;
        Ok(log_sum_exp(&logs))
    }

    /// Log weights `-F(v)` (or `-G(h)` if the hidden layer is smaller) for
    /// every state of the enumerated layer, in [`BitVector::from_index`]
    /// order. Shared by the partition function and exact sampling.
    pub(crate) fn layer_log_weights(&self) -> Result<Vec<T>> {
        self.check_budget()?;
        let enumerate_visible = self.n_visible <= self.n_hidden;
        let len = if enumerate_visible { self.n_visible } else { self.n_hidden };
        let mut logs = Vec::with_capacity(1 << len);
        for idx in 0..(1usize << len) {
            let state = BitVector::from_index(idx, len);
            let f = if enumerate_visible {
                self.free_energy(&state)?
            } else {
                self.hidden_free_energy(&state)?
            };
            logs.push(-f);
        }
        Ok(logs)
    }

    pub(crate) fn enumerates_visible_layer(&self) -> bool {
        self.n_visible <= self.n_hidden
    }

    /// Classify an image by comparing the free energies of the two
    /// class-bit completions. The class bit is the last visible unit.
    pub fn classify(&self, image_bits: &BitVector) -> Result<Prediction<T>> {
        if self.n_visible < 2 {
            return Err(Error::InvalidConfig(
                "classification needs at least one image bit plus the class bit".into(),
            ));
        }
        if image_bits.len() != self.n_visible - 1 {
            return Err(Error::DimensionMismatch(format!(
                "image has {} bits, model expects {} image bits plus a class bit",
                image_bits.len(),
                self.n_visible - 1
            )));
        }
        let f0 = self.free_energy(&image_bits.with_appended(0))?;
        let f1 = self.free_energy(&image_bits.with_appended(1))?;
        let posterior_1 = logistic(f0 - f1);
        Ok(Prediction {
            class_bit: if f0 <= f1 { 0 } else { 1 },
            free_energy_0: f0,
            free_energy_1: f1,
            posterior_1,
        })
    }
}

/// Magic line of the parameter file format.
const PARAMS_MAGIC: &str = "RBM1";

impl<T: Scalar> RbmParams<T> {
    /// Write in the stable `RBM1` text format:
    ///
    /// ```text
    /// RBM1
    /// <n_visible> <n_hidden>
    /// <n_visible lines: row i of W, n_hidden space-separated values>
    /// <b: n_visible values>
    /// <c: n_hidden values>
    /// ```
    ///
    /// Values are decimal with round-trip precision.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{PARAMS_MAGIC}")?;
        writeln!(out, "{} {}", self.n_visible, self.n_hidden)?;
        for i in 0..self.n_visible {
            let row: Vec<String> = (0..self.n_hidden)
                .map(|j| format_scalar(self.weight(i, j)))
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        writeln!(out, "{}", self.b.iter().map(|&x| format_scalar(x)).collect::<Vec<_>>().join(" "))?;
        writeln!(out, "{}", self.c.iter().map(|&x| format_scalar(x)).collect::<Vec<_>>().join(" "))?;
        Ok(())
    }

    /// Read the `RBM1` format written by [`RbmParams::write_to`].
    pub fn read_from<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut lines = input.lines();
        let magic = next_line(&mut lines)?;
        if magic.trim() != PARAMS_MAGIC {
            return Err(Error::Parse(format!("bad magic {magic:?}, expected {PARAMS_MAGIC:?}")));
        }
        let header = next_line(&mut lines)?;
        let mut dims = header.split_whitespace();
        let n_visible: usize = parse_field(dims.next(), "n_visible")?;
        let n_hidden: usize = parse_field(dims.next(), "n_hidden")?;
        let mut w = Vec::with_capacity(n_visible * n_hidden);
        for i in 0..n_visible {
            let line = next_line(&mut lines)?;
            let row = parse_scalar_line::<T>(&line, n_hidden, &format!("W row {i}"))?;
            w.extend(row);
        }
        let b = parse_scalar_line::<T>(&next_line(&mut lines)?, n_visible, "b")?;
        let c = parse_scalar_line::<T>(&next_line(&mut lines)?, n_hidden, "c")?;
        Self::from_parts(n_visible, n_hidden, w, b, c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}

fn format_scalar<T: Scalar>(x: T) -> String {
    // f64 text round-trips exactly; f32 values survive the f64 detour.
    format!("{}", x.f64())
}

fn next_line<R: BufRead>(lines: &mut std::io::Lines<R>) -> Result<String> {
    lines
        .next()
        .ok_or_else(|| Error::Parse("unexpected end of file".into()))?
        .map_err(Error::from)
}

fn parse_field<F: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<F> {
    field
        .ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("unparsable {what}")))
}

fn parse_scalar_line<T: Scalar>(line: &str, expect: usize, what: &str) -> Result<Vec<T>> {
    let vals: Vec<T> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map(T::of)
                .map_err(|_| Error::Parse(format!("bad number {tok:?} in {what}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expect {
        return Err(Error::Parse(format!(
            "{what}: expected {expect} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent brute-force oracle: joint Boltzmann table from raw
    /// energies, unnormalized.
    fn joint_weights(p: &RbmParams<f64>) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for vi in 0..(1usize << p.n_visible()) {
            let v = BitVector::from_index(vi, p.n_visible());
            for hi in 0..(1usize << p.n_hidden()) {
                let h = BitVector::from_index(hi, p.n_hidden());
                let e = p.energy(&v, &h).unwrap();
                out.push(((vi, hi), (-e).exp()));
            }
        }
        out
    }

    fn random_params(n_v: usize, n_h: usize, seed: u64, scale: f64) -> RbmParams<f64> {
        let mut rng = crate::rng::stream_rng(seed, 0);
        let w = (0..n_v * n_h).map(|_| rng.gen_range(-scale..scale)).collect();
        let b = (0..n_v).map(|_| rng.gen_range(-scale..scale)).collect();
        let c = (0..n_h).map(|_| rng.gen_range(-scale..scale)).collect();
        RbmParams::from_parts(n_v, n_h, w, b, c).unwrap()
    }

    #[test]
    fn energy_zero_params_is_zero() {
        let p = RbmParams::<f64>::zeros(3, 2).unwrap();
        let v = BitVector::from_bits(&[1, 0, 1]).unwrap();
        let h = BitVector::from_bits(&[1, 1]).unwrap();
        assert_eq!(p.energy(&v, &h).unwrap(), 0.0);
    }

    #[test]
    fn energy_hand_expansion_1x1() {
        let p = RbmParams::from_parts(1, 1, vec![2.0], vec![1.0], vec![-1.0]).unwrap();
        let v = BitVector::from_bits(&[1]).unwrap();
        let h = BitVector::from_bits(&[1]).unwrap();
        assert_eq!(p.energy(&v, &h).unwrap(), -2.0);
    }

    #[test]
    fn energy_rejects_dimension_mismatch() {
        let p = RbmParams::<f64>::zeros(3, 2).unwrap();
        let v = BitVector::zeros(2);
        let h = BitVector::zeros(2);
        assert!(matches!(p.energy(&v, &h), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn partition_matches_brute_force_sum() {
        let p = random_params(3, 2, 11, 1.0);
        let direct: f64 = joint_weights(&p).iter().map(|(_, w)| w).sum();
        let log_z = p.log_partition().unwrap();
        assert!((log_z.exp() - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn free_energy_zero_params() {
        let p = RbmParams::<f64>::zeros(4, 3).unwrap();
        let v = BitVector::from_index(5, 4);
        let expect = -3.0 * 2.0f64.ln();
        assert!((p.free_energy(&v).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn free_energy_single_softplus_case() {
        let p = RbmParams::from_parts(2, 1, vec![1.0, -1.0], vec![0.0, 0.0], vec![0.0]).unwrap();
        let v = BitVector::from_bits(&[1, 0]).unwrap();
        let expect = -(1.0 + 1.0f64.exp()).ln();
        assert!((p.free_energy(&v).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn free_energy_matches_hidden_enumeration() {
        let p = random_params(4, 3, 17, 1.2);
        let v = BitVector::from_index(9, 4);
        let mut terms = Vec::new();
        for hi in 0..8 {
            let h = BitVector::from_index(hi, 3);
            terms.push(-p.energy(&v, &h).unwrap());
        }
        let expect = -log_sum_exp(&terms);
        assert!((p.free_energy(&v).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn hidden_free_energy_matches_visible_enumeration() {
        let p = random_params(3, 4, 23, 1.2);
        let h = BitVector::from_index(11, 4);
        let mut terms = Vec::new();
        for vi in 0..8 {
            let v = BitVector::from_index(vi, 3);
            terms.push(-p.energy(&v, &h).unwrap());
        }
        let expect = -log_sum_exp(&terms);
        assert!((p.hidden_free_energy(&h).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn cond_hidden_zero_params_is_half() {
        let p = RbmParams::<f64>::zeros(3, 4).unwrap();
        let probs = p.cond_hidden(&BitVector::zeros(3)).unwrap();
        assert!(probs.iter().all(|&q| (q - 0.5).abs() < 1e-15));
    }

    #[test]
    fn cond_hidden_saturates_with_large_bias() {
        let p = RbmParams::<f64>::from_parts(2, 1, vec![0.0, 0.0], vec![0.0, 0.0], vec![20.0]).unwrap();
        let probs = p.cond_hidden(&BitVector::zeros(2)).unwrap();
        assert!((probs[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cond_visible_saturates_low() {
        let p = RbmParams::<f64>::from_parts(1, 2, vec![0.0, 0.0], vec![-20.0], vec![0.0, 0.0]).unwrap();
        let probs = p.cond_visible(&BitVector::zeros(2)).unwrap();
        assert!(probs[0] < 1e-8);
    }

    #[test]
    fn conditionals_match_enumeration() {
        let p = random_params(3, 3, 31, 1.5);
        // p(h_j=1|v) by brute force over h.
        let v = BitVector::from_index(5, 3);
        let mut num = vec![0.0; 3];
        let mut den = 0.0;
        for hi in 0..8 {
            let h = BitVector::from_index(hi, 3);
            let w = (-p.energy(&v, &h).unwrap()).exp();
            den += w;
            for j in 0..3 {
                if h.get(j) == 1 {
                    num[j] += w;
                }
            }
        }
        let probs = p.cond_hidden(&v).unwrap();
        for j in 0..3 {
            assert!((probs[j] - num[j] / den).abs() < 1e-10);
        }
        // p(v_i=1|h) by brute force over v.
        let h = BitVector::from_index(6, 3);
        let mut num = vec![0.0; 3];
        let mut den = 0.0;
        for vi in 0..8 {
            let v = BitVector::from_index(vi, 3);
            let w = (-p.energy(&v, &h).unwrap()).exp();
            den += w;
            for i in 0..3 {
                if v.get(i) == 1 {
                    num[i] += w;
                }
            }
        }
        let probs = p.cond_visible(&h).unwrap();
        for i in 0..3 {
            assert!((probs[i] - num[i] / den).abs() < 1e-10);
        }
    }

    #[test]
    fn partition_zero_params_counts_states() {
        let p = RbmParams::<f64>::zeros(2, 2).unwrap();
        assert!((p.log_partition().unwrap() - 16.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn partition_four_term_sum() {
        let w: f64 = 0.7;
        let p = RbmParams::from_parts(1, 1, vec![w], vec![0.0], vec![0.0]).unwrap();
        let expect = (3.0 + w.exp()).ln();
        assert!((p.log_partition().unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one_5x5() {
        let p = random_params(5, 5, 41, 1.0);
        let log_z = p.log_partition().unwrap();
        let total: f64 = joint_weights(&p).iter().map(|(_, w)| w / log_z.exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partition_refuses_over_budget() {
        let p = RbmParams::<f64>::zeros(14, 13).unwrap();
        assert!(matches!(p.log_partition(), Err(Error::BudgetExceeded { units: 27, .. })));
    }

    #[test]
    fn marginal_matches_free_energy_within_budget() {
        let p = random_params(4, 4, 43, 1.3);
        let log_z = p.log_partition().unwrap();
        let joint = joint_weights(&p);
        let z: f64 = joint.iter().map(|(_, w)| w).sum();
        for vi in 0..16 {
            let v = BitVector::from_index(vi, 4);
            let marg: f64 = joint.iter().filter(|((a, _), _)| *a == vi).map(|(_, w)| w).sum::<f64>() / z;
            let via_f = ((-p.free_energy(&v).unwrap()) - log_z).exp();
            assert!((marg - via_f).abs() / marg < 1e-10);
        }
    }

    #[test]
    fn energy_differences_determine_probability_ratios() {
        let p = random_params(3, 2, 47, 1.0);
        let joint = joint_weights(&p);
        let z: f64 = joint.iter().map(|(_, w)| w).sum();
        let states: Vec<(BitVector, BitVector)> = (0..8)
            .flat_map(|vi| (0..4).map(move |hi| (vi, hi)))
            .map(|(vi, hi)| (BitVector::from_index(vi, 3), BitVector::from_index(hi, 2)))
            .collect();
        for (a, sa) in states.iter().enumerate() {
            for sb in states.iter().skip(a + 1) {
                let ea = p.energy(&sa.0, &sa.1).unwrap();
                let eb = p.energy(&sb.0, &sb.1).unwrap();
                let pa = joint[sa.0.to_index() * 4 + sa.1.to_index()].1 / z;
                let pb = joint[sb.0.to_index() * 4 + sb.1.to_index()].1 / z;
                assert!(((pa / pb).ln() - (eb - ea)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn classify_dominant_class_bias() {
        // Class column of W zero, strong class bias: always class 1.
        let n_v = 5;
        let mut p = random_params(n_v, 3, 53, 0.8);
        for j in 0..3 {
            p.weights_mut()[(n_v - 1) * 3 + j] = 0.0;
        }
        p.visible_bias_mut()[n_v - 1] = 10.0;
        for img in 0..(1usize << (n_v - 1)) {
            let pred = p.classify(&BitVector::from_index(img, n_v - 1)).unwrap();
            assert_eq!(pred.class_bit, 1);
        }
    }

    #[test]
    fn classify_tie_resolves_to_zero() {
        // Class bit decoupled and unbiased: F0 == F1 exactly.
        let mut p = random_params(4, 2, 59, 0.8);
        for j in 0..2 {
            p.weights_mut()[3 * 2 + j] = 0.0;
        }
        p.visible_bias_mut()[3] = 0.0;
        let pred = p.classify(&BitVector::from_index(5, 3)).unwrap();
        assert_eq!(pred.free_energy_0, pred.free_energy_1);
        assert_eq!(pred.class_bit, 0);
        assert!((pred.posterior_1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn classify_matches_enumerated_posterior_9x4() {
        let p = random_params(9, 4, 61, 0.7);
        let joint = joint_weights(&p);
        for img in 0..256usize {
            // Enumerated p(class=1 | image): sum over hidden and class states.
            let v0 = BitVector::from_index(img, 8).with_appended(0).to_index();
            let v1 = BitVector::from_index(img, 8).with_appended(1).to_index();
            let w0: f64 = joint.iter().filter(|((a, _), _)| *a == v0).map(|(_, w)| w).sum();
            let w1: f64 = joint.iter().filter(|((a, _), _)| *a == v1).map(|(_, w)| w).sum();
            let enumerated = w1 / (w0 + w1);
            let pred = p.classify(&BitVector::from_index(img, 8)).unwrap();
            assert!((pred.posterior_1 - enumerated).abs() < 1e-10);
            let expect_class = u8::from(enumerated > 0.5);
            // Skip knife-edge posteriors; the argmax comparison needs a margin.
            if (enumerated - 0.5).abs() > 1e-12 {
                assert_eq!(pred.class_bit, expect_class);
            }
            assert!(
                (pred.posterior_1 - logistic(pred.free_energy_0 - pred.free_energy_1)).abs()
                    == 0.0
            );
        }
    }

    #[test]
    fn classify_rejects_wrong_image_length() {
        let p = RbmParams::<f64>::zeros(5, 2).unwrap();
        assert!(p.classify(&BitVector::zeros(3)).is_err());
        assert!(p.classify(&BitVector::zeros(4)).is_ok());
    }

    #[test]
    fn params_round_trip_bitwise() {
        let p = random_params(6, 3, 67, 2.0);
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        let q = RbmParams::<f64>::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn params_reader_rejects_bad_magic() {
        let text = b"NOPE\n2 2\n0 0\n0 0\n0 0\n0 0\n";
        assert!(RbmParams::<f64>::read_from(&mut text.as_slice()).is_err());
    }

    #[test]
    fn coupling_stats() {
        let p = RbmParams::from_parts(2, 2, vec![1.0, -3.0, 0.5, -0.5], vec![0.0; 2], vec![0.0; 2])
            .unwrap();
        assert!((p.mean_abs_coupling() - 1.25).abs() < 1e-15);
        assert!((p.max_abs_coupling() - 3.0).abs() < 1e-15);
        assert!((p.median_abs_coupling() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn works_for_f32_models() {
        let p = RbmParams::<f32>::from_parts(2, 1, vec![1.0, -1.0], vec![0.0, 0.0], vec![0.0])
            .unwrap();
        let v = BitVector::from_bits(&[1, 0]).unwrap();
        assert!((p.free_energy(&v).unwrap() + (1.0 + std::f32::consts::E).ln()).abs() < 1e-6);
    }
}
