//! Principal component analysis by dense symmetric eigendecomposition
//! (cyclic Jacobi). The covariance is formed on whichever side is smaller
//! (feature space or Gram space), so wide pixel matrices stay tractable.

use std::io::{BufRead, Write};

use super::ImageMatrix;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Fitted PCA basis: mean, row-orthonormal components in decreasing
/// variance order, and the explained-variance ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel<T> {
    mean: Vec<T>,
    /// Row-major `k x d`.
    components: Vec<T>,
    k: usize,
    d: usize,
    explained_variance_ratio: Vec<T>,
}

impl<T: Scalar> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[T] {
        &self.components[i * self.d..(i + 1) * self.d]
    }

    pub fn explained_variance_ratio(&self) -> &[T] {
        &self.explained_variance_ratio
    }

    /// Project a flattened image onto the components.
    pub fn project(&self, image: &[T]) -> Result<Vec<T>> {
        if image.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "image has {} pixels, model expects {}",
                image.len(),
                self.d
            )));
        }
        Ok((0..self.k)
            .map(|c| {
                self.component(c)
                    .iter()
                    .zip(image)
                    .zip(&self.mean)
                    .map(|((&w, &x), &m)| w * (x - m))
                    .sum()
            })
            .collect())
    }

    /// Mean plus the span of the projected coordinates.
    pub fn reconstruct(&self, projection: &[T]) -> Result<Vec<T>> {
        if projection.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "projection has {} components, model expects {}",
                projection.len(),
                self.k
            )));
        }
        let mut out = self.mean.clone();
        for (c, &p) in projection.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.component(c)) {
                *o = *o + p * w;
            }
        }
        Ok(out)
    }

    /// `PCA1` text form: header, mean, components, ratios.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "PCA1")?;
        writeln!(out, "{} {}", self.k, self.d)?;
        let fmt =
            |xs: &[T]| xs.iter().map(|x| x.f64().to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "{}", fmt(&self.mean))?;
        for c in 0..self.k {
            writeln!(out, "{}", fmt(self.component(c)))?;
        }
        writeln!(out, "{}", fmt(&self.explained_variance_ratio))?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut lines = input.lines();
        let magic = lines.next().ok_or_else(|| Error::Parse("empty PCA file".into()))??;
        if magic.trim() != "PCA1" {
            return Err(Error::Parse("PCA file must start with PCA1".into()));
        }
        let header = lines.next().ok_or_else(|| Error::Parse("missing PCA header".into()))??;
        let mut parts = header.split_whitespace();
        let k: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad k".into()))?;
        let d: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad d".into()))?;
        let mut parse_line = |expect: usize| -> Result<Vec<T>> {
            let line =
                lines.next().ok_or_else(|| Error::Parse("truncated PCA file".into()))??;
            let vals: Vec<T> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map(T::of)
                        .map_err(|_| Error::Parse(format!("bad number {tok:?}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != expect {
                return Err(Error::Parse(format!(
                    "expected {expect} values, found {}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let mean = parse_line(d)?;
        let mut components = Vec::with_capacity(k * d);
        for _ in 0..k {
            components.extend(parse_line(d)?);
        }
        let explained_variance_ratio = parse_line(k)?;
        Ok(Self { mean, components, k, d, explained_variance_ratio })
    }
}

/// Fit the top-`k` principal directions of the mean-centered images.
///
/// Component signs are fixed so the largest-magnitude entry of each
/// component is positive. `k` beyond the numerical rank is an error.
pub fn pca_fit<T: Scalar>(images: &ImageMatrix<T>, k: usize) -> Result<PcaModel<T>> {
    let n = images.n_rows;
    let d = images.n_cols;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if n < 2 || n < k {
        return Err(Error::Data(format!("need at least max(2, k) = {} rows, got {n}", k.max(2))));
    }
    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(images.row(i)) {
            *m = *m + x;
        }
    }
    let inv_n = T::one() / T::of(n as f64);
    for m in &mut mean {
        *m = *m * inv_n;
    }
    let denom = T::of((n - 1) as f64);
    // Total variance = trace of the covariance, independent of which side
    // gets decomposed.
    let mut total_variance = T::zero();
    for i in 0..n {
        for (j, &x) in images.row(i).iter().enumerate() {
            let dx = x - mean[j];
            total_variance = total_variance + dx * dx;
        }
    }
    total_variance = total_variance / denom;
    if !(total_variance > T::zero()) {
        return Err(Error::Data("images have zero variance".into()));
    }

    let (eigenvalues, components) = if d <= n {
        // Feature-space covariance, d x d.
        let mut cov = vec![T::zero(); d * d];
        for r in 0..n {
            let row = images.row(r);
            for i in 0..d {
                let di = row[i] - mean[i];
                for j in i..d {
                    let dj = row[j] - mean[j];
                    cov[i * d + j] = cov[i * d + j] + di * dj;
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov[i * d + j] = cov[j * d + i];
            }
        }
        for entry in &mut cov {
            *entry = *entry / denom;
        }
        let (mut values, vectors) = jacobi_eigen_descending(d, cov);
        let components: Vec<T> = vectors[..k * d].to_vec();
        values.truncate(k);
        (values, components)
    } else {
        // Gram matrix, n x n: eigenvectors map back through the data.
        let mut gram = vec![T::zero(); n * n];
        for a in 0..n {
            let ra = images.row(a);
            for b in a..n {
                let rb = images.row(b);
                let mut dot = T::zero();
                for j in 0..d {
                    dot = dot + (ra[j] - mean[j]) * (rb[j] - mean[j]);
                }
                gram[a * n + b] = dot;
                gram[b * n + a] = dot;
            }
        }
        let (values, vectors) = jacobi_eigen_descending(n, gram);
        let mut components = vec![T::zero(); k * d];
        let mut eigenvalues = Vec::with_capacity(k);
        for c in 0..k {
            let u = &vectors[c * n..(c + 1) * n];
            let comp = &mut components[c * d..(c + 1) * d];
            for (a, &ua) in u.iter().enumerate() {
                for (j, x) in images.row(a).iter().enumerate() {
                    comp[j] = comp[j] + ua * (*x - mean[j]);
                }
            }
            let norm = comp.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > T::zero() {
                for x in comp.iter_mut() {
                    *x = *x / norm;
                }
            }
            eigenvalues.push(values[c] / denom);
        }
        (eigenvalues, components)
    };

    // Rank guard: a vanishing k-th eigenvalue means k exceeds the rank.
    let max_eig = eigenvalues.first().copied().unwrap_or_else(T::zero);
    let floor = max_eig * T::of(1e-9);
    if eigenvalues.iter().any(|&v| v <= floor || !(v > T::zero())) {
        return Err(Error::Data(format!(
            "k = {k} exceeds the numerical rank of the centered data"
        )));
    }

    let mut model = PcaModel {
        mean,
        components,
        k,
        d,
        explained_variance_ratio: eigenvalues
            .iter()
            .map(|&v| v / total_variance)
            .collect(),
    };
    fix_signs(&mut model);
    Ok(model)
}

fn fix_signs<T: Scalar>(model: &mut PcaModel<T>) {
    for c in 0..model.k {
        let comp = &mut model.components[c * model.d..(c + 1) * model.d];
        let mut best = 0usize;
        for (i, x) in comp.iter().enumerate() {
            if x.abs() > comp[best].abs() {
                best = i;
            }
        }
        if comp[best] < T::zero() {
            for x in comp.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns
/// eigenvalues in descending order with eigenvectors as matrix rows.
fn jacobi_eigen_descending<T: Scalar>(n: usize, mut a: Vec<T>) -> (Vec<T>, Vec<T>) {
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let eps = T::of(1e-30);
    for _sweep in 0..60 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q] * a[p * n + q];
            }
        }
        let diag: T = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= (diag + T::one()) * T::epsilon() * T::epsilon() || off <= eps {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= eps {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (T::one() + theta * theta).sqrt())
                } else {
                    -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                };
                let cos = T::one() / (T::one() + t * t).sqrt();
                let sin = t * cos;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = cos * aip - sin * aiq;
                    a[i * n + q] = sin * aip + cos * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = cos * apj - sin * aqj;
                    a[q * n + j] = sin * apj + cos * aqj;
                }
                for i in 0..n {
                    let vip = v[p * n + i];
                    let viq = v[q * n + i];
                    v[p * n + i] = cos * vip - sin * viq;
                    v[q * n + i] = sin * vip + cos * viq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].partial_cmp(&a[x * n + x]).unwrap());
    let values: Vec<T> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (rank, &i) in order.iter().enumerate() {
        vectors[rank * n..(rank + 1) * n].copy_from_slice(&v[i * n..(i + 1) * n]);
    }
    (values, vectors)
}
