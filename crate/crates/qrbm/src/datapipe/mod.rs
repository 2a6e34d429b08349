//! Data pipeline: PCA compression of images to quantized bit rows with a
//! trailing class bit, synthetic galaxy-like image generation, and graymap
//! ingestion.

mod pca;
mod pgm;
mod synth;

pub use pca::{pca_fit, PcaModel};
pub use pgm::{ingest, read_pgm, write_pgm};
pub use synth::synth_generate;

use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::bits::BitVector;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Dense row-major image stack: one flattened image per row.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageMatrix<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageMatrix<T> {
    pub fn from_flat(n_rows: usize, n_cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "image matrix {}x{} needs {} values, got {}",
                n_rows,
                n_cols,
                n_rows * n_cols,
                data.len()
            )));
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { n_rows: indices.len(), n_cols: self.n_cols, data }
    }
}

/// Per-component linear map of the fitting-set range onto [15, 240].
#[derive(Clone, Debug, PartialEq)]
pub struct Quantizer<T> {
    mins: Vec<T>,
    maxs: Vec<T>,
}

/// Low end of the quantization target range.
pub const QUANT_LO: f64 = 15.0;
/// High end of the quantization target range.
pub const QUANT_HI: f64 = 240.0;

impl<T: Scalar> Quantizer<T> {
    /// Per-component min/max over the fitting-set projections.
    pub fn fit(projections: &[Vec<T>]) -> Result<Self> {
        let first = projections.first().ok_or(Error::EmptyInput("quantizer projections"))?;
        let k = first.len();
        let mut mins = vec![T::infinity(); k];
        let mut maxs = vec![T::neg_infinity(); k];
        for row in projections {
            if row.len() != k {
                return Err(Error::DimensionMismatch("ragged projection rows".into()));
            }
            for (i, &p) in row.iter().enumerate() {
                mins[i] = mins[i].min(p);
                maxs[i] = maxs[i].max(p);
            }
        }
        for i in 0..k {
            if !(maxs[i] > mins[i]) {
                return Err(Error::Data(format!(
                    "component {i} is constant on the fitting set; cannot quantize"
                )));
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn from_ranges(mins: Vec<T>, maxs: Vec<T>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::DimensionMismatch("min/max length mismatch".into()));
        }
        if mins.iter().zip(&maxs).any(|(lo, hi)| !(*hi > *lo)) {
            return Err(Error::Data("quantizer needs min < max per component".into()));
        }
        Ok(Self { mins, maxs })
    }

    pub fn n_components(&self) -> usize {
        self.mins.len()
    }

    /// Map one projection to bytes: fitting-set values land in [15, 240],
    /// outliers clamp into [0, 255]. Rounding is half-away-from-zero.
    pub fn quantize(&self, projection: &[T]) -> Result<Vec<u8>> {
        if projection.len() != self.mins.len() {
            return Err(Error::DimensionMismatch(format!(
                "projection has {} components, quantizer expects {}",
                projection.len(),
                self.mins.len()
            )));
        }
        Ok(projection
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let lo = self.mins[i].f64();
                let hi = self.maxs[i].f64();
                let raw = QUANT_LO + (p.f64() - lo) * (QUANT_HI - QUANT_LO) / (hi - lo);
                raw.round().clamp(0.0, 255.0) as u8
            })
            .collect())
    }
}

/// MSB-first bits of one byte.
pub fn byte_to_bits(byte: u8) -> [u8; 8] {
    let mut bits = [0u8; 8];
    for (i, bit) in bits.iter_mut().enumerate() {
        *bit = (byte >> (7 - i)) & 1;
    }
    bits
}

/// Inverse of [`byte_to_bits`].
pub fn bits_to_byte(bits: &[u8]) -> u8 {
    debug_assert_eq!(bits.len(), 8);
    bits.iter().fold(0u8, |acc, &b| (acc << 1) | b)
}

/// Project, quantize, and serialize one image to feature bits: component
/// bytes in decreasing-variance order, MSB first within each byte.
pub fn compress<T: Scalar>(
    model: &PcaModel<T>,
    quantizer: &Quantizer<T>,
    image: &[T],
) -> Result<Vec<u8>> {
    let projection = model.project(image)?;
    let bytes = quantizer.quantize(&projection)?;
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for byte in bytes {
        bits.extend_from_slice(&byte_to_bits(byte));
    }
    Ok(bits)
}

/// One compressed example: feature bits plus the class bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledBits {
    pub bits: BitVector,
    pub class: u8,
}

/// Rows of feature bits with a trailing class bit, plus the identifiers of
/// the PCA/quantizer pair that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedDataset {
    pub n_feature_bits: usize,
    pub rows: Vec<LabeledBits>,
    pub provenance: String,
}

impl CompressedDataset {
    /// Full visible rows for the RBM: feature bits with the class bit
    /// appended last.
    pub fn visible_rows(&self) -> Vec<BitVector> {
        self.rows.iter().map(|r| r.bits.with_appended(r.class)).collect()
    }

    /// Write the `CDS1` text format: a header line
    /// `CDS1 <n_rows> <n_feature_bits> <provenance>`, then one '0'/'1' line
    /// per row (feature bits then class bit).
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "CDS1 {} {} {}", self.rows.len(), self.n_feature_bits, self.provenance)?;
        for row in &self.rows {
            writeln!(out, "{}{}", row.bits.to_bit_string(), row.class)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("CDS1") {
            return Err(Error::Parse("dataset file must start with CDS1".into()));
        }
        let n_rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad n_rows in dataset header".into()))?;
        let n_feature_bits: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad n_feature_bits in dataset header".into()))?;
        let provenance = parts.next().unwrap_or("").to_string();
        let mut rows = Vec::with_capacity(n_rows);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.len() != n_feature_bits + 1 {
                return Err(Error::Parse(format!(
                    "row has {} bits, expected {}",
                    line.len(),
                    n_feature_bits + 1
                )));
            }
            let digits: Vec<u8> = line
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Parse(format!("bad bit character {other:?}"))),
                })
                .collect::<Result<_>>()?;
            rows.push(LabeledBits {
                bits: BitVector::from_bits(&digits[..n_feature_bits])?,
                class: digits[n_feature_bits],
            });
        }
        if rows.len() != n_rows {
            return Err(Error::Parse(format!(
                "header promised {n_rows} rows, file holds {}",
                rows.len()
            )));
        }
        Ok(Self { n_feature_bits, rows, provenance })
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

/// FNV-1a over the model and quantizer text forms; names the encoding.
fn provenance_tag<T: Scalar>(model: &PcaModel<T>, quantizer: &Quantizer<T>) -> Result<String> {
    let mut text = Vec::new();
    model.write_to(&mut text)?;
    write_quantizer(&mut text, quantizer)?;
    let mut hash: u64 = 0xcbf29ce484222325;
    for &byte in &text {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    Ok(format!("pq-{hash:016x}"))
}

/// Fit the compression on a split of the data and encode the rest.
///
/// The PCA model and quantizer see only the fit split; the remaining
/// images are compressed, shuffled and divided evenly into train and test
/// datasets, each row carrying its class bit last.
pub fn build_dataset<T: Scalar>(
    images: &ImageMatrix<T>,
    labels: &[u8],
    fit_fraction: f64,
    n_feature_bits: usize,
    seed: u64,
) -> Result<(PcaModel<T>, Quantizer<T>, CompressedDataset, CompressedDataset)> {
    if labels.len() != images.n_rows {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} images",
            labels.len(),
            images.n_rows
        )));
    }
    if labels.iter().any(|&c| c > 1) {
        return Err(Error::Data("labels must be 0 or 1".into()));
    }
    if n_feature_bits == 0 || n_feature_bits % 8 != 0 {
        return Err(Error::InvalidConfig(format!(
            "n_feature_bits must be a positive multiple of 8 (whole components), got {n_feature_bits}"
        )));
    }
    if !(fit_fraction > 0.0 && fit_fraction < 1.0) {
        return Err(Error::InvalidConfig("fit_fraction must lie strictly between 0 and 1".into()));
    }
    let k = n_feature_bits / 8;
    let mut order: Vec<usize> = (0..images.n_rows).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let fit_count = ((images.n_rows as f64) * fit_fraction).round() as usize;
    let remaining = images.n_rows.saturating_sub(fit_count);
    if fit_count < k || remaining < 2 {
        return Err(Error::Data(format!(
            "insufficient data: {fit_count} fit rows (need >= {k}) and {remaining} remaining (need >= 2)"
        )));
    }
    let fit_indices = &order[..fit_count];
    let rest_indices = &order[fit_count..];
    let fit_images = images.select_rows(fit_indices);
    let model = pca_fit(&fit_images, k)?;
    let fit_projections: Vec<Vec<T>> = (0..fit_images.n_rows)
        .map(|i| model.project(fit_images.row(i)))
        .collect::<Result<_>>()?;
    let quantizer = Quantizer::fit(&fit_projections)?;
    let provenance = provenance_tag(&model, &quantizer)?;
    let mut rows = Vec::with_capacity(rest_indices.len());
    for &idx in rest_indices {
        let bits = compress(&model, &quantizer, images.row(idx))?;
        rows.push(LabeledBits { bits: BitVector::from_bits(&bits)?, class: labels[idx] });
    }
    let train_count = rows.len().div_ceil(2);
    let test_rows = rows.split_off(train_count);
    let train = CompressedDataset {
        n_feature_bits,
        rows,
        provenance: provenance.clone(),
    };
    let test = CompressedDataset { n_feature_bits, rows: test_rows, provenance };
    Ok((model, quantizer, train, test))
}

/// Raster preview of a dataset slice.
#[derive(Clone, Debug)]
pub struct RasterPreview {
    /// Binary graymap (P5), one dataset row per image row, bright = 1.
    pub pgm: Vec<u8>,
    /// Caption text reporting the bit-sum statistic.
    pub caption: String,
    pub bit_sum: u64,
    pub width: usize,
    pub height: usize,
}

/// Render dataset rows as a raster of their feature bits.
pub fn render_minibatch(dataset: &CompressedDataset, range: Range<usize>) -> Result<RasterPreview> {
    if range.is_empty() || range.end > dataset.rows.len() {
        return Err(Error::InvalidConfig(format!(
            "row range {range:?} invalid for {} rows",
            dataset.rows.len()
        )));
    }
    let width = dataset.n_feature_bits;
    let height = range.len();
    let mut pixels = Vec::with_capacity(width * height);
    let mut bit_sum = 0u64;
    for row in &dataset.rows[range.clone()] {
        for &bit in row.bits.as_slice() {
            bit_sum += bit as u64;
            pixels.push(if bit == 1 { 255 } else { 0 });
        }
    }
    let caption = format!(
        "rows {}..{}: bit sum {} of maximum {}",
        range.start,
        range.end,
        bit_sum,
        (width * height) as u64
    );
    Ok(RasterPreview { pgm: write_pgm(width, height, &pixels), caption, bit_sum, width, height })
}

/// Write the quantizer's `QNT1` text form.
pub fn write_quantizer<T: Scalar, W: Write>(out: &mut W, q: &Quantizer<T>) -> Result<()> {
    writeln!(out, "QNT1")?;
    writeln!(out, "{}", q.mins.len())?;
    let fmt = |xs: &[T]| xs.iter().map(|x| x.f64().to_string()).collect::<Vec<_>>().join(" ");
    writeln!(out, "{}", fmt(&q.mins))?;
    writeln!(out, "{}", fmt(&q.maxs))?;
    Ok(())
}

/// Read the `QNT1` form.
pub fn read_quantizer<T: Scalar, R: BufRead>(input: &mut R) -> Result<Quantizer<T>> {
    let mut lines = input.lines();
    let magic = lines.next().ok_or_else(|| Error::Parse("empty quantizer file".into()))??;
    if magic.trim() != "QNT1" {
        return Err(Error::Parse("quantizer file must start with QNT1".into()));
    }
    let k: usize = lines
        .next()
        .ok_or_else(|| Error::Parse("missing component count".into()))??
        .trim()
        .parse()
        .map_err(|_| Error::Parse("bad component count".into()))?;
    let parse_line = |line: Option<std::io::Result<String>>| -> Result<Vec<T>> {
        let line = line.ok_or_else(|| Error::Parse("truncated quantizer file".into()))??;
        let vals: Vec<T> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map(T::of)
                    .map_err(|_| Error::Parse(format!("bad number {tok:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != k {
            return Err(Error::Parse(format!("expected {k} values, found {}", vals.len())));
        }
        Ok(vals)
    };
    let mins = parse_line(lines.next())?;
    let maxs = parse_line(lines.next())?;
    Quantizer::from_ranges(mins, maxs)
}
