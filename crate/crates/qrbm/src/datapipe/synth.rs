//! Synthetic two-class image generator: centrally concentrated round blobs
//! (class 0) against two-arm spiral disks (class 1).

use rand::Rng;

use super::ImageMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Generate `n_per_class` images per class on a `side x side` grid, class 0
/// first. Pixels lie in [0, 1]; byte-identical output for a fixed seed.
pub fn synth_generate<T: Scalar>(
    n_per_class: usize,
    side: usize,
    seed: u64,
) -> Result<(ImageMatrix<T>, Vec<u8>)> {
    if side < 16 {
        return Err(Error::InvalidConfig(format!("side must be >= 16, got {side}")));
    }
    if n_per_class == 0 {
        return Err(Error::InvalidConfig("n_per_class must be >= 1".into()));
    }
    let mut data = Vec::with_capacity(2 * n_per_class * side * side);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2u8 {
        for idx in 0..n_per_class {
            let stream = (class as u64) << 32 | idx as u64;
            let mut rng = stream_rng(seed, stream);
            let image = if class == 0 {
                round_blob(side, &mut rng)
            } else {
                spiral_disk(side, &mut rng)
            };
            data.extend(image.into_iter().map(T::of));
            labels.push(class);
        }
    }
    Ok((ImageMatrix::from_flat(2 * n_per_class, side * side, data)?, labels))
}

/// Isotropic Gaussian blob with randomized width, amplitude, small center
/// jitter and pixel noise.
fn round_blob<R: Rng>(side: usize, rng: &mut R) -> Vec<f64> {
    let s = side as f64;
    let amplitude = rng.gen_range(0.7..1.0);
    let sigma = rng.gen_range(0.10..0.18) * s;
    let cx = s / 2.0 + rng.gen_range(-s / 24.0..s / 24.0);
    let cy = s / 2.0 + rng.gen_range(-s / 24.0..s / 24.0);
    let noise = rng.gen_range(0.01..0.03);
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let r2 = dx * dx + dy * dy;
            let value = amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
                + rng.gen_range(-noise..noise);
            pixels.push(value.clamp(0.0, 1.0));
        }
    }
    pixels
}

/// Two-arm logarithmic spiral on an extended exponential disk, with
/// randomized pitch, rotation, and pixel noise.
fn spiral_disk<R: Rng>(side: usize, rng: &mut R) -> Vec<f64> {
    let s = side as f64;
    let amplitude = rng.gen_range(0.7..1.0);
    let disk_scale = rng.gen_range(0.20..0.30) * s;
    let pitch: f64 = rng.gen_range(0.25..0.45);
    let rotation = rng.gen_range(0.0..std::f64::consts::PI);
    let arm_power = rng.gen_range(1.5..3.0);
    let noise = rng.gen_range(0.01..0.03);
    let cx = s / 2.0 + rng.gen_range(-s / 24.0..s / 24.0);
    let cy = s / 2.0 + rng.gen_range(-s / 24.0..s / 24.0);
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let r = (dx * dx + dy * dy).sqrt().max(1e-6);
            let theta = dy.atan2(dx);
            let envelope = amplitude * (-r / disk_scale).exp();
            // Two arms: intensity peaks where the phase aligns with the
            // logarithmic spiral theta = ln(r)/tan(pitch) + rotation.
            let phase = theta - r.ln() / pitch.tan() - rotation;
            let arms = (0.5 + 0.5 * (2.0 * phase).cos()).powf(arm_power);
            let value = envelope * (0.25 + 0.75 * arms) + rng.gen_range(-noise..noise);
            pixels.push(value.clamp(0.0, 1.0));
        }
    }
    pixels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        assert!(synth_generate::<f64>(10, 8, 1).is_err());
    }

    #[test]
    fn fixed_seed_reproduces_identical_datasets() {
        let (a, la) = synth_generate::<f64>(20, 16, 42).unwrap();
        let (b, lb) = synth_generate::<f64>(20, 16, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = synth_generate::<f64>(20, 16, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn labels_split_evenly_and_pixels_stay_in_range() {
        let (images, labels) = synth_generate::<f64>(15, 16, 7).unwrap();
        assert_eq!(labels.iter().filter(|&&c| c == 0).count(), 15);
        assert_eq!(labels.iter().filter(|&&c| c == 1).count(), 15);
        for i in 0..images.n_rows {
            assert!(images.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn round_class_second_moments_are_isotropic_on_average() {
        let side = 24;
        let (images, labels) = synth_generate::<f64>(500, side, 11).unwrap();
        let mut ratios = Vec::new();
        for i in 0..images.n_rows {
            if labels[i] != 0 {
                continue;
            }
            let img = images.row(i);
            let total: f64 = img.iter().sum();
            let mut cx = 0.0;
            let mut cy = 0.0;
            for y in 0..side {
                for x in 0..side {
                    let w = img[y * side + x];
                    cx += w * x as f64;
                    cy += w * y as f64;
                }
            }
            cx /= total;
            cy /= total;
            let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
            for y in 0..side {
                for x in 0..side {
                    let w = img[y * side + x];
                    let dx = x as f64 - cx;
                    let dy = y as f64 - cy;
                    mxx += w * dx * dx;
                    myy += w * dy * dy;
                    mxy += w * dx * dy;
                }
            }
            let trace = mxx + myy;
            let det = mxx * myy - mxy * mxy;
            let disc = ((trace * trace) / 4.0 - det).max(0.0).sqrt();
            let (l1, l2) = (trace / 2.0 + disc, trace / 2.0 - disc);
            ratios.push(l2 / l1);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(mean > 0.85, "mean axis ratio {mean}");
    }
}
