//! Portable graymap reading/writing and directory ingestion with a label
//! manifest.

use std::path::Path;

use super::ImageMatrix;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Serialize an 8-bit grayscale raster as binary PGM (P5).
pub fn write_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    debug_assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parse a PGM image (binary P5 or ASCII P2, maxval up to 255).
pub fn read_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor)
        .ok_or_else(|| Error::Parse("missing PGM magic".into()))?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::Parse(format!("unsupported graymap magic {other:?}"))),
    };
    let width: usize = parse_header_int(bytes, &mut cursor, "width")?;
    let height: usize = parse_header_int(bytes, &mut cursor, "height")?;
    let maxval: usize = parse_header_int(bytes, &mut cursor, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let data = &bytes[cursor..];
        if data.len() < n {
            return Err(Error::Parse(format!(
                "raster holds {} bytes, expected {n}",
                data.len()
            )));
        }
        pixels.extend_from_slice(&data[..n]);
    } else {
        for _ in 0..n {
            let tok = next_token(bytes, &mut cursor)
                .ok_or_else(|| Error::Parse("truncated ASCII raster".into()))?;
            let value: usize =
                tok.parse().map_err(|_| Error::Parse(format!("bad pixel {tok:?}")))?;
            if value > maxval {
                return Err(Error::Parse(format!("pixel {value} exceeds maxval {maxval}")));
            }
            pixels.push(value as u8);
        }
    }
    if maxval != 255 {
        let scale = 255.0 / maxval as f64;
        for p in &mut pixels {
            *p = ((*p as f64) * scale).round() as u8;
        }
    }
    Ok((width, height, pixels))
}

/// Read one whitespace-delimited header token, skipping `#` comments. For
/// P5, leaves the cursor one byte past the whitespace terminating the token.
fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    while *cursor < bytes.len() {
        let b = bytes[*cursor];
        if b == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
        } else if b.is_ascii_whitespace() {
            *cursor += 1;
        } else {
            break;
        }
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if *cursor > start {
        let token = String::from_utf8_lossy(&bytes[start..*cursor]).into_owned();
        if *cursor < bytes.len() {
            *cursor += 1;
        }
        Some(token)
    } else {
        None
    }
}

fn parse_header_int(bytes: &[u8], cursor: &mut usize, what: &str) -> Result<usize> {
    next_token(bytes, cursor)
        .ok_or_else(|| Error::Parse(format!("missing PGM {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad PGM {what}")))
}

/// Ingest a directory of graymap images listed in a `filename,class` CSV
/// manifest: center-crop each to `crop x crop`, flatten row-major, scale to
/// [0, 1].
pub fn ingest<T: Scalar>(
    dir: &Path,
    manifest: &Path,
    crop: usize,
) -> Result<(ImageMatrix<T>, Vec<u8>)> {
    if crop == 0 {
        return Err(Error::InvalidConfig("crop must be positive".into()));
    }
    let manifest_text = std::fs::read_to_string(manifest)?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in manifest_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("filename,class")) {
            continue;
        }
        let (name, class_text) = line
            .split_once(',')
            .ok_or_else(|| Error::Data(format!("manifest line {line:?} is not filename,class")))?;
        let class: u8 = match class_text.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Data(format!("unknown label {other:?} for {name:?}"))),
        };
        let path = dir.join(name.trim());
        let bytes = std::fs::read(&path).map_err(|e| {
            Error::Data(format!("cannot read image {}: {e}", path.display()))
        })?;
        let (width, height, pixels) = read_pgm(&bytes)?;
        if width < crop || height < crop {
            return Err(Error::Data(format!(
                "{name:?} is {width}x{height}, too small for a {crop}x{crop} center crop"
            )));
        }
        let x0 = (width - crop) / 2;
        let y0 = (height - crop) / 2;
        for y in 0..crop {
            let row = &pixels[(y0 + y) * width + x0..(y0 + y) * width + x0 + crop];
            data.extend(row.iter().map(|&p| T::of(p as f64 / 255.0)));
        }
        labels.push(class);
    }
    if labels.is_empty() {
        return Err(Error::Data("manifest lists no images".into()));
    }
    Ok((ImageMatrix::from_flat(labels.len(), crop * crop, data)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let pixels: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();
        let bytes = write_pgm(4, 3, &pixels);
        let (w, h, back) = read_pgm(&bytes).unwrap();
        assert_eq!((w, h), (4, 3));
        assert_eq!(back, pixels);
    }

    #[test]
    fn pgm_ascii_and_comments() {
        let text = b"P2\n# a comment\n2 2\n255\n0 128\n255 64\n";
        let (w, h, pixels) = read_pgm(text).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(pixels, vec![0, 128, 255, 64]);
    }

    #[test]
    fn pgm_rejects_wide_maxval() {
        assert!(read_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    fn write_test_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        // 300x300 gradient image: pixel = (x + y) mod 256.
        let mut big = Vec::with_capacity(300 * 300);
        for y in 0..300usize {
            for x in 0..300usize {
                big.push(((x + y) % 256) as u8);
            }
        }
        std::fs::write(dir.path().join("big.pgm"), write_pgm(300, 300, &big)).unwrap();
        let small: Vec<u8> = (0..40_000).map(|i| (i % 251) as u8).collect();
        std::fs::write(dir.path().join("small.pgm"), write_pgm(200, 200, &small)).unwrap();
        std::fs::write(dir.path().join("labels.csv"), "filename,class\nbig.pgm,1\nsmall.pgm,0\n")
            .unwrap();
        dir
    }

    #[test]
    fn ingest_reads_labels_and_crops_centrally() {
        let dir = write_test_dir();
        let (images, labels) =
            ingest::<f64>(dir.path(), &dir.path().join("labels.csv"), 200).unwrap();
        assert_eq!(images.n_rows, 2);
        assert_eq!(labels, vec![1, 0]);
        // Center crop of the 300x300 gradient starts at (50, 50).
        let expect = ((50 + 50) % 256) as f64 / 255.0;
        assert!((images.row(0)[0] - expect).abs() < 1e-12);
        // Determinism.
        let (again, _) = ingest::<f64>(dir.path(), &dir.path().join("labels.csv"), 200).unwrap();
        assert_eq!(images, again);
    }

    #[test]
    fn ingest_rejects_bad_labels_missing_files_and_small_images() {
        let dir = write_test_dir();
        std::fs::write(dir.path().join("bad.csv"), "big.pgm,spiral\n").unwrap();
        assert!(ingest::<f64>(dir.path(), &dir.path().join("bad.csv"), 100).is_err());
        std::fs::write(dir.path().join("missing.csv"), "nosuch.pgm,0\n").unwrap();
        assert!(ingest::<f64>(dir.path(), &dir.path().join("missing.csv"), 100).is_err());
        std::fs::write(dir.path().join("toobig.csv"), "small.pgm,0\n").unwrap();
        assert!(ingest::<f64>(dir.path(), &dir.path().join("toobig.csv"), 250).is_err());
    }
}
