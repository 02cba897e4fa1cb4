//! Grayscale raster type, color conversion, and windowed pixel access.
//!
//! All encoders in this crate operate on [`GrayImage`]: a row-major grid of
//! 8-bit intensities. Pixel coordinates on the public surface are one-based
//! (row `i` in `1..=height`, column `j` in `1..=width`); internal storage is
//! zero-based row-major.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grid of 8-bit intensities.
///
/// Immutable after construction; cheap to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// BT.601 luma weights; the standard conversion for legacy face datasets.
/// The sum of the three weights is 1, so gray inputs are fixed points.
fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

impl GrayImage {
    /// Builds an image from row-major intensities.
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "empty raster: {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Converts interleaved RGB triples to grayscale using BT.601 weights:
    /// `round(0.299 R + 0.587 G + 0.114 B)`.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "empty raster: {width}x{height}"
            )));
        }
        if rgb.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "rgb length {} does not match {width}x{height}x3",
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|px| luma(px[0], px[1], px[2]))
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major intensities.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Zero-based pixel access. Callers must stay in bounds.
    #[inline]
    pub(crate) fn at(&self, row: usize, col: usize) -> u8 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    /// Extracts the 4x4 window whose top-left corner sits at one-based
    /// `(i, j)`. Valid origins satisfy `1 <= i <= height-3` and
    /// `1 <= j <= width-3`; the window then lies fully inside the raster.
    pub fn window4(&self, i: usize, j: usize) -> Result<[u8; 16]> {
        let (m, n) = (self.height, self.width);
        if m < 4 || n < 4 {
            return Err(Error::Dimension(format!(
                "image {n}x{m} too small for a 4x4 window; minimum 4x4"
            )));
        }
        if i < 1 || i > m - 3 {
            return Err(Error::Index(format!(
                "row index {i} outside 1..={} (height {m})",
                m - 3
            )));
        }
        if j < 1 || j > n - 3 {
            return Err(Error::Index(format!(
                "column index {j} outside 1..={} (width {n})",
                n - 3
            )));
        }
        let (r0, c0) = (i - 1, j - 1);
        let mut block = [0u8; 16];
        for dr in 0..4 {
            for dc in 0..4 {
                block[dr * 4 + dc] = self.at(r0 + dr, c0 + dc);
            }
        }
        Ok(block)
    }

    /// Number of valid 4x4 window origins: `(height-3) * (width-3)`,
    /// or 0 when the image is smaller than 4x4.
    pub fn window4_origins(&self) -> usize {
        self.height.saturating_sub(3) * self.width.saturating_sub(3)
    }

    /// Decodes an image file. PGM (P5) is parsed directly; PNG, JPEG and BMP
    /// go through the `image` crate and color inputs are reduced to luma.
    pub fn load(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "pgm" => {
                let bytes = fs::read(path).map_err(|e| Error::Decode {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })?;
                read_pgm(&bytes).map_err(|e| Error::Decode {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })
            }
            "png" | "jpg" | "jpeg" | "bmp" => {
                let decoded = image::open(path).map_err(|e| Error::Decode {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })?;
                let rgb = decoded.to_rgb8();
                Self::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
            }
            other => Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("unsupported extension {other:?}"),
            }),
        }
    }

    /// True when the file extension names a format `load` can decode.
    pub fn supported_extension(path: &Path) -> bool {
        matches!(
            path.extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase())
                .as_deref(),
            Some("pgm" | "png" | "jpg" | "jpeg" | "bmp")
        )
    }
}

/// Parses a binary PGM (P5) buffer with maxval 255.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;

    fn skip_ws(bytes: &[u8], mut pos: usize) -> usize {
        while pos < bytes.len() {
            match bytes[pos] {
                b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        pos
    }

    fn token(bytes: &[u8], pos: usize) -> Result<(usize, usize)> {
        let start = skip_ws(bytes, pos);
        let mut end = start;
        while end < bytes.len() && !bytes[end].is_ascii_whitespace() {
            end += 1;
        }
        if start == end {
            return Err(Error::Dimension("pgm: missing header token".into()));
        }
        Ok((start, end))
    }

    fn number(bytes: &[u8], pos: usize) -> Result<(usize, usize)> {
        let (start, end) = token(bytes, pos)?;
        let text = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| Error::Dimension("pgm: non-ascii header".into()))?;
        let value: usize = text
            .parse()
            .map_err(|_| Error::Dimension(format!("pgm: bad header number {text:?}")))?;
        Ok((value, end))
    }

    let (start, end) = token(bytes, pos)?;
    if &bytes[start..end] != b"P5" {
        return Err(Error::Dimension("pgm: not a P5 file".into()));
    }
    pos = end;
    let (width, next) = number(bytes, pos)?;
    let (height, next) = number(bytes, next)?;
    let (maxval, next) = number(bytes, next)?;
    if maxval != 255 {
        return Err(Error::Dimension(format!(
            "pgm: unsupported maxval {maxval}, expected 255"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos = next + 1;
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::Dimension("pgm: dimension overflow".into()))?;
    if bytes.len() < pos || bytes.len() - pos < expected {
        return Err(Error::Dimension(format!(
            "pgm: raster truncated, expected {expected} bytes"
        )));
    }
    GrayImage::new(width, height, bytes[pos..pos + expected].to_vec())
}

/// Writes `img` as binary PGM with the canonical `P5 <w> <h> 255` header.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "P5 {} {} 255", img.width(), img.height())?;
    w.write_all(img.data())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(width: usize, height: usize) -> GrayImage {
        let data = (0..width * height).map(|v| (v % 256) as u8).collect();
        GrayImage::new(width, height, data).unwrap()
    }

    #[test]
    fn luma_fixed_points() {
        assert_eq!(luma(0, 0, 0), 0);
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(100, 100, 100), 100);
    }

    #[test]
    fn luma_idempotent_on_gray() {
        for g in 0..=255u8 {
            assert_eq!(luma(g, g, g), g, "gray {g} must map to itself");
        }
    }

    #[test]
    fn from_rgb8_preserves_dimensions() {
        let rgb: Vec<u8> = (0..5 * 4 * 3).map(|v| (v * 7 % 256) as u8).collect();
        let img = GrayImage::from_rgb8(5, 4, &rgb).unwrap();
        assert_eq!(img.width(), 5);
        assert_eq!(img.height(), 4);
        assert_eq!(img.data().len(), 20);
    }

    #[test]
    fn empty_raster_rejected() {
        assert!(matches!(
            GrayImage::new(0, 3, vec![]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            GrayImage::from_rgb8(0, 0, &[]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn window4_whole_image_is_only_window_at_4x4() {
        let img = ramp(4, 4);
        let block = img.window4(1, 1).unwrap();
        assert_eq!(&block[..], img.data());
        assert!(img.window4(1, 2).is_err());
        assert!(img.window4(2, 1).is_err());
        assert_eq!(img.window4_origins(), 1);
    }

    #[test]
    fn window4_origin_counts() {
        assert_eq!(ramp(5, 5).window4_origins(), 4);
        // 6 rows x 8 cols: i in 1..=3, j in 1..=5.
        assert_eq!(ramp(8, 6).window4_origins(), 15);
        let mut count = 0;
        let img = ramp(8, 6);
        for i in 1..=3 {
            for j in 1..=5 {
                img.window4(i, j).unwrap();
                count += 1;
            }
        }
        assert_eq!(count, 15);
    }

    #[test]
    fn window4_reads_expected_block() {
        let img = ramp(6, 5);
        let block = img.window4(2, 3).unwrap();
        for dr in 0..4 {
            for dc in 0..4 {
                assert_eq!(block[dr * 4 + dc], img.at(1 + dr, 2 + dc));
            }
        }
    }

    #[test]
    fn window4_errors_name_the_bound() {
        let img = ramp(6, 5);
        let err = img.window4(3, 1).unwrap_err().to_string();
        assert!(err.contains("row index 3"), "{err}");
        assert!(err.contains("1..=2"), "{err}");
        let err = img.window4(1, 4).unwrap_err().to_string();
        assert!(err.contains("column index 4"), "{err}");
        assert!(err.contains("1..=3"), "{err}");
        let small = ramp(3, 3);
        assert!(matches!(small.window4(1, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = ramp(7, 5);
        write_pgm(&img, &path).unwrap();
        let back = GrayImage::load(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_rejects_truncation_and_bad_magic() {
        let img = ramp(4, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        write_pgm(&img, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_pgm(&bytes).is_err());
        assert!(read_pgm(b"P6 2 2 255 aaaa").is_err());
    }

    #[test]
    fn png_decode_matches_luma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let mut rgb = image::RgbImage::new(6, 4);
        for (x, y, px) in rgb.enumerate_pixels_mut() {
            *px = image::Rgb([(x * 40) as u8, (y * 60) as u8, 200]);
        }
        rgb.save(&path).unwrap();
        let img = GrayImage::load(&path).unwrap();
        assert_eq!(img.width(), 6);
        assert_eq!(img.height(), 4);
        assert_eq!(img.at(0, 0), luma(0, 0, 200));
        assert_eq!(img.at(3, 5), luma(200, 180, 200));
    }

    #[test]
    fn bmp_decode_matches_luma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.bmp");
        let mut rgb = image::RgbImage::new(5, 5);
        for (x, y, px) in rgb.enumerate_pixels_mut() {
            *px = image::Rgb([(x * 50) as u8, 10, (y * 30) as u8]);
        }
        rgb.save(&path).unwrap();
        let img = GrayImage::load(&path).unwrap();
        assert_eq!((img.width(), img.height()), (5, 5));
        assert_eq!(img.at(2, 4), luma(200, 10, 60));
    }

    #[test]
    fn jpeg_decodes_with_correct_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.jpg");
        let rgb = image::RgbImage::from_pixel(9, 7, image::Rgb([120, 80, 40]));
        rgb.save(&path).unwrap();
        let img = GrayImage::load(&path).unwrap();
        assert_eq!((img.width(), img.height()), (9, 7));
        // lossy format: intensities only close to the luma of the source
        let expected = i16::from(luma(120, 80, 40));
        for &v in img.data() {
            assert!((i16::from(v) - expected).abs() <= 4, "{v} vs {expected}");
        }
    }

    #[test]
    fn unsupported_extension_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.tiff");
        fs::write(&path, b"whatever").unwrap();
        assert!(matches!(
            GrayImage::load(&path),
            Err(Error::Decode { .. })
        ));
        assert!(!GrayImage::supported_extension(&path));
    }
}
