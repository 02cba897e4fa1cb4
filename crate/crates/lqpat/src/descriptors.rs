//! Local-pattern descriptors: LQPAT, LBP and CSLBP.
//!
//! LQPAT slides a 4x4 window over the image with stride 1. The window is
//! split into four 2x2 blocks (top-left, top-right, bottom-right,
//! bottom-left) and each pixel of one block is order-compared with the
//! corresponding pixel of the next block around the cycle. The comparisons
//! give two 8-bit codes per window:
//!
//! * code `a` — top-left vs top-right (high nibble, weights 2^7..2^4) then
//!   top-right vs bottom-right (low nibble, weights 2^3..2^0);
//! * code `b` — bottom-right vs bottom-left (high nibble) then bottom-left
//!   vs top-left (low nibble).
//!
//! The two code rasters ("A-image" and "B-image") are histogrammed into
//! 256 bins each and concatenated into a 512-bin feature vector. LBP and
//! CSLBP are the classic 3x3 baselines, included behind the same interface.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image_core::GrayImage;

/// Descriptor family selector. CLI names are the lowercase strings
/// `lqpat`, `lbp`, `cslbp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    Lqpat,
    Lbp,
    Cslbp,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 3] =
        [DescriptorKind::Lqpat, DescriptorKind::Lbp, DescriptorKind::Cslbp];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Lqpat => "lqpat",
            DescriptorKind::Lbp => "lbp",
            DescriptorKind::Cslbp => "cslbp",
        }
    }

    /// Histogram length of the final feature vector.
    pub fn bin_count(self) -> usize {
        match self {
            DescriptorKind::Lqpat => 512, // 256 x 2
            DescriptorKind::Lbp => 256,
            DescriptorKind::Cslbp => 16,
        }
    }

    /// Number of code rasters the descriptor emits.
    pub fn image_count(self) -> usize {
        match self {
            DescriptorKind::Lqpat => 2,
            DescriptorKind::Lbp | DescriptorKind::Cslbp => 1,
        }
    }

    /// Smallest raster the descriptor can encode (width, height).
    pub fn min_size(self) -> (usize, usize) {
        match self {
            DescriptorKind::Lqpat => (4, 4),
            DescriptorKind::Lbp | DescriptorKind::Cslbp => (3, 3),
        }
    }

    /// Order comparisons per encoded window or center.
    fn comparisons_per_site(self) -> u64 {
        match self {
            DescriptorKind::Lqpat => 16,
            DescriptorKind::Lbp => 8,
            DescriptorKind::Cslbp => 4,
        }
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lqpat" => Ok(DescriptorKind::Lqpat),
            "lbp" => Ok(DescriptorKind::Lbp),
            "cslbp" => Ok(DescriptorKind::Cslbp),
            other => Err(Error::Argument(format!(
                "unknown descriptor {other:?} (valid: lqpat, lbp, cslbp)"
            ))),
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full extraction configuration.
///
/// `threshold` feeds the thresholded comparison of LBP/CSLBP only; the
/// LQPAT comparison is a pure order test and ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DescriptorSpec {
    pub kind: DescriptorKind,
    pub threshold: u8,
    pub normalize: bool,
}

impl DescriptorSpec {
    /// Defaults: threshold 0, L1-normalized histograms.
    pub fn new(kind: DescriptorKind) -> Self {
        Self {
            kind,
            threshold: 0,
            normalize: true,
        }
    }

    pub fn with_threshold(mut self, threshold: u8) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn raw_counts(mut self) -> Self {
        self.normalize = false;
        self
    }
}

/// The two 8-bit codes one LQPAT window produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadrupleCodes {
    /// Top-left/top-right nibble joined with top-right/bottom-right nibble.
    pub a: u8,
    /// Bottom-right/bottom-left nibble joined with bottom-left/top-left nibble.
    pub b: u8,
}

/// Ordered set of code rasters produced by one extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureImageSet {
    pub descriptor: DescriptorKind,
    pub images: Vec<GrayImage>,
}

/// Histogram feature vector; bins are raw window counts or, when
/// `normalized`, counts divided by their total so the bins sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    bins: Vec<f64>,
    normalized: bool,
}

impl FeatureVector {
    pub fn new(bins: Vec<f64>, normalized: bool) -> Result<Self> {
        if bins.iter().any(|&b| !b.is_finite() || b < 0.0) {
            return Err(Error::Argument(
                "feature bins must be finite and non-negative".into(),
            ));
        }
        Ok(Self { bins, normalized })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

/// Order comparison: 1 when the first intensity strictly exceeds the
/// second, 0 otherwise (ties encode to 0).
#[inline]
pub fn encode_order(first: u8, second: u8) -> u8 {
    u8::from(first > second)
}

/// Thresholded comparison: 1 when the neighbor exceeds the reference by
/// more than `threshold`, 0 otherwise.
#[inline]
pub fn encode_threshold(reference: u8, neighbor: u8, threshold: u8) -> u8 {
    u8::from(i16::from(neighbor) - i16::from(reference) > i16::from(threshold))
}

// Pixel index pairs driving each code bit, as offsets into a row-major 4x4
// block. Entry order is bit 7 down to bit 0.
const A_PAIRS: [(usize, usize); 8] = [
    // high nibble: top-left block vs top-right block
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    // low nibble: top-right block vs bottom-right block
    (2, 10),
    (3, 11),
    (6, 14),
    (7, 15),
];

const B_PAIRS: [(usize, usize); 8] = [
    // high nibble: bottom-right block vs bottom-left block
    (10, 8),
    (11, 9),
    (14, 12),
    (15, 13),
    // low nibble: bottom-left block vs top-left block
    (8, 0),
    (9, 1),
    (12, 4),
    (13, 5),
];

#[inline]
fn lqpat_codes_counted(block: &[u8; 16], comparisons: &mut u64) -> QuadrupleCodes {
    let mut a = 0u8;
    let mut b = 0u8;
    for (bit, &(e, f)) in A_PAIRS.iter().enumerate() {
        *comparisons += 1;
        a |= encode_order(block[e], block[f]) << (7 - bit);
    }
    for (bit, &(e, f)) in B_PAIRS.iter().enumerate() {
        *comparisons += 1;
        b |= encode_order(block[e], block[f]) << (7 - bit);
    }
    QuadrupleCodes { a, b }
}

/// Encodes one 4x4 window into its two LQPAT codes.
pub fn lqpat_codes(block: &[u8; 16]) -> QuadrupleCodes {
    let mut n = 0;
    lqpat_codes_counted(block, &mut n)
}

// LBP ring around the center, top-left first then clockwise. The first
// offset is the most significant bit; CSLBP pairs offset k with offset k+4.
const RING: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

fn interior_center(img: &GrayImage, i: usize, j: usize) -> Result<(usize, usize)> {
    let (m, n) = (img.height(), img.width());
    if m < 3 || n < 3 {
        return Err(Error::Dimension(format!(
            "image {n}x{m} too small for a 3x3 neighborhood; minimum 3x3"
        )));
    }
    if i < 2 || i > m - 1 {
        return Err(Error::Index(format!(
            "center row {i} outside 2..={} (height {m})",
            m - 1
        )));
    }
    if j < 2 || j > n - 1 {
        return Err(Error::Index(format!(
            "center column {j} outside 2..={} (width {n})",
            n - 1
        )));
    }
    Ok((i - 1, j - 1))
}

fn lbp_code_counted(
    img: &GrayImage,
    center: (usize, usize),
    threshold: u8,
    comparisons: &mut u64,
) -> u8 {
    let (r, c) = center;
    let reference = img.at(r, c);
    let mut code = 0u8;
    for (bit, &(dr, dc)) in RING.iter().enumerate() {
        let nbr = img.at((r as isize + dr) as usize, (c as isize + dc) as usize);
        *comparisons += 1;
        code |= encode_threshold(reference, nbr, threshold) << (7 - bit);
    }
    code
}

fn cslbp_code_counted(
    img: &GrayImage,
    center: (usize, usize),
    threshold: u8,
    comparisons: &mut u64,
) -> u8 {
    let (r, c) = center;
    let mut code = 0u8;
    for bit in 0..4 {
        let (dr1, dc1) = RING[bit];
        let (dr2, dc2) = RING[bit + 4];
        let first = img.at((r as isize + dr1) as usize, (c as isize + dc1) as usize);
        let second = img.at((r as isize + dr2) as usize, (c as isize + dc2) as usize);
        *comparisons += 1;
        code |= encode_threshold(first, second, threshold) << (3 - bit);
    }
    code
}

/// 8-bit LBP code at one-based center `(i, j)`; all eight neighbors must be
/// in bounds. The top-left neighbor is the most significant bit and the
/// ring proceeds clockwise.
pub fn lbp_code(img: &GrayImage, i: usize, j: usize, threshold: u8) -> Result<u8> {
    let center = interior_center(img, i, j)?;
    let mut n = 0;
    Ok(lbp_code_counted(img, center, threshold, &mut n))
}

/// 4-bit CSLBP code at one-based center `(i, j)`: each bit compares a ring
/// pixel with its diametric opposite, top-left/bottom-right pair first.
pub fn cslbp_code(img: &GrayImage, i: usize, j: usize, threshold: u8) -> Result<u8> {
    let center = interior_center(img, i, j)?;
    let mut n = 0;
    Ok(cslbp_code_counted(img, center, threshold, &mut n))
}

fn check_min_size(img: &GrayImage, kind: DescriptorKind) -> Result<()> {
    let (min_w, min_h) = kind.min_size();
    if img.width() < min_w || img.height() < min_h {
        return Err(Error::Dimension(format!(
            "image {}x{} too small for {}; minimum {min_w}x{min_h}",
            img.width(),
            img.height(),
            kind
        )));
    }
    Ok(())
}

fn feature_images_counted(
    img: &GrayImage,
    spec: &DescriptorSpec,
) -> Result<(FeatureImageSet, u64)> {
    check_min_size(img, spec.kind)?;
    let (m, n) = (img.height(), img.width());
    let mut comparisons = 0u64;
    let images = match spec.kind {
        DescriptorKind::Lqpat => {
            let (out_h, out_w) = (m - 3, n - 3);
            let mut plane_a = vec![0u8; out_h * out_w];
            let mut plane_b = vec![0u8; out_h * out_w];
            for r0 in 0..out_h {
                for c0 in 0..out_w {
                    let mut block = [0u8; 16];
                    for dr in 0..4 {
                        for dc in 0..4 {
                            block[dr * 4 + dc] = img.at(r0 + dr, c0 + dc);
                        }
                    }
                    let codes = lqpat_codes_counted(&block, &mut comparisons);
                    plane_a[r0 * out_w + c0] = codes.a;
                    plane_b[r0 * out_w + c0] = codes.b;
                }
            }
            vec![
                GrayImage::new(out_w, out_h, plane_a)?,
                GrayImage::new(out_w, out_h, plane_b)?,
            ]
        }
        DescriptorKind::Lbp | DescriptorKind::Cslbp => {
            let (out_h, out_w) = (m - 2, n - 2);
            let mut plane = vec![0u8; out_h * out_w];
            for r in 0..out_h {
                for c in 0..out_w {
                    let center = (r + 1, c + 1);
                    plane[r * out_w + c] = match spec.kind {
                        DescriptorKind::Lbp => {
                            lbp_code_counted(img, center, spec.threshold, &mut comparisons)
                        }
                        _ => cslbp_code_counted(img, center, spec.threshold, &mut comparisons),
                    };
                }
            }
            vec![GrayImage::new(out_w, out_h, plane)?]
        }
    };
    Ok((
        FeatureImageSet {
            descriptor: spec.kind,
            images,
        },
        comparisons,
    ))
}

/// Encodes every valid window (stride 1, borders skipped) into the
/// descriptor's code rasters.
pub fn feature_images(img: &GrayImage, spec: &DescriptorSpec) -> Result<FeatureImageSet> {
    feature_images_counted(img, spec).map(|(set, _)| set)
}

/// A feature vector together with the number of order comparisons that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub features: FeatureVector,
    pub comparisons: u64,
}

fn histogram(img: &GrayImage, bins: usize) -> Vec<f64> {
    let mut counts = vec![0u64; bins];
    for &code in img.data() {
        counts[code as usize] += 1;
    }
    counts.into_iter().map(|c| c as f64).collect()
}

/// Extracts the histogram feature vector, reporting the comparison count.
pub fn extract_instrumented(img: &GrayImage, spec: &DescriptorSpec) -> Result<Extraction> {
    let (set, comparisons) = feature_images_counted(img, spec)?;
    let per_image_bins = match spec.kind {
        DescriptorKind::Cslbp => 16,
        _ => 256,
    };
    let mut bins = Vec::with_capacity(spec.kind.bin_count());
    for plane in &set.images {
        bins.extend(histogram(plane, per_image_bins));
    }
    assert_eq!(bins.len(), spec.kind.bin_count());
    if spec.normalize {
        let total: f64 = bins.iter().sum();
        if total > 0.0 {
            for b in &mut bins {
                *b /= total;
            }
        }
    }
    Ok(Extraction {
        features: FeatureVector::new(bins, spec.normalize)?,
        comparisons,
    })
}

/// Extracts the histogram feature vector for one image.
pub fn extract(img: &GrayImage, spec: &DescriptorSpec) -> Result<FeatureVector> {
    extract_instrumented(img, spec).map(|e| e.features)
}

/// Closed-form number of order comparisons a full extraction performs on a
/// `width` x `height` image: comparisons per window times window count.
pub fn count_comparisons(spec: &DescriptorSpec, width: usize, height: usize) -> u64 {
    let sites = match spec.kind {
        DescriptorKind::Lqpat => height.saturating_sub(3) * width.saturating_sub(3),
        DescriptorKind::Lbp | DescriptorKind::Cslbp => {
            height.saturating_sub(2) * width.saturating_sub(2)
        }
    };
    sites as u64 * spec.kind.comparisons_per_site()
}
