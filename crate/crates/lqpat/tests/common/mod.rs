//! Shared fixtures and the naive reference encoders used to cross-check the
//! production descriptors. The reference code transcribes each comparison
//! term one by one with one-based indexing and shares no helpers with the
//! library.

#![allow(dead_code)]

use lqpat::dataset::{LabeledDataset, Record};
use lqpat::GrayImage;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct OracleQuadruple {
    pub a1: u16,
    pub a2: u16,
    pub b1: u16,
    pub b2: u16,
}

impl OracleQuadruple {
    pub fn a(&self) -> u8 {
        (self.a1 + self.a2) as u8
    }

    pub fn b(&self) -> u8 {
        (self.b1 + self.b2) as u8
    }
}

/// Literal transcription of the four nibble sums at one-based origin (i, j).
pub fn oracle_quadruple(img: &GrayImage, i: usize, j: usize) -> OracleQuadruple {
    let ii = |r: usize, c: usize| -> u8 { img.data()[(r - 1) * img.width() + (c - 1)] };
    fn c(e: u8, f: u8) -> u16 {
        if e <= f {
            0
        } else {
            1
        }
    }
    let a1 = 128 * c(ii(i, j), ii(i, j + 2))
        + 64 * c(ii(i, j + 1), ii(i, j + 3))
        + 32 * c(ii(i + 1, j), ii(i + 1, j + 2))
        + 16 * c(ii(i + 1, j + 1), ii(i + 1, j + 3));
    let a2 = 8 * c(ii(i, j + 2), ii(i + 2, j + 2))
        + 4 * c(ii(i, j + 3), ii(i + 2, j + 3))
        + 2 * c(ii(i + 1, j + 2), ii(i + 3, j + 2))
        + c(ii(i + 1, j + 3), ii(i + 3, j + 3));
    let b1 = 128 * c(ii(i + 2, j + 2), ii(i + 2, j))
        + 64 * c(ii(i + 2, j + 3), ii(i + 2, j + 1))
        + 32 * c(ii(i + 3, j + 2), ii(i + 3, j))
        + 16 * c(ii(i + 3, j + 3), ii(i + 3, j + 1));
    let b2 = 8 * c(ii(i + 2, j), ii(i, j))
        + 4 * c(ii(i + 2, j + 1), ii(i, j + 1))
        + 2 * c(ii(i + 3, j), ii(i + 1, j))
        + c(ii(i + 3, j + 1), ii(i + 1, j + 1));
    OracleQuadruple { a1, a2, b1, b2 }
}

/// Reference LBP: ring neighbors top-left first then clockwise, most
/// significant bit first, each bit set when neighbor - center > t.
pub fn oracle_lbp(img: &GrayImage, i: usize, j: usize, t: u8) -> u8 {
    let ii = |r: usize, c: usize| -> i32 { img.data()[(r - 1) * img.width() + (c - 1)] as i32 };
    let center = ii(i, j);
    let ring = [
        ii(i - 1, j - 1),
        ii(i - 1, j),
        ii(i - 1, j + 1),
        ii(i, j + 1),
        ii(i + 1, j + 1),
        ii(i + 1, j),
        ii(i + 1, j - 1),
        ii(i, j - 1),
    ];
    let mut code = 0u8;
    for (k, nbr) in ring.into_iter().enumerate() {
        if nbr - center > t as i32 {
            code |= 1 << (7 - k);
        }
    }
    code
}

/// Reference CSLBP: the four diametric ring pairs, first pair most
/// significant.
pub fn oracle_cslbp(img: &GrayImage, i: usize, j: usize, t: u8) -> u8 {
    let ii = |r: usize, c: usize| -> i32 { img.data()[(r - 1) * img.width() + (c - 1)] as i32 };
    let ring = [
        ii(i - 1, j - 1),
        ii(i - 1, j),
        ii(i - 1, j + 1),
        ii(i, j + 1),
        ii(i + 1, j + 1),
        ii(i + 1, j),
        ii(i + 1, j - 1),
        ii(i, j - 1),
    ];
    let mut code = 0u8;
    for k in 0..4 {
        if ring[k + 4] - ring[k] > t as i32 {
            code |= 1 << (3 - k);
        }
    }
    code
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(width: usize, height: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let data = (0..width * height)
        .map(|_| (rng.next_u32() & 0xFF) as u8)
        .collect();
    GrayImage::new(width, height, data).unwrap()
}

/// Draws `count` distinct intensities, ascending.
pub fn sorted_distinct_values(count: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    assert!(count <= 256);
    let mut all: Vec<u8> = (0..=255).collect();
    for i in (1..all.len()).rev() {
        let j = (rng.next_u32() as usize) % (i + 1);
        all.swap(i, j);
    }
    let mut picked = all[..count].to_vec();
    picked.sort_unstable();
    picked
}

/// Image whose pixels are drawn from the given palette.
pub fn random_palette_image(
    width: usize,
    height: usize,
    palette: &[u8],
    rng: &mut ChaCha8Rng,
) -> GrayImage {
    let data = (0..width * height)
        .map(|_| palette[(rng.next_u32() as usize) % palette.len()])
        .collect();
    GrayImage::new(width, height, data).unwrap()
}

/// Applies a strictly increasing value map `palette[k] -> target[k]`.
pub fn remap_image(img: &GrayImage, palette: &[u8], target: &[u8]) -> GrayImage {
    assert_eq!(palette.len(), target.len());
    let data = img
        .data()
        .iter()
        .map(|v| {
            let k = palette.iter().position(|p| p == v).expect("palette value");
            target[k]
        })
        .collect();
    GrayImage::new(img.width(), img.height(), data).unwrap()
}

/// Column-driven image with interleaved runs: even columns ascend from 0,
/// odd columns descend from 205, identical rows. Horizontal comparisons
/// then alternate by column parity while vertical comparisons all tie, so
/// each LQPAT code plane takes exactly two values. With width and height 11
/// the two codes split 32/32 per plane and each plane's entropy is 1 bit.
pub fn striped_entropy_image(width: usize, height: usize) -> GrayImage {
    let column = |c: usize| -> u8 {
        if c.is_multiple_of(2) {
            (c / 2) as u8
        } else {
            (205 - c / 2) as u8
        }
    };
    let data = (0..width * height).map(|k| column(k % width)).collect();
    GrayImage::new(width, height, data).unwrap()
}

/// 5 classes x 4 identical copies of a class-distinct random image.
pub fn duplicates_image_dataset(seed: u64) -> LabeledDataset<GrayImage> {
    let mut rng = rng(seed);
    let mut records = Vec::new();
    for class in 0..5 {
        let base = random_image(12, 12, &mut rng);
        for copy in 0..4 {
            records.push(Record {
                id: format!("c{class}/{copy}.pgm"),
                label: format!("c{class}"),
                payload: base.clone(),
            });
        }
    }
    LabeledDataset::from_records(records).unwrap()
}
