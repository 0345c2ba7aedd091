//! Segmentation-style label noise around a known person mask.
//!
//! Every perturbation here is one the mask cleanup must undo exactly: the
//! cleaned mask of a noisy label map equals the clean person mask, provided
//! that mask is a single 4-connected component without holes.

use rand::Rng;

use crate::inference::{LabelMap, NUM_VOC_CLASSES, PERSON_CLASS};
use crate::silhouette::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Detached person-class blobs, each at least 2 px from the person.
    pub speckles: usize,
    /// Square blobs of non-person classes placed on the background.
    pub other_blobs: usize,
    /// Background holes punched strictly inside the person.
    pub holes: usize,
    /// Largest blob or hole side length in pixels.
    pub max_size: u32,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            speckles: 12,
            other_blobs: 6,
            holes: 6,
            max_size: 3,
        }
    }
}

fn square(x: u32, y: u32, side: u32, w: u32, h: u32) -> impl Iterator<Item = (u32, u32)> {
    (y..(y + side).min(h)).flat_map(move |yy| (x..(x + side).min(w)).map(move |xx| (xx, yy)))
}

/// True when no pixel of `m` lies within Chebyshev distance `d` of the square.
fn clear_of(m: &BinaryMask, x: u32, y: u32, side: u32, d: u32) -> bool {
    let x0 = x.saturating_sub(d);
    let y0 = y.saturating_sub(d);
    let x1 = (x + side - 1 + d).min(m.width() - 1);
    let y1 = (y + side - 1 + d).min(m.height() - 1);
    (y0..=y1).all(|yy| (x0..=x1).all(|xx| !m.get(xx, yy)))
}

/// True when the square plus a 1 px ring lies inside `m`.
fn inside(m: &BinaryMask, x: u32, y: u32, side: u32) -> bool {
    if x == 0 || y == 0 || x + side >= m.width() || y + side >= m.height() {
        return false;
    }
    (y - 1..=y + side).all(|yy| (x - 1..=x + side).all(|xx| m.get(xx, yy)))
}

/// Builds a label map whose person class is `person` plus the requested
/// noise. Placement attempts that do not fit are skipped, so the counts are
/// upper bounds.
pub fn noisy_labels(person: &BinaryMask, spec: &NoiseSpec, rng: &mut impl Rng) -> LabelMap {
    let (w, h) = (person.width(), person.height());
    let side_max = spec.max_size.max(1);
    let mut labels: Vec<u8> = person
        .bits()
        .iter()
        .map(|&b| if b { PERSON_CLASS } else { 0 })
        .collect();
    // all person-class pixels placed so far; speckles keep their distance from each other too
    let mut occupied = person.clone();
    let attempts = 50;

    for _ in 0..spec.other_blobs {
        for _ in 0..attempts {
            let side = rng.gen_range(1..=side_max);
            let (x, y) = (rng.gen_range(0..w), rng.gen_range(0..h));
            if !clear_of(person, x, y, side, 0) {
                continue;
            }
            let class = loop {
                let c = rng.gen_range(1..NUM_VOC_CLASSES as u8);
                if c != PERSON_CLASS {
                    break c;
                }
            };
            for (xx, yy) in square(x, y, side, w, h) {
                labels[(yy * w + xx) as usize] = class;
            }
            break;
        }
    }

    for _ in 0..spec.speckles {
        for _ in 0..attempts {
            let side = rng.gen_range(1..=side_max);
            let (x, y) = (rng.gen_range(0..w), rng.gen_range(0..h));
            if x + side > w || y + side > h || !clear_of(&occupied, x, y, side, 2) {
                continue;
            }
            for (xx, yy) in square(x, y, side, w, h) {
                labels[(yy * w + xx) as usize] = PERSON_CLASS;
                occupied.set(xx, yy, true);
            }
            break;
        }
    }

    let mut punched = person.clone();
    for _ in 0..spec.holes {
        for _ in 0..attempts {
            let side = rng.gen_range(1..=side_max);
            let (x, y) = (rng.gen_range(0..w), rng.gen_range(0..h));
            if !inside(&punched, x, y, side) {
                continue;
            }
            for (xx, yy) in square(x, y, side, w, h) {
                labels[(yy * w + xx) as usize] = 0;
                punched.set(xx, yy, false);
            }
            break;
        }
    }

    LabelMap::new(w, h, labels).expect("dimensions match the mask")
}
