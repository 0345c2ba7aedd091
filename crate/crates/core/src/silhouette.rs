//! Person mask cleanup and row-width scanning.
//!
//! Components and holes use 4-connectivity throughout.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{BoundingBox, LabelMap, PERSON_CLASS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!(
                "mask of {width}x{height} needs {} bits, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.idx(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.idx(x, y);
        self.bits[i] = value;
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn row(&self, y: u32) -> &[bool] {
        let w = self.width as usize;
        &self.bits[y as usize * w..(y as usize + 1) * w]
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    /// Tight inclusive box around the true pixels.
    pub fn bounding_box(&self) -> Result<BoundingBox> {
        let mut b: Option<BoundingBox> = None;
        for y in 0..self.height {
            for (x, _) in self.row(y).iter().enumerate().filter(|(_, &v)| v) {
                let x = x as u32;
                b = Some(match b {
                    None => BoundingBox {
                        left: x,
                        top: y,
                        right: x,
                        bottom: y,
                    },
                    Some(b) => BoundingBox {
                        left: b.left.min(x),
                        top: b.top,
                        right: b.right.max(x),
                        bottom: y,
                    },
                });
            }
        }
        b.ok_or(Error::EmptyMask)
    }

    /// Mean column of all true pixels.
    pub fn centroid_column(&self) -> Result<f64> {
        let (mut sum, mut n) = (0.0f64, 0usize);
        for y in 0..self.height {
            for (x, _) in self.row(y).iter().enumerate().filter(|(_, &v)| v) {
                sum += x as f64;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(sum / n as f64)
    }

    /// 1-bit grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::One);
        let stride = (self.width as usize).div_ceil(8);
        let mut packed = vec![0u8; stride * self.height as usize];
        for y in 0..self.height as usize {
            for (x, _) in self.row(y as u32).iter().enumerate().filter(|(_, &v)| v) {
                packed[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
        let fail = |e: png::EncodingError| Error::InvalidInput(format!("{}: {e}", path.display()));
        let mut writer = encoder.write_header().map_err(fail)?;
        writer.write_image_data(&packed).map_err(fail)?;
        writer.finish().map_err(fail)
    }

    /// Reads any grayscale PNG; nonzero pixels are true.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?
            .into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw().into_iter().map(|v| v > 0).collect())
    }
}

/// One contiguous run of true pixels on a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSpan {
    pub row: u32,
    pub left: u32,
    pub right: u32,
    pub width_px: u32,
}

impl RowSpan {
    fn new(row: u32, left: u32, right: u32) -> Self {
        Self {
            row,
            left,
            right,
            width_px: right - left + 1,
        }
    }

    pub fn center(&self) -> f64 {
        (f64::from(self.left) + f64::from(self.right)) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SilhouetteConfig {
    /// Apply a 3x3-cross morphological opening before component selection.
    pub opening: bool,
}

pub fn binarize_person(lm: &LabelMap) -> Result<BinaryMask> {
    let bits: Vec<bool> = lm.labels().iter().map(|&l| l == PERSON_CLASS).collect();
    if !bits.iter().any(|&b| b) {
        return Err(Error::NoPersonDetected);
    }
    BinaryMask::new(lm.width(), lm.height(), bits)
}

fn neighbours4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (y > 0).then(|| i - w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// Labels 4-connected components of pixels equal to `value`, in raster order
/// of each component's first pixel. Returns per-pixel labels (`usize::MAX`
/// for other pixels) and component sizes.
fn label_components(m: &BinaryMask, value: bool) -> (Vec<usize>, Vec<usize>) {
    let (w, h) = (m.width as usize, m.height as usize);
    let mut labels = vec![usize::MAX; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if m.bits[start] != value || labels[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        labels[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            for n in neighbours4(i, w, h) {
                if m.bits[n] == value && labels[n] == usize::MAX {
                    labels[n] = id;
                    queue.push_back(n);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Number of 4-connected true components.
pub fn component_count(m: &BinaryMask) -> usize {
    label_components(m, true).1.len()
}

/// Keeps the largest 4-connected component; ties go to the component whose
/// first pixel comes first in raster order (topmost, then leftmost).
pub fn largest_component(m: &BinaryMask) -> Result<BinaryMask> {
    let (labels, sizes) = label_components(m, true);
    let keep = sizes
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, usize)>, (id, &size)| match best {
            Some((_, s)) if s >= size => best,
            _ => Some((id, size)),
        })
        .map(|(id, _)| id)
        .ok_or(Error::EmptyMask)?;
    BinaryMask::new(
        m.width,
        m.height,
        labels.into_iter().map(|l| l == keep).collect(),
    )
}

/// Marks false pixels 4-connected to the border through false pixels.
fn border_background(m: &BinaryMask) -> Vec<bool> {
    let (w, h) = (m.width as usize, m.height as usize);
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let border = (0..w)
        .flat_map(|x| [x, (h - 1) * w + x])
        .chain((0..h).flat_map(|y| [y * w, y * w + w - 1]));
    for i in border {
        if !m.bits[i] && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for n in neighbours4(i, w, h) {
            if !m.bits[n] && !outside[n] {
                outside[n] = true;
                queue.push_back(n);
            }
        }
    }
    outside
}

/// Sets every false region not 4-connected to the border.
pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    if m.width == 0 || m.height == 0 {
        return m.clone();
    }
    let outside = border_background(m);
    BinaryMask {
        width: m.width,
        height: m.height,
        bits: outside.into_iter().map(|o| !o).collect(),
    }
}

/// Count of false pixels not connected to the border.
pub fn hole_pixel_count(m: &BinaryMask) -> usize {
    if m.width == 0 || m.height == 0 {
        return 0;
    }
    border_background(m)
        .iter()
        .zip(&m.bits)
        .filter(|(&o, &b)| !o && !b)
        .count()
}

fn cross_filter(m: &BinaryMask, erode: bool) -> BinaryMask {
    let (w, h) = (m.width as usize, m.height as usize);
    let bits = (0..w * h)
        .map(|i| {
            let own = m.bits[i];
            let (x, y) = (i % w, i / w);
            // outside the image counts as background
            let full = x > 0 && y > 0 && x + 1 < w && y + 1 < h;
            let mut it = neighbours4(i, w, h).map(|n| m.bits[n]);
            if erode {
                own && full && it.all(|b| b)
            } else {
                own || it.any(|b| b)
            }
        })
        .collect();
    BinaryMask {
        width: m.width,
        height: m.height,
        bits,
    }
}

/// Erosion then dilation with a 3x3 cross.
pub fn open_cross(m: &BinaryMask) -> BinaryMask {
    cross_filter(&cross_filter(m, true), false)
}

/// binarize → (optional opening) → largest component → fill holes.
pub fn clean_person_mask(lm: &LabelMap, cfg: &SilhouetteConfig) -> Result<BinaryMask> {
    let mut mask = binarize_person(lm)?;
    if cfg.opening {
        mask = open_cross(&mask);
        if mask.count() == 0 {
            return Err(Error::NoPersonDetected);
        }
    }
    Ok(fill_holes(&largest_component(&mask)?))
}

pub fn mask_height_px(m: &BinaryMask) -> Result<u32> {
    let rows: Vec<u32> = (0..m.height)
        .filter(|&y| m.row(y).iter().any(|&b| b))
        .collect();
    match (rows.first(), rows.last()) {
        (Some(top), Some(bottom)) => Ok(bottom - top + 1),
        _ => Err(Error::EmptyMask),
    }
}

/// Maximal runs of true pixels on `row`, left to right.
pub fn row_runs(m: &BinaryMask, row: u32) -> Vec<RowSpan> {
    let mut runs = Vec::new();
    let mut start = None;
    for (x, &b) in m.row(row).iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(x as u32),
            (false, Some(s)) => {
                runs.push(RowSpan::new(row, s, x as u32 - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(RowSpan::new(row, s, m.width - 1));
    }
    runs
}

/// Picks from `runs` the one containing `centroid`, else the one whose centre
/// is nearest (leftmost on ties).
pub fn select_central_run(runs: &[RowSpan], centroid: f64) -> Option<RowSpan> {
    if let Some(r) = runs
        .iter()
        .find(|r| f64::from(r.left) <= centroid && centroid <= f64::from(r.right))
    {
        return Some(*r);
    }
    runs.iter().copied().fold(None, |best, r| match best {
        Some(b) if (b.center() - centroid).abs() <= (r.center() - centroid).abs() => Some(b),
        _ => Some(r),
    })
}

/// The torso run on `row`: the run containing the mask's centroid column,
/// so arms hanging beside the body do not count toward the width.
pub fn central_row_span(m: &BinaryMask, row: u32) -> Result<RowSpan> {
    if row >= m.height {
        return Err(Error::EmptyRow(row as usize));
    }
    let runs = row_runs(m, row);
    if runs.is_empty() {
        return Err(Error::EmptyRow(row as usize));
    }
    let centroid = m.centroid_column()?;
    Ok(select_central_run(&runs, centroid).expect("runs is non-empty"))
}

/// Same as [`central_row_span`] with a precomputed centroid column.
pub(crate) fn central_row_span_at(m: &BinaryMask, row: u32, centroid: f64) -> Option<RowSpan> {
    if row >= m.height {
        return None;
    }
    select_central_run(&row_runs(m, row), centroid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_mask(w: u32, h: u32, rects: &[(u32, u32, u32, u32)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            rects
                .iter()
                .any(|&(x0, y0, x1, y1)| x >= x0 && x <= x1 && y >= y0 && y <= y1)
        })
    }

    #[test]
    fn binarize_keeps_only_person() {
        let lm = LabelMap::new(3, 1, vec![0, 8, 15]).unwrap();
        let m = binarize_person(&lm).unwrap();
        assert_eq!(m.bits(), &[false, false, true]);
        let empty = LabelMap::new(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(binarize_person(&empty), Err(Error::NoPersonDetected)));
    }

    #[test]
    fn largest_component_drops_speckle() {
        // 40x25 = 1000 px blob and a 5x6 = 30 px speckle
        let m = rect_mask(100, 100, &[(10, 10, 49, 34), (80, 80, 84, 85)]);
        let out = largest_component(&m).unwrap();
        assert_eq!(out.count(), 1000);
        assert!(!out.get(80, 80));
        assert_eq!(largest_component(&out).unwrap(), out);
    }

    #[test]
    fn largest_component_tie_prefers_topmost() {
        let m = rect_mask(100, 100, &[(50, 90, 59, 94), (0, 0, 9, 4)]);
        let out = largest_component(&m).unwrap();
        assert!(out.get(0, 0));
        assert!(!out.get(50, 90));
    }

    #[test]
    fn diagonal_pixels_are_separate() {
        let m = BinaryMask::new(2, 2, vec![true, false, false, true]).unwrap();
        assert_eq!(component_count(&m), 2);
    }

    #[test]
    fn fills_enclosed_hole_only() {
        let mut m = rect_mask(20, 20, &[(5, 5, 14, 14)]);
        for y in 8..11 {
            for x in 8..11 {
                m.set(x, y, false);
            }
        }
        assert_eq!(hole_pixel_count(&m), 9);
        let filled = fill_holes(&m);
        assert_eq!(filled.count(), 100);
        assert_eq!(fill_holes(&filled), filled);

        // notch open to the border stays open
        let u = rect_mask(10, 10, &[(0, 0, 9, 2), (0, 0, 2, 9), (7, 0, 9, 9)]);
        assert_eq!(fill_holes(&u), u);
    }

    #[test]
    fn mask_height() {
        let m = rect_mask(10, 1000, &[(2, 100, 4, 999)]);
        assert_eq!(mask_height_px(&m).unwrap(), 900);
        let single = rect_mask(10, 10, &[(3, 3, 3, 3)]);
        assert_eq!(mask_height_px(&single).unwrap(), 1);
        let column = rect_mask(10, 50, &[(3, 0, 3, 49)]);
        assert_eq!(mask_height_px(&column).unwrap(), 50);
        assert!(matches!(
            mask_height_px(&rect_mask(4, 4, &[])),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn central_run_selection() {
        let runs = [RowSpan::new(0, 100, 220), RowSpan::new(0, 300, 360)];
        let s = select_central_run(&runs, 160.0).unwrap();
        assert_eq!((s.left, s.right, s.width_px), (100, 220, 121));

        let runs = [RowSpan::new(0, 100, 150), RowSpan::new(0, 400, 450)];
        assert_eq!(select_central_run(&runs, 270.0).unwrap().left, 100);
        assert_eq!(select_central_run(&runs, 280.0).unwrap().left, 400);
        // equidistant: leftmost
        assert_eq!(select_central_run(&runs, 275.0).unwrap().left, 100);
        assert_eq!(select_central_run(&runs, 276.0).unwrap().left, 400);
    }

    #[test]
    fn central_row_span_on_mask() {
        // torso 40..59 plus an arm 70..74 on row 10
        let m = rect_mask(100, 30, &[(40, 0, 59, 29), (70, 5, 74, 20)]);
        let s = central_row_span(&m, 10).unwrap();
        assert_eq!((s.left, s.right, s.width_px), (40, 59, 20));
        assert_eq!(row_runs(&m, 10).len(), 2);
        let empty = rect_mask(100, 30, &[(40, 0, 59, 9)]);
        assert!(matches!(central_row_span(&empty, 20), Err(Error::EmptyRow(20))));
        assert!(central_row_span(&empty, 30).is_err());
    }

    #[test]
    fn opening_removes_thin_lines() {
        let m = rect_mask(30, 30, &[(5, 5, 20, 20), (21, 12, 28, 12)]);
        let opened = open_cross(&m);
        assert!(!opened.get(25, 12));
        assert!(opened.get(12, 12));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = rect_mask(13, 7, &[(1, 1, 9, 5), (12, 0, 12, 6)]);
        let p = dir.path().join("m.png");
        m.save_png(&p).unwrap();
        assert_eq!(BinaryMask::load_png(&p).unwrap(), m);
    }

    #[test]
    fn bbox_and_centroid() {
        let m = rect_mask(50, 50, &[(10, 5, 19, 44)]);
        let b = m.bounding_box().unwrap();
        assert_eq!((b.left, b.top, b.right, b.bottom), (10, 5, 19, 44));
        assert_eq!(m.centroid_column().unwrap(), 14.5);
    }
}
