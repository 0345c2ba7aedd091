//! Visual check of where the measurement lines landed.

use std::path::Path;

use font8x8::{UnicodeFonts, BASIC_FONTS};
use image::Rgb;

use crate::error::Result;
use crate::ingest::RgbImage;
use crate::pipeline::Analysis;
use crate::silhouette::RowSpan;

const LINE_COLORS: [Rgb<u8>; 3] = [Rgb([230, 40, 40]), Rgb([40, 200, 60]), Rgb([40, 90, 230])];
const TEXT_SCALE: u32 = 2;

fn put(img: &mut image::RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn draw_span(img: &mut image::RgbImage, span: &RowSpan, c: Rgb<u8>) {
    for dy in -1..=1 {
        for x in span.left..=span.right {
            put(img, i64::from(x), i64::from(span.row) + dy, c);
        }
    }
}

fn draw_text(img: &mut image::RgbImage, x: i64, y: i64, text: &str, c: Rgb<u8>) {
    let step = 8 * i64::from(TEXT_SCALE);
    for (i, ch) in text.chars().enumerate() {
        let Some(glyph) = BASIC_FONTS.get(ch) else {
            continue;
        };
        let ox = x + i as i64 * step;
        for (gy, bits) in glyph.iter().enumerate() {
            for gx in 0..8 {
                if bits & (1 << gx) == 0 {
                    continue;
                }
                for sy in 0..i64::from(TEXT_SCALE) {
                    for sx in 0..i64::from(TEXT_SCALE) {
                        let px = ox + gx * i64::from(TEXT_SCALE) + sx;
                        let py = y + gy as i64 * i64::from(TEXT_SCALE) + sy;
                        put(img, px, py, c);
                    }
                }
            }
        }
    }
}

/// Copy of `image` with the bust, waist and hip lines drawn across their
/// spans and labelled with the measured value.
pub fn render_overlay(image: &RgbImage, analysis: &Analysis) -> image::RgbImage {
    let mut img = image.raster().clone();
    let m = &analysis.measurements;
    let lines = [
        ("bust", &analysis.lines.bust, m.bust),
        ("waist", &analysis.lines.waist, m.waist),
        ("hip", &analysis.lines.hip, m.hip),
    ];
    let glyph_h = 8 * i64::from(TEXT_SCALE);
    for ((name, span, value), color) in lines.into_iter().zip(LINE_COLORS) {
        draw_span(&mut img, span, color);
        let label = format!("{name}: {value:.1} cm");
        let text_w = label.len() as i64 * glyph_h;
        // right of the span when it fits, otherwise left of it
        let x = if i64::from(span.right) + 6 + text_w <= i64::from(img.width()) {
            i64::from(span.right) + 6
        } else {
            (i64::from(span.left) - 6 - text_w).max(0)
        };
        draw_text(&mut img, x, i64::from(span.row) - glyph_h / 2, &label, color);
    }
    img
}

pub fn save_overlay(image: &RgbImage, analysis: &Analysis, path: impl AsRef<Path>) -> Result<()> {
    RgbImage::new(render_overlay(image, analysis))?.save_png(path)
}
