//! Reference implementations written separately from the library, used as
//! test oracles. Shared with the CLI crate's acceptance target via `#[path]`.
#![allow(dead_code)]

use std::collections::VecDeque;

/// Body-shape label chosen by the five ordered rules, on circumference-unit
/// thresholds multiplied by `k`.
pub fn shape_label(bust: f64, waist: f64, hip: f64, k: f64) -> &'static str {
    let (bh, hb, bw, hw) = (bust - hip, hip - bust, bust - waist, hip - waist);
    let hourglass = bh <= 2.54 * k && hb < 9.14 * k && (bw >= 22.86 * k || hw >= 25.40 * k);
    let spoon = hb > 5.08 * k && hw >= 17.78 * k;
    let triangle = hb >= 9.14 * k && hw < 22.86 * k;
    let inverted = bh >= 9.14 * k && bw < 22.86 * k;
    match (hourglass, spoon, triangle, inverted) {
        (true, _, _, _) => "Hourglass",
        (false, true, _, _) => "Spoon",
        (false, false, true, _) => "Triangle",
        (false, false, false, true) => "InvertedTriangle",
        _ => "Rectangle",
    }
}

/// Row-major boolean grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub w: usize,
    pub h: usize,
    pub cells: Vec<bool>,
}

impl Grid {
    pub fn new(w: usize, h: usize) -> Self {
        Grid {
            w,
            h,
            cells: vec![false; w * h],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.w + x]
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = (i % self.w, i / self.w);
        let mut out = Vec::with_capacity(4);
        if x > 0 {
            out.push(i - 1);
        }
        if x + 1 < self.w {
            out.push(i + 1);
        }
        if y > 0 {
            out.push(i - self.w);
        }
        if y + 1 < self.h {
            out.push(i + self.w);
        }
        out.into_iter()
    }

    /// 4-connected components of cells equal to `value`, each as a sorted
    /// index list, ordered by their first cell in raster order.
    pub fn components(&self, value: bool) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.cells.len()];
        let mut comps = Vec::new();
        for start in 0..self.cells.len() {
            if seen[start] || self.cells[start] != value {
                continue;
            }
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                for n in self.neighbours(i) {
                    if !seen[n] && self.cells[n] == value {
                        seen[n] = true;
                        comp.push(n);
                        queue.push_back(n);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Background components that do not touch the border.
    pub fn holes(&self) -> Vec<Vec<usize>> {
        self.components(false)
            .into_iter()
            .filter(|c| {
                !c.iter().any(|&i| {
                    let (x, y) = (i % self.w, i / self.w);
                    x == 0 || y == 0 || x + 1 == self.w || y + 1 == self.h
                })
            })
            .collect()
    }

    /// Largest component (earliest in raster order on ties) with its holes
    /// filled.
    pub fn cleaned(&self) -> Grid {
        let mut out = Grid::new(self.w, self.h);
        let comps = self.components(true);
        let Some(best) = comps
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(_, c)| c)
        else {
            return out;
        };
        for &i in best {
            out.cells[i] = true;
        }
        for hole in out.holes() {
            for i in hole {
                out.cells[i] = true;
            }
        }
        out
    }
}

/// Perimeter of the ellipse with semi-axes `a`, `b` by composite Simpson
/// integration of the arc-length integrand over a quarter turn.
pub fn ellipse_perimeter_numeric(a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let f = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    let mut s = f(0.0) + f(std::f64::consts::FRAC_PI_2);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    4.0 * s * h / 3.0
}
