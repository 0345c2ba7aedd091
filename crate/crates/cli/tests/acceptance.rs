//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Every check runs against the replay backend or test-side oracles; no
//! model runtime is needed.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bodyshape::anthropometry::px_to_cm;
use bodyshape::classifier::{classify, BodyShape, ClassifierConfig};
use bodyshape::evaluation::noise::{noisy_labels, NoiseSpec};
use bodyshape::evaluation::{compare_pair, synth_silhouette, SynthParams, DEFAULT_PAIR_BOUND_CM};
use bodyshape::inference::{decode_heatmaps, Affine2, Heatmaps, LabelMap, NUM_KEYPOINTS, PERSON_CLASS};
use bodyshape::silhouette::{clean_person_mask, mask_height_px, BinaryMask, SilhouetteConfig};
use bodyshape::{analyze_mask, validate_height, Convention, Measurements, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Waived(String),
}

use Verdict::*;

fn circ(b: f64, w: f64, h: f64) -> Measurements {
    Measurements::new(b, w, h, Convention::EstCircumference)
}

fn classifier_grid() -> Verdict {
    let start = Instant::now();
    let cfg = ClassifierConfig::default();
    let steps: Vec<f64> = (0..=140).map(|i| 60.0 + 0.5 * f64::from(i)).collect();
    let (mut n, mut mismatches, mut errors) = (0u64, 0u64, 0u64);
    for &b in &steps {
        for &w in &steps {
            for &h in &steps {
                n += 1;
                match classify(&circ(b, w, h), &cfg) {
                    Ok(s) if s.as_str() == oracle::shape_label(b, w, h, 1.0) => {}
                    Ok(_) => mismatches += 1,
                    Err(_) => errors += 1,
                }
            }
        }
    }
    let t = start.elapsed();
    let detail = format!("{n} triples, {mismatches} mismatches, {errors} errors, {:.1}s", t.as_secs_f64());
    if mismatches == 0 && errors == 0 && t < Duration::from_secs(60) {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn translation_invariance() -> Verdict {
    let cfg = ClassifierConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // 1/256 cm lattice keeps b + c exact in binary floating point
    let mut draw = || f64::from(rng.gen_range(60 * 256..=130 * 256)) / 256.0;
    let mut violations = 0;
    for _ in 0..10_000 {
        let (b, w, h) = (draw(), draw(), draw());
        let base = classify(&circ(b, w, h), &cfg).unwrap();
        for c in [-5.0, 5.0, 20.0] {
            if classify(&circ(b + c, w + c, h + c), &cfg).unwrap() != base {
                violations += 1;
            }
        }
    }
    let detail = format!("30000 shifted triples, {violations} violations");
    if violations == 0 {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn geometric_oracle() -> Verdict {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut width_ok, mut class_ok, mut seen) = (0, 0, [false; 5]);
    let n = 200;
    for i in 0..n {
        let planted = BodyShape::ALL[i % 5];
        let p = SynthParams::preset(planted, &cfg.anthropometry, &mut rng);
        let s = synth_silhouette(&p, &cfg).unwrap();
        let mask = clean_person_mask(&s.labels, &cfg.silhouette).unwrap();
        let a = analyze_mask(&mask, &s.keypoints, s.height, &cfg).unwrap();
        let tol = 2.0 * a.scale.scale;
        let m = &a.measurements;
        if (m.bust - s.truth.bust).abs() <= tol
            && (m.waist - s.truth.waist).abs() <= tol
            && (m.hip - s.truth.hip).abs() <= tol
        {
            width_ok += 1;
        }
        if a.shape == planted {
            class_ok += 1;
        }
        seen[planted.index()] = true;
    }
    let t = start.elapsed();
    let detail = format!(
        "{n} subjects, widths within 2 px: {width_ok}, class match: {class_ok}, {:.1}s",
        t.as_secs_f64()
    );
    if width_ok == n && class_ok == n && seen.iter().all(|&s| s) && t < Duration::from_secs(30) {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

/// Random person blobs of rectangles and ellipses with speckles, holes and
/// other-class regions layered on top.
fn random_noisy_labels(rng: &mut impl Rng) -> LabelMap {
    let (w, h) = (rng.gen_range(48..120u32), rng.gen_range(48..120u32));
    let mut labels = vec![0u8; (w * h) as usize];
    let paint = |labels: &mut Vec<u8>, class: u8, x0: u32, y0: u32, rw: u32, rh: u32, ellipse: bool| {
        for y in y0..(y0 + rh).min(h) {
            for x in x0..(x0 + rw).min(w) {
                let inside = !ellipse || {
                    let dx = (f64::from(x - x0) + 0.5) / f64::from(rw) - 0.5;
                    let dy = (f64::from(y - y0) + 0.5) / f64::from(rh) - 0.5;
                    dx * dx + dy * dy <= 0.25
                };
                if inside {
                    labels[(y * w + x) as usize] = class;
                }
            }
        }
    };
    for _ in 0..rng.gen_range(1..5) {
        let (x0, y0) = (rng.gen_range(0..w / 2), rng.gen_range(0..h / 2));
        let (rw, rh) = (rng.gen_range(6..w / 2), rng.gen_range(6..h / 2));
        let ellipse = rng.gen_bool(0.5);
        paint(&mut labels, PERSON_CLASS, x0, y0, rw, rh, ellipse);
    }
    // holes punched into the figure and speckles anywhere
    for _ in 0..rng.gen_range(0..15) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let class = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..21u8) };
        let s = rng.gen_range(1..4);
        paint(&mut labels, class, x0, y0, s, s, false);
    }
    for _ in 0..rng.gen_range(0..30) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let s = rng.gen_range(1..3);
        paint(&mut labels, PERSON_CLASS, x0, y0, s, s, false);
    }
    LabelMap::new(w, h, labels).unwrap()
}

fn mask_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut ok, mut holes_seen, mut multi_seen) = (0, 0, 0);
    let n = 1000;
    for _ in 0..n {
        let lm = random_noisy_labels(&mut rng);
        let raw = oracle::Grid {
            w: lm.width() as usize,
            h: lm.height() as usize,
            cells: lm.labels().iter().map(|&l| l == PERSON_CLASS).collect(),
        };
        multi_seen += usize::from(raw.components(true).len() > 1);
        holes_seen += usize::from(!raw.holes().is_empty());
        let cleaned = clean_person_mask(&lm, &SilhouetteConfig::default()).unwrap();
        let g = oracle::Grid {
            w: raw.w,
            h: raw.h,
            cells: cleaned.bits().to_vec(),
        };
        if g.components(true).len() == 1 && g.holes().is_empty() {
            ok += 1;
        }
    }
    let detail = format!(
        "{ok}/{n} masks with one component and no holes ({multi_seen} inputs fragmented, {holes_seen} with holes)"
    );
    if ok == n && multi_seen > 0 && holes_seen > 0 {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn px_to_cm_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let n = 2000;
    for _ in 0..n {
        let top = rng.gen_range(0..50u32);
        let extent = rng.gen_range(1..1500u32);
        let m = BinaryMask::from_fn(4, top + extent + 3, |x, y| x == 1 && (top..top + extent).contains(&y));
        let height = rng.gen_range(100.0..=230.0);
        let s = px_to_cm(validate_height(height).unwrap(), &m).unwrap();
        let px = mask_height_px(&m).unwrap();
        worst = worst.max((f64::from(px) * s.scale - height).abs() / height);
    }
    let detail = format!("{n} masks, worst relative error {worst:.2e}");
    if worst <= 1e-9 {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

const HW: usize = 48;
const HH: usize = 64;

/// One channel with a planted peak and chosen neighbour ordering, plus the
/// expected grid-space location worked out from the construction.
fn constructed_grid(rng: &mut impl Rng) -> (Vec<f32>, f64, f64) {
    let mut g: Vec<f32> = (0..HW * HH).map(|_| rng.gen_range(0.0..0.2)).collect();
    let (px, py) = (rng.gen_range(0..HW), rng.gen_range(0..HH));
    g[py * HW + px] = 0.9;
    // per axis: -1 lower neighbour wins, +1 upper wins, 0 tie
    let mut axis = |g: &mut Vec<f32>, p: usize, n: usize, idx: &dyn Fn(usize) -> usize| -> f64 {
        let has_lo = p > 0;
        let has_hi = p + 1 < n;
        let choice = rng.gen_range(-1..=1);
        if has_lo {
            g[idx(p - 1)] = if choice == -1 { 0.6 } else { 0.4 };
        }
        if has_hi {
            g[idx(p + 1)] = match choice {
                1 => 0.6,
                0 => 0.4,
                _ => 0.3,
            };
        }
        let expected = match (has_lo, has_hi, choice) {
            (false, true, _) => 0.25,
            (true, false, _) => -0.25,
            (_, _, -1) => -0.25,
            _ => 0.25,
        };
        p as f64 + expected
    };
    let ex = axis(&mut g, px, HW, &|x| py * HW + x);
    let ey = axis(&mut g, py, HH, &|y| y * HW + px);
    (g, ex, ey)
}

fn heatmap_decode() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exact = 0;
    for _ in 0..50 {
        let (g, ex, ey) = constructed_grid(&mut rng);
        let (sx, tx) = (rng.gen_range(1..8) as f64, rng.gen_range(-20..20) as f64);
        let (sy, ty) = (rng.gen_range(1..8) as f64, rng.gen_range(-20..20) as f64);
        let hm = Heatmaps::new(
            HW,
            HH,
            vec![g; NUM_KEYPOINTS],
            Affine2::scale_translate(sx, sy, tx, ty),
        )
        .unwrap();
        let p = decode_heatmaps(&hm).points()[0];
        if p.x == sx * ex + tx && p.y == sy * ey + ty && (p.confidence - 0.9).abs() < 1e-6 {
            exact += 1;
        }
    }
    let mut invariant = 0;
    for _ in 0..1000 {
        // integer-valued grids keep distinct values distinct after scaling
        let channels: Vec<Vec<f32>> = (0..NUM_KEYPOINTS)
            .map(|_| (0..HW * HH).map(|_| f32::from(rng.gen_range(0u8..=255))).collect())
            .collect();
        let hm = Heatmaps::new(HW, HH, channels, Affine2::scale_translate(4.0, 4.0, 1.5, 1.5)).unwrap();
        let k = rng.gen_range(0.01f32..100.0);
        let a = decode_heatmaps(&hm);
        let b = decode_heatmaps(&hm.scaled(k).unwrap());
        if a.points().iter().zip(b.points()).all(|(p, q)| p.x == q.x && p.y == q.y) {
            invariant += 1;
        }
    }
    let detail = format!("{exact}/50 constructed grids exact, {invariant}/1000 scaled grids invariant");
    if exact == 50 && invariant == 1000 {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn reference_dataset() -> Verdict {
    Waived(
        "released participant dataset not available offline; oracle criteria stand as acceptance".into(),
    )
}

fn robustness_pairs() -> Verdict {
    let cfg = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut ok, mut worst) = (0, 0.0f64);
    let n = 50;
    for i in 0..n {
        let p = SynthParams::preset(BodyShape::ALL[i % 5], &cfg.anthropometry, &mut rng);
        let s = synth_silhouette(&p, &cfg).unwrap();
        let spec = NoiseSpec {
            speckles: 40,
            other_blobs: 20,
            holes: 20,
            max_size: 6,
        };
        let noisy_lm = noisy_labels(&s.mask, &spec, &mut rng);
        let run = |lm: &LabelMap| {
            let mask = clean_person_mask(lm, &cfg.silhouette).unwrap();
            analyze_mask(&mask, &s.keypoints, s.height, &cfg).unwrap()
        };
        let check = compare_pair(&run(&s.labels), &run(&noisy_lm), DEFAULT_PAIR_BOUND_CM);
        worst = worst.max(check.max_delta_cm);
        if check.within_bound {
            ok += 1;
        }
    }
    let detail = format!("{ok}/{n} pairs consistent, worst delta {worst:.3} cm");
    if ok == n {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn cli_golden_stability() -> Verdict {
    let dataset = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dataset");
    let replay = dataset.join("replay");
    let image = dataset.join("images/spoon_0003.png");
    let manifest = dataset.join("manifest.csv");
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_bodyshape"))
            .args(args)
            .output()
            .expect("binary runs")
    };
    let classify_args = [
        "classify",
        image.to_str().unwrap(),
        "--height-cm",
        "187.6",
        "--replay",
        replay.to_str().unwrap(),
    ];
    let evaluate_args = [
        "evaluate",
        manifest.to_str().unwrap(),
        "--replay",
        replay.to_str().unwrap(),
    ];
    let (c1, c2) = (run(&classify_args), run(&classify_args));
    let (e1, e2) = (run(&evaluate_args), run(&evaluate_args));
    let all_ok = [&c1, &c2, &e1, &e2].iter().all(|o| o.status.success());
    let detail = format!(
        "classify {} bytes, evaluate {} bytes",
        c1.stdout.len(),
        e1.stdout.len()
    );
    if all_ok && !c1.stdout.is_empty() && c1.stdout == c2.stdout && e1.stdout == e2.stdout {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("classifier oracle grid", classifier_grid),
        ("translation invariance", translation_invariance),
        ("geometric oracle", geometric_oracle),
        ("mask invariants", mask_invariants),
        ("px-to-cm exactness", px_to_cm_exactness),
        ("heatmap decode", heatmap_decode),
        ("reference-dataset reproduction", reference_dataset),
        ("robustness pairs", robustness_pairs),
        ("cli golden stability", cli_golden_stability),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Pass(d) => println!("PASS   {name}: {d}"),
            Waived(d) => println!("WAIVED {name}: {d}"),
            Fail(d) => {
                failed += 1;
                println!("FAIL   {name}: {d}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
