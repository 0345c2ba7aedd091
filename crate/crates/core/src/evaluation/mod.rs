//! Dataset evaluation: accuracy, per-class metrics, confusion matrix and
//! absolute measurement-error statistics split by classification outcome.

pub mod noise;
pub mod synth;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anthropometry::{ellipse_circumference, AnthroConfig, Convention, Measurements};
use crate::classifier::BodyShape;
use crate::error::{Error, Result};
use crate::ingest::{MeasurementTruth, Sex, SubjectRecord};
use crate::pipeline::Analysis;

pub use synth::{render_rgb, synth_silhouette, SynthParams, SynthSubject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n - 1.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub parallel: bool,
    pub std_mode: StdMode,
    /// Aspect ratios used when comparing measurement conventions.
    pub anthropometry: AnthroConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            parallel: true,
            std_mode: StdMode::Population,
            anthropometry: AnthroConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub image: String,
    pub sex: Option<Sex>,
    pub true_shape: Option<BodyShape>,
    pub predicted: Option<BodyShape>,
    pub measurements: Option<Measurements>,
    /// |predicted - truth| for bust, waist, hip.
    pub abs_error: Option<[f64; 3]>,
    pub error: Option<RecordError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64], mode: StdMode) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                n,
                mean: None,
                std: None,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let denom = match mode {
            StdMode::Population => n as f64,
            StdMode::Sample => (n - 1) as f64,
        };
        let std = if n == 1 { 0.0 } else { (ss / denom).sqrt() };
        Stat {
            n,
            mean: Some(mean),
            std: Some(std),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSplit {
    pub correct: Stat,
    pub incorrect: Stat,
    pub all: Stat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub bust: ErrorSplit,
    pub waist: ErrorSplit,
    pub hip: ErrorSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub shape: BodyShape,
    pub support: usize,
    pub predicted: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub n_total: usize,
    pub n_correct: usize,
    pub accuracy_pct: Option<f64>,
}

impl GroupAccuracy {
    fn new(n_total: usize, n_correct: usize) -> Self {
        Self {
            n_total,
            n_correct,
            accuracy_pct: (n_total > 0).then(|| 100.0 * n_correct as f64 / n_total as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SexAccuracy {
    pub male: GroupAccuracy,
    pub female: GroupAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub shape: BodyShape,
    pub count: usize,
    pub percent: Option<f64>,
}

/// Mean absolute error of the two measurement conventions against the
/// dataset's ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionFit {
    pub n: usize,
    pub frontal_width_mae: f64,
    pub est_circumference_mae: f64,
    pub better: Convention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub std_mode: StdMode,
    pub convention: Option<Convention>,
    /// How pipeline failures enter the accuracy denominator.
    pub failure_policy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_records: usize,
    /// Records with a ground-truth class; the accuracy denominator.
    pub n_total: usize,
    pub n_correct: usize,
    pub accuracy_pct: Option<f64>,
    pub n_failed: usize,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are ground truth, columns predictions, both in `BodyShape::ALL` order.
    pub confusion: [[usize; 5]; 5],
    /// Labelled records whose pipeline run failed, by ground-truth class.
    pub failed_by_class: [usize; 5],
    pub measurement_errors: ErrorStats,
    pub n_with_measurement_truth: usize,
    pub by_sex: SexAccuracy,
    pub class_distribution: Vec<ClassShare>,
    pub convention_fit: Option<ConventionFit>,
    pub meta: ReportMeta,
    pub records: Vec<RecordResult>,
}

fn abs_errors(m: &Measurements, t: &MeasurementTruth) -> [f64; 3] {
    [
        (m.bust - t.bust).abs(),
        (m.waist - t.waist).abs(),
        (m.hip - t.hip).abs(),
    ]
}

fn record_result(record: &SubjectRecord, outcome: Result<Analysis>) -> RecordResult {
    let image = record
        .image_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| record.image_path.display().to_string());
    let (predicted, measurements, error) = match outcome {
        Ok(a) => (Some(a.shape), Some(a.measurements), None),
        Err(e) => (
            None,
            None,
            Some(RecordError {
                kind: e.kind().to_owned(),
                message: e.to_string(),
            }),
        ),
    };
    RecordResult {
        image,
        sex: record.sex,
        true_shape: record.true_shape,
        predicted,
        abs_error: measurements
            .as_ref()
            .zip(record.truth.as_ref())
            .map(|(m, t)| abs_errors(m, t)),
        measurements,
        error,
    }
}

/// Frontal-width and circumference readings of one analysis.
fn both_conventions(a: &Analysis, cfg: &AnthroConfig) -> Option<(Measurements, Measurements)> {
    let w = |px: u32| f64::from(px) * a.scale.scale;
    let (b, wa, h) = (w(a.lines.bust.width_px), w(a.lines.waist.width_px), w(a.lines.hip.width_px));
    let circ = Measurements::new(
        ellipse_circumference(b, cfg.aspect_bust).ok()?,
        ellipse_circumference(wa, cfg.aspect_waist).ok()?,
        ellipse_circumference(h, cfg.aspect_hip).ok()?,
        Convention::EstCircumference,
    );
    Some((Measurements::new(b, wa, h, Convention::FrontalWidth), circ))
}

/// Runs `pipeline` on every record and aggregates the metrics.
///
/// A labelled record whose run fails counts as incorrect. Records without a
/// ground-truth class are run and listed but stay out of the accuracy
/// denominator.
pub fn evaluate<F>(records: &[SubjectRecord], pipeline: F, opts: &EvalOptions) -> Result<EvalReport>
where
    F: Fn(&SubjectRecord) -> Result<Analysis> + Sync,
{
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let run = |r: &SubjectRecord| {
        let outcome = pipeline(r);
        let fit = outcome
            .as_ref()
            .ok()
            .zip(r.truth.as_ref())
            .and_then(|(a, t)| {
                both_conventions(a, &opts.anthropometry)
                    .map(|(f, c)| (abs_errors(&f, t), abs_errors(&c, t)))
            });
        (record_result(r, outcome), fit)
    };
    let results: Vec<(RecordResult, Option<([f64; 3], [f64; 3])>)> = if opts.parallel {
        records.par_iter().map(run).collect()
    } else {
        records.iter().map(run).collect()
    };
    Ok(aggregate(results, opts))
}

fn aggregate(results: Vec<(RecordResult, Option<([f64; 3], [f64; 3])>)>, opts: &EvalOptions) -> EvalReport {
    let mut confusion = [[0usize; 5]; 5];
    let mut failed_by_class = [0usize; 5];
    let mut support = [0usize; 5];
    let (mut n_total, mut n_correct, mut n_failed) = (0, 0, 0);
    let mut sex_counts = [(0usize, 0usize); 2];
    let mut errs: [[Vec<f64>; 3]; 3] = Default::default(); // [measurement][correct, incorrect, all]
    let mut n_truth = 0;
    let (mut fit_frontal, mut fit_circ, mut fit_n) = (0.0, 0.0, 0usize);
    let mut convention = None;

    for (r, fit) in &results {
        if r.error.is_some() {
            n_failed += 1;
        }
        if let Some(m) = &r.measurements {
            convention.get_or_insert(m.convention);
        }
        let correct = match (r.true_shape, r.predicted) {
            (Some(t), p) => {
                n_total += 1;
                support[t.index()] += 1;
                match p {
                    Some(p) => confusion[t.index()][p.index()] += 1,
                    None => failed_by_class[t.index()] += 1,
                }
                let ok = p == Some(t);
                if ok {
                    n_correct += 1;
                }
                if let Some(sex) = r.sex {
                    let c = &mut sex_counts[(sex == Sex::Female) as usize];
                    c.0 += 1;
                    c.1 += ok as usize;
                }
                Some(ok)
            }
            (None, _) => None,
        };
        if let Some(e) = r.abs_error {
            n_truth += 1;
            for (k, v) in e.into_iter().enumerate() {
                errs[k][2].push(v);
                match correct {
                    Some(true) => errs[k][0].push(v),
                    Some(false) => errs[k][1].push(v),
                    None => {}
                }
            }
        }
        if let Some((f, c)) = fit {
            fit_n += 1;
            fit_frontal += f.iter().sum::<f64>() / 3.0;
            fit_circ += c.iter().sum::<f64>() / 3.0;
        }
    }

    let split = |k: usize| ErrorSplit {
        correct: Stat::of(&errs[k][0], opts.std_mode),
        incorrect: Stat::of(&errs[k][1], opts.std_mode),
        all: Stat::of(&errs[k][2], opts.std_mode),
    };
    let per_class = BodyShape::ALL
        .iter()
        .map(|&shape| {
            let i = shape.index();
            let tp = confusion[i][i];
            let predicted: usize = confusion.iter().map(|row| row[i]).sum();
            ClassMetrics {
                shape,
                support: support[i],
                predicted,
                precision: (predicted > 0).then(|| tp as f64 / predicted as f64),
                recall: (support[i] > 0).then(|| tp as f64 / support[i] as f64),
            }
        })
        .collect();
    let class_distribution = BodyShape::ALL
        .iter()
        .map(|&shape| ClassShare {
            shape,
            count: support[shape.index()],
            percent: (n_total > 0).then(|| 100.0 * support[shape.index()] as f64 / n_total as f64),
        })
        .collect();
    let convention_fit = (fit_n > 0).then(|| {
        let frontal = fit_frontal / fit_n as f64;
        let circ = fit_circ / fit_n as f64;
        ConventionFit {
            n: fit_n,
            frontal_width_mae: frontal,
            est_circumference_mae: circ,
            better: if circ < frontal {
                Convention::EstCircumference
            } else {
                Convention::FrontalWidth
            },
        }
    });

    EvalReport {
        n_records: results.len(),
        n_total,
        n_correct,
        accuracy_pct: GroupAccuracy::new(n_total, n_correct).accuracy_pct,
        n_failed,
        per_class,
        confusion,
        failed_by_class,
        measurement_errors: ErrorStats {
            bust: split(0),
            waist: split(1),
            hip: split(2),
        },
        n_with_measurement_truth: n_truth,
        by_sex: SexAccuracy {
            male: GroupAccuracy::new(sex_counts[0].0, sex_counts[0].1),
            female: GroupAccuracy::new(sex_counts[1].0, sex_counts[1].1),
        },
        class_distribution,
        convention_fit,
        meta: ReportMeta {
            std_mode: opts.std_mode,
            convention,
            failure_policy: "failed runs on labelled records count as incorrect".into(),
        },
        records: results.into_iter().map(|(r, _)| r).collect(),
    }
}

fn cell(s: &Stat) -> String {
    match (s.mean, s.std) {
        (Some(m), Some(sd)) => format!("{m:.2} ± {sd:.2}"),
        _ => "n/a".to_owned(),
    }
}

/// Absolute average error (cm) with standard deviation per measurement,
/// split by correct and incorrect classification.
pub fn error_table(r: &EvalReport) -> Result<String> {
    if r.n_with_measurement_truth == 0 {
        return Err(Error::NoMeasurementGroundTruth);
    }
    let mut out = String::new();
    let e = &r.measurement_errors;
    let _ = writeln!(out, "Absolute average measurement error (cm)");
    let _ = writeln!(out, "{:<12}| {:<18}| {:<18}", "Measurement", "Correct", "Incorrect");
    let _ = writeln!(out, "{:-<12}+{:-<19}+{:-<19}", "", "", "");
    for (name, split) in [("Bust", &e.bust), ("Waist", &e.waist), ("Hip", &e.hip)] {
        let _ = writeln!(
            out,
            "{:<12}| {:<18}| {:<18}",
            name,
            cell(&split.correct),
            cell(&split.incorrect)
        );
    }
    Ok(out)
}

pub fn confusion_table(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<18}", "true \\ predicted");
    for s in BodyShape::ALL {
        let _ = write!(out, "{:>17}", s.as_str());
    }
    let _ = writeln!(out, "{:>8}", "failed");
    for t in BodyShape::ALL {
        let _ = write!(out, "{:<18}", t.as_str());
        for p in BodyShape::ALL {
            let _ = write!(out, "{:>17}", r.confusion[t.index()][p.index()]);
        }
        let _ = writeln!(out, "{:>8}", r.failed_by_class[t.index()]);
    }
    out
}

/// Ground-truth class histogram as CSV (`shape,count,percent`).
pub fn class_histogram_csv(r: &EvalReport) -> String {
    let mut out = String::from("shape,count,percent\n");
    for c in &r.class_distribution {
        let pct = c.percent.map(|p| format!("{p:.2}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", c.shape, c.count, pct);
    }
    out
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Outcome of comparing two analyses of the same subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCheck {
    pub same_shape: bool,
    pub max_delta_cm: f64,
    pub within_bound: bool,
}

/// Consistency of two runs on one subject: identical class and every
/// measurement within `bound_cm` (3 cm by default in the CLI and tests).
pub fn compare_pair(a: &Analysis, b: &Analysis, bound_cm: f64) -> PairCheck {
    let (ma, mb) = (&a.measurements, &b.measurements);
    let max_delta_cm = [
        (ma.bust - mb.bust).abs(),
        (ma.waist - mb.waist).abs(),
        (ma.hip - mb.hip).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let same_shape = a.shape == b.shape;
    PairCheck {
        same_shape,
        max_delta_cm,
        within_bound: same_shape && max_delta_cm <= bound_cm,
    }
}

pub const DEFAULT_PAIR_BOUND_CM: f64 = 3.0;
