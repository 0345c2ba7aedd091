mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use bodyshape::classifier::BodyShape;
use bodyshape::evaluation::{self, EvalOptions, StdMode, SynthParams};
use bodyshape::inference::{write_fixture, InferenceBackend, ModelManifest, ReplayBackend};
use bodyshape::ingest::{read_dataset_manifest, write_manifest, SubjectRecord};
use bodyshape::{load_image, overlay, validate_height, Convention, Error, ErrorClass, Pipeline, PipelineConfig};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use output::{to_json, ClassifyOutput, ErrorOutput};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage error (bad or missing flags)
  2  input error (unreadable image, bad height, malformed manifest or config, infeasible synth params)
  3  no person or unusable pose (empty segmentation, low-confidence keypoints, degenerate lines)
  4  inference backend failure (model load, checksum mismatch, missing replay fixture)";

#[derive(Parser)]
#[command(name = "bodyshape", version, about = "Body-shape classification from a single frontal photograph", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify one image.
    #[command(after_help = EXIT_CODES)]
    Classify(ClassifyArgs),
    /// Run a labelled dataset and report accuracy and measurement errors.
    #[command(after_help = EXIT_CODES)]
    Evaluate(EvaluateArgs),
    /// Generate synthetic subjects with replay fixtures and a manifest.
    #[command(after_help = EXIT_CODES)]
    Synth(SynthArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("backend").required(true).args(["models", "replay"])))]
struct BackendArgs {
    /// JSON model manifest with sha256 checksums (needs the `onnx` build feature).
    #[arg(long)]
    models: Option<PathBuf>,
    /// Directory of recorded label maps and keypoints.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    #[value(alias = "frontal_width")]
    FrontalWidth,
    #[value(alias = "est_circumference")]
    EstCircumference,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Frontal full-body photograph (PNG or JPEG).
    image: PathBuf,
    /// Subject stature in centimetres, 100 to 230.
    #[arg(long)]
    height_cm: f64,
    #[command(flatten)]
    backend: BackendArgs,
    /// Overrides the convention in --config.
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the input with the measurement lines drawn on it.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset manifest CSV.
    manifest: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the measurement-error table and confusion matrix.
    #[arg(long)]
    table: bool,
    /// Write the ground-truth class histogram as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Sample standard deviation (n - 1) instead of population.
    #[arg(long)]
    sample_std: bool,
    /// Process records one at a time.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["params", "preset"])))]
struct SynthArgs {
    /// JSON file with explicit silhouette parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Shape name (rectangle, triangle, inverted-triangle, spoon, hourglass) or `mixed`.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for images, replay fixtures and manifest.csv.
    #[arg(long)]
    out: PathBuf,
    /// Number of subjects to generate.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Input => 2,
        ErrorClass::NoPersonOrPose => 3,
        ErrorClass::Backend => 4,
    }
}

fn load_config(path: Option<&Path>) -> bodyshape::Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
        path: path.to_owned(),
        source,
    })?;
    let cfg: PipelineConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn open_backend(args: &BackendArgs) -> bodyshape::Result<Arc<dyn InferenceBackend>> {
    if let Some(dir) = &args.replay {
        return Ok(Arc::new(ReplayBackend::open(dir)?));
    }
    let manifest = args.models.as_ref().expect("clap enforces one backend");
    let models = ModelManifest::load_verified(manifest)?;
    #[cfg(feature = "onnx")]
    {
        Ok(Arc::new(bodyshape::inference::OnnxBackend::load(&models)?))
    }
    #[cfg(not(feature = "onnx"))]
    {
        let _ = models;
        Err(Error::BackendFailure(
            "this build has no ONNX runtime; rebuild with `--features onnx` or use --replay".into(),
        ))
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> bodyshape::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn classify(args: &ClassifyArgs) -> bodyshape::Result<String> {
    let height = validate_height(args.height_cm)?;
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(c) = args.convention {
        cfg.anthropometry.convention = match c {
            ConventionArg::FrontalWidth => Convention::FrontalWidth,
            ConventionArg::EstCircumference => Convention::EstCircumference,
        };
    }
    let backend = open_backend(&args.backend)?;
    let pipeline = Pipeline::new(backend, cfg)?;
    let image = load_image(&args.image)?;
    let (analysis, _mask) = pipeline.run_detailed(&image, height)?;
    if let Some(path) = &args.overlay {
        overlay::save_overlay(&image, &analysis, path)?;
    }
    let out = ClassifyOutput::new(
        file_name(&args.image),
        height.value(),
        &analysis,
        pipeline.backend().info(),
    );
    Ok(to_json(&out))
}

fn run_classify(args: ClassifyArgs) -> u8 {
    match classify(&args) {
        Ok(json) => match write_or_print(args.json.as_deref(), &json) {
            Ok(()) => 0,
            Err(e) => fail(&e),
        },
        Err(e) => {
            let json = to_json(&ErrorOutput::new(file_name(&args.image), &e));
            if let Err(w) = write_or_print(args.json.as_deref(), &json) {
                eprintln!("error: {w}");
            }
            fail(&e)
        }
    }
}

fn evaluate(args: &EvaluateArgs) -> bodyshape::Result<()> {
    let records = read_dataset_manifest(&args.manifest)?;
    let cfg = load_config(args.config.as_deref())?;
    let pipeline = Pipeline::new(open_backend(&args.backend)?, cfg)?;
    let opts = EvalOptions {
        parallel: !args.serial,
        std_mode: if args.sample_std {
            StdMode::Sample
        } else {
            StdMode::Population
        },
        anthropometry: cfg.anthropometry,
    };
    let report = evaluation::evaluate(
        &records,
        |r: &SubjectRecord| pipeline.run(&load_image(&r.image_path)?, r.height),
        &opts,
    )?;
    write_or_print(args.out.as_deref(), &(report.to_json() + "\n"))?;
    if let Some(path) = &args.histogram {
        std::fs::write(path, evaluation::class_histogram_csv(&report)).map_err(|e| Error::io(path, e))?;
    }
    if args.table {
        match evaluation::error_table(&report) {
            Ok(t) => println!("{t}"),
            Err(e) => eprintln!("note: {e}; error table skipped"),
        }
        println!("{}", evaluation::confusion_table(&report));
        if let Some(acc) = report.accuracy_pct {
            println!(
                "accuracy: {acc:.1}% ({}/{}), failures: {}",
                report.n_correct, report.n_total, report.n_failed
            );
        }
    }
    Ok(())
}

fn parse_preset(name: &str) -> bodyshape::Result<Option<BodyShape>> {
    let key: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    if key == "mixed" {
        return Ok(None);
    }
    BodyShape::ALL
        .into_iter()
        .find(|s| s.as_str().to_ascii_lowercase() == key)
        .map(Some)
        .ok_or_else(|| Error::InvalidInput(format!("unknown preset `{name}`")))
}

fn synth(args: &SynthArgs) -> bodyshape::Result<usize> {
    let cfg = load_config(args.config.as_deref())?;
    let fixed: Option<SynthParams> = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
                path: path.to_owned(),
                source,
            })?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let preset = match &args.preset {
        Some(p) => parse_preset(p)?,
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let images = args.out.join("images");
    let replay = args.out.join("replay");
    for dir in [&images, &replay] {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut records = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let (prefix, params) = match &fixed {
            Some(p) => ("subject", p.clone()),
            None => {
                let shape = preset.unwrap_or(BodyShape::ALL[i % BodyShape::ALL.len()]);
                let p = SynthParams::preset(shape, &cfg.anthropometry, &mut rng);
                (shape.as_str(), p)
            }
        };
        let subject = evaluation::synth_silhouette(&params, &cfg)?;
        let name = format!("{}_{i:04}", prefix.to_ascii_lowercase());
        let image = evaluation::render_rgb(&subject.mask, &mut rng)?;
        let image_path = images.join(format!("{name}.png"));
        image.save_png(&image_path)?;
        let fixture = replay.join(&name);
        write_fixture(&fixture, &subject.labels, &subject.keypoints)?;
        subject.mask.save_png(fixture.join("mask.png"))?;
        records.push(SubjectRecord {
            image_path,
            height: subject.height,
            true_shape: Some(subject.shape),
            truth: Some(subject.truth),
            sex: None,
        });
    }
    write_manifest(args.out.join("manifest.csv"), &records)?;
    Ok(records.len())
}

fn fail(e: &Error) -> u8 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Classify(args) => run_classify(args),
        Command::Evaluate(args) => evaluate(&args).map_or_else(|e| fail(&e), |()| 0),
        Command::Synth(args) => match synth(&args) {
            Ok(n) => {
                eprintln!("wrote {n} subjects to {}", args.out.display());
                0
            }
            Err(e) => fail(&e),
        },
    };
    ExitCode::from(code)
}
