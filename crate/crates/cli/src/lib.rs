//! Command implementations behind the `skinseg` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
//! malformed input), 3 internal error.

use std::ffi::OsString;
use std::fmt;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use skinseg_core::classifiers::{BayesConfig, BayesModel, BayesVariant, PixelClassifier, TreeConfig, TreeModel};
use skinseg_core::dataset::{self, ClassCounts};
use skinseg_core::imageio::{self, Image};
use skinseg_core::model_file::{training_fingerprint, ModelFile, ModelHeader};
use skinseg_core::nn::{self, MlpArchitecture, TrainConfig};
use skinseg_core::segment::{segment, SegmentOptions};
use skinseg_core::{
    Error as CoreError, MetricsReport, Model, ModelKind, NeighbourhoodConfig, RawSample, RefinementRule,
    SplitConfig, ThresholdRange,
};

#[derive(Debug, Parser)]
#[command(name = "skinseg", version, about = "Pixel-wise skin segmentation with neighbourhood refinement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier on the training part of a labelled dataset.
    Train(TrainArgs),
    /// Evaluate a model on the held-out part of a dataset.
    Eval(EvalArgs),
    /// Segment a PPM image into a PGM skin mask.
    Segment(SegmentArgs),
    /// Time stage-1, refinement and the half-resolution path.
    Bench(BenchArgs),
    /// Print sample counts and split sizes for a dataset.
    DatasetStats(StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Threshold,
    Bayes,
    Tree,
    Mlp,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Threshold => ModelKind::Threshold,
            KindArg::Bayes => ModelKind::Bayes,
            KindArg::Tree => ModelKind::Tree,
            KindArg::Mlp => ModelKind::Mlp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Paper,
    Symmetric,
}

impl From<RuleArg> for RefinementRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Paper => RefinementRule::PaperLiteral,
            RuleArg::Symmetric => RefinementRule::Symmetric,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Where to write the model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.30)]
    pub test_fraction: f64,
    /// Laplace smoothing pseudo-count (bayes only).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Training epochs (mlp only).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size (mlp only).
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Only `threshold` may be evaluated without a model file.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Defaults to the seed stored in the model file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to the fraction stored in the model file.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Apply neighbourhood refinement to the stage-1 probabilities.
    #[arg(long)]
    pub refine: bool,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long)]
    pub radius: Option<usize>,
    /// Stage-1 skin threshold used by `--rule paper`.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// PGM mask destination.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[command(flatten)]
    pub refine: RefineArgs,
    /// Classify at half resolution and scale the mask back up.
    #[arg(long)]
    pub downscale: bool,
    /// PGM rendering of the (refined) skin probabilities.
    #[arg(long)]
    pub prob_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.30)]
    pub test_fraction: f64,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) | CoreError::InvalidTestFraction(_) => CliError::Usage(e.to_string()),
            CoreError::LengthMismatch { .. } | CoreError::NonFiniteScore(_) | CoreError::OutOfBounds { .. } => {
                CliError::Internal(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn data_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn io_out(e: std::io::Error) -> CliError {
    CliError::Internal(format!("writing output: {e}"))
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "skinseg: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Segment(a) => cmd_segment(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::DatasetStats(a) => cmd_dataset_stats(a, out),
    }
}

fn split_config(seed: u64, test_fraction: f64) -> CliResult<SplitConfig> {
    let cfg = SplitConfig { test_fraction, seed };
    cfg.validate()
        .map_err(|_| CliError::Usage(format!("--test-fraction must lie strictly between 0 and 1, got {test_fraction}")))?;
    Ok(cfg)
}

fn refine_config(rule: Option<RuleArg>, radius: Option<usize>, tau: Option<f64>) -> CliResult<NeighbourhoodConfig> {
    let mut cfg = NeighbourhoodConfig::default();
    if let Some(rule) = rule {
        cfg.rule = rule.into();
    }
    if let Some(radius) = radius {
        cfg.radius = radius;
    }
    if let Some(tau) = tau {
        if cfg.rule != RefinementRule::PaperLiteral {
            return Err(CliError::Usage("--tau only applies to --rule paper".into()));
        }
        cfg.tau = tau;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn load_dataset(path: &Path) -> CliResult<Vec<RawSample>> {
    let file = std::fs::File::open(path).map_err(|e| data_err(path, e))?;
    dataset::parse_uci(BufReader::new(file)).map_err(|e| data_err(path, e))
}

pub fn load_model(path: &Path) -> CliResult<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    ModelFile::from_text(&text).map_err(|e| data_err(path, e))
}

/// Resolves `--model` / `--kind` to a classifier. Without a model file only
/// the threshold baseline is available; with both, the kinds must agree.
fn resolve_model(model: Option<&Path>, kind: Option<KindArg>) -> CliResult<(Model, Option<ModelHeader>)> {
    match (model, kind) {
        (Some(path), kind) => {
            let file = load_model(path)?;
            if let Some(k) = kind {
                let k = ModelKind::from(k);
                if k != file.model.kind() {
                    return Err(CliError::Usage(format!(
                        "--kind {k} does not match the {} model in {}",
                        file.model.kind(),
                        path.display()
                    )));
                }
            }
            Ok((file.model, Some(file.header)))
        }
        (None, Some(KindArg::Threshold)) => Ok((Model::Threshold(ThresholdRange::default()), None)),
        (None, Some(k)) => Err(CliError::Usage(format!("--model is required for kind {}", ModelKind::from(k)))),
        (None, None) => Err(CliError::Usage("either --model or --kind threshold is required".into())),
    }
}

fn read_image(path: &Path) -> CliResult<Image> {
    let bytes = std::fs::read(path).map_err(|e| data_err(path, e))?;
    imageio::read_ppm(&bytes).map_err(|e| data_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| data_err(path, e))
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let kind = ModelKind::from(a.kind);
    if a.alpha.is_some() && kind != ModelKind::Bayes {
        return Err(CliError::Usage("--alpha only applies to --kind bayes".into()));
    }
    if (a.epochs.is_some() || a.batch_size.is_some()) && kind != ModelKind::Mlp {
        return Err(CliError::Usage("--epochs and --batch-size only apply to --kind mlp".into()));
    }
    let alpha = a.alpha.unwrap_or(BayesConfig::default().alpha);
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(CliError::Usage(format!("--alpha must be a finite value >= 0, got {alpha}")));
    }
    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        seed: a.seed,
    };
    if train_cfg.epochs == 0 || train_cfg.batch_size == 0 {
        return Err(CliError::Usage("--epochs and --batch-size must be positive".into()));
    }
    let split_cfg = split_config(a.seed, a.test_fraction)?;

    let samples = load_dataset(&a.dataset)?;
    let (train_raw, test_raw) = dataset::split(&samples, &split_cfg)?;
    let train = dataset::to_hsv_samples(&train_raw);
    let counts = ClassCounts::from_labels(train.iter().map(|s| s.label));
    if counts.skin == 0 || counts.non_skin == 0 {
        return Err(CliError::Data("training split holds a single class".into()));
    }

    let mut summary = Vec::new();
    let model = match kind {
        ModelKind::Threshold => Model::Threshold(ThresholdRange::default()),
        ModelKind::Bayes => {
            let m = BayesModel::fit_with(&train, &BayesConfig { alpha, variant: BayesVariant::Naive })?;
            summary.push(format!("alpha: {alpha}"));
            summary.push(format!(
                "priors: skin {:.6}, non_skin {:.6}",
                m.prior(skinseg_core::Label::Skin),
                m.prior(skinseg_core::Label::NonSkin)
            ));
            Model::Bayes(m)
        }
        ModelKind::Tree => {
            let m = TreeModel::fit(&train, &TreeConfig::default())?;
            summary.push(format!("depth: {}, leaves: {}", m.depth(), m.leaf_count()));
            summary.push(format!(
                "training accuracy: {:.4}%",
                100.0 * skinseg_core::classifiers::tree::training_accuracy(&m, &train)
            ));
            Model::Tree(m)
        }
        ModelKind::Mlp => {
            let arch = MlpArchitecture::default();
            let outcome = nn::train(&train, &arch, &train_cfg)?;
            summary.push(format!("architecture: {:?}", outcome.model.widths()));
            summary.push(format!("epochs: {}, batch_size: {}", train_cfg.epochs, train_cfg.batch_size));
            for (i, loss) in outcome.loss_history.iter().enumerate() {
                summary.push(format!("epoch {:>3} loss: {loss:.6}", i + 1));
            }
            Model::Mlp(outcome.model)
        }
    };

    let file = ModelFile {
        header: ModelHeader {
            seed: a.seed,
            test_fraction: a.test_fraction,
            training_fingerprint: training_fingerprint(&train_raw),
        },
        model,
    };
    write_file(&a.model, file.to_text().as_bytes())?;

    let all = ClassCounts::from_labels(samples.iter().map(|s| s.label));
    let mut w = |line: String| writeln!(out, "{line}").map_err(io_out);
    w(format!("kind: {kind}"))?;
    w(format!("samples: {} (skin {}, non_skin {})", all.total(), all.skin, all.non_skin))?;
    w(format!(
        "split: train {}, test {} (test_fraction {}, seed {})",
        train_raw.len(),
        test_raw.len(),
        a.test_fraction,
        a.seed
    ))?;
    w(format!("train classes: skin {}, non_skin {}", counts.skin, counts.non_skin))?;
    for line in summary {
        w(line)?;
    }
    w(format!("fingerprint: {}", file.header.training_fingerprint))?;
    w(format!("model: {}", a.model.display()))?;
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let (model, header) = resolve_model(a.model.as_deref(), a.kind)?;
    let defaults = SplitConfig::default();
    let seed = a.seed.or(header.as_ref().map(|h| h.seed)).unwrap_or(defaults.seed);
    let fraction = a
        .test_fraction
        .or(header.as_ref().map(|h| h.test_fraction))
        .unwrap_or(defaults.test_fraction);
    let split_cfg = split_config(seed, fraction)?;

    let samples = load_dataset(&a.dataset)?;
    let (train_raw, test_raw) = dataset::split(&samples, &split_cfg)?;
    if let Some(h) = &header {
        if training_fingerprint(&train_raw) != h.training_fingerprint {
            let _ = writeln!(
                err,
                "warning: the training split (seed {seed}, test_fraction {fraction}) differs from the one the model was trained on"
            );
        }
    }
    let scores: Vec<f64> = test_raw.iter().map(|s| model.classify(s.rgb()).p_skin).collect();
    let labels: Vec<_> = test_raw.iter().map(|s| s.label).collect();
    let report = MetricsReport::evaluate(&scores, &labels)?;
    let doc = report.to_document();
    match &a.output {
        Some(path) => write_file(path, doc.as_bytes())?,
        None => out.write_all(doc.as_bytes()).map_err(io_out)?,
    }
    let _ = write!(err, "{}", report.render());
    Ok(())
}

pub fn cmd_segment(a: &SegmentArgs, out: &mut dyn Write) -> CliResult<()> {
    let r = &a.refine;
    if !r.refine && (r.rule.is_some() || r.radius.is_some() || r.tau.is_some()) {
        return Err(CliError::Usage("--rule, --radius and --tau require --refine".into()));
    }
    let refine = if r.refine { Some(refine_config(r.rule, r.radius, r.tau)?) } else { None };
    let (model, _) = resolve_model(a.model.as_deref(), a.kind)?;
    let img = read_image(&a.input)?;
    if a.downscale && (img.width() < 2 || img.height() < 2) {
        return Err(CliError::Data(format!(
            "{}: a {}x{} image is too small for --downscale",
            a.input.display(),
            img.width(),
            img.height()
        )));
    }

    let opts = SegmentOptions { refine, downscale: a.downscale };
    let start = Instant::now();
    let seg = segment(&img, &model, &opts)?;
    let elapsed = start.elapsed();

    write_file(&a.output, &imageio::write_pgm(&seg.mask))?;
    if let Some(path) = &a.prob_out {
        write_file(path, &imageio::probability_pgm(&seg.probabilities))?;
    }
    writeln!(
        out,
        "segmented {}x{} image: {} skin pixels, {:.3} s",
        img.width(),
        img.height(),
        seg.mask.skin_count(),
        elapsed.as_secs_f64()
    )
    .map_err(io_out)
}

pub const BENCH_RUNS: usize = 5;

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn time_median(runs: usize, mut f: impl FnMut() -> CliResult<()>) -> CliResult<Duration> {
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed());
    }
    Ok(median(times))
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let refine = refine_config(a.rule, a.radius, a.tau)?;
    let (model, _) = resolve_model(a.model.as_deref(), a.kind)?;
    let img = read_image(&a.input)?;
    if img.width() < 2 || img.height() < 2 {
        return Err(CliError::Data("benchmark image must be at least 2x2".into()));
    }

    let configs = [
        ("stage1", SegmentOptions { refine: None, downscale: false }),
        ("refine", SegmentOptions { refine: Some(refine), downscale: false }),
        ("downscale", SegmentOptions { refine: Some(refine), downscale: true }),
    ];
    let mut medians = Vec::new();
    for (_, opts) in &configs {
        medians.push(time_median(BENCH_RUNS, || {
            segment(&img, &model, opts)?;
            Ok(())
        })?);
    }
    writeln!(out, "# {}x{} {} model, median of {BENCH_RUNS} runs", img.width(), img.height(), model.kind())
        .map_err(io_out)?;
    writeln!(out, "path,median_seconds").map_err(io_out)?;
    for ((name, _), t) in configs.iter().zip(&medians) {
        writeln!(out, "{name},{:.6}", t.as_secs_f64()).map_err(io_out)?;
    }
    let speedup = medians[1].as_secs_f64() / medians[2].as_secs_f64().max(1e-9);
    writeln!(out, "speedup,{speedup:.3}").map_err(io_out)
}

pub fn cmd_dataset_stats(a: &StatsArgs, out: &mut dyn Write) -> CliResult<()> {
    let split_cfg = split_config(a.seed, a.test_fraction)?;
    let samples = load_dataset(&a.dataset)?;
    let all = ClassCounts::from_labels(samples.iter().map(|s| s.label));
    let mut w = |line: String| writeln!(out, "{line}").map_err(io_out);
    w(format!("samples: {}", all.total()))?;
    w(format!("skin: {}", all.skin))?;
    w(format!("non_skin: {}", all.non_skin))?;
    if samples.len() >= 2 {
        let (train, test) = dataset::split(&samples, &split_cfg)?;
        let tc = ClassCounts::from_labels(train.iter().map(|s| s.label));
        let ec = ClassCounts::from_labels(test.iter().map(|s| s.label));
        w(format!("train: {} (skin {}, non_skin {})", train.len(), tc.skin, tc.non_skin))?;
        w(format!("test: {} (skin {}, non_skin {})", test.len(), ec.skin, ec.non_skin))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("skinseg").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run_args(&["--help"]).0, 0);
        assert_eq!(run_args(&["--version"]).0, 0);
    }

    #[test]
    fn unknown_flags_are_usage_errors() {
        assert_eq!(run_args(&["train", "--bogus"]).0, 1);
        assert_eq!(run_args(&[]).0, 1);
        assert_eq!(run_args(&["segment", "--input", "a", "--output", "b", "--kind", "cnn"]).0, 1);
    }

    #[test]
    fn flag_combinations_are_checked_before_reading_files() {
        let missing = "/nonexistent/file";
        let cases: [&[&str]; 6] = [
            &["train", "--dataset", missing, "--model", "m", "--kind", "tree", "--alpha", "1"],
            &["train", "--dataset", missing, "--model", "m", "--kind", "bayes", "--epochs", "3"],
            &["train", "--dataset", missing, "--model", "m", "--kind", "bayes", "--test-fraction", "1.5"],
            &["segment", "--input", missing, "--output", "o", "--kind", "threshold", "--radius", "2"],
            &["segment", "--input", missing, "--output", "o", "--kind", "threshold", "--refine", "--tau", "0.4"],
            &["segment", "--input", missing, "--output", "o", "--kind", "tree"],
        ];
        for args in cases {
            assert_eq!(run_args(args).0, 1, "{args:?}");
        }
    }

    #[test]
    fn missing_files_are_data_errors() {
        let (code, _, err) = run_args(&["dataset-stats", "--dataset", "/nonexistent/file"]);
        assert_eq!(code, 2);
        assert!(err.contains("data error"), "{err}");
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(CoreError::Config("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(CoreError::SingleClass).exit_code(), 2);
        assert_eq!(CliError::from(CoreError::NonFiniteScore(f64::NAN)).exit_code(), 3);
    }
}
