//! Command-line surface binding the toolkit into reproducible pipelines.
//!
//! Exit status contract: 0 success, 1 data/validation failure, 2 usage
//! error. Standard output carries JSON only; diagnostics go to standard
//! error, and nothing is written on a failed run except that message.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bpkd::edge_masks::{
    build_soft_edge_masks, class_edge_band, labels_from_logits, trimap_region, EdgeConfig,
    SoftMaskStack, DEFAULT_EDGE_WIDTH,
};
use bpkd::io::{
    load_label_map, load_tensor, save_binary_map, save_luma8, save_report, save_tensor,
    ReportDocument, ReportValue,
};
use bpkd::losses::{
    bpkd_grad, bpkd_loss, central_difference_grad, decompose, gradient_errors, GradientTensor,
    LogitTensor, LossWeights, DEFAULT_LAMBDA_BODY, DEFAULT_LAMBDA_EDGE, DEFAULT_TEMPERATURE,
};
use bpkd::metrics::{confusion, miou, ConfusionMatrix};
use bpkd::uncertainty::{edge_entropy_accuracy, entropy_map};

#[derive(Parser)]
#[command(
    name = "bpkd",
    version,
    about = "Boundary-privileged knowledge distillation toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build per-class soft edge masks from a label map
    GenMasks(GenMasksArgs),
    /// Compute the composite edge/body distillation loss
    Loss(LossArgs),
    /// Check the analytic gradient against central finite differences
    Gradcheck(GradcheckArgs),
    /// Evaluate mIoU/mAcc, optionally restricted to the boundary band
    Eval(EvalArgs),
    /// Per-pixel entropy maps and the edge entropy/accuracy correlation
    Entropy(EntropyArgs),
    /// Split logits into edge and body components through a mask stack
    Decompose(DecomposeArgs),
}

fn parse_odd_width(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not an integer"))?;
    if v.is_multiple_of(2) {
        return Err("width must be odd".to_string());
    }
    if v < 3 {
        return Err("width must be at least 3".to_string());
    }
    Ok(v)
}

fn parse_positive(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not an integer"))?;
    if v == 0 {
        return Err("value must be positive".to_string());
    }
    Ok(v)
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err("value must be non-negative and finite".to_string());
    }
    Ok(v)
}

fn parse_temperature(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err("temperature must be positive".to_string());
    }
    Ok(v)
}

/// Scalar broadcast or comma-separated per-class list.
#[derive(Debug, Clone)]
struct AlphaSpec(Vec<f64>);

fn parse_alpha(s: &str) -> Result<AlphaSpec, String> {
    let mut values = Vec::new();
    for part in s.split(',') {
        let v: f64 = part.trim().parse().map_err(|_| format!("'{part}' is not a number"))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err("alpha entries must be non-negative and finite".to_string());
        }
        values.push(v);
    }
    Ok(AlphaSpec(values))
}

impl AlphaSpec {
    fn resolve(&self, num_classes: usize) -> Result<Vec<f64>, AppError> {
        if self.0.len() == 1 {
            Ok(vec![self.0[0]; num_classes])
        } else if self.0.len() == num_classes {
            Ok(self.0.clone())
        } else {
            Err(AppError::Usage(format!(
                "--alpha must be a scalar or a list of {num_classes} entries, got {}",
                self.0.len()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MaskSource {
    /// Derive edge masks from the ground-truth label map
    Gt,
    /// Derive edge masks from the teacher's argmax predictions (stride 1)
    Teacher,
}

#[derive(Args)]
struct GenMasksArgs {
    /// Label map (single-channel PNG or 2-D integer .npy)
    #[arg(long)]
    labels: PathBuf,
    /// Number of classes C
    #[arg(long, value_parser = parse_positive)]
    classes: usize,
    /// Edge width (odd structuring-element side)
    #[arg(long, default_value_t = DEFAULT_EDGE_WIDTH, value_parser = parse_odd_width)]
    width: usize,
    /// Output stride S (label dims must divide by it)
    #[arg(long, default_value_t = 8, value_parser = parse_positive)]
    stride: usize,
    /// Destination .npy for the (C,H/S,W/S) soft mask stack
    #[arg(long)]
    out: PathBuf,
    /// Also write per-class binary band PNGs into this directory
    #[arg(long)]
    band_png_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MaskSourceArgs {
    /// Ground-truth label map; required with --mask-source gt
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Precomputed soft mask stack .npy (bypasses mask construction)
    #[arg(long, conflicts_with = "labels")]
    masks: Option<PathBuf>,
    /// Where the edge masks come from
    #[arg(long, value_enum, default_value_t = MaskSource::Gt)]
    mask_source: MaskSource,
    /// Edge width
    #[arg(long, default_value_t = DEFAULT_EDGE_WIDTH, value_parser = parse_odd_width)]
    width: usize,
    /// Output stride (ignored with --mask-source teacher or --masks)
    #[arg(long, default_value_t = 8, value_parser = parse_positive)]
    stride: usize,
}

#[derive(Args)]
struct WeightArgs {
    /// Body loss weight
    #[arg(long = "lambda-b", default_value_t = DEFAULT_LAMBDA_BODY, value_parser = parse_non_negative)]
    lambda_body: f64,
    /// Edge loss weight
    #[arg(long = "lambda-e", default_value_t = DEFAULT_LAMBDA_EDGE, value_parser = parse_non_negative)]
    lambda_edge: f64,
    /// Per-class edge balance: scalar broadcast or comma-separated list
    #[arg(long, default_value = "2", value_parser = parse_alpha)]
    alpha: AlphaSpec,
    /// Body softmax temperature
    #[arg(long = "temp", default_value_t = DEFAULT_TEMPERATURE, value_parser = parse_temperature)]
    temperature: f64,
}

#[derive(Args)]
struct LossArgs {
    /// Teacher logits .npy, shape (C,H',W')
    #[arg(long)]
    teacher: PathBuf,
    /// Student logits .npy, same shape
    #[arg(long)]
    student: PathBuf,
    #[command(flatten)]
    mask: MaskSourceArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// Also save the loss report JSON here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the analytic gradient tensor here
    #[arg(long)]
    grad_out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    student: PathBuf,
    #[command(flatten)]
    mask: MaskSourceArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Maximum accepted relative error
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Also save the check report JSON here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corrupt the analytic gradient before comparing (harness self-test)
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction label map
    #[arg(long, conflicts_with = "pred_glob")]
    pred: Option<PathBuf>,
    /// Ground-truth label map
    #[arg(long, conflicts_with = "gt_glob")]
    gt: Option<PathBuf>,
    /// Glob of prediction maps (paired with --gt-glob by sorted order)
    #[arg(long, requires = "gt_glob")]
    pred_glob: Option<String>,
    /// Glob of ground-truth maps
    #[arg(long, requires = "pred_glob")]
    gt_glob: Option<String>,
    /// Number of classes C
    #[arg(long, value_parser = parse_positive)]
    classes: usize,
    /// Also evaluate inside the boundary band of this width
    #[arg(long, value_parser = parse_odd_width)]
    trimap_width: Option<usize>,
    /// Also save the metrics report JSON here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the standard per-class table as CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EntropyArgs {
    /// Feature tensor .npy, shape (C,H,W)
    #[arg(long)]
    features: PathBuf,
    /// Save the entropy map as a (H,W) tensor here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Save the certainty image here (brighter = more certain)
    #[arg(long)]
    out_png: Option<PathBuf>,
    /// Prediction label map for the correlation analysis
    #[arg(long, requires = "gt")]
    pred: Option<PathBuf>,
    /// Ground-truth label map for the correlation analysis
    #[arg(long, requires = "pred")]
    gt: Option<PathBuf>,
    /// Boundary band width for the correlation analysis
    #[arg(long, default_value_t = DEFAULT_EDGE_WIDTH, value_parser = parse_odd_width)]
    trimap_width: usize,
    /// Number of equal-width entropy bins
    #[arg(long, default_value_t = 10, value_parser = parse_positive)]
    bins: usize,
    /// Also save the report JSON here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Logit tensor .npy, shape (C,H',W')
    #[arg(long)]
    logits: PathBuf,
    /// Soft edge mask stack .npy, same shape
    #[arg(long)]
    masks: PathBuf,
    /// Destination for the edge component
    #[arg(long)]
    out_edge: PathBuf,
    /// Destination for the body component
    #[arg(long)]
    out_body: PathBuf,
}

enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    fn data<E: std::fmt::Display>(e: E) -> Self {
        Self::Data(e.to_string())
    }
}

macro_rules! from_data_error {
    ($($ty:ty),* $(,)?) => {$(
        impl From<$ty> for AppError {
            fn from(e: $ty) -> Self {
                AppError::data(e)
            }
        }
    )*};
}
from_data_error!(
    bpkd::io::IoError,
    bpkd::edge_masks::MaskError,
    bpkd::losses::LossError,
    bpkd::metrics::MetricsError,
    bpkd::uncertainty::UncertaintyError,
);

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// BPKD_THREADS caps internal parallelism; 0 or unset picks automatically.
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("BPKD_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::GenMasks(args) => run_gen_masks(args),
        Command::Loss(args) => run_loss(args),
        Command::Gradcheck(args) => run_gradcheck(args),
        Command::Eval(args) => run_eval(args),
        Command::Entropy(args) => run_entropy(args),
        Command::Decompose(args) => run_decompose(args),
    }
}

fn emit(doc: &ReportDocument, also: Option<&Path>) -> Result<(), AppError> {
    let json = doc.to_json().map_err(AppError::data)?;
    print!("{json}");
    if let Some(path) = also {
        save_report(doc, path)?;
    }
    Ok(())
}

fn run_gen_masks(args: GenMasksArgs) -> Result<(), AppError> {
    let labels = load_label_map(&args.labels)?;
    let cfg = EdgeConfig::new(args.width, args.stride, args.classes)?;
    let masks = build_soft_edge_masks(&labels, &cfg)?;
    save_tensor(&masks.to_dense(), &args.out)?;
    if let Some(dir) = &args.band_png_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| AppError::Data(format!("cannot create {}: {e}", dir.display())))?;
        for class in 0..args.classes {
            let band = class_edge_band(&labels, class as u32, args.width)?;
            save_binary_map(&band, &dir.join(format!("band_class_{class:03}.png")))?;
        }
    }
    let mut doc = ReportDocument::new();
    doc.insert("edge_width", ReportValue::Int(args.width as i64))
        .insert("mask_shape", ReportValue::ints(&[masks.classes(), masks.height(), masks.width()]))
        .insert("n_c", ReportValue::ints(&masks.positive_counts()))
        .insert("num_classes", ReportValue::Int(args.classes as i64))
        .insert("stride", ReportValue::Int(args.stride as i64));
    emit(&doc, None)
}

struct LossInputs {
    teacher: LogitTensor,
    student: LogitTensor,
    masks: SoftMaskStack,
    weights: LossWeights,
    edge_width: Option<usize>,
    stride: Option<usize>,
}

fn load_loss_inputs(
    teacher: &Path,
    student: &Path,
    mask: &MaskSourceArgs,
    weights: &WeightArgs,
) -> Result<LossInputs, AppError> {
    let teacher = LogitTensor::from_dense(&load_tensor(teacher)?)?;
    let student = LogitTensor::from_dense(&load_tensor(student)?)?;
    if (teacher.classes(), teacher.height(), teacher.width())
        != (student.classes(), student.height(), student.width())
    {
        return Err(AppError::Data(format!(
            "teacher logits {}x{}x{} and student logits {}x{}x{} differ in shape",
            teacher.classes(),
            teacher.height(),
            teacher.width(),
            student.classes(),
            student.height(),
            student.width()
        )));
    }
    let num_classes = teacher.classes();

    let (masks, edge_width, stride) = if let Some(mask_path) = &mask.masks {
        (SoftMaskStack::from_dense(&load_tensor(mask_path)?)?, None, None)
    } else {
        match mask.mask_source {
            MaskSource::Gt => {
                let labels_path = mask.labels.as_ref().ok_or_else(|| {
                    AppError::Usage("--labels is required with --mask-source gt".to_string())
                })?;
                let labels = load_label_map(labels_path)?;
                let expect_h = teacher.height() * mask.stride;
                let expect_w = teacher.width() * mask.stride;
                if (labels.height(), labels.width()) != (expect_h, expect_w) {
                    return Err(AppError::Data(format!(
                        "label map {}x{} does not match {}x{} logits at stride {}",
                        labels.height(),
                        labels.width(),
                        teacher.height(),
                        teacher.width(),
                        mask.stride
                    )));
                }
                let cfg = EdgeConfig::new(mask.width, mask.stride, num_classes)?;
                (build_soft_edge_masks(&labels, &cfg)?, Some(mask.width), Some(mask.stride))
            }
            MaskSource::Teacher => {
                let labels = labels_from_logits(&teacher);
                let cfg = EdgeConfig::new(mask.width, 1, num_classes)?;
                (build_soft_edge_masks(&labels, &cfg)?, Some(mask.width), Some(1))
            }
        }
    };
    if (masks.classes(), masks.height(), masks.width())
        != (teacher.classes(), teacher.height(), teacher.width())
    {
        return Err(AppError::Data(format!(
            "mask stack {}x{}x{} does not match logits {}x{}x{}",
            masks.classes(),
            masks.height(),
            masks.width(),
            teacher.classes(),
            teacher.height(),
            teacher.width()
        )));
    }

    let weights = LossWeights {
        lambda_body: weights.lambda_body,
        lambda_edge: weights.lambda_edge,
        alpha: weights.alpha.resolve(num_classes)?,
        temperature: weights.temperature,
    };
    Ok(LossInputs { teacher, student, masks, weights, edge_width, stride })
}

fn run_loss(args: LossArgs) -> Result<(), AppError> {
    let inputs = load_loss_inputs(&args.teacher, &args.student, &args.mask, &args.weights)?;
    let mut report = bpkd_loss(&inputs.teacher, &inputs.student, &inputs.masks, &inputs.weights)?;
    report.edge_width = inputs.edge_width;
    report.stride = inputs.stride;
    if let Some(grad_path) = &args.grad_out {
        let grad = bpkd_grad(&inputs.teacher, &inputs.student, &inputs.masks, &inputs.weights)?;
        save_tensor(&grad.to_dense(), grad_path)?;
    }
    let mut doc = ReportDocument::new();
    if let ReportValue::Map(map) = report.to_report_value() {
        doc.payload = map;
    }
    emit(&doc, args.out.as_deref())
}

fn run_gradcheck(args: GradcheckArgs) -> Result<(), AppError> {
    let inputs = load_loss_inputs(&args.teacher, &args.student, &args.mask, &args.weights)?;
    let mut analytic = bpkd_grad(&inputs.teacher, &inputs.student, &inputs.masks, &inputs.weights)?;
    if args.corrupt {
        let mut values = analytic.values().to_vec();
        values[0] += 0.01;
        analytic = GradientTensor::new(analytic.classes(), analytic.height(), analytic.width(), values)?;
    }
    let numeric = central_difference_grad(
        &inputs.teacher,
        &inputs.student,
        &inputs.masks,
        &inputs.weights,
        args.step,
    )?;
    let (max_abs, max_rel) = gradient_errors(&analytic, &numeric);
    let pass = max_rel < args.tolerance;
    let mut doc = ReportDocument::new();
    doc.insert("max_abs_error", ReportValue::Float(max_abs))
        .insert("max_rel_error", ReportValue::Float(max_rel))
        .insert("pass", ReportValue::Bool(pass))
        .insert("step", ReportValue::Float(args.step))
        .insert("tolerance", ReportValue::Float(args.tolerance));
    emit(&doc, args.out.as_deref())?;
    if pass {
        Ok(())
    } else {
        Err(AppError::Data(format!(
            "gradient check failed: max relative error {max_rel:e} exceeds {:e}",
            args.tolerance
        )))
    }
}

fn run_eval(args: EvalArgs) -> Result<(), AppError> {
    let pairs: Vec<(PathBuf, PathBuf)> =
        match (&args.pred, &args.gt, &args.pred_glob, &args.gt_glob) {
            (Some(p), Some(g), None, None) => vec![(p.clone(), g.clone())],
            (None, None, Some(pg), Some(gg)) => {
                let preds = expand_glob(pg)?;
                let gts = expand_glob(gg)?;
                if preds.len() != gts.len() {
                    return Err(AppError::Data(format!(
                        "glob pair mismatch: {} prediction files vs {} ground-truth files",
                        preds.len(),
                        gts.len()
                    )));
                }
                if preds.is_empty() {
                    return Err(AppError::Data(format!("no files match '{pg}'")));
                }
                preds.into_iter().zip(gts).collect()
            }
            _ => {
                return Err(AppError::Usage(
                    "provide --pred and --gt, or --pred-glob and --gt-glob".to_string(),
                ))
            }
        };

    let mut standard = ConfusionMatrix::empty(args.classes);
    let mut band = args.trimap_width.map(|_| ConfusionMatrix::empty(args.classes));
    for (pred_path, gt_path) in &pairs {
        let pred = load_label_map(pred_path)?;
        let gt = load_label_map(gt_path)?;
        standard.merge(&confusion(&pred, &gt, args.classes, None)?)?;
        if let (Some(acc), Some(width)) = (band.as_mut(), args.trimap_width) {
            let region = trimap_region(&gt, width)?;
            acc.merge(&confusion(&pred, &gt, args.classes, Some(&region))?)?;
        }
    }
    let standard_report = miou(&standard);
    if let Some(path) = &args.csv {
        std::fs::write(path, standard_report.to_csv())
            .map_err(|e| AppError::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut doc = ReportDocument::new();
    doc.insert("pairs", ReportValue::Int(pairs.len() as i64))
        .insert("standard", standard_report.to_report_value());
    if let (Some(acc), Some(width)) = (band, args.trimap_width) {
        let mut band_report = miou(&acc);
        band_report.band_width = Some(width);
        doc.insert("trimap", band_report.to_report_value());
    }
    emit(&doc, args.out.as_deref())
}

fn run_entropy(args: EntropyArgs) -> Result<(), AppError> {
    let features = load_tensor(&args.features)?;
    let entropy = entropy_map(&features)?;
    if let Some(path) = &args.out {
        save_tensor(&entropy.to_dense(), path)?;
    }
    if let Some(path) = &args.out_png {
        save_luma8(entropy.height(), entropy.width(), entropy.to_luma8(), path)?;
    }
    let mean = entropy.values().iter().sum::<f64>() / entropy.values().len() as f64;
    let mut doc = ReportDocument::new();
    doc.insert("height", ReportValue::Int(entropy.height() as i64))
        .insert("mean_entropy", ReportValue::Float(mean))
        .insert("width", ReportValue::Int(entropy.width() as i64));
    if let (Some(pred_path), Some(gt_path)) = (&args.pred, &args.gt) {
        let pred = load_label_map(pred_path)?;
        let gt = load_label_map(gt_path)?;
        let correlation = edge_entropy_accuracy(&entropy, &pred, &gt, args.trimap_width, args.bins)?;
        doc.insert("correlation", correlation.to_report_value())
            .insert("trimap_width", ReportValue::Int(args.trimap_width as i64));
    }
    emit(&doc, args.report.as_deref())
}

fn run_decompose(args: DecomposeArgs) -> Result<(), AppError> {
    let logits = LogitTensor::from_dense(&load_tensor(&args.logits)?)?;
    let masks = SoftMaskStack::from_dense(&load_tensor(&args.masks)?)?;
    let (edge, body) = decompose(&logits, &masks)?;
    let max_err = logits
        .values()
        .iter()
        .zip(edge.values().iter().zip(body.values()))
        .fold(0.0f64, |m, (&z, (&e, &b))| m.max((z - (e + b)).abs()));
    save_tensor(&edge.to_dense(), &args.out_edge)?;
    save_tensor(&body.to_dense(), &args.out_body)?;
    let mut doc = ReportDocument::new();
    doc.insert("max_reconstruction_error", ReportValue::Float(max_err))
        .insert("shape", ReportValue::ints(&[logits.classes(), logits.height(), logits.width()]));
    emit(&doc, None)
}

/// Minimal glob: a literal directory part plus a filename pattern where `*`
/// matches any run of characters. Matches come back sorted so pairing by
/// position is stable.
fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, AppError> {
    let (dir, file_pattern) = match pattern.rfind('/') {
        Some(pos) => (&pattern[..pos], &pattern[pos + 1..]),
        None => (".", pattern),
    };
    if dir.contains('*') {
        return Err(AppError::Usage(format!(
            "'{pattern}': wildcards are only supported in the filename part"
        )));
    }
    let entries = std::fs::read_dir(dir)
        .map_err(|e| AppError::Data(format!("cannot read directory {dir}: {e}")))?;
    let mut matches = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| AppError::Data(format!("cannot read directory {dir}: {e}")))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if wildcard_match(file_pattern, name) {
            matches.push(entry.path());
        }
    }
    matches.sort();
    Ok(matches)
}

/// Greedy `*` matcher with backtracking.
fn wildcard_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let n: Vec<char> = name.chars().collect();
    let (mut pi, mut ni) = (0usize, 0usize);
    let mut star: Option<(usize, usize)> = None;
    while ni < n.len() {
        if pi < p.len() && (p[pi] == '*' || p[pi] == n[ni]) {
            if p[pi] == '*' {
                star = Some((pi, ni));
                pi += 1;
            } else {
                pi += 1;
                ni += 1;
            }
        } else if let Some((sp, sn)) = star {
            pi = sp + 1;
            ni = sn + 1;
            star = Some((sp, sn + 1));
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}

#[cfg(test)]
mod tests {
    use super::wildcard_match;

    #[test]
    fn wildcards_match_runs() {
        assert!(wildcard_match("*.png", "a.png"));
        assert!(wildcard_match("pred_*.png", "pred_001.png"));
        assert!(wildcard_match("*", "anything"));
        assert!(wildcard_match("a*b*c", "aXXbYYc"));
        assert!(!wildcard_match("*.png", "a.npy"));
        assert!(!wildcard_match("pred_*.png", "gt_001.png"));
        assert!(wildcard_match("abc", "abc"));
        assert!(!wildcard_match("abc", "abcd"));
    }
}
