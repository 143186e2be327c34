//! The `rgbdkit` command line. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 1 when the
//! input fails validation or a check fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bev::{CrossViewFusion, DepthDistributionSpec, PoolBackend, Reduction};
use crate::dataset::{load_dataset, synth_sequence, validate_dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::eval_vos::{aggregate, evaluate_track, read_mask_predictions, write_mask_predictions};
use crate::eval_vot::{attribute_report, read_predictions, sweep, write_predictions, Aggregation, EvalTrack, TrackResult};
use crate::geometry::BEVGridSpec;
use crate::losses::{gradient_suite, LossConfig, SUITE_STEP, SUITE_TOLERANCE};
use crate::model::{CameraIntrinsics, Track};
use crate::report::{
    attributes_csv, curve_csv, to_json, vos_csv, AttributeReportOut, Fixed4, Raw, VosReport, VotReport,
};
use crate::tensor_io::Tensor;

#[derive(Debug, Parser)]
#[command(name = "rgbdkit", version, about = "RGB-D tracking toolkit: dataset checks, evaluation and BEV fusion")]
struct Cli {
    /// Worker threads; falls back to RGBDKIT_JOBS, then the number of cores
    #[arg(long, global = true, env = "RGBDKIT_JOBS", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every sequence under a dataset root and report all violations
    Validate {
        root: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Long-term box tracking evaluation (precision, recall, F over a threshold sweep)
    EvalVot {
        root: PathBuf,
        /// Directory holding <seq>/<target>.csv prediction files
        preds: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Pooled)]
        mode: Mode,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Segmentation evaluation (J, F and J&F) on annotated keyframes
    EvalVos {
        root: PathBuf,
        /// Directory holding <seq>/masks/<frame>_<target>.png prediction masks
        preds: PathBuf,
        /// Contour matching radius in pixels; defaults to 0.8% of the image diagonal
        #[arg(long, value_parser = non_negative, allow_hyphen_values = true)]
        radius: Option<f64>,
        /// Leave out the first and last annotated frame of each track
        #[arg(long)]
        exclude_ends: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Per-attribute precision, recall and F at the best overall threshold
    Attributes {
        root: PathBuf,
        preds: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Pooled)]
        mode: Mode,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Render synthetic sequences from a JSON spec (one object or a list) into a dataset root
    Synth {
        spec: PathBuf,
        out: PathBuf,
        /// Also write ground truth as perfect predictions under this directory
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Run the depth-guided BEV cross-view fusion on one feature map with seeded weights
    BevDemo(BevDemoArgs),
    /// Finite-difference gradient checks for every loss
    LossesCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample points per loss
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
        points: u32,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Pooled,
    PerTrack,
}

impl From<Mode> for Aggregation {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Pooled => Aggregation::Pooled,
            Mode::PerTrack => Aggregation::PerTrack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Naive,
    Accelerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReductionArg {
    Sum,
    Mean,
    Max,
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not a finite non-negative number"))
    }
}

fn floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_grid(s: &str) -> std::result::Result<BEVGridSpec, String> {
    let v = floats(s, 5)?;
    BEVGridSpec::new([v[0], v[1]], [v[2], v[3]], v[4]).map_err(|e| e.to_string())
}

fn parse_depth_spec(s: &str) -> std::result::Result<DepthDistributionSpec, String> {
    let v = floats(s, 4)?;
    if v[2].fract() != 0.0 || v[2] < 1.0 {
        return Err(format!("n_bins {} must be a positive integer", v[2]));
    }
    DepthDistributionSpec::new(v[0], v[1], v[2] as usize, v[3]).map_err(|e| e.to_string())
}

/// Parses `argv` (program name first) and runs the selected subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j as usize);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn emit(out: &OutputArgs, json: impl FnOnce() -> Result<String>, csv: impl FnOnce() -> String) -> Result<()> {
    let text = match out.format {
        Format::Json => json()?,
        Format::Csv => csv(),
    };
    write_out(out.output.as_deref(), &text)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Validate { root, out } => {
            let rep = validate_dataset(&root)?;
            emit(
                &out,
                || to_json(&rep),
                || {
                    let mut s = String::from("sequence,violation\n");
                    for seq in &rep.sequences {
                        for v in &seq.violations {
                            s.push_str(&format!("{},\"{}\"\n", seq.directory, v.to_string().replace('"', "\"\"")));
                        }
                    }
                    s
                },
            )?;
            Ok(if rep.is_clean() { 0 } else { 1 })
        }
        Command::EvalVot { root, preds, mode, out } => {
            let (tracks, results) = load_vot(&root, &preds)?;
            let eval = eval_tracks(&tracks, &results);
            let curve = sweep(&eval, mode.into())?;
            let report = VotReport::new(&curve, mode.into(), tracks.len());
            emit(&out, || to_json(&report), || curve_csv(&curve))?;
            Ok(0)
        }
        Command::Attributes { root, preds, mode, out } => {
            let (tracks, results) = load_vot(&root, &preds)?;
            let eval = eval_tracks(&tracks, &results);
            let curve = sweep(&eval, mode.into())?;
            let flags: Vec<_> = tracks.iter().map(|t| t.attributes.clone()).collect();
            let rep = attribute_report(&eval, &flags, &curve, mode.into())?;
            emit(&out, || to_json(&AttributeReportOut::new(&rep, mode.into())), || attributes_csv(&rep))?;
            Ok(0)
        }
        Command::EvalVos {
            root,
            preds,
            radius,
            exclude_ends,
            out,
        } => {
            let tracks = load_tracks(&root)?;
            let scores = tracks
                .par_iter()
                .map(|t| {
                    let p = read_mask_predictions(&preds, t)?;
                    evaluate_track(t, &p, radius)
                })
                .collect::<Result<Vec<_>>>()?;
            let total = aggregate(&scores, exclude_ends)?;
            let report = VosReport::new(&total, &scores, radius, exclude_ends)?;
            emit(&out, || to_json(&report), || vos_csv(&report))?;
            Ok(0)
        }
        Command::Synth { spec, out, predictions } => synth(&spec, &out, predictions.as_deref()),
        Command::BevDemo(a) => bev_demo(a),
        Command::LossesCheck { seed, points, out } => losses_check(seed, points as usize, &out),
    }
}

fn load_tracks(root: &Path) -> Result<Vec<Track>> {
    Ok(load_dataset(root)?.iter().flat_map(|s| s.tracks()).collect())
}

fn prediction_path(preds: &Path, t: &Track) -> PathBuf {
    preds.join(&t.sequence).join(format!("{}.csv", t.target))
}

fn load_vot(root: &Path, preds: &Path) -> Result<(Vec<Track>, Vec<TrackResult>)> {
    let tracks = load_tracks(root)?;
    let results = tracks
        .par_iter()
        .map(|t| read_predictions(&prediction_path(preds, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok((tracks, results))
}

fn eval_tracks<'a>(tracks: &'a [Track], results: &'a [TrackResult]) -> Vec<EvalTrack<'a>> {
    tracks
        .iter()
        .zip(results)
        .map(|(t, r)| EvalTrack { result: r, gt: &t.boxes })
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    One(Box<SynthSpec>),
    Many(Vec<SynthSpec>),
}

#[derive(Serialize)]
struct SynthSummary {
    id: String,
    directory: PathBuf,
    frames: usize,
    targets: usize,
    noise_seed: u64,
}

fn synth(spec_path: &Path, out: &Path, predictions: Option<&Path>) -> Result<i32> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let specs = match serde_json::from_str::<SpecFile>(&text).map_err(|e| Error::format(spec_path, e.to_string()))? {
        SpecFile::One(s) => vec![*s],
        SpecFile::Many(v) => v,
    };
    let mut summary = Vec::with_capacity(specs.len());
    for spec in &specs {
        let dir = out.join(&spec.id);
        let gt = synth_sequence(spec, &dir)?;
        if let Some(p) = predictions {
            for (track, full) in gt.tracks.iter().zip(&gt.full_masks) {
                write_predictions(&prediction_path(p, track), &TrackResult::from_ground_truth(&track.boxes))?;
                write_mask_predictions(p, track, full)?;
            }
        }
        summary.push(SynthSummary {
            id: spec.id.clone(),
            directory: dir,
            frames: gt.frames.len(),
            targets: gt.tracks.len(),
            noise_seed: spec.noise_seed,
        });
    }
    write_out(None, &to_json(&serde_json::json!({ "sequences": summary }))?)?;
    Ok(0)
}

#[derive(Debug, Args)]
struct BevDemoArgs {
    /// Feature map, C x H x W f32 tensor container
    feat: PathBuf,
    /// Depth map, 32-bit float TIFF in meters
    depth: PathBuf,
    /// Intrinsics JSON {fx, fy, cx, cy, width, height}
    k: PathBuf,
    /// Grid as x_min,x_max,z_min,z_max,cell in meters
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Option<BEVGridSpec>,
    /// Seed for the convolution weights
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the fused features (tensor container)
    #[arg(long, short, default_value = "icv.bin")]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Accelerated)]
    backend: BackendArg,
    #[arg(long, value_enum, default_value_t = ReductionArg::Sum)]
    reduction: ReductionArg,
    /// Depth bins as d_min,d_max,n_bins,sigma
    #[arg(long, value_parser = parse_depth_spec)]
    depth_bins: Option<DepthDistributionSpec>,
}

#[derive(Serialize)]
struct BevSummary {
    seed: u64,
    input: [usize; 3],
    output: PathBuf,
    output_dims: [usize; 3],
    grid: BEVGridSpec,
    grid_cells: [usize; 2],
    depth_bins: DepthDistributionSpec,
    backend: PoolBackend,
    reduction: Reduction,
    bev_mass: Fixed4,
    fused_mean: Fixed4,
    raw: BevRaw,
}

#[derive(Serialize)]
struct BevRaw {
    bev_mass: Raw,
    fused_mean: Raw,
}

fn bev_demo(a: BevDemoArgs) -> Result<i32> {
    let feat = Tensor::read(&a.feat)?.into_feature_map()?;
    let depth = crate::dataset::read_depth_tiff(&a.depth)?;
    let k_text = fs::read_to_string(&a.k).map_err(|e| Error::io(&a.k, e))?;
    let k: CameraIntrinsics = serde_json::from_str(&k_text).map_err(|e| Error::format(&a.k, e.to_string()))?;
    let mut pipeline = CrossViewFusion::with_random_weights(feat.channels(), a.seed)?;
    if let Some(g) = a.grid {
        pipeline.grid = g;
    }
    if let Some(d) = a.depth_bins {
        pipeline.depth_spec = d;
    }
    pipeline.backend = match a.backend {
        BackendArg::Naive => PoolBackend::Naive,
        BackendArg::Accelerated => PoolBackend::Accelerated,
    };
    pipeline.reduction = match a.reduction {
        ReductionArg::Sum => Reduction::Sum,
        ReductionArg::Mean => Reduction::Mean,
        ReductionArg::Max => Reduction::Max,
    };
    let out = pipeline.run(&feat, &depth, None, &k)?;
    Tensor::from(&out.fused).write(&a.output)?;
    let fused_mean = out.fused.sum() / out.fused.data().len().max(1) as f64;
    let summary = BevSummary {
        seed: a.seed,
        input: [feat.channels(), feat.height(), feat.width()],
        output: a.output,
        output_dims: [out.fused.channels(), out.fused.height(), out.fused.width()],
        grid: pipeline.grid,
        grid_cells: [pipeline.grid.rows(), pipeline.grid.cols()],
        depth_bins: pipeline.depth_spec,
        backend: pipeline.backend,
        reduction: pipeline.reduction,
        bev_mass: Fixed4(out.bev.sum()),
        fused_mean: Fixed4(fused_mean),
        raw: BevRaw {
            bev_mass: Raw(out.bev.sum()),
            fused_mean: Raw(fused_mean),
        },
    };
    write_out(None, &to_json(&summary)?)?;
    Ok(0)
}

#[derive(Serialize)]
struct CheckOut<F> {
    loss: &'static str,
    points: usize,
    max_rel_error: F,
    passed: bool,
}

#[derive(Serialize)]
struct LossesReport {
    seed: u64,
    points: usize,
    step: f64,
    tolerance: f64,
    passed: bool,
    checks: Vec<CheckOut<Fixed4>>,
    raw: Vec<CheckOut<Raw>>,
}

fn losses_check(seed: u64, points: usize, out: &OutputArgs) -> Result<i32> {
    let entries = gradient_suite(seed, points, &LossConfig::default())?;
    let passed = entries.iter().all(|e| e.passed);
    let report = LossesReport {
        seed,
        points,
        step: SUITE_STEP,
        tolerance: SUITE_TOLERANCE,
        passed,
        checks: entries
            .iter()
            .map(|e| CheckOut {
                loss: e.loss,
                points: e.points,
                max_rel_error: Fixed4(e.max_rel_error),
                passed: e.passed,
            })
            .collect(),
        raw: entries
            .iter()
            .map(|e| CheckOut {
                loss: e.loss,
                points: e.points,
                max_rel_error: Raw(e.max_rel_error),
                passed: e.passed,
            })
            .collect(),
    };
    emit(
        out,
        || to_json(&report),
        || {
            let mut s = format!("# seed {seed}\nloss,points,max_rel_error,passed\n");
            for e in &entries {
                s.push_str(&format!("{},{},{},{}\n", e.loss, e.points, e.max_rel_error, e.passed));
            }
            s
        },
    )?;
    Ok(if passed { 0 } else { 1 })
}
