//! `labelprop` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invalid input data,
//! 3 internal or I/O failure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelprop_core::flow::{
    estimate_flow, forward_backward_confidence, load_flow, save_flow, ConsistencyParams, FlowDirection, FlowMethod,
    FlowParams,
};
use labelprop_core::io::{
    export_synth, list_pngs, read_detections_json, read_frame, read_labels_csv, read_mask_png, read_rgb,
    read_scores_csv, read_series_csv, require_same_keys, write_png, FlowOrigin, SynthExportOptions,
};
use labelprop_core::metrics::{
    classification_scores, detection_ap, evaluate_anticipation, evaluate_segmentation, to_json, to_text,
    AnticipationEval, MatchKernel, DEFAULT_IOU_THRESHOLD,
};
use labelprop_core::model::MaskKind;
use labelprop_core::overlay::overlay_panels;
use labelprop_core::pipeline::{run_interpolation, write_interpolation, InterpolateConfig};
use labelprop_core::synth::SynthScene;
use labelprop_core::warp::with_jobs;
use labelprop_core::Error;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "labelprop", version, about = "Key-frame label propagation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate key-frame masks to every frame and write pseudo-labels.
    Interpolate(InterpolateArgs),
    /// Compute evaluation metrics.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Estimate or check optical flow.
    #[command(subcommand)]
    Flow(FlowCommand),
    /// Render RGB | mask | overlay panels.
    Overlay(OverlayArgs),
    /// Write a synthetic dataset video with analytic ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct InterpolateArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    flow_source: Option<FlowSourceArg>,
    #[arg(long)]
    max_hop: Option<u32>,
    #[arg(long)]
    pseudo_weight: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FlowSourceArg {
    Builtin,
    Files,
}

#[derive(Debug, Subcommand)]
enum EvaluateCommand {
    /// Semantic segmentation: directories of mask PNGs with matching file names.
    Seg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Restrict to these class ids (comma separated).
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<u8>>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Detection AP from JSON detection lists.
    Det {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        #[arg(long, value_enum, default_value_t = KernelArg::Box)]
        kernel: KernelArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Frame classification from `frame,score...` and `frame,label` CSV files.
    Cls {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Remaining-time anticipation from `frame,remaining` CSV files.
    Anticipation {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Horizon in seconds, e.g. 25 or 300.
        #[arg(long)]
        horizon: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
struct OutArg {
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Box,
    Mask,
}

#[derive(Debug, Subcommand)]
enum FlowCommand {
    /// Estimate the flow mapping image A onto image B.
    Estimate {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Hs)]
        method: MethodArg,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Forward-backward consistency of a flow pair.
    Check {
        forward: PathBuf,
        backward: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Hs,
    Lk,
}

#[derive(Debug, Args)]
struct OverlayArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    masks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SceneArg::Translating)]
    scene: SceneArg,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write probability maps with this peak probability.
    #[arg(long)]
    prob_peak: Option<f64>,
    /// Skip the analytic flow files.
    #[arg(long)]
    no_flows: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SceneArg {
    Translating,
    Crossing,
    Static,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam { .. } => Failure::Usage(e.to_string()),
            Error::Io { .. } => Failure::Internal(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Interpolate(a) => interpolate(a),
        Command::Evaluate(c) => evaluate(c),
        Command::Flow(c) => flow(c),
        Command::Overlay(a) => overlay(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_config(path: &Path) -> CliResult<InterpolateConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = InterpolateConfig::from_toml(&text)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
    // relative paths in the file are relative to the file
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.dataset, &mut cfg.out].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

fn interpolate(a: InterpolateArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => InterpolateConfig::default(),
    };
    if let Some(d) = a.dataset {
        cfg.dataset = Some(d);
    }
    if let Some(o) = a.out {
        cfg.out = Some(o);
    }
    if let Some(s) = a.flow_source {
        cfg.flow.source = match s {
            FlowSourceArg::Builtin => FlowOrigin::Builtin,
            FlowSourceArg::Files => FlowOrigin::Files,
        };
    }
    if let Some(h) = a.max_hop {
        cfg.propagation.max_hop = h;
    }
    if let Some(w) = a.pseudo_weight {
        cfg.pseudo_weight = w;
    }
    if cfg.dataset.is_none() {
        return Err(Failure::Usage("missing required key `dataset` (config or --dataset)".into()));
    }
    let Some(out) = cfg.out.clone() else {
        return Err(Failure::Usage("missing required key `out` (config or --out)".into()));
    };
    cfg.validate()?;
    let run = run_interpolation(&cfg, a.jobs)?;
    write_interpolation(&out, &run)?;
    print!("{}", run.report.to_text());
    Ok(())
}

fn emit<R: Serialize>(report: &R, out: Option<&Path>) -> CliResult {
    let text = to_text(report);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
        let write = |name: &str, body: &str| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Failure::Internal(format!("{}: {e}", p.display())))
        };
        write("report.json", &to_json(report))?;
        write("report.txt", &text)?;
    }
    print!("{text}");
    Ok(())
}

fn evaluate(c: EvaluateCommand) -> CliResult {
    match c {
        EvaluateCommand::Seg { pred, gt, classes, out } => {
            let p = list_pngs(&pred)?;
            let g = list_pngs(&gt)?;
            require_same_keys(&p, &g, "frame set")?;
            let kind = MaskKind::Semantic;
            let preds = p.values().map(|f| read_mask_png(f, &kind)).collect::<Result<Vec<_>, _>>()?;
            let gts = g.values().map(|f| read_mask_png(f, &kind)).collect::<Result<Vec<_>, _>>()?;
            let classes: Option<BTreeSet<u8>> = classes.map(|c| c.into_iter().collect());
            let report = evaluate_segmentation(&preds, &gts, classes.as_ref())?;
            emit(&report, out.out.as_deref())
        }
        EvaluateCommand::Det { pred, gt, iou, kernel, out } => {
            let p = read_detections_json(&pred)?;
            let g = read_detections_json(&gt)?;
            let pf: BTreeMap<u32, ()> = p.iter().map(|d| (d.frame, ())).collect();
            let gf: BTreeMap<u32, ()> = g.iter().map(|d| (d.frame, ())).collect();
            if let Some(extra) = pf.keys().find(|f| !gf.contains_key(f)) {
                return Err(Failure::Data(format!("predictions reference frame {extra}, absent from ground truth")));
            }
            let kernel = match kernel {
                KernelArg::Box => MatchKernel::Box,
                KernelArg::Mask => MatchKernel::Mask,
            };
            let report = detection_ap(&p, &g, iou, kernel)?;
            emit(&report, out.out.as_deref())
        }
        EvaluateCommand::Cls { pred, gt, out } => {
            let p = read_scores_csv(&pred)?;
            let g = read_labels_csv(&gt)?;
            require_same_keys(&p, &g, "frame set")?;
            let scores: Vec<Vec<f64>> = p.into_values().collect();
            let labels: Vec<usize> = g.into_values().collect();
            let report = classification_scores(&scores, &labels)?;
            emit(&report, out.out.as_deref())
        }
        EvaluateCommand::Anticipation { pred, gt, horizon, out } => {
            let p = read_series_csv(&pred)?;
            let g = read_series_csv(&gt)?;
            require_same_keys(&p, &g, "frame set")?;
            let e = AnticipationEval::new(horizon, p.into_values().collect(), g.into_values().collect())?;
            emit(&evaluate_anticipation(&e), out.out.as_deref())
        }
    }
}

#[derive(Serialize)]
struct CheckReport {
    pixels: usize,
    in_bounds_fraction: f64,
    valid_fraction: f64,
    mean_discrepancy: Option<f64>,
    p50_discrepancy: Option<f64>,
    p95_discrepancy: Option<f64>,
    max_discrepancy: Option<f64>,
}

fn percentile(sorted: &[f32], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    Some(sorted[i] as f64)
}

fn flow(c: FlowCommand) -> CliResult {
    match c {
        FlowCommand::Estimate { a, b, out, method, alpha, iterations, levels } => {
            let ia = read_frame::<f32>(&a)?;
            let ib = read_frame::<f32>(&b)?;
            let mut params = FlowParams {
                method: match method {
                    MethodArg::Hs => FlowMethod::HornSchunck,
                    MethodArg::Lk => FlowMethod::PyramidalLk,
                },
                ..FlowParams::default()
            };
            if let Some(v) = alpha {
                params.smoothness_alpha = v;
            }
            if let Some(v) = iterations {
                params.iterations = v;
            }
            if let Some(v) = levels {
                params.pyramid_levels = v;
            }
            let est = estimate_flow(&ia, &ib, FlowDirection::new(0, 1), &params)?;
            if est.under_constrained {
                eprintln!("warning: images carry no gradient; wrote the zero field");
            }
            save_flow(&est.field, &out)?;
            Ok(())
        }
        FlowCommand::Check { forward, backward, sigma, out } => {
            let f = load_flow(&forward, FlowDirection::new(0, 1))?;
            let b = load_flow(&backward, FlowDirection::new(1, 0))?;
            let mut params = ConsistencyParams::default();
            if let Some(s) = sigma {
                params.sigma = s;
            }
            let fb = forward_backward_confidence(&f, &b, &params)?;
            let d = fb.sorted_discrepancies();
            let report = CheckReport {
                pixels: fb.valid.len(),
                in_bounds_fraction: fb.in_bounds_fraction(),
                valid_fraction: fb.valid_fraction(),
                mean_discrepancy: (!d.is_empty()).then(|| d.iter().map(|&v| v as f64).sum::<f64>() / d.len() as f64),
                p50_discrepancy: percentile(&d, 0.5),
                p95_discrepancy: percentile(&d, 0.95),
                max_discrepancy: d.last().map(|&v| v as f64),
            };
            emit(&report, out.out.as_deref())
        }
    }
}

fn overlay(a: OverlayArgs) -> CliResult {
    let frames = list_pngs(&a.frames)?;
    let masks = list_pngs(&a.masks)?;
    require_same_keys(&masks, &frames, "frame/mask set")?;
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> = masks.iter().map(|(k, m)| (k, &frames[k], m)).collect();
    let rendered = with_jobs(a.jobs, || {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|(k, f, m)| {
                let rgb = read_rgb(f)?;
                let mask = read_mask_png(m, &MaskKind::Semantic)?;
                Ok(((*k).clone(), overlay_panels(&rgb, &mask)?))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::Internal(format!("{}: {e}", a.out.display())))?;
    for (k, img) in &rendered {
        write_png(img, &a.out.join(format!("{k}.png")))?;
    }
    println!("panels = {}", rendered.len());
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    let scene = match a.scene {
        SceneArg::Translating => SynthScene::translating(a.seed),
        SceneArg::Crossing => SynthScene::crossing(a.seed),
        SceneArg::Static => SynthScene::static_scene(a.seed),
    };
    if let Some(p) = a.prob_peak {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Failure::Usage(format!("--prob-peak {p} outside (0, 1]")));
        }
    }
    let opts = SynthExportOptions { flows: !a.no_flows, prob_peak: a.prob_peak };
    let dir = export_synth(&scene, &a.out, &opts)?;
    println!("video = {}", dir.display());
    Ok(())
}
