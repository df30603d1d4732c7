//! atrk: batch front end for the apex-tracking pipeline.
//!
//! Subcommands compose the library stages: `convert` turns Pascal VOC
//! annotations into COCO JSON, `synth` writes scripted tensor sequences,
//! `track` decodes and associates a tensor directory into a trace,
//! `eval`/`sweep` score traces against ground truth. Every command writes a
//! manifest next to its outputs.

mod manifest;
mod tensors;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use apextrack::dataset::{
    emit_coco, gt_tracks, parse_coco, parse_voc, write_tensor_file, GroundTruthTrack, TensorData,
};
use apextrack::decoder::DecodeConfig;
use apextrack::eval::{
    compute_metrics, filter_by_confidence, format_report_table, parse_trace_csv, render_trace,
    reports_to_jsonl, run_pipeline, sweep_thresholds, EvalReport,
};
use apextrack::synth::{
    default_sigma, gen_trajectory, render_frame, TrajectoryKind, TrajectorySpec,
};
use apextrack::tracker::TrackerConfig;
use apextrack::GridSpec;

use manifest::{ManifestConfig, RunManifest};
use tensors::{frame_paths, load_tensor_dir};

#[derive(Parser)]
#[command(name = "atrk", version, about = "Center-point apex tracking pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone)]
struct ThresholdList(Vec<f64>);

fn parse_threshold_list(s: &str) -> Result<ThresholdList, String> {
    let values: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| format!("bad threshold list {s:?}: {e}"))?;
    if values.is_empty() {
        return Err("threshold list is empty".into());
    }
    Ok(ThresholdList(values))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected X,Y but got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {v:?}: {e}"))
    };
    Ok((parse(a)?, parse(b)?))
}

fn parse_grid_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH but got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<u32>()
            .map_err(|e| format!("bad dimension {v:?}: {e}"))
    };
    Ok((parse(w)?, parse(h)?))
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Stationary,
    Linear,
    Circumnutation,
    RandomWalk,
}

impl From<KindArg> for TrajectoryKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Stationary => TrajectoryKind::Stationary,
            KindArg::Linear => TrajectoryKind::Linear,
            KindArg::Circumnutation => TrajectoryKind::Circumnutation,
            KindArg::RandomWalk => TrajectoryKind::RandomWalk,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert a directory of Pascal VOC XML files to one COCO JSON file.
    Convert {
        /// Directory containing VOC .xml annotation files.
        voc_dir: PathBuf,
        /// Output COCO JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode and track a directory of per-frame ATRK tensor triplets.
    Track {
        /// Directory of frame_%06d.{hm,sz,dp}.atrk files.
        tensor_dir: PathBuf,
        /// Tracking threshold on detection confidence.
        #[arg(long, default_value_t = 0.3)]
        threshold: f64,
        /// Maximum detections kept per frame.
        #[arg(long = "top-k", default_value_t = 100)]
        top_k: usize,
        /// Multiplier on the size-derived gating radius.
        #[arg(long = "gating-scale", default_value_t = 1.0)]
        gating_scale: f64,
        /// Frames an unmatched tracklet stays matchable.
        #[arg(long = "memory-frames", default_value_t = 1)]
        memory_frames: u64,
        /// Output directory for trace.csv, trace.svg and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trace CSV against COCO ground truth.
    Eval {
        /// Trace CSV written by `track`.
        trace_csv: PathBuf,
        /// COCO JSON ground truth for one video.
        gt_coco: PathBuf,
        /// Tracking threshold; trace points below it are ignored.
        #[arg(long, default_value_t = 0.3)]
        threshold: f64,
        /// Output directory for reports.jsonl and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run decode + track + eval across several thresholds.
    Sweep {
        /// Directory of frame_%06d.{hm,sz,dp}.atrk files.
        tensor_dir: PathBuf,
        /// COCO JSON ground truth for one video.
        gt_coco: PathBuf,
        /// Comma-separated thresholds, e.g. 0.3,0.4.
        #[arg(long, value_parser = parse_threshold_list)]
        thresholds: ThresholdList,
        #[arg(long = "top-k", default_value_t = 100)]
        top_k: usize,
        #[arg(long = "gating-scale", default_value_t = 1.0)]
        gating_scale: f64,
        #[arg(long = "memory-frames", default_value_t = 1)]
        memory_frames: u64,
        /// Output directory for reports.jsonl and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic tensor sequence plus COCO ground truth.
    Synth {
        /// Motion model.
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Start position, X,Y in pixels.
        #[arg(long, value_parser = parse_pair, default_value = "0,0")]
        start: (f64, f64),
        /// Velocity or random-walk step bound, VX,VY px/frame.
        #[arg(long, value_parser = parse_pair, default_value = "0,0")]
        velocity: (f64, f64),
        /// Circumnutation radius in pixels.
        #[arg(long, default_value_t = 0.0)]
        amplitude: f64,
        /// Circumnutation period in frames.
        #[arg(long, default_value_t = 2)]
        period: u64,
        /// Upward drift in px/frame.
        #[arg(long = "growth-rate", default_value_t = 0.0)]
        growth_rate: f64,
        /// PRNG seed (ChaCha8) for random walks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of frames to generate.
        #[arg(long, default_value_t = 1)]
        frames: u64,
        /// Object box size, W,H in pixels.
        #[arg(long, value_parser = parse_pair, default_value = "16,16")]
        size: (f64, f64),
        /// Image size as WxH pixels.
        #[arg(long, value_parser = parse_grid_size)]
        grid: (u32, u32),
        /// Down-sampling factor between image and tensor grids.
        #[arg(long, default_value_t = 4)]
        downsample: u32,
        /// Gaussian splat width in grid cells; derived from the object size
        /// when omitted.
        #[arg(long)]
        sigma: Option<f64>,
        /// Video id written into the ground-truth COCO file.
        #[arg(long = "video-id", default_value = "synth")]
        video_id: String,
        /// Accept trajectories that get clamped at the image border.
        #[arg(long)]
        clamp: bool,
        /// Output directory for tensors, gt.json and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ATRK_LOG")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert { voc_dir, out } => cmd_convert(&voc_dir, &out),
        Command::Track {
            tensor_dir,
            threshold,
            top_k,
            gating_scale,
            memory_frames,
            out,
        } => cmd_track(&tensor_dir, threshold, top_k, gating_scale, memory_frames, &out),
        Command::Eval {
            trace_csv,
            gt_coco,
            threshold,
            out,
        } => cmd_eval(&trace_csv, &gt_coco, threshold, &out),
        Command::Sweep {
            tensor_dir,
            gt_coco,
            thresholds,
            top_k,
            gating_scale,
            memory_frames,
            out,
        } => cmd_sweep(
            &tensor_dir,
            &gt_coco,
            &thresholds.0,
            top_k,
            gating_scale,
            memory_frames,
            &out,
        ),
        Command::Synth {
            kind,
            start,
            velocity,
            amplitude,
            period,
            growth_rate,
            seed,
            frames,
            size,
            grid,
            downsample,
            sigma,
            video_id,
            clamp,
            out,
        } => {
            let spec = TrajectorySpec {
                kind: kind.into(),
                start,
                velocity,
                amplitude,
                period,
                growth_rate,
                seed,
                frames,
                object_size: size,
            };
            cmd_synth(&spec, grid, downsample, sigma, &video_id, clamp, &out)
        }
    }
}

fn list_xml_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_convert(voc_dir: &Path, out: &Path) -> Result<()> {
    let files = list_xml_files(voc_dir)?;
    if files.is_empty() {
        bail!("no VOC XML files in {}", voc_dir.display());
    }
    let docs: Vec<String> = files
        .iter()
        .map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<_>>()?;
    let set = parse_voc(&docs).map_err(|e| match &e {
        apextrack::Error::VocParse { index, .. } | apextrack::Error::VocValidation { index, .. } => {
            anyhow!("{}: {e}", files[*index].display())
        }
        _ => anyhow!(e),
    })?;
    log::info!(
        "parsed {} images, {} boxes from {}",
        set.images().len(),
        set.boxes().len(),
        voc_dir.display()
    );
    let coco = emit_coco(&set);

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, coco).with_context(|| format!("writing {}", out.display()))?;
    RunManifest::new("convert", ManifestConfig::default())
        .with_inputs(&files)?
        .with_outputs(&[out.to_path_buf()])
        .write(&manifest_path_for_file(out))
}

fn manifest_path_for_file(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.manifest.json", out.display()))
}

fn cmd_track(
    tensor_dir: &Path,
    threshold: f64,
    top_k: usize,
    gating_scale: f64,
    memory_frames: u64,
    out: &Path,
) -> Result<()> {
    let loaded = load_tensor_dir(tensor_dir)?;
    let decode_config = DecodeConfig::new(top_k, threshold)?;
    let tracker_config = TrackerConfig::new(gating_scale, memory_frames)?;
    let table = run_pipeline(&loaded.frames, &decode_config, &tracker_config)?;
    log::info!(
        "tracked {} frames into {} tracklets",
        loaded.frames.len(),
        table.len()
    );

    let canvas = *loaded.frames[0].heatmap().grid();
    let trace = render_trace(&table, None, &canvas);
    fs::create_dir_all(out)?;
    let csv_path = out.join("trace.csv");
    let svg_path = out.join("trace.svg");
    fs::write(&csv_path, &trace.csv)?;
    fs::write(&svg_path, &trace.svg)?;

    RunManifest::new(
        "track",
        ManifestConfig {
            threshold: Some(threshold),
            top_k: Some(top_k),
            gating_scale: Some(gating_scale),
            memory_frames: Some(memory_frames),
            grid: Some(format!("{}x{}", canvas.width_px(), canvas.height_px())),
            downsample: Some(canvas.downsample()),
            ..ManifestConfig::default()
        },
    )
    .with_inputs(&loaded.paths)?
    .with_outputs(&[csv_path, svg_path])
    .write(&out.join("manifest.json"))
}

fn load_single_gt(gt_coco: &Path) -> Result<GroundTruthTrack> {
    let json = fs::read_to_string(gt_coco)
        .with_context(|| format!("reading {}", gt_coco.display()))?;
    let set = parse_coco(&json)?;
    let mut tracks = gt_tracks(&set)?;
    match tracks.len() {
        1 => Ok(tracks.remove(0)),
        0 => bail!("{} contains no annotated video", gt_coco.display()),
        _ => bail!(
            "{} contains multiple videos ({}); expected one",
            gt_coco.display(),
            tracks
                .iter()
                .map(|t| t.video_id().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn write_reports(reports: &[EvalReport], out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join("reports.jsonl");
    fs::write(&path, reports_to_jsonl(reports))?;
    Ok(path)
}

fn cmd_eval(trace_csv: &Path, gt_coco: &Path, threshold: f64, out: &Path) -> Result<()> {
    let csv = fs::read_to_string(trace_csv)
        .with_context(|| format!("reading {}", trace_csv.display()))?;
    let table = filter_by_confidence(&parse_trace_csv(&csv)?, threshold)?;
    let gt = load_single_gt(gt_coco)?;
    let total_frames = gt
        .max_frame()
        .with_context(|| format!("{} has no annotated frames", gt_coco.display()))?
        + 1;
    let report = compute_metrics(&table, &gt, total_frames, threshold)
        .context("trace does not fit the ground truth frame range")?;

    print!("{}", format_report_table(std::slice::from_ref(&report)));
    let reports_path = write_reports(std::slice::from_ref(&report), out)?;
    RunManifest::new(
        "eval",
        ManifestConfig {
            threshold: Some(threshold),
            ..ManifestConfig::default()
        },
    )
    .with_inputs(&[trace_csv.to_path_buf(), gt_coco.to_path_buf()])?
    .with_outputs(&[reports_path])
    .write(&out.join("manifest.json"))
}

fn cmd_sweep(
    tensor_dir: &Path,
    gt_coco: &Path,
    thresholds: &[f64],
    top_k: usize,
    gating_scale: f64,
    memory_frames: u64,
    out: &Path,
) -> Result<()> {
    let loaded = load_tensor_dir(tensor_dir)?;
    let gt = load_single_gt(gt_coco)?;
    if let Some(max) = gt.max_frame() {
        if max >= loaded.frames.len() as u64 {
            bail!(
                "frame-count mismatch: {} tensors vs ground truth through frame {}",
                loaded.frames.len(),
                max
            );
        }
    }
    let tracker_config = TrackerConfig::new(gating_scale, memory_frames)?;
    let reports = sweep_thresholds(&loaded.frames, &gt, thresholds, top_k, &tracker_config)?;

    print!("{}", format_report_table(&reports));
    let reports_path = write_reports(&reports, out)?;
    let mut inputs = loaded.paths.clone();
    inputs.push(gt_coco.to_path_buf());
    RunManifest::new(
        "sweep",
        ManifestConfig {
            thresholds: Some(thresholds.to_vec()),
            top_k: Some(top_k),
            gating_scale: Some(gating_scale),
            memory_frames: Some(memory_frames),
            ..ManifestConfig::default()
        },
    )
    .with_inputs(&inputs)?
    .with_outputs(&[reports_path])
    .write(&out.join("manifest.json"))
}

fn cmd_synth(
    spec: &TrajectorySpec,
    grid_size: (u32, u32),
    downsample: u32,
    sigma: Option<f64>,
    video_id: &str,
    clamp: bool,
    out: &Path,
) -> Result<()> {
    let grid = GridSpec::single_class(grid_size.0, grid_size.1, downsample)?;
    let trajectory = gen_trajectory(spec, &grid)?;
    if trajectory.was_clamped() && !clamp {
        bail!(
            "trajectory leaves the {}x{} image; pass --clamp to accept clamped positions",
            grid_size.0,
            grid_size.1
        );
    }
    let sigma = sigma.unwrap_or_else(|| default_sigma(spec.object_size, &grid));

    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let mut prev = trajectory.points()[0].center;
    for point in trajectory.points() {
        let (hm, sz, dp) = render_frame(prev, point.center, point.size, &grid, sigma)?;
        let (hm_path, sz_path, dp_path) = frame_paths(out, point.frame);
        fs::write(&hm_path, write_tensor_file(&TensorData::Heatmap(hm)))?;
        fs::write(&sz_path, write_tensor_file(&TensorData::Size(sz)))?;
        fs::write(&dp_path, write_tensor_file(&TensorData::Displacement(dp)))?;
        outputs.extend([hm_path, sz_path, dp_path]);
        prev = point.center;
    }

    let gt_path = out.join("gt.json");
    fs::write(
        &gt_path,
        emit_coco(&trajectory.to_annotation_set(&grid, video_id)),
    )?;
    outputs.push(gt_path);
    log::info!(
        "wrote {} tensor files + ground truth to {}",
        outputs.len() - 1,
        out.display()
    );

    RunManifest::new(
        "synth",
        ManifestConfig {
            sigma: Some(sigma),
            seed: Some(spec.seed),
            grid: Some(format!("{}x{}", grid_size.0, grid_size.1)),
            downsample: Some(downsample),
            ..ManifestConfig::default()
        },
    )
    .with_inputs(&[])?
    .with_outputs(&outputs)
    .write(&out.join("manifest.json"))
}
