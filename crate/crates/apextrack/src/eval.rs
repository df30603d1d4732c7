//! Evaluation: center MSE plus failed-frame and more-object-frame counts,
//! threshold sweeps over raw decoder inputs, and trace rendering (CSV + SVG).
//!
//! Metric definitions, since they fix comparability of reported numbers:
//! the center MSE is the mean over evaluated frames of the squared Euclidean
//! distance between predicted and ground-truth centers, in full-resolution
//! pixels. A frame is evaluated when it has at least one detection and a
//! ground-truth entry. Frames with zero detections count as failed (when
//! ground truth exists there) and contribute nothing to the MSE; frames with
//! two or more detections count as more-object frames and are evaluated at
//! the highest-confidence detection (ties to the lowest track id).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::GroundTruthTrack;
use crate::decoder::{decode, DecodeConfig};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tensor::{DisplacementField, Heatmap, SizeMap};
use crate::track::{TrackPoint, TrackTable, Tracklet};
use crate::tracker::{associate_frame, TrackerConfig};

/// One evaluation row, mirroring the per-video result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    video_id: String,
    center_mse: f64,
    failed_frames: u64,
    more_object_frames: u64,
    total_frames: u64,
    threshold: f64,
}

impl EvalReport {
    pub fn new(
        video_id: impl Into<String>,
        center_mse: f64,
        failed_frames: u64,
        more_object_frames: u64,
        total_frames: u64,
        threshold: f64,
    ) -> Result<Self> {
        if total_frames == 0 {
            return Err(Error::ZeroTotalFrames);
        }
        if !center_mse.is_finite() || center_mse < 0.0 {
            return Err(Error::ValueOutOfRange(format!(
                "center MSE {center_mse} must be >= 0"
            )));
        }
        if failed_frames > total_frames || more_object_frames > total_frames {
            return Err(Error::ValueOutOfRange(format!(
                "frame counts ({failed_frames} failed, {more_object_frames} more-object) \
                 exceed total {total_frames}"
            )));
        }
        if !threshold.is_finite() || !(0.0..=1.0).contains(&threshold) {
            return Err(Error::ThresholdOutOfRange(threshold));
        }
        Ok(Self {
            video_id: video_id.into(),
            center_mse,
            failed_frames,
            more_object_frames,
            total_frames,
            threshold,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn center_mse(&self) -> f64 {
        self.center_mse
    }

    pub fn failed_frames(&self) -> u64 {
        self.failed_frames
    }

    pub fn more_object_frames(&self) -> u64 {
        self.more_object_frames
    }

    pub fn total_frames(&self) -> u64 {
        self.total_frames
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// The three decoder inputs for one frame, validated to share one grid
/// geometry.
#[derive(Clone, Debug)]
pub struct FrameTensors {
    heatmap: Heatmap,
    sizes: SizeMap,
    displacement: DisplacementField,
}

impl FrameTensors {
    pub fn new(heatmap: Heatmap, sizes: SizeMap, displacement: DisplacementField) -> Result<Self> {
        if !heatmap.grid().same_geometry(sizes.grid())
            || !heatmap.grid().same_geometry(displacement.grid())
        {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            heatmap,
            sizes,
            displacement,
        })
    }

    pub fn heatmap(&self) -> &Heatmap {
        &self.heatmap
    }

    pub fn sizes(&self) -> &SizeMap {
        &self.sizes
    }

    pub fn displacement(&self) -> &DisplacementField {
        &self.displacement
    }
}

/// Decode + track over a tensor sequence, producing the final track table.
pub fn run_pipeline(
    frames: &[FrameTensors],
    decode_config: &DecodeConfig,
    tracker_config: &TrackerConfig,
) -> Result<TrackTable> {
    if let Some(first) = frames.first() {
        if frames
            .iter()
            .any(|f| !f.heatmap.grid().same_geometry(first.heatmap.grid()))
        {
            return Err(Error::GridMismatch);
        }
    }
    let mut table = TrackTable::new();
    for (frame, input) in frames.iter().enumerate() {
        let detections = decode(&input.heatmap, &input.sizes, decode_config)?;
        associate_frame(
            &mut table,
            &detections,
            &input.displacement,
            frame as u64,
            tracker_config,
        )?;
    }
    Ok(table)
}

/// Per-frame view of a track table: detection count plus the
/// highest-confidence point (ties to the lowest track id).
fn frame_summary(predicted: &TrackTable, total_frames: u64) -> Result<HashMap<u64, (u64, TrackPoint)>> {
    let mut by_frame: HashMap<u64, (u64, TrackPoint, u64)> = HashMap::new();
    for tracklet in predicted.all_tracklets() {
        for point in tracklet.history() {
            if point.frame >= total_frames {
                return Err(Error::FrameCountMismatch {
                    frame: point.frame,
                    total_frames,
                });
            }
            match by_frame.get_mut(&point.frame) {
                None => {
                    by_frame.insert(point.frame, (1, *point, tracklet.id()));
                }
                Some((count, best, best_id)) => {
                    *count += 1;
                    let replace = point.confidence > best.confidence
                        || (point.confidence == best.confidence && tracklet.id() < *best_id);
                    if replace {
                        *best = *point;
                        *best_id = tracklet.id();
                    }
                }
            }
        }
    }
    Ok(by_frame
        .into_iter()
        .map(|(f, (count, best, _))| (f, (count, best)))
        .collect())
}

/// Computes the per-video report for a tracked sequence against ground
/// truth. `threshold` is recorded in the report, not re-applied.
pub fn compute_metrics(
    predicted: &TrackTable,
    gt: &GroundTruthTrack,
    total_frames: u64,
    threshold: f64,
) -> Result<EvalReport> {
    if total_frames == 0 {
        return Err(Error::ZeroTotalFrames);
    }
    if !threshold.is_finite() || !(0.0..=1.0).contains(&threshold) {
        return Err(Error::ThresholdOutOfRange(threshold));
    }
    if let Some(max) = gt.max_frame() {
        if max >= total_frames {
            return Err(Error::GtBeyondRange {
                frame: max,
                total_frames,
            });
        }
    }

    let by_frame = frame_summary(predicted, total_frames)?;
    let gt_by_frame: HashMap<u64, (f64, f64)> =
        gt.points().iter().map(|p| (p.frame, p.center)).collect();

    let mut failed = 0u64;
    let mut more = 0u64;
    let mut sum_sq = 0.0f64;
    let mut evaluated = 0u64;
    for frame in 0..total_frames {
        let gt_center = gt_by_frame.get(&frame);
        match by_frame.get(&frame) {
            None => {
                if gt_center.is_some() {
                    failed += 1;
                }
            }
            Some(&(count, best)) => {
                if count >= 2 {
                    more += 1;
                }
                if let Some(&(gx, gy)) = gt_center {
                    let (dx, dy) = (best.center.0 - gx, best.center.1 - gy);
                    sum_sq += dx * dx + dy * dy;
                    evaluated += 1;
                }
            }
        }
    }
    let mse = if evaluated > 0 {
        sum_sq / evaluated as f64
    } else {
        0.0
    };
    EvalReport::new(gt.video_id(), mse, failed, more, total_frames, threshold)
}

/// Re-runs decode + tracking + metrics once per threshold on the same
/// inputs. Reports come back in the order the thresholds were given.
pub fn sweep_thresholds(
    frames: &[FrameTensors],
    gt: &GroundTruthTrack,
    thresholds: &[f64],
    top_k: usize,
    tracker_config: &TrackerConfig,
) -> Result<Vec<EvalReport>> {
    if thresholds.is_empty() {
        return Err(Error::EmptyThresholds);
    }
    if frames.is_empty() {
        return Err(Error::ZeroTotalFrames);
    }
    let mut reports = Vec::with_capacity(thresholds.len());
    for &theta in thresholds {
        let decode_config = DecodeConfig::new(top_k, theta)?;
        let table = run_pipeline(frames, &decode_config, tracker_config)?;
        reports.push(compute_metrics(&table, gt, frames.len() as u64, theta)?);
    }
    Ok(reports)
}

/// Byte-deterministic trace renderings of a track table.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceOutput {
    /// `frame,track_id,x,y,confidence` rows grouped by track id.
    pub csv: String,
    /// Standalone SVG 1.1: one polyline per tracklet, ground truth dashed.
    pub svg: String,
}

pub const TRACE_CSV_HEADER: &str = "frame,track_id,x,y,confidence";

const TRACE_COLORS: [&str; 10] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6", "#9a6324",
    "#008080", "#808000",
];

fn polyline(points: impl Iterator<Item = (f64, f64)>, style: &str) -> String {
    let coords: Vec<String> = points.map(|(x, y)| format!("{x},{y}")).collect();
    format!(
        "  <polyline fill=\"none\" {style} points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Renders the trace CSV and SVG for a table, optionally overlaying ground
/// truth as a dashed polyline.
pub fn render_trace(
    table: &TrackTable,
    gt: Option<&GroundTruthTrack>,
    canvas: &GridSpec,
) -> TraceOutput {
    let mut tracklets: Vec<&Tracklet> = table.all_tracklets().collect();
    tracklets.sort_by_key(|t| t.id());

    let mut csv = String::from(TRACE_CSV_HEADER);
    csv.push('\n');
    for t in &tracklets {
        for p in t.history() {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                p.frame,
                t.id(),
                p.center.0,
                p.center.1,
                p.confidence
            ));
        }
    }

    let (w, h) = (canvas.width_px(), canvas.height_px());
    let mut svg = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    for t in &tracklets {
        let color = TRACE_COLORS[((t.id() - 1) % TRACE_COLORS.len() as u64) as usize];
        let style = format!("stroke=\"{color}\" stroke-width=\"1\"");
        svg.push_str(&polyline(
            t.history().iter().map(|p| p.center),
            &style,
        ));
    }
    if let Some(gt) = gt {
        if !gt.points().is_empty() {
            svg.push_str(&polyline(
                gt.points().iter().map(|p| p.center),
                "stroke=\"#444444\" stroke-width=\"1\" stroke-dasharray=\"4 4\"",
            ));
        }
    }
    svg.push_str("</svg>\n");

    TraceOutput { csv, svg }
}

/// Rebuilds a track table from a trace CSV written by [`render_trace`].
pub fn parse_trace_csv(csv: &str) -> Result<TrackTable> {
    let mut lines = csv.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_CSV_HEADER => {}
        other => {
            return Err(Error::TraceParse {
                line: 1,
                message: format!(
                    "expected header {TRACE_CSV_HEADER:?}, got {:?}",
                    other.map(|(_, l)| l).unwrap_or("")
                ),
            })
        }
    }

    let mut by_id: BTreeMap<u64, Vec<TrackPoint>> = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::TraceParse {
                line: line_no,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| Error::TraceParse {
            line: line_no,
            message: format!("bad {what} field"),
        };
        let frame: u64 = fields[0].parse().map_err(|_| parse_err("frame"))?;
        let id: u64 = fields[1].parse().map_err(|_| parse_err("track_id"))?;
        let x: f64 = fields[2].parse().map_err(|_| parse_err("x"))?;
        let y: f64 = fields[3].parse().map_err(|_| parse_err("y"))?;
        let confidence: f64 = fields[4].parse().map_err(|_| parse_err("confidence"))?;
        if id == 0 {
            return Err(Error::TraceParse {
                line: line_no,
                message: "track_id must be >= 1".into(),
            });
        }
        if !seen.insert((id, frame)) {
            return Err(Error::TraceParse {
                line: line_no,
                message: format!("track {id} already has a point at frame {frame}"),
            });
        }
        by_id.entry(id).or_default().push(TrackPoint {
            frame,
            center: (x, y),
            confidence,
        });
    }

    let mut tracklets = Vec::with_capacity(by_id.len());
    let mut next_id = 1;
    for (id, mut points) in by_id {
        points.sort_by_key(|p| p.frame);
        next_id = next_id.max(id + 1);
        tracklets.push(Tracklet::from_history(id, points));
    }
    Ok(TrackTable::from_parts(tracklets, Vec::new(), next_id))
}

/// Re-filters a recorded table at a higher threshold: points below
/// `threshold` are dropped, tracklets left without points disappear.
/// Because every decoded detection lands in exactly one tracklet, filtering
/// a trace tracked at a lower threshold reproduces the per-frame detection
/// sets that decoding at `threshold` would have produced.
pub fn filter_by_confidence(table: &TrackTable, threshold: f64) -> Result<TrackTable> {
    if !threshold.is_finite() || !(0.0..=1.0).contains(&threshold) {
        return Err(Error::ThresholdOutOfRange(threshold));
    }
    let mut tracklets = Vec::new();
    let mut next_id = 1u64;
    let mut ids: Vec<&Tracklet> = table.all_tracklets().collect();
    ids.sort_by_key(|t| t.id());
    for t in ids {
        let points: Vec<TrackPoint> = t
            .history()
            .iter()
            .filter(|p| p.confidence >= threshold)
            .copied()
            .collect();
        if points.is_empty() {
            continue;
        }
        next_id = next_id.max(t.id() + 1);
        tracklets.push(Tracklet::from_history(t.id(), points));
    }
    Ok(TrackTable::from_parts(tracklets, Vec::new(), next_id))
}

/// Plain-text report table with the headline columns.
pub fn format_report_table(reports: &[EvalReport]) -> String {
    let header = ["Video", "Center MSE", "Failed", "More Object", "Total Frames"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.video_id().to_string(),
                format!("{}", r.center_mse()),
                format!("{}", r.failed_frames()),
                format!("{}", r.more_object_frames()),
                format!("{}", r.total_frames()),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let fmt_row = |cells: &[String; 5], widths: &[usize]| -> String {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            line.push_str(&format!("{:<width$}", cell, width = widths[i]));
            if i + 1 != cells.len() {
                line.push_str("  ");
            }
        }
        line.trim_end().to_string()
    };
    let header_row: [String; 5] = header.map(String::from);
    out.push_str(&fmt_row(&header_row, &widths));
    out.push('\n');
    for row in &rows {
        out.push_str(&fmt_row(row, &widths));
        out.push('\n');
    }
    out
}

/// One JSON object per line, in input order.
pub fn reports_to_jsonl(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("report serializes"));
        out.push('\n');
    }
    out
}

pub fn reports_from_jsonl(text: &str) -> Result<Vec<EvalReport>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::CocoSchema {
                message: format!("report line: {e}"),
            })
        })
        .collect()
}
