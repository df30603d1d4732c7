//! Synthetic ground truth: scripted apex trajectories rendered into the
//! decoder's tensor inputs, plus an exhaustive assignment oracle for the
//! greedy matcher. Everything here is deterministic for a fixed seed, so a
//! full decode -> track -> eval loop can be validated with no captured data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{AnnotationSet, BBox, BoxEntry, GroundTruthTrack, GtPoint, ImageEntry};
use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::grid::{image_to_grid, GridSpec};
use crate::tensor::{DisplacementField, Heatmap, SizeMap};
use crate::track::Tracklet;
use crate::tracker::{gating_radius, predict_prior, TrackerConfig};

/// Motion model for a scripted trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryKind {
    Stationary,
    Linear,
    /// Circular nutation around `start` with a slow upward drift:
    /// `start + (A cos(2 pi t / period), A sin(2 pi t / period) - growth * t)`.
    Circumnutation,
    /// Uniform steps in `[-|vx|, |vx|] x [-|vy|, |vy|]` per frame, drawn from
    /// a seeded ChaCha8 stream.
    RandomWalk,
}

/// Parameters of one scripted trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub start: (f64, f64),
    /// Linear velocity, or step bound for random walks (px/frame).
    pub velocity: (f64, f64),
    /// Circumnutation radius (px).
    pub amplitude: f64,
    /// Circumnutation period (frames).
    pub period: u64,
    /// Vertical drift (px/frame, upward in image coordinates).
    pub growth_rate: f64,
    pub seed: u64,
    pub frames: u64,
    pub object_size: (f64, f64),
}

/// One generated frame of ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub frame: u64,
    pub center: (f64, f64),
    pub size: (f64, f64),
}

/// A generated trajectory; `clamped` reports whether any raw position had to
/// be pulled back inside the image.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
    clamped: bool,
}

impl Trajectory {
    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    pub fn to_ground_truth(&self, video_id: impl Into<String>) -> GroundTruthTrack {
        GroundTruthTrack::new(
            video_id,
            self.points
                .iter()
                .map(|p| GtPoint {
                    frame: p.frame,
                    center: p.center,
                    size: p.size,
                })
                .collect(),
        )
        .expect("trajectory frames are strictly increasing")
    }

    /// Annotation set with one image and one box per frame; boxes are
    /// clipped to the image so the set always validates.
    pub fn to_annotation_set(
        &self,
        grid: &GridSpec,
        video_id: impl Into<String>,
    ) -> AnnotationSet {
        let video_id = video_id.into();
        let (w, h) = (f64::from(grid.width_px()), f64::from(grid.height_px()));
        let mut images = Vec::with_capacity(self.points.len());
        let mut boxes = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let id = p.frame + 1;
            let x0 = (p.center.0 - p.size.0 / 2.0).max(0.0);
            let y0 = (p.center.1 - p.size.1 / 2.0).max(0.0);
            let x1 = (p.center.0 + p.size.0 / 2.0).min(w);
            let y1 = (p.center.1 + p.size.1 / 2.0).min(h);
            images.push(ImageEntry {
                id,
                file_name: format!("frame_{:06}.png", p.frame),
                width: grid.width_px(),
                height: grid.height_px(),
                frame_index: p.frame,
                video_id: video_id.clone(),
            });
            boxes.push(BoxEntry {
                id,
                image_id: id,
                class_id: 1,
                bbox: BBox {
                    x: x0,
                    y: y0,
                    w: x1 - x0,
                    h: y1 - y0,
                },
            });
        }
        AnnotationSet::new(images, boxes).expect("generated boxes are clipped to the image")
    }
}

/// Generates the scripted trajectory for `spec` on `grid`. Positions are
/// clamped to `[0, W-1] x [0, H-1]`, which keeps the decode quantization
/// error within R/2 per axis.
pub fn gen_trajectory(spec: &TrajectorySpec, grid: &GridSpec) -> Result<Trajectory> {
    if spec.frames == 0 {
        return Err(Error::InvalidConfig("frames must be >= 1".into()));
    }
    let finite = [
        spec.start.0,
        spec.start.1,
        spec.velocity.0,
        spec.velocity.1,
        spec.amplitude,
        spec.growth_rate,
        spec.object_size.0,
        spec.object_size.1,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("trajectory parameters must be finite".into()));
    }
    if spec.amplitude < 0.0 {
        return Err(Error::InvalidConfig("amplitude must be >= 0".into()));
    }
    if spec.object_size.0 < 0.0 || spec.object_size.1 < 0.0 {
        return Err(Error::InvalidConfig("object_size must be >= 0".into()));
    }
    if spec.kind == TrajectoryKind::Circumnutation && spec.period < 2 {
        return Err(Error::InvalidConfig(
            "circumnutation period must be >= 2".into(),
        ));
    }

    let max_x = f64::from(grid.width_px()) - 1.0;
    let max_y = f64::from(grid.height_px()) - 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points = Vec::with_capacity(spec.frames as usize);
    let mut clamped = false;
    let mut walk = spec.start;

    for frame in 0..spec.frames {
        let t = frame as f64;
        let raw = match spec.kind {
            TrajectoryKind::Stationary => spec.start,
            TrajectoryKind::Linear => (
                spec.start.0 + spec.velocity.0 * t,
                spec.start.1 + spec.velocity.1 * t,
            ),
            TrajectoryKind::Circumnutation => {
                let phase = 2.0 * std::f64::consts::PI * t / spec.period as f64;
                (
                    spec.start.0 + spec.amplitude * phase.cos(),
                    spec.start.1 + spec.amplitude * phase.sin() - spec.growth_rate * t,
                )
            }
            TrajectoryKind::RandomWalk => {
                if frame > 0 {
                    let (bx, by) = (spec.velocity.0.abs(), spec.velocity.1.abs());
                    walk.0 += rng.gen_range(-bx..=bx);
                    walk.1 += rng.gen_range(-by..=by);
                }
                walk
            }
        };
        let center = (raw.0.clamp(0.0, max_x), raw.1.clamp(0.0, max_y));
        if center != raw {
            clamped = true;
        }
        points.push(TrajectoryPoint {
            frame,
            center,
            size: spec.object_size,
        });
    }
    Ok(Trajectory { points, clamped })
}

/// One object to splat into a rendered frame. `peak` scales the Gaussian so
/// weak or spurious detections can be simulated; the true apex uses 1.0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneObject {
    pub prev_center: (f64, f64),
    pub cur_center: (f64, f64),
    pub size: (f64, f64),
    pub peak: f64,
}

/// Renders several objects into one frame's tensors. Heatmap contributions
/// combine by per-cell maximum; within each object's 3-sigma footprint the
/// size and displacement cells take that object's values, later objects
/// winning overlaps. Objects land in class channel 0.
pub fn render_scene(
    objects: &[SceneObject],
    grid: &GridSpec,
    sigma_cells: f64,
) -> Result<(Heatmap, SizeMap, DisplacementField)> {
    if !sigma_cells.is_finite() || sigma_cells <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "sigma {sigma_cells} must be > 0"
        )));
    }
    let (rows, cols) = (grid.rows(), grid.cols());
    let classes = grid.classes() as usize;
    let mut hm = vec![0.0f64; rows * cols * classes];
    let mut sz = vec![0.0f32; rows * cols * 2];
    let mut dp = vec![0.0f32; rows * cols * 2];

    for obj in objects {
        if !(obj.peak.is_finite() && obj.peak > 0.0 && obj.peak <= 1.0) {
            return Err(Error::ValueOutOfRange(format!(
                "scene object peak {} outside (0,1]",
                obj.peak
            )));
        }
        if obj.size.0 < 0.0 || obj.size.1 < 0.0 {
            return Err(Error::ValueOutOfRange(
                "scene object size must be >= 0".into(),
            ));
        }
        let peak_cell = image_to_grid(obj.cur_center, grid)?;
        if !obj.prev_center.0.is_finite() || !obj.prev_center.1.is_finite() {
            return Err(Error::NonFinite("scene object prev_center"));
        }
        let displacement = (
            (obj.cur_center.0 - obj.prev_center.0) as f32,
            (obj.cur_center.1 - obj.prev_center.1) as f32,
        );
        let cutoff_sq = (3.0 * sigma_cells) * (3.0 * sigma_cells);
        for row in 0..rows {
            for col in 0..cols {
                let dc = col as f64 - peak_cell.col as f64;
                let dr = row as f64 - peak_cell.row as f64;
                let d_sq = dc * dc + dr * dr;
                let v = obj.peak * (-d_sq / (2.0 * sigma_cells * sigma_cells)).exp();
                let hi = (row * cols + col) * classes;
                if v > hm[hi] {
                    hm[hi] = v;
                }
                if d_sq <= cutoff_sq {
                    let i = (row * cols + col) * 2;
                    sz[i] = obj.size.0 as f32;
                    sz[i + 1] = obj.size.1 as f32;
                    dp[i] = displacement.0;
                    dp[i + 1] = displacement.1;
                }
            }
        }
    }

    let hm32: Vec<f32> = hm.into_iter().map(|v| v as f32).collect();
    Ok((
        Heatmap::new(*grid, hm32)?,
        SizeMap::new(*grid, sz)?,
        DisplacementField::new(*grid, dp)?,
    ))
}

/// Default splat width: the Gaussian roughly spans the object's box.
pub fn default_sigma(size: (f64, f64), grid: &GridSpec) -> f64 {
    (size.0.min(size.1) / (6.0 * f64::from(grid.downsample()))).max(1.0)
}

/// Renders one true-apex frame: Gaussian heatmap peaking at exactly 1.0 on
/// the cell nearest `cur_center`, with size and displacement written inside
/// the 3-sigma footprint.
pub fn render_frame(
    prev_center: (f64, f64),
    cur_center: (f64, f64),
    size: (f64, f64),
    grid: &GridSpec,
    sigma_cells: f64,
) -> Result<(Heatmap, SizeMap, DisplacementField)> {
    render_scene(
        &[SceneObject {
            prev_center,
            cur_center,
            size,
            peak: 1.0,
        }],
        grid,
        sigma_cells,
    )
}

/// Exhaustive matching oracle for the greedy associator.
///
/// Enumerates every maximal gate-respecting partial matching (no further
/// in-gate pair can be added) over at most 6 detections and 6 tracklets,
/// returning the one with the smallest total predicted-prior distance; ties
/// break lexicographically on the (detection index, tracklet id) pair list.
pub fn brute_force_assign(
    detections: &[Detection],
    tracklets: &[Tracklet],
    displacement: &DisplacementField,
    config: &TrackerConfig,
) -> Result<Vec<(usize, u64)>> {
    let (n, m) = (detections.len(), tracklets.len());
    if n > 6 || m > 6 {
        return Err(Error::InstanceTooLarge {
            detections: n,
            tracklets: m,
        });
    }

    let mut cost = vec![vec![f64::INFINITY; m]; n];
    for (i, det) in detections.iter().enumerate() {
        let prior = predict_prior(det, displacement);
        let radius = gating_radius(det, config);
        for (j, tracklet) in tracklets.iter().enumerate() {
            let (tx, ty) = tracklet.last_center();
            let d = ((tx - prior.0).powi(2) + (ty - prior.1).powi(2)).sqrt();
            if d <= radius {
                cost[i][j] = d;
            }
        }
    }
    let in_gate = |i: usize, j: usize| cost[i][j].is_finite();

    struct Search<'a> {
        n: usize,
        m: usize,
        cost: &'a [Vec<f64>],
        ids: Vec<u64>,
        used: Vec<bool>,
        current: Vec<Option<usize>>,
        best: Option<(f64, Vec<(usize, u64)>)>,
    }

    impl Search<'_> {
        fn leaf(&mut self) {
            // Maximal only: no unmatched detection may still have a free
            // in-gate tracklet.
            for i in 0..self.n {
                if self.current[i].is_none() {
                    for j in 0..self.m {
                        if !self.used[j] && self.cost[i][j].is_finite() {
                            return;
                        }
                    }
                }
            }
            let mut pairs: Vec<(usize, u64)> = Vec::new();
            let mut total = 0.0;
            for i in 0..self.n {
                if let Some(j) = self.current[i] {
                    total += self.cost[i][j];
                    pairs.push((i, self.ids[j]));
                }
            }
            let better = match &self.best {
                None => true,
                Some((bc, bp)) => total < *bc || (total == *bc && pairs < *bp),
            };
            if better {
                self.best = Some((total, pairs));
            }
        }

        fn descend(&mut self, i: usize) {
            if i == self.n {
                self.leaf();
                return;
            }
            self.current[i] = None;
            self.descend(i + 1);
            for j in 0..self.m {
                if !self.used[j] && self.cost[i][j].is_finite() {
                    self.used[j] = true;
                    self.current[i] = Some(j);
                    self.descend(i + 1);
                    self.current[i] = None;
                    self.used[j] = false;
                }
            }
        }
    }

    if n == 0 || m == 0 || !(0..n).any(|i| (0..m).any(|j| in_gate(i, j))) {
        return Ok(Vec::new());
    }

    let mut search = Search {
        n,
        m,
        cost: &cost,
        ids: tracklets.iter().map(|t| t.id()).collect(),
        used: vec![false; m],
        current: vec![None; n],
        best: None,
    };
    search.descend(0);
    Ok(search.best.map(|(_, pairs)| pairs).unwrap_or_default())
}
