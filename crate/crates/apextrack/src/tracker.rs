//! Greedy displacement-based association of per-frame detections into
//! persistent tracklets.
//!
//! Each detection's predicted prior position (current center minus the
//! displacement regressed at its cell) is matched against the last centers
//! of active tracklets, in confidence-descending order, within a gating
//! radius scaled from the detection's box size. Detections that match
//! nothing open new tracklets.

use std::cmp::Ordering;

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::grid::nearest_cell_clamped;
use crate::tensor::DisplacementField;
use crate::track::TrackTable;

/// Association parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackerConfig {
    gating_scale: f64,
    memory_frames: u64,
}

impl TrackerConfig {
    pub fn new(gating_scale: f64, memory_frames: u64) -> Result<Self> {
        if !gating_scale.is_finite() || gating_scale <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gating_scale {gating_scale} must be > 0"
            )));
        }
        if memory_frames == 0 {
            return Err(Error::InvalidConfig("memory_frames must be >= 1".into()));
        }
        Ok(Self {
            gating_scale,
            memory_frames,
        })
    }

    /// Multiplier on the per-detection gating radius.
    pub fn gating_scale(&self) -> f64 {
        self.gating_scale
    }

    /// Frames an unmatched tracklet stays matchable.
    pub fn memory_frames(&self) -> u64 {
        self.memory_frames
    }
}

impl Default for TrackerConfig {
    /// Gating scale 1.0; single-frame memory, mirroring a model that only
    /// sees the current and previous frames.
    fn default() -> Self {
        Self {
            gating_scale: 1.0,
            memory_frames: 1,
        }
    }
}

/// Detections plus displacement field for one frame.
#[derive(Clone, Debug)]
pub struct FrameInput {
    pub detections: Vec<Detection>,
    pub displacement: DisplacementField,
}

/// Gating radius for a detection: `gating_scale * sqrt(w * h)`.
pub fn gating_radius(detection: &Detection, config: &TrackerConfig) -> f64 {
    let (w, h) = detection.size();
    config.gating_scale() * (w * h).sqrt()
}

/// Where this object was in the previous frame: its center minus the
/// displacement regressed at its own grid cell.
pub fn predict_prior(detection: &Detection, displacement: &DisplacementField) -> (f64, f64) {
    let cell = nearest_cell_clamped(detection.center(), displacement.grid());
    let (dx, dy) = displacement.displacement_at(cell);
    let (x, y) = detection.center();
    (x - f64::from(dx), y - f64::from(dy))
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    (dx * dx + dy * dy).sqrt()
}

/// Processing order: confidence descending, ties by center position in
/// row-major order (y, then x). Re-derived here so matching is invariant
/// under permutation of the input list.
fn greedy_order(detections: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&detections[a], &detections[b]);
        db.confidence()
            .total_cmp(&da.confidence())
            .then_with(|| da.center().1.total_cmp(&db.center().1))
            .then_with(|| da.center().0.total_cmp(&db.center().0))
    });
    order
}

/// The greedy matching step on its own: pairs of (detection index, tracklet
/// id), sorted by detection index. Tracklets are drawn from `candidates`;
/// each may be matched at most once.
pub fn greedy_assign(
    detections: &[Detection],
    candidates: &[crate::track::Tracklet],
    displacement: &DisplacementField,
    config: &TrackerConfig,
) -> Vec<(usize, u64)> {
    let mut taken = vec![false; candidates.len()];
    let mut pairs: Vec<(usize, u64)> = Vec::new();

    for det_idx in greedy_order(detections) {
        let det = &detections[det_idx];
        let prior = predict_prior(det, displacement);
        let radius = gating_radius(det, config);

        let mut best: Option<(f64, usize)> = None;
        for (ti, tracklet) in candidates.iter().enumerate() {
            if taken[ti] {
                continue;
            }
            let d = dist(tracklet.last_center(), prior);
            if d > radius {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bi)) => match d.partial_cmp(&bd) {
                    Some(Ordering::Less) => true,
                    Some(Ordering::Equal) => tracklet.id() < candidates[bi].id(),
                    _ => false,
                },
            };
            if better {
                best = Some((d, ti));
            }
        }
        if let Some((_, ti)) = best {
            taken[ti] = true;
            pairs.push((det_idx, candidates[ti].id()));
        }
    }

    pairs.sort_by_key(|&(i, _)| i);
    pairs
}

/// Folds one frame of detections into the table: retire stale tracklets,
/// greedily match the rest, open new tracklets for unmatched detections.
pub fn associate_frame(
    table: &mut TrackTable,
    detections: &[Detection],
    displacement: &DisplacementField,
    frame: u64,
    config: &TrackerConfig,
) -> Result<()> {
    if let Some(last) = table.active().iter().map(|t| t.last_frame()).max() {
        if frame <= last {
            return Err(Error::FrameOrdering {
                frame,
                last_frame: last,
            });
        }
    }

    table.retire_stale(frame, config.memory_frames());

    let pairs = greedy_assign(detections, table.active(), displacement, config);
    let mut matched = vec![false; detections.len()];
    for &(det_idx, tracklet_id) in &pairs {
        matched[det_idx] = true;
        let tracklet = table
            .active_mut()
            .iter_mut()
            .find(|t| t.id() == tracklet_id)
            .expect("matched tracklet is active");
        tracklet.extend(detections[det_idx].clone(), frame);
    }

    // New tracklets in the same deterministic order the matcher used.
    for det_idx in greedy_order(detections) {
        if !matched[det_idx] {
            table.open_tracklet(detections[det_idx].clone(), frame);
        }
    }
    Ok(())
}

/// Runs association over an ordered frame sequence, starting from an empty
/// table. Frame indices are 0-based positions in the slice.
pub fn run_sequence(frames: &[FrameInput], config: &TrackerConfig) -> Result<TrackTable> {
    let mut table = TrackTable::new();
    for (frame, input) in frames.iter().enumerate() {
        associate_frame(
            &mut table,
            &input.detections,
            &input.displacement,
            frame as u64,
            config,
        )?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, GridSpec};
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::single_class(128, 128, 4).unwrap()
    }

    fn det(x: f64, y: f64, conf: f64) -> Detection {
        Detection::new((x, y), (8.0, 8.0), conf, 0, &grid()).unwrap()
    }

    fn field_with(cells: &[(Cell, (f32, f32))]) -> DisplacementField {
        let g = grid();
        let mut v = vec![0.0f32; g.cell_count() * 2];
        for &(cell, (dx, dy)) in cells {
            let i = cell.row_major_index(&g) * 2;
            v[i] = dx;
            v[i + 1] = dy;
        }
        DisplacementField::new(g, v).unwrap()
    }

    #[test]
    fn prior_subtracts_displacement_at_cell() {
        let d = det(44.0, 50.0, 0.9);
        let cell = crate::grid::image_to_grid((44.0, 50.0), &grid()).unwrap();
        let field = field_with(&[(cell, (4.0, 2.0))]);
        assert_eq!(predict_prior(&d, &field), (40.0, 48.0));
    }

    #[test]
    fn zero_field_prior_is_identity() {
        let d = det(44.0, 50.0, 0.9);
        let field = DisplacementField::zeros(grid());
        assert_eq!(predict_prior(&d, &field), (44.0, 50.0));
    }

    #[test]
    fn first_detection_opens_tracklet_one() {
        let mut table = TrackTable::new();
        let field = DisplacementField::zeros(grid());
        associate_frame(
            &mut table,
            &[det(10.0, 10.0, 0.9)],
            &field,
            0,
            &TrackerConfig::default(),
        )
        .unwrap();
        assert_eq!(table.active().len(), 1);
        assert_eq!(table.active()[0].id(), 1);
        assert_eq!(table.next_id(), 2);
    }

    #[test]
    fn exact_prior_match_extends_tracklet() {
        let mut table = TrackTable::new();
        let cfg = TrackerConfig::default();
        let zero = DisplacementField::zeros(grid());
        associate_frame(&mut table, &[det(40.0, 48.0, 0.9)], &zero, 0, &cfg).unwrap();

        let d1 = det(44.0, 50.0, 0.9);
        let cell = crate::grid::image_to_grid(d1.center(), &grid()).unwrap();
        let field = field_with(&[(cell, (4.0, 2.0))]);
        associate_frame(&mut table, &[d1], &field, 1, &cfg).unwrap();

        assert_eq!(table.active().len(), 1);
        let t = &table.active()[0];
        assert_eq!(t.id(), 1);
        assert_eq!(t.history().len(), 2);
        assert_eq!(t.last_center(), (44.0, 50.0));
    }

    #[test]
    fn non_increasing_frame_is_rejected() {
        let mut table = TrackTable::new();
        let field = DisplacementField::zeros(grid());
        let cfg = TrackerConfig::default();
        associate_frame(&mut table, &[det(10.0, 10.0, 0.9)], &field, 3, &cfg).unwrap();
        assert!(matches!(
            associate_frame(&mut table, &[], &field, 3, &cfg),
            Err(Error::FrameOrdering { .. })
        ));
    }

    #[test]
    fn out_of_gate_detection_opens_new_tracklet() {
        let mut table = TrackTable::new();
        let field = DisplacementField::zeros(grid());
        let cfg = TrackerConfig::default();
        associate_frame(&mut table, &[det(10.0, 10.0, 0.9)], &field, 0, &cfg).unwrap();
        // kappa = sqrt(8*8) = 8; a detection 60px away cannot match.
        associate_frame(&mut table, &[det(70.0, 10.0, 0.9)], &field, 1, &cfg).unwrap();
        assert_eq!(table.active().len(), 2);
        let ids: Vec<u64> = table.active().iter().map(|t| t.id()).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn single_frame_memory_blocks_rematch_after_gap() {
        let mut table = TrackTable::new();
        let field = DisplacementField::zeros(grid());
        let cfg = TrackerConfig::default();
        associate_frame(&mut table, &[det(10.0, 10.0, 0.9)], &field, 0, &cfg).unwrap();
        associate_frame(&mut table, &[], &field, 1, &cfg).unwrap();
        assert_eq!(table.active().len(), 1, "survives the frame it is missed");
        associate_frame(&mut table, &[det(10.0, 10.0, 0.9)], &field, 2, &cfg).unwrap();
        assert_eq!(table.retired().len(), 1);
        assert_eq!(table.active().len(), 1);
        assert_eq!(table.active()[0].id(), 2, "gap forces a fresh identity");
    }

    #[test]
    fn longer_memory_bridges_gap() {
        let mut table = TrackTable::new();
        let field = DisplacementField::zeros(grid());
        let cfg = TrackerConfig::new(1.0, 2).unwrap();
        associate_frame(&mut table, &[det(10.0, 10.0, 0.9)], &field, 0, &cfg).unwrap();
        associate_frame(&mut table, &[], &field, 1, &cfg).unwrap();
        associate_frame(&mut table, &[det(10.0, 10.0, 0.9)], &field, 2, &cfg).unwrap();
        assert_eq!(table.active().len(), 1);
        assert_eq!(table.active()[0].id(), 1);
        assert_eq!(table.active()[0].history().len(), 2);
    }

    #[test]
    fn empty_sequence_gives_empty_table() {
        let table = run_sequence(&[], &TrackerConfig::default()).unwrap();
        assert!(table.is_empty());
        assert_eq!(table.next_id(), 1);
    }

    #[test]
    fn single_object_sequence_yields_one_full_tracklet() {
        let g = grid();
        let cfg = TrackerConfig::default();
        let n = 20u64;
        let mut frames = Vec::new();
        let mut prev = (20.0, 20.0);
        for t in 0..n {
            let cur = (20.0 + 2.0 * t as f64, 20.0 + t as f64);
            let cell = crate::grid::image_to_grid(cur, &g).unwrap();
            let field = field_with(&[(
                cell,
                ((cur.0 - prev.0) as f32, (cur.1 - prev.1) as f32),
            )]);
            frames.push(FrameInput {
                detections: vec![det(cur.0, cur.1, 0.9)],
                displacement: field,
            });
            prev = cur;
        }
        let table = run_sequence(&frames, &cfg).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.active()[0].history().len(), n as usize);
    }

    proptest! {
        #[test]
        fn matching_invariant_under_permutation(seed in 0u64..500) {
            use rand::seq::SliceRandom;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cfg = TrackerConfig::default();
            let zero = DisplacementField::zeros(grid());

            let mut table = TrackTable::new();
            let anchors: Vec<(f64, f64)> = (0..4)
                .map(|_| (rng.gen_range(8.0..120.0), rng.gen_range(8.0..120.0)))
                .collect();
            let frame0: Vec<Detection> =
                anchors.iter().map(|&(x, y)| det(x, y, 0.9)).collect();
            associate_frame(&mut table, &frame0, &zero, 0, &cfg).unwrap();

            let mut dets: Vec<Detection> = anchors
                .iter()
                .map(|&(x, y)| {
                    det(
                        (x + rng.gen_range(-3.0..3.0)).clamp(0.0, 127.0),
                        (y + rng.gen_range(-3.0..3.0)).clamp(0.0, 127.0),
                        rng.gen_range(0.3..1.0),
                    )
                })
                .collect();

            // Matched (detection value, id) pairs must not depend on input order.
            let mut want: Vec<(Detection, u64)> = greedy_assign(&dets, table.active(), &zero, &cfg)
                .into_iter()
                .map(|(i, id)| (dets[i].clone(), id))
                .collect();
            let key = |p: &(Detection, u64)| p.1;
            want.sort_by_key(key);
            for _ in 0..4 {
                dets.shuffle(&mut rng);
                let mut got: Vec<(Detection, u64)> = greedy_assign(&dets, table.active(), &zero, &cfg)
                    .into_iter()
                    .map(|(i, id)| (dets[i].clone(), id))
                    .collect();
                got.sort_by_key(key);
                prop_assert_eq!(&got, &want);
            }
        }

        #[test]
        fn ids_strictly_increasing_and_unique(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cfg = TrackerConfig::default();
            let zero = DisplacementField::zeros(grid());
            let mut frames = Vec::new();
            for _ in 0..10 {
                let n = rng.gen_range(0..4);
                let dets = (0..n)
                    .map(|_| {
                        det(
                            rng.gen_range(0.0..127.0),
                            rng.gen_range(0.0..127.0),
                            rng.gen_range(0.1..1.0),
                        )
                    })
                    .collect();
                frames.push(FrameInput { detections: dets, displacement: zero.clone() });
            }
            let table = run_sequence(&frames, &cfg).unwrap();
            let mut ids: Vec<u64> = table.all_tracklets().map(|t| t.id()).collect();
            let n = ids.len();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n, "duplicate ids");
            prop_assert!(ids.iter().all(|&id| id >= 1 && id < table.next_id()));

            // Each frame: at most one history point per tracklet.
            for t in table.all_tracklets() {
                prop_assert!(t.history().windows(2).all(|w| w[0].frame < w[1].frame));
            }
        }
    }

}
