//! Center-point decoding: extract peak detections from a heatmap plus size
//! map.
//!
//! A cell is a peak candidate when its value is `>=` each of its 8 neighbors
//! (out-of-bounds neighbors count as -inf). Within an 8-connected plateau of
//! equal-valued candidates only the lowest row-major-index cell survives, so
//! a flat maximum still yields exactly one detection.

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::grid::{grid_to_image, Cell};
use crate::tensor::{Heatmap, SizeMap};

/// Decode parameters: result cap and the tracking threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeConfig {
    top_k: usize,
    confidence_threshold: f64,
}

impl DecodeConfig {
    pub fn new(top_k: usize, confidence_threshold: f64) -> Result<Self> {
        if top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if !confidence_threshold.is_finite() || !(0.0..=1.0).contains(&confidence_threshold) {
            return Err(Error::ThresholdOutOfRange(confidence_threshold));
        }
        Ok(Self {
            top_k,
            confidence_threshold,
        })
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }

    pub fn confidence_threshold(&self) -> f64 {
        self.confidence_threshold
    }
}

impl Default for DecodeConfig {
    /// `top_k` 100 and threshold 0.3.
    fn default() -> Self {
        Self {
            top_k: 100,
            confidence_threshold: 0.3,
        }
    }
}

/// A surviving local maximum of one heatmap channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub cell: Cell,
    pub class_id: u32,
    pub confidence: f32,
}

/// All peaks of every class channel, sorted by confidence descending with
/// ties broken by row-major cell index then class id.
pub fn find_peaks(heatmap: &Heatmap) -> Vec<Peak> {
    let grid = heatmap.grid();
    let (cols, rows) = (grid.cols(), grid.rows());
    let mut peaks = Vec::new();

    for class_id in 0..grid.classes() {
        let value = |col: usize, row: usize| heatmap.value_at(Cell::new(col, row), class_id);

        // Pass 1: cells >= all 8 neighbors.
        let mut candidate = vec![false; cols * rows];
        for row in 0..rows {
            for col in 0..cols {
                let v = value(col, row);
                let mut is_peak = true;
                'nbrs: for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nc, nr) = (col as i64 + dc, row as i64 + dr);
                        if nc < 0 || nr < 0 || nc >= cols as i64 || nr >= rows as i64 {
                            continue;
                        }
                        if value(nc as usize, nr as usize) > v {
                            is_peak = false;
                            break 'nbrs;
                        }
                    }
                }
                candidate[row * cols + col] = is_peak;
            }
        }

        // Pass 2: flood each 8-connected equal-valued plateau of candidates
        // starting from its lowest row-major index, keeping only that cell.
        let mut visited = vec![false; cols * rows];
        for row in 0..rows {
            for col in 0..cols {
                let idx = row * cols + col;
                if !candidate[idx] || visited[idx] {
                    continue;
                }
                let v = value(col, row);
                let mut stack = vec![(col, row)];
                visited[idx] = true;
                while let Some((c, r)) = stack.pop() {
                    for dr in -1i64..=1 {
                        for dc in -1i64..=1 {
                            if dr == 0 && dc == 0 {
                                continue;
                            }
                            let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                            if nc < 0 || nr < 0 || nc >= cols as i64 || nr >= rows as i64 {
                                continue;
                            }
                            let (nc, nr) = (nc as usize, nr as usize);
                            let nidx = nr * cols + nc;
                            if candidate[nidx] && !visited[nidx] && value(nc, nr) == v {
                                visited[nidx] = true;
                                stack.push((nc, nr));
                            }
                        }
                    }
                }
                peaks.push(Peak {
                    cell: Cell::new(col, row),
                    class_id,
                    confidence: v,
                });
            }
        }
    }

    peaks.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| {
                a.cell
                    .row_major_index(grid)
                    .cmp(&b.cell.row_major_index(grid))
            })
            .then_with(|| a.class_id.cmp(&b.class_id))
    });
    peaks
}

/// Peaks above the tracking threshold, capped at `top_k` and resolved to
/// image-space detections using the size regressed at each peak cell.
pub fn decode(heatmap: &Heatmap, sizes: &SizeMap, config: &DecodeConfig) -> Result<Vec<Detection>> {
    if !heatmap.grid().same_geometry(sizes.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = heatmap.grid();
    find_peaks(heatmap)
        .into_iter()
        .filter(|p| f64::from(p.confidence) >= config.confidence_threshold())
        .take(config.top_k())
        .map(|p| {
            let center = grid_to_image(p.cell, grid)?;
            let (w, h) = sizes.size_at(p.cell);
            Detection::new(
                center,
                (f64::from(w), f64::from(h)),
                f64::from(p.confidence),
                p.class_id,
                grid,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn grid8() -> GridSpec {
        GridSpec::single_class(8, 8, 1).unwrap()
    }

    fn heatmap_from(grid: GridSpec, cells: &[(usize, usize, f32)]) -> Heatmap {
        let mut v = vec![0.0f32; grid.cell_count() * grid.classes() as usize];
        for &(col, row, conf) in cells {
            v[Cell::new(col, row).row_major_index(&grid) * grid.classes() as usize] = conf;
        }
        Heatmap::new(grid, v).unwrap()
    }

    /// Independent peak oracle: enumerate candidates by the >=-rule, then
    /// drop any candidate that can reach an equal-valued candidate with a
    /// lower row-major index through 8-connected equal-valued candidates.
    fn oracle_peaks(hm: &Heatmap, class_id: u32) -> Vec<(Cell, f32)> {
        let g = hm.grid();
        let (cols, rows) = (g.cols(), g.rows());
        let val = |c: i64, r: i64| -> f64 {
            if c < 0 || r < 0 || c >= cols as i64 || r >= rows as i64 {
                f64::NEG_INFINITY
            } else {
                f64::from(hm.value_at(Cell::new(c as usize, r as usize), class_id))
            }
        };
        let mut cands = Vec::new();
        for r in 0..rows as i64 {
            for c in 0..cols as i64 {
                let v = val(c, r);
                let mut ok = true;
                for dr in -1..=1i64 {
                    for dc in -1..=1i64 {
                        if (dr, dc) != (0, 0) && val(c + dc, r + dr) > v {
                            ok = false;
                        }
                    }
                }
                if ok {
                    cands.push((c as usize, r as usize));
                }
            }
        }
        let cand_set: std::collections::HashSet<(usize, usize)> = cands.iter().copied().collect();
        let mut kept = Vec::new();
        'outer: for &(c, r) in &cands {
            // DFS over equal-valued candidate neighbors; drop this candidate
            // if anything reachable has a lower row-major index.
            let v = hm.value_at(Cell::new(c, r), class_id);
            let my_idx = r * cols + c;
            let mut seen = std::collections::HashSet::from([(c, r)]);
            let mut stack = vec![(c, r)];
            while let Some((sc, sr)) = stack.pop() {
                for dr in -1..=1i64 {
                    for dc in -1..=1i64 {
                        let (nc, nr) = (sc as i64 + dc, sr as i64 + dr);
                        if nc < 0 || nr < 0 || nc >= cols as i64 || nr >= rows as i64 {
                            continue;
                        }
                        let (nc, nr) = (nc as usize, nr as usize);
                        if cand_set.contains(&(nc, nr))
                            && hm.value_at(Cell::new(nc, nr), class_id) == v
                            && seen.insert((nc, nr))
                        {
                            if nr * cols + nc < my_idx {
                                continue 'outer;
                            }
                            stack.push((nc, nr));
                        }
                    }
                }
            }
            kept.push((Cell::new(c, r), v));
        }
        kept
    }

    #[test]
    fn all_zero_plateau_keeps_origin_only() {
        let hm = Heatmap::zeros(grid8());
        let peaks = find_peaks(&hm);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].cell, Cell::new(0, 0));
        assert_eq!(peaks[0].confidence, 0.0);
    }

    #[test]
    fn unique_global_max_is_first_peak() {
        let g = GridSpec::single_class(64, 64, 1).unwrap();
        let hm = heatmap_from(g, &[(10, 12, 1.0)]);
        let peaks = find_peaks(&hm);
        assert_eq!(peaks[0].cell, Cell::new(10, 12));
        assert_eq!(peaks[0].confidence, 1.0);
    }

    #[test]
    fn adjacent_equal_peaks_collapse_to_lower_index() {
        let g = GridSpec::single_class(32, 32, 1).unwrap();
        let hm = heatmap_from(g, &[(5, 5, 0.8), (6, 5, 0.8)]);
        let peaks = find_peaks(&hm);
        let at_08: Vec<_> = peaks.iter().filter(|p| p.confidence == 0.8).collect();
        assert_eq!(at_08.len(), 1);
        assert_eq!(at_08[0].cell, Cell::new(5, 5));
        // Matches the independent enumeration oracle.
        let oracle = oracle_peaks(&hm, 0);
        assert!(oracle.contains(&(Cell::new(5, 5), 0.8)));
        assert!(!oracle.iter().any(|&(c, _)| c == Cell::new(6, 5)));
    }

    #[test]
    fn peaks_match_oracle_on_random_maps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = GridSpec::single_class(12, 10, 1).unwrap();
        for _ in 0..200 {
            // Coarse values force plenty of plateaus and ties.
            let v: Vec<f32> = (0..g.cell_count())
                .map(|_| rng.gen_range(0..4) as f32 / 4.0)
                .collect();
            let hm = Heatmap::new(g, v).unwrap();
            let mut got: Vec<(Cell, f32)> =
                find_peaks(&hm).iter().map(|p| (p.cell, p.confidence)).collect();
            let mut want = oracle_peaks(&hm, 0);
            let key = |a: &(Cell, f32)| (a.0.row, a.0.col);
            got.sort_by_key(key);
            want.sort_by_key(key);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn decode_zero_heatmap_yields_nothing() {
        let g = grid8();
        let hm = Heatmap::zeros(g);
        let sz = SizeMap::zeros(g);
        let cfg = DecodeConfig::default();
        assert!(decode(&hm, &sz, &cfg).unwrap().is_empty());
    }

    #[test]
    fn decode_one_hot_cell() {
        let g = GridSpec::single_class(64, 64, 4).unwrap();
        let hm = heatmap_from(g, &[(10, 12, 1.0)]);
        let mut sv = vec![0.0f32; g.cell_count() * 2];
        let i = Cell::new(10, 12).row_major_index(&g) * 2;
        sv[i] = 16.0;
        sv[i + 1] = 24.0;
        let sz = SizeMap::new(g, sv).unwrap();
        let dets = decode(&hm, &sz, &DecodeConfig::new(10, 0.3).unwrap()).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].center(), (41.5, 49.5));
        assert_eq!(dets[0].size(), (16.0, 24.0));
        assert_eq!(dets[0].confidence(), 1.0);
    }

    #[test]
    fn threshold_filters_weak_peak() {
        let g = GridSpec::single_class(32, 32, 1).unwrap();
        let hm = heatmap_from(g, &[(5, 5, 0.9), (20, 20, 0.35)]);
        let sz = SizeMap::zeros(g);
        let dets = decode(&hm, &sz, &DecodeConfig::new(10, 0.4).unwrap()).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].center(), (5.0, 5.0));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let hm = Heatmap::zeros(grid8());
        let sz = SizeMap::zeros(GridSpec::single_class(16, 16, 1).unwrap());
        assert!(matches!(
            decode(&hm, &sz, &DecodeConfig::default()),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn sub_threshold_noise_off_peak_does_not_change_decode() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = GridSpec::single_class(32, 32, 1).unwrap();
        let base = heatmap_from(g, &[(5, 5, 0.9), (20, 13, 0.6)]);
        let sz = SizeMap::zeros(g);
        let cfg = DecodeConfig::new(10, 0.5).unwrap();
        let want = decode(&base, &sz, &cfg).unwrap();
        let peak_cells = [Cell::new(5, 5), Cell::new(20, 13)];
        for _ in 0..50 {
            let mut v = base.values().to_vec();
            for _ in 0..20 {
                let col = rng.gen_range(0..g.cols());
                let row = rng.gen_range(0..g.rows());
                let cell = Cell::new(col, row);
                if peak_cells.contains(&cell) {
                    continue;
                }
                v[cell.row_major_index(&g)] = rng.gen_range(0.0..0.499f32);
            }
            let noisy = Heatmap::new(g, v).unwrap();
            assert_eq!(decode(&noisy, &sz, &cfg).unwrap(), want);
        }
    }

    proptest! {
        #[test]
        fn detections_never_exceed_top_k(
            vals in proptest::collection::vec(0.0f32..=1.0, 64),
            top_k in 1usize..6,
            theta in 0.0f64..=1.0,
        ) {
            let g = grid8();
            let hm = Heatmap::new(g, vals).unwrap();
            let sz = SizeMap::zeros(g);
            let cfg = DecodeConfig::new(top_k, theta).unwrap();
            prop_assert!(decode(&hm, &sz, &cfg).unwrap().len() <= top_k);
        }

        #[test]
        fn raising_threshold_never_adds_detections(
            vals in proptest::collection::vec(0.0f32..=1.0, 64),
            lo in 0.0f64..=1.0,
            hi in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let g = grid8();
            let hm = Heatmap::new(g, vals).unwrap();
            let sz = SizeMap::zeros(g);
            let n_lo = decode(&hm, &sz, &DecodeConfig::new(100, lo).unwrap()).unwrap().len();
            let n_hi = decode(&hm, &sz, &DecodeConfig::new(100, hi).unwrap()).unwrap().len();
            prop_assert!(n_hi <= n_lo);
        }
    }
}
