//! Dense per-cell tensors produced by the detection network: confidence
//! heatmap, bounding-box size map and frame-to-frame displacement field.
//!
//! Values are stored row-major as `(row, col, channel)` in `f32`, matching
//! the on-disk tensor format byte for byte.

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};

fn check_len(grid: &GridSpec, channels: usize, values: &[f32]) -> Result<()> {
    let expected = grid.cell_count() * channels;
    if values.len() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: values.len(),
        });
    }
    Ok(())
}

/// Per-cell detection confidence in `[0, 1]`, shape `(H/R, W/R, C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    grid: GridSpec,
    values: Vec<f32>,
}

impl Heatmap {
    pub fn new(grid: GridSpec, values: Vec<f32>) -> Result<Self> {
        check_len(&grid, grid.classes() as usize, &values)?;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("heatmap"));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange(format!(
                    "heatmap value {v} at index {i} outside [0,1]"
                )));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.cell_count() * grid.classes() as usize;
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Confidence at `cell` for class `class_id`. Panics if either is out of
    /// range for this grid.
    pub fn value_at(&self, cell: Cell, class_id: u32) -> f32 {
        self.values[self.index(cell, class_id)]
    }

    fn index(&self, cell: Cell, class_id: u32) -> usize {
        assert!(cell.col < self.grid.cols() && cell.row < self.grid.rows());
        assert!(class_id < self.grid.classes());
        cell.row_major_index(&self.grid) * self.grid.classes() as usize + class_id as usize
    }
}

/// Per-cell bounding-box size regression `(w_px, h_px)`, shape `(H/R, W/R, 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeMap {
    grid: GridSpec,
    values: Vec<f32>,
}

impl SizeMap {
    pub fn new(grid: GridSpec, values: Vec<f32>) -> Result<Self> {
        check_len(&grid, 2, &values)?;
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::NonFinite("size map"));
            }
            if v < 0.0 {
                return Err(Error::ValueOutOfRange(format!(
                    "size map value {v} is negative"
                )));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.cell_count() * 2;
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Box size `(w_px, h_px)` stored at `cell`.
    pub fn size_at(&self, cell: Cell) -> (f32, f32) {
        let i = cell.row_major_index(&self.grid) * 2;
        (self.values[i], self.values[i + 1])
    }
}

/// Per-cell 2D displacement `(dx_px, dy_px)` from the previous frame to the
/// current one, shape `(H/R, W/R, 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    grid: GridSpec,
    values: Vec<f32>,
}

impl DisplacementField {
    pub fn new(grid: GridSpec, values: Vec<f32>) -> Result<Self> {
        check_len(&grid, 2, &values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("displacement field"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.cell_count() * 2;
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Displacement `(dx_px, dy_px)` stored at `cell`.
    pub fn displacement_at(&self, cell: Cell) -> (f32, f32) {
        let i = cell.row_major_index(&self.grid) * 2;
        (self.values[i], self.values[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::single_class(32, 16, 4).unwrap()
    }

    #[test]
    fn heatmap_shape_and_range_checked() {
        let g = grid();
        assert!(matches!(
            Heatmap::new(g, vec![0.0; 5]),
            Err(Error::ShapeMismatch { expected: 32, .. })
        ));
        let mut v = vec![0.0f32; 32];
        v[3] = 1.5;
        assert!(matches!(
            Heatmap::new(g, v),
            Err(Error::ValueOutOfRange(_))
        ));
        let mut v = vec![0.0f32; 32];
        v[3] = f32::NAN;
        assert!(matches!(Heatmap::new(g, v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn row_major_addressing() {
        let g = grid();
        let mut v = vec![0.0f32; 32];
        v[Cell::new(3, 1).row_major_index(&g)] = 0.7;
        let hm = Heatmap::new(g, v).unwrap();
        assert_eq!(hm.value_at(Cell::new(3, 1), 0), 0.7);
        assert_eq!(hm.value_at(Cell::new(1, 3), 0), 0.0);
    }

    #[test]
    fn multi_class_heatmap_indexing() {
        let g = GridSpec::new(8, 8, 4, 3).unwrap();
        let mut v = vec![0.0f32; 2 * 2 * 3];
        v[Cell::new(1, 0).row_major_index(&g) * 3 + 2] = 0.9;
        let hm = Heatmap::new(g, v).unwrap();
        assert_eq!(hm.value_at(Cell::new(1, 0), 2), 0.9);
        assert_eq!(hm.value_at(Cell::new(1, 0), 0), 0.0);
    }

    #[test]
    fn size_map_rejects_negative() {
        let g = grid();
        let mut v = vec![0.0f32; 64];
        v[0] = -1.0;
        assert!(matches!(
            SizeMap::new(g, v),
            Err(Error::ValueOutOfRange(_))
        ));
    }

    #[test]
    fn displacement_pairs() {
        let g = grid();
        let mut v = vec![0.0f32; 64];
        let i = Cell::new(2, 3).row_major_index(&g) * 2;
        v[i] = 4.0;
        v[i + 1] = -2.0;
        let d = DisplacementField::new(g, v).unwrap();
        assert_eq!(d.displacement_at(Cell::new(2, 3)), (4.0, -2.0));
    }
}
