//! Grid geometry: the down-sampled output grid and image<->cell coordinate
//! conversions shared by every stage of the pipeline.

use crate::error::{Error, Result};

/// Geometry of the network's down-sampled output grids.
///
/// Holds the source image size in pixels, the down-sampling factor between
/// image and grid resolution, and the number of object classes. All dense
/// tensors ([`crate::tensor::Heatmap`] etc.) carry a `GridSpec` and are
/// validated against it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    width_px: u32,
    height_px: u32,
    downsample: u32,
    classes: u32,
}

impl GridSpec {
    pub fn new(width_px: u32, height_px: u32, downsample: u32, classes: u32) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(Error::InvalidGrid(format!(
                "image size {width_px}x{height_px} must be positive"
            )));
        }
        if downsample == 0 {
            return Err(Error::InvalidGrid("downsample must be >= 1".into()));
        }
        if !width_px.is_multiple_of(downsample) || !height_px.is_multiple_of(downsample) {
            return Err(Error::InvalidGrid(format!(
                "image size {width_px}x{height_px} not divisible by downsample {downsample}"
            )));
        }
        if classes == 0 {
            return Err(Error::InvalidGrid("classes must be >= 1".into()));
        }
        Ok(Self {
            width_px,
            height_px,
            downsample,
            classes,
        })
    }

    /// Single-class grid; the common case for apex tracking.
    pub fn single_class(width_px: u32, height_px: u32, downsample: u32) -> Result<Self> {
        Self::new(width_px, height_px, downsample, 1)
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn downsample(&self) -> u32 {
        self.downsample
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    /// Grid columns (W/R).
    pub fn cols(&self) -> usize {
        (self.width_px / self.downsample) as usize
    }

    /// Grid rows (H/R).
    pub fn rows(&self) -> usize {
        (self.height_px / self.downsample) as usize
    }

    pub fn cell_count(&self) -> usize {
        self.rows() * self.cols()
    }

    /// True when image size and downsample factor match; class count may
    /// differ (size and displacement maps are classless).
    pub fn same_geometry(&self, other: &GridSpec) -> bool {
        self.width_px == other.width_px
            && self.height_px == other.height_px
            && self.downsample == other.downsample
    }
}

/// A cell location in the down-sampled grid, addressed as (column, row).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }

    /// Scan-order index of this cell: `row * cols + col`.
    pub fn row_major_index(&self, grid: &GridSpec) -> usize {
        self.row * grid.cols() + self.col
    }
}

/// Image-pixel coordinates of a grid cell's center.
///
/// Cell-center convention: cell `(c, r)` maps to
/// `((c + 0.5) * R - 0.5, (r + 0.5) * R - 0.5)`, so decode error without
/// sub-pixel refinement is bounded by R/2 per axis.
pub fn grid_to_image(cell: Cell, grid: &GridSpec) -> Result<(f64, f64)> {
    if cell.col >= grid.cols() || cell.row >= grid.rows() {
        return Err(Error::CellOutOfRange {
            col: cell.col,
            row: cell.row,
            cols: grid.cols(),
            rows: grid.rows(),
        });
    }
    let r = grid.downsample() as f64;
    Ok((
        (cell.col as f64 + 0.5) * r - 0.5,
        (cell.row as f64 + 0.5) * r - 0.5,
    ))
}

/// Nearest grid cell to an image point under the cell-center convention,
/// clamped to grid bounds. The point must lie inside the image.
pub fn image_to_grid(point: (f64, f64), grid: &GridSpec) -> Result<Cell> {
    let (x, y) = point;
    if !x.is_finite()
        || !y.is_finite()
        || x < 0.0
        || y < 0.0
        || x >= grid.width_px() as f64
        || y >= grid.height_px() as f64
    {
        return Err(Error::PointOutOfRange {
            x,
            y,
            width: grid.width_px(),
            height: grid.height_px(),
        });
    }
    Ok(nearest_cell_clamped(point, grid))
}

/// Like [`image_to_grid`] but total: out-of-image points snap to the nearest
/// border cell. Used where a predicted position may drift outside the frame.
pub(crate) fn nearest_cell_clamped(point: (f64, f64), grid: &GridSpec) -> Cell {
    let r = grid.downsample() as f64;
    let to_cell = |v: f64, n: usize| -> usize {
        let idx = ((v + 0.5) / r - 0.5).round();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(n - 1)
        }
    };
    Cell {
        col: to_cell(point.0, grid.cols()),
        row: to_cell(point.1, grid.rows()),
    }
}
