//! A single decoded object: center point, box size and confidence.

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// One decoded object in image-pixel coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    center: (f64, f64),
    size: (f64, f64),
    confidence: f64,
    class_id: u32,
}

impl Detection {
    /// Builds a detection, checking it against the image bounds of `grid`.
    pub fn new(
        center: (f64, f64),
        size: (f64, f64),
        confidence: f64,
        class_id: u32,
        grid: &GridSpec,
    ) -> Result<Self> {
        let (x, y) = center;
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
        if !size.0.is_finite() || !size.1.is_finite() || size.0 < 0.0 || size.1 < 0.0 {
            return Err(Error::ValueOutOfRange(format!(
                "detection size ({}, {}) must be non-negative",
                size.0, size.1
            )));
        }
        if !confidence.is_finite() || !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ValueOutOfRange(format!(
                "confidence {confidence} outside [0,1]"
            )));
        }
        Ok(Self {
            center,
            size,
            confidence,
            class_id,
        })
    }

    /// Builds a detection from already-trusted values (e.g. re-loaded from a
    /// trace this crate wrote). Bounds are not re-checked.
    pub(crate) fn unchecked(
        center: (f64, f64),
        size: (f64, f64),
        confidence: f64,
        class_id: u32,
    ) -> Self {
        Self {
            center,
            size,
            confidence,
            class_id,
        }
    }

    /// Center point `(x_px, y_px)`.
    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// Bounding-box size `(w_px, h_px)`.
    pub fn size(&self) -> (f64, f64) {
        self.size
    }

    /// Detection confidence in `[0, 1]`.
    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_ranges_enforced() {
        let g = GridSpec::single_class(32, 16, 4).unwrap();
        assert!(Detection::new((10.0, 10.0), (4.0, 4.0), 0.5, 0, &g).is_ok());
        assert!(Detection::new((32.0, 10.0), (4.0, 4.0), 0.5, 0, &g).is_err());
        assert!(Detection::new((10.0, -0.1), (4.0, 4.0), 0.5, 0, &g).is_err());
        assert!(Detection::new((10.0, 10.0), (-1.0, 4.0), 0.5, 0, &g).is_err());
        assert!(Detection::new((10.0, 10.0), (4.0, 4.0), 1.1, 0, &g).is_err());
        assert!(Detection::new((10.0, 10.0), (4.0, 4.0), f64::NAN, 0, &g).is_err());
    }
}
