use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Retinal magnification: microns of retina per degree of visual field.
pub const UM_PER_DEGREE: f64 = 280.0;

/// Raster over the visual field. The grid center maps to (0°, 0°); x grows
/// rightward with column index, y grows upward as the row index decreases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualFieldGrid {
    rows: usize,
    cols: usize,
    deg_per_px: f64,
    um_per_deg: f64,
}

impl VisualFieldGrid {
    pub fn new(rows: usize, cols: usize, deg_per_px: f64) -> Result<Self> {
        Self::with_magnification(rows, cols, deg_per_px, UM_PER_DEGREE)
    }

    pub fn with_magnification(rows: usize, cols: usize, deg_per_px: f64, um_per_deg: f64) -> Result<Self> {
        if rows < 1 || cols < 1 {
            return Err(Error::InvalidArgument(format!("grid must be at least 1x1, got {rows}x{cols}")));
        }
        if !(deg_per_px > 0.0) || !deg_per_px.is_finite() {
            return Err(Error::InvalidArgument(format!("deg_per_px must be positive, got {deg_per_px}")));
        }
        if !(um_per_deg > 0.0) || !um_per_deg.is_finite() {
            return Err(Error::InvalidArgument(format!("um_per_deg must be positive, got {um_per_deg}")));
        }
        Ok(VisualFieldGrid { rows, cols, deg_per_px, um_per_deg })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn deg_per_px(&self) -> f64 {
        self.deg_per_px
    }

    pub fn um_per_deg(&self) -> f64 {
        self.um_per_deg
    }

    pub fn n_px(&self) -> usize {
        self.rows * self.cols
    }

    /// Visual-field coordinates (degrees) of a pixel center.
    pub fn pixel_center_deg(&self, row: usize, col: usize) -> (f64, f64) {
        let x = (col as f64 - (self.cols as f64 - 1.0) / 2.0) * self.deg_per_px;
        let y = ((self.rows as f64 - 1.0) / 2.0 - row as f64) * self.deg_per_px;
        (x, y)
    }

    /// Retinal coordinates (μm) of a pixel center.
    pub fn pixel_center_um(&self, row: usize, col: usize) -> (f64, f64) {
        let (x, y) = self.pixel_center_deg(row, col);
        (x * self.um_per_deg, y * self.um_per_deg)
    }
}

impl Default for VisualFieldGrid {
    /// The production raster: 121x161 at 0.25°/px, spanning ±20° x ±15°.
    fn default() -> Self {
        VisualFieldGrid { rows: 121, cols: 161, deg_per_px: 0.25, um_per_deg: UM_PER_DEGREE }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_pixel_is_origin() {
        let g = VisualFieldGrid::default();
        assert_eq!(g.pixel_center_deg(60, 80), (0.0, 0.0));
    }

    #[test]
    fn corner_pixel_arithmetic() {
        let g = VisualFieldGrid::default();
        assert_eq!(g.pixel_center_deg(0, 0), (-20.0, 15.0));
        assert_eq!(g.pixel_center_deg(120, 160), (20.0, -15.0));
    }

    #[test]
    fn small_grid_arithmetic() {
        let g = VisualFieldGrid::new(3, 3, 0.5).unwrap();
        assert_eq!(g.pixel_center_deg(0, 2), (0.5, 0.5));
    }

    #[test]
    fn micron_conversion_uses_magnification() {
        let g = VisualFieldGrid::default();
        let (x, y) = g.pixel_center_um(60, 81);
        assert!((x - 0.25 * 280.0).abs() < 1e-12);
        assert_eq!(y, 0.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(VisualFieldGrid::new(0, 5, 0.25).is_err());
        assert!(VisualFieldGrid::new(5, 0, 0.25).is_err());
        assert!(VisualFieldGrid::new(5, 5, 0.0).is_err());
        assert!(VisualFieldGrid::new(5, 5, -1.0).is_err());
    }
}
