use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::VisualFieldGrid;

/// A rendered brightness raster, row-major, unitless after normalization.
///
/// Stored as f32 to match the dataset payload; simulation happens in f64 and
/// rounds once on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptFrame {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl PerceptFrame {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "frame data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "frame value at {i} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(PerceptFrame { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        PerceptFrame { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_f64(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&v| v as f32).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, &v| m.max(v))
    }

    pub fn matches_grid(&self, grid: &VisualFieldGrid) -> bool {
        self.rows == grid.rows() && self.cols == grid.cols()
    }

    /// Quantize to 8 bits: clamp to [0, 1], scale by 255, round.
    pub fn to_bytes_clamped(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    /// Write as binary PGM (P5, maxval 255).
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_pgm_bytes(path, self.cols, self.rows, &self.to_bytes_clamped())
    }
}

/// Write a raw 8-bit grayscale raster as binary PGM.
pub fn write_pgm_bytes(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    if bytes.len() != width * height {
        return Err(Error::InvalidArgument(format!(
            "PGM payload length {} does not match {width}x{height}",
            bytes.len()
        )));
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(file, "P5\n{width} {height}\n255\n")?;
    file.write_all(bytes)?;
    Ok(())
}
