//! Target images: IDX-format loading, fallback synthesis, and preparation of
//! 28×28 grayscale digits into grid-shaped target frames.
//!
//! Real MNIST files are used when available (`$PSE_MNIST_DIR`, then
//! `./data/mnist`). When neither exists, a deterministic synthetic digit
//! corpus is rendered in the official shape (28×28, same file counts) from a
//! fixed glyph font — integer arithmetic only, so the corpus is byte-identical
//! across platforms. Every loader reports which source it used.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::VisualFieldGrid;
use crate::percept::PerceptFrame;
use crate::rng::{streams, Pcg32};

pub const IMG_SIDE: usize = 28;
const IMG_PIXELS: usize = IMG_SIDE * IMG_SIDE;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Official corpus sizes, also used for the synthetic fallback.
pub const TRAIN_COUNT: usize = 60_000;
pub const TEST_COUNT: usize = 10_000;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SetKind {
    Train,
    Test,
}

/// 28×28 grayscale digit images with labels.
#[derive(Debug)]
pub struct TargetSet {
    images: Vec<u8>,
    labels: Vec<u8>,
}

impl TargetSet {
    pub fn new(images: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() * IMG_PIXELS {
            return Err(Error::InvalidArgument(format!(
                "image bytes ({}) do not match {} labels × {} pixels",
                images.len(),
                labels.len(),
                IMG_PIXELS
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 9) {
            return Err(Error::Format(format!("label value {bad} outside 0..=9")));
        }
        Ok(TargetSet { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * IMG_PIXELS..(i + 1) * IMG_PIXELS]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    /// Grid-shaped frame for sample `i`.
    pub fn prepare(&self, i: usize, grid: &VisualFieldGrid) -> Result<PerceptFrame> {
        prepare_target(self.image(i), grid)
    }

    /// First `n` samples (desk-scale profiles train on a prefix).
    pub fn truncated(mut self, n: usize) -> TargetSet {
        if n < self.len() {
            self.images.truncate(n * IMG_PIXELS);
            self.labels.truncate(n);
        }
        self
    }
}

fn be_u32(bytes: &[u8], offset: usize, field: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Format(format!("file truncated reading {field}")));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parse an IDX image file; returns (pixels, count, rows, cols).
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<u8>, usize, usize, usize)> {
    let magic = be_u32(bytes, 0, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image magic: expected {IMAGE_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "image rows")? as usize;
    let cols = be_u32(bytes, 12, "image cols")? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "image payload: expected {expected} bytes for {count} images of {rows}×{cols}, found {}",
            bytes.len()
        )));
    }
    Ok((bytes[16..].to_vec(), count, rows, cols))
}

/// Parse an IDX label file; returns the label bytes.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label magic: expected {LABEL_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "label payload: expected {expected} bytes for {count} labels, found {}",
            bytes.len()
        )));
    }
    Ok(bytes[8..].to_vec())
}

/// Load a paired image/label IDX file set.
pub fn load_mnist(images: &Path, labels: &Path) -> Result<TargetSet> {
    let img_bytes = fs::read(images)?;
    let lbl_bytes = fs::read(labels)?;
    let (pixels, img_count, rows, cols) = parse_idx_images(&img_bytes)?;
    if rows != IMG_SIDE || cols != IMG_SIDE {
        return Err(Error::Format(format!(
            "image dimensions: expected {IMG_SIDE}×{IMG_SIDE}, found {rows}×{cols}"
        )));
    }
    let label_vals = parse_idx_labels(&lbl_bytes)?;
    if label_vals.len() != img_count {
        return Err(Error::Format(format!(
            "count mismatch: {img_count} images vs {} labels",
            label_vals.len()
        )));
    }
    TargetSet::new(pixels, label_vals)
}

pub fn write_idx_images(path: &Path, images: &[u8], rows: usize, cols: usize) -> Result<()> {
    if rows * cols == 0 || images.len() % (rows * cols) != 0 {
        return Err(Error::InvalidArgument("image bytes not a multiple of rows×cols".into()));
    }
    let count = images.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + images.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(images);
    fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out)?;
    Ok(())
}

/// 5×7 digit glyphs, one bitmask row per byte (bit 4 = leftmost column).
const FONT: [[u8; 7]; 10] = [
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110], // 0
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110], // 1
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111], // 2
    [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110], // 3
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010], // 4
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110], // 5
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110], // 6
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000], // 7
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110], // 8
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100], // 9
];

/// Render one jittered glyph into a 28×28 canvas and soften it with a 3×3
/// binomial blur. Integer arithmetic throughout.
fn render_glyph(digit: u8, dx: i32, dy: i32, intensity: u8) -> [u8; IMG_PIXELS] {
    let mut canvas = [0u8; IMG_PIXELS];
    let glyph = &FONT[digit as usize];
    // 5×7 glyph upscaled ×3 → 15×21, nominally anchored at (6, 3).
    for (gy, row) in glyph.iter().enumerate() {
        for gx in 0..5 {
            if row >> (4 - gx) & 1 == 0 {
                continue;
            }
            for sy in 0..3 {
                for sx in 0..3 {
                    let y = 3 + dy + (gy as i32) * 3 + sy;
                    let x = 6 + dx + (gx as i32) * 3 + sx;
                    if (0..IMG_SIDE as i32).contains(&y) && (0..IMG_SIDE as i32).contains(&x) {
                        canvas[y as usize * IMG_SIDE + x as usize] = intensity;
                    }
                }
            }
        }
    }
    let mut blurred = [0u8; IMG_PIXELS];
    for y in 0..IMG_SIDE as i32 {
        for x in 0..IMG_SIDE as i32 {
            let mut acc = 0u32;
            for (oy, wrow) in (-1..=1).zip([[1u32, 2, 1], [2, 4, 2], [1, 2, 1]]) {
                for (ox, w) in (-1..=1).zip(wrow) {
                    let (py, px) = (y + oy, x + ox);
                    if (0..IMG_SIDE as i32).contains(&py) && (0..IMG_SIDE as i32).contains(&px) {
                        acc += w * canvas[py as usize * IMG_SIDE + px as usize] as u32;
                    }
                }
            }
            blurred[(y * IMG_SIDE as i32 + x) as usize] = (acc / 16) as u8;
        }
    }
    blurred
}

/// Deterministic synthetic digit corpus in the official 28×28 shape.
pub fn synthesize_targets(count: usize, seed: u64, kind: SetKind) -> TargetSet {
    let stream = match kind {
        SetKind::Train => streams::GLYPHS_TRAIN,
        SetKind::Test => streams::GLYPHS_TEST,
    };
    let mut rng = Pcg32::new(seed, stream);
    let mut images = Vec::with_capacity(count * IMG_PIXELS);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let digit = rng.below(10) as u8;
        let dx = rng.below(7) as i32 - 3;
        let dy = rng.below(5) as i32 - 2;
        let intensity = 160 + rng.below(96) as u8;
        images.extend_from_slice(&render_glyph(digit, dx, dy, intensity));
        labels.push(digit);
    }
    TargetSet { images, labels }
}

/// Loaded targets plus a description of where they came from.
pub struct LoadedTargets {
    pub set: TargetSet,
    pub source: String,
}

fn try_dir(dir: &Path, kind: SetKind) -> Option<(PathBuf, PathBuf)> {
    let (img, lbl) = match kind {
        SetKind::Train => (TRAIN_IMAGES, TRAIN_LABELS),
        SetKind::Test => (TEST_IMAGES, TEST_LABELS),
    };
    let (ip, lp) = (dir.join(img), dir.join(lbl));
    (ip.is_file() && lp.is_file()).then_some((ip, lp))
}

/// Locate target images: an explicit directory, `$PSE_MNIST_DIR`,
/// `./data/mnist`, or the synthetic fallback, in that order. A directory that
/// is present but unparsable is an error (no silent fallback).
pub fn load_targets(kind: SetKind, dir: Option<&Path>, seed: u64) -> Result<LoadedTargets> {
    let mut candidates: Vec<PathBuf> = Vec::new();
    if let Some(d) = dir {
        candidates.push(d.to_path_buf());
    }
    if let Ok(env_dir) = std::env::var("PSE_MNIST_DIR") {
        if !env_dir.is_empty() {
            candidates.push(PathBuf::from(env_dir));
        }
    }
    candidates.push(PathBuf::from("data/mnist"));

    for c in &candidates {
        if let Some((ip, lp)) = try_dir(c, kind) {
            let set = load_mnist(&ip, &lp)?;
            return Ok(LoadedTargets { set, source: format!("idx files in {}", c.display()) });
        }
    }
    let count = match kind {
        SetKind::Train => TRAIN_COUNT,
        SetKind::Test => TEST_COUNT,
    };
    Ok(LoadedTargets {
        set: synthesize_targets(count, seed, kind),
        source: format!("synthetic glyph corpus ({count} samples, seed {seed})"),
    })
}

/// Scale a 28×28 grayscale image to [0, 1], bilinear-resize it to
/// rows×rows, and center it horizontally in a rows×cols zero frame.
pub fn prepare_target(img: &[u8], grid: &VisualFieldGrid) -> Result<PerceptFrame> {
    if img.len() != IMG_PIXELS {
        return Err(Error::InvalidArgument(format!(
            "target image has {} pixels, expected {IMG_SIDE}×{IMG_SIDE}",
            img.len()
        )));
    }
    let (rows, cols) = (grid.rows(), grid.cols());
    if cols < rows || (cols - rows) % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid {rows}×{cols} cannot center a square resize (needs cols ≥ rows, even difference)"
        )));
    }
    let pad = (cols - rows) / 2;
    let side = rows;
    let scale = IMG_SIDE as f64 / side as f64;
    let mut data = vec![0.0f32; rows * cols];

    // Half-pixel-center bilinear sampling, clamped at the borders.
    let coord = |d: usize| -> (usize, usize, f64) {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (IMG_SIDE - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(IMG_SIDE - 1);
        (lo, hi, s - lo as f64)
    };
    for dy in 0..side {
        let (y0, y1, fy) = coord(dy);
        for dx in 0..side {
            let (x0, x1, fx) = coord(dx);
            let p00 = img[y0 * IMG_SIDE + x0];
            let p01 = img[y0 * IMG_SIDE + x1];
            let p10 = img[y1 * IMG_SIDE + x0];
            let p11 = img[y1 * IMG_SIDE + x1];
            let v = if p00 == p01 && p00 == p10 && p00 == p11 {
                // Constant neighborhoods stay exact (zero stays zero, a flat
                // 255 image becomes exactly 1.0).
                p00 as f64 / 255.0
            } else {
                let top = (1.0 - fx) * p00 as f64 + fx * p01 as f64;
                let bot = (1.0 - fx) * p10 as f64 + fx * p11 as f64;
                ((1.0 - fy) * top + fy * bot) / 255.0
            };
            data[dy * cols + pad + dx] = v.clamp(0.0, 1.0) as f32;
        }
    }
    PerceptFrame::new(rows, cols, data)
}
