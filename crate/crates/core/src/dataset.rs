//! Synthetic stimulus→percept dataset: sampling, generation, and the binary
//! container.
//!
//! A dataset is a pure function of (count, seed, subject, grid/axon config):
//! the sampler consumes one fixed PCG32 stream in index order, the
//! normalization probe uses a separate stream, and the writer emits
//! little-endian f32s in generation order. Regenerating with the same inputs
//! reproduces the file byte for byte.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::axon::AxonField;
use crate::digest::Fnv1a;
use crate::error::{Error, Result};
use crate::rng::{streams, Pcg32};
use crate::simulate::Simulator;
use crate::stim::{Stimulus, N_ELECTRODES};
use crate::subject::SubjectModel;

const MAGIC: &[u8; 4] = b"PSE1";
const FORMAT_VERSION: u32 = 1;
/// Stimuli rendered (at unit normalization) to estimate the brightness scale.
const PROBE_STIMULI: usize = 1000;
/// Brightness percentile that maps to 1.0 after normalization.
const NORM_PERCENTILE: f64 = 0.99;

pub const PRNG_NAME: &str = "pcg32-setseq-xsh-rr";

/// Train/test counts for an n-sample dataset: the last fifth (rounded to
/// nearest, ties impossible) is held out, the first samples train.
pub fn split_counts(n: usize) -> Result<(usize, usize)> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "dataset needs at least 5 samples for a non-empty 80/20 split, got {n}"
        )));
    }
    let test = (n + 2) / 5;
    Ok((n - test, test))
}

/// One random stimulus: N ~ uniform{1..30} active electrodes, chosen without
/// replacement, each with amplitude uniform on [1, 10) μA.
pub fn sample_stimulus(rng: &mut Pcg32) -> Stimulus {
    let n_active = rng.range_inclusive(1, 30) as usize;
    let chosen = rng.choose_distinct(N_ELECTRODES, n_active);
    let mut amps = vec![0.0f64; N_ELECTRODES];
    for e in chosen {
        amps[e] = rng.uniform(1.0, 10.0);
    }
    Stimulus::new(amps).expect("sampled amplitudes are finite and nonnegative")
}

/// Normalization constant: the 99th-percentile (nearest-rank) pixel value over
/// `PROBE_STIMULI` percepts rendered at unit normalization.
pub fn probe_normalization(subject: &SubjectModel, field: &Arc<AxonField>, seed: u64) -> Result<f64> {
    let sim = Simulator::new(subject.clone().with_normalization(1.0)?, Arc::clone(field))?;
    let mut rng = Pcg32::new(seed, streams::PROBE);
    let mut values = Vec::with_capacity(PROBE_STIMULI * field.grid().n_px());
    for _ in 0..PROBE_STIMULI {
        let stim = sample_stimulus(&mut rng);
        values.extend(sim.simulate_f64(&stim)?);
    }
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let rank = ((NORM_PERCENTILE * values.len() as f64).ceil() as usize).max(1) - 1;
    let p = values[rank];
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "normalization probe produced a non-positive percentile ({p}); grid and array may not overlap"
        )));
    }
    Ok(p)
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct DatasetManifest {
    pub subject: String,
    pub total: u32,
    pub train: u32,
    pub test: u32,
    pub rows: u32,
    pub cols: u32,
    pub seed: u64,
    pub prng: String,
    pub normalization: f64,
    pub format_version: u32,
    /// FNV-1a 64 of the binary file, hex.
    pub digest: String,
}

pub fn manifest_path(binary: &Path) -> PathBuf {
    binary.with_extension("json")
}

pub fn load_manifest(binary: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(manifest_path(binary))?;
    Ok(serde_json::from_str(&text)?)
}

/// Generate an n-sample dataset for one subject and write binary + manifest.
/// The subject's own normalization field is ignored; the constant is probed
/// fresh and recorded in the manifest.
pub fn generate_dataset(
    n: usize,
    seed: u64,
    subject: &SubjectModel,
    field: &Arc<AxonField>,
    out: &Path,
) -> Result<DatasetManifest> {
    let (train, test) = split_counts(n)?;
    let normalization = probe_normalization(subject, field, seed)?;
    let sim = Simulator::new(subject.clone().with_normalization(normalization)?, Arc::clone(field))?;
    let grid = field.grid();

    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file = fs::File::create(out)?;
    let mut w = DigestWriter { inner: BufWriter::new(file), digest: Fnv1a::new() };
    w.write_all(MAGIC)?;
    for v in [FORMAT_VERSION, n as u32, N_ELECTRODES as u32, grid.rows() as u32, grid.cols() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut rng = Pcg32::new(seed, streams::SAMPLES);
    let mut buf = Vec::with_capacity((N_ELECTRODES + grid.n_px()) * 4);
    for _ in 0..n {
        let stim = sample_stimulus(&mut rng);
        let frame = sim.simulate_f64(&stim)?;
        buf.clear();
        for &a in stim.amps() {
            buf.extend_from_slice(&(a as f32).to_le_bytes());
        }
        for &p in &frame {
            buf.extend_from_slice(&(p as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    let digest = w.digest.finish();
    w.inner.flush()?;
    drop(w);

    let manifest = DatasetManifest {
        subject: subject.id.clone(),
        total: n as u32,
        train: train as u32,
        test: test as u32,
        rows: grid.rows() as u32,
        cols: grid.cols() as u32,
        seed,
        prng: PRNG_NAME.to_string(),
        normalization,
        format_version: FORMAT_VERSION,
        digest: format!("{:016x}", digest),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(manifest_path(out), json + "\n")?;
    Ok(manifest)
}

struct DigestWriter<W: Write> {
    inner: W,
    digest: Fnv1a,
}

impl<W: Write> Write for DigestWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.digest.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// In-memory dataset: stimuli and percept frames as f32 rows.
pub struct Dataset {
    count: usize,
    stim_len: usize,
    rows: usize,
    cols: usize,
    stims: Vec<f32>,
    frames: Vec<f32>,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self> {
        let mut file = fs::File::open(path)?;
        let mut header = [0u8; 24];
        file.read_exact(&mut header).map_err(|_| Error::Format("dataset header truncated".into()))?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format("dataset magic: expected \"PSE1\"".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "dataset version: expected {FORMAT_VERSION}, found {version}"
            )));
        }
        let count = word(8) as usize;
        let stim_len = word(12) as usize;
        let rows = word(16) as usize;
        let cols = word(20) as usize;
        let per_sample = stim_len + rows * cols;
        let mut body = Vec::new();
        file.read_to_end(&mut body)?;
        if body.len() != count * per_sample * 4 {
            return Err(Error::Format(format!(
                "dataset payload: expected {} bytes for {count} samples, found {}",
                count * per_sample * 4,
                body.len()
            )));
        }
        let mut stims = Vec::with_capacity(count * stim_len);
        let mut frames = Vec::with_capacity(count * rows * cols);
        for s in 0..count {
            let base = s * per_sample * 4;
            for i in 0..per_sample {
                let off = base + i * 4;
                let v = f32::from_le_bytes(body[off..off + 4].try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::Format(format!("dataset payload: non-finite value in sample {s}")));
                }
                if i < stim_len {
                    stims.push(v);
                } else {
                    frames.push(v);
                }
            }
        }
        Ok(Dataset { count, stim_len, rows, cols, stims, frames })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn stim_len(&self) -> usize {
        self.stim_len
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stim(&self, i: usize) -> &[f32] {
        &self.stims[i * self.stim_len..(i + 1) * self.stim_len]
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let n = self.rows * self.cols;
        &self.frames[i * n..(i + 1) * n]
    }

    pub fn stim_f64(&self, i: usize) -> Stimulus {
        Stimulus::new(self.stim(i).iter().map(|&v| v as f64).collect())
            .expect("stored stimuli were validated on load")
    }

    /// Index ranges of the train and test portions (train first).
    pub fn split(&self) -> Result<(Range<usize>, Range<usize>)> {
        let (train, _) = split_counts(self.count)?;
        Ok((0..train, train..self.count))
    }
}
