//! Model checkpoints: a little-endian binary container with a kind tag,
//! architecture hyperparameters, the flat f32 parameter payload, and a
//! trailing FNV-1a 64 checksum over everything before it.

use std::fs;
use std::path::Path;

use pse_autodiff::{ParamId, ParamStore, Scalar};

use crate::digest::{digest_f32, Fnv1a};
use crate::error::{Error, Result};
use crate::models::{collect_params, install_params, ApproxNet, ConvNet, ModelHyper, ModelKind};

const MAGIC: &[u8; 4] = b"PSEC";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub kind: ModelKind,
    /// Whether the parameters are to be treated as immutable by later
    /// training stages (set when the surrogate finishes training).
    pub frozen: bool,
    pub seed: u64,
    /// FNV-1a 64 of the dataset binary this model was trained against
    /// (0 when trained on targets rather than a generated dataset).
    pub dataset_digest: u64,
    pub hyper: ModelHyper,
    pub payload: Vec<f32>,
}

impl Checkpoint {
    /// Snapshot a model's parameters out of its store.
    pub fn capture<T: Scalar>(
        kind: ModelKind,
        frozen: bool,
        seed: u64,
        dataset_digest: u64,
        hyper: ModelHyper,
        store: &ParamStore<T>,
        ids: &[ParamId],
    ) -> Self {
        let payload = collect_params(store, ids).iter().map(|&v| Scalar::to_f64(v) as f32).collect();
        Checkpoint { kind, frozen, seed, dataset_digest, hyper, payload }
    }

    /// FNV-1a 64 over the parameter payload (frozen-invariance checks).
    pub fn params_digest(&self) -> u64 {
        digest_f32(&self.payload)
    }

    pub fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!(
                "checkpoint holds a {} model, expected {}",
                self.kind.name(),
                kind.name()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(58 + self.payload.len() * 4);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.push(self.kind.tag());
        bytes.push(self.frozen as u8);
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(&self.dataset_digest.to_le_bytes());
        for v in [self.hyper.rows, self.hyper.cols, self.hyper.c1, self.hyper.c2] {
            bytes.extend_from_slice(&(v as u32).to_le_bytes());
        }
        bytes.extend_from_slice(&(self.hyper.a_max as f32).to_le_bytes());
        bytes.extend_from_slice(&(self.hyper.n_stim as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        for v in &self.payload {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = Fnv1a::new();
        f.update(&bytes);
        bytes.extend_from_slice(&f.finish().to_le_bytes());
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let take = |offset: usize, n: usize, field: &str| -> Result<&[u8]> {
            bytes
                .get(offset..offset + n)
                .ok_or_else(|| Error::Format(format!("checkpoint truncated reading {field}")))
        };
        if take(0, 4, "magic")? != MAGIC {
            return Err(Error::Format("checkpoint magic: expected \"PSEC\"".into()));
        }
        let u32_at = |off: usize, field: &str| -> Result<u32> {
            Ok(u32::from_le_bytes(take(off, 4, field)?.try_into().unwrap()))
        };
        let u64_at = |off: usize, field: &str| -> Result<u64> {
            Ok(u64::from_le_bytes(take(off, 8, field)?.try_into().unwrap()))
        };
        let version = u32_at(4, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("checkpoint version: expected {FORMAT_VERSION}, found {version}")));
        }
        let kind = ModelKind::from_tag(take(8, 1, "kind")?[0])?;
        let frozen = match take(9, 1, "frozen flag")?[0] {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("frozen flag: expected 0 or 1, found {other}"))),
        };
        let seed = u64_at(10, "seed")?;
        let dataset_digest = u64_at(18, "dataset digest")?;
        let hyper = ModelHyper {
            rows: u32_at(26, "rows")? as usize,
            cols: u32_at(30, "cols")? as usize,
            c1: u32_at(34, "c1")? as usize,
            c2: u32_at(38, "c2")? as usize,
            a_max: f32::from_le_bytes(take(42, 4, "a_max")?.try_into().unwrap()) as f64,
            n_stim: u32_at(46, "n_stim")? as usize,
        };
        let len = u32_at(50, "payload length")? as usize;
        let expected = 54 + len * 4 + 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "checkpoint payload: expected {expected} bytes total for {len} parameters, found {}",
                bytes.len()
            )));
        }
        let mut f = Fnv1a::new();
        f.update(&bytes[..54 + len * 4]);
        let stored = u64::from_le_bytes(bytes[54 + len * 4..].try_into().unwrap());
        if f.finish() != stored {
            return Err(Error::Format(format!(
                "checkpoint checksum mismatch: computed {:016x}, stored {stored:016x}",
                f.finish()
            )));
        }
        let mut payload = Vec::with_capacity(len);
        for i in 0..len {
            let off = 54 + i * 4;
            payload.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
        }
        Ok(Checkpoint { kind, frozen, seed, dataset_digest, hyper, payload })
    }

    /// Materialize an approximator (store + net) from this checkpoint.
    pub fn build_approx<T: Scalar>(&self, trainable: bool) -> Result<(ParamStore<T>, ApproxNet)> {
        self.expect_kind(ModelKind::Approximator)?;
        let mut store = ParamStore::new();
        let net = ApproxNet::placeholder(&mut store, self.hyper, trainable)?;
        let flat: Vec<T> = self.payload.iter().map(|&v| T::from_f64(v as f64)).collect();
        install_params(&mut store, &net.param_ids(), &flat)?;
        Ok((store, net))
    }

    /// Materialize an encoder or inverse model from this checkpoint.
    pub fn build_conv<T: Scalar>(&self, kind: ModelKind, trainable: bool) -> Result<(ParamStore<T>, ConvNet)> {
        self.expect_kind(kind)?;
        let mut store = ParamStore::new();
        let net = ConvNet::placeholder(&mut store, kind, self.hyper, trainable)?;
        let flat: Vec<T> = self.payload.iter().map(|&v| T::from_f64(v as f64)).collect();
        install_params(&mut store, &net.param_ids(), &flat)?;
        Ok((store, net))
    }

    /// Install this checkpoint's payload over an already-registered net.
    pub fn install_into<T: Scalar>(&self, store: &mut ParamStore<T>, ids: &[ParamId]) -> Result<()> {
        let flat: Vec<T> = self.payload.iter().map(|&v| T::from_f64(v as f64)).collect();
        install_params(store, ids, &flat)
    }
}
