//! Training pipelines: fit the surrogate to the phosphene model, train the
//! encoder end-to-end through the frozen surrogate, and train the inverse
//! baseline on reversed dataset pairs.
//!
//! All three share one deterministic loop: per-epoch Fisher–Yates shuffles
//! drawn from a (seed, epoch) stream, per-sample tapes whose gradients
//! accumulate in the store, batch-mean scaling, then an Adam step. Everything
//! runs in f32 with a fixed reduction order, so (seed, config, dataset)
//! determine the final checkpoint bit-exactly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use pse_autodiff::{Adam, AdamConfig, NodeId, ParamStore, Tape, Tensor};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::{Dataset, DatasetManifest};
use crate::digest::digest_f32;
use crate::error::{Error, Result};
use crate::grid::VisualFieldGrid;
use crate::mnist::TargetSet;
use crate::models::{collect_params, ApproxNet, ConvNet, ModelHyper, ModelKind};
use crate::rng::{streams, Pcg32};

#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 20, batch_size: 64, lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, seed: 42 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidArgument("epochs and batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.lr)));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps {} must be positive", self.eps)));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TrainReport {
    pub model: String,
    pub subject: String,
    /// Mean train loss per epoch, in epoch order.
    pub epoch_losses: Vec<f64>,
    /// Mean train loss of the untrained model (the epoch-0 baseline).
    pub initial_loss: f64,
    /// Mean loss on the held-out split after training.
    pub heldout_loss: f64,
    pub n_train: usize,
    pub n_heldout: usize,
    pub wall_secs: f64,
    pub config: TrainConfig,
    /// FNV-1a 64 (hex) of the dataset binary feeding this run.
    pub dataset_digest: String,
    /// Surrogate payload digests around encoder training (encoder runs only).
    pub frozen_digest_pre: Option<String>,
    pub frozen_digest_post: Option<String>,
    /// Mean per-pixel squared brightness over the held-out split (surrogate
    /// runs only) — the scale against which the held-out MSE is judged.
    pub heldout_energy: Option<f64>,
}

impl TrainReport {
    pub fn validate(&self) -> Result<()> {
        let all = self.epoch_losses.iter().chain([&self.initial_loss, &self.heldout_loss]);
        for v in all {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite loss {v} in training report")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// `x.ckpt` → `x.report.json`.
pub fn report_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("report.json")
}

/// The deterministic epoch loop shared by all pipelines. `build_loss` lays a
/// scalar loss for one sample index onto a fresh tape.
fn run_training<F>(
    store: &mut ParamStore<f32>,
    cfg: &TrainConfig,
    n_train: usize,
    mut build_loss: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&mut Tape<f32>, &ParamStore<f32>, usize) -> Result<NodeId>,
{
    cfg.validate()?;
    if n_train == 0 {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let mean_loss = |store: &ParamStore<f32>, build: &mut F, indices: &[usize]| -> Result<f64> {
        let mut sum = 0.0f64;
        for &i in indices {
            let mut tape = Tape::new();
            let loss = build(&mut tape, store, i)?;
            sum += tape.value(loss).data()[0] as f64;
        }
        Ok(sum / indices.len() as f64)
    };
    let all: Vec<usize> = (0..n_train).collect();
    let initial = mean_loss(store, &mut build_loss, &all)?;

    let mut adam = Adam::new(store, cfg.adam());
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order = all.clone();
        Pcg32::new(cfg.seed, streams::SHUFFLE_BASE + epoch as u64).shuffle(&mut order);
        let mut sum = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            store.zero_grads();
            for &i in batch {
                let mut tape = Tape::new();
                let loss = build_loss(&mut tape, store, i)?;
                let value = tape.value(loss).data()[0] as f64;
                if !value.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "training diverged: non-finite loss at epoch {epoch}, sample {i}"
                    )));
                }
                sum += value;
                tape.backward(loss, store)?;
            }
            store.scale_grads(1.0 / batch.len() as f32);
            adam.step(store);
        }
        epoch_losses.push(sum / n_train as f64);
    }
    Ok((initial, epoch_losses))
}

fn heldout_loss<F>(store: &ParamStore<f32>, mut build_loss: F, indices: &[usize]) -> Result<f64>
where
    F: FnMut(&mut Tape<f32>, &ParamStore<f32>, usize) -> Result<NodeId>,
{
    if indices.is_empty() {
        return Err(Error::InvalidArgument("held-out split is empty".into()));
    }
    let mut sum = 0.0f64;
    for &i in indices {
        let mut tape = Tape::new();
        let loss = build_loss(&mut tape, store, i)?;
        sum += tape.value(loss).data()[0] as f64;
    }
    Ok(sum / indices.len() as f64)
}

fn parse_digest(manifest: &DatasetManifest) -> Result<u64> {
    u64::from_str_radix(&manifest.digest, 16)
        .map_err(|_| Error::Format(format!("dataset manifest digest {:?} is not hex", manifest.digest)))
}

fn check_dataset_shape(ds: &Dataset, hyper: &ModelHyper) -> Result<()> {
    if ds.rows() != hyper.rows || ds.cols() != hyper.cols || ds.stim_len() != hyper.n_stim {
        return Err(Error::InvalidArgument(format!(
            "dataset shape {}×{} with {}-electrode stimuli does not match the model ({}×{}, {})",
            ds.rows(),
            ds.cols(),
            ds.stim_len(),
            hyper.rows,
            hyper.cols,
            hyper.n_stim
        )));
    }
    Ok(())
}

/// Fit the dense surrogate to (stimulus → percept) pairs. The returned
/// checkpoint is marked frozen for downstream encoder training.
pub fn train_approximator(
    ds: &Dataset,
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainReport)> {
    let start = Instant::now();
    let mut hyper = ModelHyper::for_grid(ds.rows(), ds.cols());
    hyper.c1 = 0;
    hyper.c2 = 0;
    hyper.a_max = 0.0;
    check_dataset_shape(ds, &hyper)?;
    let (train, test) = ds.split()?;

    let mut store = ParamStore::<f32>::new();
    let net = ApproxNet::init(&mut store, hyper, cfg.seed, streams::INIT_APPROX, true)?;
    let build = |tape: &mut Tape<f32>, store: &ParamStore<f32>, i: usize| -> Result<NodeId> {
        let x = tape.leaf(Tensor::from_vec(&[ds.stim_len()], ds.stim(i).to_vec())?);
        let pred = net.forward(tape, store, x)?;
        let target = tape.leaf(Tensor::from_vec(&[ds.rows() * ds.cols()], ds.frame(i).to_vec())?);
        Ok(tape.mse(pred, target)?)
    };

    let (initial, epoch_losses) = run_training(&mut store, cfg, train.len(), build)?;
    let heldout = heldout_loss(&store, build, &test.clone().collect::<Vec<_>>())?;
    let energy = {
        let mut acc = 0.0f64;
        for i in test.clone() {
            let f = ds.frame(i);
            acc += f.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / f.len() as f64;
        }
        acc / test.len() as f64
    };

    let ckpt = Checkpoint::capture(
        ModelKind::Approximator,
        true,
        cfg.seed,
        parse_digest(manifest)?,
        hyper,
        &store,
        &net.param_ids(),
    );
    let report = TrainReport {
        model: ModelKind::Approximator.name().to_string(),
        subject: manifest.subject.clone(),
        epoch_losses,
        initial_loss: initial,
        heldout_loss: heldout,
        n_train: train.len(),
        n_heldout: test.len(),
        wall_secs: start.elapsed().as_secs_f64(),
        config: *cfg,
        dataset_digest: manifest.digest.clone(),
        frozen_digest_pre: None,
        frozen_digest_post: None,
        heldout_energy: Some(energy),
    };
    report.validate()?;
    Ok((ckpt, report))
}

/// Train the encoder end-to-end: encoder(target) → frozen surrogate →
/// pixel-wise MSE against the target itself. Refuses a surrogate checkpoint
/// that is not marked frozen.
pub fn train_encoder(
    subject: &str,
    train_targets: &TargetSet,
    heldout_targets: &TargetSet,
    grid: &VisualFieldGrid,
    approx: &Checkpoint,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainReport)> {
    let start = Instant::now();
    approx.expect_kind(ModelKind::Approximator)?;
    if !approx.frozen {
        return Err(Error::InvalidArgument(
            "surrogate checkpoint is not marked frozen; refusing to train the encoder through it".into(),
        ));
    }
    if approx.hyper.rows != grid.rows() || approx.hyper.cols != grid.cols() {
        return Err(Error::InvalidArgument(format!(
            "surrogate was trained on a {}×{} grid, targets are prepared for {}×{}",
            approx.hyper.rows,
            approx.hyper.cols,
            grid.rows(),
            grid.cols()
        )));
    }

    // Joint store: frozen surrogate first, trainable encoder second.
    let mut store = ParamStore::<f32>::new();
    let approx_net = ApproxNet::placeholder(&mut store, approx.hyper, false)?;
    approx.install_into(&mut store, &approx_net.param_ids())?;
    let digest_pre = digest_f32(&collect_params(&store, &approx_net.param_ids()));

    let mut enc_hyper = ModelHyper::for_grid(grid.rows(), grid.cols());
    enc_hyper.n_stim = approx.hyper.n_stim;
    let encoder = ConvNet::init(&mut store, ModelKind::Encoder, enc_hyper, cfg.seed, streams::INIT_ENCODER, true)?;

    let n_px = grid.rows() * grid.cols();
    let prepare = |set: &TargetSet, i: usize| -> Result<Vec<f32>> {
        Ok(set.prepare(i, grid)?.into_data())
    };
    let build_on = |set: &TargetSet, tape: &mut Tape<f32>, store: &ParamStore<f32>, i: usize| -> Result<NodeId> {
        let frame = prepare(set, i)?;
        let x = tape.leaf(Tensor::from_vec(&[n_px], frame.clone())?);
        let stim = encoder.forward(tape, store, x)?;
        let percept = approx_net.forward(tape, store, stim)?;
        let target = tape.leaf(Tensor::from_vec(&[n_px], frame)?);
        Ok(tape.mse(percept, target)?)
    };

    let (initial, epoch_losses) = run_training(&mut store, cfg, train_targets.len(), |tape, store, i| {
        build_on(train_targets, tape, store, i)
    })?;
    let heldout = heldout_loss(
        &store,
        |tape, store, i| build_on(heldout_targets, tape, store, i),
        &(0..heldout_targets.len()).collect::<Vec<_>>(),
    )?;
    let digest_post = digest_f32(&collect_params(&store, &approx_net.param_ids()));

    let ckpt = Checkpoint::capture(
        ModelKind::Encoder,
        false,
        cfg.seed,
        approx.dataset_digest,
        enc_hyper,
        &store,
        &encoder.param_ids(),
    );
    let report = TrainReport {
        model: ModelKind::Encoder.name().to_string(),
        subject: subject.to_string(),
        epoch_losses,
        initial_loss: initial,
        heldout_loss: heldout,
        n_train: train_targets.len(),
        n_heldout: heldout_targets.len(),
        wall_secs: start.elapsed().as_secs_f64(),
        config: *cfg,
        dataset_digest: format!("{:016x}", approx.dataset_digest),
        frozen_digest_pre: Some(format!("{digest_pre:016x}")),
        frozen_digest_post: Some(format!("{digest_post:016x}")),
        heldout_energy: None,
    };
    report.validate()?;
    Ok((ckpt, report))
}

/// Train the inverse baseline on reversed pairs: percept in, stimulus out,
/// MSE in stimulus space.
pub fn train_inverse(ds: &Dataset, manifest: &DatasetManifest, cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    let start = Instant::now();
    let mut hyper = ModelHyper::for_grid(ds.rows(), ds.cols());
    hyper.n_stim = ds.stim_len();
    check_dataset_shape(ds, &hyper)?;
    let (train, test) = ds.split()?;

    let mut store = ParamStore::<f32>::new();
    let net = ConvNet::init(&mut store, ModelKind::Inverse, hyper, cfg.seed, streams::INIT_INVERSE, true)?;
    let n_px = ds.rows() * ds.cols();
    let build = |tape: &mut Tape<f32>, store: &ParamStore<f32>, i: usize| -> Result<NodeId> {
        let x = tape.leaf(Tensor::from_vec(&[n_px], ds.frame(i).to_vec())?);
        let pred = net.forward(tape, store, x)?;
        let target = tape.leaf(Tensor::from_vec(&[ds.stim_len()], ds.stim(i).to_vec())?);
        Ok(tape.mse(pred, target)?)
    };

    let (initial, epoch_losses) = run_training(&mut store, cfg, train.len(), build)?;
    let heldout = heldout_loss(&store, build, &test.clone().collect::<Vec<_>>())?;

    let ckpt = Checkpoint::capture(
        ModelKind::Inverse,
        false,
        cfg.seed,
        parse_digest(manifest)?,
        hyper,
        &store,
        &net.param_ids(),
    );
    let report = TrainReport {
        model: ModelKind::Inverse.name().to_string(),
        subject: manifest.subject.clone(),
        epoch_losses,
        initial_loss: initial,
        heldout_loss: heldout,
        n_train: train.len(),
        n_heldout: test.len(),
        wall_secs: start.elapsed().as_secs_f64(),
        config: *cfg,
        dataset_digest: manifest.digest.clone(),
        frozen_digest_pre: None,
        frozen_digest_post: None,
        heldout_energy: None,
    };
    report.validate()?;
    Ok((ckpt, report))
}
