//! The three networks: the dense surrogate of the phosphene model, the
//! convolutional stimulus encoder, and the inverse baseline (same
//! architecture as the encoder, run on percepts instead of targets).
//!
//! Networks are bundles of [`ParamId`]s over an external [`ParamStore`], so
//! an encoder and a frozen surrogate can live in one store and share a tape.
//! Initialization draws are pinned: parameters are registered (and
//! initialized, row-major) in a fixed order from a dedicated PCG32 stream, so
//! a (seed, stream) pair fully determines the starting weights.

use pse_autodiff::{NodeId, ParamId, ParamStore, Scalar, Tape, Tensor};

use crate::error::{Error, Result};
use crate::rng::Pcg32;
use crate::stim::{A_MAX, N_ELECTRODES};

pub const DEFAULT_C1: usize = 8;
pub const DEFAULT_C2: usize = 16;

/// Checkpointed model kinds (also the on-disk tag values).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ModelKind {
    Approximator = 1,
    Encoder = 2,
    Inverse = 3,
}

impl ModelKind {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(ModelKind::Approximator),
            2 => Ok(ModelKind::Encoder),
            3 => Ok(ModelKind::Inverse),
            other => Err(Error::Format(format!("unknown model kind tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Approximator => "approximator",
            ModelKind::Encoder => "encoder",
            ModelKind::Inverse => "inverse",
        }
    }
}

/// Architecture hyperparameters stored in every checkpoint.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ModelHyper {
    pub rows: usize,
    pub cols: usize,
    pub c1: usize,
    pub c2: usize,
    pub a_max: f64,
    pub n_stim: usize,
}

impl ModelHyper {
    pub fn for_grid(rows: usize, cols: usize) -> Self {
        ModelHyper { rows, cols, c1: DEFAULT_C1, c2: DEFAULT_C2, a_max: A_MAX, n_stim: N_ELECTRODES }
    }
}

fn kaiming_uniform<T: Scalar>(rng: &mut Pcg32, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = (1.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n).map(|_| T::from_f64(rng.uniform(-bound, bound))).collect();
    Tensor::from_vec(shape, data).expect("shape/product consistency")
}

/// Flatten the given parameters (in order) into one value vector.
pub fn collect_params<T: Scalar>(store: &ParamStore<T>, ids: &[ParamId]) -> Vec<T> {
    let mut out = Vec::new();
    for &id in ids {
        out.extend_from_slice(store.value(id).data());
    }
    out
}

/// Write a flat value vector back over the given parameters (in order).
pub fn install_params<T: Scalar>(store: &mut ParamStore<T>, ids: &[ParamId], flat: &[T]) -> Result<()> {
    let expected: usize = ids.iter().map(|&id| store.value(id).len()).sum();
    if flat.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "parameter payload holds {} values, model expects {expected}",
            flat.len()
        )));
    }
    let mut offset = 0;
    for &id in ids {
        let n = store.value(id).len();
        store.value_mut(id).data_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
    Ok(())
}

/// Single dense layer 60 → rows·cols with ReLU output: the differentiable
/// stand-in for the phosphene model.
pub struct ApproxNet {
    pub w: ParamId,
    pub b: ParamId,
    hyper: ModelHyper,
}

impl ApproxNet {
    /// Register freshly initialized parameters (`w` then `b`; `b` zero).
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        hyper: ModelHyper,
        seed: u64,
        stream: u64,
        trainable: bool,
    ) -> Result<Self> {
        Self::validate(&hyper)?;
        let n_px = hyper.rows * hyper.cols;
        let mut rng = Pcg32::new(seed, stream);
        let w = store.add("approx.w", kaiming_uniform(&mut rng, &[n_px, hyper.n_stim], hyper.n_stim), trainable);
        let b = store.add("approx.b", Tensor::zeros(&[n_px]), trainable);
        Ok(ApproxNet { w, b, hyper })
    }

    /// Register zero-valued parameters to be overwritten by a checkpoint.
    pub fn placeholder<T: Scalar>(store: &mut ParamStore<T>, hyper: ModelHyper, trainable: bool) -> Result<Self> {
        Self::validate(&hyper)?;
        let n_px = hyper.rows * hyper.cols;
        let w = store.add("approx.w", Tensor::zeros(&[n_px, hyper.n_stim]), trainable);
        let b = store.add("approx.b", Tensor::zeros(&[n_px]), trainable);
        Ok(ApproxNet { w, b, hyper })
    }

    fn validate(hyper: &ModelHyper) -> Result<()> {
        if hyper.rows == 0 || hyper.cols == 0 || hyper.n_stim == 0 {
            return Err(Error::InvalidArgument("surrogate needs nonzero grid and stimulus dimensions".into()));
        }
        Ok(())
    }

    pub fn hyper(&self) -> &ModelHyper {
        &self.hyper
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.w, self.b]
    }

    /// relu(W·(stim/a_max) + b), flat [rows·cols]. `x` must be a [n_stim]
    /// node. Amplitudes are rescaled to [0, 1] before the dense layer so the
    /// weights live at the unit scale the initialization assumes; folding the
    /// factor into W recovers the plain affine form.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: NodeId) -> Result<NodeId> {
        let scaled = tape.scale(x, T::from_f64(1.0 / crate::stim::A_MAX));
        let z = tape.dense(store, scaled, self.w, self.b)?;
        Ok(tape.relu(z))
    }

    /// Forward pass outside any training loop.
    pub fn predict<T: Scalar>(&self, store: &ParamStore<T>, stim: &[T]) -> Result<Vec<T>> {
        if stim.len() != self.hyper.n_stim {
            return Err(Error::InvalidArgument(format!(
                "stimulus has {} values, surrogate expects {}",
                stim.len(),
                self.hyper.n_stim
            )));
        }
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[stim.len()], stim.to_vec())?);
        let y = self.forward(&mut tape, store, x)?;
        Ok(tape.value(y).data().to_vec())
    }
}

/// Layer sequence shared by the encoder and the inverse baseline.
pub const CONV_NET_LAYERS: [&str; 10] =
    ["conv3x3", "relu", "maxpool2", "conv3x3", "relu", "maxpool2", "flatten", "dense", "sigmoid", "scale"];

/// conv(C1) → relu → pool → conv(C2) → relu → pool → dense → scaled sigmoid.
/// Maps a rows×cols frame to `n_stim` amplitudes in [0, a_max].
pub struct ConvNet {
    pub k1: ParamId,
    pub b1: ParamId,
    pub k2: ParamId,
    pub b2: ParamId,
    pub w: ParamId,
    pub b: ParamId,
    hyper: ModelHyper,
    flat_len: usize,
}

impl ConvNet {
    /// (h1, w1, h2, w2, flatten) after the two conv/pool stages.
    pub fn feature_dims(hyper: &ModelHyper) -> Result<(usize, usize, usize, usize, usize)> {
        let (h1, w1) = (hyper.rows / 2, hyper.cols / 2);
        let (h2, w2) = (h1 / 2, w1 / 2);
        if h2 == 0 || w2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid {}×{} collapses to nothing after two 2×2 pools",
                hyper.rows, hyper.cols
            )));
        }
        if hyper.c1 == 0 || hyper.c2 == 0 || hyper.n_stim == 0 || !(hyper.a_max > 0.0) {
            return Err(Error::InvalidArgument("channel counts, output length and a_max must be positive".into()));
        }
        Ok((h1, w1, h2, w2, h2 * w2 * hyper.c2))
    }

    /// Register freshly initialized parameters in payload order
    /// (k1, b1, k2, b2, w, b; biases zero).
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        kind: ModelKind,
        hyper: ModelHyper,
        seed: u64,
        stream: u64,
        trainable: bool,
    ) -> Result<Self> {
        let (_, _, _, _, flat_len) = Self::feature_dims(&hyper)?;
        let mut rng = Pcg32::new(seed, stream);
        let p = kind.name();
        let k1 = store.add(format!("{p}.k1"), kaiming_uniform(&mut rng, &[hyper.c1, 1, 3, 3], 9), trainable);
        let b1 = store.add(format!("{p}.b1"), Tensor::zeros(&[hyper.c1]), trainable);
        let k2 = store.add(
            format!("{p}.k2"),
            kaiming_uniform(&mut rng, &[hyper.c2, hyper.c1, 3, 3], hyper.c1 * 9),
            trainable,
        );
        let b2 = store.add(format!("{p}.b2"), Tensor::zeros(&[hyper.c2]), trainable);
        let w = store.add(
            format!("{p}.w"),
            kaiming_uniform(&mut rng, &[hyper.n_stim, flat_len], flat_len),
            trainable,
        );
        let b = store.add(format!("{p}.b"), Tensor::zeros(&[hyper.n_stim]), trainable);
        Ok(ConvNet { k1, b1, k2, b2, w, b, hyper, flat_len })
    }

    /// Register zero-valued parameters to be overwritten by a checkpoint.
    pub fn placeholder<T: Scalar>(
        store: &mut ParamStore<T>,
        kind: ModelKind,
        hyper: ModelHyper,
        trainable: bool,
    ) -> Result<Self> {
        let (_, _, _, _, flat_len) = Self::feature_dims(&hyper)?;
        let p = kind.name();
        let k1 = store.add(format!("{p}.k1"), Tensor::zeros(&[hyper.c1, 1, 3, 3]), trainable);
        let b1 = store.add(format!("{p}.b1"), Tensor::zeros(&[hyper.c1]), trainable);
        let k2 = store.add(format!("{p}.k2"), Tensor::zeros(&[hyper.c2, hyper.c1, 3, 3]), trainable);
        let b2 = store.add(format!("{p}.b2"), Tensor::zeros(&[hyper.c2]), trainable);
        let w = store.add(format!("{p}.w"), Tensor::zeros(&[hyper.n_stim, flat_len]), trainable);
        let b = store.add(format!("{p}.b"), Tensor::zeros(&[hyper.n_stim]), trainable);
        Ok(ConvNet { k1, b1, k2, b2, w, b, hyper, flat_len })
    }

    pub fn hyper(&self) -> &ModelHyper {
        &self.hyper
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.k1, self.b1, self.k2, self.b2, self.w, self.b]
    }

    pub fn layer_count(&self) -> usize {
        CONV_NET_LAYERS.len()
    }

    /// Frame → amplitudes. `x` is a flat [rows·cols] node.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: NodeId) -> Result<NodeId> {
        let img = tape.reshape(x, &[1, self.hyper.rows, self.hyper.cols])?;
        let c1 = tape.conv2d_3x3(store, img, self.k1, self.b1)?;
        let r1 = tape.relu(c1);
        let p1 = tape.maxpool2(r1)?;
        let c2 = tape.conv2d_3x3(store, p1, self.k2, self.b2)?;
        let r2 = tape.relu(c2);
        let p2 = tape.maxpool2(r2)?;
        let flat = tape.reshape(p2, &[self.flat_len])?;
        let z = tape.dense(store, flat, self.w, self.b)?;
        let s = tape.sigmoid(z);
        Ok(tape.scale(s, T::from_f64(self.hyper.a_max)))
    }

    /// Forward pass outside any training loop.
    pub fn predict<T: Scalar>(&self, store: &ParamStore<T>, frame: &[T]) -> Result<Vec<T>> {
        let n_px = self.hyper.rows * self.hyper.cols;
        if frame.len() != n_px {
            return Err(Error::InvalidArgument(format!(
                "frame has {} values, model expects {}×{}",
                frame.len(),
                self.hyper.rows,
                self.hyper.cols
            )));
        }
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[frame.len()], frame.to_vec())?);
        let y = self.forward(&mut tape, store, x)?;
        Ok(tape.value(y).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::streams;

    #[test]
    fn feature_shape_trace_on_the_default_grid() {
        let hyper = ModelHyper::for_grid(121, 161);
        let (h1, w1, h2, w2, flat) = ConvNet::feature_dims(&hyper).unwrap();
        assert_eq!((h1, w1), (60, 80));
        assert_eq!((h2, w2), (30, 40));
        assert_eq!(flat, 30 * 40 * DEFAULT_C2);
    }

    #[test]
    fn tiny_grids_are_rejected() {
        let hyper = ModelHyper::for_grid(3, 161);
        assert!(ConvNet::feature_dims(&hyper).is_err());
    }

    #[test]
    fn zero_surrogate_maps_everything_to_zero() {
        let hyper = ModelHyper::for_grid(5, 7);
        let mut store = ParamStore::<f32>::new();
        let net = ApproxNet::placeholder(&mut store, hyper, true).unwrap();
        let out = net.predict(&store, &[3.0f32; 60]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        assert_eq!(out.len(), 35);
    }

    #[test]
    fn surrogate_output_is_nonnegative() {
        let hyper = ModelHyper::for_grid(5, 7);
        let mut store = ParamStore::<f32>::new();
        let net = ApproxNet::init(&mut store, hyper, 1, streams::INIT_APPROX, true).unwrap();
        let out = net.predict(&store, &[9.0f32; 60]).unwrap();
        assert!(out.iter().all(|&v| v >= 0.0));
        assert!(out.iter().any(|&v| v > 0.0), "random weights should light some pixels");
    }

    #[test]
    fn encoder_outputs_live_in_amplitude_range() {
        let hyper = ModelHyper::for_grid(13, 17);
        let mut store = ParamStore::<f32>::new();
        let net = ConvNet::init(&mut store, ModelKind::Encoder, hyper, 7, streams::INIT_ENCODER, true).unwrap();
        let frame: Vec<f32> = (0..13 * 17).map(|i| (i % 11) as f32 / 10.0).collect();
        let out = net.predict(&store, &frame).unwrap();
        assert_eq!(out.len(), 60);
        for &v in &out {
            assert!((0.0..=10.0).contains(&v));
        }
    }

    #[test]
    fn zero_head_emits_midpoint_amplitude() {
        // sigmoid(0) · a_max = 5 when the final dense layer is all zero.
        let hyper = ModelHyper::for_grid(13, 17);
        let mut store = ParamStore::<f32>::new();
        let net = ConvNet::init(&mut store, ModelKind::Encoder, hyper, 7, streams::INIT_ENCODER, true).unwrap();
        for v in store.value_mut(net.w).data_mut() {
            *v = 0.0;
        }
        for v in store.value_mut(net.b).data_mut() {
            *v = 0.0;
        }
        let frame = vec![0.25f32; 13 * 17];
        let out = net.predict(&store, &frame).unwrap();
        for &v in &out {
            assert_eq!(v, 5.0);
        }
    }

    #[test]
    fn encoder_and_inverse_have_equal_depth() {
        let hyper = ModelHyper::for_grid(13, 17);
        let mut store = ParamStore::<f32>::new();
        let enc = ConvNet::init(&mut store, ModelKind::Encoder, hyper, 7, streams::INIT_ENCODER, true).unwrap();
        let inv = ConvNet::init(&mut store, ModelKind::Inverse, hyper, 7, streams::INIT_INVERSE, true).unwrap();
        assert_eq!(enc.layer_count(), inv.layer_count());
    }

    #[test]
    fn init_is_seed_deterministic_and_stream_separated() {
        let hyper = ModelHyper::for_grid(13, 17);
        let mut s1 = ParamStore::<f32>::new();
        let mut s2 = ParamStore::<f32>::new();
        let n1 = ConvNet::init(&mut s1, ModelKind::Encoder, hyper, 5, streams::INIT_ENCODER, true).unwrap();
        let n2 = ConvNet::init(&mut s2, ModelKind::Encoder, hyper, 5, streams::INIT_ENCODER, true).unwrap();
        assert_eq!(collect_params(&s1, &n1.param_ids()), collect_params(&s2, &n2.param_ids()));

        let mut s3 = ParamStore::<f32>::new();
        let n3 = ConvNet::init(&mut s3, ModelKind::Inverse, hyper, 5, streams::INIT_INVERSE, true).unwrap();
        assert_ne!(collect_params(&s1, &n1.param_ids()), collect_params(&s3, &n3.param_ids()));
    }

    #[test]
    fn init_bounds_match_fan_in() {
        let hyper = ModelHyper::for_grid(13, 17);
        let mut store = ParamStore::<f64>::new();
        let net = ConvNet::init(&mut store, ModelKind::Encoder, hyper, 3, streams::INIT_ENCODER, true).unwrap();
        let b1 = (1.0f64 / 9.0).sqrt();
        assert!(store.value(net.k1).data().iter().all(|v| v.abs() <= b1));
        let b2 = (1.0f64 / (hyper.c1 as f64 * 9.0)).sqrt();
        assert!(store.value(net.k2).data().iter().all(|v| v.abs() <= b2));
        assert!(store.value(net.b1).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn collect_and_install_round_trip() {
        let hyper = ModelHyper::for_grid(13, 17);
        let mut store = ParamStore::<f32>::new();
        let net = ConvNet::init(&mut store, ModelKind::Encoder, hyper, 5, streams::INIT_ENCODER, true).unwrap();
        let flat = collect_params(&store, &net.param_ids());

        let mut other = ParamStore::<f32>::new();
        let copy = ConvNet::placeholder(&mut other, ModelKind::Encoder, hyper, true).unwrap();
        install_params(&mut other, &copy.param_ids(), &flat).unwrap();
        assert_eq!(collect_params(&other, &copy.param_ids()), flat);
        assert!(install_params(&mut other, &copy.param_ids(), &flat[1..]).is_err());
    }
}
