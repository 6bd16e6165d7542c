//! Central finite-difference gradient checking.
//!
//! Checks run in `f64`: the graph under test is rebuilt from scratch for every
//! probe, so the closures receive the tape, the parameter store, and the input
//! node and must return the (one-element) loss node.
//!
//! The reported score is the maximum over coordinates of the relative error
//! `|analytic - numeric| / max(|analytic|, |numeric|)`, falling back to the
//! absolute difference when both magnitudes are below `1e-6` (where a relative
//! measure would just amplify roundoff).

use crate::error::Result;
use crate::params::{ParamId, ParamStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Relative error with an absolute fallback for near-zero pairs.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom < 1e-6 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / denom
    }
}

fn eval<F>(store: &ParamStore<f64>, x: &Tensor<f64>, build: &F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>, NodeId) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let xid = tape.leaf(x.clone());
    let loss = build(&mut tape, store, xid)?;
    Ok(tape.value(loss).item())
}

/// Check the gradient of the loss with respect to the input tensor.
///
/// Returns the worst relative error across input coordinates.
pub fn gradcheck_input<F>(store: &ParamStore<f64>, x: &Tensor<f64>, eps: f64, build: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>, NodeId) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let xid = tape.leaf(x.clone());
    let loss = build(&mut tape, store, xid)?;
    let mut scratch = store.clone();
    scratch.zero_grads();
    let grads = tape.backward(loss, &mut scratch)?;
    let analytic: Vec<f64> = match grads.wrt(xid) {
        Some(g) => g.data().to_vec(),
        None => vec![0.0; x.len()],
    };

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += eps;
        let mut xm = x.clone();
        xm.data_mut()[i] -= eps;
        let numeric = (eval(store, &xp, &build)? - eval(store, &xm, &build)?) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

/// Check the gradient of the loss with respect to one parameter.
///
/// The parameter is perturbed in place and restored, so the store is unchanged
/// on return (apart from gradients left by the analytic pass).
pub fn gradcheck_param<F>(
    store: &mut ParamStore<f64>,
    pid: ParamId,
    x: &Tensor<f64>,
    eps: f64,
    build: F,
) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>, NodeId) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let xid = tape.leaf(x.clone());
    let loss = build(&mut tape, store, xid)?;
    store.zero_grads();
    tape.backward(loss, store)?;
    let analytic = store.grad(pid).data().to_vec();

    let mut worst = 0.0f64;
    for i in 0..analytic.len() {
        let original = store.value(pid).data()[i];
        store.value_mut(pid).data_mut()[i] = original + eps;
        let fp = eval(store, x, &build)?;
        store.value_mut(pid).data_mut()[i] = original - eps;
        let fm = eval(store, x, &build)?;
        store.value_mut(pid).data_mut()[i] = original;
        let numeric = (fp - fm) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}
