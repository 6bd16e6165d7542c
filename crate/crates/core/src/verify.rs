//! Runtime self-checks for the phosphene model.
//!
//! These run the same invariants the test suite relies on, but against the
//! user's actual configuration, so a misconfigured grid or subject is caught
//! before hours of dataset generation or training. Each check returns a
//! human-readable name plus pass/fail detail.

use std::sync::Arc;

use pse_autodiff::gradcheck::gradcheck_param;
use pse_autodiff::{ParamStore, Tensor};

use crate::axon::{build_axon_field, AxonField, AxonParams};
use crate::electrodes::ElectrodeArray;
use crate::error::Result;
use crate::grid::VisualFieldGrid;
use crate::models::{ApproxNet, ConvNet, ModelHyper, ModelKind};
use crate::rng::{streams, Pcg32};
use crate::simulate::{dense_reference_f64, Simulator};
use crate::stim::Stimulus;
use crate::subject::SubjectModel;

pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.to_string(), passed, detail }
}

fn random_stim(rng: &mut Pcg32, n: usize, sparsity: f64) -> Stimulus {
    let mut amps = vec![0.0f64; n];
    for a in amps.iter_mut() {
        if rng.next_f64() < sparsity {
            *a = rng.uniform(1.0, 10.0);
        }
    }
    Stimulus::new(amps).unwrap()
}

/// Zero stimulus must produce an all-zero percept.
fn check_zero(sim: &Simulator) -> Result<CheckOutcome> {
    let f = sim.simulate_f64(&Stimulus::zeros())?;
    let max = f.iter().cloned().fold(0.0f64, f64::max);
    Ok(outcome("zero-stimulus", max == 0.0, format!("max brightness {max}")))
}

/// Doubling every amplitude must exactly double every pixel.
fn check_homogeneity(sim: &Simulator, rng: &mut Pcg32) -> Result<CheckOutcome> {
    let stim = random_stim(rng, sim.array().len(), 0.25);
    let one = sim.simulate_f64(&stim)?;
    let two = sim.simulate_f64(&stim.scaled(2.0)?)?;
    let exact = one.iter().zip(&two).all(|(a, b)| (a * 2.0).to_bits() == b.to_bits());
    Ok(outcome("homogeneity", exact, "b(2a) == 2 b(a) bitwise".into()))
}

/// Raising one electrode's amplitude can never darken any pixel.
fn check_monotonicity(sim: &Simulator, rng: &mut Pcg32) -> Result<CheckOutcome> {
    let stim = random_stim(rng, sim.array().len(), 0.25);
    let base = sim.simulate_f64(&stim)?;
    let e = rng.below(sim.array().len() as u32) as usize;
    let mut amps = stim.amps().to_vec();
    amps[e] += 3.0;
    let brighter = sim.simulate_f64(&Stimulus::new(amps)?)?;
    let violations = base.iter().zip(&brighter).filter(|(b, h)| h < b).count();
    Ok(outcome("monotonicity", violations == 0, format!("{violations} darkened pixels")))
}

/// Relabeling electrodes together with their amplitudes leaves the percept
/// bit-identical (the model has no notion of electrode order).
fn check_permutation(subject: &SubjectModel, field: &Arc<AxonField>, rng: &mut Pcg32) -> Result<CheckOutcome> {
    let array = subject.array();
    let n = array.len();
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let permuted_pos: Vec<(f64, f64)> = perm.iter().map(|&e| array.position(e)).collect();
    let permuted = ElectrodeArray::from_positions(permuted_pos)?;

    let stim = random_stim(rng, n, 0.3);
    let mut permuted_amps = vec![0.0f64; n];
    for (slot, &e) in perm.iter().enumerate() {
        permuted_amps[slot] = stim.amps()[e];
    }

    let sim_a = Simulator::with_array(subject.clone(), array, Arc::clone(field))?;
    let sim_b = Simulator::with_array(subject.clone(), permuted, Arc::clone(field))?;
    let a = sim_a.simulate_f64(&stim)?;
    let b = sim_b.simulate_f64(&Stimulus::new(permuted_amps)?)?;
    let exact = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok(outcome("permutation-invariance", exact, "relabeled electrodes, bitwise equal".into()))
}

/// The optimized simulator agrees with a naive dense evaluation (no cutoffs,
/// no pruning, raw electrode order) to 1e−9 on a reduced grid.
fn check_dense_reference(subject: &SubjectModel, rng: &mut Pcg32) -> Result<CheckOutcome> {
    let grid = VisualFieldGrid::new(20, 20, 0.6)?;
    let params = AxonParams { count: 80, ..Default::default() };
    let field = Arc::new(build_axon_field(&grid, &params)?);
    let sim = Simulator::new(subject.clone(), Arc::clone(&field))?;
    let stim = random_stim(rng, sim.array().len(), 0.3);
    let fast = sim.simulate_f64(&stim)?;
    let slow = dense_reference_f64(&stim, subject, sim.array(), &field)?;
    let worst = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    Ok(outcome("dense-reference", worst <= 1e-9, format!("max |Δ| = {worst:.3e}")))
}

/// Full invariant suite for one subject. The dense-reference check runs on a
/// reduced grid; everything else uses the caller's grid and axon field.
pub fn run_checks(subject: &SubjectModel, field: &Arc<AxonField>, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = Pcg32::new(seed, streams::PROBE);
    let sim = Simulator::new(subject.clone(), Arc::clone(field))?;
    Ok(vec![
        check_zero(&sim)?,
        check_homogeneity(&sim, &mut rng)?,
        check_monotonicity(&sim, &mut rng)?,
        check_permutation(subject, field, &mut rng)?,
        check_dense_reference(subject, &mut rng)?,
    ])
}

/// Finite-difference check of the encoder→surrogate composite in f64 on a
/// reduced grid: worst relative gradient error over the encoder's conv
/// parameters must stay below 1e−5.
pub fn composite_gradcheck(seed: u64) -> Result<CheckOutcome> {
    const TOL: f64 = 1e-5;
    let hyper = ModelHyper::for_grid(13, 17);
    let mut store = ParamStore::<f64>::new();
    let approx = ApproxNet::init(&mut store, hyper, seed, streams::INIT_APPROX, false)?;
    let encoder = ConvNet::init(&mut store, ModelKind::Encoder, hyper, seed, streams::INIT_ENCODER, true)?;

    let mut rng = Pcg32::new(seed, streams::PROBE);
    let n_px = 13 * 17;
    let x = Tensor::from_vec(&[n_px], (0..n_px).map(|_| rng.next_f64()).collect())?;
    let target: Vec<f64> = (0..n_px).map(|_| rng.next_f64()).collect();

    let mut worst = 0.0f64;
    for pid in [encoder.k1, encoder.b1, encoder.k2, encoder.b2] {
        let err = gradcheck_param(&mut store, pid, &x, 1e-4, |tape, store, x_node| {
            let adify = |e: crate::error::Error| pse_autodiff::Error::InvalidArgument(e.to_string());
            let stim = encoder.forward(tape, store, x_node).map_err(adify)?;
            let percept = approx.forward(tape, store, stim).map_err(adify)?;
            let t = tape.leaf(Tensor::from_vec(&[n_px], target.clone())?);
            tape.mse(percept, t)
        })?;
        worst = worst.max(err);
    }
    Ok(outcome("composite-gradcheck", worst < TOL, format!("worst relative error {worst:.3e}")))
}
