//! End-to-end invariants of the phosphene renderer against independent
//! oracles: a naive dense implementation, the scoreboard limit, and the
//! discretization-refinement regression.

use std::sync::Arc;

use pse_core::axon::{build_axon_field, AxonParams};
use pse_core::grid::VisualFieldGrid;
use pse_core::rng::Pcg32;
use pse_core::simulate::{dense_reference_f64, scoreboard_percept, Simulator};
use pse_core::stim::{Stimulus, N_ELECTRODES};
use pse_core::subject::SubjectModel;

fn random_stim(rng: &mut Pcg32) -> Stimulus {
    let amps: Vec<f64> =
        (0..N_ELECTRODES).map(|_| if rng.next_f64() < 0.3 { rng.uniform(1.0, 10.0) } else { 0.0 }).collect();
    Stimulus::new(amps).unwrap()
}

#[test]
fn optimized_renderer_matches_naive_dense_oracle() {
    let grid = VisualFieldGrid::new(20, 20, 0.6).unwrap();
    let params = AxonParams { count: 90, ..Default::default() };
    let field = Arc::new(build_axon_field(&grid, &params).unwrap());
    let mut rng = Pcg32::new(99, 7);
    for subject in SubjectModel::presets() {
        let sim = Simulator::new(subject.clone(), Arc::clone(&field)).unwrap();
        let stim = random_stim(&mut rng);
        let fast = sim.simulate_f64(&stim).unwrap();
        let slow = dense_reference_f64(&stim, &subject, &subject.array(), &field).unwrap();
        let worst = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-9, "{}: max |Δ| = {worst:.3e}", subject.id);
    }
}

#[test]
fn zero_stimulus_renders_black_everywhere() {
    let grid = VisualFieldGrid::default();
    let field = Arc::new(build_axon_field(&grid, &AxonParams::default()).unwrap());
    let sim = Simulator::new(SubjectModel::preset("S-12005").unwrap(), field).unwrap();
    let frame = sim.simulate(&Stimulus::zeros()).unwrap();
    assert!(frame.data().iter().all(|&v| v == 0.0));
}

#[test]
fn doubling_amplitudes_doubles_brightness_exactly() {
    let grid = VisualFieldGrid::new(31, 41, 0.5).unwrap();
    let field = Arc::new(build_axon_field(&grid, &AxonParams { count: 200, ..Default::default() }).unwrap());
    let sim = Simulator::new(SubjectModel::preset("S-51009").unwrap(), field).unwrap();
    let mut rng = Pcg32::new(5, 5);
    let stim = random_stim(&mut rng);
    let one = sim.simulate_f64(&stim).unwrap();
    let two = sim.simulate_f64(&stim.scaled(2.0).unwrap()).unwrap();
    for (a, b) in one.iter().zip(&two) {
        assert_eq!(a * 2.0, *b);
    }
}

#[test]
fn raising_one_amplitude_never_darkens_any_pixel() {
    let grid = VisualFieldGrid::new(31, 41, 0.5).unwrap();
    let field = Arc::new(build_axon_field(&grid, &AxonParams { count: 200, ..Default::default() }).unwrap());
    let sim = Simulator::new(SubjectModel::preset("S-52001").unwrap(), field).unwrap();
    let mut rng = Pcg32::new(6, 6);
    let stim = random_stim(&mut rng);
    let base = sim.simulate_f64(&stim).unwrap();
    let mut amps = stim.amps().to_vec();
    amps[17] += 4.0;
    let raised = sim.simulate_f64(&Stimulus::new(amps).unwrap()).unwrap();
    assert!(base.iter().zip(&raised).all(|(a, b)| b >= a));
}

#[test]
fn electrode_relabeling_leaves_the_frame_bit_identical() {
    let grid = VisualFieldGrid::new(31, 41, 0.5).unwrap();
    let field = Arc::new(build_axon_field(&grid, &AxonParams { count: 200, ..Default::default() }).unwrap());
    let subject = SubjectModel::preset("S-12005").unwrap();
    let array = subject.array();
    let mut rng = Pcg32::new(7, 7);
    let stim = random_stim(&mut rng);

    let mut perm: Vec<usize> = (0..array.len()).collect();
    rng.shuffle(&mut perm);
    let positions: Vec<(f64, f64)> = perm.iter().map(|&i| array.position(i)).collect();
    let amps: Vec<f64> = perm.iter().map(|&i| stim.amps()[i]).collect();
    let relabeled = pse_core::electrodes::ElectrodeArray::from_positions(positions).unwrap();

    let a = Simulator::new(subject.clone(), Arc::clone(&field))
        .unwrap()
        .simulate_f64(&stim)
        .unwrap();
    let b = Simulator::with_array(subject, relabeled, field)
        .unwrap()
        .simulate_f64(&Stimulus::new(amps).unwrap())
        .unwrap();
    assert_eq!(a, b);
}

/// With a vanishing axon constant and a fine segment step the axon-map model
/// degenerates to the scoreboard model: only each pixel's own segment
/// contributes, and its midpoint is within half a step of the pixel center.
#[test]
fn tiny_axon_constant_converges_to_the_scoreboard_model() {
    let grid = VisualFieldGrid::default();
    let params = AxonParams { count: 2400, step_deg: 0.05, ..Default::default() };
    let field = Arc::new(build_axon_field(&grid, &params).unwrap());
    let subject = SubjectModel::new("limit", 1200.0, 1.0, 0.0, 0.0, 0.0).unwrap();

    let mut amps = vec![0.0; N_ELECTRODES];
    amps[24] = 1.0;
    let stim = Stimulus::new(amps).unwrap();

    let axon_frame = Simulator::new(subject.clone(), Arc::clone(&field))
        .unwrap()
        .simulate_f64(&stim)
        .unwrap();
    let board = scoreboard_percept(&stim, &subject, &grid).unwrap();
    let peak = board.data().iter().cloned().fold(0.0f32, f32::max) as f64;
    assert!(peak > 0.5, "peak {peak} unexpectedly small");

    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for (a, &s) in axon_frame.iter().zip(board.data()) {
        let s = s as f64;
        if s > 0.01 * peak {
            checked += 1;
            worst = worst.max((a - s).abs() / s);
        }
    }
    assert!(checked > 50, "only {checked} pixels above threshold");
    assert!(worst < 0.05, "worst relative deviation {worst:.4} over {checked} pixels");
}

/// Regression bound for step refinement (0.25° → 0.05°). Because assignment
/// picks the nearest segment *midpoint*, and the longitudinal sample spacing
/// (0.25°) exceeds the transverse axon gap (2πr/600 ≈ 0.21° at r = 20°) over
/// much of the grid, near-tie pixels legitimately flip to a neighboring axon
/// when the sampling phase changes: measured 6367/19481 ≈ 32.7% on the
/// default grid. The functional output is far more stable — neighboring axons
/// carry nearly identical paths — so the percept itself is also pinned here.
#[test]
fn assignment_and_percept_stability_under_step_refinement() {
    let grid = VisualFieldGrid::default();
    let coarse = Arc::new(build_axon_field(&grid, &AxonParams::default()).unwrap());
    let fine = Arc::new(
        build_axon_field(&grid, &AxonParams { step_deg: 0.05, ..Default::default() }).unwrap(),
    );

    let n = grid.n_px();
    let mut moved = 0usize;
    for p in 0..n {
        let (a_coarse, _) = coarse.assignment(p);
        let (a_fine, _) = fine.assignment(p);
        if a_coarse != a_fine {
            moved += 1;
        }
    }
    let frac = moved as f64 / n as f64;
    assert!(frac < 0.34, "{moved}/{n} pixels changed axon ({frac:.4})");

    let subject = SubjectModel::preset("S-12005").unwrap();
    let mut rng = Pcg32::new(21, 4);
    let stim = random_stim(&mut rng);
    let a = Simulator::new(subject.clone(), coarse).unwrap().simulate_f64(&stim).unwrap();
    let b = Simulator::new(subject, fine).unwrap().simulate_f64(&stim).unwrap();
    let peak = a.iter().cloned().fold(0.0f64, f64::max);
    let mut devs: Vec<f64> = a
        .iter()
        .zip(&b)
        .filter(|(x, _)| **x > 0.01 * peak)
        .map(|(x, y)| (*x - *y).abs() / *x)
        .collect();
    devs.sort_by(|p, q| p.total_cmp(q));
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    let p95 = devs[devs.len() * 95 / 100];
    // Measured on this seed: mean 0.0497, p95 0.1615. Individual reassigned
    // pixels can move much further (max ~1.26); the pointwise max is not a
    // stable statistic of the discretization and is deliberately not pinned.
    assert!(mean < 0.08, "mean relative percept deviation {mean:.4}");
    assert!(p95 < 0.25, "p95 relative percept deviation {p95:.4}");
}

/// A percept frame rendered through the precomputed-kernel path and the
/// on-the-fly path must agree bitwise; the paths share one kernel function.
#[test]
fn kernel_and_direct_paths_agree_bitwise_on_a_large_field() {
    let grid = VisualFieldGrid::default();
    let field = Arc::new(build_axon_field(&grid, &AxonParams::default()).unwrap());
    let subject = SubjectModel::preset("S-52001").unwrap();
    let sim = Simulator::new(subject.clone(), Arc::clone(&field)).unwrap();
    let mut rng = Pcg32::new(12, 3);
    let stim = random_stim(&mut rng);
    let with_kernel = sim.simulate_f64(&stim).unwrap();
    let direct = Simulator::new(subject, field)
        .unwrap()
        .without_precomputed_kernel()
        .simulate_f64(&stim)
        .unwrap();
    assert_eq!(with_kernel, direct);
}
