//! The ground-truth phosphene model Ψ (axon map) and the scoreboard reference.
//!
//! Brightness at a pixel is the maximum, over segments from the pixel's
//! assigned segment toward the optic disc, of the electrode drive at that
//! segment attenuated by a Gaussian in arclength:
//!
//! ```text
//! b(p) = max_{s ≥ s_p} Σ_e a_e · exp(−d(s,e)²/2ρ²) · exp(−ℓ(p,s)²/2λ²) / norm
//! ```
//!
//! where d is the distance (μm) from the segment midpoint to electrode e and
//! ℓ is arclength (μm) between segment midpoints along the axon.
//!
//! Exactness guarantees built into the evaluation:
//! * Electrodes are always summed in the array's canonical (position-sorted)
//!   order, so relabeling electrodes with their amplitudes is bit-invariant.
//! * The far-electrode cutoff and the along-axon early break depend only on
//!   geometry and provably sub-ulp bounds, preserving exact monotonicity and
//!   the scoreboard/dense-reference tolerances.

use std::sync::Arc;

use crate::axon::AxonField;
use crate::electrodes::ElectrodeArray;
use crate::error::{Error, Result};
use crate::grid::VisualFieldGrid;
use crate::percept::PerceptFrame;
use crate::stim::Stimulus;
use crate::subject::SubjectModel;

/// Electrodes with d² > 82.9·ρ² contribute < 1e−18 of their amplitude and are
/// treated as exact zeros; the cutoff depends only on geometry, never on
/// amplitudes.
const CUTOFF_D2_OVER_RHO2: f64 = 82.9;

/// Safety margin on the along-axon early break: segments are pruned only when
/// their best possible value is below the current max by more than accumulated
/// float error could recover.
const BREAK_MARGIN: f64 = 1.0 + 1e-12;

/// Kernel tables above this many entries are not precomputed (the per-frame
/// path computes kernels on the fly instead).
const KERNEL_BUDGET: usize = 30_000_000;

fn gaussian_kernel(d2: f64, inv_two_rho2: f64, cutoff_d2: f64) -> f64 {
    if d2 > cutoff_d2 {
        0.0
    } else {
        (-d2 * inv_two_rho2).exp()
    }
}

/// Per-subject simulator bound to an axon field and an electrode array.
pub struct Simulator {
    subject: SubjectModel,
    array: ElectrodeArray,
    field: Arc<AxonField>,
    /// Per axon, per segment, per canonical electrode slot:
    /// exp(−d²/2ρ²) with the far cutoff applied. Empty when over budget.
    kernel: Option<Vec<Vec<f64>>>,
}

impl Simulator {
    /// Simulator for a subject's own implant placement.
    pub fn new(subject: SubjectModel, field: Arc<AxonField>) -> Result<Self> {
        let array = subject.array();
        Self::with_array(subject, array, field)
    }

    /// Simulator with an explicit electrode array (used by tests that probe
    /// permutation invariance and custom layouts).
    pub fn with_array(subject: SubjectModel, array: ElectrodeArray, field: Arc<AxonField>) -> Result<Self> {
        subject.validate()?;
        let mut sim = Simulator { subject, array, field, kernel: None };
        if sim.field.total_segments() * sim.array.len() <= KERNEL_BUDGET {
            sim.kernel = Some(sim.build_kernel());
        }
        Ok(sim)
    }

    /// Drop the precomputed kernel so rendering takes the on-the-fly path;
    /// results must be bit-identical either way (both paths share
    /// `gaussian_kernel`). Exposed for equivalence tests and memory probes.
    pub fn without_precomputed_kernel(mut self) -> Self {
        self.kernel = None;
        self
    }

    fn build_kernel(&self) -> Vec<Vec<f64>> {
        let inv_two_rho2 = 1.0 / (2.0 * self.subject.rho_um * self.subject.rho_um);
        let cutoff_d2 = CUTOFF_D2_OVER_RHO2 * self.subject.rho_um * self.subject.rho_um;
        let n_e = self.array.len();
        let order = self.array.canonical_order();
        self.field
            .axons()
            .iter()
            .map(|axon| {
                let mut rows = Vec::with_capacity(axon.mid.len() * n_e);
                for &m in &axon.mid {
                    for &e in order {
                        let (ex, ey) = self.array.position(e);
                        let d2 = (m.0 - ex).powi(2) + (m.1 - ey).powi(2);
                        rows.push(gaussian_kernel(d2, inv_two_rho2, cutoff_d2));
                    }
                }
                rows
            })
            .collect()
    }

    pub fn subject(&self) -> &SubjectModel {
        &self.subject
    }

    pub fn array(&self) -> &ElectrodeArray {
        &self.array
    }

    pub fn field(&self) -> &AxonField {
        &self.field
    }

    pub fn grid(&self) -> &VisualFieldGrid {
        self.field.grid()
    }

    fn validate_stim(&self, stim: &Stimulus) -> Result<()> {
        if stim.amps().len() != self.array.len() {
            return Err(Error::InvalidArgument(format!(
                "stimulus has {} amplitudes but the array has {} electrodes",
                stim.amps().len(),
                self.array.len()
            )));
        }
        Ok(())
    }

    /// Electrode drive per segment of one axon, in canonical electrode order,
    /// skipping silent electrodes. `active` holds (canonical slot, electrode).
    fn axon_activation(&self, axon_idx: usize, active: &[(usize, usize)], amps: &[f64]) -> Vec<f64> {
        let axon = self.field.axon(axon_idx);
        let n_seg = axon.mid.len();
        let mut act = vec![0.0f64; n_seg];
        match &self.kernel {
            Some(kernel) => {
                let n_e = self.array.len();
                let rows = &kernel[axon_idx];
                for (slot, e) in active {
                    let amp = amps[*e];
                    for (s, a) in act.iter_mut().enumerate() {
                        *a += amp * rows[s * n_e + slot];
                    }
                }
            }
            None => {
                let inv_two_rho2 = 1.0 / (2.0 * self.subject.rho_um * self.subject.rho_um);
                let cutoff_d2 = CUTOFF_D2_OVER_RHO2 * self.subject.rho_um * self.subject.rho_um;
                for (_, e) in active {
                    let amp = amps[*e];
                    let (ex, ey) = self.array.position(*e);
                    for (s, a) in act.iter_mut().enumerate() {
                        let m = axon.mid[s];
                        let d2 = (m.0 - ex).powi(2) + (m.1 - ey).powi(2);
                        *a += amp * gaussian_kernel(d2, inv_two_rho2, cutoff_d2);
                    }
                }
            }
        }
        act
    }

    /// Axon-map percept as f64 (row-major). The [`PerceptFrame`] variants
    /// round this buffer to f32.
    pub fn simulate_f64(&self, stim: &Stimulus) -> Result<Vec<f64>> {
        self.validate_stim(stim)?;
        let amps = stim.amps();
        let grid = self.grid();
        // (canonical slot, electrode index) for electrodes that are on.
        let active: Vec<(usize, usize)> = self
            .array
            .canonical_order()
            .iter()
            .enumerate()
            .filter(|(_, &e)| amps[e] > 0.0)
            .map(|(slot, &e)| (slot, e))
            .collect();
        let mut out = vec![0.0f64; grid.n_px()];
        if active.is_empty() {
            return Ok(out);
        }

        let n_axons = self.field.axon_count();
        let mut act: Vec<Vec<f64>> = Vec::with_capacity(n_axons);
        let mut suffix: Vec<Vec<f64>> = Vec::with_capacity(n_axons);
        for a in 0..n_axons {
            let acts = self.axon_activation(a, &active, amps);
            let mut suf = acts.clone();
            for i in (0..suf.len().saturating_sub(1)).rev() {
                if suf[i + 1] > suf[i] {
                    suf[i] = suf[i + 1];
                }
            }
            act.push(acts);
            suffix.push(suf);
        }

        let inv_two_lambda2 = 1.0 / (2.0 * self.subject.lambda_um * self.subject.lambda_um);
        let norm = self.subject.normalization;
        for (px, value) in out.iter_mut().enumerate() {
            let (a, s0) = self.field.assignment(px);
            let acts = &act[a];
            let suf = &suffix[a];
            let cums = &self.field.axon(a).mid_cum;
            let c0 = cums[s0];
            let mut best = 0.0f64;
            for s in s0..acts.len() {
                let l = cums[s] - c0;
                let w = (-l * l * inv_two_lambda2).exp();
                let v = acts[s] * w;
                if v > best {
                    best = v;
                }
                // Future segments have arclength weights ≤ w (ℓ grows toward
                // the disc) and drives ≤ suffix max; prune once even that
                // bound cannot beat the current best.
                if s + 1 < acts.len() && suf[s + 1] * w * BREAK_MARGIN <= best {
                    break;
                }
            }
            *value = best / norm;
        }
        Ok(out)
    }

    pub fn simulate(&self, stim: &Stimulus) -> Result<PerceptFrame> {
        let values = self.simulate_f64(stim)?;
        PerceptFrame::from_f64(self.grid().rows(), self.grid().cols(), &values)
    }

    /// Scoreboard percept for the same subject/array (no axon term).
    pub fn scoreboard_f64(&self, stim: &Stimulus) -> Result<Vec<f64>> {
        self.validate_stim(stim)?;
        scoreboard_with_array(stim, &self.subject, &self.array, self.grid())
    }

    pub fn scoreboard(&self, stim: &Stimulus) -> Result<PerceptFrame> {
        let values = self.scoreboard_f64(stim)?;
        PerceptFrame::from_f64(self.grid().rows(), self.grid().cols(), &values)
    }
}

/// Scoreboard model: independent Gaussian spots, no axon interaction.
pub fn scoreboard_percept(stim: &Stimulus, subject: &SubjectModel, grid: &VisualFieldGrid) -> Result<PerceptFrame> {
    let array = subject.array();
    let values = scoreboard_with_array(stim, subject, &array, grid)?;
    PerceptFrame::from_f64(grid.rows(), grid.cols(), &values)
}

fn scoreboard_with_array(
    stim: &Stimulus,
    subject: &SubjectModel,
    array: &ElectrodeArray,
    grid: &VisualFieldGrid,
) -> Result<Vec<f64>> {
    subject.validate()?;
    if stim.amps().len() != array.len() {
        return Err(Error::InvalidArgument(format!(
            "stimulus has {} amplitudes but the array has {} electrodes",
            stim.amps().len(),
            array.len()
        )));
    }
    let amps = stim.amps();
    let inv_two_rho2 = 1.0 / (2.0 * subject.rho_um * subject.rho_um);
    let cutoff_d2 = CUTOFF_D2_OVER_RHO2 * subject.rho_um * subject.rho_um;
    let active: Vec<usize> = array.canonical_order().iter().copied().filter(|&e| amps[e] > 0.0).collect();
    let mut out = vec![0.0f64; grid.n_px()];
    for row in 0..grid.rows() {
        for col in 0..grid.cols() {
            let p = grid.pixel_center_um(row, col);
            let mut acc = 0.0f64;
            for &e in &active {
                let (ex, ey) = array.position(e);
                let d2 = (p.0 - ex).powi(2) + (p.1 - ey).powi(2);
                acc += amps[e] * gaussian_kernel(d2, inv_two_rho2, cutoff_d2);
            }
            out[row * grid.cols() + col] = acc / subject.normalization;
        }
    }
    Ok(out)
}

/// Naive dense reference implementation of the axon-map model: every segment
/// from the assignment toward the disc, every electrode, no cutoffs, no early
/// break, electrodes in raw index order. The optimized simulator must agree
/// with this within 1e−9 absolute — it exists purely as a test oracle.
pub fn dense_reference_f64(
    stim: &Stimulus,
    subject: &SubjectModel,
    array: &ElectrodeArray,
    field: &AxonField,
) -> Result<Vec<f64>> {
    subject.validate()?;
    if stim.amps().len() != array.len() {
        return Err(Error::InvalidArgument("stimulus/array length mismatch".into()));
    }
    let amps = stim.amps();
    let grid = field.grid();
    let two_rho2 = 2.0 * subject.rho_um * subject.rho_um;
    let two_lambda2 = 2.0 * subject.lambda_um * subject.lambda_um;
    let mut out = vec![0.0f64; grid.n_px()];
    for (px, value) in out.iter_mut().enumerate() {
        let (a, s0) = field.assignment(px);
        let axon = field.axon(a);
        let c0 = axon.mid_cum[s0];
        let mut best = 0.0f64;
        for s in s0..axon.mid.len() {
            let m = axon.mid[s];
            let l = axon.mid_cum[s] - c0;
            let mut acc = 0.0f64;
            for e in 0..array.len() {
                let (ex, ey) = array.position(e);
                let d2 = (m.0 - ex).powi(2) + (m.1 - ey).powi(2);
                acc += amps[e] * (-d2 / two_rho2).exp() * (-(l * l) / two_lambda2).exp();
            }
            if acc > best {
                best = acc;
            }
        }
        *value = best / subject.normalization;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axon::{build_axon_field, AxonParams};

    fn test_setup() -> (Arc<AxonField>, SubjectModel) {
        let grid = VisualFieldGrid::new(20, 20, 0.6).unwrap();
        let field = build_axon_field(&grid, &AxonParams { count: 80, ..Default::default() }).unwrap();
        let subject = SubjectModel::new("t", 300.0, 600.0, 0.0, 0.0, 0.0).unwrap();
        (Arc::new(field), subject)
    }

    fn some_stim() -> Stimulus {
        let mut amps = vec![0.0; 60];
        amps[24] = 5.0;
        amps[25] = 2.0;
        amps[33] = 7.5;
        Stimulus::new(amps).unwrap()
    }

    #[test]
    fn zero_stimulus_gives_zero_frame() {
        let (field, subject) = test_setup();
        let sim = Simulator::new(subject, field).unwrap();
        let f = sim.simulate_f64(&Stimulus::zeros()).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
        let s = sim.scoreboard_f64(&Stimulus::zeros()).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_amplitudes_doubles_brightness_bit_exactly() {
        let (field, subject) = test_setup();
        let sim = Simulator::new(subject, field).unwrap();
        let stim = some_stim();
        let one = sim.simulate_f64(&stim).unwrap();
        let two = sim.simulate_f64(&stim.scaled(2.0).unwrap()).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert_eq!((a * 2.0).to_bits(), b.to_bits());
        }
    }

    #[test]
    fn kernel_and_on_the_fly_paths_agree_bitwise() {
        let (field, subject) = test_setup();
        let with_kernel = Simulator::new(subject.clone(), Arc::clone(&field)).unwrap();
        assert!(with_kernel.kernel.is_some(), "test setup should fit the kernel budget");
        let mut direct = Simulator::new(subject, field).unwrap();
        direct.kernel = None;
        let stim = some_stim();
        let a = with_kernel.simulate_f64(&stim).unwrap();
        let b = direct.simulate_f64(&stim).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn stimulus_length_must_match_array() {
        let (field, subject) = test_setup();
        let array = ElectrodeArray::from_positions(vec![(0.0, 0.0), (100.0, 0.0)]).unwrap();
        let sim = Simulator::with_array(subject, array, field).unwrap();
        assert!(sim.simulate_f64(&Stimulus::zeros()).is_err());
    }

    #[test]
    fn normalization_divides_brightness() {
        let (field, subject) = test_setup();
        let norm = subject.clone().with_normalization(4.0).unwrap();
        let sim1 = Simulator::new(subject, Arc::clone(&field)).unwrap();
        let sim4 = Simulator::new(norm, field).unwrap();
        let stim = some_stim();
        let raw = sim1.simulate_f64(&stim).unwrap();
        let scaled = sim4.simulate_f64(&stim).unwrap();
        for (r, s) in raw.iter().zip(&scaled) {
            assert_eq!((r / 4.0).to_bits(), s.to_bits());
        }
    }

    #[test]
    fn scoreboard_peak_at_electrode_center() {
        // One electrode placed exactly on a pixel center, amp 1, norm 1:
        // that pixel reads exp(0) = 1.
        let grid = VisualFieldGrid::new(9, 9, 1.0).unwrap();
        let subject = SubjectModel::new("t", 200.0, 400.0, 0.0, 0.0, 0.0).unwrap();
        let mut positions = Vec::new();
        for i in 0..60 {
            positions.push((i as f64 * 10_000.0 + 100_000.0, 0.0));
        }
        positions[7] = grid.pixel_center_um(4, 4); // (0, 0)
        let array = ElectrodeArray::from_positions(positions).unwrap();
        let mut amps = vec![0.0; 60];
        amps[7] = 1.0;
        let stim = Stimulus::new(amps).unwrap();
        let vals = scoreboard_with_array(&stim, &subject, &array, &grid).unwrap();
        assert_eq!(vals[4 * 9 + 4], 1.0);
    }
}
