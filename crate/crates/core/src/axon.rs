//! Nerve-fiber (axon) geometry over the visual field.
//!
//! Axons are polylines spiraling from the periphery into the optic disc. Each
//! grid pixel is assigned the nearest axon segment; the simulator then
//! aggregates electrode drive along the assigned axon from that segment toward
//! the disc. The trajectory family is a simple quadratic-bend polar model
//! about the disc; angles never cross the horizontal raphe (the sign of the
//! initial angle is preserved along the whole path).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::VisualFieldGrid;

/// Innermost trajectory radius, degrees from the disc center.
pub const R_MIN_DEG: f64 = 0.5;

/// Angular clamp keeping trajectories strictly on one side of the raphe.
const THETA_CLAMP_DEG: f64 = 179.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxonParams {
    /// Number of axons M.
    pub count: usize,
    /// Bend coefficient β, degrees of angle per squared degree of radius.
    pub beta: f64,
    /// Outermost radius, degrees.
    pub r_max: f64,
    /// Target arclength per segment, degrees.
    pub step_deg: f64,
    /// Optic-disc center in visual-field degrees (right eye: nasal +15°, +2°).
    pub disc_x_deg: f64,
    pub disc_y_deg: f64,
}

impl Default for AxonParams {
    fn default() -> Self {
        AxonParams { count: 600, beta: 0.2, r_max: 50.0, step_deg: 0.25, disc_x_deg: 15.0, disc_y_deg: 2.0 }
    }
}

impl AxonParams {
    pub fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(Error::InvalidArgument("axon count must be at least 1".into()));
        }
        if !(self.step_deg > 0.0) || !self.step_deg.is_finite() {
            return Err(Error::InvalidArgument(format!("axon step must be positive, got {}", self.step_deg)));
        }
        if !(self.r_max > R_MIN_DEG) || !self.r_max.is_finite() {
            return Err(Error::InvalidArgument(format!("axon r_max must exceed {R_MIN_DEG}°")));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("axon beta must be nonnegative, got {}", self.beta)));
        }
        if !self.disc_x_deg.is_finite() || !self.disc_y_deg.is_finite() {
            return Err(Error::InvalidArgument("optic-disc position must be finite".into()));
        }
        Ok(())
    }
}

/// One axon polyline running periphery → optic disc, in retinal μm.
#[derive(Clone, Debug)]
pub struct Axon {
    /// Vertex positions, first = outermost, last = disc center.
    pub vertices: Vec<(f64, f64)>,
    /// Cumulative arclength at each vertex, μm, strictly increasing from 0.
    pub cum_um: Vec<f64>,
    /// Segment midpoints (`vertices.len() - 1` of them), μm.
    pub mid: Vec<(f64, f64)>,
    /// Arclength at each segment midpoint, μm.
    pub mid_cum: Vec<f64>,
}

/// The full axon geometry plus the per-pixel nearest-segment assignment.
#[derive(Clone, Debug)]
pub struct AxonField {
    params: AxonParams,
    grid: VisualFieldGrid,
    axons: Vec<Axon>,
    /// Per pixel (row-major): (axon index, segment index).
    assignment: Vec<(u32, u32)>,
}

/// Trajectory angle about the disc at radius `r` for seed angle `phi0`
/// (degrees). The bend pushes the angle away from zero; the clamp stops it
/// short of ±180° so the path never wraps across the raphe.
fn theta_deg(phi0: f64, beta: f64, r: f64) -> f64 {
    let bend = beta * r * r;
    if phi0 > 0.0 {
        (phi0 + bend).min(THETA_CLAMP_DEG)
    } else {
        (phi0 - bend).max(-THETA_CLAMP_DEG)
    }
}

/// d(theta)/dr in radians per degree-of-radius for stepping purposes: zero in
/// the clamped zone (`r` above the release radius), the unclamped analytic
/// slope at or below it. Exactly on the boundary the unclamped slope applies —
/// that is the side the march is heading into — and comparing against the
/// precomputed release radius keeps the decision stable where the clamp
/// condition itself is float-borderline.
fn theta_slope_rad(phi0: f64, beta: f64, r: f64, release: f64) -> f64 {
    if r > release {
        0.0
    } else {
        2.0 * beta * r * phi0.signum() * std::f64::consts::PI / 180.0
    }
}

/// Radius below which the trajectory angle is no longer clamped (infinite if
/// the axon never clamps in range, zero if it is clamped everywhere).
fn release_radius(phi0: f64, beta: f64) -> f64 {
    let margin = THETA_CLAMP_DEG - phi0.abs();
    if margin <= 0.0 {
        0.0
    } else {
        (margin / beta).sqrt()
    }
}

fn march_axon(phi0: f64, params: &AxonParams, grid: &VisualFieldGrid) -> Axon {
    let um = grid.um_per_deg();
    let disc = (params.disc_x_deg * um, params.disc_y_deg * um);
    let point_at = |r: f64| -> (f64, f64) {
        let th = theta_deg(phi0, params.beta, r).to_radians();
        let (sin_t, cos_t) = th.sin_cos();
        (disc.0 + r * cos_t * um, disc.1 + r * sin_t * um)
    };

    // Radii from the periphery inward, spaced to approximate `step_deg` of
    // arclength per segment: ds/dr = sqrt(1 + (r·dθ/dr)²). While the angle is
    // clamped the march is purely radial; a step that would jump past the
    // release radius lands exactly on it instead, so no segment straddles the
    // boundary into the high-curvature zone.
    let release = release_radius(phi0, params.beta);
    let mut radii = vec![params.r_max];
    let mut r = params.r_max;
    while r > R_MIN_DEG {
        let slope = theta_slope_rad(phi0, params.beta, r, release);
        let ds_dr = (1.0 + (r * slope).powi(2)).sqrt();
        let mut next = r - params.step_deg / ds_dr;
        if r > release && next < release && release > R_MIN_DEG {
            next = release;
        }
        if next <= R_MIN_DEG {
            radii.push(R_MIN_DEG);
            break;
        }
        radii.push(next);
        r = next;
    }

    let mut vertices: Vec<(f64, f64)> = radii.iter().map(|&ri| point_at(ri)).collect();
    vertices.push(disc);

    let mut cum_um = Vec::with_capacity(vertices.len());
    cum_um.push(0.0);
    for w in vertices.windows(2) {
        let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        cum_um.push(cum_um.last().unwrap() + d);
    }

    let mut mid = Vec::with_capacity(vertices.len() - 1);
    let mut mid_cum = Vec::with_capacity(vertices.len() - 1);
    for i in 0..vertices.len() - 1 {
        let (a, b) = (vertices[i], vertices[i + 1]);
        mid.push(((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0));
        mid_cum.push((cum_um[i] + cum_um[i + 1]) / 2.0);
    }

    Axon { vertices, cum_um, mid, mid_cum }
}

pub fn build_axon_field(grid: &VisualFieldGrid, params: &AxonParams) -> Result<AxonField> {
    params.validate()?;
    let m = params.count;
    let mut axons = Vec::with_capacity(m);
    for k in 0..m {
        // Half-offset seeding keeps every φ₀ away from 0° and ±180° exactly.
        let phi0 = -180.0 + (k as f64 + 0.5) * 360.0 / m as f64;
        axons.push(march_axon(phi0, params, grid));
    }
    let assignment = assign_pixels(grid, &axons, params)?;
    Ok(AxonField { params: params.clone(), grid: grid.clone(), axons, assignment })
}

/// Nearest segment midpoint per pixel via a uniform bucket grid with an
/// expanding ring search. Ties on squared distance resolve to the smallest
/// (axon, segment) pair, making the assignment fully deterministic.
fn assign_pixels(grid: &VisualFieldGrid, axons: &[Axon], params: &AxonParams) -> Result<Vec<(u32, u32)>> {
    struct Candidate {
        d2: f64,
        axon: u32,
        seg: u32,
    }

    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    let mut extend = |p: (f64, f64)| {
        min_x = min_x.min(p.0);
        max_x = max_x.max(p.0);
        min_y = min_y.min(p.1);
        max_y = max_y.max(p.1);
    };
    for a in axons {
        for &p in &a.mid {
            extend(p);
        }
    }
    extend(grid.pixel_center_um(0, 0));
    extend(grid.pixel_center_um(grid.rows() - 1, grid.cols() - 1));

    let cell = (params.step_deg * grid.um_per_deg() * 8.0).max(1.0);
    let nx = (((max_x - min_x) / cell).floor() as usize + 1).max(1);
    let ny = (((max_y - min_y) / cell).floor() as usize + 1).max(1);
    let cell_of = |p: (f64, f64)| -> (usize, usize) {
        let cx = (((p.0 - min_x) / cell).floor() as isize).clamp(0, nx as isize - 1) as usize;
        let cy = (((p.1 - min_y) / cell).floor() as isize).clamp(0, ny as isize - 1) as usize;
        (cx, cy)
    };

    let mut buckets: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nx * ny];
    for (ai, a) in axons.iter().enumerate() {
        for (si, &p) in a.mid.iter().enumerate() {
            let (cx, cy) = cell_of(p);
            buckets[cy * nx + cx].push((ai as u32, si as u32));
        }
    }

    let better = |a: &Candidate, b: &Candidate| -> bool {
        a.d2 < b.d2 || (a.d2 == b.d2 && (a.axon, a.seg) < (b.axon, b.seg))
    };

    let mut assignment = Vec::with_capacity(grid.n_px());
    for row in 0..grid.rows() {
        for col in 0..grid.cols() {
            let p = grid.pixel_center_um(row, col);
            let (cx, cy) = cell_of(p);
            let mut best: Option<Candidate> = None;
            let max_ring = nx.max(ny);
            for ring in 0..=max_ring {
                if let Some(b) = &best {
                    // Any point in a cell `ring` rings away is at least
                    // (ring − 1) cells distant; stop once that exceeds best.
                    let lower = (ring as f64 - 1.0).max(0.0) * cell;
                    if lower * lower > b.d2 {
                        break;
                    }
                }
                let x_lo = cx as isize - ring as isize;
                let x_hi = cx as isize + ring as isize;
                let y_lo = cy as isize - ring as isize;
                let y_hi = cy as isize + ring as isize;
                for gy in y_lo..=y_hi {
                    if gy < 0 || gy >= ny as isize {
                        continue;
                    }
                    for gx in x_lo..=x_hi {
                        if gx < 0 || gx >= nx as isize {
                            continue;
                        }
                        // Only the ring boundary is new at this radius.
                        let on_ring = gx == x_lo || gx == x_hi || gy == y_lo || gy == y_hi;
                        if !on_ring {
                            continue;
                        }
                        for &(ai, si) in &buckets[gy as usize * nx + gx as usize] {
                            let m = axons[ai as usize].mid[si as usize];
                            let d2 = (p.0 - m.0).powi(2) + (p.1 - m.1).powi(2);
                            let cand = Candidate { d2, axon: ai, seg: si };
                            if best.as_ref().map_or(true, |b| better(&cand, b)) {
                                best = Some(cand);
                            }
                        }
                    }
                }
            }
            let b = best.ok_or_else(|| {
                Error::InvalidArgument(format!("pixel ({row},{col}) could not be assigned an axon segment"))
            })?;
            assignment.push((b.axon, b.seg));
        }
    }
    Ok(assignment)
}

impl AxonField {
    pub fn params(&self) -> &AxonParams {
        &self.params
    }

    pub fn grid(&self) -> &VisualFieldGrid {
        &self.grid
    }

    pub fn axon_count(&self) -> usize {
        self.axons.len()
    }

    pub fn axon(&self, idx: usize) -> &Axon {
        &self.axons[idx]
    }

    pub fn axons(&self) -> &[Axon] {
        &self.axons
    }

    /// (axon, segment) assigned to a row-major pixel index.
    pub fn assignment(&self, pixel: usize) -> (usize, usize) {
        let (a, s) = self.assignment[pixel];
        (a as usize, s as usize)
    }

    pub fn assignments(&self) -> &[(u32, u32)] {
        &self.assignment
    }

    pub fn total_segments(&self) -> usize {
        self.axons.iter().map(|a| a.mid.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> VisualFieldGrid {
        VisualFieldGrid::new(15, 21, 0.5).unwrap()
    }

    #[test]
    fn zero_bend_gives_straight_radial_axons() {
        let grid = small_grid();
        let params = AxonParams { count: 12, beta: 0.0, r_max: 30.0, ..Default::default() };
        let field = build_axon_field(&grid, &params).unwrap();
        let um = grid.um_per_deg();
        let disc = (params.disc_x_deg * um, params.disc_y_deg * um);
        for axon in field.axons() {
            // All vertices collinear with the disc center.
            let first = axon.vertices[0];
            let dir = (first.0 - disc.0, first.1 - disc.1);
            let norm = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
            for &v in &axon.vertices {
                let rel = (v.0 - disc.0, v.1 - disc.1);
                let cross = (dir.0 * rel.1 - dir.1 * rel.0) / norm;
                assert!(cross.abs() < 1e-6, "off-radial vertex: cross = {cross}");
            }
        }
    }

    #[test]
    fn arclength_is_strictly_increasing_and_ends_at_disc() {
        let grid = small_grid();
        let params = AxonParams { count: 40, ..Default::default() };
        let field = build_axon_field(&grid, &params).unwrap();
        let um = grid.um_per_deg();
        let disc = (params.disc_x_deg * um, params.disc_y_deg * um);
        for axon in field.axons() {
            for w in axon.cum_um.windows(2) {
                assert!(w[1] > w[0], "cumulative arclength not strictly increasing");
            }
            assert_eq!(*axon.vertices.last().unwrap(), disc);
            assert_eq!(axon.cum_um.len(), axon.vertices.len());
            assert_eq!(axon.mid.len(), axon.vertices.len() - 1);
        }
    }

    #[test]
    fn trajectories_never_cross_the_raphe() {
        let grid = small_grid();
        let params = AxonParams { count: 100, ..Default::default() };
        let field = build_axon_field(&grid, &params).unwrap();
        let um = grid.um_per_deg();
        let disc = (params.disc_x_deg * um, params.disc_y_deg * um);
        for (k, axon) in field.axons().iter().enumerate() {
            let phi0 = -180.0 + (k as f64 + 0.5) * 360.0 / params.count as f64;
            // Skip the terminal disc vertex (radius 0 has no angle).
            for &v in &axon.vertices[..axon.vertices.len() - 1] {
                let ang = (v.1 - disc.1).atan2(v.0 - disc.0);
                assert!(
                    ang.signum() == phi0.signum(),
                    "axon {k} (phi0 {phi0}) crossed the raphe: angle {ang}"
                );
            }
        }
    }

    #[test]
    fn every_pixel_gets_exactly_one_assignment() {
        let grid = small_grid();
        let field = build_axon_field(&grid, &AxonParams { count: 60, ..Default::default() }).unwrap();
        assert_eq!(field.assignments().len(), grid.n_px());
        for &(a, s) in field.assignments() {
            assert!((a as usize) < field.axon_count());
            assert!((s as usize) < field.axon(a as usize).mid.len());
        }
    }

    #[test]
    fn bucket_assignment_matches_brute_force() {
        let grid = small_grid();
        let field = build_axon_field(&grid, &AxonParams { count: 40, ..Default::default() }).unwrap();
        for row in 0..grid.rows() {
            for col in 0..grid.cols() {
                let p = grid.pixel_center_um(row, col);
                let mut best = (f64::INFINITY, u32::MAX, u32::MAX);
                for (ai, axon) in field.axons().iter().enumerate() {
                    for (si, m) in axon.mid.iter().enumerate() {
                        let d2 = (p.0 - m.0).powi(2) + (p.1 - m.1).powi(2);
                        let cand = (d2, ai as u32, si as u32);
                        if cand.0 < best.0 || (cand.0 == best.0 && (cand.1, cand.2) < (best.1, best.2)) {
                            best = cand;
                        }
                    }
                }
                let got = field.assignments()[row * grid.cols() + col];
                assert_eq!(got, (best.1, best.2), "pixel ({row},{col})");
            }
        }
    }

    #[test]
    fn segment_lengths_track_the_requested_step() {
        let grid = small_grid();
        let params = AxonParams { count: 16, ..Default::default() };
        let field = build_axon_field(&grid, &params).unwrap();
        let step_um = params.step_deg * grid.um_per_deg();
        for axon in field.axons() {
            // Interior segments (not the terminal hop to the disc center) are
            // chords of at most one arclength step. Two landings may fall
            // short of the step: the clamp-release boundary and the final
            // inner-radius clamp.
            let mut short = 0usize;
            for i in 0..axon.vertices.len() - 2 {
                let len = axon.cum_um[i + 1] - axon.cum_um[i];
                assert!(len <= step_um * 1.000001, "segment {i} length {len} vs step {step_um}");
                assert!(len > 0.0, "segment {i} degenerate");
                if len < step_um * 0.2 {
                    short += 1;
                }
            }
            assert!(short <= 2, "{short} undersized segments in one axon");
        }
    }

    #[test]
    fn rejects_degenerate_parameters() {
        let grid = small_grid();
        assert!(build_axon_field(&grid, &AxonParams { count: 0, ..Default::default() }).is_err());
        assert!(build_axon_field(&grid, &AxonParams { step_deg: 0.0, ..Default::default() }).is_err());
        assert!(build_axon_field(&grid, &AxonParams { r_max: 0.1, ..Default::default() }).is_err());
        assert!(build_axon_field(&grid, &AxonParams { beta: -0.5, ..Default::default() }).is_err());
    }
}
