use crate::error::{Error, Result};
use crate::stim::N_ELECTRODES;

pub const ARGUS_ROWS: usize = 6;
pub const ARGUS_COLS: usize = 10;
pub const ARGUS_PITCH_UM: f64 = 525.0;

/// Electrode positions on the retina, in μm.
///
/// `canonical_order` is the electrode indices sorted by position
/// (lexicographic on (x, y)). Simulators iterate electrodes in this order so
/// that relabeling electrodes together with their amplitudes produces
/// bit-identical frames: the summation order depends only on geometry.
#[derive(Clone, Debug)]
pub struct ElectrodeArray {
    positions: Vec<(f64, f64)>,
    canonical: Vec<usize>,
}

impl ElectrodeArray {
    /// The 6x10 implant grid: electrode (row i, col j) sits at
    /// ((j − 4.5)·525, (2.5 − i)·525) μm before rotation by `theta_deg`
    /// (counterclockwise) and translation by (x_c, y_c). Electrode index is
    /// row-major: i·10 + j, row 0 topmost pre-rotation.
    pub fn argus(x_c: f64, y_c: f64, theta_deg: f64) -> Self {
        let theta = theta_deg.to_radians();
        let (sin_t, cos_t) = theta.sin_cos();
        let mut positions = Vec::with_capacity(N_ELECTRODES);
        for i in 0..ARGUS_ROWS {
            for j in 0..ARGUS_COLS {
                let lx = (j as f64 - 4.5) * ARGUS_PITCH_UM;
                let ly = (2.5 - i as f64) * ARGUS_PITCH_UM;
                let x = lx * cos_t - ly * sin_t + x_c;
                let y = lx * sin_t + ly * cos_t + y_c;
                positions.push((x, y));
            }
        }
        Self::from_positions(positions).expect("grid positions are finite and distinct")
    }

    /// Arbitrary electrode layout; positions must be finite and pairwise
    /// distinct.
    pub fn from_positions(positions: Vec<(f64, f64)>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("electrode array must not be empty".into()));
        }
        for (i, &(x, y)) in positions.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidArgument(format!("electrode {i} position is not finite")));
            }
        }
        let mut canonical: Vec<usize> = (0..positions.len()).collect();
        canonical.sort_by(|&a, &b| {
            let (pa, pb) = (positions[a], positions[b]);
            pa.0.total_cmp(&pb.0).then(pa.1.total_cmp(&pb.1))
        });
        for w in canonical.windows(2) {
            if positions[w[0]] == positions[w[1]] {
                return Err(Error::InvalidArgument(format!(
                    "electrodes {} and {} share position {:?}",
                    w[0], w[1], positions[w[0]]
                )));
            }
        }
        Ok(ElectrodeArray { positions, canonical })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn position(&self, idx: usize) -> (f64, f64) {
        self.positions[idx]
    }

    /// Electrode indices sorted by position.
    pub fn canonical_order(&self) -> &[usize] {
        &self.canonical
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrotated_grid_matches_hand_positions() {
        let arr = ElectrodeArray::argus(0.0, 0.0, 0.0);
        assert_eq!(arr.len(), 60);
        assert_eq!(arr.position(0), (-2362.5, 1312.5));
        assert_eq!(arr.position(9), (2362.5, 1312.5));
        assert_eq!(arr.position(59), (2362.5, -1312.5));
        // Row-major indexing: electrode (2, 4).
        assert_eq!(arr.position(24), (-262.5, 262.5));
    }

    #[test]
    fn rigid_transform_preserves_pairwise_distances() {
        let base = ElectrodeArray::argus(0.0, 0.0, 0.0);
        let moved = ElectrodeArray::argus(-500.0, 300.0, 37.0);
        for i in 0..60 {
            for j in (i + 1)..60 {
                let d0 = dist(base.position(i), base.position(j));
                let d1 = dist(moved.position(i), moved.position(j));
                assert!((d0 - d1).abs() < 1e-9, "pair ({i},{j}): {d0} vs {d1}");
            }
        }
    }

    #[test]
    fn rotation_by_90_degrees() {
        let arr = ElectrodeArray::argus(0.0, 0.0, 90.0);
        let (x, y) = arr.position(0);
        // (-2362.5, 1312.5) rotated 90° CCW -> (-1312.5, -2362.5).
        assert!((x + 1312.5).abs() < 1e-9);
        assert!((y + 2362.5).abs() < 1e-9);
    }

    #[test]
    fn from_positions_rejects_duplicates_and_non_finite() {
        assert!(ElectrodeArray::from_positions(vec![]).is_err());
        assert!(ElectrodeArray::from_positions(vec![(0.0, 0.0), (0.0, 0.0)]).is_err());
        assert!(ElectrodeArray::from_positions(vec![(f64::NAN, 0.0)]).is_err());
        assert!(ElectrodeArray::from_positions(vec![(0.0, 0.0), (1.0, 0.0)]).is_ok());
    }

    #[test]
    fn canonical_order_is_position_sorted() {
        let arr = ElectrodeArray::from_positions(vec![(3.0, 0.0), (1.0, 5.0), (1.0, -2.0)]).unwrap();
        assert_eq!(arr.canonical_order(), &[2, 1, 0]);
    }

    fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    }
}
