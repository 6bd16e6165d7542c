use crate::error::{Error, Result};

/// Number of electrodes in the implant (6x10 grid).
pub const N_ELECTRODES: usize = 60;

/// Maximum stimulation amplitude in μA; also the encoder output ceiling.
pub const A_MAX: f64 = 10.0;

/// One stimulation pattern: 60 per-electrode current amplitudes in μA.
#[derive(Clone, Debug, PartialEq)]
pub struct Stimulus {
    amps: Vec<f64>,
}

impl Stimulus {
    pub fn new(amps: Vec<f64>) -> Result<Self> {
        if amps.len() != N_ELECTRODES {
            return Err(Error::InvalidArgument(format!(
                "stimulus must have {N_ELECTRODES} amplitudes, got {}",
                amps.len()
            )));
        }
        for (i, &a) in amps.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "amplitude {i} must be finite and nonnegative, got {a}"
                )));
            }
        }
        Ok(Stimulus { amps })
    }

    pub fn zeros() -> Self {
        Stimulus { amps: vec![0.0; N_ELECTRODES] }
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn active_count(&self) -> usize {
        self.amps.iter().filter(|&&a| a > 0.0).count()
    }

    /// Elementwise scaling by a nonnegative factor.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidArgument(format!("scale factor must be nonnegative, got {c}")));
        }
        Stimulus::new(self.amps.iter().map(|&a| a * c).collect())
    }

    /// Parse the single-line CSV interchange format (60 comma-separated
    /// floats).
    pub fn from_csv_line(line: &str) -> Result<Self> {
        let values: std::result::Result<Vec<f64>, _> =
            line.trim().split(',').map(|tok| tok.trim().parse::<f64>()).collect();
        let values = values.map_err(|e| Error::Format(format!("stimulus CSV: {e}")))?;
        Stimulus::new(values)
    }

    pub fn to_csv_line(&self) -> String {
        self.amps.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    }
}
