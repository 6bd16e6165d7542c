use serde::{Deserialize, Serialize};

use crate::electrodes::ElectrodeArray;
use crate::error::{Error, Result};

fn default_normalization() -> f64 {
    1.0
}

/// Per-subject phosphene model parameters and implant placement.
///
/// ρ controls phosphene size (Gaussian falloff perpendicular to axons, μm);
/// λ controls elongation along the axon (μm). `normalization` is a positive
/// brightness divisor, fit at dataset-generation time so percepts land
/// roughly in [0, 1]; it defaults to 1 for raw simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectModel {
    pub id: String,
    pub rho_um: f64,
    pub lambda_um: f64,
    pub center_x_um: f64,
    pub center_y_um: f64,
    pub rot_deg: f64,
    #[serde(default = "default_normalization")]
    pub normalization: f64,
}

impl SubjectModel {
    pub fn new(
        id: impl Into<String>,
        rho_um: f64,
        lambda_um: f64,
        center_x_um: f64,
        center_y_um: f64,
        rot_deg: f64,
    ) -> Result<Self> {
        let subject = SubjectModel {
            id: id.into(),
            rho_um,
            lambda_um,
            center_x_um,
            center_y_um,
            rot_deg,
            normalization: 1.0,
        };
        subject.validate()?;
        Ok(subject)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_um > 0.0) || !self.rho_um.is_finite() {
            return Err(Error::InvalidArgument(format!("subject {}: rho must be positive", self.id)));
        }
        if !(self.lambda_um > 0.0) || !self.lambda_um.is_finite() {
            return Err(Error::InvalidArgument(format!("subject {}: lambda must be positive", self.id)));
        }
        if !(self.normalization > 0.0) || !self.normalization.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "subject {}: normalization must be positive",
                self.id
            )));
        }
        if !self.center_x_um.is_finite() || !self.center_y_um.is_finite() || !self.rot_deg.is_finite() {
            return Err(Error::InvalidArgument(format!("subject {}: placement must be finite", self.id)));
        }
        Ok(())
    }

    /// The three built-in simulated subjects. S-51009 is the deliberately
    /// thin/elongated case (λ/ρ = 10).
    pub fn presets() -> Vec<SubjectModel> {
        vec![
            SubjectModel::new("S-12005", 300.0, 600.0, -500.0, -300.0, -30.0).unwrap(),
            SubjectModel::new("S-51009", 150.0, 1500.0, 0.0, 0.0, -45.0).unwrap(),
            SubjectModel::new("S-52001", 400.0, 400.0, 300.0, 200.0, -20.0).unwrap(),
        ]
    }

    pub fn preset(id: &str) -> Option<SubjectModel> {
        Self::presets().into_iter().find(|s| s.id == id)
    }

    /// The subject's implant, placed per the stored transform.
    pub fn array(&self) -> ElectrodeArray {
        ElectrodeArray::argus(self.center_x_um, self.center_y_um, self.rot_deg)
    }

    pub fn with_normalization(mut self, normalization: f64) -> Result<Self> {
        self.normalization = normalization;
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_distinct() {
        let presets = SubjectModel::presets();
        assert_eq!(presets.len(), 3);
        for s in &presets {
            s.validate().unwrap();
        }
        assert_eq!(presets[1].lambda_um / presets[1].rho_um, 10.0);
        assert!(SubjectModel::preset("S-12005").is_some());
        assert!(SubjectModel::preset("nope").is_none());
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(SubjectModel::new("x", 0.0, 600.0, 0.0, 0.0, 0.0).is_err());
        assert!(SubjectModel::new("x", 300.0, -1.0, 0.0, 0.0, 0.0).is_err());
        assert!(SubjectModel::new("x", 300.0, 600.0, f64::INFINITY, 0.0, 0.0).is_err());
        let s = SubjectModel::new("x", 300.0, 600.0, 0.0, 0.0, 0.0).unwrap();
        assert!(s.clone().with_normalization(0.0).is_err());
        assert!(s.with_normalization(2.5).is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let s = SubjectModel::preset("S-51009").unwrap().with_normalization(3.25).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: SubjectModel = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn normalization_defaults_to_one_when_absent() {
        let json = r#"{"id":"t","rho_um":100.0,"lambda_um":200.0,
                       "center_x_um":0.0,"center_y_um":0.0,"rot_deg":0.0}"#;
        let s: SubjectModel = serde_json::from_str(json).unwrap();
        assert_eq!(s.normalization, 1.0);
    }
}
