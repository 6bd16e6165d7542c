//! Reconstruction-error evaluation: push test targets through a trained
//! model, render the predicted stimulus with either the ground-truth
//! phosphene model or its surrogate, and score pixel-wise MSE.

use pse_autodiff::ParamStore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::VisualFieldGrid;
use crate::mnist::TargetSet;
use crate::models::{ApproxNet, ConvNet};
use crate::simulate::Simulator;
use crate::stim::Stimulus;

pub const MODEL_PSE: &str = "pse";
pub const MODEL_INVERSE: &str = "inverse";
pub const SIM_PSI: &str = "psi";
pub const SIM_PSI_HAT: &str = "psi-hat";

/// Which renderer scores the predicted stimuli.
pub enum SimChoice<'a> {
    /// Ground-truth axon-map model.
    Psi(&'a Simulator),
    /// Trained dense surrogate.
    PsiHat(&'a ParamStore<f32>, &'a ApproxNet),
}

impl SimChoice<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            SimChoice::Psi(_) => SIM_PSI,
            SimChoice::PsiHat(..) => SIM_PSI_HAT,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct EvalRecord {
    pub subject: String,
    pub model: String,
    pub simulator: String,
    pub per_sample_mse: Vec<f64>,
    pub mean_mse: f64,
    pub std_mse: f64,
}

impl EvalRecord {
    pub fn from_samples(subject: &str, model: &str, simulator: &str, per_sample: Vec<f64>) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::InvalidArgument("evaluation needs at least one sample".into()));
        }
        if let Some(bad) = per_sample.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidArgument(format!("invalid per-sample MSE {bad}")));
        }
        let (mean, std) = mean_std(&per_sample);
        Ok(EvalRecord {
            subject: subject.to_string(),
            model: model.to_string(),
            simulator: simulator.to_string(),
            per_sample_mse: per_sample,
            mean_mse: mean,
            std_mse: std,
        })
    }

    /// Recompute mean/std from the stored list and compare (consistency).
    pub fn validate(&self) -> Result<()> {
        let (mean, std) = mean_std(&self.per_sample_mse);
        if (mean - self.mean_mse).abs() > 1e-12 || (std - self.std_mse).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "record mean/std ({}, {}) disagree with the per-sample list ({mean}, {std})",
                self.mean_mse, self.std_mse
            )));
        }
        Ok(())
    }

    pub fn formatted(&self) -> String {
        format_mean_std(self.mean_mse, self.std_mse)
    }
}

/// Mean and sample standard deviation (n−1 denominator; 0 for one sample).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Round to `sig` significant digits and render minimally: plain decimal for
/// moderate exponents, exponential otherwise, trailing zeros trimmed.
pub fn format_sig(v: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", sig - 1, v);
    let (mant, exp) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        format!("{}e{exp}", trim(mant))
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

/// "mean ± std" with 4 and 2 significant digits respectively.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{} ± {}", format_sig(mean, 4), format_sig(std, 2))
}

fn frame_mse(pred: &[f64], target: &[f32]) -> f64 {
    let n = pred.len();
    let mut acc = 0.0f64;
    for (p, t) in pred.iter().zip(target) {
        let d = p - *t as f64;
        acc += d * d;
    }
    acc / n as f64
}

/// Score one model over a target set: target → predicted stimulus → rendered
/// percept → pixel-wise MSE against the target. Deterministic; sample order
/// is target order.
pub fn evaluate(
    subject: &str,
    model_name: &str,
    net: &ConvNet,
    store: &ParamStore<f32>,
    sim: &SimChoice,
    targets: &TargetSet,
    grid: &VisualFieldGrid,
) -> Result<EvalRecord> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("evaluation target set is empty".into()));
    }
    let mut per_sample = Vec::with_capacity(targets.len());
    for i in 0..targets.len() {
        let frame = targets.prepare(i, grid)?.into_data();
        let stim = net.predict(store, &frame)?;
        let percept: Vec<f64> = match sim {
            SimChoice::Psi(simulator) => {
                let amps: Vec<f64> = stim.iter().map(|&v| v.max(0.0) as f64).collect();
                simulator.simulate_f64(&Stimulus::new(amps)?)?
            }
            SimChoice::PsiHat(approx_store, approx) => {
                approx.predict(approx_store, &stim)?.iter().map(|&v| v as f64).collect()
            }
        };
        per_sample.push(frame_mse(&percept, &frame));
    }
    EvalRecord::from_samples(subject, model_name, sim.label(), per_sample)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_a_hand_computed_case() {
        let xs = [0.02, 0.03, 0.05, 0.01, 0.04];
        let (mean, std) = mean_std(&xs);
        // Brute force: mean 0.03; squared deviations sum = 1e-3; /4 → 2.5e-4.
        assert!((mean - 0.03).abs() < 1e-15);
        assert!((std - (2.5e-4f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_sample_has_zero_std() {
        let (mean, std) = mean_std(&[0.7]);
        assert_eq!((mean, std), (0.7, 0.0));
    }

    #[test]
    fn formatting_matches_the_reporting_style() {
        assert_eq!(format_mean_std(0.0317, 0.014), "0.0317 ± 0.014");
        assert_eq!(format_mean_std(0.0547, 0.021), "0.0547 ± 0.021");
        assert_eq!(format_sig(0.031716, 4), "0.03172");
        assert_eq!(format_sig(0.0311, 4), "0.0311");
        assert_eq!(format_sig(1.0, 4), "1");
        assert_eq!(format_sig(0.09999, 2), "0.1");
        assert_eq!(format_sig(12345.6, 4), "1.235e4");
        assert_eq!(format_sig(0.0000123, 2), "1.2e-5");
        assert_eq!(format_sig(0.0, 4), "0");
    }

    #[test]
    fn records_validate_their_own_statistics() {
        let rec = EvalRecord::from_samples("s", MODEL_PSE, SIM_PSI, vec![0.1, 0.2, 0.3]).unwrap();
        rec.validate().unwrap();
        let mut broken = rec;
        broken.mean_mse += 1e-6;
        assert!(broken.validate().is_err());
    }

    #[test]
    fn negative_or_nan_mse_is_rejected() {
        assert!(EvalRecord::from_samples("s", MODEL_PSE, SIM_PSI, vec![-0.1]).is_err());
        assert!(EvalRecord::from_samples("s", MODEL_PSE, SIM_PSI, vec![f64::NAN]).is_err());
        assert!(EvalRecord::from_samples("s", MODEL_PSE, SIM_PSI, vec![]).is_err());
    }
}
