use crate::params::ParamStore;
use crate::tensor::{Scalar, Tensor};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam optimizer with bias correction.
///
/// Moment buffers are allocated per parameter at construction; parameters
/// marked non-trainable are skipped entirely, so their values and moments
/// never change.
pub struct Adam<T> {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(store: &ParamStore<T>, cfg: AdamConfig) -> Self {
        let m = store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        let v = store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Adam { cfg, step: 0, m, v }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update from the gradients currently held in `store`.
    ///
    /// The caller is responsible for zeroing gradients between steps.
    pub fn step(&mut self, store: &mut ParamStore<T>) {
        self.step += 1;
        let t = self.step as i32;
        let lr = T::from_f64(self.cfg.lr);
        let b1 = T::from_f64(self.cfg.beta1);
        let b2 = T::from_f64(self.cfg.beta2);
        let eps = T::from_f64(self.cfg.eps);
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);

        for (i, (m, v)) in self.m.iter_mut().zip(&mut self.v).enumerate() {
            let p = store.param_mut(crate::params::ParamId(i));
            if !p.trainable {
                continue;
            }
            let grads = p.grad.data();
            let values = p.value.data();
            let mut next: Vec<T> = Vec::with_capacity(values.len());
            for (((&g, &x), m_i), v_i) in
                grads.iter().zip(values).zip(m.data_mut()).zip(v.data_mut())
            {
                *m_i = b1 * *m_i + (T::one() - b1) * g;
                *v_i = b2 * *v_i + (T::one() - b2) * g * g;
                let m_hat = *m_i / bc1;
                let v_hat = *v_i / bc2;
                next.push(x - lr * m_hat / (v_hat.sqrt() + eps));
            }
            p.value.data_mut().copy_from_slice(&next);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;

    #[test]
    fn zero_gradient_leaves_values_unchanged() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::from_vec(&[2], vec![1.5, -2.5]).unwrap(), true);
        let mut opt = Adam::new(&store, AdamConfig::default());
        opt.step(&mut store);
        opt.step(&mut store);
        assert_eq!(store.value(id).data(), &[1.5, -2.5]);
    }

    #[test]
    fn first_step_moves_by_about_lr_against_gradient_sign() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap(), true);
        store.param_mut(id).grad = Tensor::from_vec(&[2], vec![0.3, -40.0]).unwrap();
        let cfg = AdamConfig { lr: 1e-3, ..Default::default() };
        let mut opt = Adam::new(&store, cfg);
        opt.step(&mut store);
        let w = store.value(id).data();
        // m_hat = g, v_hat = g^2, so the update is -lr * g / (|g| + eps).
        assert!((w[0] + 1e-3).abs() < 1e-6, "got {}", w[0]);
        assert!((w[1] - 1e-3).abs() < 1e-6, "got {}", w[1]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn frozen_parameters_are_skipped() {
        let mut store = ParamStore::<f32>::new();
        let live = store.add("live", Tensor::from_vec(&[1], vec![1.0]).unwrap(), true);
        let frozen = store.add("frozen", Tensor::from_vec(&[1], vec![1.0]).unwrap(), false);
        store.param_mut(live).grad = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        store.param_mut(frozen).grad = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let frozen_bits = store.value(frozen).data()[0].to_bits();
        let mut opt = Adam::new(&store, AdamConfig::default());
        for _ in 0..5 {
            opt.step(&mut store);
        }
        assert_ne!(store.value(live).data()[0], 1.0);
        assert_eq!(store.value(frozen).data()[0].to_bits(), frozen_bits);
    }
}
