//! Adam with bias correction and additive L2 on the gradient.

use super::params::{ParamId, ParamStore};
use super::TensorError;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Coefficient of the `l2 * value` term added to each gradient before
    /// the moment update. Parameters flagged `l2_exempt` skip it.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l2: 0.0,
        }
    }
}

struct Slot {
    id: ParamId,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

/// Optimizer state over an explicit parameter subset. Parameters outside the
/// subset are never touched, which is how the frozen graph encoders stay
/// frozen during the second training stage.
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    slots: Vec<Slot>,
}

impl AdamState {
    pub fn new(config: AdamConfig, ids: impl IntoIterator<Item = ParamId>, store: &ParamStore) -> Self {
        let slots = ids
            .into_iter()
            .map(|id| {
                let n = store.value(id).len();
                Slot {
                    id,
                    first_moment: vec![0.0; n],
                    second_moment: vec![0.0; n],
                }
            })
            .collect();
        Self {
            config,
            step: 0,
            slots,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all managed parameters; zeroes their gradients after.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), TensorError> {
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for slot in &mut self.slots {
            let param = store.get(slot.id);
            if param.grad.is_none() {
                return Err(TensorError::MissingGrad {
                    name: param.name.clone(),
                });
            }
            let l2 = if param.l2_exempt { 0.0 } else { c.l2 };
            let grad: Vec<f64> = param
                .grad
                .as_ref()
                .expect("checked above")
                .data()
                .iter()
                .zip(param.value.data())
                .map(|(&g, &v)| g + l2 * v)
                .collect();
            for (i, g) in grad.iter().enumerate() {
                slot.first_moment[i] = c.beta1 * slot.first_moment[i] + (1.0 - c.beta1) * g;
                slot.second_moment[i] = c.beta2 * slot.second_moment[i] + (1.0 - c.beta2) * g * g;
            }
            let value = store.value_mut(slot.id).data_mut();
            for i in 0..value.len() {
                let m_hat = slot.first_moment[i] / bias1;
                let v_hat = slot.second_moment[i] / bias2;
                value[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        for slot in &self.slots {
            store.zero_grad(slot.id);
        }
        Ok(())
    }
}
