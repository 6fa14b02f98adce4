use crate::cells::{GradientSet, ModelParams};
use crate::error::{ensure, Result};

/// Adam optimiser state over the flattened parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Current learning rate; shrinks by `lr_decay_per_epoch` at each
    /// [`AdamState::end_epoch`].
    pub learning_rate: f64,
    pub lr_decay_per_epoch: f64,
}

impl AdamState {
    /// Zero moments, `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn new(n_params: usize, learning_rate: f64, lr_decay_per_epoch: f64) -> Self {
        Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
            lr_decay_per_epoch,
        }
    }

    pub fn end_epoch(&mut self) {
        self.learning_rate *= self.lr_decay_per_epoch;
    }

    /// One bias-corrected update of a flat parameter vector.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        ensure(
            params.len() == self.first_moment.len() && grads.len() == params.len(),
            || {
                format!(
                    "optimiser tracks {} parameters, got {} parameters and {} gradients",
                    self.first_moment.len(),
                    params.len(),
                    grads.len()
                )
            },
        )?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Applies one Adam step to a model.
pub fn adam_step(state: &mut AdamState, p: &mut ModelParams, grads: &GradientSet) -> Result<()> {
    let mut flat = p.to_flat();
    state.update(&mut flat, &grads.to_flat())?;
    p.assign_flat(&flat)
}
