use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plain SGD with momentum. No adaptive optimizers: gradient checks stay
/// exact and runs stay reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0,1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 10,
            batch_size: 64,
        }
    }
}

/// Velocity buffer, one entry per parameter.
#[derive(Debug, Clone, Default)]
pub struct MomentumBuffer(pub Vec<f64>);

impl MomentumBuffer {
    pub fn zeros(len: usize) -> Self {
        MomentumBuffer(vec![0.0; len])
    }
}

/// One update: `v <- momentum * v + g; params <- params - lr * v`.
pub fn sgd_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut MomentumBuffer,
    cfg: &SgdConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.0.len() {
        return Err(Error::DimensionMismatch {
            left: params.len(),
            right: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged { epoch: 0 });
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(state.0.iter_mut()) {
        *v = cfg.momentum * *v + g;
        *p -= cfg.learning_rate * *v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, momentum: f64) -> SgdConfig {
        SgdConfig {
            learning_rate: lr,
            momentum,
            epochs: 1,
            batch_size: 1,
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut m = MomentumBuffer::zeros(3);
        sgd_step(&mut p, &[0.0; 3], &mut m, &cfg(0.5, 0.9)).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn vanilla_step_subtracts_gradient() {
        let mut p = vec![1.0, 1.0];
        let mut m = MomentumBuffer::zeros(2);
        sgd_step(&mut p, &[0.25, -0.5], &mut m, &cfg(1.0, 0.0)).unwrap();
        assert_eq!(p, vec![0.75, 1.5]);
    }

    #[test]
    fn two_momentum_steps_match_unrolled_recurrence() {
        // v1 = g, v2 = 0.9 g + g = 1.9 g, so p = p0 - lr*g*(1 + 1.9).
        let g = vec![2.0];
        let mut p = vec![10.0];
        let mut m = MomentumBuffer::zeros(1);
        let c = cfg(0.1, 0.9);
        sgd_step(&mut p, &g, &mut m, &c).unwrap();
        sgd_step(&mut p, &g, &mut m, &c).unwrap();
        assert!((p[0] - (10.0 - 0.1 * 2.0 * (1.0 + 1.9))).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradients_are_divergence() {
        let mut p = vec![0.0];
        let mut m = MomentumBuffer::zeros(1);
        assert!(matches!(
            sgd_step(&mut p, &[f64::NAN], &mut m, &cfg(0.1, 0.0)),
            Err(Error::Diverged { .. })
        ));
    }
}
