use serde::{Deserialize, Serialize};

use super::{DenseMatrix, NumericsError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment accumulators for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[DenseMatrix]) -> Self {
        let zeros: Vec<DenseMatrix> = params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect();
        Self { config, step: 0, first: zeros.clone(), second: zeros }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    /// One bias-corrected Adam update applied in place.
    pub fn step(&mut self, params: &mut [DenseMatrix], grads: &[DenseMatrix]) -> Result<(), NumericsError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(NumericsError::Shape(format!(
                "adam: {} params, {} grads, {} accumulators",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(NumericsError::Shape(format!(
                    "adam tensor {i}: param {:?}, grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (((w, &g), m), v) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![DenseMatrix::filled(2, 2, 0.7)];
        let before = params.clone();
        let mut st = AdamState::new(AdamConfig::default(), &params);
        st.step(&mut params, &[DenseMatrix::zeros(2, 2)]).unwrap();
        assert_eq!(params, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let lr = 0.01;
        for g in [-3.0, 0.5, 1e-3] {
            let mut params = vec![DenseMatrix::zeros(1, 3)];
            let mut st = AdamState::new(AdamConfig::with_lr(lr), &params);
            st.step(&mut params, &[DenseMatrix::filled(1, 3, g)]).unwrap();
            for &w in params[0].as_slice() {
                // lr * |g| / (|g| + eps)
                let expected = -lr * g / (g.abs() + 1e-8);
                assert!((w - expected).abs() < 1e-15, "g={g}: {w} vs {expected}");
                assert!((w.abs() - lr).abs() < lr * 1e-4);
            }
        }
    }

    #[test]
    fn quadratic_trajectory_matches_scalar_reference() {
        // reference: textbook scalar Adam on f(w) = w², f'(w) = 2w
        let (lr, b1, b2, eps) = (0.1f64, 0.9f64, 0.999f64, 1e-8f64);
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut reference = Vec::new();
        for t in 1..=10 {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
            reference.push(w);
        }
        let mut params = vec![DenseMatrix::filled(1, 1, 1.0)];
        let mut st = AdamState::new(AdamConfig::with_lr(lr), &params);
        for expected in reference {
            let g = DenseMatrix::filled(1, 1, 2.0 * params[0].get(0, 0));
            st.step(&mut params, &[g]).unwrap();
            assert!((params[0].get(0, 0) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = vec![DenseMatrix::zeros(2, 2)];
        let mut st = AdamState::new(AdamConfig::default(), &params);
        assert!(st.step(&mut params, &[DenseMatrix::zeros(1, 2)]).is_err());
    }
}
