use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// First/second moment accumulators, lazily shaped on the first step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

/// One bias-corrected Adam update over a list of parameter tensors.
///
/// Nothing is modified when any gradient is non-finite.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dims(params.len(), grads.len(), "adam tensor count"));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(Error::dims(p.len(), g.len(), format!("adam tensor {i}")));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient tensor {i}")));
        }
    }
    if state.m.is_empty() {
        state.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        state.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
    } else if state.m.len() != grads.len() || state.m.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
        return Err(Error::InvalidArgument(
            "adam state shapes do not match parameters".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        for i in 0..g.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}

/// Adam optimizer: configuration plus its state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub state: AdamState,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            state: AdamState::default(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        adam_step(params, grads, &mut self.state, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_against_gradient_sign() {
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.3, -4.0, 1e-3];
        let mut st = AdamState::default();
        adam_step(
            &mut [p.as_mut_slice()],
            &[g.as_slice()],
            &mut st,
            &AdamConfig::with_lr(0.01),
        )
        .unwrap();
        // bias correction makes the first step exactly lr * sign(g) (up to eps)
        assert!((p[0] - 0.99).abs() < 1e-6);
        assert!((p[1] - (-1.99)).abs() < 1e-6);
        assert!(p[2] < 0.5);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![1.0, 2.0];
        let g = vec![0.0, 0.0];
        let mut st = AdamState::default();
        adam_step(
            &mut [p.as_mut_slice()],
            &[g.as_slice()],
            &mut st,
            &AdamConfig::default(),
        )
        .unwrap();
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = vec![1.0, 2.0];
        let mut st = AdamState::default();
        for _ in 0..5 {
            adam_step(
                &mut [p.as_mut_slice()],
                &[&[0.5, -3.0]],
                &mut st,
                &AdamConfig::with_lr(0.0),
            )
            .unwrap();
        }
        assert_eq!(p, vec![1.0, 2.0]);
    }

    #[test]
    fn deterministic_from_same_state() {
        let mut st = AdamState::default();
        let mut p0 = vec![0.1, 0.2];
        adam_step(
            &mut [p0.as_mut_slice()],
            &[&[1.0, -1.0]],
            &mut st,
            &AdamConfig::default(),
        )
        .unwrap();
        let (mut a, mut b) = (p0.clone(), p0.clone());
        let (mut sa, mut sb) = (st.clone(), st.clone());
        adam_step(&mut [a.as_mut_slice()], &[&[0.2, 0.7]], &mut sa, &AdamConfig::default()).unwrap();
        adam_step(&mut [b.as_mut_slice()], &[&[0.2, 0.7]], &mut sb, &AdamConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut p = vec![1.0];
        let mut st = AdamState::default();
        let err = adam_step(&mut [p.as_mut_slice()], &[&[f64::NAN]], &mut st, &AdamConfig::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(p, vec![1.0]);
        assert_eq!(st.step, 0);
    }
}
