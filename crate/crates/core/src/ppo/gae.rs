/// Generalized advantage estimation over one environment's rollout.
///
/// `bootstrap` is the value estimate of the state following the last step.
/// A `done` at step `t` cuts both the bootstrap and the recursion.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values length");
    assert_eq!(dones.len(), n, "dones length");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// [`gae`] over a time-major `(horizon, num_envs)` batch.
pub fn gae_batch(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: &[f64],
    num_envs: usize,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let horizon = n / num_envs;
    let mut adv = vec![0.0; n];
    let mut ret = vec![0.0; n];
    let mut r = Vec::with_capacity(horizon);
    let mut v = Vec::with_capacity(horizon);
    let mut d = Vec::with_capacity(horizon);
    for e in 0..num_envs {
        r.clear();
        v.clear();
        d.clear();
        for t in 0..horizon {
            let i = t * num_envs + e;
            r.push(rewards[i]);
            v.push(values[i]);
            d.push(dones[i]);
        }
        let (a, rt) = gae(&r, &v, &d, bootstrap[e], gamma, lambda);
        for t in 0..horizon {
            adv[t * num_envs + e] = a[t];
            ret[t * num_envs + e] = rt[t];
        }
    }
    (adv, ret)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rewards_and_values() {
        let (a, r) = gae(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0, 0.99, 0.95);
        assert!(a.iter().chain(r.iter()).all(|x| *x == 0.0));
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let rewards = [1.0, -0.5, 2.0, 0.3];
        let values = [0.2, 0.4, -0.1, 0.7];
        let dones = [false, true, false, false];
        let boot = 0.9;
        let g = 0.9;
        let (a, _) = gae(&rewards, &values, &dones, boot, g, 0.0);
        let next = [values[1], values[2], values[3], boot];
        for t in 0..4 {
            let live = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[t] + g * next[t] * live - values[t];
            assert_eq!(a[t], delta);
        }
    }

    #[test]
    fn three_step_hand_recursion() {
        // r = (1, 0, 2), v = (0.5, 0.2, 1.0), bootstrap 0.4, gamma 0.9, lambda 0.95
        // d2 = 2 + 0.9*0.4 - 1.0         = 1.36
        // d1 = 0 + 0.9*1.0 - 0.2         = 0.70
        // d0 = 1 + 0.9*0.2 - 0.5         = 0.68
        // A2 = 1.36
        // A1 = 0.70 + 0.855*1.36         = 1.8628
        // A0 = 0.68 + 0.855*1.8628       = 2.272694
        let (a, r) = gae(&[1.0, 0.0, 2.0], &[0.5, 0.2, 1.0], &[false; 3], 0.4, 0.9, 0.95);
        let expect = [2.272694, 1.8628, 1.36];
        for t in 0..3 {
            assert!((a[t] - expect[t]).abs() < 1e-12, "{a:?}");
        }
        assert!((r[0] - (2.272694 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_per_env() {
        let rewards = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let values = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let dones = [false, false, true, false, false, false];
        let (a, _) = gae_batch(&rewards, &values, &dones, &[0.7, 0.8], 2, 0.99, 0.9);
        let (a0, _) = gae(
            &[1.0, 3.0, 5.0],
            &[0.1, 0.3, 0.5],
            &[false, true, false],
            0.7,
            0.99,
            0.9,
        );
        let (a1, _) = gae(
            &[2.0, 4.0, 6.0],
            &[0.2, 0.4, 0.6],
            &[false, false, false],
            0.8,
            0.99,
            0.9,
        );
        assert_eq!(vec![a[0], a[2], a[4]], a0);
        assert_eq!(vec![a[1], a[3], a[5]], a1);
    }
}
