//! Generalized advantage estimation over one ordered stream of
//! transitions.

/// Computes advantages and value targets for one trajectory stream.
///
/// `values` holds V(s_0..s_T) (one more than `rewards`); its last entry
/// bootstraps the tail. `dones[t]` cuts both the TD target and the
/// advantage recursion at environment boundaries:
///
///   delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
///
/// Returns (advantages, returns) with returns_t = A_t + V(s_t).
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t_max = rewards.len();
    assert_eq!(values.len(), t_max + 1, "values include the bootstrap");
    assert_eq!(dones.len(), t_max);

    let mut adv = vec![0.0; t_max];
    let mut ret = vec![0.0; t_max];
    let mut a_next = 0.0;
    for t in (0..t_max).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * not_done - values[t];
        a_next = delta + gamma * lambda * not_done * a_next;
        adv[t] = a_next;
        ret[t] = a_next + values[t];
    }
    (adv, ret)
}
