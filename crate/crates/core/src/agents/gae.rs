/// One on-policy step for advantage estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaeStep {
    pub reward: f64,
    /// V(s_t)
    pub value: f64,
    /// V(s_{t+1}); the bootstrap value when the episode was truncated or the
    /// rollout ended mid-episode. Ignored when `terminal`.
    pub next_value: f64,
    /// Goal or violation.
    pub terminal: bool,
    /// Episode ended here for any reason; stops the advantage recursion.
    pub episode_end: bool,
}

/// Generalized advantage estimation. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn gae(steps: &[GaeStep], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut adv = vec![0.0; steps.len()];
    let mut running = 0.0;
    for (t, s) in steps.iter().enumerate().rev() {
        let live = if s.terminal { 0.0 } else { 1.0 };
        let delta = s.reward + gamma * live * s.next_value - s.value;
        let carry = if s.episode_end || s.terminal { 0.0 } else { 1.0 };
        running = delta + gamma * lambda * carry * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(steps).map(|(a, s)| a + s.value).collect();
    (adv, returns)
}
