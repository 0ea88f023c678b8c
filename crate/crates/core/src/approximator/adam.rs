pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, lr: f64) {
    assert_eq!(
        params.len(),
        grad.len(),
        "adam: parameter/gradient length mismatch"
    );
    assert_eq!(params.len(), state.m.len(), "adam: state length mismatch");
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for k in 0..params.len() {
        let g = grad[k];
        let m = ADAM_BETA1 * state.m[k] + (1.0 - ADAM_BETA1) * g;
        let v = ADAM_BETA2 * state.v[k] + (1.0 - ADAM_BETA2) * g * g;
        state.m[k] = m;
        state.v[k] = v;
        params[k] -= lr * (m / c1) / ((v / c2).sqrt() + ADAM_EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_from_fresh_state_keeps_params() {
        let mut p = vec![0.5, -1.0, 2.0];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 1e-3);
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[1.0, -2.0], &mut s, 1e-3);
        let (m, v) = (s.m.clone(), s.v.clone());
        adam_step(&mut p, &[0.0, 0.0], &mut s, 1e-3);
        for k in 0..2 {
            assert_eq!(s.m[k], ADAM_BETA1 * m[k]);
            assert_eq!(s.v[k], ADAM_BETA2 * v[k]);
        }
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![0.0; 4];
        let mut s = AdamState::new(4);
        adam_step(&mut p, &[3.0, -0.02, 1e-3, -50.0], &mut s, 1e-3);
        for (x, sign) in p.iter().zip([-1.0, 1.0, -1.0, 1.0]) {
            assert!((x - sign * 1e-3).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.3, 0.1];
            let mut s = AdamState::new(2);
            adam_step(&mut p, &[0.7, -0.2], &mut s, 1e-3);
            (p, s)
        };
        assert_eq!(run(), run());
    }
}
