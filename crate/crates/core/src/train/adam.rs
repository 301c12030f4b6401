use crate::error::{Error, Result};
use crate::model::{Gradients, ParamBlockMut};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates, one vector per parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zero moments shaped like `block_lens`.
    pub fn new(block_lens: &[usize], lr: f64) -> Self {
        Self {
            m: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }

    /// One bias-corrected Adam update. Gradients are checked for finiteness
    /// before anything is modified.
    pub fn step(&mut self, params: &mut [ParamBlockMut<'_>], grads: &Gradients) -> Result<()> {
        if params.len() != self.m.len() || grads.blocks.len() != self.m.len() {
            return Err(Error::Shape {
                op: "adam_step",
                left: (params.len(), grads.blocks.len()),
                right: (self.m.len(), self.m.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(&grads.blocks).zip(&self.m) {
            if p.values.len() != g.len() || g.len() != m.len() {
                return Err(Error::Shape {
                    op: "adam_step",
                    left: (p.values.len(), g.len()),
                    right: (m.len(), m.len()),
                });
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence { block: p.name.clone() });
            }
        }

        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(&grads.blocks)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p.values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Convenience wrapper for [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [ParamBlockMut<'_>], grads: &Gradients) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(state: &mut AdamState, theta: &mut Vec<f64>, g: Vec<f64>) -> Result<()> {
        let mut blocks = vec![ParamBlockMut {
            name: "theta".into(),
            values: theta.as_mut_slice(),
        }];
        state.step(&mut blocks, &Gradients { blocks: vec![g] })
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = AdamState::new(&[3], 1e-3);
        let mut theta = vec![1.0, -2.0, 0.5];
        for _ in 0..10 {
            run(&mut s, &mut theta, vec![0.0; 3]).unwrap();
        }
        assert_eq!(theta, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_with_unit_gradient() {
        let mut s = AdamState::new(&[1], 1e-4);
        let mut theta = vec![0.0];
        run(&mut s, &mut theta, vec![1.0]).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-18, "{}", theta[0]);
        assert!((theta[0] + 9.99999e-5).abs() < 1e-10);
    }

    #[test]
    fn second_identical_step_is_bounded_by_lr() {
        let mut s = AdamState::new(&[1], 1e-4);
        let mut theta = vec![0.0];
        run(&mut s, &mut theta, vec![1.0]).unwrap();
        let before = theta[0];
        run(&mut s, &mut theta, vec![1.0]).unwrap();
        let step = (theta[0] - before).abs();
        // t=2: m_hat = v_hat = 1 again, so the step is exactly lr/(1+eps).
        assert!(step <= 1e-4 * (1.0 + 1e-12), "{step}");
        assert!(step > 0.99e-4);
    }

    #[test]
    fn step_magnitude_bounded_for_random_gradients() {
        let mut rng = crate::numcore::Rng::new(4);
        let mut s = AdamState::new(&[5], 1e-3);
        let mut theta = vec![0.0; 5];
        for _ in 0..50 {
            let before = theta.clone();
            let g: Vec<f64> = (0..5).map(|_| rng.normal() * 10.0).collect();
            run(&mut s, &mut theta, g).unwrap();
            for (a, b) in theta.iter().zip(&before) {
                // With beta1^2 < beta2 the bias-corrected ratio stays within
                // (1 - beta1) / sqrt(1 - beta2) · sqrt(c2) / c1 of lr; at these
                // step counts a factor of 3 is ample.
                assert!((a - b).abs() <= 3e-3);
            }
        }
    }

    #[test]
    fn non_finite_gradient_names_block_and_leaves_params() {
        let mut s = AdamState::new(&[2], 1e-3);
        let mut theta = vec![1.0, 2.0];
        match run(&mut s, &mut theta, vec![0.1, f64::NAN]) {
            Err(Error::Divergence { block }) => assert_eq!(block, "theta"),
            other => panic!("{other:?}"),
        }
        assert_eq!(theta, vec![1.0, 2.0]);
        assert_eq!(s.t, 0);
    }
}
