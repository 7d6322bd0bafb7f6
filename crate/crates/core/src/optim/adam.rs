use crate::error::{Error, Result};
use crate::layers::Parameterized;

/// Adam with bias correction. Moment buffers follow the parameter
/// visitation order of the model they were first used with.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update of every parameter from its accumulated gradient.
    ///
    /// A non-finite gradient anywhere aborts the step before any parameter changes.
    pub fn step<T: Parameterized + ?Sized>(&mut self, model: &mut T) -> Result<()> {
        let mut finite = true;
        let mut shapes = Vec::new();
        model.visit_params("", &mut |_, v, g| {
            finite &= g.iter().all(|x| x.is_finite());
            shapes.push(v.len());
        });
        if !finite {
            return Err(Error::NonFinite("gradient"));
        }
        if self.m.is_empty() {
            self.m = shapes.iter().map(|&n| vec![0.0; n]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != shapes.len() || self.m.iter().zip(&shapes).any(|(m, &n)| m.len() != n) {
            return Err(Error::shape("adam step", "optimizer state does not match model parameters"));
        }

        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let mut idx = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        model.visit_params("", &mut |_, params, grads| {
            let m = &mut ms[idx];
            let v = &mut vs[idx];
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A bare parameter vector for exercising the optimizer.
    struct Params {
        value: Vec<f64>,
        grad: Vec<f64>,
    }

    impl Parameterized for Params {
        fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64])) {
            f(prefix, &mut self.value, &mut self.grad);
        }
        fn visit_tensors(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
            f(prefix, &[self.value.len()], &self.value);
        }
        fn visit_tensors_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
            let n = self.value.len();
            f(prefix, &[n], &mut self.value);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Params { value: vec![1.5, -2.0], grad: vec![0.0, 0.0] };
        AdamState::default().step(&mut p).unwrap();
        assert_eq!(p.value, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + eps)
        for g in [3.0, -0.02, 1e-3] {
            let mut p = Params { value: vec![0.0], grad: vec![g] };
            let mut adam = AdamState::default();
            adam.step(&mut p).unwrap();
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!((p.value[0] - expected).abs() < 1e-15);
            assert!((p.value[0].abs() - 1e-3).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut p = Params { value: vec![1.0, 1.0], grad: vec![0.5, f64::NAN] };
        let mut adam = AdamState::default();
        assert!(matches!(adam.step(&mut p), Err(Error::NonFinite(_))));
        assert_eq!(p.value, vec![1.0, 1.0]);
        assert_eq!(adam.t, 0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = Params { value: vec![0.3, -0.7, 2.0], grad: vec![0.0; 3] };
            let mut adam = AdamState::default();
            let mut trace = Vec::new();
            for step in 0..10 {
                // gradient of ½‖x − c‖² with a step-dependent target
                let c = step as f64 * 0.1;
                p.grad = p.value.iter().map(|x| x - c).collect();
                adam.step(&mut p).unwrap();
                trace.extend(p.value.iter().map(|v| v.to_bits()));
            }
            trace
        };
        assert_eq!(run(), run());
    }
}
