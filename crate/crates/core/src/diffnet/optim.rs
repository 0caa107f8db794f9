use crate::error::{Error, Result};

fn check_grad(params: &[f64], grad: &[f64]) -> Result<()> {
    if params.len() != grad.len() {
        return Err(Error::Config(format!(
            "gradient length {} does not match params {}",
            grad.len(),
            params.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training("non-finite gradient".into()));
    }
    Ok(())
}

/// Plain gradient descent.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Sgd { lr }
    }

    pub fn step(&self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_grad(params, grad)?;
        for (p, g) in params.iter_mut().zip(grad) {
            *p -= self.lr * g;
        }
        Ok(())
    }
}

/// Adam with bias correction; moment state lives in the optimizer.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_grad(params, grad)?;
        if params.len() != self.m.len() {
            return Err(Error::Config("adam state does not match params".into()));
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_leaves_params() {
        let mut p = vec![1.0, -2.0];
        Sgd::new(0.1).step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        let mut adam = Adam::new(0.1, 2);
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = vec![1.0];
        Sgd::new(0.1).step(&mut p, &[2.0]).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_lr_magnitude() {
        // Hand-computed first iteration: m_hat = g, v_hat = g^2, so the step
        // is lr * g / (|g| + eps) ~ lr * sign(g).
        let mut p = vec![0.0, 0.0];
        let mut adam = Adam::new(0.01, 2);
        adam.step(&mut p, &[3.0, -0.5]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-6, "got {}", p[0]);
        assert!((p[1] - 0.01).abs() < 1e-6, "got {}", p[1]);
    }

    #[test]
    fn nan_grad_is_a_training_error() {
        let mut p = vec![0.0];
        let err = Sgd::new(0.1).step(&mut p, &[f64::NAN]);
        assert!(matches!(err, Err(Error::Training(_))));
        let mut adam = Adam::new(0.1, 1);
        assert!(matches!(adam.step(&mut p, &[f64::NAN]), Err(Error::Training(_))));
    }
}
