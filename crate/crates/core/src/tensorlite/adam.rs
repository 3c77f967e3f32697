use crate::error::{check_dim, Error, Result};

/// Adam optimizer state for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub(crate) fn from_parts(
        lr: f64,
        betas: (f64, f64),
        eps: f64,
        step: u64,
        m: Vec<f64>,
        v: Vec<f64>,
    ) -> Self {
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            step,
            m,
            v,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    /// One bias-corrected Adam update of `params` along `-grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_dim("adam parameters", self.m.len(), params.len())?;
        check_dim("adam gradients", self.m.len(), grads.len())?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let step_size = self.lr / bc1;
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            params[i] -= step_size * self.m[i] / ((self.v[i] / bc2).sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Exponential moving average: `target <- (1 - tau) * target + tau * online`.
pub fn ema_update(target: &mut [f64], online: &[f64], tau: f64) -> Result<()> {
    check_dim("ema parameters", target.len(), online.len())?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "ema coefficient {tau} outside (0, 1]"
        )));
    }
    if tau == 1.0 {
        target.copy_from_slice(online);
        return Ok(());
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut opt = Adam::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[4.0, -0.3, 100.0]).unwrap();
        let expected = [1.0 - 1e-3, -2.0 + 1e-3, 0.5 - 1e-3];
        for (a, e) in p.iter().zip(expected) {
            assert!((a - e).abs() < 1e-9, "{a} vs {e}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut opt = Adam::new(2, 0.1);
        let mut p = vec![0.7, -0.1];
        opt.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.7, -0.1]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn minimizes_a_parabola() {
        let mut opt = Adam::new(1, 0.1);
        let mut x = vec![1.0];
        for _ in 0..200 {
            let g = 2.0 * x[0];
            opt.step(&mut x, &[g]).unwrap();
        }
        assert!(x[0].abs() < 0.05, "x = {}", x[0]);
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut opt = Adam::new(1, 0.1);
        let mut x = vec![1.0];
        assert!(matches!(
            opt.step(&mut x, &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn ema_cases() {
        let mut t = vec![0.0, 2.0];
        ema_update(&mut t, &[1.0, 5.0], 1.0).unwrap();
        assert_eq!(t, vec![1.0, 5.0]);

        let mut t = vec![0.0];
        ema_update(&mut t, &[1.0], 5e-3).unwrap();
        assert!((t[0] - 0.005).abs() < 1e-15);

        let mut t = vec![0.0];
        let mut prev_gap = 1.0;
        for _ in 0..2000 {
            ema_update(&mut t, &[1.0], 5e-3).unwrap();
            let gap = 1.0 - t[0];
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!((prev_gap - 0.995f64.powi(2000)).abs() < 1e-9);
        assert!(ema_update(&mut t, &[1.0], 0.0).is_err());
    }
}
