use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::training::config::AdamConfig;

/// Adam with bias correction; one moment pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, shapes: &[Vec<usize>]) -> Self {
        Self {
            config,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. `names` label parameters in error messages. On
    /// error nothing is modified.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], names: &[String], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            let name = names.get(i).map_or("?", String::as_str);
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::shape(format!(
                    "parameter '{name}' has shape {:?} but gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::numeric(format!("non-finite gradient for parameter '{name}'")));
            }
        }

        self.steps += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        let t = self.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let iter = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((w, &g), (m, v)) in iter {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn first_step_magnitude() {
        let mut w = Tensor::scalar(0.0);
        let mut opt = Adam::new(AdamConfig::default(), &[vec![]]);
        opt.step(&mut [&mut w], &[Tensor::scalar(1.0)], &names(1), 5e-4).unwrap();
        // lr * 1 / (1 + 1e-7)
        let expect = 5e-4 / (1.0 + 1e-7);
        assert!((w.item() + expect).abs() < 1e-18);
        assert!((w.item() + 4.99999950e-4).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut w = Tensor::vector(vec![1.0, -2.0]);
        let mut opt = Adam::new(AdamConfig::default(), &[vec![2]]);
        opt.step(&mut [&mut w], &[Tensor::zeros(&[2])], &names(1), 5e-4).unwrap();
        assert_eq!(w.data(), &[1.0, -2.0]);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut w = Tensor::vector(vec![1.0]);
        let mut opt = Adam::new(AdamConfig::default(), &[vec![1]]);
        let err = opt
            .step(&mut [&mut w], &[Tensor::vector(vec![f64::NAN])], &["dense_2.bias".into()], 1e-3)
            .unwrap_err();
        assert!(err.to_string().contains("dense_2.bias"));
        assert_eq!(w.data(), &[1.0]);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn descends_a_convex_bowl_deterministically() {
        let run = || {
            let mut w = Tensor::vector(vec![3.0, -1.5]);
            let mut opt = Adam::new(AdamConfig::default(), &[vec![2]]);
            let mut losses = Vec::new();
            for _ in 0..200 {
                let g = w.map(|v| 2.0 * v);
                losses.push(w.data().iter().map(|v| v * v).sum::<f64>());
                opt.step(&mut [&mut w], &[g], &names(1), 1e-2).unwrap();
            }
            (w, losses)
        };
        let (a, losses) = run();
        let (b, _) = run();
        assert_eq!(a, b);
        assert!(losses[1] < losses[0]);
        assert!(losses.last().unwrap() < &losses[0]);
    }
}
