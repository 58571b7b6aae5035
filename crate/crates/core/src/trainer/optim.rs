use ndarray::Zip;

use super::params::{lit, Scalar, TowerParams, LOG_TEMPERATURE};
use super::TrainError;

/// Linear warmup to `peak` over `warmup` steps, then cosine decay to zero at
/// `total`.
pub fn lr_at(step: usize, peak: f64, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        return peak * step as f64 / warmup as f64;
    }
    if total <= warmup {
        return peak;
    }
    let progress = (step.min(total) - warmup) as f64 / (total - warmup) as f64;
    peak * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// AdamW with bias-corrected moments and decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW<F> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: TowerParams<F>,
    second: TowerParams<F>,
    steps: i32,
}

impl<F: Scalar> AdamW<F> {
    pub fn new(params: &TowerParams<F>) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: params.zeros_like(),
            second: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps as usize
    }

    /// One update. The log temperature is not decayed and is clamped
    /// afterwards.
    pub fn step(&mut self, params: &mut TowerParams<F>, grads: &TowerParams<F>, lr: f64, weight_decay: f64) -> Result<(), TrainError> {
        if let Some((name, _)) = grads.tensors().into_iter().find(|(_, g)| g.iter().any(|x| !x.is_finite())) {
            return Err(TrainError::NonFiniteGradient(name.to_string()));
        }
        self.steps += 1;
        let (b1, b2) = (lit::<F>(self.beta1), lit::<F>(self.beta2));
        let one = F::one();
        let c1 = one - b1.powi(self.steps);
        let c2 = one - b2.powi(self.steps);
        let lr_f = lit::<F>(lr);
        let eps = lit::<F>(self.eps);

        let g = grads.tensors();
        let m = self.first.tensors_mut();
        let v = self.second.tensors_mut();
        for (((name, mut p), (_, g)), ((_, mut m), (_, mut v))) in params.tensors_mut().into_iter().zip(g).zip(m.into_iter().zip(v)) {
            let decay = if name == LOG_TEMPERATURE { F::zero() } else { lr_f * lit::<F>(weight_decay) };
            Zip::from(&mut p).and(&g).and(&mut m).and(&mut v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p = *p - decay * *p;
                *p = *p - lr_f * m_hat / (v_hat.sqrt() + eps);
            });
        }
        params.clamp_temperature();
        if let Some((name, _)) = params.tensors().into_iter().find(|(_, t)| t.iter().any(|x| !x.is_finite())) {
            return Err(TrainError::NonFiniteGradient(format!("{name} became non-finite")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::ModelConfig;

    fn small() -> TowerParams<f64> {
        let config = ModelConfig {
            vocab_size: 4,
            d_t: 3,
            d: 2,
            d_img: 3,
            text_depth: 1,
            text_hidden: 2,
            image_depth: 1,
            image_hidden: 2,
        };
        TowerParams::init(&config, 0).unwrap()
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(lr_at(0, 3e-3, 2000, 10_000), 0.0);
        assert_eq!(lr_at(2000, 3e-3, 2000, 10_000), 3e-3);
        assert!(lr_at(10_000, 3e-3, 2000, 10_000).abs() < 1e-12);
        assert!((lr_at(1000, 3e-3, 2000, 10_000) - 1.5e-3).abs() < 1e-15);
        assert!((lr_at(6000, 3e-3, 2000, 10_000) - 1.5e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients() {
        let p0 = small();
        let grads = p0.zeros_like();
        let mut p = p0.clone();
        AdamW::new(&p).step(&mut p, &grads, 0.01, 0.0).unwrap();
        assert_eq!(p, p0);

        let mut p = p0.clone();
        AdamW::new(&p).step(&mut p, &grads, 0.01, 0.1).unwrap();
        for ((name, a), (_, b)) in p.tensors().into_iter().zip(p0.tensors()) {
            for (&x, &y) in a.iter().zip(b.iter()) {
                let want = if name == LOG_TEMPERATURE { y } else { y * (1.0 - 0.001) };
                assert!((x - want).abs() <= 1e-15 * y.abs().max(1.0), "{name}");
            }
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = small();
        p.text_embedding.fill(1.0);
        let mut grads = p.zeros_like();
        grads.text_embedding.fill(1.0);
        AdamW::new(&p).step(&mut p, &grads, 0.1, 0.0).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps).
        let oracle = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!(p.text_embedding.iter().all(|&x| (x - oracle).abs() < 1e-15));
        assert!((oracle - 0.9).abs() < 1e-8);
    }

    #[test]
    fn non_finite_gradient_and_clamp() {
        let mut p = small();
        let mut grads = p.zeros_like();
        grads.image_projection[[0, 0]] = f64::NAN;
        let err = AdamW::new(&p).step(&mut p, &grads, 0.1, 0.0).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteGradient(ref n) if n == "image.projection"));

        let mut grads = p.zeros_like();
        grads.log_temperature[0] = -1.0;
        p.log_temperature[0] = 4.6;
        let mut opt = AdamW::new(&p);
        for _ in 0..20 {
            opt.step(&mut p, &grads, 0.1, 0.1).unwrap();
            assert!(p.log_temperature().exp() <= 100.0 + 1e-9);
        }
    }
}
