use super::{ParamStore, Real};
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(lr: f64) -> Self {
        Self::with_moments(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_moments(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState { lr, beta1, beta2, eps, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update to every parameter. Gradients are left in place.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        if let Some((_, p)) = store.iter().find(|(_, p)| p.grad().is_none()) {
            return Err(Error::Contract(format!("parameter {} has no gradient", p.name)));
        }
        if self.m.is_empty() {
            self.m = store.iter().map(|(_, p)| vec![T::zero(); p.value().numel()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != store.len() {
            return Err(Error::Contract("optimizer bound to a different parameter set".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let c1 = T::of(1.0 - self.beta1.powi(t));
        let c2 = T::of(1.0 - self.beta2.powi(t));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));

        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for (k, id) in ids.into_iter().enumerate() {
            let p = store.get_mut(id);
            let grad = p.grad.take().expect("checked above");
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            let value = p.value_mut();
            for (((w, g), m), v) in value.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
                *m = b1 * *m + one_b1 * *g;
                *v = b2 * *v + one_b2 * *g * *g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.grad = Some(grad);
        }
        Ok(())
    }
}
