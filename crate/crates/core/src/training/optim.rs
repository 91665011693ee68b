//! AdamW with decoupled weight decay and a reduce-on-plateau schedule.

use crate::error::{contract, Error, Result};
use crate::weights::{is_meta, WeightStore};

/// Adaptive moment estimation with decoupled weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, store: &WeightStore) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) || !(weight_decay >= 0.0) {
            return Err(Error::Params(format!("bad optimizer settings lr={lr} wd={weight_decay}")));
        }
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        Ok(Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, m: zeros.clone(), v: zeros, step: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments_finite(&self) -> bool {
        self.m.iter().chain(&self.v).flatten().all(|x| x.is_finite())
    }

    /// One update of every non-meta parameter.
    pub fn step(&mut self, store: &mut WeightStore, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != store.len() || grads.len() != self.m.len() {
            return Err(contract(format!("{} gradient buffers for {} parameters", grads.len(), store.len())));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, (name, p)) in store.iter_mut().enumerate() {
            if is_meta(name) {
                continue;
            }
            let g = &grads[i];
            if g.len() != p.values.len() {
                return Err(contract(format!(
                    "gradient of `{name}` has {} values, expected {}",
                    g.len(),
                    p.values.len()
                )));
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, w) in p.values.iter_mut().enumerate() {
                let mut x = *w as f64;
                x -= self.lr * self.weight_decay * x;
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                x -= self.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
                *w = x as f32;
            }
        }
        Ok(())
    }
}

/// Multiplies the learning rates by `factor` once `patience` consecutive epochs
/// fail to improve the best validation score by more than `threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    best: f64,
    bad_epochs: usize,
    scale: f64,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize, threshold: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) || patience == 0 || !(threshold >= 0.0) {
            return Err(Error::Params(format!("bad plateau settings factor={factor} patience={patience}")));
        }
        Ok(Self { factor, patience, threshold, best: f64::INFINITY, bad_epochs: 0, scale: 1.0 })
    }

    /// Current multiplier on the base learning rates.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Record one epoch's validation score; true when the rates were just reduced.
    pub fn observe(&mut self, val: f64) -> bool {
        if val < self.best - self.threshold {
            self.best = val;
            self.bad_epochs = 0;
            return false;
        }
        self.best = self.best.min(val);
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.scale *= self.factor;
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::ParamTensor;

    fn store() -> WeightStore {
        let mut s = WeightStore::new();
        s.insert("a", ParamTensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap());
        s.set_meta("k", 7.0);
        s
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut s = store();
        let before = s.clone();
        let mut opt = AdamW::new(1e-2, 0.0, &s).unwrap();
        let zeros: Vec<Vec<f64>> = s.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        for _ in 0..5 {
            opt.step(&mut s, &zeros).unwrap();
        }
        assert_eq!(s, before);
        assert_eq!(opt.steps(), 5);
    }

    #[test]
    fn first_step_moves_by_lr_and_skips_meta() {
        let mut s = store();
        let mut opt = AdamW::new(0.1, 0.0, &s).unwrap();
        opt.step(&mut s, &[vec![3.0, -0.2, 0.0], vec![100.0]]).unwrap();
        let a = &s.get("a").unwrap().values;
        assert!((a[0] - 0.4).abs() < 1e-6 && (a[1] + 0.9).abs() < 1e-6 && a[2] == 2.0);
        assert_eq!(s.meta("k").unwrap(), 7.0);
        assert!(opt.moments_finite());
    }

    #[test]
    fn decay_is_decoupled() {
        let mut s = store();
        let mut opt = AdamW::new(0.1, 0.5, &s).unwrap();
        let zeros: Vec<Vec<f64>> = s.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        opt.step(&mut s, &zeros).unwrap();
        assert!((s.get("a").unwrap().values[2] - 1.9).abs() < 1e-6);
    }

    #[test]
    fn plateau_halves_after_three_flat_epochs() {
        let mut p = PlateauScheduler::new(0.5, 3, 1e-4).unwrap();
        let reduced: Vec<usize> = (1..=12).filter(|_| p.observe(5.0)).collect();
        assert_eq!(reduced, vec![4, 7, 10]);
        assert_eq!(p.scale(), 0.125);
        assert!(PlateauScheduler::new(1.0, 3, 0.0).is_err());
    }
}
