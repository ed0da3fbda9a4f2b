//! Training configuration, optimizer state, SGD with momentum, Adam, and step schedules.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{DType, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    /// Squared error against one-hot targets (or the 0/1 label for single-output nets).
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleUnit {
    Epoch,
    Iteration,
}

/// At `at` (epoch or iteration) and after, the learning rate is multiplied by `multiplier`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub at: u64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Augment {
    #[default]
    None,
    PadCropFlip {
        pad: usize,
    },
}

fn default_momentum() -> f64 {
    0.9
}
fn default_wd() -> f64 {
    0.0005
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_unit() -> ScheduleUnit {
    ScheduleUnit::Epoch
}
fn default_loss() -> LossKind {
    LossKind::CrossEntropy
}
fn default_dtype() -> DType {
    DType::F32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub schedule: Vec<SchedulePoint>,
    #[serde(default = "default_unit")]
    pub schedule_unit: ScheduleUnit,
    #[serde(default)]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub max_iterations: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dtype")]
    pub dtype: DType,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default)]
    pub augment: Augment,
    /// Rescale the whole gradient when its global norm exceeds this.
    #[serde(default)]
    pub clip_norm: Option<f64>,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl TrainConfig {
    pub fn sgd(lr: f64, batch_size: usize, epochs: u64) -> Self {
        Self {
            optimizer: OptimizerKind::SgdMomentum,
            lr,
            momentum: default_momentum(),
            weight_decay: default_wd(),
            batch_size,
            schedule: Vec::new(),
            schedule_unit: ScheduleUnit::Epoch,
            epochs: Some(epochs),
            max_iterations: None,
            seed: 0,
            dtype: DType::F32,
            loss: LossKind::CrossEntropy,
            augment: Augment::None,
            clip_norm: None,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn adam(lr: f64, batch_size: usize, epochs: u64) -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            ..Self::sgd(lr, batch_size, epochs)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::InvalidConfig(format!("train.{field}: {why}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive and finite");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", "must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", "must be non-negative");
        }
        if self.schedule.windows(2).any(|w| w[0].at >= w[1].at) {
            return bad("schedule", "points must be strictly increasing");
        }
        if self.schedule.iter().any(|p| !(p.multiplier > 0.0 && p.multiplier.is_finite())) {
            return bad("schedule", "multipliers must be positive");
        }
        if self.epochs.is_none() && self.max_iterations.is_none() {
            return bad("epochs", "set epochs or max_iterations");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip_norm", "must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("beta1", "Adam betas must lie in [0, 1) and eps be positive");
        }
        Ok(())
    }
}

/// Base rate times every multiplier whose point has been reached.
pub fn lr_at(base: f64, schedule: &[SchedulePoint], t: u64) -> f64 {
    schedule
        .iter()
        .filter(|p| t >= p.at)
        .fold(base, |lr, p| lr * p.multiplier)
}

/// Per-parameter optimizer buffers in registry order plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState<T> {
    pub step: u64,
    /// Momentum (SGD) or first moment (Adam).
    pub first: Vec<Vec<T>>,
    /// Second moment (Adam only; empty vectors for SGD).
    pub second: Vec<Vec<T>>,
}

impl<T: Real> OptState<T> {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            step: 0,
            first: sizes.iter().map(|&n| alloc::vec![T::zero(); n]).collect(),
            second: sizes.iter().map(|&n| alloc::vec![T::zero(); n]).collect(),
        }
    }

    fn check(&self, params: &[&mut [T]], grads: &[Vec<T>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(Error::Registry(format!(
                "{} parameter tensors, {} gradients, {} optimizer buffers",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (i, ((p, g), b)) in params.iter().zip(grads).zip(&self.first).enumerate() {
            if p.len() != g.len() || p.len() != b.len() {
                return Err(Error::Registry(format!(
                    "tensor {i}: parameter {} / gradient {} / buffer {} lengths differ",
                    p.len(),
                    g.len(),
                    b.len()
                )));
            }
        }
        Ok(())
    }
}

/// `g' = g + wd·p; v = μ·v + g'; p -= lr·v`.
pub fn sgd_momentum_step<T: Real>(
    params: &mut [&mut [T]],
    grads: &[Vec<T>],
    state: &mut OptState<T>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    state.check(params, grads)?;
    let (lr, mu, wd) = (T::from_f64_lossy(lr), T::from_f64_lossy(momentum), T::from_f64_lossy(weight_decay));
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.first) {
        for ((p, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            let g = g + wd * *p;
            *v = mu * *v + g;
            *p = *p - lr * *v;
        }
    }
    state.step += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// Bias-corrected Adam; weight decay is folded into the gradient first.
pub fn adam_step<T: Real>(params: &mut [&mut [T]], grads: &[Vec<T>], state: &mut OptState<T>, hp: AdamParams) -> Result<()> {
    state.check(params, grads)?;
    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let (b1, b2) = (T::from_f64_lossy(hp.beta1), T::from_f64_lossy(hp.beta2));
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let (lr, eps, wd) = (T::from_f64_lossy(hp.lr), T::from_f64_lossy(hp.eps), T::from_f64_lossy(hp.weight_decay));
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.first).zip(&mut state.second) {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            let g = g + wd * *p;
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(p: f64, g: f64) -> (Vec<f64>, Vec<Vec<f64>>, OptState<f64>) {
        (alloc::vec![p], alloc::vec![alloc::vec![g]], OptState::new(&[1]))
    }

    #[test]
    fn sgd_examples() {
        let (mut p, g, mut s) = one_param(1.0, 1.0);
        sgd_momentum_step(&mut [&mut p[..]], &g, &mut s, 0.1, 0.9, 0.0).unwrap();
        assert!((s.first[0][0] - 1.0).abs() < 1e-15 && (p[0] - 0.9).abs() < 1e-15);
        sgd_momentum_step(&mut [&mut p[..]], &g, &mut s, 0.1, 0.9, 0.0).unwrap();
        assert!((s.first[0][0] - 1.9).abs() < 1e-15 && (p[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn sgd_weight_decay_shrinks() {
        let (mut p, g, mut s) = one_param(2.0, 0.0);
        sgd_momentum_step(&mut [&mut p[..]], &g, &mut s, 0.1, 0.9, 0.0005).unwrap();
        assert!((s.first[0][0] - 0.001).abs() < 1e-18);
        assert!(p[0] < 2.0);
    }

    #[test]
    fn adam_first_step() {
        let (mut p, g, mut s) = one_param(0.0, 1.0);
        let hp = AdamParams {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        adam_step(&mut [&mut p[..]], &g, &mut s, hp).unwrap();
        assert!((p[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-18);
        let (mut q, z, mut s) = one_param(0.3, 0.0);
        adam_step(&mut [&mut q[..]], &z, &mut s, hp).unwrap();
        assert_eq!(q[0], 0.3);
    }

    #[test]
    fn schedule_examples() {
        let pts: Vec<SchedulePoint> = [60, 120, 160]
            .into_iter()
            .map(|at| SchedulePoint { at, multiplier: 0.2 })
            .collect();
        assert_eq!(lr_at(0.1, &pts, 59), 0.1);
        assert!((lr_at(0.1, &pts, 60) - 0.02).abs() < 1e-15);
        assert!((lr_at(0.1, &pts, 200) - 0.0008).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::sgd(0.1, 8, 1);
        assert!(c.validate().is_ok());
        c.lr = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::sgd(0.1, 0, 1);
        assert!(c.validate().is_err());
        c.batch_size = 1;
        c.schedule = alloc::vec![SchedulePoint { at: 5, multiplier: 0.5 }, SchedulePoint { at: 5, multiplier: 0.5 }];
        assert!(c.validate().is_err());
    }

    #[test]
    fn mismatched_buffers_error() {
        let mut p = alloc::vec![0.0f64; 2];
        let mut s = OptState::<f64>::new(&[3]);
        assert!(sgd_momentum_step(&mut [&mut p[..]], &[alloc::vec![0.0; 2]], &mut s, 0.1, 0.9, 0.0).is_err());
    }
}
