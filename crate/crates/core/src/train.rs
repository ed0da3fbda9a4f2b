//! Seeded mini-batch training loop and evaluation metrics.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::BatchSource;
use crate::error::{Error, Result};
use crate::network::Model;
use crate::ops::{mse_loss, softmax_cross_entropy};
use crate::optim::{adam_step, lr_at, sgd_momentum_step, AdamParams, Augment, LossKind, OptState, OptimizerKind, ScheduleUnit, TrainConfig};
use crate::rng::{stream_rng, streams, StreamRng};
use crate::scalar::Real;
use crate::tensor::Tensor;
use crate::transforms::augment_pad_crop_flip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `None` for classes absent from the evaluated set.
    pub per_class_recall: Vec<Option<f64>>,
}

/// Loss value, output cotangent, and the number of correct predictions.
pub fn loss_and_grad<T: Real>(output: &Tensor<T>, labels: &[usize], kind: LossKind) -> Result<(T, Tensor<T>, usize)> {
    let preds = predictions(output);
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    let out = match kind {
        LossKind::CrossEntropy => softmax_cross_entropy(output, labels)?,
        LossKind::Mse => mse_loss(output, &targets(output, labels)?)?,
    };
    Ok((out.loss, out.grad, correct))
}

/// One-hot targets, or the bare 0/1 label for single-output nets.
fn targets<T: Real>(output: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let [n, k] = output.dims2_flat();
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            op: "loss",
            expected: alloc::vec![n],
            actual: alloc::vec![labels.len()],
        });
    }
    let classes = if k == 1 { 2 } else { k };
    let mut t = Tensor::zeros(output.shape());
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::LabelOutOfRange { label: l, classes });
        }
        if k == 1 {
            t.data_mut()[i] = T::from_f64_lossy(l as f64);
        } else {
            t.data_mut()[i * k + l] = T::one();
        }
    }
    Ok(t)
}

/// Arg-max per row (first maximum wins); single-output rows threshold at 0.5.
pub fn predictions<T: Real>(output: &Tensor<T>) -> Vec<usize> {
    let [n, k] = output.dims2_flat();
    let half = T::from_f64_lossy(0.5);
    (0..n)
        .map(|i| {
            let row = &output.data()[i * k..(i + 1) * k];
            if k == 1 {
                return usize::from(row[0] >= half);
            }
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Training state that outlives a single epoch: optimizer buffers, counters,
/// and the shuffle/augmentation streams.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub cfg: TrainConfig,
    pub opt: OptState<T>,
    pub shuffle_rng: StreamRng,
    pub augment_rng: StreamRng,
    pub epoch: u64,
    pub iteration: u64,
}

impl<T: Real> Trainer<T> {
    pub fn new(model: &Model<T>, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        Ok(Self {
            cfg: cfg.clone(),
            opt: OptState::new(&sizes),
            shuffle_rng: stream_rng(cfg.seed, streams::SHUFFLE),
            augment_rng: stream_rng(cfg.seed, streams::AUGMENT),
            epoch: 0,
            iteration: 0,
        })
    }

    pub fn current_lr(&self) -> f64 {
        let t = match self.cfg.schedule_unit {
            ScheduleUnit::Epoch => self.epoch,
            ScheduleUnit::Iteration => self.iteration,
        };
        lr_at(self.cfg.lr, &self.cfg.schedule, t)
    }

    pub fn is_done(&self) -> bool {
        self.cfg.epochs.is_some_and(|e| self.epoch >= e) || self.cfg.max_iterations.is_some_and(|m| self.iteration >= m)
    }

    /// One optimizer update on a batch; returns the batch loss and correct count.
    pub fn step(&mut self, model: &mut Model<T>, x: &Tensor<T>, labels: &[usize]) -> Result<(f64, usize)> {
        let x = match self.cfg.augment {
            Augment::None => x.clone(),
            Augment::PadCropFlip { pad } => augment_pad_crop_flip(x, pad, &mut self.augment_rng)?,
        };
        let out = model.forward(&x)?;
        let (loss, grad, correct) = loss_and_grad(&out, labels, self.cfg.loss)?;
        let mut grads = model.backward(&grad)?;
        model.clear_caches();
        if let Some(limit) = self.cfg.clip_norm {
            let norm = grads.global_norm().to_f64_lossy();
            if norm > limit {
                grads.scale(T::from_f64_lossy(limit / norm));
            }
        }
        let lr = self.current_lr();
        let mut params = model.params_mut();
        match self.cfg.optimizer {
            OptimizerKind::SgdMomentum => sgd_momentum_step(
                &mut params,
                &grads.values,
                &mut self.opt,
                lr,
                self.cfg.momentum,
                self.cfg.weight_decay,
            )?,
            OptimizerKind::Adam => adam_step(
                &mut params,
                &grads.values,
                &mut self.opt,
                AdamParams {
                    lr,
                    beta1: self.cfg.beta1,
                    beta2: self.cfg.beta2,
                    eps: self.cfg.eps,
                    weight_decay: self.cfg.weight_decay,
                },
            )?,
        }
        self.iteration += 1;
        Ok((loss.to_f64_lossy(), correct))
    }

    /// One pass over a fresh seeded permutation (cut short by `max_iterations`).
    pub fn run_epoch(&mut self, model: &mut Model<T>, data: &dyn BatchSource<T>) -> Result<EpochRecord> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(self.cfg.batch_size) {
            if self.cfg.max_iterations.is_some_and(|m| self.iteration >= m) {
                break;
            }
            let (x, labels) = data.batch(chunk)?;
            let (loss, c) = self.step(model, &x, &labels)?;
            if !loss.is_finite() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "training diverged at iteration {} (loss {loss})",
                    self.iteration
                )));
            }
            loss_sum += loss * chunk.len() as f64;
            correct += c;
            seen += chunk.len();
        }
        self.epoch += 1;
        Ok(EpochRecord {
            epoch: self.epoch,
            split: "train".into(),
            loss: loss_sum / seen.max(1) as f64,
            accuracy: correct as f64 / seen.max(1) as f64,
        })
    }

    /// Run until `epochs` or `max_iterations` is reached; `hook` sees every record.
    pub fn train(
        &mut self,
        model: &mut Model<T>,
        data: &dyn BatchSource<T>,
        hook: &mut dyn FnMut(&EpochRecord),
    ) -> Result<Vec<EpochRecord>> {
        let mut history = Vec::new();
        while !self.is_done() {
            let rec = self.run_epoch(model, data)?;
            hook(&rec);
            history.push(rec);
        }
        Ok(history)
    }
}

/// Convenience wrapper: fresh trainer, full run.
pub fn train<T: Real>(
    model: &mut Model<T>,
    data: &dyn BatchSource<T>,
    cfg: &TrainConfig,
    hook: &mut dyn FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    Trainer::new(model, cfg)?.train(model, data, hook)
}

pub fn evaluate<T: Real>(model: &Model<T>, data: &dyn BatchSource<T>, loss: LossKind, batch_size: usize) -> Result<Evaluation> {
    evaluate_with(model, data, loss, batch_size, &mut |x| Ok(x))
}

/// Evaluate after passing every input batch through `perturb` (in sample order).
pub fn evaluate_with<T: Real>(
    model: &Model<T>,
    data: &dyn BatchSource<T>,
    loss: LossKind,
    batch_size: usize,
    perturb: &mut dyn FnMut(Tensor<T>) -> Result<Tensor<T>>,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = data.classes();
    let mut hits = alloc::vec![0usize; classes];
    let mut totals = alloc::vec![0usize; classes];
    let mut loss_sum = 0.0;
    let order: Vec<usize> = (0..data.len()).collect();
    for chunk in order.chunks(batch_size.max(1)) {
        let (x, labels) = data.batch(chunk)?;
        let out = model.infer(&perturb(x)?)?;
        let (l, _, _) = loss_and_grad(&out, &labels, loss)?;
        loss_sum += l.to_f64_lossy() * chunk.len() as f64;
        for (p, &y) in predictions(&out).into_iter().zip(&labels) {
            totals[y] += 1;
            hits[y] += usize::from(p == y);
        }
    }
    let n = data.len();
    Ok(Evaluation {
        samples: n,
        accuracy: hits.iter().sum::<usize>() as f64 / n as f64,
        mean_loss: loss_sum / n as f64,
        per_class_recall: hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::separable_toy;
    use crate::network::{theory_net, NetworkConfig, LayerSpec, THEORY_INPUT};
    use crate::optim::TrainConfig;

    #[test]
    fn predictions_rules() {
        let t = Tensor::from_vec(&[2, 3], alloc::vec![0.1, 0.5, 0.5, 2.0, -1.0, 0.0]).unwrap();
        assert_eq!(predictions(&t), alloc::vec![1, 0]);
        let s = Tensor::from_vec(&[2, 1], alloc::vec![0.5, 0.49]).unwrap();
        assert_eq!(predictions(&s), alloc::vec![1, 0]);
    }

    #[test]
    fn perfect_classifier_scores_one() {
        // fc with identity weights on 2-pixel inputs: logit = pixel, label = brighter pixel
        let cfg = NetworkConfig {
            layers: alloc::vec![LayerSpec::Fc { out: 2 }],
            input_shape: [1, 1, 2],
            classes: 2,
            seed: 0,
        };
        let mut model = Model::<f64>::build(&cfg).unwrap();
        model.load_params(&[alloc::vec![1.0, 0.0, 0.0, 1.0], alloc::vec![0.0, 0.0]]).unwrap();
        let x = Tensor::from_vec(&[4, 1, 1, 2], alloc::vec![1.0, 0.0, 0.0, 1.0, 0.9, 0.2, 0.1, 0.3]).unwrap();
        let data = crate::data::RealDataset::new(x, alloc::vec![0, 1, 0, 1], 2).unwrap();
        let e = evaluate(&model, &data, LossKind::CrossEntropy, 3).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert!(e.per_class_recall.iter().all(|r| *r == Some(1.0)));
    }

    #[test]
    fn theory_net_fits_separable_toy() {
        let data = separable_toy::<f64>(16, THEORY_INPUT[1], 0).unwrap();
        let mut model = Model::build(&theory_net(4, 8, THEORY_INPUT, 0)).unwrap();
        let mut cfg = TrainConfig::adam(0.01, 16, 500);
        cfg.loss = LossKind::Mse;
        cfg.weight_decay = 0.0;
        let history = train(&mut model, &data, &cfg, &mut |_| {}).unwrap();
        assert!(history.last().unwrap().loss < 0.01, "{:?}", history.last());
    }

    #[test]
    fn empty_dataset_errors() {
        let model = Model::<f64>::build(&theory_net(2, 2, THEORY_INPUT, 0)).unwrap();
        let data = crate::data::RealDataset::<f64>::new(Tensor::zeros(&[1, 1, 8, 8]), alloc::vec![0], 2).unwrap();
        let empty = crate::data::ImageDataset::new("e", [1, 8, 8], alloc::vec![], alloc::vec![], 2).unwrap();
        assert!(evaluate(&model, &empty, LossKind::Mse, 4).is_err());
        assert!(evaluate(&model, &data, LossKind::Mse, 4).is_ok());
    }
}
