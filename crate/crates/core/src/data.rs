//! In-memory labelled image sets, batch sources and sampling protocols.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// `N` images of shape `[C, H, W]` stored as raw bytes, with labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageDataset {
    name: String,
    shape: [usize; 3],
    images: Vec<u8>,
    labels: Vec<u8>,
    class_count: usize,
}

impl ImageDataset {
    pub fn new(
        name: impl Into<String>,
        shape: [usize; 3],
        images: Vec<u8>,
        labels: Vec<u8>,
        class_count: usize,
    ) -> Result<Self> {
        let per: usize = shape.iter().product();
        if per == 0 {
            return Err(Error::InvalidShape {
                op: "ImageDataset::new",
                reason: format!("image shape {shape:?} has a zero extent"),
            });
        }
        if images.len() != per * labels.len() {
            return Err(Error::ShapeMismatch {
                op: "ImageDataset::new",
                expected: alloc::vec![labels.len(), shape[0], shape[1], shape[2]],
                actual: alloc::vec![images.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(Error::LabelOutOfRange {
                label: bad as usize,
                classes: class_count,
            });
        }
        Ok(Self {
            name: name.into(),
            shape,
            images,
            labels,
            class_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    pub fn class_count(&self) -> usize {
        self.class_count
    }
    pub fn images(&self) -> &[u8] {
        &self.images
    }
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let per = self.image_len();
        &self.images[i * per..(i + 1) * per]
    }

    pub fn image_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.class_count];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// New dataset holding the listed samples, in the listed order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let per = self.image_len();
        let mut images = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::NotEnoughSamples {
                    requested: i + 1,
                    available: self.len(),
                });
            }
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Ok(Self {
            name: self.name.clone(),
            shape: self.shape,
            images,
            labels,
            class_count: self.class_count,
        })
    }

    /// Seeded subsample. Indices keep their original relative order; when the
    /// whole set is requested the result equals the input. Stratified draws give
    /// every class its proportional share to within one sample.
    pub fn subsample(&self, amount: Amount, seed: u64, stratified: bool) -> Result<Self> {
        let indices = subsample_indices(&self.labels, self.class_count, amount, seed, stratified)?;
        self.select(&indices)
    }
}

/// How many samples to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amount {
    Fraction(f64),
    Count(usize),
}

impl Amount {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            Amount::Fraction(f) if f > 0.0 && f <= 1.0 => {
                Ok(num_traits::Float::round(f * n as f64) as usize)
            }
            Amount::Fraction(f) => Err(Error::InvalidConfig(format!("fraction {f} outside (0, 1]"))),
            Amount::Count(c) if c > n => Err(Error::NotEnoughSamples {
                requested: c,
                available: n,
            }),
            Amount::Count(c) => Ok(c),
        }
    }
}

pub fn subsample_indices(
    labels: &[u8],
    classes: usize,
    amount: Amount,
    seed: u64,
    stratified: bool,
) -> Result<Vec<usize>> {
    let n = labels.len();
    let count = amount.resolve(n)?;
    if count == n {
        return Ok((0..n).collect());
    }
    let mut rng = stream_rng(seed, streams::SUBSAMPLE);
    let mut picked = if stratified {
        let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l as usize].push(i);
        }
        // Largest-remainder apportionment of `count` over the class sizes.
        let mut quota: Vec<usize> = by_class.iter().map(|v| v.len() * count / n).collect();
        let mut rest: Vec<(usize, usize)> = by_class
            .iter()
            .enumerate()
            .map(|(c, v)| (v.len() * count % n, c))
            .collect();
        rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let short = count - quota.iter().sum::<usize>();
        for &(_, c) in rest.iter().take(short) {
            quota[c] += 1;
        }
        let mut out = Vec::with_capacity(count);
        for (mut members, q) in by_class.into_iter().zip(quota) {
            members.shuffle(&mut rng);
            out.extend_from_slice(&members[..q]);
        }
        out
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(count);
        all
    };
    picked.sort_unstable();
    Ok(picked)
}

/// Exchange the roles of the training and evaluation sets.
pub fn swap_train_test(pair: (ImageDataset, ImageDataset)) -> (ImageDataset, ImageDataset) {
    (pair.1, pair.0)
}

/// Anything the training loop can pull labelled batches from.
pub trait BatchSource<T: Real> {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn input_shape(&self) -> [usize; 3];
    fn classes(&self) -> usize;
    fn label(&self, i: usize) -> usize;
    /// Inputs `[B, C, H, W]` and labels for the given sample indices.
    fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)>;
}

impl<T: Real> BatchSource<T> for ImageDataset {
    fn len(&self) -> usize {
        self.labels.len()
    }
    fn input_shape(&self) -> [usize; 3] {
        self.shape
    }
    fn classes(&self) -> usize {
        self.class_count
    }
    fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }
    /// Pixels scaled to `[0, 1]` by `/255`.
    fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let per = self.image_len();
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::NotEnoughSamples {
                    requested: i + 1,
                    available: self.len(),
                });
            }
            data.extend(self.image(i).iter().map(|&p| normalize01::<T>(p)));
            labels.push(self.labels[i] as usize);
        }
        let [c, h, w] = self.shape;
        Ok((Tensor::from_vec(&[indices.len(), c, h, w], data)?, labels))
    }
}

pub fn normalize01<T: Real>(p: u8) -> T {
    T::from_f64_lossy(p as f64 / 255.0)
}

/// Real-valued samples, e.g. synthetic toy problems.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDataset<T> {
    inputs: Tensor<T>,
    labels: Vec<usize>,
    classes: usize,
}

impl<T: Real> RealDataset<T> {
    pub fn new(inputs: Tensor<T>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let [n, _, _, _] = inputs.dims4("RealDataset::new")?;
        if n != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "RealDataset::new",
                expected: alloc::vec![n],
                actual: alloc::vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        Ok(Self { inputs, labels, classes })
    }

    pub fn inputs(&self) -> &Tensor<T> {
        &self.inputs
    }
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

impl<T: Real> BatchSource<T> for RealDataset<T> {
    fn len(&self) -> usize {
        self.labels.len()
    }
    fn input_shape(&self) -> [usize; 3] {
        let s = self.inputs.shape();
        [s[1], s[2], s[3]]
    }
    fn classes(&self) -> usize {
        self.classes
    }
    fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
    fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let [c, h, w] = BatchSource::<T>::input_shape(self);
        let per = c * h * w;
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.labels.len() {
                return Err(Error::NotEnoughSamples {
                    requested: i + 1,
                    available: self.labels.len(),
                });
            }
            data.extend_from_slice(&self.inputs.data()[i * per..(i + 1) * per]);
            labels.push(self.labels[i]);
        }
        Ok((Tensor::from_vec(&[indices.len(), c, h, w], data)?, labels))
    }
}

/// `n` uniform `[0, 1)` single-channel images with uniformly random binary labels.
pub fn random_toy<T: Real>(n: usize, side: usize, seed: u64) -> Result<RealDataset<T>> {
    let mut rng = stream_rng(seed, streams::TOY_DATA);
    let inputs = Tensor::from_fn(&[n, 1, side, side], |_| T::from_f64_lossy(rng.random::<f64>()));
    let labels = (0..n).map(|_| rng.random_range(0..2usize)).collect();
    RealDataset::new(inputs, labels, 2)
}

/// `n` images labelled by which half (left or right) is brighter. Linearly separable.
pub fn separable_toy<T: Real>(n: usize, side: usize, seed: u64) -> Result<RealDataset<T>> {
    let mut rng = stream_rng(seed, streams::TOY_DATA);
    let mut data = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let label = k % 2;
        for _ in 0..side {
            for j in 0..side {
                let bright = (j < side / 2) == (label == 1);
                let base = if bright { 0.7 } else { 0.2 };
                data.push(T::from_f64_lossy(base + 0.1 * rng.random::<f64>()));
            }
        }
        labels.push(label);
    }
    RealDataset::new(Tensor::from_vec(&[n, 1, side, side], data)?, labels, 2)
}
