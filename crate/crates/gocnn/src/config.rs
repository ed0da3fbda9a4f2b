//! JSON experiment configuration.
//!
//! Parsing goes through `serde_path_to_error`, so a bad field is reported
//! with its full path (`train.lr`, `dataset.kind`, ...). Semantic checks in
//! [`ExperimentConfig::validate`] use the same path style.

use std::path::{Path, PathBuf};

use gocnn_core::data::Amount;
use gocnn_core::network::{cifar_small, lenet, theory_net, to_go_variant, THEORY_INPUT, THEORY_OD};
use gocnn_core::optim::{LossKind, TrainConfig};
use gocnn_core::{DType, GeneratorMix, NetworkConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Ordinary first convolution.
    Common,
    /// First convolution replaced by a GO convolution.
    Go,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Common => "common",
            Variant::Go => "go",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Lenet,
    CifarSmall,
    /// Sigmoid conv → fc `d1` → fc 1 net on 8×8 inputs.
    Theory,
    /// `network.custom` holds the full layer list.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub preset: Preset,
    /// Generators of the GO variant's first layer.
    #[serde(default)]
    pub generators: GeneratorMix,
    #[serde(default)]
    pub classes: Option<usize>,
    /// First fully-connected width of the theory preset.
    #[serde(default)]
    pub d1: Option<usize>,
    #[serde(default)]
    pub custom: Option<NetworkConfig>,
}

impl NetworkSection {
    /// Common network for a seed; the GO variant derives from it.
    pub fn common(&self, seed: u64) -> Result<NetworkConfig> {
        Ok(match self.preset {
            Preset::Lenet => lenet(self.classes.unwrap_or(10), seed),
            Preset::CifarSmall => cifar_small(self.classes.unwrap_or(10), seed),
            Preset::Theory => theory_net(THEORY_OD, self.d1.unwrap_or(64), THEORY_INPUT, seed),
            Preset::Custom => {
                let mut cfg = self
                    .custom
                    .clone()
                    .ok_or_else(|| Error::config("network.custom", "required when preset is \"custom\""))?;
                cfg.seed = seed;
                cfg
            }
        })
    }

    pub fn variant(&self, variant: Variant, seed: u64) -> Result<NetworkConfig> {
        let common = self.common(seed)?;
        match variant {
            Variant::Common => Ok(common),
            Variant::Go => to_go_variant(&common, &self.generators)
                .map_err(|e| Error::config("network.generators", e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    /// Synthetic 8×8 images, generated in memory.
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ToyLabels {
    /// Label given by the brighter half of the image.
    #[default]
    Separable,
    /// Independent fair coin per sample.
    Random,
}

/// Subsample size: `{"count": n}` or `{"fraction": f}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmountSpec {
    Count(usize),
    Fraction(f64),
}

impl From<AmountSpec> for Amount {
    fn from(a: AmountSpec) -> Self {
        match a {
            AmountSpec::Count(c) => Amount::Count(c),
            AmountSpec::Fraction(f) => Amount::Fraction(f),
        }
    }
}

fn yes() -> bool {
    true
}
fn toy_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Directory holding the raw files (MNIST IDX or CIFAR-10 binary batches).
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Train on the evaluation split and evaluate on the training split.
    #[serde(default)]
    pub swap: bool,
    /// Samples held out of the (possibly swapped) training split and
    /// evaluated after every epoch.
    #[serde(default)]
    pub validation: Option<usize>,
    #[serde(default)]
    pub train_subsample: Option<AmountSpec>,
    #[serde(default)]
    pub eval_subsample: Option<AmountSpec>,
    #[serde(default = "yes")]
    pub stratified: bool,
    /// Seed of the subsample and validation draws; fixed across run seeds so
    /// every run sees the same data.
    #[serde(default)]
    pub subsample_seed: u64,
    #[serde(default = "toy_samples")]
    pub toy_samples: usize,
    #[serde(default)]
    pub toy_labels: ToyLabels,
}

fn default_std() -> f64 {
    0.3
}
fn default_rotation() -> f64 {
    90.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialSection {
    #[serde(default)]
    pub gaussian_mean: f64,
    #[serde(default = "default_std")]
    pub gaussian_std: f64,
    /// Rotation angles are drawn uniformly from `[-max, max]` degrees.
    #[serde(default = "default_rotation")]
    pub rotation_max_deg: f64,
    /// Seed of the perturbation draws (shared by both variants).
    #[serde(default)]
    pub perturb_seed: u64,
}

impl Default for AdversarialSection {
    fn default() -> Self {
        Self {
            gaussian_mean: 0.0,
            gaussian_std: default_std(),
            rotation_max_deg: default_rotation(),
            perturb_seed: 0,
        }
    }
}

fn default_widths() -> Vec<usize> {
    vec![4, 16, 64, 256]
}
fn default_slack() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthSweepSection {
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
    /// Width of the fixed common baseline; defaults to the largest sweep width.
    #[serde(default)]
    pub baseline_width: Option<usize>,
    /// Iteration budget of the baseline; defaults to the `train` budget.
    /// A longer budget makes the baseline a converged reference.
    #[serde(default)]
    pub baseline_iterations: Option<u64>,
    /// Also train, for the first seed, Free-mix controls holding the common
    /// net's initial kernels at every width.
    #[serde(default = "yes")]
    pub free_control: bool,
    /// Relative slack allowed when consecutive median gaps increase.
    #[serde(default = "default_slack")]
    pub slack: f64,
}

impl Default for WidthSweepSection {
    fn default() -> Self {
        Self {
            widths: default_widths(),
            baseline_width: None,
            baseline_iterations: None,
            free_control: true,
            slack: default_slack(),
        }
    }
}

/// Directional gates; `null` disables one. A failed gate makes the command exit with code 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gates {
    /// `train`: median GO accuracy at least this.
    pub min_go_accuracy: Option<f64>,
    /// `train`: |median common − median GO| at most this.
    pub max_accuracy_gap: Option<f64>,
    /// `generalization`: GO median ≥ common median − this.
    pub generalization_margin: Option<f64>,
    /// `generalization`: both medians at least this.
    pub generalization_min_accuracy: Option<f64>,
    /// `adversarial`: GO Gaussian difference ≤ common difference + this.
    pub gaussian_margin: Option<f64>,
    /// `adversarial`: GO rotation difference ≤ common difference + this.
    pub rotation_margin: Option<f64>,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            min_go_accuracy: Some(0.95),
            max_accuracy_gap: Some(0.015),
            generalization_margin: Some(0.003),
            generalization_min_accuracy: Some(0.96),
            gaussian_margin: Some(0.005),
            rotation_margin: Some(0.01),
        }
    }
}

/// Replacements applied by `--quick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct QuickOverrides {
    pub epochs: Option<u64>,
    pub max_iterations: Option<u64>,
    pub train_subsample: Option<AmountSpec>,
    pub eval_subsample: Option<AmountSpec>,
    pub seeds: Option<Vec<u64>>,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_variants() -> Vec<Variant> {
    vec![Variant::Common, Variant::Go]
}
fn default_eval_batch() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub dataset: DatasetSection,
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_eval_batch")]
    pub eval_batch_size: usize,
    #[serde(default)]
    pub adversarial: AdversarialSection,
    #[serde(default)]
    pub width_sweep: WidthSweepSection,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub quick: QuickOverrides,
}

/// Command-line replacements, applied after `--quick`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub dtype: Option<DType>,
    pub quick: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::config(
                format!("{} ({field})", origin.display()),
                e.into_inner().to_string(),
            )
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.quick {
            let q = self.quick.clone();
            if q.epochs.is_some() || q.max_iterations.is_some() {
                self.train.epochs = q.epochs;
                self.train.max_iterations = q.max_iterations;
            }
            if q.train_subsample.is_some() {
                self.dataset.train_subsample = q.train_subsample;
            }
            if q.eval_subsample.is_some() {
                self.dataset.eval_subsample = q.eval_subsample;
            }
            if let Some(s) = q.seeds {
                self.seeds = s;
            }
        }
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
        }
        if let Some(d) = o.dtype {
            self.train.dtype = d;
        }
    }

    /// Semantic checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        self.train
            .validate()
            .map_err(|e| Error::config("train", e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "must list at least one variant"));
        }
        if self.eval_batch_size == 0 {
            return Err(Error::config("eval_batch_size", "must be at least 1"));
        }
        let net = self.network.common(0)?;
        net.shapes().map_err(|e| Error::config("network", e.to_string()))?;
        if self.variants.contains(&Variant::Go) {
            self.network.variant(Variant::Go, 0)?;
        }
        if self.network.preset == Preset::Theory && self.network.d1 == Some(0) {
            return Err(Error::config("network.d1", "must be at least 1"));
        }
        let ds = &self.dataset;
        match ds.kind {
            DatasetKind::Mnist | DatasetKind::Cifar10 if ds.dir.is_none() => {
                return Err(Error::config("dataset.dir", "required for mnist and cifar10"));
            }
            DatasetKind::Toy if ds.toy_samples == 0 => {
                return Err(Error::config("dataset.toy_samples", "must be at least 1"));
            }
            _ => {}
        }
        let expect = match ds.kind {
            DatasetKind::Mnist => Some([1, 28, 28]),
            DatasetKind::Cifar10 => Some([3, 32, 32]),
            DatasetKind::Toy => Some(THEORY_INPUT),
        };
        if let Some(shape) = expect {
            if net.input_shape != shape {
                return Err(Error::config(
                    "network.preset",
                    format!("network input {:?} does not match dataset images {shape:?}", net.input_shape),
                ));
            }
        }
        for (field, a) in [("dataset.train_subsample", ds.train_subsample), ("dataset.eval_subsample", ds.eval_subsample)] {
            if let Some(AmountSpec::Fraction(f)) = a {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::config(field, format!("fraction {f} outside (0, 1]")));
                }
            }
            if let Some(AmountSpec::Count(0)) = a {
                return Err(Error::config(field, "count must be at least 1"));
            }
        }
        let adv = &self.adversarial;
        if !(adv.gaussian_std >= 0.0 && adv.gaussian_std.is_finite()) {
            return Err(Error::config("adversarial.gaussian_std", "must be non-negative"));
        }
        if !(adv.rotation_max_deg >= 0.0 && adv.rotation_max_deg.is_finite()) {
            return Err(Error::config("adversarial.rotation_max_deg", "must be non-negative"));
        }
        let ws = &self.width_sweep;
        if ws.widths.is_empty() || ws.widths.contains(&0) {
            return Err(Error::config("width_sweep.widths", "must be a nonempty list of positive widths"));
        }
        if ws.baseline_iterations == Some(0) {
            return Err(Error::config("width_sweep.baseline_iterations", "must be at least 1"));
        }
        if !(ws.slack >= 0.0) {
            return Err(Error::config("width_sweep.slack", "must be non-negative"));
        }
        Ok(())
    }

    /// Loss used for evaluation reports (the training loss).
    pub fn loss(&self) -> LossKind {
        self.train.loss
    }
}

/// Parse `--seeds`: a comma list (`0,1,2`) or a half-open range (`0..5`).
pub fn parse_seeds(text: &str) -> std::result::Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if a >= b {
            return Err("empty seed range".into());
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}")))
        .collect()
}
