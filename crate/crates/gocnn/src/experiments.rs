//! Experiment drivers behind the CLI subcommands.
//!
//! Every driver takes an already validated config and already loaded data,
//! so a missing file or bad field fails before anything is written.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gocnn_core::data::{random_toy, separable_toy, subsample_indices, Amount, BatchSource, ImageDataset, RealDataset};
use gocnn_core::generators::{build_bank, GeneratorSpec};
use gocnn_core::injectivity::{certify_bank, prop2_bank, Certificate, Verdict};
use gocnn_core::network::{Layer, Model};
use gocnn_core::rng::{stream_rng, streams};
use gocnn_core::train::{evaluate, evaluate_with, EpochRecord, Evaluation, Trainer};
use gocnn_core::transforms::{gaussian_perturb, random_rotate};
use gocnn_core::{KernelBank, NetworkConfig, Real, Tensor};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{DatasetKind, ExperimentConfig, Preset, ToyLabels, Variant};
use crate::error::{Error, Result};
use crate::report::{median, write_history, ParamCounts, Report};
use crate::{cifar, idx, kernels};

pub const REPORT_NAME: &str = "report.json";
pub const HISTORY_NAME: &str = "history.csv";
pub const CHECKPOINT_NAME: &str = "model.ckpt";

/// Published reference values, embedded in reports as annotations (fractions).
pub mod reference {
    pub const SWAP_GO: f64 = 0.9797;
    pub const SWAP_COMMON: f64 = 0.9775;
    pub const FULL_GO: f64 = 0.9924;
    pub const FULL_COMMON: f64 = 0.9922;
    pub const ROTATION_DIFF_GO: f64 = 0.3904;
    pub const ROTATION_DIFF_COMMON: f64 = 0.4025;
    pub const GAUSSIAN_DIFF_GO: f64 = 0.0293;
    pub const GAUSSIAN_DIFF_COMMON: f64 = 0.0353;
}

/// One split of a dataset: stored images or in-memory real samples.
#[derive(Debug, Clone)]
pub enum Split<T> {
    Images(ImageDataset),
    Real(RealDataset<T>),
}

impl<T: Real> Split<T> {
    fn select(&self, indices: &[usize]) -> Result<Self> {
        Ok(match self {
            Split::Images(d) => Split::Images(d.select(indices)?),
            Split::Real(d) => {
                let (x, labels) = d.batch(indices)?;
                Split::Real(RealDataset::new(x, labels, d.classes())?)
            }
        })
    }

    fn labels_u8(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.label(i) as u8).collect()
    }

    fn subsample(&self, amount: Amount, seed: u64, stratified: bool) -> Result<Self> {
        let idx = subsample_indices(&self.labels_u8(), self.classes(), amount, seed, stratified)?;
        self.select(&idx)
    }
}

impl<T: Real> BatchSource<T> for Split<T> {
    fn len(&self) -> usize {
        match self {
            Split::Images(d) => BatchSource::<T>::len(d),
            Split::Real(d) => d.len(),
        }
    }
    fn input_shape(&self) -> [usize; 3] {
        match self {
            Split::Images(d) => BatchSource::<T>::input_shape(d),
            Split::Real(d) => d.input_shape(),
        }
    }
    fn classes(&self) -> usize {
        match self {
            Split::Images(d) => BatchSource::<T>::classes(d),
            Split::Real(d) => d.classes(),
        }
    }
    fn label(&self, i: usize) -> usize {
        match self {
            Split::Images(d) => BatchSource::<T>::label(d, i),
            Split::Real(d) => d.label(i),
        }
    }
    fn batch(&self, indices: &[usize]) -> gocnn_core::Result<(Tensor<T>, Vec<usize>)> {
        match self {
            Split::Images(d) => d.batch(indices),
            Split::Real(d) => d.batch(indices),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Data<T> {
    pub train: Split<T>,
    pub validation: Option<Split<T>>,
    pub eval: Split<T>,
}

/// Load and split the dataset described by `cfg.dataset`.
pub fn load_data<T: Real>(cfg: &ExperimentConfig) -> Result<Data<T>> {
    let ds = &cfg.dataset;
    let dir = || ds.dir.clone().unwrap_or_default();
    let (train, eval) = match ds.kind {
        DatasetKind::Mnist => {
            let (a, b) = idx::load_mnist_dir(&dir())?;
            (Split::Images(a), Split::Images(b))
        }
        DatasetKind::Cifar10 => {
            let (a, b) = cifar::load_cifar10_dir(&dir())?;
            (Split::Images(a), Split::Images(b))
        }
        DatasetKind::Toy => {
            let make = |seed| match ds.toy_labels {
                ToyLabels::Separable => separable_toy::<T>(ds.toy_samples, 8, seed),
                ToyLabels::Random => random_toy::<T>(ds.toy_samples, 8, seed),
            };
            let s = ds.subsample_seed;
            (Split::Real(make(s)?), Split::Real(make(s.wrapping_add(1))?))
        }
    };
    let (mut train, mut eval) = if ds.swap { (eval, train) } else { (train, eval) };
    let mut validation = None;
    if let Some(v) = ds.validation {
        let labels = train.labels_u8();
        let held = subsample_indices(&labels, train.classes(), Amount::Count(v), ds.subsample_seed, ds.stratified)
            .map_err(|e| Error::config("dataset.validation", e.to_string()))?;
        let mut keep = vec![true; labels.len()];
        held.iter().for_each(|&i| keep[i] = false);
        let rest: Vec<usize> = (0..labels.len()).filter(|&i| keep[i]).collect();
        validation = Some(train.select(&held)?);
        train = train.select(&rest)?;
    }
    if let Some(a) = ds.train_subsample {
        train = train
            .subsample(a.into(), ds.subsample_seed, ds.stratified)
            .map_err(|e| Error::config("dataset.train_subsample", e.to_string()))?;
    }
    if let Some(a) = ds.eval_subsample {
        eval = eval
            .subsample(a.into(), ds.subsample_seed, ds.stratified)
            .map_err(|e| Error::config("dataset.eval_subsample", e.to_string()))?;
    }
    Ok(Data { train, validation, eval })
}

#[derive(Debug, Clone)]
pub struct TrainedRun<T> {
    pub variant: Variant,
    pub seed: u64,
    pub model: Model<T>,
    pub trainer: Trainer<T>,
    pub history: Vec<EpochRecord>,
    pub seconds: f64,
}

pub fn run_dir(out: &Path, variant: Variant, seed: u64) -> PathBuf {
    out.join("runs").join(format!("{}_seed{seed}", variant.as_str()))
}

fn log(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

/// Train one `(variant, seed)` pair from a fresh init.
pub fn train_one<T: Real>(cfg: &ExperimentConfig, data: &Data<T>, variant: Variant, seed: u64, quiet: bool) -> Result<TrainedRun<T>> {
    let net = cfg.network.variant(variant, seed)?;
    let model = Model::<T>::build(&net)?;
    train_model(cfg, data, model, variant, seed, quiet)
}

/// Train an already built model with the config's schedule, seeded by `seed`.
pub fn train_model<T: Real>(
    cfg: &ExperimentConfig,
    data: &Data<T>,
    mut model: Model<T>,
    variant: Variant,
    seed: u64,
    quiet: bool,
) -> Result<TrainedRun<T>> {
    let mut tc = cfg.train.clone();
    tc.seed = seed;
    let start = Instant::now();
    let mut trainer = Trainer::new(&model, &tc)?;
    let mut history = Vec::new();
    while !trainer.is_done() {
        let rec = trainer.run_epoch(&mut model, &data.train)?;
        log(
            quiet,
            format!("[{} seed {seed}] epoch {} loss {:.5} acc {:.4}", variant.as_str(), rec.epoch, rec.loss, rec.accuracy),
        );
        history.push(rec);
        if let Some(v) = &data.validation {
            let e = evaluate(&model, v, tc.loss, cfg.eval_batch_size)?;
            history.push(EpochRecord {
                epoch: trainer.epoch,
                split: "validation".into(),
                loss: e.mean_loss,
                accuracy: e.accuracy,
            });
        }
    }
    Ok(TrainedRun {
        variant,
        seed,
        model,
        trainer,
        history,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Write a run's history and checkpoint under `out/runs/{variant}_seed{s}/`.
pub fn save_run<T: Real>(run: &TrainedRun<T>, out: &Path) -> Result<()> {
    let dir = run_dir(out, run.variant, run.seed);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_history(&run.history, &dir.join(HISTORY_NAME))?;
    save_checkpoint(&run.model, Some(&run.trainer), &dir.join(CHECKPOINT_NAME))
}

/// Train every configured `(seed, variant)`; both variants of a seed share
/// init of the later layers and the batch order.
pub fn train_all<T: Real>(cfg: &ExperimentConfig, data: &Data<T>, out: Option<&Path>, quiet: bool) -> Result<Vec<TrainedRun<T>>> {
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        for &variant in &cfg.variants {
            let run = train_one(cfg, data, variant, seed, quiet)?;
            if let Some(out) = out {
                save_run(&run, out)?;
            }
            runs.push(run);
        }
    }
    Ok(runs)
}

fn eval_metrics(e: &Evaluation, prefix: &str) -> Vec<(String, f64)> {
    let mut m = vec![(format!("{prefix}accuracy"), e.accuracy), (format!("{prefix}mean_loss"), e.mean_loss)];
    if prefix.is_empty() {
        for (k, r) in e.per_class_recall.iter().enumerate() {
            if let Some(r) = r {
                m.push((format!("recall_{k}"), *r));
            }
        }
    }
    m
}

fn dtype_name<T: Real>() -> String {
    format!("{:?}", T::DTYPE).to_lowercase()
}

fn new_report<T: Real>(kind: &str, cfg: &ExperimentConfig) -> Report {
    Report::new(kind, &dtype_name::<T>(), &cfg.seeds, serde_json::to_value(cfg).expect("config serializes"))
}

fn record_counts<T: Real>(report: &mut Report, variant: Variant, model: &Model<T>) {
    report.param_counts.insert(
        variant.as_str().to_owned(),
        ParamCounts {
            total: model.param_count(),
            first_layer: model.first_layer_param_count(),
        },
    );
}

fn paired_difference(report: &mut Report, metric: &str) -> Option<(f64, f64)> {
    let c = report.median_of("common", metric)?;
    let g = report.median_of("go", metric)?;
    report.differences.insert(format!("{metric}_go_minus_common"), g - c);
    Some((c, g))
}

/// Evaluate trained runs on the evaluation split and assemble a report.
fn accuracy_report<T: Real>(kind: &str, cfg: &ExperimentConfig, data: &Data<T>, runs: &[TrainedRun<T>]) -> Result<Report> {
    let mut report = new_report::<T>(kind, cfg);
    for run in runs {
        let e = evaluate(&run.model, &data.eval, cfg.loss(), cfg.eval_batch_size)?;
        let mut m = eval_metrics(&e, "");
        m.push(("train_seconds".into(), run.seconds));
        if let Some(last) = run.history.iter().rev().find(|r| r.split == "train") {
            m.push(("final_train_loss".into(), last.loss));
        }
        report.push_run(run.variant.as_str(), run.seed, m);
        record_counts(&mut report, run.variant, &run.model);
    }
    report.summarize();
    Ok(report)
}

/// Train both variants and evaluate on the held-out split.
pub fn train_report<T: Real>(cfg: &ExperimentConfig, data: &Data<T>, runs: &[TrainedRun<T>]) -> Result<Report> {
    let mut report = accuracy_report("train", cfg, data, runs)?;
    if let Some((c, g)) = paired_difference(&mut report, "accuracy") {
        if let Some(t) = cfg.gates.min_go_accuracy {
            report.gate("go_accuracy", g, t, true, "median GO accuracy >= threshold");
        }
        if let Some(t) = cfg.gates.max_accuracy_gap {
            report.gate("accuracy_gap", (c - g).abs(), t, false, "|median common - median GO| <= threshold");
        }
    }
    Ok(report)
}

/// Train on the (swapped) small split, evaluate on the large one.
pub fn generalization_report<T: Real>(cfg: &ExperimentConfig, data: &Data<T>, runs: &[TrainedRun<T>]) -> Result<Report> {
    let mut report = accuracy_report("generalization", cfg, data, runs)?;
    if let Some((c, g)) = paired_difference(&mut report, "accuracy") {
        if let Some(m) = cfg.gates.generalization_margin {
            report.gate("go_vs_common", g, c - m, true, "median GO >= median common - margin");
        }
        if let Some(t) = cfg.gates.generalization_min_accuracy {
            report.gate("common_accuracy", c, t, true, "median common accuracy >= threshold");
            report.gate("go_accuracy", g, t, true, "median GO accuracy >= threshold");
        }
    }
    report.annotate("reference.swap.go", reference::SWAP_GO, "published small-train accuracy, GO LeNet");
    report.annotate("reference.swap.common", reference::SWAP_COMMON, "published small-train accuracy, common LeNet");
    report.annotate("reference.full.go", reference::FULL_GO, "published full-train accuracy, GO LeNet");
    report.annotate("reference.full.common", reference::FULL_COMMON, "published full-train accuracy, common LeNet");
    Ok(report)
}

/// Clean, rotated and Gaussian-noise accuracies of one model. Both variants
/// see the same perturbation draws because the stream restarts per call.
pub fn adversarial_metrics<T: Real>(cfg: &ExperimentConfig, model: &Model<T>, eval: &dyn BatchSource<T>) -> Result<Vec<(String, f64)>> {
    let adv = &cfg.adversarial;
    let bs = cfg.eval_batch_size;
    let clean = evaluate(model, eval, cfg.loss(), bs)?;
    let mut rot_rng = stream_rng(adv.perturb_seed, streams::PERTURB);
    let rotated = evaluate_with(model, eval, cfg.loss(), bs, &mut |x| {
        random_rotate(&x, adv.rotation_max_deg, &mut rot_rng)
    })?;
    let mut noise_rng = stream_rng(adv.perturb_seed.wrapping_add(1), streams::PERTURB);
    let noisy = evaluate_with(model, eval, cfg.loss(), bs, &mut |x| {
        gaussian_perturb(&x, adv.gaussian_mean, adv.gaussian_std, &mut noise_rng)
    })?;
    Ok(vec![
        ("clean".into(), clean.accuracy),
        ("rotated".into(), rotated.accuracy),
        ("rotation_difference".into(), clean.accuracy - rotated.accuracy),
        ("gaussian".into(), noisy.accuracy),
        ("gaussian_difference".into(), clean.accuracy - noisy.accuracy),
    ])
}

pub fn adversarial_report<T: Real>(cfg: &ExperimentConfig, data: &Data<T>, models: &[(Variant, u64, &Model<T>)]) -> Result<Report> {
    let mut report = new_report::<T>("adversarial", cfg);
    for &(variant, seed, model) in models {
        report.push_run(variant.as_str(), seed, adversarial_metrics(cfg, model, &data.eval)?);
        record_counts(&mut report, variant, model);
    }
    report.summarize();
    for metric in ["clean", "rotated", "gaussian"] {
        paired_difference(&mut report, metric);
    }
    if let Some((c, g)) = paired_difference(&mut report, "gaussian_difference") {
        if let Some(m) = cfg.gates.gaussian_margin {
            report.gate("gaussian_stability", g, c + m, false, "median GO difference <= median common difference + margin");
        }
    }
    if let Some((c, g)) = paired_difference(&mut report, "rotation_difference") {
        if let Some(m) = cfg.gates.rotation_margin {
            report.gate("rotation_stability", g, c + m, false, "median GO difference <= median common difference + margin");
        }
    }
    report.annotate("reference.rotation_difference.go", reference::ROTATION_DIFF_GO, "published rotated-set difference, GO LeNet");
    report.annotate("reference.rotation_difference.common", reference::ROTATION_DIFF_COMMON, "published rotated-set difference, common LeNet");
    report.annotate("reference.gaussian_difference.go", reference::GAUSSIAN_DIFF_GO, "published Gaussian-set difference, GO LeNet");
    report.annotate("reference.gaussian_difference.common", reference::GAUSSIAN_DIFF_COMMON, "published Gaussian-set difference, common LeNet");
    Ok(report)
}

/// Load `runs/{variant}_seed{s}/model.ckpt` for every configured pair and
/// check each against the network the config would build.
pub fn load_runs<T: Real>(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<(Variant, u64, Model<T>)>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        for &variant in &cfg.variants {
            let path = run_dir(dir, variant, seed).join(CHECKPOINT_NAME);
            let loaded = load_checkpoint::<T>(&path)?;
            let expect = cfg.network.variant(variant, seed)?;
            if loaded.model.config() != &expect {
                return Err(Error::format(&path, "checkpoint network does not match the config for this variant and seed"));
            }
            out.push((variant, seed, loaded.model));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    d1: usize,
    seed: u64,
    kind: &'static str,
    loss_f: f64,
    loss_g: f64,
    gap: f64,
}

fn with_width(cfg: &ExperimentConfig, d1: usize) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.network.d1 = Some(d1);
    c
}

/// Width sweep: a fixed common baseline `F` and GO nets `G` of growing
/// first fully-connected width, compared by empirical loss on the training set.
pub fn width_sweep<T: Real>(cfg: &ExperimentConfig, data: &Data<T>, out: Option<&Path>, quiet: bool) -> Result<Report> {
    if cfg.network.preset != Preset::Theory {
        return Err(Error::config("network.preset", "the width sweep needs the theory preset"));
    }
    let ws = &cfg.width_sweep;
    let base_width = ws.baseline_width.unwrap_or_else(|| *ws.widths.iter().max().expect("validated nonempty"));
    let mut report = new_report::<T>("width_sweep", cfg);
    let mut rows = Vec::new();
    let loss_on_s = |m: &Model<T>| -> Result<f64> { Ok(evaluate(m, &data.train, cfg.loss(), cfg.eval_batch_size)?.mean_loss) };
    for &seed in &cfg.seeds {
        let mut fc = with_width(cfg, base_width);
        if let Some(it) = ws.baseline_iterations {
            fc.train.epochs = None;
            fc.train.max_iterations = Some(it);
        }
        let f = train_one(&fc, data, Variant::Common, seed, true)?;
        let loss_f = loss_on_s(&f.model)?;
        log(quiet, format!("[sweep seed {seed}] baseline d1={base_width} loss {loss_f:.6}"));
        record_counts(&mut report, Variant::Common, &f.model);
        for &d in &ws.widths {
            let g = train_one(&with_width(cfg, d), data, Variant::Go, seed, true)?;
            let loss_g = loss_on_s(&g.model)?;
            let gap = (loss_g - loss_f).abs();
            log(quiet, format!("[sweep seed {seed}] G d1={d} loss {loss_g:.6} gap {gap:.6}"));
            report.push_run(
                &format!("g_d{d}"),
                seed,
                [("loss_f".to_owned(), loss_f), ("loss_g".to_owned(), loss_g), ("gap".to_owned(), gap)],
            );
            rows.push(SweepRow { d1: d, seed, kind: "gabor", loss_f, loss_g, gap });
            if ws.free_control && seed == cfg.seeds[0] {
                // Free generators holding F's initial kernels train exactly like F.
                let wc = with_width(cfg, d);
                let f0 = Model::<T>::build(&wc.network.variant(Variant::Common, seed)?)?;
                let g0 = f0.with_free_first_layer()?;
                let fr = train_model(&wc, data, f0, Variant::Common, seed, true)?;
                let gr = train_model(&wc, data, g0, Variant::Go, seed, true)?;
                let (lf, lg) = (loss_on_s(&fr.model)?, loss_on_s(&gr.model)?);
                report.push_run(
                    &format!("free_d{d}"),
                    seed,
                    [("loss_f".to_owned(), lf), ("loss_g".to_owned(), lg), ("gap".to_owned(), (lg - lf).abs())],
                );
                rows.push(SweepRow { d1: d, seed, kind: "free_control", loss_f: lf, loss_g: lg, gap: (lg - lf).abs() });
            }
        }
    }
    report.summarize();
    let medians: Vec<f64> = ws.widths.iter().map(|d| report.median_of(&format!("g_d{d}"), "gap").unwrap_or(f64::NAN)).collect();
    for (k, w) in medians.windows(2).enumerate() {
        let (a, b) = (ws.widths[k], ws.widths[k + 1]);
        report.gate(
            &format!("gap_d{b}_vs_d{a}"),
            w[1],
            w[0] * (1.0 + ws.slack),
            false,
            "median gap at the wider net <= (1 + slack) x median gap at the narrower net",
        );
    }
    if ws.free_control {
        let worst = report
            .runs
            .iter()
            .filter(|r| r.variant.starts_with("free_"))
            .map(|r| r.metrics["gap"])
            .fold(0.0, f64::max);
        report.gate("free_control_gap", worst, 0.0, false, "Free-mix control reproduces the common net exactly");
    }
    let base: Vec<f64> = report.runs.iter().filter(|r| r.variant.starts_with("g_")).map(|r| r.metrics["loss_f"]).collect();
    report.differences.insert("baseline_loss_median".into(), median(&base));
    report.differences.insert("baseline_width".into(), base_width as f64);
    if let Some(out) = out {
        let path = out.join("sweep.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// First-layer kernels `[od, c, m, m]` of a model.
pub fn first_layer_kernels<T: Real>(model: &Model<T>) -> Result<Tensor<T>> {
    match model.layers().first() {
        Some(Layer::GoConv(g)) => Ok(g.materialize().kernels),
        Some(Layer::Conv(c)) => Ok(c.weight.clone()),
        _ => Err(Error::Core(gocnn_core::Error::InvalidConfig("first layer is not a convolution".into()))),
    }
}

fn first_layer_geometry<T: Real>(model: &Model<T>) -> (usize, usize) {
    match model.layers().first() {
        Some(Layer::GoConv(g)) => (g.padding(), g.stride()),
        Some(Layer::Conv(c)) => (c.padding, c.stride),
        _ => (0, 1),
    }
}

fn bank_of<T: Real>(kernels: &Tensor<T>) -> Result<KernelBank<T>> {
    let [od, c, m, _] = kernels.dims4("bank")?;
    let specs: Vec<GeneratorSpec<T>> = kernels.data().chunks(m * m).map(|k| GeneratorSpec::free(k.to_vec(), m)).collect();
    Ok(build_bank(&specs, od, c)?)
}

/// SHA-256 over the little-endian bytes of the given values.
pub fn params_digest<T: Real>(values: &[T]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * T::DTYPE.width());
    values.iter().for_each(|v| v.write_le(&mut bytes));
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    #[serde(flatten)]
    pub certificate: Certificate,
    pub params_digest: String,
    pub input: [usize; 2],
    pub padding: usize,
    pub stride: usize,
    pub kernels: usize,
    pub source: String,
}

impl CertifyReport {
    pub fn injective(&self) -> bool {
        self.certificate.verdict == Verdict::Injective
    }
}

/// Certify the first layer of `model` on a `size×size` input with the layer's own padding and stride.
pub fn certify_model<T: Real>(model: &Model<T>, size: usize, source: &str) -> Result<CertifyReport> {
    let kernels = first_layer_kernels(model)?;
    let (padding, stride) = first_layer_geometry(model);
    let params: Vec<T> = match model.layers().first() {
        Some(Layer::GoConv(g)) => g.raw().iter().chain(g.bias()).copied().collect(),
        Some(Layer::Conv(c)) => c.weight.data().iter().chain(&c.bias).copied().collect(),
        _ => Vec::new(),
    };
    let bank = bank_of(&kernels)?;
    Ok(CertifyReport {
        certificate: certify_bank(&bank, size, size, padding, stride)?,
        params_digest: params_digest(&params),
        input: [size, size],
        padding,
        stride,
        kernels: bank.od(),
        source: source.to_owned(),
    })
}

/// Certify the sampled bank of the injectivity construction (σ, γ ∈ {1, 2}) on 8×8 with padding 1.
pub fn certify_prop2() -> Result<CertifyReport> {
    let bank = prop2_bank(&[1.0, 2.0], &[1.0, 2.0]);
    let raw: Vec<f64> = bank.specs.iter().flat_map(|s| s.raw.iter().copied()).collect();
    Ok(CertifyReport {
        certificate: certify_bank(&bank, 8, 8, 1, 1)?,
        params_digest: params_digest(&raw),
        input: [8, 8],
        padding: 1,
        stride: 1,
        kernels: bank.od(),
        source: "prop2_bank".into(),
    })
}

/// Penultimate activations of every evaluation sample as `id,label,f0,..`.
pub fn export_features<T: Real>(model: &Model<T>, eval: &dyn BatchSource<T>, batch: usize, path: &Path) -> Result<usize> {
    let d = model.penultimate_width()?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_owned(), "label".to_owned()];
    header.extend((0..d).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    let order: Vec<usize> = (0..eval.len()).collect();
    for chunk in order.chunks(batch.max(1)) {
        let (x, labels) = eval.batch(chunk)?;
        let feats = model.penultimate(&x)?;
        for (r, (&id, label)) in chunk.iter().zip(labels).enumerate() {
            let mut row = vec![id.to_string(), label.to_string()];
            row.extend(feats.data()[r * d..(r + 1) * d].iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(eval.len())
}

/// Dump the first-layer kernels of `model` into `dir`.
pub fn inspect_kernels<T: Real>(model: &Model<T>, dir: &Path) -> Result<Vec<PathBuf>> {
    kernels::dump(&first_layer_kernels(model)?, dir)
}

/// Evaluate loaded checkpoints; variant read from the first layer.
pub fn eval_report<T: Real>(cfg: &ExperimentConfig, data: &Data<T>, models: &[(Variant, u64, &Model<T>)]) -> Result<Report> {
    let mut report = new_report::<T>("eval", cfg);
    report.seeds = models.iter().map(|m| m.1).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for &(variant, seed, model) in models {
        let e = evaluate(model, &data.eval, cfg.loss(), cfg.eval_batch_size)?;
        report.push_run(variant.as_str(), seed, eval_metrics(&e, ""));
        record_counts(&mut report, variant, model);
    }
    report.summarize();
    paired_difference(&mut report, "accuracy");
    Ok(report)
}

pub fn variant_of(config: &NetworkConfig) -> Variant {
    match config.layers.first() {
        Some(gocnn_core::LayerSpec::GoConv { .. }) => Variant::Go,
        _ => Variant::Common,
    }
}
