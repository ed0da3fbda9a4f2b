//! Command-line front end. Exit codes: 0 success, 1 a gate failed, 2 a
//! configuration or IO error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gocnn_core::network::Model;
use gocnn_core::{DType, Real};

use crate::checkpoint::{load_checkpoint, stored_dtype};
use crate::config::{parse_seeds, ExperimentConfig, Overrides, Variant};
use crate::error::{Error, Result};
use crate::experiments::{self as ex, REPORT_NAME};
use crate::report::Report;

#[derive(Debug, Parser)]
#[command(name = "gocnn", version, about = "Geometric operator CNN experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DTypeArg {
    F32,
    F64,
}

impl From<DTypeArg> for DType {
    fn from(d: DTypeArg) -> Self {
        match d {
            DTypeArg::F32 => DType::F32,
            DTypeArg::F64 => DType::F64,
        }
    }
}

/// Parsed `--seeds` value.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

fn parse_seed_list(text: &str) -> std::result::Result<SeedList, String> {
    parse_seeds(text).map(SeedList)
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seeds: comma list (0,1,2) or range (0..5).
    #[arg(long, global = true, value_parser = parse_seed_list)]
    pub seeds: Option<SeedList>,
    /// Element type for training and evaluation.
    #[arg(long, global = true, value_enum)]
    pub dtype: Option<DTypeArg>,
    /// Apply the config's `quick` overrides.
    #[arg(long, global = true)]
    pub quick: bool,
    /// A checkpoint file, or an output directory of an earlier `train` run.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Suppress progress lines on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Train the configured variants for every seed and evaluate them.
    Train,
    /// Evaluate checkpoints on the evaluation split.
    Eval,
    /// Train on the small split and evaluate on the large one.
    Generalization,
    /// Clean, rotated and Gaussian-noise accuracy of both variants.
    Adversarial,
    /// Loss gap between GO and common theory nets across widths.
    WidthSweep,
    /// Dump first-layer kernels as CSV and PGM.
    InspectKernels,
    /// Rank-certify injectivity of the first layer.
    Certify {
        /// Certify the fixed construction bank instead of a model.
        #[arg(long)]
        prop2: bool,
        /// Side of the square input used for the operator rank.
        #[arg(long, default_value_t = 8)]
        size: usize,
    },
    /// Penultimate-layer features of the evaluation split as CSV.
    ExportFeatures,
}

/// Outcome of a command: `false` when a gate failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let a = &cli.common;
    let overrides = Overrides {
        seeds: a.seeds.as_ref().map(|s| s.0.clone()),
        dtype: a.dtype.map(Into::into),
        quick: a.quick,
    };
    let cfg = match &a.config {
        Some(p) => {
            let mut c = ExperimentConfig::load(p)?;
            c.apply(&overrides);
            c.validate()?;
            Some(c)
        }
        None => None,
    };
    if let Command::Certify { prop2: true, .. } = cli.command {
        return certify_prop2(&a.out);
    }
    let dtype = match (&a.checkpoint, &cfg) {
        (Some(p), _) if p.is_file() => {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            stored_dtype(&bytes, p)?
        }
        (_, Some(c)) => c.train.dtype,
        (_, None) => overrides.dtype.unwrap_or(DType::F32),
    };
    match dtype {
        DType::F32 => execute::<f32>(cli, cfg),
        DType::F64 => execute::<f64>(cli, cfg),
    }
}

fn need_config(cfg: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    cfg.ok_or_else(|| Error::config("--config", "this command needs an experiment config"))
}

fn create_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn finish(mut report: Report, start: Instant, out: &Path) -> Result<bool> {
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.write(&out.join(REPORT_NAME))?;
    for s in &report.summary {
        println!("{:<12} {:<22} median {:.6} mean {:.6}", s.variant, s.metric, s.median, s.mean);
    }
    for g in &report.gates {
        println!(
            "gate {:<24} {} (observed {:.6}, threshold {:.6}: {})",
            g.name,
            if g.passed { "PASS" } else { "FAIL" },
            g.observed,
            g.threshold,
            g.rule
        );
    }
    for f in &report.flags {
        println!("flag {f}");
    }
    println!("report written to {}", out.join(REPORT_NAME).display());
    Ok(report.all_gates_pass())
}

/// A single checkpoint file, or every configured run under an output directory.
fn checkpoint_models<T: Real>(cfg: &ExperimentConfig, path: &Path) -> Result<Vec<(Variant, u64, Model<T>)>> {
    if path.is_dir() {
        ex::load_runs(cfg, path)
    } else {
        let m = load_checkpoint::<T>(path)?.model;
        Ok(vec![(ex::variant_of(m.config()), m.config().seed, m)])
    }
}

/// A model from `--checkpoint`, or a freshly initialised one from the config's first seed.
fn single_model<T: Real>(a: &CommonArgs, cfg: Option<&ExperimentConfig>) -> Result<Model<T>> {
    match (&a.checkpoint, cfg) {
        (Some(p), _) => Ok(load_checkpoint::<T>(p)?.model),
        (None, Some(c)) => {
            let variant = if c.variants.contains(&Variant::Go) { Variant::Go } else { Variant::Common };
            Ok(Model::build(&c.network.variant(variant, c.seeds[0])?)?)
        }
        (None, None) => Err(Error::config("--checkpoint", "give a checkpoint or a config")),
    }
}

fn execute<T: Real>(cli: &Cli, cfg: Option<ExperimentConfig>) -> Result<bool> {
    let a = &cli.common;
    let out = &a.out;
    let quiet = a.quiet;
    let start = Instant::now();
    match &cli.command {
        Command::Train => {
            let cfg = need_config(cfg)?;
            let data = ex::load_data::<T>(&cfg)?;
            create_out(out)?;
            let runs = ex::train_all(&cfg, &data, Some(out), quiet)?;
            finish(ex::train_report(&cfg, &data, &runs)?, start, out)
        }
        Command::Generalization => {
            let mut cfg = need_config(cfg)?;
            cfg.dataset.swap = true;
            let data = ex::load_data::<T>(&cfg)?;
            create_out(out)?;
            let runs = ex::train_all(&cfg, &data, Some(out), quiet)?;
            finish(ex::generalization_report(&cfg, &data, &runs)?, start, out)
        }
        Command::Eval => {
            let cfg = need_config(cfg)?;
            let ckpt = a.checkpoint.as_ref().ok_or_else(|| Error::config("--checkpoint", "eval needs a checkpoint"))?;
            let data = ex::load_data::<T>(&cfg)?;
            let models = checkpoint_models::<T>(&cfg, ckpt)?;
            create_out(out)?;
            let refs: Vec<_> = models.iter().map(|(v, s, m)| (*v, *s, m)).collect();
            finish(ex::eval_report(&cfg, &data, &refs)?, start, out)
        }
        Command::Adversarial => {
            let cfg = need_config(cfg)?;
            let data = ex::load_data::<T>(&cfg)?;
            let models = match &a.checkpoint {
                Some(dir) => {
                    let m = checkpoint_models::<T>(&cfg, dir)?;
                    create_out(out)?;
                    m
                }
                None => {
                    create_out(out)?;
                    ex::train_all(&cfg, &data, Some(out), quiet)?
                        .into_iter()
                        .map(|r| (r.variant, r.seed, r.model))
                        .collect()
                }
            };
            let refs: Vec<_> = models.iter().map(|(v, s, m)| (*v, *s, m)).collect();
            finish(ex::adversarial_report(&cfg, &data, &refs)?, start, out)
        }
        Command::WidthSweep => {
            let cfg = need_config(cfg)?;
            let data = ex::load_data::<T>(&cfg)?;
            create_out(out)?;
            finish(ex::width_sweep(&cfg, &data, Some(out), quiet)?, start, out)
        }
        Command::InspectKernels => {
            let model = single_model::<T>(a, cfg.as_ref())?;
            let dir = out.join("kernels");
            let written = ex::inspect_kernels(&model, &dir)?;
            println!("wrote {} files to {}", written.len(), dir.display());
            Ok(true)
        }
        Command::Certify { size, .. } => {
            let model = single_model::<T>(a, cfg.as_ref())?;
            let source = a.checkpoint.as_ref().map_or("fresh init".to_owned(), |p| p.display().to_string());
            let report = ex::certify_model(&model, *size, &source)?;
            write_certificate(&report, out)
        }
        Command::ExportFeatures => {
            let cfg = need_config(cfg)?;
            let data = ex::load_data::<T>(&cfg)?;
            let model = single_model::<T>(a, Some(&cfg))?;
            create_out(out)?;
            let path = out.join("features.csv");
            let n = ex::export_features(&model, &data.eval, cfg.eval_batch_size, &path)?;
            println!("wrote {n} feature rows to {}", path.display());
            Ok(true)
        }
    }
}

fn write_certificate(report: &ex::CertifyReport, out: &Path) -> Result<bool> {
    create_out(out)?;
    let path = out.join("certificate.json");
    let text = serde_json::to_string_pretty(report).expect("certificate serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    let c = &report.certificate;
    println!(
        "patch rank {}/{}, operator rank {}/{}: {}",
        c.patch_rank,
        c.required,
        c.operator_rank,
        c.operator_required,
        if report.injective() { "injective" } else { "not injective" }
    );
    Ok(report.injective())
}

fn certify_prop2(out: &Path) -> Result<bool> {
    write_certificate(&ex::certify_prop2()?, out)
}
