//! Little-endian binary checkpoints.
//!
//! ```text
//! "GOCK" | u32 version | u64 entry count
//! per entry: u16 name length | name | u8 dtype tag | u8 rank | rank × u64 extent | payload
//! ```
//!
//! Dtype tags: 0 = f32, 1 = f64, 2 = u64, 3 = u8. The network config travels
//! as the JSON bytes of entry `__config__`; parameters use registry names;
//! optimizer buffers, counters and RNG words use the `opt.`, `trainer.` and
//! `rng.` prefixes.

use std::path::Path;

use gocnn_core::network::{Model, NetworkConfig};
use gocnn_core::optim::{OptState, TrainConfig};
use gocnn_core::rng::{export_state, import_state};
use gocnn_core::scalar::{DType, Real};
use gocnn_core::train::Trainer;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GOCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U64(Vec<u64>),
    U8(Vec<u8>),
}

impl Data {
    fn tag(&self) -> u8 {
        match self {
            Data::F32(_) => 0,
            Data::F64(_) => 1,
            Data::U64(_) => 2,
            Data::U8(_) => 3,
        }
    }

    fn len(&self) -> usize {
        match self {
            Data::F32(v) => v.len(),
            Data::F64(v) => v.len(),
            Data::U64(v) => v.len(),
            Data::U8(v) => v.len(),
        }
    }

    fn from_real<T: Real>(v: &[T]) -> Self {
        match T::DTYPE {
            DType::F32 => Data::F32(v.iter().map(|x| x.to_f64_lossy() as f32).collect()),
            DType::F64 => Data::F64(v.iter().map(|x| x.to_f64_lossy()).collect()),
        }
    }

    /// Exact conversion back to `T`; `None` when the stored width differs.
    fn to_real<T: Real>(&self) -> Option<Vec<T>> {
        match (self, T::DTYPE) {
            (Data::F32(v), DType::F32) => Some(v.iter().map(|&x| T::from_f64_lossy(x as f64)).collect()),
            (Data::F64(v), DType::F64) => Some(v.iter().map(|&x| T::from_f64_lossy(x)).collect()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Data,
}

impl Entry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Data) -> Self {
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

pub fn encode(entries: &[Entry]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for e in entries {
        out.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.push(e.data.tag());
        out.push(e.shape.len() as u8);
        for &d in &e.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &e.data {
            Data::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Data::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Data::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Data::U8(v) => out.extend_from_slice(v),
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(
                self.path,
                format!(
                    "truncated reading {what}: need {n} bytes at offset {}, file has {}",
                    self.at,
                    self.bytes.len()
                ),
            )
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<Entry>> {
    let mut r = Reader { bytes, at: 0, path };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(path, format!("bad magic {magic:?}, expected \"GOCK\"")));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}, expected {VERSION}")));
    }
    let count = r.u64("entry count")?;
    let mut entries = Vec::new();
    for k in 0..count {
        let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(r.take(len, "entry name")?)
            .map_err(|_| Error::format(path, format!("entry {k}: name is not UTF-8")))?
            .to_owned();
        let head = r.take(2, "dtype and rank")?;
        let (tag, rank) = (head[0], head[1] as usize);
        let shape: Vec<usize> = (0..rank)
            .map(|_| r.u64("extent").map(|v| v as usize))
            .collect::<Result<_>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format(path, format!("entry {name}: extents overflow")))?;
        let data = match tag {
            0 => Data::F32(r.take(n.saturating_mul(4), &name)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            1 => Data::F64(r.take(n.saturating_mul(8), &name)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            2 => Data::U64(r.take(n.saturating_mul(8), &name)?.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect()),
            3 => Data::U8(r.take(n, &name)?.to_vec()),
            t => return Err(Error::format(path, format!("entry {name}: unknown dtype tag {t}"))),
        };
        if entries.iter().any(|e: &Entry| e.name == name) {
            return Err(Error::format(path, format!("duplicate entry {name}")));
        }
        entries.push(Entry { name, shape, data });
    }
    if r.at != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes after the last entry", bytes.len() - r.at)));
    }
    Ok(entries)
}

fn model_entries<T: Real>(model: &Model<T>) -> Vec<Entry> {
    let config = serde_json::to_vec(model.config()).expect("config serializes");
    let mut out = vec![Entry::new("__config__", vec![config.len()], Data::U8(config))];
    for (info, values) in model.param_registry().into_iter().zip(model.params()) {
        out.push(Entry::new(info.name, info.shape, Data::from_real(values)));
    }
    out
}

fn trainer_entries<T: Real>(model: &Model<T>, t: &Trainer<T>) -> Vec<Entry> {
    let cfg = serde_json::to_vec(&t.cfg).expect("train config serializes");
    let mut out = vec![
        Entry::new("__train__", vec![cfg.len()], Data::U8(cfg)),
        Entry::new("opt.step", vec![1], Data::U64(vec![t.opt.step])),
        Entry::new("trainer.epoch", vec![1], Data::U64(vec![t.epoch])),
        Entry::new("trainer.iteration", vec![1], Data::U64(vec![t.iteration])),
        Entry::new("rng.shuffle", vec![7], Data::U64(export_state(&t.shuffle_rng).to_vec())),
        Entry::new("rng.augment", vec![7], Data::U64(export_state(&t.augment_rng).to_vec())),
    ];
    for ((info, first), second) in model.param_registry().into_iter().zip(&t.opt.first).zip(&t.opt.second) {
        out.push(Entry::new(format!("opt.first.{}", info.name), info.shape.clone(), Data::from_real(first)));
        out.push(Entry::new(format!("opt.second.{}", info.name), info.shape, Data::from_real(second)));
    }
    out
}

/// Serialize a model and, optionally, the training state needed to resume.
pub fn checkpoint_bytes<T: Real>(model: &Model<T>, trainer: Option<&Trainer<T>>) -> Vec<u8> {
    let mut entries = model_entries(model);
    if let Some(t) = trainer {
        entries.extend(trainer_entries(model, t));
    }
    encode(&entries)
}

/// Write through a temporary sibling and rename, so readers never see a partial file.
pub fn save_checkpoint<T: Real>(model: &Model<T>, trainer: Option<&Trainer<T>>, path: &Path) -> Result<()> {
    let tmp = path.with_extension("ckpt.partial");
    std::fs::write(&tmp, checkpoint_bytes(model, trainer)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn find<'a>(entries: &'a [Entry], name: &str, path: &Path) -> Result<&'a Entry> {
    entries
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::format(path, format!("missing entry {name}")))
}

fn u64s(entries: &[Entry], name: &str, len: usize, path: &Path) -> Result<Vec<u64>> {
    match &find(entries, name, path)?.data {
        Data::U64(v) if v.len() == len => Ok(v.clone()),
        _ => Err(Error::format(path, format!("entry {name} must hold {len} u64 values"))),
    }
}

fn reals<T: Real>(entries: &[Entry], name: &str, expect_len: usize, path: &Path) -> Result<Vec<T>> {
    let e = find(entries, name, path)?;
    if e.data.len() != expect_len {
        return Err(Error::format(
            path,
            format!("entry {name} holds {} values, model expects {expect_len}", e.data.len()),
        ));
    }
    e.data.to_real::<T>().ok_or_else(|| {
        Error::format(
            path,
            format!("entry {name} is stored with dtype tag {}, requested {:?}", e.data.tag(), T::DTYPE),
        )
    })
}

fn json_entry<V: serde::de::DeserializeOwned>(entries: &[Entry], name: &str, path: &Path) -> Result<V> {
    match &find(entries, name, path)?.data {
        Data::U8(bytes) => serde_json::from_slice(bytes).map_err(|source| Error::Json {
            path: path.into(),
            source,
        }),
        _ => Err(Error::format(path, format!("entry {name} must be u8 JSON bytes"))),
    }
}

/// Element width of the parameters stored in a checkpoint.
pub fn stored_dtype(bytes: &[u8], path: &Path) -> Result<DType> {
    let entries = decode(bytes, path)?;
    entries
        .iter()
        .find_map(|e| match e.data {
            Data::F32(_) => Some(DType::F32),
            Data::F64(_) => Some(DType::F64),
            _ => None,
        })
        .ok_or_else(|| Error::format(path, "no parameter entries"))
}

pub struct Loaded<T> {
    pub model: Model<T>,
    pub trainer: Option<Trainer<T>>,
}

pub fn load_checkpoint_bytes<T: Real>(bytes: &[u8], path: &Path) -> Result<Loaded<T>> {
    let entries = decode(bytes, path)?;
    let config: NetworkConfig = json_entry(&entries, "__config__", path)?;
    let mut model = Model::<T>::build(&config)?;
    let registry = model.param_registry();
    let values: Vec<Vec<T>> = registry
        .iter()
        .map(|info| reals(&entries, &info.name, info.shape.iter().product(), path))
        .collect::<Result<_>>()?;
    model.load_params(&values)?;
    let trainer = if entries.iter().any(|e| e.name == "__train__") {
        let cfg: TrainConfig = json_entry(&entries, "__train__", path)?;
        let sizes: Vec<usize> = registry.iter().map(|i| i.shape.iter().product()).collect();
        let mut opt = OptState::<T>::new(&sizes);
        opt.step = u64s(&entries, "opt.step", 1, path)?[0];
        for (k, info) in registry.iter().enumerate() {
            opt.first[k] = reals(&entries, &format!("opt.first.{}", info.name), sizes[k], path)?;
            opt.second[k] = reals(&entries, &format!("opt.second.{}", info.name), sizes[k], path)?;
        }
        let rng = |name: &str| -> Result<_> {
            let w = u64s(&entries, name, 7, path)?;
            Ok(import_state(&w.try_into().expect("seven words")))
        };
        Some(Trainer {
            cfg,
            opt,
            shuffle_rng: rng("rng.shuffle")?,
            augment_rng: rng("rng.augment")?,
            epoch: u64s(&entries, "trainer.epoch", 1, path)?[0],
            iteration: u64s(&entries, "trainer.iteration", 1, path)?[0],
        })
    } else {
        None
    };
    Ok(Loaded { model, trainer })
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Loaded<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_checkpoint_bytes(&bytes, path)
}
