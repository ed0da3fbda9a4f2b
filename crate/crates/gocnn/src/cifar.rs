//! CIFAR-10 binary batches: records of one label byte plus 3×1024 channel-planar pixels.

use std::path::{Path, PathBuf};

use gocnn_core::data::ImageDataset;

use crate::error::{Error, Result};

pub const RECORD: usize = 3073;

pub fn parse_records(bytes: &[u8], path: &Path, images: &mut Vec<u8>, labels: &mut Vec<u8>) -> Result<()> {
    if !bytes.len().is_multiple_of(RECORD) || bytes.is_empty() {
        return Err(Error::format(
            path,
            format!("length {} is not a positive multiple of the {RECORD}-byte record", bytes.len()),
        ));
    }
    for rec in bytes.chunks_exact(RECORD) {
        if rec[0] >= 10 {
            return Err(Error::format(path, format!("label byte {} outside 0..10", rec[0])));
        }
        labels.push(rec[0]);
        images.extend_from_slice(&rec[1..]);
    }
    Ok(())
}

/// Concatenate the given batch files in order.
pub fn load_cifar10_bin(paths: &[PathBuf]) -> Result<ImageDataset> {
    let (mut images, mut labels) = (Vec::new(), Vec::new());
    for p in paths {
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        parse_records(&bytes, p, &mut images, &mut labels)?;
    }
    Ok(ImageDataset::new("cifar10", [3, 32, 32], images, labels, 10)?)
}

/// `(train, test)` from the standard `data_batch_{1..5}.bin` / `test_batch.bin` layout.
pub fn load_cifar10_dir(dir: &Path) -> Result<(ImageDataset, ImageDataset)> {
    let train: Vec<PathBuf> = (1..=5).map(|k| dir.join(format!("data_batch_{k}.bin"))).collect();
    let mut tr = load_cifar10_bin(&train)?;
    let mut te = load_cifar10_bin(&[dir.join("test_batch.bin")])?;
    tr.set_name("cifar10-train");
    te.set_name("cifar10-test");
    Ok((tr, te))
}
