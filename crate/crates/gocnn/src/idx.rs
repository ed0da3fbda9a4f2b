//! MNIST IDX reader (and a writer, used to build fixtures).
//!
//! Layout: big-endian `u32` magic `0x00000803` (images) or `0x00000801`
//! (labels), one big-endian `u32` per dimension, then raw `u8` payload.

use std::path::Path;

use gocnn_core::data::ImageDataset;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parse an image file into `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0).ok_or_else(|| Error::format(path, "file shorter than the 4-byte magic"))?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            path,
            format!("bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x} (IDX images)"),
        ));
    }
    let dims: Vec<usize> = (0..3)
        .map(|k| be_u32(bytes, 4 + 4 * k).map(|v| v as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::format(path, "header truncated before the three dimensions"))?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let expected = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "payload holds {} bytes, header {n}x{rows}x{cols} needs {expected}",
                payload.len()
            ),
        ));
    }
    Ok((n, rows, cols, payload.to_vec()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0).ok_or_else(|| Error::format(path, "file shorter than the 4-byte magic"))?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            path,
            format!("bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x} (IDX labels)"),
        ));
    }
    let n = be_u32(bytes, 4).ok_or_else(|| Error::format(path, "header truncated before the count"))? as usize;
    let payload = &bytes[8..];
    if payload.len() != n {
        return Err(Error::format(
            path,
            format!("payload holds {} bytes, header count needs {n}", payload.len()),
        ));
    }
    Ok(payload.to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Load an image/label file pair as a 10-class single-channel dataset.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<ImageDataset> {
    let (n, rows, cols, pixels) = parse_images(&read(images)?, images)?;
    let labels_v = parse_labels(&read(labels)?, labels)?;
    if labels_v.len() != n {
        return Err(Error::format(
            labels,
            format!("{} labels for {n} images in {}", labels_v.len(), images.display()),
        ));
    }
    let name = images
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mnist".into());
    ImageDataset::new(name, [1, rows, cols], pixels, labels_v, 10).map_err(|e| Error::format(labels, e.to_string()))
}

/// Canonical file names inside an MNIST directory.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// `(train, test)` from a directory holding the four canonical files.
pub fn load_mnist_dir(dir: &Path) -> Result<(ImageDataset, ImageDataset)> {
    let mut train = load_mnist_idx(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?;
    let mut test = load_mnist_idx(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?;
    train.set_name("mnist-train");
    test.set_name("mnist-test");
    Ok((train, test))
}

pub fn encode_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
