mod common;

use std::path::{Path, PathBuf};

use gocnn::{cifar, idx, kernels};
use gocnn_core::data::{swap_train_test, Amount};
use gocnn_core::generators::{GaborParams, GeneratorKind, GeneratorSpec};
use gocnn_core::network::{lenet, to_go_variant, Layer, Model};
use gocnn_core::GeneratorMix;

fn mnist_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var("GOCNN_MNIST_DIR").unwrap_or_else(|_| "/root/data/mnist".into()));
    dir.join(idx::TRAIN_IMAGES).exists().then_some(dir)
}

/// Independent big-endian header reader.
fn reference_header(path: &Path) -> Vec<u32> {
    let b = std::fs::read(path).unwrap();
    let ndim = b[3] as usize;
    (0..=ndim).map(|k| u32::from_be_bytes(b[4 * k..4 * k + 4].try_into().unwrap())).collect()
}

#[test]
fn real_mnist_counts_and_swap() {
    let Some(dir) = mnist_dir() else {
        eprintln!("MNIST not found; skipping");
        return;
    };
    let (train, test) = idx::load_mnist_dir(&dir).unwrap();
    assert_eq!((train.len(), test.len()), (60_000, 10_000));
    assert_eq!(train.shape(), [1, 28, 28]);
    assert_eq!(reference_header(&dir.join(idx::TRAIN_IMAGES)), vec![0x803, 60_000, 28, 28]);
    assert_eq!(reference_header(&dir.join(idx::TEST_LABELS)), vec![0x801, 10_000]);
    let raw = std::fs::read(dir.join(idx::TEST_IMAGES)).unwrap();
    assert_eq!(test.images(), &raw[16..]);

    let tenth = test.subsample(Amount::Fraction(0.1), 0, true).unwrap();
    assert_eq!(tenth.len(), 1000);
    for (full, part) in test.class_counts().iter().zip(tenth.class_counts()) {
        assert!((part as f64 - *full as f64 / 10.0).abs() <= 1.0, "{full} -> {part}");
    }
    let (a, b) = swap_train_test((train, test));
    assert_eq!((a.len(), b.len()), (10_000, 60_000));
}

#[test]
fn labels_file_passed_as_images_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fake_mnist(dir.path(), 20, 10);
    let err = idx::load_mnist_idx(&dir.path().join(idx::TRAIN_LABELS), &dir.path().join(idx::TRAIN_LABELS))
        .unwrap_err()
        .to_string();
    assert!(err.contains("magic"), "{err}");
    let err = idx::load_mnist_idx(&dir.path().join(idx::TRAIN_IMAGES), &dir.path().join(idx::TEST_LABELS))
        .unwrap_err()
        .to_string();
    assert!(err.contains("20") && err.contains("10"), "{err}");
}

#[test]
fn cifar_records() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.bin");
    let mut rec = vec![7u8];
    rec.extend((0..3072).map(|i| (i % 251) as u8));
    std::fs::write(&one, &rec).unwrap();
    let d = cifar::load_cifar10_bin(std::slice::from_ref(&one)).unwrap();
    assert_eq!((d.len(), d.shape(), d.labels()[0]), (1, [3, 32, 32], 7));
    assert_eq!(d.image(0), &rec[1..]);
    let short = dir.path().join("short.bin");
    std::fs::write(&short, &rec[..3072]).unwrap();
    assert!(cifar::load_cifar10_bin(&[short]).unwrap_err().to_string().contains("3073"));
}

fn read_csv(path: &Path) -> Vec<(usize, usize, usize, usize, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["o", "c", "i", "j", "value"]);
    r.deserialize().map(|x| x.unwrap()).collect()
}

#[test]
fn inspect_on_fresh_go_layer_reproduces_generator_values() {
    let cfg = to_go_variant(&lenet(10, 4), &GeneratorMix::HalfGaborHalfSchmid).unwrap();
    let model = Model::<f64>::build(&cfg).unwrap();
    let Layer::GoConv(layer) = &model.layers()[0] else { panic!() };
    let dir = tempfile::tempdir().unwrap();
    let written = gocnn::experiments::inspect_kernels(&model, dir.path()).unwrap();
    assert_eq!(written.len(), 1 + 32);
    let rows = read_csv(&dir.path().join(kernels::CSV_NAME));
    assert_eq!(rows.len(), 32 * 25);
    for (o, spec) in layer.specs().iter().enumerate() {
        let (k, _) = spec.materialize(false);
        for i in 0..5 {
            for j in 0..5 {
                let row = rows[o * 25 + i * 5 + j];
                assert_eq!((row.0, row.1, row.2, row.3), (o, 0, i, j));
                assert_eq!(row.4.to_bits(), k[i * 5 + j].to_bits());
            }
        }
    }
    let pgm = std::fs::read(dir.path().join("kernel_o0_c0.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n5 5\n255\n"));
    let px = &pgm[pgm.len() - 25..];
    assert_eq!((px.iter().min(), px.iter().max()), (Some(&0), Some(&255)));
}

#[test]
fn golden_gabor_kernel_in_dump() {
    let p = GaborParams {
        theta: 0.0,
        lambda: 1.0,
        psi: 0.0,
        sigma: 1.0,
        gamma: 1.0,
    };
    let spec = GeneratorSpec::<f64>::gabor(&p, 3);
    assert_eq!(spec.kind, GeneratorKind::Gabor);
    let bank = gocnn_core::generators::build_bank(&[spec], 1, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    kernels::dump(&bank.kernels, dir.path()).unwrap();
    let rows = read_csv(&dir.path().join(kernels::CSV_NAME));
    // Centre entry is exactly 1; edge-adjacent entries are exp(-1/2).
    assert_eq!(rows[4].4, 1.0);
    assert!((rows[1].4 - (-0.5f64).exp()).abs() < 1e-12);
}
