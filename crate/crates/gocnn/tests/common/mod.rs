#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gocnn::idx;
use rand::{Rng, SeedableRng};

pub fn schema() -> serde_json::Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn assert_schema_valid(report: &serde_json::Value) {
    if let Err(e) = jsonschema::validate(&schema(), report) {
        panic!("report violates schema: {e}\n{report:#}");
    }
}

/// Synthetic MNIST-shaped IDX files: digit `k` is a bright bar at row `2k+4`.
pub fn write_fake_mnist(dir: &Path, train: usize, test: usize) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let mut make = |n: usize| {
        let mut pixels = vec![0u8; n * 784];
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let k = (i % 10) as u8;
            labels.push(k);
            let row = 2 * k as usize + 4;
            for c in 4..24 {
                pixels[i * 784 + row * 28 + c] = 200 + rng.random_range(0..56u8);
            }
        }
        (pixels, labels)
    };
    std::fs::create_dir_all(dir).unwrap();
    let (p, l) = make(train);
    std::fs::write(dir.join(idx::TRAIN_IMAGES), idx::encode_images(train, 28, 28, &p)).unwrap();
    std::fs::write(dir.join(idx::TRAIN_LABELS), idx::encode_labels(&l)).unwrap();
    let (p, l) = make(test);
    std::fs::write(dir.join(idx::TEST_IMAGES), idx::encode_images(test, 28, 28, &p)).unwrap();
    std::fs::write(dir.join(idx::TEST_LABELS), idx::encode_labels(&l)).unwrap();
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> PathBuf {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_path_buf()
}

/// Small toy experiment on the theory preset.
pub fn toy_config(iterations: u64) -> serde_json::Value {
    serde_json::json!({
        "network": {"preset": "theory", "d1": 8, "generators": {"mix": "all_gabor"}},
        "dataset": {"kind": "toy", "toy_samples": 32},
        "train": {"optimizer": "adam", "lr": 0.01, "batch_size": 8, "max_iterations": iterations,
                  "loss": "mse", "dtype": "f64"},
        "seeds": [0, 1],
        "gates": {"min_go_accuracy": null, "max_accuracy_gap": null}
    })
}
