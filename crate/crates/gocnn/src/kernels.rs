//! Kernel dumps: one CSV with a row per entry (`o,c,i,j,value`) and one
//! binary 8-bit PGM per `(o, c)` slice, min-max scaled within the slice.

use std::path::{Path, PathBuf};

use gocnn_core::{Real, Tensor};

use crate::error::{Error, Result};

pub const CSV_NAME: &str = "kernels.csv";

fn dims(kernels: &Tensor<impl Real>) -> Result<[usize; 4]> {
    Ok(kernels.dims4("kernel dump")?)
}

/// Write `kernels` (`[od, c, m, m]`) as CSV. Values use the shortest
/// representation that parses back to the same float.
pub fn write_csv<T: Real>(kernels: &Tensor<T>, path: &Path) -> Result<()> {
    let [od, c, m, _] = dims(kernels)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["o", "c", "i", "j", "value"])?;
    for o in 0..od {
        for ch in 0..c {
            for i in 0..m {
                for j in 0..m {
                    let v = kernels.at4(o, ch, i, j);
                    w.write_record([o.to_string(), ch.to_string(), i.to_string(), j.to_string(), v.to_string()])?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Binary PGM of one `rows×cols` slice. A constant slice maps to mid-grey.
pub fn pgm<T: Real>(values: &[T], rows: usize, cols: usize) -> Vec<u8> {
    let lo = values.iter().fold(f64::INFINITY, |a, v| a.min(v.to_f64_lossy()));
    let hi = values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.to_f64_lossy()));
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(values.iter().map(|v| {
        if hi > lo {
            (255.0 * (v.to_f64_lossy() - lo) / (hi - lo)).round() as u8
        } else {
            128
        }
    }));
    out
}

/// Dump every slice of `kernels` into `dir`: `kernels.csv` plus
/// `kernel_o{o}_c{c}.pgm`. Returns the paths written.
pub fn dump<T: Real>(kernels: &Tensor<T>, dir: &Path) -> Result<Vec<PathBuf>> {
    let [od, c, m, n] = dims(kernels)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(CSV_NAME);
    write_csv(kernels, &csv_path)?;
    let mut written = vec![csv_path];
    let slice = m * n;
    for o in 0..od {
        for ch in 0..c {
            let at = (o * c + ch) * slice;
            let path = dir.join(format!("kernel_o{o}_c{ch}.pgm"));
            std::fs::write(&path, pgm(&kernels.data()[at..at + slice], m, n)).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
