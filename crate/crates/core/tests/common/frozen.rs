//! Test-side LeNet forward with ReLU masks and pool winners frozen.

use gocnn_core::network::{Layer, Model};
use gocnn_core::Tensor;

/// LeNet forward with every ReLU mask and pool winner frozen, so the loss is a
/// smooth function of the parameters near the base point.
pub struct FrozenLenet {
    masks: [Vec<bool>; 3],
    winners: [Vec<usize>; 2],
}

fn pool_winners(a: &Tensor<f64>) -> Vec<usize> {
    let s = a.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let mut out = Vec::new();
    for b in 0..n * c {
        for r in 0..h / 2 {
            for q in 0..w / 2 {
                let mut best = b * h * w + 2 * r * w + 2 * q;
                for (dr, dq) in [(0, 1), (1, 0), (1, 1)] {
                    let k = b * h * w + (2 * r + dr) * w + 2 * q + dq;
                    if a.data()[k] > a.data()[best] {
                        best = k;
                    }
                }
                out.push(best);
            }
        }
    }
    out
}

fn gather(a: &Tensor<f64>, idx: &[usize]) -> Tensor<f64> {
    let s = a.shape();
    Tensor::from_vec(&[s[0], s[1], s[2] / 2, s[3] / 2], idx.iter().map(|&i| a.data()[i]).collect()).unwrap()
}

fn apply_mask(a: &Tensor<f64>, mask: &[bool]) -> Tensor<f64> {
    let mut out = a.clone();
    for (v, &keep) in out.data_mut().iter_mut().zip(mask) {
        if !keep {
            *v = 0.0;
        }
    }
    out
}

impl FrozenLenet {
    /// Logits, optionally recording the pattern at this point.
    pub fn run(model: &Model<f64>, x: &Tensor<f64>, frozen: Option<&FrozenLenet>) -> (Tensor<f64>, FrozenLenet) {
        use gocnn_core::ops::{conv2d_forward, fc_forward};
        let p = model.params();
        let kernels = model.go_layer().unwrap().materialize().kernels;
        let mut rec = FrozenLenet {
            masks: [vec![], vec![], vec![]],
            winners: [vec![], vec![]],
        };
        let mut stage = |a: Tensor<f64>, k: usize, pool: bool| -> Tensor<f64> {
            rec.masks[k] = a.data().iter().map(|&v| v > 0.0).collect();
            let r = apply_mask(&a, frozen.map_or(&rec.masks[k], |f| &f.masks[k]));
            if !pool {
                return r;
            }
            rec.winners[k] = pool_winners(&r);
            gather(&r, frozen.map_or(&rec.winners[k], |f| &f.winners[k]))
        };
        let weight = |k: usize| match &model.layers()[k] {
            Layer::Conv(c) => &c.weight,
            Layer::Fc(f) => &f.weight,
            _ => unreachable!(),
        };
        let a1 = conv2d_forward(x, &kernels, p[1], 1, 2).unwrap();
        let p1 = stage(a1, 0, true);
        let p2 = stage(conv2d_forward(&p1, weight(3), p[3], 1, 2).unwrap(), 1, true);
        let r3 = stage(fc_forward(&p2, weight(6), p[5]).unwrap(), 2, false);
        (fc_forward(&r3, weight(8), p[7]).unwrap(), rec)
    }
}
