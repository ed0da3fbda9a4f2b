mod common;

use common::brute_conv;
use gocnn_core::data::{subsample_indices, Amount};
use gocnn_core::ops::conv2d_forward;
use gocnn_core::transforms::rotate;
use gocnn_core::{GaborParams, GeneratorSpec, Tensor};
use proptest::prelude::*;

fn tensor(shape: [usize; 4]) -> impl Strategy<Value = Tensor<f64>> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |v| Tensor::from_vec(&shape, v).unwrap())
}

proptest! {
    #[test]
    fn conv_is_linear_in_input(a in tensor([1, 2, 6, 6]), b in tensor([1, 2, 6, 6]), k in tensor([3, 2, 3, 3]), s in -2.0f64..2.0) {
        let zero = [0.0; 3];
        let mix = Tensor::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x + s * y).collect()).unwrap();
        let lhs = conv2d_forward(&mix, &k, &zero, 1, 1).unwrap();
        let ya = conv2d_forward(&a, &k, &zero, 1, 1).unwrap();
        let yb = conv2d_forward(&b, &k, &zero, 1, 1).unwrap();
        for ((l, p), q) in lhs.data().iter().zip(ya.data()).zip(yb.data()) {
            prop_assert!((l - (p + s * q)).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_matches_loops_with_stride(x in tensor([2, 1, 7, 5]), k in tensor([2, 1, 3, 3]), stride in 1usize..4, pad in 0usize..3) {
        let b = [0.5, -0.5];
        let fast = conv2d_forward(&x, &k, &b, stride, pad).unwrap();
        let slow = brute_conv(&x, &k, &b, stride, pad);
        for (p, q) in fast.data().iter().zip(slow.data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_turns_compose_to_identity(x in tensor([1, 2, 5, 5]), k in -4i32..4) {
        let a = 90.0 * k as f64;
        prop_assert_eq!(rotate(&rotate(&x, a).unwrap(), -a).unwrap(), x.clone());
        prop_assert_eq!(rotate(&x, 360.0).unwrap(), x);
    }

    #[test]
    fn materialize_is_idempotent(theta in -3.0f64..3.0, psi in -3.0f64..3.0, sigma in 0.2f64..4.0, gamma in 0.2f64..4.0, lambda in 0.2f64..10.0) {
        let p = GaborParams { theta, psi, sigma, gamma, lambda };
        let spec = GeneratorSpec::<f64>::gabor(&p, 5);
        let (a, _) = spec.materialize(false);
        let again = GeneratorSpec::<f64>::gabor(&GaborParams::from_raw(&spec.raw), 5);
        let (b, _) = again.materialize(false);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn stratified_subsample_within_one(labels in prop::collection::vec(0u8..5, 1..300), frac in 0.01f64..1.0, seed in 0u64..1000) {
        let idx = subsample_indices(&labels, 5, Amount::Fraction(frac), seed, true).unwrap();
        let n = labels.len() as f64;
        prop_assert_eq!(idx.len(), (frac * n).round() as usize);
        for class in 0..5u8 {
            let have = labels.iter().filter(|&&l| l == class).count() as f64;
            let got = idx.iter().filter(|&&i| labels[i] == class).count() as f64;
            let ideal = have * idx.len() as f64 / n;
            prop_assert!((got - ideal).abs() <= 1.0, "class {} got {} ideal {}", class, got, ideal);
        }
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }
}
