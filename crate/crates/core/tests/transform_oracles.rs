use gocnn_core::rng::stream_rng;
use gocnn_core::transforms::{gaussian_noise, gaussian_perturb, pad_crop_flip, random_rotate, rotate, CropDraw};
use gocnn_core::Tensor;
use rand::Rng;

/// Independent resampler: complex-number inverse rotation and tent-weight bilinear.
fn reference_rotate(img: &[f64], h: usize, w: usize, degrees: f64) -> Vec<f64> {
    let a = degrees.to_radians();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            // z = x + i·y with y pointing up; undo a counter-clockwise turn.
            let (x, y) = (c as f64 - cx, cy - r as f64);
            let (re, im) = (x * a.cos() + y * a.sin(), y * a.cos() - x * a.sin());
            let (sc, sr) = (cx + re, cy - im);
            let mut acc = 0.0;
            for rr in sr.floor() as isize..=sr.floor() as isize + 1 {
                for cc in sc.floor() as isize..=sc.floor() as isize + 1 {
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let wgt = (1.0 - (sr - rr as f64).abs()).max(0.0) * (1.0 - (sc - cc as f64).abs()).max(0.0);
                    acc += wgt * img[rr as usize * w + cc as usize];
                }
            }
            out[r * w + c] = acc;
        }
    }
    out
}

#[test]
fn rotation_matches_reference_resampler() {
    let mut rng = stream_rng(51, 0);
    for _ in 0..50 {
        let (h, w) = (rng.random_range(3..12), rng.random_range(3..12));
        let img: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
        let deg = rng.random_range(-180.0..180.0);
        let x = Tensor::from_vec(&[1, 1, h, w], img.clone()).unwrap();
        let got = rotate(&x, deg).unwrap();
        for (a, b) in got.data().iter().zip(reference_rotate(&img, h, w, deg)) {
            assert!((a - b).abs() <= 1e-6, "{h}x{w} at {deg}°: {a} vs {b}");
        }
    }
}

#[test]
fn quarter_turn_moves_deltas_exactly() {
    let n = 7;
    for r in 0..n {
        for c in 0..n {
            let mut x = Tensor::<f64>::zeros(&[1, 1, n, n]);
            x.data_mut()[r * n + c] = 1.0;
            let y = rotate(&x, 90.0).unwrap();
            // counter-clockwise: (r, c) → (n-1-c, r)
            let mut expected = vec![0.0; n * n];
            expected[(n - 1 - c) * n + r] = 1.0;
            assert_eq!(y.data(), &expected[..]);
        }
    }
}

#[test]
fn crop_offsets_are_uniform() {
    let mut rng = stream_rng(52, 2);
    let draws = 100_000;
    let mut counts = [0usize; 81];
    let mut flips = 0;
    for _ in 0..draws {
        let d = CropDraw::sample(4, &mut rng);
        counts[d.dy * 9 + d.dx] += 1;
        flips += usize::from(d.flip);
    }
    let expected = draws as f64 / 81.0;
    let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 80 degrees of freedom.
    assert!(chi2 < 112.33, "chi-square {chi2}");
    assert!((flips as f64 / draws as f64 - 0.5).abs() < 0.01);
}

#[test]
fn crop_flip_on_batch_keeps_shape_and_values() {
    let x = Tensor::from_fn(&[3, 2, 8, 8], |i| (i % 255) as f64 / 255.0);
    let draws = [CropDraw { dy: 0, dx: 8, flip: true }, CropDraw::identity(4), CropDraw { dy: 8, dx: 0, flip: false }];
    let y = pad_crop_flip(&x, 4, &draws).unwrap();
    assert_eq!(y.shape(), x.shape());
    assert_eq!(y.slice_rows(1, 1), x.slice_rows(1, 1));
    assert!(y.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn noise_statistics() {
    let mut rng = stream_rng(53, 3);
    let noise = gaussian_noise(1_000_000, 0.0, 0.3, &mut rng).unwrap();
    let n = noise.len() as f64;
    let mean = noise.iter().sum::<f64>() / n;
    let std = (noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 0.001, "mean {mean}");
    assert!((std - 0.3).abs() < 0.005, "std {std}");
}

#[test]
fn perturbations_are_seeded_and_label_free() {
    let x = Tensor::from_fn(&[4, 1, 6, 6], |i| (i as f64 * 0.1).sin().abs());
    let a = gaussian_perturb(&x, 0.0, 0.3, &mut stream_rng(1, 3)).unwrap();
    let b = gaussian_perturb(&x, 0.0, 0.3, &mut stream_rng(1, 3)).unwrap();
    assert_eq!(a, b);
    let r1 = random_rotate(&x, 90.0, &mut stream_rng(2, 3)).unwrap();
    let r2 = random_rotate(&x, 90.0, &mut stream_rng(2, 3)).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(random_rotate(&x, 0.0, &mut stream_rng(2, 3)).unwrap(), x);
}
