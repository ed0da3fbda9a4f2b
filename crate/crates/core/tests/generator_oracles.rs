mod common;

use std::f64::consts::PI;

use common::{central_diff, rel_err};
use gocnn_core::generators::{
    constrain, gabor_jacobian, gabor_kernel, schmid_jacobian, schmid_kernel, unconstrain, GaborParams,
    GeneratorKind, GeneratorSpec, SchmidParams,
};
use gocnn_core::rng::stream_rng;
use rand::Rng;

fn gabor_from(v: &[f64]) -> GaborParams {
    GaborParams {
        theta: v[0],
        psi: v[1],
        sigma: v[2],
        gamma: v[3],
        lambda: v[4],
    }
}

#[test]
fn golden_three_by_three_grid() {
    for &sigma in &[0.5, 1.0, 2.0] {
        for &gamma in &[0.5, 1.0, 2.0] {
            let p = GaborParams {
                theta: 0.0,
                psi: 0.0,
                sigma,
                gamma,
                lambda: 1.0,
            };
            let k: Vec<f64> = gabor_kernel(&p, 3);
            let s2 = 2.0 * sigma * sigma;
            let h1 = (-(1.0 + gamma * gamma) / s2).exp();
            let h2 = (-1.0 / s2).exp();
            let h3 = (-gamma * gamma / s2).exp();
            let expected = [h1, h2, h1, h3, 1.0, h3, h1, h2, h1];
            for (a, e) in k.iter().zip(expected) {
                assert!((a - e).abs() <= 1e-12, "σ={sigma} γ={gamma}: {a} vs {e}");
            }
        }
    }
}

#[test]
fn schmid_center_and_radial_symmetry() {
    let mut rng = stream_rng(11, 0);
    for _ in 0..50 {
        let p = SchmidParams {
            sigma: rng.random_range(0.3..4.0),
            tau: rng.random_range(-2.0..2.0),
        };
        for m in [3usize, 5, 7] {
            let k: Vec<f64> = schmid_kernel(&p, m);
            assert_eq!(k[(m / 2) * m + m / 2], 1.0);
            // all eight grid symmetries, compared bit-for-bit
            let at = |i: usize, j: usize| k[i * m + j];
            for i in 0..m {
                for j in 0..m {
                    let (a, b) = (m - 1 - i, m - 1 - j);
                    for v in [at(j, i), at(a, j), at(i, b), at(a, b), at(j, a), at(b, i), at(b, a)] {
                        assert_eq!(v, at(i, j));
                    }
                }
            }
        }
    }
}

#[test]
fn quarter_turn_of_theta_transposes_isotropic_kernel() {
    // With γ = 1 and ψ = 0, x' ↔ y' under θ → θ + π/2 (up to sign of the carrier argument).
    let p = GaborParams {
        theta: 0.0,
        psi: 0.0,
        sigma: 1.3,
        gamma: 1.0,
        lambda: 2.7,
    };
    let q = GaborParams { theta: PI / 2.0, ..p };
    let a: Vec<f64> = gabor_kernel(&p, 5);
    let b: Vec<f64> = gabor_kernel(&q, 5);
    for i in 0..5 {
        for j in 0..5 {
            assert!((a[i * 5 + j] - b[j * 5 + i]).abs() < 1e-12);
        }
    }
}

#[test]
fn gabor_partials_match_finite_differences() {
    let mut rng = stream_rng(12, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v = [
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(0.5..3.0),
            rng.random_range(0.3..2.0),
            rng.random_range(1.0..8.0),
        ];
        let m = [3, 5][rng.random_range(0..2)];
        let jac: Vec<f64> = gabor_jacobian(&gabor_from(&v), m);
        for e in 0..m * m {
            for t in 0..5 {
                let num = central_diff(&v, t, |p| gabor_kernel::<f64>(&gabor_from(p), m)[e]);
                worst = worst.max(rel_err(jac[e * 5 + t], num, 1e-3));
            }
        }
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}

#[test]
fn schmid_partials_match_finite_differences() {
    let mut rng = stream_rng(13, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v = [rng.random_range(0.5..3.0), rng.random_range(-2.0..2.0)];
        let m = [3, 5][rng.random_range(0..2)];
        let p = SchmidParams { sigma: v[0], tau: v[1] };
        let jac: Vec<f64> = schmid_jacobian(&p, m);
        for e in 0..m * m {
            for t in 0..2 {
                let num = central_diff(&v, t, |q| schmid_kernel::<f64>(&SchmidParams { sigma: q[0], tau: q[1] }, m)[e]);
                worst = worst.max(rel_err(jac[e * 2 + t], num, 1e-3));
            }
        }
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}

#[test]
fn raw_parameter_jacobians_match_finite_differences() {
    let mut rng = stream_rng(14, 0);
    for kind in [GeneratorKind::Gabor, GeneratorKind::Schmid, GeneratorKind::Free] {
        for _ in 0..30 {
            let m = 3;
            let spec = GeneratorSpec::<f64>::init(kind, m, 9, &mut rng);
            let (_, jac) = spec.materialize(true);
            let jac = jac.unwrap();
            let n = spec.raw.len();
            for e in 0..m * m {
                for t in 0..n {
                    let num = central_diff(&spec.raw, t, |r| {
                        GeneratorSpec::new(kind, m, r.to_vec()).unwrap().materialize(false).0[e]
                    });
                    assert!(rel_err(jac[e * n + t], num, 1e-3) < 1e-6, "{kind:?} e={e} t={t} {} {num} {:?}", jac[e * n + t], spec.raw);
                }
            }
        }
    }
}

#[test]
fn constrain_round_trip() {
    let mut rng = stream_rng(15, 0);
    for _ in 0..100 {
        let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let back = unconstrain(&constrain(&raw, GeneratorKind::Gabor), GeneratorKind::Gabor);
        for (a, b) in raw.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = unconstrain(&constrain(&raw[..2], GeneratorKind::Schmid), GeneratorKind::Schmid);
        assert!(raw[..2].iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
    }
    assert_eq!(constrain(&[0.0, 0.0, 0.0, 0.0, 0.0], GeneratorKind::Gabor)[2], 1.0);
}

#[test]
fn entries_stay_in_unit_interval() {
    let mut rng = stream_rng(16, 0);
    for _ in 0..200 {
        for kind in [GeneratorKind::Gabor, GeneratorKind::Schmid] {
            let (k, _) = GeneratorSpec::<f64>::init(kind, 5, 25, &mut rng).materialize(false);
            assert!(k.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
