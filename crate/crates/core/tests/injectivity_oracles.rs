use gocnn_core::generators::{build_bank, GeneratorKind, GeneratorSpec, KernelBank};
use gocnn_core::injectivity::{
    certify_bank, operator_matrix, patch_matrix, prop2_bank, prop2_situations, situation_bank, Verdict,
};
use gocnn_core::linalg::{rank, Matrix, DEFAULT_REL_TOL};
use gocnn_core::rng::stream_rng;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

/// Rank by fraction-exact Gaussian elimination.
fn exact_rank(rows: usize, cols: usize, entries: &[i64]) -> usize {
    let mut a: Vec<Vec<BigRational>> = (0..rows)
        .map(|r| (0..cols).map(|c| BigRational::from_integer(BigInt::from(entries[r * cols + c]))).collect())
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in 0..rows {
            if r != rank && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[rank][col];
                for c in col..cols {
                    let delta = &f * &a[rank][c];
                    a[r][c] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[test]
fn svd_rank_agrees_with_exact_rank() {
    let mut rng = stream_rng(31, 0);
    for trial in 0..60 {
        let rows = rng.random_range(1..=9);
        let cols = rng.random_range(1..=9);
        // Build low-rank integer matrices as products so deficiency is common.
        let inner = rng.random_range(1..=rows.min(cols) + 1);
        let left: Vec<i64> = (0..rows * inner).map(|_| rng.random_range(-4..=4)).collect();
        let right: Vec<i64> = (0..inner * cols).map(|_| rng.random_range(-4..=4)).collect();
        let mut entries = vec![0i64; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                entries[r * cols + c] = (0..inner).map(|k| left[r * inner + k] * right[k * cols + c]).sum();
            }
        }
        let m = Matrix::from_rows(rows, cols, entries.iter().map(|&v| v as f64).collect());
        assert_eq!(
            rank(&m, DEFAULT_REL_TOL).unwrap(),
            exact_rank(rows, cols, &entries),
            "trial {trial}: {rows}x{cols} inner {inner}"
        );
    }
}

#[test]
fn prop2_bank_is_full_rank() {
    let bank = prop2_bank(&[1.0, 2.0], &[1.0, 2.0]);
    assert_eq!(bank.od(), 24);
    assert_eq!(rank(&patch_matrix(&bank), DEFAULT_REL_TOL).unwrap(), 9);
    let op = operator_matrix(&bank, 8, 8, 1, 1).unwrap();
    assert_eq!(rank(&op, DEFAULT_REL_TOL).unwrap(), 64);
    let cert = certify_bank(&bank, 8, 8, 1, 1).unwrap();
    assert_eq!(cert.verdict, Verdict::Injective);
    assert!(!cert.boundary_effect);
}

#[test]
fn first_situation_alone_is_deficient() {
    let first = [prop2_situations()[0]];
    let bank = situation_bank(&first, &[0.5, 1.0, 2.0, 3.0], &[0.5, 1.0, 2.0, 3.0]);
    assert!(rank(&patch_matrix(&bank), DEFAULT_REL_TOL).unwrap() < 9);
}

#[test]
fn adding_kernels_never_lowers_rank() {
    let base = prop2_bank(&[1.0, 2.0], &[1.0, 2.0]);
    let mut rng = stream_rng(32, 0);
    let mut specs: Vec<GeneratorSpec<f64>> = (0..24)
        .map(|o| {
            let k = base.kernels.data()[o * 9..(o + 1) * 9].to_vec();
            GeneratorSpec::free(k, 3)
        })
        .collect();
    for _ in 0..5 {
        specs.push(GeneratorSpec::init(GeneratorKind::Schmid, 3, 9, &mut rng));
    }
    let bigger = build_bank(&specs, specs.len(), 1).unwrap();
    assert_eq!(rank(&patch_matrix(&bigger), DEFAULT_REL_TOL).unwrap(), 9);
}

fn random_gabor_bank(od: usize, seed: u64) -> KernelBank<f64> {
    let mut rng = stream_rng(seed, 0);
    let specs: Vec<_> = (0..od).map(|_| GeneratorSpec::init(GeneratorKind::Gabor, 3, 9, &mut rng)).collect();
    build_bank(&specs, od, 1).unwrap()
}

#[test]
fn random_gabor_banks_reach_full_patch_rank() {
    for seed in 0..100 {
        let bank = random_gabor_bank(16, seed);
        assert_eq!(rank(&patch_matrix(&bank), DEFAULT_REL_TOL).unwrap(), 9, "seed {seed}");
    }
}

#[test]
fn mixed_bank_with_enough_gabor_kernels_certifies() {
    let mut rng = stream_rng(33, 0);
    let mut specs: Vec<GeneratorSpec<f64>> = (0..10).map(|_| GeneratorSpec::init(GeneratorKind::Gabor, 3, 9, &mut rng)).collect();
    specs.extend((0..6).map(|_| GeneratorSpec::init(GeneratorKind::Schmid, 3, 9, &mut rng)));
    let bank = build_bank(&specs, 16, 1).unwrap();
    assert_eq!(certify_bank(&bank, 8, 8, 1, 1).unwrap().verdict, Verdict::Injective);
}

#[test]
fn injective_verdict_implies_full_patch_rank() {
    for seed in 0..40 {
        let od = 1 + (seed as usize % 12);
        let cert = certify_bank(&random_gabor_bank(od, 100 + seed), 6, 6, 1, 1).unwrap();
        if cert.verdict == Verdict::Injective {
            assert_eq!(cert.patch_rank, 9);
        }
        if od < 9 {
            assert_eq!(cert.verdict, Verdict::NotInjective);
        }
    }
}

#[test]
fn rank_ignores_row_scaling_and_order() {
    let bank = random_gabor_bank(16, 7);
    let p = patch_matrix(&bank);
    let r = rank(&p, DEFAULT_REL_TOL).unwrap();
    let mut rows: Vec<Vec<f64>> = p.data.chunks(9).map(|c| c.to_vec()).collect();
    rows.reverse();
    for (k, row) in rows.iter_mut().enumerate() {
        let s = 0.25 + k as f64;
        row.iter_mut().for_each(|v| *v *= s);
    }
    let q = Matrix::from_rows(16, 9, rows.concat());
    assert_eq!(rank(&q, DEFAULT_REL_TOL).unwrap(), r);
}

#[test]
fn certification_is_reproducible() {
    let a = certify_bank(&prop2_bank(&[1.0, 2.0], &[1.0, 2.0]), 8, 8, 1, 1).unwrap();
    let b = certify_bank(&prop2_bank(&[1.0, 2.0], &[1.0, 2.0]), 8, 8, 1, 1).unwrap();
    assert_eq!(a, b);
}
