use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use zonobal::zonotope::{preprocess, PreprocessOptions, VectorFamily, Zonotope};

fn random_zonotope(seed: u64, m: usize, d: usize) -> Zonotope {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Zonotope::new(DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap()
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn homogeneity(x in vec_strategy(4), lambda in -5.0..5.0f64, seed in 0u64..4) {
        let z = random_zonotope(seed, 9, 4);
        let n = z.norm(&x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let ns = z.norm(&scaled).unwrap();
        prop_assert!((ns - lambda.abs() * n).abs() <= 1e-8 * (1.0 + ns));
    }

    #[test]
    fn triangle_inequality(x in vec_strategy(4), y in vec_strategy(4), seed in 0u64..4) {
        let z = random_zonotope(seed, 9, 4);
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(z.norm(&s).unwrap() <= z.norm(&x).unwrap() + z.norm(&y).unwrap() + 1e-8);
    }

    #[test]
    fn holder_duality(x in vec_strategy(4), y in vec_strategy(4), seed in 0u64..4) {
        let z = random_zonotope(seed, 9, 4);
        let lhs: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().abs();
        prop_assert!(lhs <= z.norm(&x).unwrap() * z.polar_norm(&y).unwrap() + 1e-8);
    }

    #[test]
    fn symmetry_is_exact(x in vec_strategy(5), seed in 0u64..4) {
        let z = random_zonotope(seed, 11, 5);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(z.norm(&x).unwrap().to_bits(), z.norm(&neg).unwrap().to_bits());
    }
}

#[test]
fn certificates_attain_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..5 {
        let z = random_zonotope(seed, 12, 5);
        let x: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
        let y = z.norm_certificate(&x).unwrap();
        let inner: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs = z.norm(&x).unwrap() * z.polar_norm(&y).unwrap();
        assert!((inner - rhs).abs() <= 1e-6 * (1.0 + rhs), "{inner} vs {rhs}");
    }
}

#[test]
fn preimage_attains_the_norm() {
    let z = random_zonotope(3, 10, 4);
    let x = [0.3, -1.2, 0.7, 2.0];
    let (t, u) = z.norm_with_preimage(&x).unwrap();
    let amax = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!((amax - t).abs() < 1e-9);
    for (j, xj) in x.iter().enumerate() {
        let rec: f64 = (0..10).map(|i| z.generators()[(i, j)] * u[i]).sum();
        assert!((rec - xj).abs() < 1e-9);
    }
}

#[test]
fn rank_reduction_preserves_norms() {
    // Three generators spanning a plane in R³.
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
    let v = DMatrix::from_row_slice(2, 3, &[0.5, 0.0, 0.5, 0.0, -0.5, -0.5]);
    let (z, fam, basis) = preprocess(&a, &VectorFamily::new(v), PreprocessOptions::default()).unwrap();
    assert_eq!(z.dim(), 2);
    assert_eq!(fam.dim(), 2);

    // The full-dimensional norm is evaluated on the raw generators by
    // lifting to coefficients: ‖x‖ = min ‖u‖∞ with Aᵀu = x.
    let raw = Zonotope::new(a.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..3)
            .map(|j| (0..3).map(|i| a[(i, j)] * coeffs[i]).sum())
            .collect();
        let q = basis.basis.as_ref().unwrap();
        let reduced: Vec<f64> = (0..2).map(|c| (0..3).map(|r| q[(r, c)] * x[r]).sum()).collect();
        let back = basis.to_original(&reduced);
        for (b, xi) in back.iter().zip(&x) {
            assert!((b - xi).abs() < 1e-9);
        }
        let nr = z.norm(&reduced).unwrap();
        let nf = raw.norm(&x).unwrap();
        assert!((nr - nf).abs() < 1e-8 * (1.0 + nf), "{nr} vs {nf}");
    }
}
