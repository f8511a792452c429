use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use zonobal::coloring::{balance, build_coordinate_body, scale_profile, ColoringParams};
use zonobal::io::{generate_instance, InstanceKind};
use zonobal::verify::brute_force_min_discrepancy;
use zonobal::zonotope::{PreprocessOptions, VectorFamily, Zonotope};

fn instance(kind: InstanceKind, d: usize, seed: u64) -> (Zonotope, VectorFamily) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = generate_instance(kind, d, kind.default_m(d), d, &mut rng).unwrap();
    let (z, fam, _) = inst.problem(PreprocessOptions::default()).unwrap();
    (z, fam)
}

#[test]
fn lift_agrees_with_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for seed in 0..3 {
        let (z, fam) = instance(InstanceKind::RandomZonotope, 5, seed);
        let subset = [0, 2, 3];
        for _ in 0..100 {
            let a: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let norm = z.norm(&fam.combination(&subset, &a)).unwrap();
            let ratio: f64 = rng.random_range(0.5..1.5);
            if (ratio - 1.0).abs() < 1e-6 || norm == 0.0 {
                continue;
            }
            let s = norm / ratio;
            let lift = build_coordinate_body(&z, &fam, &subset, s).unwrap();
            assert_eq!(lift.contains(&a).unwrap(), norm <= s + 1e-7, "norm {norm} s {s}");
        }
    }
}

#[test]
fn rounds_halve_and_increments_account() {
    let params = ColoringParams::default();
    for kind in [InstanceKind::Cube, InstanceKind::SpencerRandom, InstanceKind::RandomZonotope] {
        for (d, seed) in [(6, 1), (12, 2), (20, 3)] {
            let (z, fam) = instance(kind, d, seed);
            let r = balance(&z, &fam, &params, seed).unwrap();
            assert!(r.signs.iter().all(|&s| s == 1 || s == -1));
            assert!(r.rounds <= (d as f64).log2().ceil() as usize + 1, "{kind} d={d}: {} rounds", r.rounds);
            for rec in &r.log {
                assert!(rec.active_after <= rec.active_before / 2);
                assert!(rec.increment <= rec.scale_used);
                assert!(rec.increment <= r.c_final * scale_profile(rec.active_before, d));
            }
            assert!(r.discrepancy <= r.increment_total() + 1e-6);
            let xs = r.signs_f64();
            let recomputed = z.norm(&fam.signed_sum(&xs)).unwrap();
            assert!((recomputed - r.discrepancy).abs() <= 1e-6);
        }
    }
}

#[test]
fn seeded_runs_repeat() {
    let (z, fam) = instance(InstanceKind::RandomZonotope, 16, 4);
    let params = ColoringParams::default();
    let a = balance(&z, &fam, &params, 99).unwrap();
    let b = balance(&z, &fam, &params, 99).unwrap();
    assert_eq!(a, b);
}

#[test]
fn joint_scaling_keeps_signs() {
    let (z, fam) = instance(InstanceKind::RandomZonotope, 10, 5);
    let params = ColoringParams::default();
    let base = balance(&z, &fam, &params, 3).unwrap();
    for lambda in [0.25, 2.0, 8.0] {
        let zs = z.scaled(lambda);
        let fs = VectorFamily::new(fam.vectors() * lambda);
        let r = balance(&zs, &fs, &params, 3).unwrap();
        assert_eq!(r.signs, base.signs, "lambda {lambda}");
        // The gauge of λZ at λx equals the gauge of Z at x.
        assert!((r.discrepancy - base.discrepancy).abs() <= 1e-8 * base.discrepancy.max(1.0));
        let raw_sum = fs.signed_sum(&r.signs_f64());
        let base_sum = fam.signed_sum(&base.signs_f64());
        for (a, b) in raw_sum.iter().zip(&base_sum) {
            assert!((a - lambda * b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn never_beats_the_oracle() {
    let params = ColoringParams::default();
    for seed in 0..6 {
        let kind = if seed % 2 == 0 { InstanceKind::SpencerRandom } else { InstanceKind::RandomZonotope };
        let (z, fam) = instance(kind, 6 + seed as usize, seed);
        let r = balance(&z, &fam, &params, seed).unwrap();
        let o = brute_force_min_discrepancy(&z, &fam).unwrap();
        assert!(r.discrepancy >= o.opt - 1e-8);
    }
}

#[test]
fn duplicated_pair() {
    let z = Zonotope::cube(3);
    let row = [0.2, -0.9, 0.4];
    let fam = VectorFamily::new(DMatrix::from_row_slice(2, 3, &[row, row].concat()));
    let r = balance(&z, &fam, &ColoringParams::default(), 0).unwrap();
    assert!(r.discrepancy <= zonobal::coloring::C_IMPL * r.bound);
    assert_eq!(brute_force_min_discrepancy(&z, &fam).unwrap().opt, 0.0);
}
