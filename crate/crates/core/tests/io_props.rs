use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonobal::io::{generate_instance, parse_instance, serialize_instance, InstanceKind};
use zonobal::verify::brute_force_min_discrepancy;
use zonobal::zonotope::PreprocessOptions;

fn kind_strategy() -> impl Strategy<Value = InstanceKind> {
    prop::sample::select(InstanceKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_instances_round_trip(kind in kind_strategy(), d in 1usize..7, extra in 0usize..5, seed: u64) {
        let m = if kind.is_cube_like() { d } else { d + extra };
        let n = 1 + (seed as usize) % d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = generate_instance(kind, d, m, n, &mut rng).unwrap();
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn arbitrary_finite_numbers_round_trip(vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 6)) {
        let text = format!(
            "3 1 1\n{}\n{}\n",
            vals[..3].iter().map(|v| zonobal::io::format_number(*v)).collect::<Vec<_>>().join(" "),
            vals[3..].iter().map(|v| zonobal::io::format_number(*v)).collect::<Vec<_>>().join(" "),
        );
        let inst = parse_instance(&text).unwrap();
        for (i, v) in vals.iter().enumerate() {
            let got = if i < 3 { inst.a[(0, i)] } else { inst.v[(0, i - 3)] };
            prop_assert_eq!(got.to_bits(), v.to_bits());
        }
    }
}

#[test]
fn generated_vectors_lie_in_the_body() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = generate_instance(InstanceKind::RandomZonotope, 8, 32, 8, &mut rng).unwrap();
        // Preprocessing rejects anything with ‖v‖ > 1 + 1e-9.
        inst.problem(PreprocessOptions::default()).unwrap();
    }
}

#[test]
fn duplicated_two_has_zero_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let inst = generate_instance(InstanceKind::Duplicated, 3, 6, 2, &mut rng).unwrap();
    let (z, fam, _) = inst.problem(PreprocessOptions::default()).unwrap();
    assert_eq!(brute_force_min_discrepancy(&z, &fam).unwrap().opt, 0.0);
}
