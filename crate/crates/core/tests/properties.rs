use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use strong_hinf::exec::Exec;
use strong_hinf::levelset::{strong_hinf, NormOptions};
use strong_hinf::oracle::random_retarded;
use strong_hinf::system::DdaeSystem;
use strong_hinf::transfer::sigma1_t;

fn system(seed: u64) -> DdaeSystem {
    random_retarded(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn norm(sys: &DdaeSystem) -> f64 {
    strong_hinf(sys, &NormOptions::default()).unwrap().value
}

fn rebuild(sys: &DdaeSystem, e: f64, b: f64) -> DdaeSystem {
    DdaeSystem::new(
        sys.e() * e,
        sys.a().iter().map(|a| a * e).collect(),
        sys.b() * (b * e),
        sys.c().clone(),
        sys.delays().clone(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn value_bounds_every_frequency(seed in any::<u64>(), omegas in prop::collection::vec(0.0f64..50.0, 8)) {
        let sys = system(seed);
        let v = norm(&sys);
        for w in omegas {
            prop_assert!(sigma1_t(&sys, w) <= v * (1.0 + 1e-9));
        }
    }

    #[test]
    fn scales_with_the_input_matrix(seed in any::<u64>(), alpha in 0.1f64..10.0) {
        let sys = system(seed);
        let scaled = rebuild(&sys, 1.0, alpha);
        prop_assert!((norm(&scaled) - alpha * norm(&sys)).abs() <= 1e-8 * alpha * norm(&sys));
    }

    #[test]
    fn invariant_under_row_scaling(seed in any::<u64>(), c in 0.2f64..5.0) {
        // (cE, cA_i, cB, C) has the same transfer function
        let sys = system(seed);
        prop_assert!((norm(&rebuild(&sys, c, 1.0)) - norm(&sys)).abs() <= 1e-8 * norm(&sys));
    }

    #[test]
    fn transposed_system_has_the_same_norm(seed in any::<u64>()) {
        let sys = system(seed);
        let dual = DdaeSystem::new(
            sys.e().t().to_owned(),
            sys.a().iter().map(|a| a.t().to_owned()).collect(),
            sys.c().t().to_owned(),
            sys.b().t().to_owned(),
            sys.delays().clone(),
        )
        .unwrap();
        prop_assert!((norm(&dual) - norm(&sys)).abs() <= 1e-8 * norm(&sys));
    }

    #[test]
    fn execution_mode_does_not_change_the_result(seed in any::<u64>()) {
        let sys = system(seed);
        let a = strong_hinf(&sys, &NormOptions { exec: Exec::Sequential, ..Default::default() }).unwrap();
        let b = strong_hinf(&sys, &NormOptions { exec: Exec::Parallel, ..Default::default() }).unwrap();
        prop_assert_eq!(a.value, b.value);
        prop_assert_eq!(a.levels, b.levels);
    }
}
