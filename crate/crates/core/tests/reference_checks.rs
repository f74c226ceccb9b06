//! Checks of the level-set machinery against brute-force references.

use strong_hinf::asymptotic::{strong_norm_ta, AsymOptions};
use strong_hinf::discretize::discretize;
use strong_hinf::exec::Exec;
use strong_hinf::fixtures::{self, TABLE1};
use strong_hinf::gradients::finite_diff_check;
use strong_hinf::interconnect::{closed_loop_template, ControllerStructure};
use strong_hinf::levelset::{crossing_frequencies, prepare, strong_hinf, Branch, NormOptions};
use strong_hinf::oracle::{bb_bisection, dense_hinf, dense_ta, random_ode, random_retarded, DenseSweepSpec};
use strong_hinf::system::compute_nullspaces;
use strong_hinf::transfer::{log_space, sigma1_t, sweep};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pencil_crossings_match_dense_sign_changes() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid = log_space(1e-3, 1e3, 20_000);
    for case in 0..20 {
        let sys = random_retarded(&mut rng);
        let vals: Vec<f64> = grid.iter().map(|&w| sigma1_t(&sys, w)).collect();
        let peak = vals.iter().copied().fold(0.0, f64::max);
        let dsys = discretize(&sys, 40).unwrap();
        for frac in [rng.random_range(0.3..0.6), rng.random_range(0.6..0.8), rng.random_range(0.8..0.98)] {
            let xi = peak * frac;
            let crossings = crossing_frequencies(&dsys, xi, 1e-7).unwrap();
            for i in 0..grid.len() - 1 {
                let (a, b) = (vals[i] - xi, vals[i + 1] - xi);
                if a.signum() == b.signum() || a.abs() <= 1e-5 || b.abs() <= 1e-5 {
                    continue;
                }
                let (lo, hi) = (grid[i], grid[i + 1]);
                let slack = 1e-6 * hi;
                assert!(
                    crossings.iter().any(|&w| w >= lo - slack && w <= hi + slack),
                    "case {case}: sign change of sigma_1 - {xi} in [{lo}, {hi}] missed; pencil crossings {crossings:?}"
                );
            }
        }
    }
}

#[test]
fn table1_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let structure = ControllerStructure::static_gain(1, 2);
    let opts = NormOptions { exec: Exec::Sequential, ..Default::default() };
    let mut checked = 0;
    let mut draws = 0;
    while checked < 20 {
        draws += 1;
        assert!(draws < 400, "could not find 20 smooth stable points");
        let (h, k0, _) = TABLE1[rng.random_range(0..7)];
        let p = [k0[0] + rng.random_range(-0.5..0.5), k0[1] + rng.random_range(-0.5..0.5)];
        let template = closed_loop_template(&fixtures::table1_plant(h), &structure).unwrap();
        let Ok(bases) = prepare(&template.substitute(&p).unwrap()) else { continue };
        let Ok(chk) = finite_diff_check(&template, &bases, &p, 1e-6, &opts) else { continue };
        if !chk.smooth {
            continue;
        }
        assert!(chk.relative_error <= 1e-5, "h = {h}, K = {p:?}: {chk:?}");
        checked += 1;
    }
}

#[test]
fn delay_free_systems_match_hamiltonian_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..10 {
        let sys = random_ode(&mut rng);
        let cert = strong_hinf(&sys, &NormOptions::default()).unwrap();
        let reference = bb_bisection(&sys, 1e-12).unwrap();
        assert_eq!(cert.ta_norm, 0.0, "case {case}");
        assert_eq!(cert.branch, Branch::Frequency, "case {case}");
        assert!((cert.value - reference).abs() <= 1e-6 * reference.max(1.0), "case {case}: {} vs {reference}", cert.value);
    }
}

#[test]
fn value_dominates_dense_sweep_on_fixtures() {
    let spec = DenseSweepSpec { points: 10_000, ..Default::default() };
    let mut systems = vec![
        ("neutral1(1,2)", fixtures::neutral1(1.0, 2.0), true),
        ("neutral1(0.99,2)", fixtures::neutral1(0.99, 2.0), true),
        ("neutral1(1,1)", fixtures::neutral1(1.0, 1.0), true),
        ("scalar_lag", fixtures::scalar_lag(), true),
        ("delayed_scalar", fixtures::delayed_scalar(0.5), true),
    ];
    for (h, k, _) in TABLE1 {
        systems.push(("table1", fixtures::table1_closed_loop(h, &k), h < 0.75));
    }
    for (name, sys, stable) in systems {
        let opts = NormOptions { check_stability: stable, ..Default::default() };
        let cert = strong_hinf(&sys, &opts).unwrap();
        let (lower, w) = dense_hinf(&sys, &spec, Exec::Parallel).unwrap();
        assert!(cert.value >= lower - 1e-6, "{name}: {} < dense {lower} at {w}", cert.value);
    }
}

#[test]
fn doubling_the_order_leaves_the_value_unchanged() {
    let systems = [
        fixtures::neutral1(1.0, 2.0),
        fixtures::table1_closed_loop(0.1, &TABLE1[0].1),
        fixtures::table1_closed_loop(0.5, &TABLE1[4].1),
    ];
    for sys in systems {
        let a = strong_hinf(&sys, &NormOptions { order: 20, ..Default::default() }).unwrap();
        let b = strong_hinf(&sys, &NormOptions { order: 40, ..Default::default() }).unwrap();
        assert!((a.value - b.value).abs() <= 1e-6 * a.value, "{} vs {}", a.value, b.value);
    }
}

#[test]
fn strong_norm_is_continuous_in_the_delays() {
    let a = strong_hinf(&fixtures::neutral1(1.0, 2.0), &NormOptions::default()).unwrap();
    let b = strong_hinf(&fixtures::neutral1(0.99, 2.0), &NormOptions::default()).unwrap();
    assert!((a.value - b.value).abs() <= 0.05, "{} vs {}", a.value, b.value);

    // the plain responses separate at high frequency
    let omegas = log_space(20.0, 200.0, 2000);
    let sa = sweep(&fixtures::neutral1(1.0, 2.0), &omegas, 1, Exec::Parallel);
    let sb = sweep(&fixtures::neutral1(0.99, 2.0), &omegas, 1, Exec::Parallel);
    let gap = sa.sigma[0].iter().zip(&sb.sigma[0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap > 0.2, "sweeps differ by only {gap}");
}

#[test]
fn asymptotic_norm_of_neutral1_is_sixteen_sevenths() {
    for (t1, t2) in [(1.0, 2.0), (0.99, 2.0)] {
        let sys = fixtures::neutral1(t1, t2);
        let bases = compute_nullspaces(&sys);
        let r = strong_norm_ta(&sys, &bases, &AsymOptions::default()).unwrap();
        assert!((r.value - 16.0 / 7.0).abs() <= 1e-8, "{}", r.value);
        let grid = dense_ta(&sys, &bases, &DenseSweepSpec::default(), Exec::Parallel).unwrap();
        assert!((grid - r.value).abs() <= 1e-8);

        let cert = strong_hinf(&sys, &NormOptions::default()).unwrap();
        let s = sweep(&sys, &log_space(1e-2, 1e3, 4000), 1, Exec::Parallel);
        let (_, top) = s.max_sigma1().unwrap();
        assert!(top <= cert.value.max(16.0 / 7.0) + 1e-9);
    }
}
