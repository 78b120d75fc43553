use proptest::prelude::*;

use rwre_core::corrector::{build_discrete, build_discrete_l, check_poisson};
use rwre_core::ctmc::{simulate_jump_process, JumpOptions};
use rwre_core::environment::DiscreteFamily;
use rwre_core::walk::{evolve_second_moments, sample_trajectories, LatticeDistribution, TransitionKernel};
use rwre_core::{DiscreteEnvironment, Threads};

fn family() -> impl Strategy<Value = DiscreteFamily> {
    prop_oneof![
        (0.1f64..10.0).prop_map(|value| DiscreteFamily::Constant { value }),
        (0.1f64..5.0, 0.1f64..5.0, 0.05f64..0.95).prop_map(|(a, b, p)| DiscreteFamily::IidTwoPoint {
            a,
            b,
            p
        }),
        (0.0f64..1.0, 0.5f64..3.0).prop_map(|(lo, w)| DiscreteFamily::IidUniform { lo, hi: lo + w }),
        (0.6f64..4.0).prop_map(|exponent| DiscreteFamily::IidPareto { exponent }),
    ]
}

fn medium() -> impl Strategy<Value = DiscreteEnvironment> {
    (family(), any::<u64>()).prop_map(|(f, seed)| DiscreteEnvironment::new(f, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_moves_the_medium(env in medium(), j in -1000i64..1000, k in -1000i64..1000) {
        prop_assert_eq!(env.shifted(j).conductance(k).to_bits(), env.conductance(k + j).to_bits());
    }

    #[test]
    fn kernel_rows_are_probabilities(env in medium(), k in -500i64..500) {
        let kernel = TransitionKernel::new(&env, 500);
        let (l, r) = (kernel.left(k), kernel.right(k));
        prop_assert!(l > 0.0 && r > 0.0);
        prop_assert!((l + r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_ignores_global_scale(env in medium(), s in 1e-3f64..1e3, k in -200i64..200) {
        let scaled = env.scaled(s).unwrap();
        let (a, b) = (TransitionKernel::new(&env, 200), TransitionKernel::new(&scaled, 200));
        prop_assert_eq!(a.left(k).to_bits(), b.left(k).to_bits());
    }

    #[test]
    fn evolution_conserves_mass(env in medium(), n in 1u64..200) {
        let kernel = TransitionKernel::new(&env, n);
        let mut d = LatticeDistribution::delta(n);
        for _ in 0..n {
            d = d.step(&kernel);
        }
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        prop_assert_eq!(d.escaped(), 0.0);
    }

    #[test]
    fn walk_corrector_solves_its_equation(env in medium()) {
        let table = build_discrete(&env, 400).unwrap();
        let s = check_poisson(&table, &env, 399).unwrap();
        prop_assert!(s.max_relative < 1e-9, "{:?}", s);
        prop_assert_eq!(table.value(0), Some(0.0));
        prop_assert_eq!(table.value(1), Some(0.0));
        for m in 1..400i64 {
            prop_assert!(table.value(m + 1).unwrap() >= table.value(m).unwrap());
            prop_assert!(table.value(-m - 1).unwrap() >= table.value(-m).unwrap());
        }
    }

    #[test]
    fn jump_corrector_solves_its_equation(env in medium()) {
        let table = build_discrete_l(&env, 400).unwrap();
        let s = check_poisson(&table, &env, 399).unwrap();
        prop_assert!(s.max_relative < 1e-9, "{:?}", s);
        prop_assert!((-400..=400i64).all(|m| table.value(m).unwrap() >= 0.0));
    }

    #[test]
    fn exact_moment_bounded_by_ballistic(env in medium(), n in 1u64..300) {
        let m = evolve_second_moments(&env, &[n], None).unwrap()[0];
        prop_assert!(m.value > 0.0 && m.value <= (n * n) as f64 * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn walk_threads_do_not_change_results(env in medium(), seed in any::<u64>()) {
        let serial = sample_trajectories(&env, &[10, 100], 300, seed, Threads::Fixed(1)).unwrap();
        let parallel = sample_trajectories(&env, &[10, 100], 300, seed, Threads::Fixed(4)).unwrap();
        prop_assert_eq!(serial, parallel);
    }

    #[test]
    fn jump_threads_do_not_change_results(seed in any::<u64>()) {
        let env = DiscreteEnvironment::new(DiscreteFamily::IidTwoPoint { a: 1.0, b: 2.0, p: 0.5 }, seed).unwrap();
        let run = |threads| {
            let options = JumpOptions { streams: 200, seed, threads, ..JumpOptions::default() };
            simulate_jump_process(&env, &[1.0, 10.0], &options).unwrap()
        };
        prop_assert_eq!(run(Threads::Fixed(1)), run(Threads::Fixed(4)));
    }
}
