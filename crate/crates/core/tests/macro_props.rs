use proptest::prelude::*;
use recomb_core::macro_solver::{DiffusionSolver, MacroState};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mean_and_range(
        m in prop::collection::vec(-3.0f64..3.0, 8..40),
        d1 in 0.3f64..3.0,
        d2 in 0.3f64..3.0,
        dt in 1e-4f64..1e-1,
    ) {
        let solver = DiffusionSolver::new(d1, d2).unwrap();
        let start = MacroState::new(m);
        let records = solver.run_diffusion(&start, dt, 5.0 * dt, 1).unwrap();
        let scale = start.m.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let (lo, hi) = (start.min(), start.max());
        for r in &records {
            prop_assert!((r.mean() - start.mean()).abs() <= 1e-12 * scale);
            prop_assert!(r.min() >= lo - 1e-12 * scale && r.max() <= hi + 1e-12 * scale);
        }
    }

    #[test]
    fn constants_are_fixed(c in -5.0f64..5.0, n in 4usize..30, dt in 1e-4f64..1.0) {
        let solver = DiffusionSolver::new(1.0, 1.69).unwrap();
        let next = solver.diffusion_step(&MacroState::new(vec![c; n]), dt).unwrap();
        prop_assert!(next.m.iter().all(|x| *x == c));
    }
}
