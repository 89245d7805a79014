use proptest::prelude::*;

use cbs_core::basis::{OperatorBasis, PAIR_DIM};
use cbs_core::liouvillian::PairLocalGenerator;
use cbs_core::oracles::{alpha_closed_form, elastic_closed_form, kernel};
use cbs_core::{DriveConfig, PairOperator, PointSolver, C64};

fn pair_operator() -> impl Strategy<Value = PairOperator> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), PAIR_DIM).prop_map(|v| {
        PairOperator::from_iterator(v.into_iter().map(|(a, b)| C64::new(a, b)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_round_trips(x in pair_operator()) {
        let basis = OperatorBasis::get();
        let back = basis.reconstruct_pair(&basis.expand_pair(&x));
        prop_assert!((back - x).camax() < 1e-13);
    }

    #[test]
    fn expansion_is_isometric(x in pair_operator()) {
        // Hilbert-Schmidt norm equals the coefficient norm for an orthonormal basis
        let c = OperatorBasis::get().expand_pair(&x);
        let hs = (x.adjoint() * x).trace().re;
        let cn: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((hs - cn).abs() < 1e-11 * hs);
    }

    #[test]
    fn local_generator_preserves_hermiticity(
        x in pair_operator(),
        rabi in 0.0f64..50.0,
        detuning in -30.0f64..30.0,
        p1 in -3.0f64..3.0,
        p2 in -3.0f64..3.0,
    ) {
        let local = PairLocalGenerator::new(&DriveConfig::new(rabi, detuning).unwrap(), [p1, p2]);
        let h = x + x.adjoint();
        let out = local.apply(&h);
        prop_assert!((out - out.adjoint()).camax() < 1e-10 * (1.0 + rabi + detuning.abs()));
    }

    #[test]
    fn lorentzian_kernel_is_positive(w in 1e-3f64..10.0, x in -100.0f64..100.0) {
        prop_assert!(kernel(w, x) > 0.0);
        prop_assert!(kernel(w, x) <= kernel(w, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn elastic_terms_are_equal(rabi in 0.05f64..40.0, detuning in -25.0f64..25.0) {
        let d = DriveConfig::new(rabi, detuning).unwrap();
        let ib = PointSolver::new(&d).unwrap().intensities().unwrap();
        prop_assert!((ib.l_el - ib.c_el).abs() <= 1e-8 * ib.l_el);
        let want = elastic_closed_form(d.saturation(), detuning);
        prop_assert!((ib.l_el - want).abs() <= 1e-6 * want);
        prop_assert!(ib.l_inel >= -1e-15 && ib.l_tot >= ib.l_el);
    }

    #[test]
    fn resonant_enhancement_matches_closed_form(log_s in -3.0f64..3.0) {
        let s = 10f64.powf(log_s);
        let d = DriveConfig::resonant_with_saturation(s).unwrap();
        let ib = PointSolver::new(&d).unwrap().intensities().unwrap();
        prop_assert!((ib.alpha - alpha_closed_form(s)).abs() <= 1e-6 * alpha_closed_form(s));
        prop_assert!(ib.alpha > 1.0 && ib.alpha <= 2.0);
    }

    #[test]
    fn intensities_are_even_in_detuning(rabi in 0.1f64..30.0, detuning in 0.1f64..25.0) {
        let a = PointSolver::new(&DriveConfig::new(rabi, detuning).unwrap()).unwrap().intensities().unwrap();
        let b = PointSolver::new(&DriveConfig::new(rabi, -detuning).unwrap()).unwrap().intensities().unwrap();
        prop_assert!((a.l_tot - b.l_tot).abs() <= 1e-9 * a.l_tot);
        prop_assert!((a.c_tot - b.c_tot).abs() <= 1e-9 * a.l_tot);
    }

    #[test]
    fn detuning_flip_mirrors_spectrum(rabi in 0.5f64..20.0, detuning in 0.5f64..10.0, nu in -30.0f64..30.0) {
        let a = PointSolver::new(&DriveConfig::new(rabi, detuning).unwrap()).unwrap();
        let b = PointSolver::new(&DriveConfig::new(rabi, -detuning).unwrap()).unwrap();
        let (la, ca) = a.with_kernel(|k| k.densities(nu)).unwrap();
        let (lb, cb) = b.with_kernel(|k| k.densities(-nu)).unwrap();
        let scale = la.abs().max(1e-6);
        prop_assert!((la - lb).abs() <= 1e-7 * scale);
        prop_assert!((ca - cb).abs() <= 1e-7 * scale);
    }
}
