use proptest::prelude::*;
use superres::overlap::{calculus_at, delta, delta_derivative};
use superres::qfi::{qfi_at, qfi_closed_form, qfi_general, solve_g};
use superres::spade::{mode_fractions, spade_cfi_bound, spade_covariance};
use superres::{Block, CovBlock, Psf, SceneParams};

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn noise() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), log_uniform(1e-3, 10.0)]
}

fn scene() -> impl Strategy<Value = SceneParams<f64>> {
    (log_uniform(1e-3, 8.0), log_uniform(0.2, 5.0), 0.05f64..0.5, log_uniform(1e-4, 1e4), noise()).prop_map(
        |(s_over_sigma, sigma, eta, x, nn)| SceneParams::from_signal(s_over_sigma * sigma, sigma, eta, x, nn),
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn overlap_normalised_and_even(sigma in log_uniform(0.1, 10.0)) {
        let g = Psf::gaussian(sigma).unwrap();
        prop_assert!((delta(&g, 0.0).unwrap() - 1.0).abs() <= 1e-10);
        prop_assert!(delta_derivative(&g, 0.0, 1).unwrap().abs() <= 1e-15);
        let beta0 = -delta_derivative(&g, 0.0, 2).unwrap();
        prop_assert!(beta0 > 0.0);
        prop_assert!((beta0 - g.dk2()).abs() <= 1e-12 * g.dk2());
    }

    #[test]
    fn calculus_is_pure(s in log_uniform(1e-4, 20.0), eta in 0.01f64..0.5) {
        let g = Psf::gaussian(1.0).unwrap();
        prop_assert_eq!(calculus_at(&g, s, eta).unwrap(), calculus_at(&g, s, eta).unwrap());
    }

    #[test]
    fn qfi_blocks_nonnegative(p in scene()) {
        let r = qfi_at(&Psf::gaussian(p.sigma).unwrap(), &p).unwrap();
        prop_assert!(r.h_plus >= 0.0 && r.h_minus >= 0.0);
        prop_assert_eq!(r.h_total, r.h_plus + r.h_minus);
    }

    #[test]
    fn solver_matches_closed_form(p in scene()) {
        let oc = calculus_at(&Psf::gaussian(p.sigma).unwrap(), p.s, p.eta).unwrap();
        let a = qfi_closed_form(&p, &oc).unwrap().h_total;
        let b = qfi_general(&p, &oc).unwrap().h_total;
        prop_assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
    }

    #[test]
    fn g_equation_satisfied(p in scene()) {
        let oc = calculus_at(&Psf::gaussian(p.sigma).unwrap(), p.s, p.eta).unwrap();
        for label in [Block::Plus, Block::Minus] {
            let cov = CovBlock::thermal(&p, &oc, label);
            prop_assert!(cov.uncertainty_margin() >= -1e-12);
            let g = solve_g(&cov).unwrap();
            prop_assert!(cov.g_equation_residual(&g).amax() <= 1e-10 * cov.dv.amax());
        }
    }

    #[test]
    fn spade_covariance_structure(p in scene(), q in 1usize..20) {
        let c = spade_covariance(&p, q).unwrap();
        prop_assert_eq!(&c, &c.transpose());
        for i in 0..q {
            for j in 0..q {
                if (i + j) % 2 == 1 {
                    prop_assert_eq!(c[(i, j)], 0.0);
                }
            }
        }
        let scale = c.amax().max(f64::MIN_POSITIVE);
        prop_assert!(c.symmetric_eigenvalues().min() >= -1e-12 * scale);
        prop_assert!(mode_fractions(&p, q).sum() <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn bound_below_qfi(
        s in log_uniform(1e-3, 1.0),
        x in log_uniform(1e-2, 1e4),
        nn in log_uniform(1e-3, 1.0),
        dark in prop_oneof![Just(0.0), log_uniform(1e-3, 0.1)],
    ) {
        let p = SceneParams::from_signal(s, 1.0, 0.5, x, nn).with_dark(dark);
        let f = spade_cfi_bound(&p, 15).unwrap();
        let h = qfi_at(&Psf::gaussian(1.0).unwrap(), &p).unwrap().h_total;
        prop_assert!(f <= h * (1.0 + 1e-9), "F = {f}, H = {h}");
    }

    #[test]
    fn more_modes_more_information(s in log_uniform(1e-3, 1.0), x in log_uniform(1e-2, 1e3)) {
        let p = SceneParams::from_signal(s, 1.0, 0.5, x, 0.01);
        let mut last = 0.0;
        for q in 1..=20 {
            let f = spade_cfi_bound(&p, q).unwrap();
            prop_assert!(f >= last * (1.0 - 1e-10));
            last = f;
        }
    }

    #[test]
    fn single_precision_tracks_double(s in log_uniform(1e-2, 5.0), x in log_uniform(1e-2, 1e2), nn in log_uniform(1e-2, 1.0)) {
        let h64 = qfi_at(&Psf::gaussian(1.0).unwrap(), &SceneParams::from_signal(s, 1.0, 0.5, x, nn)).unwrap().h_total;
        let p32 = SceneParams::<f32>::from_signal(s as f32, 1.0, 0.5, x as f32, nn as f32);
        let h32 = qfi_at(&Psf::<f32>::gaussian(1.0).unwrap(), &p32).unwrap().h_total;
        prop_assert!(((h32 as f64 - h64) / h64).abs() < 1e-3, "{h32} vs {h64}");
    }
}
