use homspec::estimator::relative_error;
use homspec::quadrature::Quadrature;
use homspec::statistics::{event_weights, model_coincidence, truncation_tail, BeatModel, SAME_PORT_COINCIDENCE};
use homspec::wavepackets::{
    coincidence_kernel_11, coincidence_kernel_11_expanded, integrate_over_dtau, integrate_over_dtau_numeric,
    integrate_over_tau0, integrate_over_tau0_numeric, kernel_closed_form, mode_pair, GaussianMode,
    DTAU_MARGINAL_RATIO, TAU0_MARGINAL_RATIO,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// `(sigma, delta, dtau, tau0, tau)` with offsets expressed in units of sigma.
fn kernel_args() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (0.1f64..10.0, 0.0f64..20.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0)
        .prop_map(|(s, d, a, b, c)| (s, d, a * s, b * s, c * s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_agrees_with_mode_arithmetic((s, d, dt, t0, t) in kernel_args()) {
        let (a, b) = mode_pair(s, d, dt).unwrap();
        let modes = coincidence_kernel_11(&a, &b, t0, t);
        let closed = kernel_closed_form(s, d, dt, t0, t);
        if closed > 1e-300 {
            prop_assert!(rel(modes, closed) < 1e-10, "{modes} vs {closed}");
        }
    }

    #[test]
    fn identical_modes_never_coincide(s in 0.1f64..10.0, c in -5.0f64..5.0, w in -20.0f64..20.0,
                                      t0 in -5.0f64..5.0, t in -5.0f64..5.0) {
        let m = GaussianMode::new(c * s, s, w).unwrap();
        prop_assert!(coincidence_kernel_11(&m, &m, t0 * s, t * s).abs() < 1e-15);
    }

    #[test]
    fn common_frequency_shift_cancels((s, d, dt, t0, t) in kernel_args(), w in -1e3f64..1e3) {
        let (a, b) = mode_pair(s, d, dt).unwrap();
        let a2 = GaussianMode::new(a.center_time, s, a.omega_offset + w).unwrap();
        let b2 = GaussianMode::new(b.center_time, s, b.omega_offset + w).unwrap();
        let k1 = coincidence_kernel_11_expanded(&a, &b, t0, t);
        let k2 = coincidence_kernel_11_expanded(&a2, &b2, t0, t);
        let scale = 0.25 * (a.envelope(t0 + t) * b.envelope(t0)).powi(2)
            + 0.25 * (a.envelope(t0) * b.envelope(t0 + t)).powi(2);
        prop_assert!((k1 - k2).abs() <= 1e-9 * scale + 1e-300);
    }

    #[test]
    fn model_is_even_and_bounded(t in -1e-6f64..1e-6, s in 1e-9f64..1e-7, d in 0.0f64..2e9) {
        let v = model_coincidence(t, s, d);
        prop_assert!((0.25..=0.75).contains(&v));
        prop_assert_eq!(v, model_coincidence(-t, s, d));
        prop_assert_eq!(v, model_coincidence(t, s, -d));
        prop_assert_eq!(integrate_over_dtau(s, d, t), integrate_over_dtau(s, d, -t));
        prop_assert_eq!(integrate_over_dtau(s, d, t), integrate_over_dtau(s, -d, t));
    }

    #[test]
    fn model_composes_event_classes_for_any_mu(mu in 1e-4f64..3.0, t in -5.0f64..5.0, d in 0.0f64..20.0) {
        let w = event_weights(mu);
        prop_assert_eq!(w.p11, w.p20 + w.p02);
        let composed = (w.p11 * integrate_over_dtau(1.0, d, t) + (w.p20 + w.p02) * SAME_PORT_COINCIDENCE) / w.normalizer;
        prop_assert!((composed - model_coincidence(t, 1.0, d)).abs() < 1e-14);
    }

    #[test]
    fn normalized_beat_model_matches_scaled_coincidence(t in -5.0f64..5.0, d in 0.0f64..20.0) {
        let m = BeatModel::normalized(1.0, d);
        prop_assert!((m.eval(t) - 2.0 * model_coincidence(t, 1.0, d)).abs() < 1e-14);
        prop_assert!((0.5..=1.5).contains(&m.eval(t)));
    }

    #[test]
    fn truncation_tail_is_increasing(a in 1e-4f64..2.0, b in 1e-4f64..2.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo * (1.0 + 1e-9));
        prop_assert!(truncation_tail(lo) < truncation_tail(hi));
    }

    #[test]
    fn relative_error_is_symmetric_and_non_negative(a in 0.0f64..1e9, b in 1e-3f64..1e9) {
        let e = relative_error(a, b).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, relative_error(b, a).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn marginals_match_quadrature(s in 0.1f64..10.0, d in 0.0f64..20.0, dt in -5.0f64..5.0, t in -5.0f64..5.0) {
        let (dt, t) = (dt * s, t * s);
        let q = Quadrature::default();
        let closed = integrate_over_tau0(s, d, dt, t);
        if closed > 1e-280 {
            let num = integrate_over_tau0_numeric(s, d, dt, t, &q);
            prop_assert!(rel(num / closed, TAU0_MARGINAL_RATIO) < 1e-8, "{}", num / closed);
        }
        let closed = integrate_over_dtau(s, d, t);
        if closed > 1e-280 {
            let num = integrate_over_dtau_numeric(s, d, t, &q);
            prop_assert!(rel(num / closed, DTAU_MARGINAL_RATIO) < 1e-8, "{}", num / closed);
        }
    }
}
