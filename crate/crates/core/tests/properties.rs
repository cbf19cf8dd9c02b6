use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qmzi_core::fock::{
    moments, parity_of, subtracted_cv_state, CutoffPolicy, Parity, Sign, TwoModeFockVector,
};
use qmzi_core::metrology as m;
use qmzi_core::optics::{apply_bs, mz_evolve, BeamSplitter};
use qmzi_core::scalar::{
    db_from_squeeze, squeeze_from_db, tap_from_transmittance, z_derivatives, SqueezeSpec,
};
use qmzi_core::sweep::{format_number, SweepAxis};

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(1e-300)
    }
}

fn random_state(amps: &[(f64, f64)], dim: usize) -> TwoModeFockVector {
    let mut psi = TwoModeFockVector::zeros(dim, dim);
    let norm: f64 = amps
        .iter()
        .map(|(re, im)| re * re + im * im)
        .sum::<f64>()
        .sqrt();
    for (k, (re, im)) in amps.iter().enumerate() {
        psi.set(k / dim, k % dim, C64::new(*re, *im) / norm);
    }
    psi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn z_derivatives_positive_and_consistent(y1 in 0.01f64..0.45, order in 0usize..40) {
        let z = z_derivatives(y1, order + 1).unwrap();
        prop_assert!(z.value(order) > 0.0);
        prop_assert!(rel(z.value(0), 1.0 / (1.0 - 4.0 * y1 * y1).sqrt()) < 1e-13);
        // Z' = 4y Z³
        let z0 = z.value(0);
        prop_assert!(rel(z.value(1), 4.0 * y1 * z0.powi(3)) < 1e-12);
    }

    #[test]
    fn db_round_trip(s in 0.0f64..3.4) {
        let back = squeeze_from_db(db_from_squeeze(s)).unwrap().amplitude();
        prop_assert!((back - s).abs() <= 1e-12 * s.max(1e-300));
    }

    #[test]
    fn herald_probabilities_sum_to_one(s_db in 0.5f64..12.0, t in 0.6f64..0.99) {
        let spec = squeeze_from_db(s_db).unwrap();
        let tap = tap_from_transmittance(t, &spec).unwrap();
        let total: f64 = (0..200).map(|n| m::single_channel_probability(&spec, &tap, n).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "sum {total}");
    }

    #[test]
    fn ladder_states_match_closed_forms(y1 in 0.05f64..0.24, n in 0usize..=12, minus in any::<bool>()) {
        let spec = SqueezeSpec::from_amplitude((2.0 * y1 / 0.9f64.powi(2)).atanh()).unwrap();
        let tap = tap_from_transmittance(0.9, &spec).unwrap();
        prop_assert!(rel(tap.y1(), y1) < 1e-12);
        let sign = if minus { Sign::Minus } else { Sign::Plus };
        // n²-weighted moments need a tighter tail than the norm does.
        let policy = CutoffPolicy::tolerance(1e-15).unwrap();
        let psi = subtracted_cv_state(&tap, n, sign, &policy).unwrap();
        prop_assert!((psi.norm_sqr() - 1.0).abs() <= psi.tail_bound() + 1e-14);
        prop_assert_eq!(parity_of(&psi), Parity::of_count(n));
        let off: f64 = psi.amplitudes().iter().enumerate()
            .filter(|(k, _)| k % 2 != n % 2).map(|(_, a)| a.norm_sqr()).sum();
        prop_assert!(off < 1e-14);
        let mo = moments(&psi);
        let stats = m::channel_stats(&tap, n).unwrap();
        prop_assert!(rel(mo.mean_n, stats.mean) < 1e-10);
        prop_assert!(rel(mo.var_n, stats.variance) < 1e-10, "var {} vs {} cut {}", mo.var_n, stats.variance, psi.cutoff());
        let flipped = subtracted_cv_state(&tap, n, if minus { Sign::Plus } else { Sign::Minus }, &policy).unwrap();
        prop_assert_eq!(psi.probabilities(), flipped.probabilities());
        prop_assert!((moments(&flipped).a_squared + mo.a_squared).norm() < 1e-12);
    }

    #[test]
    fn beam_splitter_unitary_and_invertible(
        t in 0.05f64..1.0,
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36),
    ) {
        prop_assume!(amps.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3));
        let psi = random_state(&amps, 6);
        let bs = BeamSplitter::new(t).unwrap();
        let out = apply_bs(&psi, &bs);
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        let back = apply_bs(&out, &bs.inverse());
        for n1 in 0..6 {
            for n2 in 0..6 {
                prop_assert!((back.get(n1, n2) - psi.get(n1, n2)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mach_zehnder_preserves_norm(
        phase in -7.0f64..7.0,
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25),
    ) {
        prop_assume!(amps.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3));
        let out = mz_evolve(&random_state(&amps, 5), phase);
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qcr_and_detection_relations(
        s_db in 0.1f64..30.0,
        t in 0.8f64..0.99,
        n1 in 0usize..12,
        n2 in 0usize..12,
        phase in 0.05f64..3.1,
    ) {
        let spec = squeeze_from_db(s_db).unwrap();
        let tap = tap_from_transmittance(t, &spec).unwrap();
        let f = m::qfi_pair(&spec, &tap, n1, n2).unwrap();
        let q = m::qcr_bound(f).unwrap().value();
        prop_assert!((q * f.sqrt() - 1.0).abs() < 1e-12);
        let r = m::detection_sensitivity(&spec, &tap, n1, n2, phase).unwrap();
        let (a, b) = (m::mean_photons(&tap, n1).unwrap(), m::mean_photons(&tap, n2).unwrap());
        prop_assert!((r.mean_d - phase.cos() * (a - b)).abs() <= 1e-12 * (a + b));
        if n1 != n2 {
            prop_assert!(!r.dphi.is_divergent());
            prop_assert!(r.dphi.value() >= q * (1.0 - 1e-12), "detection {} below QCR {q}", r.dphi.value());
        } else {
            prop_assert!(r.dphi.is_divergent());
        }
    }

    #[test]
    fn formatted_numbers_round_trip(v in prop::num::f64::NORMAL) {
        let text = format_number(v);
        let back: f64 = text.parse().unwrap();
        prop_assert!(rel(back, v) < 1e-11, "{v} -> {text}");
        prop_assert!(!text.contains(',') && !text.contains(' '));
    }

    #[test]
    fn axis_points_stay_in_range(start in 0.0f64..10.0, width in 0.0f64..20.0, step in 0.01f64..3.0) {
        let pts = SweepAxis::s_db(start, start + width, step).points().unwrap();
        prop_assert_eq!(pts[0], start);
        prop_assert!(pts.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(*pts.last().unwrap() <= start + width + 1e-9 * step);
        prop_assert!(start + width - pts.last().unwrap() < step);
    }
}
