mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtsc_core::cases;
use rtsc_core::grid::{build_admittance, parse_case, validate_case, write_case, NetworkCase};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn admittance_is_symmetric_with_shunt_row_sums(seed in any::<u64>()) {
        let case = common::toy_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let y = build_admittance(&case).unwrap();
        let m = y.matrix();
        let n = case.n_bus();
        // shunt to ground per bus, summed over the line ends that touch it
        let mut shunt = vec![Complex64::new(0.0, 0.0); n];
        for l in &case.lines {
            shunt[case.bus_idx(l.from_bus).unwrap()] += l.shunt_admittance;
            shunt[case.bus_idx(l.to_bus).unwrap()] += l.shunt_admittance;
        }
        for i in 0..n {
            let row: Complex64 = (0..n).map(|j| m[(i, j)]).sum();
            prop_assert!((row - shunt[i]).norm() < 1e-9, "row {i}: {row} vs {}", shunt[i]);
            for j in 0..n {
                prop_assert!((m[(i, j)] - m[(j, i)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn network_power_balance_is_the_series_loss(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = common::toy_case(&mut rng);
        let y = build_admittance(&case).unwrap();
        let v: Vec<Complex64> = (0..case.n_bus())
            .map(|_| Complex64::from_polar(rng.gen_range(0.9..1.1), rng.gen_range(-0.3..0.3)))
            .collect();
        let total: f64 = y.injections(&v).iter().map(|s| s.re).sum();
        let loss: f64 = case
            .lines
            .iter()
            .map(|l| {
                let dv = v[case.bus_idx(l.from_bus).unwrap()] - v[case.bus_idx(l.to_bus).unwrap()];
                (dv * l.series_admittance).norm_sqr() * l.series_impedance().re
            })
            .sum();
        prop_assert!(total >= -1e-12);
        prop_assert!((total - loss).abs() < 1e-9 * loss.max(1.0), "{total} vs {loss}");
    }

    #[test]
    fn case_text_round_trips(seed in any::<u64>()) {
        let case = common::toy_case(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(round_trips(&case));
    }
}

/// Everything but the line admittances survives exactly; those pass
/// through r + jx and back, so they are compared to rounding.
fn round_trips(case: &NetworkCase) -> bool {
    let back = parse_case(&write_case(case)).unwrap();
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-13 * b.norm().max(1.0);
    let lines_close = back.lines.len() == case.lines.len()
        && back.lines.iter().zip(&case.lines).all(|(a, b)| {
            (a.id, a.from_bus, a.to_bus, a.rating_mva) == (b.id, b.from_bus, b.to_bus, b.rating_mva)
                && close(a.series_admittance, b.series_admittance)
                && close(a.shunt_admittance, b.shunt_admittance)
        });
    let mut same = back.clone();
    same.lines = case.lines.clone();
    lines_close && same == *case
}

#[test]
fn shipped_cases_survive_a_round_trip_and_validate() {
    for text in [cases::DESK9, cases::SMIB] {
        let case = parse_case(text).unwrap();
        assert!(validate_case(&case).passed(), "{}", validate_case(&case));
        assert!(round_trips(&case));
    }
}

#[test]
fn tripping_every_desk_line_keeps_or_islands() {
    let case = parse_case(cases::DESK9).unwrap();
    let y = build_admittance(&case).unwrap();
    let mut islanding = 0;
    for (k, l) in case.lines.iter().enumerate() {
        match y.apply_line_trip(k) {
            Ok(t) => {
                assert!(t.is_connected());
                assert!(!t.line_in_service(k));
                let restored = t.restore_line(k);
                assert!((restored.matrix() - y.matrix()).norm() < 1e-12, "line {}", l.id);
            }
            Err(_) => islanding += 1,
        }
    }
    // generator step-up branches are radial
    assert_eq!(islanding, case.generators.len());
}
