use proptest::prelude::*;
use rtsc_core::cases;
use rtsc_core::dynamics::{classify_stability, run_tds, FaultEvent, OperatingPoint, SimConfig, DEFAULT_INSTABILITY_SPREAD};
use rtsc_core::error::Error;
use rtsc_core::grid::{parse_case, NetworkCase};
use rtsc_core::scenario::Scenario;
use rtsc_core::sime::{
    build_constraint, estimate_cct, evaluate_margin, group_by_largest_gap, trajectory_sensitivity, MarginClass, DEFAULT_STEP_FRACTION,
    MARGIN_TOL,
};

fn smib() -> (NetworkCase, OperatingPoint, Scenario, FaultEvent) {
    let case = parse_case(cases::SMIB).unwrap();
    let mut op = OperatingPoint::flat(&case, vec![80.0, -80.0], vec![0.0, 1.0]);
    op.v_set = case.buses.iter().map(|b| b.v_max).collect();
    let fault = FaultEvent {
        fault_bus: 1,
        t0: 0.0,
        t_cl: 0.1,
        trip_line: Some(1),
    };
    (case, op, Scenario { p_w: vec![], probability: 1.0 }, fault)
}

fn desk() -> (NetworkCase, OperatingPoint, Scenario, FaultEvent) {
    let case = parse_case(cases::DESK9).unwrap();
    let op = OperatingPoint::flat(&case, vec![40.0, 160.0, 30.0], vec![0.2, 0.5, 0.3]);
    let sc = Scenario { p_w: case.wind_forecast(), probability: 1.0 };
    let fault = FaultEvent {
        fault_bus: 8,
        t0: 0.0,
        t_cl: 0.25,
        trip_line: Some(6),
    };
    (case, op, sc, fault)
}

fn cfg() -> SimConfig {
    SimConfig {
        horizon: 3.0,
        ..Default::default()
    }
}

fn equal_area_cct() -> f64 {
    let (pm, p1, p3, h) = (0.8f64, 2.0f64, 1.5f64, 5.0f64);
    let d0 = (pm / p1).asin();
    let dmax = std::f64::consts::PI - (pm / p3).asin();
    let dc = ((pm * (dmax - d0) + p3 * dmax.cos()) / p3).acos();
    (4.0 * h * (dc - d0) / (2.0 * std::f64::consts::PI * 60.0 * pm)).sqrt()
}

#[test]
fn smib_margin_falls_with_clearing_time() {
    let (case, op, sc, fault) = smib();
    let etas: Vec<f64> = [0.1, 0.15, 0.2, 0.23, 0.24, 0.27, 0.3]
        .iter()
        .map(|&t| evaluate_margin(&case, &op, &sc, &fault.with_clearing(t), &cfg()).unwrap().margin.eta)
        .collect();
    for w in etas.windows(2) {
        assert!(w[1] < w[0], "{etas:?}");
    }
}

#[test]
fn smib_cct_from_margins_matches_equal_area() {
    let (case, op, sc, fault) = smib();
    let est = estimate_cct(&case, &op, &sc, &fault, &cfg(), (0.1, 0.4)).unwrap();
    let want = equal_area_cct();
    assert!((est.cct - want).abs() < 0.02 * want, "{} vs {want}", est.cct);
}

#[test]
fn cct_needs_a_sign_change() {
    let (case, op, sc, fault) = smib();
    let err = estimate_cct(&case, &op, &sc, &fault, &cfg(), (0.05, 0.15)).unwrap_err();
    assert!(matches!(err, Error::NoSignChange { .. }), "{err}");
    assert!(estimate_cct(&case, &op, &sc, &fault, &cfg(), (0.3, 0.2)).is_err());
}

#[test]
fn margin_sign_agrees_with_classification() {
    let (case, _, sc, fault) = desk();
    let mut checked = 0;
    for p in [[40.0, 160.0, 30.0], [70.0, 90.0, 60.0], [20.0, 100.0, 110.0]] {
        let op = OperatingPoint::flat(&case, p.to_vec(), vec![1.0 / 3.0; 3]);
        for t in [0.1, 0.2, 0.3, 0.4] {
            let e = evaluate_margin(&case, &op, &sc, &fault.with_clearing(t), &cfg()).unwrap();
            if e.margin.class != MarginClass::Marginal {
                assert_eq!(e.margin.eta > 0.0, e.stability.is_stable(), "{p:?} t {t}: {e:?}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 10);
}

#[test]
fn sensitivities_keep_the_slack_gauge() {
    let (case, op, sc, fault) = desk();
    let s = trajectory_sensitivity(&case, &op, &sc, &fault, &cfg(), DEFAULT_STEP_FRACTION).unwrap();
    assert!(s.reliable);
    assert_eq!(s.base.margin.class, MarginClass::Unstable);
    let gauge: f64 = s.phi_pu.iter().zip(&op.rho).map(|(f, r)| f * r).sum();
    let scale: f64 = s.phi_pu.iter().map(|f| f.abs()).sum();
    assert!(gauge.abs() < 1e-3 * scale, "{gauge} vs {scale}");
    let cut = build_constraint(&s, case.base_mva, 3, 1);
    assert_eq!((cut.contingency, cut.scenario), (3, 1));
    assert!(!cut.stable);
    assert_eq!(cut.predicted_margin(&op.p_g_mw), s.eta0);
}

#[test]
fn linearization_error_is_second_order() {
    let (case, op, sc, fault) = desk();
    let s = trajectory_sensitivity(&case, &op, &sc, &fault, &cfg(), DEFAULT_STEP_FRACTION).unwrap();
    let cut = build_constraint(&s, case.base_mva, 0, 0);
    let dir = [1.0, -0.6, -0.4];
    // below ~2 MW the error sits at the 1e-5 margin noise floor of this point
    let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0]
        .iter()
        .map(|&step| {
            let mut o = op.clone();
            for (p, d) in o.p_g_mw.iter_mut().zip(dir) {
                *p += step * d;
            }
            let eta = evaluate_margin(&case, &o, &sc, &fault, &cfg()).unwrap().margin.eta;
            let err = (eta - cut.predicted_margin(&o.p_g_mw)).abs();
            (f64::ln(step), err.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
}

#[test]
fn instant_clearing_is_not_unstable() {
    let (case, op, sc, fault) = smib();
    let e = evaluate_margin(&case, &op, &sc, &fault.with_clearing(0.0), &cfg()).unwrap();
    assert_ne!(e.margin.class, MarginClass::Unstable);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gap_grouping_is_a_partition(angles in prop::collection::vec(-3.0f64..3.0, 2..12)) {
        match group_by_largest_gap(&angles) {
            Ok(g) => {
                let mut all: Vec<usize> = g.critical.iter().chain(&g.non_critical).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..angles.len()).collect::<Vec<_>>());
                let lo = g.critical.iter().map(|&i| angles[i]).fold(f64::INFINITY, f64::min);
                let hi = g.non_critical.iter().map(|&i| angles[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo > hi);
            }
            Err(_) => prop_assert!(angles.iter().all(|&a| a == angles[0])),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coarser_step_keeps_clear_classifications(t_cl in 0.05f64..0.45) {
        let (case, op, sc, fault) = smib();
        let fine = cfg();
        let coarse = SimConfig { dt: 2.0 * fine.dt, ..fine };
        let f = fault.with_clearing(t_cl);
        let e = evaluate_margin(&case, &op, &sc, &f, &fine).unwrap();
        prop_assume!(e.margin.eta.abs() > MARGIN_TOL);
        let tr = run_tds(&case, &op, &sc, &f, &coarse).unwrap();
        prop_assert_eq!(classify_stability(&tr, DEFAULT_INSTABILITY_SPREAD).is_stable(), e.stability.is_stable());
    }
}
