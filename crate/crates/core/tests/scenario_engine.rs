use proptest::prelude::*;
use rtsc_core::cases;
use rtsc_core::grid::parse_case;
use rtsc_core::scenario::{
    euclidean, fast_forward_reduce, kantorovich_distance, parse_scenarios, sample_complexity, sample_uniform, select_nearest,
    select_online, Horizon, PredictionInterval, MASS_TOL,
};

fn box_strategy() -> impl Strategy<Value = PredictionInterval> {
    prop::collection::vec((0.0f64..100.0, 0.1f64..50.0), 1..4).prop_map(|v| {
        let lo = v.iter().map(|p| p.0).collect();
        let hi = v.iter().map(|p| p.0 + p.1).collect();
        PredictionInterval::new(lo, hi, Horizon::DayAhead).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_stay_in_the_box_with_unit_mass(iv in box_strategy(), n in 1usize..300, seed in any::<u64>()) {
        let s = sample_uniform(&iv, n, seed).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!((s.total_mass() - 1.0).abs() < MASS_TOL);
        prop_assert!(s.scenarios.iter().all(|x| iv.contains_point(&x.p_w)));
        prop_assert_eq!(s, sample_uniform(&iv, n, seed).unwrap());
    }

    #[test]
    fn keeping_more_never_raises_the_distance(iv in box_strategy(), seed in any::<u64>()) {
        let s = sample_uniform(&iv, 60, seed).unwrap();
        let mut prev = f64::INFINITY;
        for keep in [1, 3, 7, 15, 30, 60] {
            let r = fast_forward_reduce(&s, keep).unwrap();
            prop_assert!((r.total_mass() - 1.0).abs() < MASS_TOL);
            prop_assert!(r.parent_indices.windows(2).all(|w| w[0] < w[1]));
            let d = kantorovich_distance(&s, &r, &euclidean).unwrap();
            prop_assert!(d <= prev + 1e-12, "keep {keep}: {d} after {prev}");
            prev = d;
        }
        prop_assert!(prev.abs() < 1e-12);
    }

    #[test]
    fn online_selection_stays_inside_the_short_term_box(seed in any::<u64>(), shrink in 0.05f64..0.9) {
        let iv = PredictionInterval::new(vec![0.0, 0.0], vec![10.0, 10.0], Horizon::DayAhead).unwrap();
        let r = fast_forward_reduce(&sample_uniform(&iv, 400, seed).unwrap(), 40).unwrap();
        let st = PredictionInterval::new(vec![5.0 - 5.0 * shrink; 2], vec![5.0 + 5.0 * shrink; 2], Horizon::ShortTerm).unwrap();
        match select_online(&r, &st) {
            Ok(sel) => {
                prop_assert!((sel.total_mass() - 1.0).abs() < MASS_TOL);
                for (x, &i) in sel.scenarios.iter().zip(&sel.parent_indices) {
                    prop_assert!(st.contains_point(&x.p_w));
                    prop_assert_eq!(&x.p_w, &r.scenarios[i].p_w);
                }
                let outside = r.scenarios.iter().filter(|x| !st.contains_point(&x.p_w)).count();
                prop_assert_eq!(sel.len() + outside, r.len());
            }
            Err(_) => {
                prop_assert!(r.scenarios.iter().all(|x| !st.contains_point(&x.p_w)));
                prop_assert_eq!(select_nearest(&r, &st, 3).unwrap().len(), 3);
            }
        }
    }

    #[test]
    fn text_format_round_trips(iv in box_strategy(), n in 1usize..40, seed in any::<u64>()) {
        let s = fast_forward_reduce(&sample_uniform(&iv, 2 * n, seed).unwrap(), n).unwrap();
        prop_assert_eq!(parse_scenarios(&rtsc_core::scenario::write_scenarios(&s)).unwrap(), s);
    }
}

#[test]
fn desk_boxes_nest_and_size_the_sample() {
    let case = parse_case(cases::DESK9).unwrap();
    let da = PredictionInterval::from_case(&case, Horizon::DayAhead);
    let st = PredictionInterval::from_case(&case, Horizon::ShortTerm);
    assert!(da.contains(&st));
    assert!(!st.contains(&da));
    assert_eq!(da.midpoint(), case.wind_forecast());
    // bound grows with the decision dimension and shrinks with epsilon
    let n3 = sample_complexity(0.005, 0.001, case.n_gen()).unwrap();
    assert!(n3 < sample_complexity(0.005, 0.001, case.n_gen() + 4).unwrap());
    assert!(n3 > sample_complexity(0.05, 0.001, case.n_gen()).unwrap());
}
