//! Alone in its own binary so no concurrent test moves the global
//! simulation counter.

use rtsc_core::cases;
use rtsc_core::dynamics::tds_calls;
use rtsc_core::grid::parse_case;
use rtsc_core::pipeline::{offline_build, online_dispatch, PipelineConfig};

#[test]
fn online_stage_runs_no_simulation() {
    let case = parse_case(cases::DESK9).unwrap();
    let mut cfg = PipelineConfig::from_toml(cases::DESK9_CONFIG).unwrap();
    cfg.sampling.samples = 300;
    cfg.sampling.epsilon = 0.05;
    cfg.sampling.delta = 0.01;
    cfg.sampling.reduced = 8;
    let before = tds_calls();
    let db = offline_build(&case, &cfg).unwrap();
    let offline = tds_calls() - before;
    assert!(offline >= 8 * 7, "offline ran {offline}");
    let mid = tds_calls();
    let report = online_dispatch(&db, &cfg.short_term_interval(&case), &cfg).unwrap();
    assert_eq!(report.tds_calls, 0);
    assert_eq!(tds_calls(), mid);
}
