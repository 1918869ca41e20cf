use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{OfflineDatabase, PipelineConfig};
use crate::dynamics::tds_calls;
use crate::error::{Error, Result};
use crate::opf::{build_model, fuel_cost, solve, DispatchSolution};
use crate::scenario::{select_nearest, select_online, PredictionInterval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub case_name: String,
    pub dispatch: DispatchSolution,
    pub base_p_g_mw: Vec<f64>,
    /// Fuel cost of the dispatch and of the stored base OPF, $/h. The
    /// comparison leaves out recourse cost, which depends on the interval.
    pub fuel_cost: f64,
    pub base_fuel_cost: f64,
    pub cost_delta_pct: f64,
    pub short_term: PredictionInterval,
    /// Reduced-set positions of the selected scenarios.
    pub selected: Vec<usize>,
    /// True when the short-term box held no database scenario and the
    /// nearest ones were used.
    pub fallback: bool,
    /// Stability cuts entered into the model (stable records add none).
    pub active_cuts: usize,
    pub unreliable_cuts: usize,
    /// Time-domain simulations run during the online stage.
    pub tds_calls: u64,
    /// Wall times; kept out of the serialized report so reports compare
    /// byte for byte.
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

/// Dispatch for the short-term box from database records only: select
/// scenarios, gather their cuts, build and solve the relaxation.
pub fn online_dispatch(db: &OfflineDatabase, short_term: &PredictionInterval, config: &PipelineConfig) -> Result<RunReport> {
    let calls_before = tds_calls();
    if !db.interval.contains(short_term) {
        return Err(Error::Domain("short-term interval is not inside the database interval".into()));
    }
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &str, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        clock = Instant::now();
    };

    let (selected, fallback) = match select_online(&db.scenarios, short_term) {
        Ok(s) => (s, false),
        Err(Error::EmptySelection) => (select_nearest(&db.scenarios, short_term, config.online.fallback_count)?, true),
        Err(e) => return Err(e),
    };
    let positions = selected.parent_indices.clone();
    let cuts = db.cuts_for(&positions);
    lap("select", &mut timings);

    let model = build_model(&db.case, &selected, &cuts, &db.metadata.participation, &config.opf)?;
    lap("build", &mut timings);
    let dispatch = solve(&model, &config.solver)?;
    lap("solve", &mut timings);

    let fuel = fuel_cost(&db.case, &dispatch.p_g_mw);
    let base_fuel = fuel_cost(&db.case, &db.base.p_g_mw);
    Ok(RunReport {
        case_name: db.case.name.clone(),
        base_p_g_mw: db.base.p_g_mw.clone(),
        fuel_cost: fuel,
        base_fuel_cost: base_fuel,
        cost_delta_pct: 100.0 * (fuel - base_fuel) / base_fuel,
        short_term: short_term.clone(),
        selected: positions,
        fallback,
        active_cuts: model.n_cuts,
        unreliable_cuts: cuts.iter().filter(|c| !c.stable && !c.reliable).count(),
        tds_calls: tds_calls() - calls_before,
        dispatch,
        timings,
    })
}
