use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CctReport, Contingency};
use crate::dynamics::{classify_stability, run_tds, OperatingPoint, SimConfig, DEFAULT_INSTABILITY_SPREAD};
use crate::error::{Error, Result};
use crate::grid::NetworkCase;
use crate::scenario::{sample_uniform, PredictionInterval, Scenario};
use crate::sime::estimate_cct;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub p_w: Vec<f64>,
    /// Stability per contingency.
    pub stable: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyRobustness {
    pub contingency: Contingency,
    pub stable: usize,
    pub total: usize,
    pub robustness: f64,
    /// Critical clearing time at the forecast, when the bracket holds one.
    pub cct_at_forecast: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub seed: u64,
    pub scenario_count: usize,
    /// Scenarios stable under every contingency.
    pub stable_count: usize,
    pub robustness: f64,
    pub per_contingency: Vec<ContingencyRobustness>,
    pub samples: Vec<SampleOutcome>,
}

/// Monte-Carlo robustness degree: the share of `count` uniform scenarios
/// from `interval` for which the compensated dispatch rides through each
/// contingency. Failed or diverged simulations count as unstable.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_robustness(
    case: &NetworkCase,
    op: &OperatingPoint,
    interval: &PredictionInterval,
    contingencies: &[Contingency],
    count: usize,
    seed: u64,
    sim: &SimConfig,
    cct_bracket: Option<(f64, f64)>,
) -> Result<RobustnessReport> {
    if count == 0 {
        return Err(Error::Domain("robustness needs at least one scenario".into()));
    }
    let set = sample_uniform(interval, count, seed)?;
    let samples: Vec<SampleOutcome> = set
        .scenarios
        .par_iter()
        .map(|sc| SampleOutcome {
            p_w: sc.p_w.clone(),
            stable: contingencies
                .iter()
                .map(|c| match run_tds(case, op, sc, &c.event(), sim) {
                    Ok(tr) => !tr.diverged && classify_stability(&tr, DEFAULT_INSTABILITY_SPREAD).is_stable(),
                    Err(_) => false,
                })
                .collect(),
        })
        .collect();
    let forecast = Scenario {
        p_w: case.wind_forecast(),
        probability: 1.0,
    };
    let per_contingency = contingencies
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let stable = samples.iter().filter(|s| s.stable[ci]).count();
            ContingencyRobustness {
                contingency: *c,
                stable,
                total: count,
                robustness: stable as f64 / count as f64,
                cct_at_forecast: cct_bracket.and_then(|b| estimate_cct(case, op, &forecast, &c.event(), sim, b).ok().map(|e| e.cct)),
            }
        })
        .collect();
    let stable_count = samples.iter().filter(|s| s.stable.iter().all(|&x| x)).count();
    Ok(RobustnessReport {
        seed,
        scenario_count: count,
        stable_count,
        robustness: stable_count as f64 / count as f64,
        per_contingency,
        samples,
    })
}

/// CCT of one contingency with the margin-versus-clearing-time samples
/// sorted by clearing time.
pub fn estimate_cct_cmd(
    case: &NetworkCase,
    op: &OperatingPoint,
    scenario: &Scenario,
    contingency: &Contingency,
    bracket: (f64, f64),
    sim: &SimConfig,
) -> Result<CctReport> {
    let est = estimate_cct(case, op, scenario, &contingency.event(), sim, bracket)?;
    let mut margins = est.samples;
    margins.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CctReport {
        contingency: *contingency,
        bracket,
        cct: est.cct,
        margins,
    })
}
