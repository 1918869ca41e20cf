//! Offline/online workflow: scenario database construction, online
//! dispatch from stored stability cuts, Monte-Carlo robustness checks and
//! report files.

mod offline;
mod online;
mod report;
mod robustness;

pub use offline::{offline_build, reduce_scenarios, solve_base_opf, DbRecord, OfflineDatabase, DB_FORMAT};
pub use online::{online_dispatch, RunReport, StageTiming};
pub use report::{
    read_cct_report, read_robustness_report, read_run_report, write_cct_report, write_robustness_report, write_run_report,
    write_scenario_scatter, CctReport,
};
pub use robustness::{estimate_cct_cmd, evaluate_robustness, ContingencyRobustness, RobustnessReport, SampleOutcome};

use serde::{Deserialize, Serialize};

use crate::conic::AdmmSettings;
use crate::dynamics::{FaultEvent, SimConfig};
use crate::error::{Error, Result};
use crate::grid::NetworkCase;
use crate::opf::{equal_participation, ModelOptions};
use crate::scenario::{Horizon, PredictionInterval};
use crate::sime::DEFAULT_STEP_FRACTION;

/// Fault at `fault_bus` starting at `t_fault`, cleared at `t_clear` by
/// tripping `trip_line` (case ids).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub fault_bus: u32,
    pub trip_line: Option<u32>,
    pub t_clear: f64,
    #[serde(default)]
    pub t_fault: f64,
}

impl Contingency {
    pub fn event(&self) -> FaultEvent {
        FaultEvent {
            fault_bus: self.fault_bus,
            t0: self.t_fault,
            t_cl: self.t_clear,
            trip_line: self.trip_line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Violation probability of the scenario-approach guarantee.
    pub epsilon: f64,
    /// Confidence parameter of the guarantee.
    pub delta: f64,
    /// Requested sample count; raised to the guarantee's bound if smaller.
    pub samples: usize,
    /// Scenarios kept after reduction.
    pub reduced: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            delta: 0.001,
            samples: 2000,
            reduced: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineConfig {
    /// Short-term box; defaults to the case's short-term interval around
    /// the forecast.
    pub short_term: Option<PredictionInterval>,
    /// Database scenarios used when the short-term box selects none.
    pub fallback_count: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            short_term: None,
            fallback_count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub count: usize,
    /// Monte-Carlo seed; the run seed is used when absent.
    pub seed: Option<u64>,
    /// Clearing-time bracket for the CCT estimates at the forecast, s.
    pub cct_bracket: (f64, f64),
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: None,
            cct_bracket: (0.05, 0.6),
        }
    }
}

/// Everything a pipeline run needs besides the case; read from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads for the offline build; all cores when absent.
    pub workers: Option<usize>,
    /// Participation factors; equal shares when absent.
    pub participation: Option<Vec<f64>>,
    pub sampling: SamplingConfig,
    #[serde(rename = "contingency")]
    pub contingencies: Vec<Contingency>,
    pub simulation: SimConfig,
    pub opf: ModelOptions,
    pub solver: AdmmSettings,
    /// Perturbation per generator as a fraction of its active limit.
    pub sensitivity_step: f64,
    pub online: OnlineConfig,
    pub robustness: RobustnessConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: None,
            participation: None,
            sampling: SamplingConfig::default(),
            contingencies: Vec::new(),
            simulation: SimConfig::default(),
            opf: ModelOptions::default(),
            solver: AdmmSettings::default(),
            sensitivity_step: DEFAULT_STEP_FRACTION,
            online: OnlineConfig::default(),
            robustness: RobustnessConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn participation_for(&self, case: &NetworkCase) -> Result<Vec<f64>> {
        match &self.participation {
            None => Ok(equal_participation(case.n_gen())),
            Some(rho) => {
                if rho.len() != case.n_gen() {
                    return Err(Error::Dimension(format!("{} participation factors for {} generators", rho.len(), case.n_gen())));
                }
                let total: f64 = rho.iter().sum();
                if rho.iter().any(|r| *r < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain("participation factors must be nonnegative and sum to 1".into()));
                }
                Ok(rho.clone())
            }
        }
    }

    pub fn short_term_interval(&self, case: &NetworkCase) -> PredictionInterval {
        self.online
            .short_term
            .clone()
            .unwrap_or_else(|| PredictionInterval::from_case(case, Horizon::ShortTerm))
    }

    pub fn robustness_seed(&self) -> u64 {
        self.robustness.seed.unwrap_or(self.seed)
    }
}
