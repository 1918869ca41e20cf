use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Contingency, PipelineConfig};
use crate::dynamics::{OperatingPoint, SimConfig};
use crate::error::{Error, Result};
use crate::grid::{parse_case, write_case, NetworkCase};
use crate::opf::{build_model, solve, DispatchSolution, ModelOptions};
use crate::scenario::{
    fast_forward_reduce, parse_scenarios, sample_complexity, sample_uniform, write_scenarios, Horizon, PredictionInterval, ScenarioSet,
};
use crate::sime::{build_constraint, trajectory_sensitivity, MachineGrouping, TscConstraint};

pub const DB_FORMAT: &str = "rtsc-db v1";

const MANIFEST: &str = "manifest.json";
const CASE_FILE: &str = "case.txt";
const SCENARIO_FILE: &str = "scenarios.txt";
const BASE_FILE: &str = "base_dispatch.json";
const RECORD_FILE: &str = "records.json";

/// Outcome of the stability assessment for one (contingency, scenario)
/// pair at the base dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbRecord {
    pub contingency: usize,
    /// Position in the reduced scenario set.
    pub scenario: usize,
    pub grouping: Option<MachineGrouping>,
    pub constraint: Option<TscConstraint>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMetadata {
    pub format: String,
    pub version: String,
    pub case_name: String,
    pub seed: u64,
    pub samples: usize,
    /// Scenario-approach bound for the configured epsilon and delta.
    pub sample_bound: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub reduced: usize,
    pub participation: Vec<f64>,
    pub simulation: SimConfig,
    pub sensitivity_step: f64,
    pub opf: ModelOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    metadata: BuildMetadata,
    interval: PredictionInterval,
    contingencies: Vec<Contingency>,
    records: usize,
    failures: Vec<(usize, usize, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDatabase {
    pub metadata: BuildMetadata,
    pub case: NetworkCase,
    /// Day-ahead box the scenarios were drawn from.
    pub interval: PredictionInterval,
    pub scenarios: ScenarioSet,
    pub contingencies: Vec<Contingency>,
    pub base: DispatchSolution,
    /// Contingency-major: record `c * scenarios + s`.
    pub records: Vec<DbRecord>,
}

impl OfflineDatabase {
    pub fn failures(&self) -> impl Iterator<Item = &DbRecord> {
        self.records.iter().filter(|r| r.error.is_some())
    }

    /// Stored cuts for the given reduced-set positions, every contingency.
    pub fn cuts_for(&self, positions: &[usize]) -> Vec<TscConstraint> {
        self.records
            .iter()
            .filter(|r| positions.contains(&r.scenario))
            .filter_map(|r| r.constraint.clone())
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            metadata: self.metadata.clone(),
            interval: self.interval.clone(),
            contingencies: self.contingencies.clone(),
            records: self.records.len(),
            failures: self
                .failures()
                .map(|r| (r.contingency, r.scenario, r.error.clone().unwrap_or_default()))
                .collect(),
        };
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::write(dir.join(CASE_FILE), write_case(&self.case))?;
        fs::write(dir.join(SCENARIO_FILE), write_scenarios(&self.scenarios))?;
        fs::write(dir.join(BASE_FILE), serde_json::to_string_pretty(&self.base)? + "\n")?;
        fs::write(dir.join(RECORD_FILE), serde_json::to_string_pretty(&self.records)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
        if manifest.metadata.format != DB_FORMAT {
            return Err(Error::Format(format!("database format {:?}, expected {DB_FORMAT:?}", manifest.metadata.format)));
        }
        let records: Vec<DbRecord> = serde_json::from_str(&fs::read_to_string(dir.join(RECORD_FILE))?)?;
        if records.len() != manifest.records {
            return Err(Error::Format(format!("manifest lists {} records, found {}", manifest.records, records.len())));
        }
        Ok(Self {
            metadata: manifest.metadata,
            case: parse_case(&fs::read_to_string(dir.join(CASE_FILE))?)?,
            interval: manifest.interval,
            scenarios: parse_scenarios(&fs::read_to_string(dir.join(SCENARIO_FILE))?)?,
            contingencies: manifest.contingencies,
            base: serde_json::from_str(&fs::read_to_string(dir.join(BASE_FILE))?)?,
            records,
        })
    }
}

fn distinct_points(set: &ScenarioSet) -> usize {
    let mut keys: Vec<Vec<u64>> = set.scenarios.iter().map(|s| s.p_w.iter().map(|x| x.to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Samples the day-ahead box (at least the scenario-approach bound) and
/// reduces it. Returns the sampled and reduced sets and the bound.
pub fn reduce_scenarios(case: &NetworkCase, config: &PipelineConfig) -> Result<(ScenarioSet, ScenarioSet, usize)> {
    let s = &config.sampling;
    let bound = sample_complexity(s.epsilon, s.delta, case.n_gen())?;
    let interval = PredictionInterval::from_case(case, Horizon::DayAhead);
    let sampled = sample_uniform(&interval, s.samples.max(bound), config.seed)?;
    // a degenerate box collapses to fewer distinct points than requested
    let keep = s.reduced.min(distinct_points(&sampled)).max(1);
    let reduced = fast_forward_reduce(&sampled, keep)?;
    Ok((sampled, reduced, bound))
}

/// Scenario OPF without stability cuts.
pub fn solve_base_opf(case: &NetworkCase, scenarios: &ScenarioSet, config: &PipelineConfig) -> Result<DispatchSolution> {
    let rho = config.participation_for(case)?;
    let model = build_model(case, scenarios, &[], &rho, &config.opf)?;
    solve(&model, &config.solver)
}

fn assess(case: &NetworkCase, op: &OperatingPoint, db_scen: &ScenarioSet, cont: &[Contingency], config: &PipelineConfig, c: usize, s: usize) -> DbRecord {
    let result = trajectory_sensitivity(
        case,
        op,
        &db_scen.scenarios[s],
        &cont[c].event(),
        &config.simulation,
        config.sensitivity_step,
    );
    match result {
        Ok(sens) => DbRecord {
            contingency: c,
            scenario: s,
            grouping: Some(sens.base.grouping.clone()),
            constraint: Some(build_constraint(&sens, case.base_mva, c, s)),
            error: None,
        },
        Err(e) => DbRecord {
            contingency: c,
            scenario: s,
            grouping: None,
            constraint: None,
            error: Some(e.to_string()),
        },
    }
}

/// Samples, reduces, solves the base OPF and assesses every (contingency,
/// reduced scenario) pair at the base dispatch. Per-pair failures are kept
/// as records with an error; the build itself fails only if sampling,
/// reduction or the base OPF fail.
pub fn offline_build(case: &NetworkCase, config: &PipelineConfig) -> Result<OfflineDatabase> {
    let rho = config.participation_for(case)?;
    let (sampled, reduced, bound) = reduce_scenarios(case, config)?;
    let base = solve_base_opf(case, &reduced, config)?;
    let op = OperatingPoint::from_dispatch(&base);
    let cont = &config.contingencies;
    let pairs: Vec<(usize, usize)> = (0..cont.len()).flat_map(|c| (0..reduced.len()).map(move |s| (c, s))).collect();
    let run = || -> Vec<DbRecord> {
        pairs
            .par_iter()
            .map(|&(c, s)| assess(case, &op, &reduced, cont, config, c, s))
            .collect()
    };
    let records = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Solver(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(OfflineDatabase {
        metadata: BuildMetadata {
            format: DB_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            case_name: case.name.clone(),
            seed: config.seed,
            samples: sampled.len(),
            sample_bound: bound,
            epsilon: config.sampling.epsilon,
            delta: config.sampling.delta,
            reduced: reduced.len(),
            participation: rho,
            simulation: config.simulation,
            sensitivity_step: config.sensitivity_step,
            opf: config.opf,
        },
        case: case.clone(),
        interval: reduced.interval.clone(),
        scenarios: reduced,
        contingencies: cont.clone(),
        base,
        records,
    })
}
