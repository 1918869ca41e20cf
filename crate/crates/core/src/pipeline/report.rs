use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Contingency, RobustnessReport, RunReport, StageTiming};
use crate::error::Result;
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CctReport {
    pub contingency: Contingency,
    pub bracket: (f64, f64),
    pub cct: f64,
    /// (clearing time, margin) pairs sorted by clearing time.
    pub margins: Vec<(f64, f64)>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// `report.json` plus wall times in `timings.json`.
pub fn write_run_report(dir: &Path, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), report)?;
    write_json(&dir.join("dispatch.json"), &report.dispatch)?;
    write_json(&dir.join("timings.json"), &report.timings)
}

pub fn read_run_report(dir: &Path) -> Result<RunReport> {
    let mut r: RunReport = read_json(&dir.join("report.json"))?;
    let timings = dir.join("timings.json");
    if timings.exists() {
        r.timings = read_json::<Vec<StageTiming>>(&timings)?;
    }
    Ok(r)
}

/// Scatter rows `index p_w1 .. p_wk probability selected`, one per
/// scenario.
pub fn write_scenario_scatter(path: &Path, set: &ScenarioSet, selected: &[usize]) -> Result<()> {
    let mut out = String::new();
    let farms: String = (1..=set.interval.dim()).map(|i| format!(" p_w{i}")).collect();
    writeln!(out, "# index{farms} probability selected").unwrap();
    for (i, s) in set.scenarios.iter().enumerate() {
        let p: String = s.p_w.iter().map(|x| format!(" {x}")).collect();
        writeln!(out, "{i}{p} {} {}", s.probability, u8::from(selected.contains(&i))).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// `robustness.json` plus per-sample rows in `robustness_samples.dat`.
pub fn write_robustness_report(dir: &Path, report: &RobustnessReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("robustness.json"), report)?;
    let mut out = String::new();
    let farms = report.samples.first().map_or(0, |s| s.p_w.len());
    let head: String = (1..=farms)
        .map(|i| format!(" p_w{i}"))
        .chain((0..report.per_contingency.len()).map(|c| format!(" stable_c{c}")))
        .collect();
    writeln!(out, "#{head}").unwrap();
    for s in &report.samples {
        let row: Vec<String> = s
            .p_w
            .iter()
            .map(|x| x.to_string())
            .chain(s.stable.iter().map(|&b| u8::from(b).to_string()))
            .collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    fs::write(dir.join("robustness_samples.dat"), out)?;
    Ok(())
}

pub fn read_robustness_report(dir: &Path) -> Result<RobustnessReport> {
    read_json(&dir.join("robustness.json"))
}

/// `cct.json` plus the margin curve in `margins.dat`.
pub fn write_cct_report(dir: &Path, report: &CctReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("cct.json"), report)?;
    let mut out = String::from("# t_clear eta\n");
    for (t, eta) in &report.margins {
        writeln!(out, "{t} {eta}").unwrap();
    }
    fs::write(dir.join("margins.dat"), out)?;
    Ok(())
}

pub fn read_cct_report(dir: &Path) -> Result<CctReport> {
    read_json(&dir.join("cct.json"))
}
