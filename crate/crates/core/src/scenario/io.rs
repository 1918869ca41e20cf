use std::fmt::Write as _;

use super::{Horizon, PredictionInterval, Provenance, Scenario, ScenarioSet};
use crate::error::{Error, Result};

pub const SCENARIO_HEADER: &str = "rtsc-scenarios v1";

/// Columnar text: a header block (provenance, seed, horizon, bounds,
/// count) followed by one row per scenario: parent index, farm outputs,
/// probability.
pub fn write_scenarios(set: &ScenarioSet) -> String {
    let mut out = String::new();
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let horizon = match set.interval.horizon {
        Horizon::DayAhead => "day_ahead",
        Horizon::ShortTerm => "short_term",
    };
    writeln!(out, "{SCENARIO_HEADER}").unwrap();
    writeln!(out, "provenance {}", set.provenance.as_str()).unwrap();
    writeln!(out, "seed {}", set.seed).unwrap();
    writeln!(out, "horizon {horizon}").unwrap();
    writeln!(out, "lower {}", join(&set.interval.lower)).unwrap();
    writeln!(out, "upper {}", join(&set.interval.upper)).unwrap();
    writeln!(out, "count {}", set.len()).unwrap();
    let farms = (1..=set.interval.dim()).map(|i| format!("p_w{i}")).collect::<Vec<_>>().join(" ");
    writeln!(out, "# parent {farms} probability").unwrap();
    for (s, i) in set.scenarios.iter().zip(&set.parent_indices) {
        writeln!(out, "{i} {} {}", join(&s.p_w), s.probability).unwrap();
    }
    out
}

pub fn parse_scenarios(text: &str) -> Result<ScenarioSet> {
    let err = |line: usize, msg: &str| Error::Format(format!("scenario file line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == SCENARIO_HEADER => {}
        _ => return Err(err(1, "missing header")),
    }
    let mut provenance = None;
    let mut seed = None;
    let mut horizon = None;
    let mut lower = None;
    let mut upper = None;
    let mut count = None;
    let mut scenarios = Vec::new();
    let mut parents = Vec::new();
    let num = |ln: usize, s: &str| s.parse::<f64>().map_err(|_| err(ln, &format!("bad number {s}")));
    for (ln, l) in lines {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut it = l.split_whitespace();
        let key = it.next().unwrap();
        let rest: Vec<&str> = it.collect();
        match key {
            "provenance" => {
                provenance = Some(match rest.first().copied() {
                    Some("sampled") => Provenance::Sampled,
                    Some("reduced") => Provenance::Reduced,
                    Some("selected") => Provenance::Selected,
                    _ => return Err(err(ln, "unknown provenance")),
                })
            }
            "seed" => {
                seed = Some(
                    rest.first()
                        .and_then(|s| s.parse::<u64>().ok())
                        .ok_or_else(|| err(ln, "bad seed"))?,
                )
            }
            "horizon" => {
                horizon = Some(match rest.first().copied() {
                    Some("day_ahead") => Horizon::DayAhead,
                    Some("short_term") => Horizon::ShortTerm,
                    _ => return Err(err(ln, "unknown horizon")),
                })
            }
            "lower" => lower = Some(rest.iter().map(|s| num(ln, s)).collect::<Result<Vec<_>>>()?),
            "upper" => upper = Some(rest.iter().map(|s| num(ln, s)).collect::<Result<Vec<_>>>()?),
            "count" => {
                count = Some(
                    rest.first()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| err(ln, "bad count"))?,
                )
            }
            _ => {
                let dim = lower.as_ref().map(Vec::len).ok_or_else(|| err(ln, "row before bounds"))?;
                if rest.len() != dim + 1 {
                    return Err(err(ln, &format!("expected {} columns", dim + 2)));
                }
                parents.push(key.parse::<usize>().map_err(|_| err(ln, "bad parent index"))?);
                let vals = rest.iter().map(|s| num(ln, s)).collect::<Result<Vec<_>>>()?;
                scenarios.push(Scenario {
                    p_w: vals[..dim].to_vec(),
                    probability: vals[dim],
                });
            }
        }
    }
    let miss = |what: &str| Error::Format(format!("scenario file missing {what}"));
    let interval = PredictionInterval::new(
        lower.ok_or_else(|| miss("lower"))?,
        upper.ok_or_else(|| miss("upper"))?,
        horizon.ok_or_else(|| miss("horizon"))?,
    )?;
    let count = count.ok_or_else(|| miss("count"))?;
    if count != scenarios.len() {
        return Err(Error::Format(format!(
            "scenario count {count} but {} rows",
            scenarios.len()
        )));
    }
    Ok(ScenarioSet {
        scenarios,
        provenance: provenance.ok_or_else(|| miss("provenance"))?,
        seed: seed.ok_or_else(|| miss("seed"))?,
        interval,
        parent_indices: parents,
    })
}
