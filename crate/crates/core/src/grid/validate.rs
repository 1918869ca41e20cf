use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BusKind, NetworkCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueKind {
    UnknownBus,
    DuplicateId,
    SelfLoop,
    ZeroImpedance,
    VoltageLimits,
    GeneratorLimits,
    NegativeCost,
    Inertia,
    WindForecast,
    WindAlpha,
    SharedBus,
    UnknownLine,
    InvertedPfrBound,
    PfrRange,
    Disconnected,
    ReferenceBus,
    BaseValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            kind,
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        for i in &self.issues {
            writeln!(f, "{}: {}", i.location, i.message)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a case and reports all violations.
pub fn validate_case(case: &NetworkCase) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if !(case.base_mva > 0.0) || !(case.freq_hz > 0.0) {
        rep.push(IssueKind::BaseValues, "case", "base_mva and freq_hz must be positive");
    }

    let mut ids = HashSet::new();
    for b in &case.buses {
        if !ids.insert(b.id) {
            rep.push(IssueKind::DuplicateId, format!("bus {}", b.id), "duplicate bus id");
        }
        if !(b.v_min > 0.0 && b.v_min <= b.v_max) {
            rep.push(
                IssueKind::VoltageLimits,
                format!("bus {}", b.id),
                format!("voltage limits [{}, {}] not ordered and positive", b.v_min, b.v_max),
            );
        }
    }
    let n_ref = case.buses.iter().filter(|b| b.kind == BusKind::Ref).count();
    if n_ref != 1 {
        rep.push(IssueKind::ReferenceBus, "case", format!("{n_ref} reference buses, need 1"));
    }

    let mut line_ids = HashSet::new();
    for l in &case.lines {
        let loc = format!("line {}", l.id);
        if !line_ids.insert(l.id) {
            rep.push(IssueKind::DuplicateId, &loc, "duplicate line id");
        }
        for end in [l.from_bus, l.to_bus] {
            if !ids.contains(&end) {
                rep.push(IssueKind::UnknownBus, &loc, format!("unknown bus {end}"));
            }
        }
        if l.from_bus == l.to_bus {
            rep.push(IssueKind::SelfLoop, &loc, "from_bus equals to_bus");
        }
        if l.series_admittance.norm() == 0.0 || !l.series_admittance.is_finite() {
            rep.push(IssueKind::ZeroImpedance, &loc, "series impedance is zero");
        }
    }

    let mut gen_buses = BTreeSet::new();
    for (i, g) in case.generators.iter().enumerate() {
        let loc = format!("gen {}", i + 1);
        if !ids.contains(&g.bus) {
            rep.push(IssueKind::UnknownBus, &loc, format!("unknown bus {}", g.bus));
        }
        gen_buses.insert(g.bus);
        if g.cost.c2 < 0.0 {
            rep.push(IssueKind::NegativeCost, &loc, "c2 must be non-negative");
        }
        if g.p_min > g.p_max || g.q_min > g.q_max {
            rep.push(IssueKind::GeneratorLimits, &loc, "inverted generator limits");
        }
        if !(g.h > 0.0) || !(g.xd_prime > 0.0) {
            rep.push(IssueKind::Inertia, &loc, "H and xd' must be positive");
        }
    }
    for (i, w) in case.wind_farms.iter().enumerate() {
        let loc = format!("wind {}", i + 1);
        if !ids.contains(&w.bus) {
            rep.push(IssueKind::UnknownBus, &loc, format!("unknown bus {}", w.bus));
        }
        if gen_buses.contains(&w.bus) {
            rep.push(IssueKind::SharedBus, &loc, "wind farm shares a bus with a generator");
        }
        if w.forecast_mw < 0.0 {
            rep.push(IssueKind::WindForecast, &loc, "negative forecast");
        }
        if !(0.0 <= w.short_term_alpha
            && w.short_term_alpha <= w.day_ahead_alpha
            && w.day_ahead_alpha < 1.0)
        {
            rep.push(
                IssueKind::WindAlpha,
                &loc,
                "need 0 <= short_term_alpha <= day_ahead_alpha < 1",
            );
        }
    }

    for p in &case.pfrs {
        let loc = format!("pfr on line {}", p.line);
        if !line_ids.contains(&p.line) {
            rep.push(IssueKind::UnknownLine, &loc, format!("unknown line {}", p.line));
        }
        let (gl, gu) = p.gamma_mag;
        let (bl, bu) = p.gamma_angle;
        if gl > gu || bl > bu {
            rep.push(IssueKind::InvertedPfrBound, &loc, "inverted PFR bound");
        } else if !(gl > 0.0 && gl <= 1.0 && 1.0 <= gu && bl <= 0.0 && 0.0 <= bu) {
            rep.push(
                IssueKind::PfrRange,
                &loc,
                "PFR range must contain the unity ratio",
            );
        }
    }

    if rep.issues.iter().all(|i| i.kind != IssueKind::UnknownBus) && !connected(case) {
        rep.push(IssueKind::Disconnected, "case", "network graph is not connected");
    }
    rep
}

fn connected(case: &NetworkCase) -> bool {
    let n = case.buses.len();
    if n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for l in &case.lines {
        if let (Some(a), Some(b)) = (case.bus_index(l.from_bus), case.bus_index(l.to_bus)) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_case, Line};

    const THREE_BUS: &str = "rtsc-case v1
name three
[bus]
1 ref 0 0 0 0 0.95 1.05
2 pv 0 0 0 0 0.95 1.05
3 pq 50 10 0 0 0.95 1.05
[branch]
1 1 2 0.01 0.1 0.02
2 2 3 0.01 0.1 0.02
3 1 3 0.01 0.1 0.02
[gen]
1 0 200 -100 100 5 0 0.2
2 0 200 -100 100 4 0 0.25
[gencost]
1 0.01 10 0
2 0.02 8 0
[pfr]
2 0.95 1.05 -10 10
";

    #[test]
    fn well_formed_three_bus_passes() {
        let c = parse_case(THREE_BUS).unwrap();
        let r = validate_case(&c);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn unknown_bus_reported() {
        let mut c = parse_case(crate::cases::DESK9).unwrap();
        c.lines.push(Line::from_rxb(99, 1, 99, 0.0, 0.1, 0.0).unwrap());
        let r = validate_case(&c);
        assert!(r.has(IssueKind::UnknownBus));
        assert!(r.to_string().contains("unknown bus 99"));
    }

    #[test]
    fn inverted_pfr_bound_reported() {
        let mut c = parse_case(THREE_BUS).unwrap();
        c.pfrs[0].gamma_mag = (1.05, 0.95);
        let r = validate_case(&c);
        assert!(r.has(IssueKind::InvertedPfrBound));
        assert!(r.to_string().contains("inverted PFR bound"));
    }

    #[test]
    fn disconnected_and_shared_bus() {
        let mut c = parse_case(THREE_BUS).unwrap();
        c.lines.retain(|l| l.to_bus != 3);
        c.wind_farms.push(crate::grid::WindFarm {
            bus: 1,
            forecast_mw: 10.0,
            day_ahead_alpha: 0.1,
            short_term_alpha: 0.2,
        });
        let r = validate_case(&c);
        assert!(r.has(IssueKind::Disconnected));
        assert!(r.has(IssueKind::SharedBus));
        assert!(r.has(IssueKind::WindAlpha));
    }

    #[test]
    fn shipped_cases_validate() {
        for text in [crate::cases::DESK9, crate::cases::SMIB] {
            let c = parse_case(text).unwrap();
            let r = validate_case(&c);
            assert!(r.passed(), "{}: {r}", c.name);
        }
    }
}
