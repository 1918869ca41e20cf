//! Plain-text case format.
//!
//! ```text
//! rtsc-case v1
//! name desk9
//! base_mva 100
//! freq_hz 60
//!
//! [bus]
//! # id  type  pd(MW)  qd(MVAr)  gs(MW)  bs(MVAr)  vmin  vmax
//! 1     ref   0       0         0       0         0.95  1.05
//!
//! [branch]
//! # id  from  to  r  x  b  [rate_mva]
//!
//! [gen]
//! # bus  pmin  pmax  qmin  qmax  H  D  xd'  [xd  xq  xq'  Td0'  Tq0']
//!
//! [gencost]
//! # gen(1-based)  c2  c1  c0
//!
//! [wind]
//! # bus  forecast(MW)  alpha_day_ahead  alpha_short_term
//!
//! [pfr]
//! # line  gamma_min  gamma_max  beta_min(deg)  beta_max(deg)
//! ```
//!
//! `#` starts a comment. Every generator needs exactly one `gencost` row.

use std::fmt::Write as _;

use super::{
    Bus, BusKind, CostCurve, FourthOrderData, Generator, Line, NetworkCase, PfrLimits, WindFarm,
};
use crate::error::{Error, Result};

pub const CASE_HEADER: &str = "rtsc-case v1";

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Bus,
    Branch,
    Gen,
    GenCost,
    Wind,
    Pfr,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::CaseParse {
        line,
        msg: msg.into(),
    }
}

fn nums(line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| err(line, format!("not a number: {f:?}")))
        })
        .collect()
}

fn want(line: usize, v: &[f64], min: usize, max: usize, table: &str) -> Result<()> {
    if v.len() < min || v.len() > max {
        return Err(err(
            line,
            format!("{table} row needs {min}..={max} columns, found {}", v.len()),
        ));
    }
    Ok(())
}

fn as_id(line: usize, x: f64) -> Result<u32> {
    if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
        return Err(err(line, format!("bad identifier {x}")));
    }
    Ok(x as u32)
}

pub fn parse_case(text: &str) -> Result<NetworkCase> {
    let mut case = NetworkCase {
        name: String::new(),
        base_mva: 100.0,
        freq_hz: 60.0,
        buses: vec![],
        lines: vec![],
        generators: vec![],
        wind_farms: vec![],
        pfrs: vec![],
    };
    let mut costs: Vec<(usize, CostCurve)> = Vec::new();
    let mut section = Section::Preamble;
    let mut saw_header = false;

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if !saw_header {
            if body != CASE_HEADER {
                return Err(err(ln, format!("expected header {CASE_HEADER:?}")));
            }
            saw_header = true;
            continue;
        }
        if body.starts_with('[') {
            section = match body {
                "[bus]" => Section::Bus,
                "[branch]" => Section::Branch,
                "[gen]" => Section::Gen,
                "[gencost]" => Section::GenCost,
                "[wind]" => Section::Wind,
                "[pfr]" => Section::Pfr,
                other => return Err(err(ln, format!("unknown table {other}"))),
            };
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        match section {
            Section::Preamble => {
                let val = fields.get(1).ok_or_else(|| err(ln, "missing value"))?;
                match fields[0] {
                    "name" => case.name = fields[1..].join(" "),
                    "base_mva" => {
                        case.base_mva = val.parse().map_err(|_| err(ln, "bad base_mva"))?
                    }
                    "freq_hz" => case.freq_hz = val.parse().map_err(|_| err(ln, "bad freq_hz"))?,
                    other => return Err(err(ln, format!("unknown key {other}"))),
                }
            }
            Section::Bus => {
                if fields.len() != 8 {
                    return Err(err(ln, "bus row needs 8 columns"));
                }
                let kind = match fields[1] {
                    "ref" => BusKind::Ref,
                    "pv" => BusKind::Pv,
                    "pq" => BusKind::Pq,
                    other => return Err(err(ln, format!("unknown bus type {other}"))),
                };
                let mut v = nums(ln, &fields[2..])?;
                v.insert(0, fields[0].parse().map_err(|_| err(ln, "bad bus id"))?);
                case.buses.push(Bus {
                    id: as_id(ln, v[0])?,
                    kind,
                    pd: v[1],
                    qd: v[2],
                    gs: v[3],
                    bs: v[4],
                    v_min: v[5],
                    v_max: v[6],
                });
            }
            Section::Branch => {
                let v = nums(ln, &fields)?;
                want(ln, &v, 6, 7, "branch")?;
                let (id, f, t) = (as_id(ln, v[0])?, as_id(ln, v[1])?, as_id(ln, v[2])?);
                let mut line = Line::from_rxb(id, f, t, v[3], v[4], v[5])
                    .map_err(|_| err(ln, format!("line {id} has zero series impedance")))?;
                line.rating_mva = v.get(6).copied();
                case.lines.push(line);
            }
            Section::Gen => {
                let v = nums(ln, &fields)?;
                if v.len() != 8 && v.len() != 13 {
                    return Err(err(ln, "gen row needs 8 or 13 columns"));
                }
                let fourth_order = (v.len() == 13).then(|| FourthOrderData {
                    xd: v[8],
                    xq: v[9],
                    xq_prime: v[10],
                    td0_prime: v[11],
                    tq0_prime: v[12],
                });
                case.generators.push(Generator {
                    bus: as_id(ln, v[0])?,
                    cost: CostCurve {
                        c2: 0.0,
                        c1: 0.0,
                        c0: 0.0,
                    },
                    p_min: v[1],
                    p_max: v[2],
                    q_min: v[3],
                    q_max: v[4],
                    h: v[5],
                    d: v[6],
                    xd_prime: v[7],
                    fourth_order,
                });
            }
            Section::GenCost => {
                let v = nums(ln, &fields)?;
                want(ln, &v, 4, 4, "gencost")?;
                let g = as_id(ln, v[0])? as usize;
                if g == 0 {
                    return Err(err(ln, "gencost generator numbers are 1-based"));
                }
                costs.push((
                    g - 1,
                    CostCurve {
                        c2: v[1],
                        c1: v[2],
                        c0: v[3],
                    },
                ));
            }
            Section::Wind => {
                let v = nums(ln, &fields)?;
                want(ln, &v, 4, 4, "wind")?;
                case.wind_farms.push(WindFarm {
                    bus: as_id(ln, v[0])?,
                    forecast_mw: v[1],
                    day_ahead_alpha: v[2],
                    short_term_alpha: v[3],
                });
            }
            Section::Pfr => {
                let v = nums(ln, &fields)?;
                want(ln, &v, 5, 5, "pfr")?;
                case.pfrs.push(PfrLimits {
                    line: as_id(ln, v[0])?,
                    gamma_mag: (v[1], v[2]),
                    gamma_angle: (v[3].to_radians(), v[4].to_radians()),
                });
            }
        }
    }
    if !saw_header {
        return Err(err(0, "empty case file"));
    }
    let mut have_cost = vec![false; case.generators.len()];
    for (g, cost) in costs {
        let slot = case
            .generators
            .get_mut(g)
            .ok_or_else(|| Error::InvalidCase(format!("gencost for unknown generator {}", g + 1)))?;
        slot.cost = cost;
        have_cost[g] = true;
    }
    if let Some(g) = have_cost.iter().position(|h| !h) {
        return Err(Error::InvalidCase(format!(
            "generator {} has no gencost row",
            g + 1
        )));
    }
    Ok(case)
}

/// Inverse of [`parse_case`]. Floats are written in shortest round-trip form.
pub fn write_case(case: &NetworkCase) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CASE_HEADER}");
    let _ = writeln!(s, "name {}", case.name);
    let _ = writeln!(s, "base_mva {}", case.base_mva);
    let _ = writeln!(s, "freq_hz {}", case.freq_hz);
    let _ = writeln!(s, "\n[bus]\n# id type pd qd gs bs vmin vmax");
    for b in &case.buses {
        let kind = match b.kind {
            BusKind::Ref => "ref",
            BusKind::Pv => "pv",
            BusKind::Pq => "pq",
        };
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            b.id, kind, b.pd, b.qd, b.gs, b.bs, b.v_min, b.v_max
        );
    }
    let _ = writeln!(s, "\n[branch]\n# id from to r x b [rate_mva]");
    for l in &case.lines {
        let z = l.series_impedance();
        let _ = write!(
            s,
            "{} {} {} {} {} {}",
            l.id,
            l.from_bus,
            l.to_bus,
            z.re,
            z.im,
            2.0 * l.shunt_admittance.im
        );
        if let Some(r) = l.rating_mva {
            let _ = write!(s, " {r}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "\n[gen]\n# bus pmin pmax qmin qmax H D xd' [xd xq xq' Td0' Tq0']");
    for g in &case.generators {
        let _ = write!(
            s,
            "{} {} {} {} {} {} {} {}",
            g.bus, g.p_min, g.p_max, g.q_min, g.q_max, g.h, g.d, g.xd_prime
        );
        if let Some(f) = g.fourth_order {
            let _ = write!(
                s,
                " {} {} {} {} {}",
                f.xd, f.xq, f.xq_prime, f.td0_prime, f.tq0_prime
            );
        }
        s.push('\n');
    }
    let _ = writeln!(s, "\n[gencost]\n# gen c2 c1 c0");
    for (i, g) in case.generators.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", i + 1, g.cost.c2, g.cost.c1, g.cost.c0);
    }
    if !case.wind_farms.is_empty() {
        let _ = writeln!(s, "\n[wind]\n# bus forecast alpha_da alpha_st");
        for w in &case.wind_farms {
            let _ = writeln!(
                s,
                "{} {} {} {}",
                w.bus, w.forecast_mw, w.day_ahead_alpha, w.short_term_alpha
            );
        }
    }
    if !case.pfrs.is_empty() {
        let _ = writeln!(s, "\n[pfr]\n# line gamma_min gamma_max beta_min beta_max (deg)");
        for p in &case.pfrs {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                p.line,
                p.gamma_mag.0,
                p.gamma_mag.1,
                p.gamma_angle.0.to_degrees(),
                p.gamma_angle.1.to_degrees()
            );
        }
    }
    s
}
