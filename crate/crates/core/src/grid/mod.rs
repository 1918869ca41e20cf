//! Static network description: buses, lines, machines, wind farms and
//! power flow router (PFR) placements.
//!
//! All electrical quantities are held in per-unit on `base_mva` except the
//! MW/MVAr fields that mirror the case tables (loads, generator limits,
//! wind forecasts). Conversion happens through [`NetworkCase::pu`].

mod admittance;
mod case_file;
mod validate;

pub use admittance::{
    build_admittance, build_admittance_with, AdmittanceMatrix, BranchEnd, PfrSettings, Terminal,
    TerminalMap,
};
pub use case_file::{parse_case, write_case, CASE_HEADER};
pub use validate::{validate_case, IssueKind, ValidationIssue, ValidationReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    /// Angle reference. Exactly one per case.
    Ref,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    /// Active load, MW.
    pub pd: f64,
    /// Reactive load, MVAr.
    pub qd: f64,
    /// Shunt conductance, MW consumed at 1 p.u. voltage.
    pub gs: f64,
    /// Shunt susceptance, MVAr injected at 1 p.u. voltage.
    pub bs: f64,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series admittance, p.u.
    pub series_admittance: Complex64,
    /// Shunt admittance at each end, p.u.
    pub shunt_admittance: Complex64,
    /// Thermal rating, MVA (informational).
    pub rating_mva: Option<f64>,
}

impl Line {
    /// Line from the usual r, x, total-charging-b description.
    pub fn from_rxb(id: u32, from_bus: u32, to_bus: u32, r: f64, x: f64, b: f64) -> Result<Self> {
        let z = Complex64::new(r, x);
        if z.norm() == 0.0 {
            return Err(Error::DegenerateLine(id));
        }
        Ok(Self {
            id,
            from_bus,
            to_bus,
            series_admittance: z.inv(),
            shunt_admittance: Complex64::new(0.0, b / 2.0),
            rating_mva: None,
        })
    }

    pub fn series_impedance(&self) -> Complex64 {
        if self.series_admittance.norm() == 0.0 {
            Complex64::new(f64::INFINITY, f64::INFINITY)
        } else {
            self.series_admittance.inv()
        }
    }
}

/// Quadratic fuel cost `c2 P^2 + c1 P + c0` with P in MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CostCurve {
    pub fn eval(&self, p_mw: f64) -> f64 {
        self.c2 * p_mw * p_mw + self.c1 * p_mw + self.c0
    }
}

/// Two-axis machine constants, used when the simulator runs the
/// fourth-order model. Reactances in p.u., time constants in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthOrderData {
    pub xd: f64,
    pub xq: f64,
    pub xq_prime: f64,
    pub td0_prime: f64,
    pub tq0_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    pub cost: CostCurve,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Inertia constant on the system base, s.
    pub h: f64,
    /// Damping, p.u. power per p.u. speed deviation.
    pub d: f64,
    pub xd_prime: f64,
    pub fourth_order: Option<FourthOrderData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub bus: u32,
    /// Forecast output, MW.
    pub forecast_mw: f64,
    pub day_ahead_alpha: f64,
    pub short_term_alpha: f64,
}

/// Controllable range of the PFRs at both ends of one line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfrLimits {
    pub line: u32,
    /// Magnitude range of the terminal ratio, dimensionless.
    pub gamma_mag: (f64, f64),
    /// Angle range of the terminal ratio, radians.
    pub gamma_angle: (f64, f64),
}

impl PfrLimits {
    /// Limits used in the reference studies: 0.95..1.05 and +/-10 degrees.
    pub fn standard(line: u32) -> Self {
        let beta = 10f64.to_radians();
        Self {
            line,
            gamma_mag: (0.95, 1.05),
            gamma_angle: (-beta, beta),
        }
    }

    pub fn fixed(line: u32) -> Self {
        Self {
            line,
            gamma_mag: (1.0, 1.0),
            gamma_angle: (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub freq_hz: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    pub pfrs: Vec<PfrLimits>,
}

impl NetworkCase {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus_idx(&self, id: u32) -> Result<usize> {
        self.bus_index(id).ok_or(Error::UnknownBus(id))
    }

    pub fn line_index(&self, id: u32) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn line_idx(&self, id: u32) -> Result<usize> {
        self.line_index(id).ok_or(Error::UnknownLine(id))
    }

    /// Index of the angle reference bus.
    pub fn ref_bus(&self) -> Result<usize> {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Ref)
            .ok_or_else(|| Error::InvalidCase("no reference bus".into()))
    }

    /// PFR limits for the line at `line_idx`, if one is installed.
    pub fn pfr_for_line(&self, line_idx: usize) -> Option<&PfrLimits> {
        let id = self.lines[line_idx].id;
        self.pfrs.iter().find(|p| p.line == id)
    }

    /// MW (or MVAr) to per-unit.
    pub fn pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    /// Copy of the case with every PFR collapsed to unity ratio.
    pub fn without_pfr(&self) -> Self {
        let mut c = self.clone();
        c.pfrs.clear();
        c
    }

    /// Copy of the case with every PFR range replaced by `f(line)`.
    pub fn with_pfr_limits(&self, f: impl Fn(u32) -> PfrLimits) -> Self {
        let mut c = self.clone();
        for p in &mut c.pfrs {
            *p = f(p.line);
        }
        c
    }

    /// Copy of the case without the line `id`.
    pub fn without_line(&self, id: u32) -> Result<Self> {
        let idx = self.line_idx(id)?;
        let mut c = self.clone();
        c.lines.remove(idx);
        c.pfrs.retain(|p| p.line != id);
        Ok(c)
    }

    /// Active wind injection per bus in p.u. for the given farm outputs (MW).
    pub fn wind_injection_pu(&self, outputs_mw: &[f64]) -> Vec<f64> {
        let mut inj = vec![0.0; self.n_bus()];
        for (farm, &p) in self.wind_farms.iter().zip(outputs_mw) {
            if let Some(i) = self.bus_index(farm.bus) {
                inj[i] += p / self.base_mva;
            }
        }
        inj
    }

    pub fn wind_forecast(&self) -> Vec<f64> {
        self.wind_farms.iter().map(|w| w.forecast_mw).collect()
    }

    pub fn total_load_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.pd).sum()
    }

    /// Map from generator index to bus index.
    pub fn gen_bus_indices(&self) -> Result<Vec<usize>> {
        self.generators.iter().map(|g| self.bus_idx(g.bus)).collect()
    }
}
