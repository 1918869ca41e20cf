use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NetworkCase;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BranchEnd {
    From,
    To,
}

/// One directed branch end `i_j`: the terminal of line `line` sitting at `bus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub line: usize,
    pub end: BranchEnd,
    pub bus: usize,
    /// Bus at the other end of the line.
    pub remote_bus: usize,
}

/// Bijection between directed branch ends and `0..2E`.
///
/// Terminal `2l` is the from-end of line `l`, `2l + 1` its to-end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalMap {
    terminals: Vec<Terminal>,
}

impl TerminalMap {
    pub fn new(case: &NetworkCase) -> Result<Self> {
        let mut terminals = Vec::with_capacity(2 * case.lines.len());
        for (l, line) in case.lines.iter().enumerate() {
            let f = case.bus_idx(line.from_bus)?;
            let t = case.bus_idx(line.to_bus)?;
            terminals.push(Terminal {
                line: l,
                end: BranchEnd::From,
                bus: f,
                remote_bus: t,
            });
            terminals.push(Terminal {
                line: l,
                end: BranchEnd::To,
                bus: t,
                remote_bus: f,
            });
        }
        Ok(Self { terminals })
    }

    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn index(&self, line: usize, end: BranchEnd) -> usize {
        2 * line
            + match end {
                BranchEnd::From => 0,
                BranchEnd::To => 1,
            }
    }

    pub fn terminal(&self, idx: usize) -> &Terminal {
        &self.terminals[idx]
    }

    /// Index of the terminal at the other end of the same line.
    pub fn remote(&self, idx: usize) -> usize {
        idx ^ 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Terminal)> {
        self.terminals.iter().enumerate()
    }

    /// Terminal indices attached to `bus`.
    pub fn at_bus(&self, bus: usize) -> Vec<usize> {
        self.iter()
            .filter(|(_, t)| t.bus == bus)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Complex terminal ratios `gamma = V_terminal / V_bus`, keyed by terminal
/// index. Missing entries mean unity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PfrSettings {
    pub ratios: BTreeMap<usize, Complex64>,
}

impl PfrSettings {
    pub fn unity() -> Self {
        Self::default()
    }

    pub fn ratio(&self, terminal: usize) -> Complex64 {
        self.ratios
            .get(&terminal)
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BranchStamp {
    from: usize,
    to: usize,
    y: Complex64,
    ysh: Complex64,
    gamma_from: Complex64,
    gamma_to: Complex64,
}

impl BranchStamp {
    fn apply(&self, y: &mut DMatrix<Complex64>, sign: f64) {
        let (gf, gt) = (self.gamma_from, self.gamma_to);
        let yy = self.y + self.ysh;
        y[(self.from, self.from)] += yy * gf.norm_sqr() * sign;
        y[(self.to, self.to)] += yy * gt.norm_sqr() * sign;
        y[(self.from, self.to)] -= gf.conj() * gt * self.y * sign;
        y[(self.to, self.from)] -= gt.conj() * gf * self.y * sign;
    }
}

/// Bus admittance matrix with enough bookkeeping to trip lines and apply
/// bolted faults without rebuilding from the case.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    y: DMatrix<Complex64>,
    stamps: Vec<BranchStamp>,
    in_service: Vec<bool>,
    line_ids: Vec<u32>,
    grounded: Vec<usize>,
    terminals: TerminalMap,
}

/// Admittance matrix with all PFRs at unity ratio.
pub fn build_admittance(case: &NetworkCase) -> Result<AdmittanceMatrix> {
    build_admittance_with(case, &PfrSettings::unity())
}

/// Admittance matrix with the given terminal ratios applied. A terminal
/// ratio `g` at the from-end of a line acts as an ideal lossless complex
/// transformer between the bus and the line terminal.
pub fn build_admittance_with(case: &NetworkCase, pfr: &PfrSettings) -> Result<AdmittanceMatrix> {
    let n = case.n_bus();
    let terminals = TerminalMap::new(case)?;
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (i, bus) in case.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.gs, bus.bs) / case.base_mva;
    }
    let mut stamps = Vec::with_capacity(case.lines.len());
    for (l, line) in case.lines.iter().enumerate() {
        let ys = line.series_admittance;
        if !ys.is_finite() || ys.norm() == 0.0 {
            return Err(Error::DegenerateLine(line.id));
        }
        let stamp = BranchStamp {
            from: case.bus_idx(line.from_bus)?,
            to: case.bus_idx(line.to_bus)?,
            y: ys,
            ysh: line.shunt_admittance,
            gamma_from: pfr.ratio(terminals.index(l, BranchEnd::From)),
            gamma_to: pfr.ratio(terminals.index(l, BranchEnd::To)),
        };
        stamp.apply(&mut y, 1.0);
        stamps.push(stamp);
    }
    Ok(AdmittanceMatrix {
        y,
        in_service: vec![true; stamps.len()],
        line_ids: case.lines.iter().map(|l| l.id).collect(),
        stamps,
        grounded: Vec::new(),
        terminals,
    })
}

impl AdmittanceMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.y
    }

    pub fn n_bus(&self) -> usize {
        self.y.nrows()
    }

    pub fn terminals(&self) -> &TerminalMap {
        &self.terminals
    }

    /// Buses held at zero voltage by a bolted fault.
    pub fn grounded(&self) -> &[usize] {
        &self.grounded
    }

    pub fn line_in_service(&self, line: usize) -> bool {
        self.in_service[line]
    }

    /// Copy with a bolted three-phase fault at bus index `bus`. The bus is
    /// eliminated (held at zero voltage) when the network is reduced.
    pub fn apply_fault(&self, bus: usize) -> Result<Self> {
        if bus >= self.n_bus() {
            return Err(Error::Domain(format!("fault bus index {bus}")));
        }
        let mut out = self.clone();
        if !out.grounded.contains(&bus) {
            out.grounded.push(bus);
            out.grounded.sort_unstable();
        }
        Ok(out)
    }

    pub fn clear_fault(&self, bus: usize) -> Self {
        let mut out = self.clone();
        out.grounded.retain(|&b| b != bus);
        out
    }

    /// Copy with line index `line` removed. Fails if the remaining
    /// in-service lines no longer connect every bus.
    pub fn apply_line_trip(&self, line: usize) -> Result<Self> {
        if line >= self.stamps.len() {
            return Err(Error::Domain(format!("line index {line}")));
        }
        let id = self.line_ids[line];
        if !self.in_service[line] {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.in_service[line] = false;
        if !out.is_connected() {
            return Err(Error::Islanding(id));
        }
        out.stamps[line].apply(&mut out.y, -1.0);
        Ok(out)
    }

    pub fn restore_line(&self, line: usize) -> Self {
        let mut out = self.clone();
        if !out.in_service[line] {
            out.in_service[line] = true;
            out.stamps[line].apply(&mut out.y, 1.0);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_bus();
        if n == 0 {
            return true;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (s, on) in self.stamps.iter().zip(&self.in_service) {
            if *on {
                let (a, b) = (find(&mut parent, s.from), find(&mut parent, s.to));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let root = find(&mut parent, 0);
        (1..n).all(|i| find(&mut parent, i) == root)
    }

    /// Complex power injected at every bus for bus voltages `v`.
    pub fn injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_bus();
        (0..n)
            .map(|i| {
                let current: Complex64 = (0..n).map(|j| self.y[(i, j)] * v[j]).sum();
                v[i] * current.conj()
            })
            .collect()
    }
}
