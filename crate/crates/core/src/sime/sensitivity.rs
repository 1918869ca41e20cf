use serde::{Deserialize, Serialize};

use super::omib::{build_omib, compute_margin, identify_critical_machines, MachineGrouping, MarginClass, StabilityMargin};
use super::TscConstraint;
use crate::dynamics::{classify_stability, run_tds, FaultEvent, OperatingPoint, SimConfig, Stability, DEFAULT_INSTABILITY_SPREAD};
use crate::error::{Error, Result};
use crate::grid::NetworkCase;
use crate::scenario::Scenario;

/// Perturbation per generator as a fraction of its active limit.
pub const DEFAULT_STEP_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginEvaluation {
    pub margin: StabilityMargin,
    pub stability: Stability,
    pub grouping: MachineGrouping,
}

/// One simulation followed by grouping, OMIB reduction and margin.
pub fn evaluate_margin(case: &NetworkCase, op: &OperatingPoint, scenario: &Scenario, fault: &FaultEvent, config: &SimConfig) -> Result<MarginEvaluation> {
    let traj = run_tds(case, op, scenario, fault, config)?;
    let stability = classify_stability(&traj, DEFAULT_INSTABILITY_SPREAD);
    let grouping = identify_critical_machines(&traj)?;
    let omib = build_omib(&traj, &grouping)?;
    Ok(MarginEvaluation {
        margin: compute_margin(&omib),
        stability,
        grouping,
    })
}

/// Margin gradient over generator set-points at a (contingency, scenario)
/// pair. Entries satisfy `sum_i rho_i phi_i = 0`, since a common shift
/// along the participation factors is absorbed by the slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityVector {
    /// Per p.u. of system base.
    pub phi_pu: Vec<f64>,
    pub eta0: f64,
    pub base: MarginEvaluation,
    /// Set-points before compensation, MW.
    pub p0_mw: Vec<f64>,
    /// Set-points after compensation for the scenario, MW.
    pub p0_compensated_mw: Vec<f64>,
    /// Step used per generator, MW.
    pub step_mw: Vec<f64>,
    /// False when a perturbation flipped the classification even after the
    /// step was halved.
    pub reliable: bool,
}

impl SensitivityVector {
    pub fn phi_per_mw(&self, base_mva: f64) -> Vec<f64> {
        self.phi_pu.iter().map(|f| f / base_mva).collect()
    }
}

fn class_sign(c: MarginClass) -> i8 {
    match c {
        MarginClass::Stable => 1,
        MarginClass::Unstable => -1,
        MarginClass::Marginal => 0,
    }
}

/// Central-difference margin sensitivities. Each generator is moved by
/// `+-step` with the others compensating in proportion to their
/// participation factors; the directional derivative `D_i` then maps to the
/// balanced gradient as `phi_i = (1 - rho_i) D_i`.
pub fn trajectory_sensitivity(
    case: &NetworkCase,
    op: &OperatingPoint,
    scenario: &Scenario,
    fault: &FaultEvent,
    config: &SimConfig,
    step_fraction: f64,
) -> Result<SensitivityVector> {
    let n = case.generators.len();
    if op.p_g_mw.len() != n || op.rho.len() != n {
        return Err(Error::Dimension(format!("operating point has {} set-points for {n} generators", op.p_g_mw.len())));
    }
    if !(step_fraction > 0.0) {
        return Err(Error::Domain(format!("step fraction {step_fraction} must be positive")));
    }
    let base = evaluate_margin(case, op, scenario, fault, config)?;
    let base_sign = class_sign(base.margin.class);
    let mut phi_pu = vec![0.0; n];
    let mut step_mw = vec![0.0; n];
    let mut reliable = true;
    for i in 0..n {
        let mut h = step_fraction * case.generators[i].p_max.abs().max(1.0);
        let mut d = 0.0;
        for attempt in 0..2 {
            let plus = evaluate_margin(case, &op.shifted(i, h), scenario, fault, config)?;
            let minus = evaluate_margin(case, &op.shifted(i, -h), scenario, fault, config)?;
            d = (plus.margin.eta - minus.margin.eta) / (2.0 * h);
            let flipped = [plus.margin.class, minus.margin.class]
                .iter()
                .any(|&c| class_sign(c) != base_sign);
            if !flipped {
                break;
            }
            if attempt == 0 {
                h *= 0.5;
            } else {
                reliable = false;
            }
        }
        step_mw[i] = h;
        phi_pu[i] = (1.0 - op.rho[i]) * d * case.base_mva;
    }
    Ok(SensitivityVector {
        phi_pu,
        eta0: base.margin.eta,
        p0_mw: op.p_g_mw.clone(),
        p0_compensated_mw: op.compensated(case, scenario),
        step_mw,
        base,
        reliable,
    })
}

pub fn build_constraint(sens: &SensitivityVector, base_mva: f64, contingency: usize, scenario: usize) -> TscConstraint {
    TscConstraint {
        contingency,
        scenario,
        eta0: sens.eta0,
        phi: sens.phi_per_mw(base_mva),
        p0_mw: sens.p0_mw.clone(),
        stable: sens.base.margin.class == MarginClass::Stable,
        reliable: sens.reliable,
    }
}

/// Bracket width at which clearing-time refinement stops, s.
pub const CCT_TOL: f64 = 1e-3;
const CCT_MAX_REFINE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CctEstimate {
    pub cct: f64,
    /// Every (clearing time, margin) pair evaluated, in evaluation order.
    pub samples: Vec<(f64, f64)>,
}

fn line_root(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let ste: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum();
    if stt == 0.0 || ste == 0.0 {
        return None;
    }
    let slope = ste / stt;
    let residual = pts.iter().map(|p| (p.1 - me - slope * (p.0 - mt)).abs()).fold(0.0, f64::max);
    Some((mt - me / slope, residual))
}

/// Critical clearing time from OMIB margins at four clearing times spread
/// over `[t_lo, t_hi]`. A fitted line gives a first root; regula falsi
/// steps then shrink the sign-change bracket below [`CCT_TOL`] and the
/// answer is the secant root of the final bracket.
pub fn estimate_cct(
    case: &NetworkCase,
    op: &OperatingPoint,
    scenario: &Scenario,
    fault: &FaultEvent,
    config: &SimConfig,
    bracket: (f64, f64),
) -> Result<CctEstimate> {
    let (t_lo, t_hi) = bracket;
    if !(t_lo > fault.t0 && t_hi > t_lo) {
        return Err(Error::Domain(format!("bad clearing bracket [{t_lo}, {t_hi}]")));
    }
    let eta = |t: f64| evaluate_margin(case, op, scenario, &fault.with_clearing(t), config).map(|e| e.margin.eta);
    let mut samples = Vec::new();
    for k in 0..4 {
        let t = t_lo + (t_hi - t_lo) * k as f64 / 3.0;
        samples.push((t, eta(t)?));
    }
    let no_change = |s: &[(f64, f64)]| Error::NoSignChange {
        t_lo,
        t_hi,
        margins: s.iter().map(|p| p.1).collect(),
    };
    if !(samples[0].1 > 0.0 && samples[3].1 < 0.0) {
        return Err(no_change(&samples));
    }
    let bracket_of = |s: &[(f64, f64)]| {
        let lo = s.iter().filter(|p| p.1 > 0.0).max_by(|a, b| a.0.total_cmp(&b.0)).copied();
        let hi = s.iter().filter(|p| p.1 <= 0.0).min_by(|a, b| a.0.total_cmp(&b.0)).copied();
        lo.zip(hi)
    };
    let (a, b) = bracket_of(&samples).ok_or_else(|| no_change(&samples))?;
    let guess = match line_root(&samples) {
        Some((r, _)) if r > a.0 && r < b.0 => r,
        _ => 0.5 * (a.0 + b.0),
    };
    samples.push((guess, eta(guess)?));
    // regula falsi with a bisection fallback until the bracket is tight
    for _ in 0..CCT_MAX_REFINE {
        let (a, b) = bracket_of(&samples).ok_or_else(|| no_change(&samples))?;
        if b.0 - a.0 < CCT_TOL {
            break;
        }
        let secant = a.0 + a.1 * (b.0 - a.0) / (a.1 - b.1);
        let margin = 0.1 * (b.0 - a.0);
        let t = if secant - a.0 < margin || b.0 - secant < margin { 0.5 * (a.0 + b.0) } else { secant };
        samples.push((t, eta(t)?));
    }
    let (a, b) = bracket_of(&samples).ok_or_else(|| no_change(&samples))?;
    let cct = if a.1 == b.1 { 0.5 * (a.0 + b.0) } else { a.0 + a.1 * (b.0 - a.0) / (a.1 - b.1) };
    Ok(CctEstimate { cct, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_root_of_exact_line() {
        let pts = [(0.1, 2.0), (0.2, 1.0), (0.3, 0.0), (0.4, -1.0)];
        let (r, res) = line_root(&pts).unwrap();
        assert!((r - 0.3).abs() < 1e-12 && res < 1e-12);
        assert!(line_root(&[(0.1, 1.0), (0.2, 1.0)]).is_none());
    }
}
