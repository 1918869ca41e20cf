//! Single-machine-equivalent stability assessment: critical machine
//! grouping, OMIB margins, sensitivities and linearized stability cuts.

mod omib;
mod sensitivity;

pub use omib::{build_omib, compute_margin, group_by_largest_gap, grouping_step, identify_critical_machines, MachineGrouping, MarginClass, OmibTrajectory, StabilityMargin, MARGIN_TOL};
pub use sensitivity::{build_constraint, estimate_cct, evaluate_margin, trajectory_sensitivity, CctEstimate, MarginEvaluation, CCT_TOL, SensitivityVector, DEFAULT_STEP_FRACTION};

use serde::{Deserialize, Serialize};

/// Linearized stability requirement for one (contingency, scenario) pair:
/// `eta0 + sum_i phi_i (P_Gi - P0_i) >= 0`, powers in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TscConstraint {
    pub contingency: usize,
    /// Position of the scenario in the reduced set.
    pub scenario: usize,
    pub eta0: f64,
    /// Margin sensitivity per generator, per MW.
    pub phi: Vec<f64>,
    /// Dispatch the margin was evaluated at, MW.
    pub p0_mw: Vec<f64>,
    /// Stable at the evaluated dispatch; the cut then requires nothing.
    pub stable: bool,
    /// False when the finite-difference sensitivities disagreed in sign
    /// between the two perturbation sizes.
    pub reliable: bool,
}

impl TscConstraint {
    /// Linearized margin at dispatch `p_mw`.
    pub fn predicted_margin(&self, p_mw: &[f64]) -> f64 {
        self.eta0
            + self
                .phi
                .iter()
                .zip(p_mw.iter().zip(&self.p0_mw))
                .map(|(f, (p, p0))| f * (p - p0))
                .sum::<f64>()
    }
}
