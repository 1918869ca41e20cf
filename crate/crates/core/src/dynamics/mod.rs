//! Time-domain simulation of machine rotor dynamics through a fault and
//! line-trip sequence.
//!
//! Machines are classical (constant EMF behind `x'_d`) or two-axis
//! (fourth order, requires `x'_q = x'_d`). Loads become constant
//! impedances at the initial voltage; wind farms stay constant-power
//! injections at the scenario output with a current limit. Speeds are
//! per-unit deviations from synchronous speed, so `d delta / dt = omega_s
//! omega` and `2H d omega / dt = P_m - P_e - D omega`.

mod network;
mod powerflow;
mod sim;

pub use network::{kron_reduce, ReducedNetwork};
pub use powerflow::{solve_power_flow, PowerFlowSolution};
pub use sim::{initialize_equilibrium, run_tds, Equilibrium, WIND_CURRENT_LIMIT};

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{NetworkCase, PfrSettings};
use crate::opf::{wind_shortfall, DispatchSolution};
use crate::scenario::Scenario;

static TDS_CALLS: AtomicU64 = AtomicU64::new(0);

/// Number of time-domain simulations run by this process so far.
pub fn tds_calls() -> u64 {
    TDS_CALLS.load(Ordering::SeqCst)
}

pub(crate) fn count_tds() {
    TDS_CALLS.fetch_add(1, Ordering::SeqCst);
}

/// Default classification threshold on the largest rotor-angle
/// separation, rad.
pub const DEFAULT_INSTABILITY_SPREAD: f64 = std::f64::consts::PI;

/// Dispatch handed to the simulator: generator set-points before wind
/// compensation, participation factors, voltage set-points and PFR ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub p_g_mw: Vec<f64>,
    pub q_g_mvar: Vec<f64>,
    pub rho: Vec<f64>,
    /// Voltage magnitude per bus. Held at ref and PV buses, initial guess
    /// elsewhere.
    pub v_set: Vec<f64>,
    /// Initial guess for bus angles, rad.
    pub v_angle: Option<Vec<f64>>,
    pub pfr: PfrSettings,
}

impl OperatingPoint {
    /// Flat-start operating point with unity voltages and no PFR action.
    pub fn flat(case: &NetworkCase, p_g_mw: Vec<f64>, rho: Vec<f64>) -> Self {
        Self {
            q_g_mvar: vec![0.0; p_g_mw.len()],
            p_g_mw,
            rho,
            v_set: vec![1.0; case.n_bus()],
            v_angle: None,
            pfr: PfrSettings::unity(),
        }
    }

    pub fn from_dispatch(sol: &DispatchSolution) -> Self {
        Self {
            p_g_mw: sol.p_g_mw.clone(),
            q_g_mvar: sol.q_g_mvar.clone(),
            rho: sol.rho.clone(),
            v_set: sol.bus_voltages.iter().map(|v| v.norm()).collect(),
            v_angle: Some(sol.bus_voltages.iter().map(|v| v.arg()).collect()),
            pfr: sol.pfr_settings(),
        }
    }

    /// Set-points after the machines cover the scenario's wind shortfall.
    pub fn compensated(&self, case: &NetworkCase, scenario: &Scenario) -> Vec<f64> {
        let s = wind_shortfall(&case.wind_forecast(), &scenario.p_w);
        self.p_g_mw.iter().zip(&self.rho).map(|(p, r)| p + r * s).collect()
    }

    /// Copy with `delta_mw` added to generator `gen` and removed from the
    /// others in proportion to their participation factors.
    pub fn shifted(&self, gen: usize, delta_mw: f64) -> Self {
        let mut out = self.clone();
        let others: f64 = self.rho.iter().enumerate().filter(|&(i, _)| i != gen).map(|(_, r)| r).sum();
        let n = self.rho.len();
        for i in 0..n {
            if i == gen {
                out.p_g_mw[i] += delta_mw;
            } else if others > 0.0 {
                out.p_g_mw[i] -= delta_mw * self.rho[i] / others;
            } else {
                out.p_g_mw[i] -= delta_mw / (n - 1) as f64;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    pub delta: f64,
    /// Speed deviation, p.u. of synchronous speed.
    pub omega: f64,
    /// Two-axis transient EMFs, p.u.; `None` for classical machines.
    pub e_q: Option<f64>,
    pub e_d: Option<f64>,
}

/// Three-phase bolted fault at `fault_bus` from `t0`, cleared at `t_cl` by
/// opening `trip_line` (or by the fault vanishing when `None`). Bus and
/// line are case ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub fault_bus: u32,
    pub t0: f64,
    pub t_cl: f64,
    pub trip_line: Option<u32>,
}

impl FaultEvent {
    pub fn with_clearing(&self, t_cl: f64) -> Self {
        Self { t_cl, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOrder {
    Classical,
    /// Two-axis model for machines with fourth-order data; the rest stay
    /// classical.
    Fourth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub model_order: ModelOrder,
    /// Integration stops once the rotor-angle spread exceeds this, rad.
    pub divergence_guard: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 5.0,
            model_order: ModelOrder::Classical,
            divergence_guard: 2.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub time: Vec<f64>,
    /// `states[machine][step]`.
    pub states: Vec<Vec<MachineState>>,
    /// Electrical power, p.u., `p_e[machine][step]`.
    pub p_e: Vec<Vec<f64>>,
    /// Mechanical power, p.u., constant over the run.
    pub p_m: Vec<f64>,
    /// Inertia coefficients `M = 2H`, s.
    pub inertia: Vec<f64>,
    /// Synchronous speed, rad/s.
    pub omega_s: f64,
    /// Fault and clearing instants after snapping to the grid, s.
    pub t_fault: f64,
    pub t_clear: f64,
    /// True when the divergence guard cut the run short.
    pub diverged: bool,
}

impl Trajectory {
    pub fn n_machines(&self) -> usize {
        self.states.len()
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn delta(&self, machine: usize) -> Vec<f64> {
        self.states[machine].iter().map(|s| s.delta).collect()
    }

    pub fn omega(&self, machine: usize) -> Vec<f64> {
        self.states[machine].iter().map(|s| s.omega).collect()
    }

    /// Largest rotor-angle separation at step `k`.
    pub fn spread(&self, k: usize) -> f64 {
        let (lo, hi) = self
            .states
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[k].delta), hi.max(s[k].delta)));
        hi - lo
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        bincode::serialize(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        bincode::deserialize(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Columnar text: time, then delta, omega and P_e per machine.
pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut s = String::from("t");
    for m in 0..traj.n_machines() {
        write!(s, " delta_{m} omega_{m} pe_{m}").unwrap();
    }
    s.push('\n');
    for k in 0..traj.len() {
        write!(s, "{:.6}", traj.time[k]).unwrap();
        for m in 0..traj.n_machines() {
            let st = traj.states[m][k];
            write!(s, " {:.9e} {:.9e} {:.9e}", st.delta, st.omega, traj.p_e[m][k]).unwrap();
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stability {
    Stable,
    /// First time the rotor-angle spread exceeded the threshold, s.
    Unstable { t_u: f64 },
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

/// Unstable at the first step whose rotor-angle spread exceeds
/// `threshold`; a run cut short by the divergence guard is unstable at its
/// last step.
pub fn classify_stability(traj: &Trajectory, threshold: f64) -> Stability {
    for k in 0..traj.len() {
        if traj.spread(k) > threshold {
            return Stability::Unstable { t_u: traj.time[k] };
        }
    }
    match (traj.diverged, traj.time.last()) {
        (true, Some(&t)) => Stability::Unstable { t_u: t },
        _ => Stability::Stable,
    }
}
