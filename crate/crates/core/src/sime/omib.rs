use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{classify_stability, Stability, Trajectory, DEFAULT_INSTABILITY_SPREAD};
use crate::error::{Error, Result};

/// Margins smaller than this in magnitude are reported as marginal,
/// p.u. power times rad.
pub const MARGIN_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineGrouping {
    pub critical: Vec<usize>,
    pub non_critical: Vec<usize>,
}

/// Splits machines at the largest gap between consecutive sorted angles.
/// The advanced side is critical.
pub fn group_by_largest_gap(angles: &[f64]) -> Result<MachineGrouping> {
    if angles.len() < 2 {
        return Err(Error::DegenerateGrouping("fewer than two machines".into()));
    }
    let mut order: Vec<usize> = (0..angles.len()).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));
    let (mut best, mut at) = (0.0, 0);
    for w in 1..order.len() {
        let gap = angles[order[w]] - angles[order[w - 1]];
        if gap > best {
            best = gap;
            at = w;
        }
    }
    if best <= 0.0 {
        return Err(Error::DegenerateGrouping("all rotor angles equal".into()));
    }
    let mut critical = order[at..].to_vec();
    let mut non_critical = order[..at].to_vec();
    critical.sort_unstable();
    non_critical.sort_unstable();
    Ok(MachineGrouping { critical, non_critical })
}

/// Reference step for grouping: the instability time if the run is
/// unstable, else the step of largest angle spread.
pub fn grouping_step(traj: &Trajectory) -> usize {
    match classify_stability(traj, DEFAULT_INSTABILITY_SPREAD) {
        Stability::Unstable { t_u } => ((t_u / traj.dt).round() as usize).min(traj.len() - 1),
        Stability::Stable => (0..traj.len())
            .max_by(|&a, &b| traj.spread(a).total_cmp(&traj.spread(b)).then(b.cmp(&a)))
            .unwrap_or(0),
    }
}

pub fn identify_critical_machines(traj: &Trajectory) -> Result<MachineGrouping> {
    if traj.is_empty() {
        return Err(Error::DegenerateGrouping("empty trajectory".into()));
    }
    let k = grouping_step(traj);
    let stable = classify_stability(traj, DEFAULT_INSTABILITY_SPREAD).is_stable();
    // small swings are ranked by excursion so pre-fault offsets do not decide
    let angles: Vec<f64> = (0..traj.n_machines())
        .map(|m| traj.states[m][k].delta - if stable { traj.states[m][0].delta } else { 0.0 })
        .collect();
    group_by_largest_gap(&angles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmibTrajectory {
    pub time: Vec<f64>,
    pub delta: Vec<f64>,
    /// Speed deviation, p.u.
    pub omega: Vec<f64>,
    pub p_m: Vec<f64>,
    pub p_e: Vec<f64>,
    /// Equivalent inertia `M_C M_N / (M_C + M_N)`, s.
    pub inertia: f64,
    pub omega_s: f64,
    pub t_clear: f64,
    pub dt: f64,
}

impl OmibTrajectory {
    pub fn p_a(&self, k: usize) -> f64 {
        self.p_m[k] - self.p_e[k]
    }
}

/// Inertia-weighted one-machine equivalent of `grouping`.
pub fn build_omib(traj: &Trajectory, grouping: &MachineGrouping) -> Result<OmibTrajectory> {
    let n = traj.n_machines();
    let mut seen = vec![false; n];
    for &m in grouping.critical.iter().chain(&grouping.non_critical) {
        if m >= n || seen[m] {
            return Err(Error::DegenerateGrouping("grouping is not a partition".into()));
        }
        seen[m] = true;
    }
    if grouping.critical.is_empty() || grouping.non_critical.is_empty() || seen.iter().any(|s| !s) {
        return Err(Error::DegenerateGrouping("grouping is not a proper split".into()));
    }
    let mc: f64 = grouping.critical.iter().map(|&m| traj.inertia[m]).sum();
    let mn: f64 = grouping.non_critical.iter().map(|&m| traj.inertia[m]).sum();
    if mc <= 0.0 || mn <= 0.0 {
        return Err(Error::DegenerateGrouping("zero group inertia".into()));
    }
    let m_eq = mc * mn / (mc + mn);
    let coi = |group: &[usize], total: f64, f: &dyn Fn(usize) -> f64| group.iter().map(|&m| traj.inertia[m] * f(m)).sum::<f64>() / total;
    let sum = |group: &[usize], f: &dyn Fn(usize) -> f64| group.iter().map(|&m| f(m)).sum::<f64>();
    let len = traj.len();
    let mut out = OmibTrajectory {
        time: traj.time.clone(),
        delta: Vec::with_capacity(len),
        omega: Vec::with_capacity(len),
        p_m: Vec::with_capacity(len),
        p_e: Vec::with_capacity(len),
        inertia: m_eq,
        omega_s: traj.omega_s,
        t_clear: traj.t_clear,
        dt: traj.dt,
    };
    let (c, nc) = (&grouping.critical, &grouping.non_critical);
    for k in 0..len {
        out.delta.push(coi(c, mc, &|m| traj.states[m][k].delta) - coi(nc, mn, &|m| traj.states[m][k].delta));
        out.omega.push(coi(c, mc, &|m| traj.states[m][k].omega) - coi(nc, mn, &|m| traj.states[m][k].omega));
        out.p_m.push(m_eq * (sum(c, &|m| traj.p_m[m]) / mc - sum(nc, &|m| traj.p_m[m]) / mn));
        out.p_e.push(m_eq * (sum(c, &|m| traj.p_e[m][k]) / mc - sum(nc, &|m| traj.p_e[m][k]) / mn));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginClass {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityMargin {
    pub eta: f64,
    pub class: MarginClass,
    /// Angle of the deciding event: the unstable crossing or the return.
    pub delta_event: Option<f64>,
    /// Unstable equilibrium angle from the post-fault fit (stable runs).
    pub delta_u: Option<f64>,
}

impl StabilityMargin {
    fn from_eta(eta: f64, delta_event: Option<f64>, delta_u: Option<f64>) -> Self {
        let class = if eta.abs() < MARGIN_TOL {
            MarginClass::Marginal
        } else if eta > 0.0 {
            MarginClass::Stable
        } else {
            MarginClass::Unstable
        };
        Self { eta, class, delta_event, delta_u }
    }
}

/// Least-squares `P_e = c + a sin(delta) + b cos(delta)`.
pub(crate) fn fit_sinusoid(delta: &[f64], p_e: &[f64]) -> Option<(f64, f64, f64)> {
    if delta.len() < 3 {
        return None;
    }
    let a = DMatrix::from_fn(delta.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => delta[i].sin(),
        _ => delta[i].cos(),
    });
    let b = DVector::from_column_slice(p_e);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-12).ok()?;
    Some((x[0], x[1], x[2]))
}

/// Margin of an OMIB trajectory from its first post-fault event.
///
/// Unstable: `P_a` rises back through zero while `omega > 0`; the margin is
/// minus the kinetic energy left at that angle, `-M omega_s omega^2 / 2`.
/// Stable: `omega` returns to zero first; the margin is the decelerating
/// area left between the return angle and the unstable equilibrium of a
/// sinusoid fitted to the post-fault `P_e(delta)` over the first swing and
/// back-swing. A run that never
/// decelerates after clearing is unstable with the kinetic energy at
/// clearing as excess. Anything else is marginal with zero margin.
pub fn compute_margin(omib: &OmibTrajectory) -> StabilityMargin {
    let n = omib.time.len();
    let kcl = ((omib.t_clear / omib.dt).round() as usize).min(n.saturating_sub(1));
    for k in kcl + 1..n {
        let (pa0, pa1) = (omib.p_a(k - 1), omib.p_a(k));
        let (w0, w1) = (omib.omega[k - 1], omib.omega[k]);
        if pa0 < 0.0 && pa1 >= 0.0 && w1 > 0.0 {
            let f = -pa0 / (pa1 - pa0);
            let w = w0 + f * (w1 - w0);
            let d = omib.delta[k - 1] + f * (omib.delta[k] - omib.delta[k - 1]);
            let eta = -0.5 * omib.inertia * omib.omega_s * w * w;
            return StabilityMargin::from_eta(eta, Some(d), None);
        }
        if w0 > 0.0 && w1 <= 0.0 {
            let f = w0 / (w0 - w1);
            let d_r = omib.delta[k - 1] + f * (omib.delta[k] - omib.delta[k - 1]);
            // the back-swing widens the angle range the fit sees
            let end = (k + 1..n).find(|&j| omib.omega[j - 1] <= 0.0 && omib.omega[j] > 0.0).unwrap_or(n - 1);
            let fit = fit_sinusoid(&omib.delta[kcl..=end], &omib.p_e[kcl..=end]);
            let Some((c, a, b)) = fit else {
                return StabilityMargin::from_eta(0.0, Some(d_r), None);
            };
            let pm = omib.p_m[k];
            let p_max = a.hypot(b);
            let phi = b.atan2(a);
            // P_e = c + p_max sin(delta + phi); descending crossing with P_m
            let ratio = if p_max > 0.0 { ((pm - c) / p_max).clamp(-1.0, 1.0) } else { 1.0 };
            let mut d_u = PI - ratio.asin() - phi;
            while d_u < d_r - PI {
                d_u += 2.0 * PI;
            }
            while d_u > d_r + PI {
                d_u -= 2.0 * PI;
            }
            let area = c * (d_u - d_r) + a * (d_r.cos() - d_u.cos()) + b * (d_u.sin() - d_r.sin()) - pm * (d_u - d_r);
            return StabilityMargin::from_eta(area.max(0.0), Some(d_r), Some(d_u));
        }
    }
    // never decelerated after clearing and still moving apart
    let post = kcl + 1..n;
    if n > kcl + 1 && post.clone().all(|k| omib.p_a(k) >= 0.0 && omib.omega[k] > 0.0) {
        let w = omib.omega[kcl];
        return StabilityMargin::from_eta(-0.5 * omib.inertia * omib.omega_s * w * w, Some(omib.delta[kcl]), None);
    }
    StabilityMargin::from_eta(0.0, None, None)
}
