use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conic::{solve_admm, AdmmSettings, SolverState, SolverStatus};
use crate::error::{Error, Result};
use crate::grid::{build_admittance_with, BranchEnd, PfrSettings, TerminalMap};

use super::model::{build_model_pinned, BusSquare, NodeKind, SdpModel};
use super::{fuel_cost, ExactnessPenalty};

/// Minimum ratio of the two leading eigenvalues of `W` for the relaxation
/// to count as exact.
pub const EXACTNESS_THRESHOLD: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfrSetting {
    pub line: u32,
    pub end: BranchEnd,
    pub terminal: usize,
    pub magnitude: f64,
    pub angle_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1Recovery {
    pub node_voltages: Vec<Complex64>,
    pub bus_voltages: Vec<Complex64>,
    pub pfr: Vec<PfrSetting>,
    /// `lambda_1 / lambda_2` of the Hermitian `W`, capped at 1e16.
    pub ratio: f64,
    pub exact: bool,
    /// Frobenius norm of `W - v v*`.
    pub residual: f64,
}

impl Rank1Recovery {
    pub fn pfr_settings(&self) -> PfrSettings {
        let mut s = PfrSettings::unity();
        for p in &self.pfr {
            s.ratios.insert(p.terminal, Complex64::from_polar(p.magnitude, p.angle_rad));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub p_g_mw: Vec<f64>,
    pub q_g_mvar: Vec<f64>,
    pub rho: Vec<f64>,
    pub pfr: Vec<PfrSetting>,
    pub bus_voltages: Vec<Complex64>,
    /// Fuel plus expected recourse cost at the recovered dispatch, $/h.
    pub objective: f64,
    /// Exactness penalty at the optimum, $/h (not part of `objective`).
    pub penalty: f64,
    pub exactness_ratio: f64,
    pub exact: bool,
    pub rank1_residual: f64,
    /// Largest per-bus complex power mismatch of the recovered voltages
    /// against the dispatched injections at the forecast, p.u.
    pub balance_residual: f64,
    pub status: SolverStatus,
    /// Fuel plus recourse cost of the first relaxation solve, $/h. Equals
    /// `objective` unless the PFRs were pinned and re-solved.
    pub relaxation_objective: f64,
    pub relaxation_ratio: f64,
    /// True if the reported dispatch comes from a second solve with the
    /// PFR ratios fixed.
    pub pfr_pinned: bool,
}

impl DispatchSolution {
    pub fn pfr_settings(&self) -> PfrSettings {
        let mut s = PfrSettings::unity();
        for p in &self.pfr {
            s.ratios.insert(p.terminal, Complex64::from_polar(p.magnitude, p.angle_rad));
        }
        s
    }

    pub fn voltage_magnitudes(&self) -> Vec<f64> {
        self.bus_voltages.iter().map(|v| v.norm()).collect()
    }
}

fn hermitian_from_x(model: &SdpModel, x: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = model.n_nodes();
    let xv = |r: usize, c: usize| x[model.x_var(r, c)];
    let a = DMatrix::from_fn(k, k, |i, j| 0.5 * (xv(i, j) + xv(k + i, k + j)));
    let b = DMatrix::from_fn(k, k, |i, j| 0.5 * (xv(k + i, j) - xv(i, k + j)));
    (a, b)
}

fn circular_mean(angles: &[f64]) -> f64 {
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    s.atan2(c)
}

/// Leading-eigenvector recovery of node and bus voltages and PFR ratios
/// from a solution vector of `model`.
pub fn recover_rank1(model: &SdpModel, x: &DVector<f64>) -> Result<Rank1Recovery> {
    let k = model.n_nodes();
    let (a, b) = hermitian_from_x(model, x);
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    m.view_mut((0, 0), (k, k)).copy_from(&a);
    m.view_mut((k, k), (k, k)).copy_from(&a);
    m.view_mut((0, k), (k, k)).copy_from(&(-&b));
    m.view_mut((k, 0), (k, k)).copy_from(&b);
    let eig = SymmetricEigen::try_new(m, 1e-14, 10_000).ok_or(Error::Eigen)?;
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let l1 = eig.eigenvalues[order[0]].max(0.0);
    // eigenvalues of the real embedding come in equal pairs
    let l2 = if 2 * k > 2 { eig.eigenvalues[order[2]] } else { 0.0 };
    let ratio = if l1 <= 0.0 { 0.0 } else { l1 / l2.max(l1 * 1e-16) };
    let vec = eig.eigenvectors.column(order[0]);
    let s = l1.sqrt();
    let mut nodes: Vec<Complex64> = (0..k).map(|i| Complex64::new(vec[i], vec[k + i]) * s).collect();

    let case = &model.case;
    let terms = TerminalMap::new(case)?;
    let nb = case.n_bus();
    let mut buses = vec![Complex64::new(0.0, 0.0); nb];
    for i in 0..nb {
        match model.bus_square[i] {
            BusSquare::Node(n) => buses[i] = nodes[n],
            BusSquare::Var(v) => {
                let mag = x[v].max(0.0).sqrt();
                let at: Vec<usize> = (0..k).filter(|&n| model.node_bus[n] == i).collect();
                let unity: Vec<f64> = at
                    .iter()
                    .filter(|&&n| model.node_limits[n].mag == (1.0, 1.0) && model.node_limits[n].angle == (0.0, 0.0))
                    .map(|&n| nodes[n].arg())
                    .collect();
                let ang = if unity.is_empty() {
                    circular_mean(&at.iter().map(|&n| nodes[n].arg()).collect::<Vec<_>>())
                } else {
                    circular_mean(&unity)
                };
                buses[i] = Complex64::from_polar(mag, ang);
            }
        }
    }
    let r = case.ref_bus()?;
    let rot = Complex64::from_polar(1.0, -buses[r].arg());
    for v in nodes.iter_mut().chain(buses.iter_mut()) {
        *v *= rot;
    }

    let mut pfr = Vec::new();
    for (t, term) in terms.iter() {
        if case.pfr_for_line(term.line).is_none() {
            continue;
        }
        let n = model.terminal_node[t];
        debug_assert!(matches!(model.nodes[n], NodeKind::Terminal(_)));
        let g = if buses[term.bus].norm() > 0.0 {
            nodes[n] / buses[term.bus]
        } else {
            Complex64::new(1.0, 0.0)
        };
        pfr.push(PfrSetting {
            line: case.lines[term.line].id,
            end: term.end,
            terminal: t,
            magnitude: g.norm(),
            angle_rad: g.arg(),
        });
    }

    let mut resid = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = Complex64::new(a[(i, j)], b[(i, j)]);
            // nodes were rotated by a unit phase, which cancels in v v*
            resid += (w - nodes[i] * nodes[j].conj()).norm_sqr();
        }
    }
    Ok(Rank1Recovery {
        node_voltages: nodes,
        bus_voltages: buses,
        pfr,
        ratio: ratio.min(1e16),
        exact: ratio >= EXACTNESS_THRESHOLD,
        residual: resid.sqrt(),
    })
}

/// Solves the relaxation and recovers a dispatch. Infeasible and
/// unbounded programs are returned as errors; iteration limits come back
/// with the status recorded in the solution.
///
/// If the solution is not rank one and some PFR still has freedom, the
/// ratios are read off `W` within their limits (see [`bounded_pfr_ratios`]),
/// fixed, and the program is solved again. The second solution is
/// reported; the first objective and ratio are kept alongside.
pub fn solve(model: &SdpModel, settings: &AdmmSettings) -> Result<DispatchSolution> {
    let (first, x) = solve_once(model, settings)?;
    if first.exact || !model.options.pin_pfr_on_inexact || !model.has_free_pfr() {
        return Ok(first);
    }
    let pins = bounded_pfr_ratios(model, &x);
    let pinned = build_model_pinned(&model.case, &model.scenarios, &model.cuts, &model.rho, &model.options, &pins)?;
    let (mut second, _) = solve_once(&pinned, settings)?;
    second.relaxation_objective = first.objective;
    second.relaxation_ratio = first.exactness_ratio;
    second.pfr_pinned = true;
    Ok(second)
}

/// PFR ratios taken directly from entries of `W`: magnitude from
/// `sqrt(W_aa / W_i)` and angle from `arg W_an` against a node at the same
/// bus whose ratio is fixed, both clamped to the terminal's limits. Where a
/// bus has no fixed node the first PFR terminal serves as the reference.
pub fn bounded_pfr_ratios(model: &SdpModel, x: &DVector<f64>) -> BTreeMap<usize, Complex64> {
    let k = model.n_nodes();
    let (a, b) = hermitian_from_x(model, x);
    let w = |i: usize, j: usize| Complex64::new(a[(i, j)], b[(i, j)]);
    let clamp = |v: f64, (lo, hi): (f64, f64)| v.max(lo).min(hi);
    let fixed = |n: usize| {
        let l = model.node_limits[n];
        l.mag.0 == l.mag.1 && l.angle.0 == l.angle.1
    };
    let mut out = BTreeMap::new();
    for bus in 0..model.case.n_bus() {
        let at: Vec<usize> = (0..k).filter(|&n| model.node_bus[n] == bus).collect();
        let w_i = match model.bus_square[bus] {
            BusSquare::Node(n) => a[(n, n)],
            BusSquare::Var(v) => x[v],
        };
        let mut anchor = at.iter().copied().find(|&n| fixed(n)).map(|n| (n, model.node_limits[n].angle.0));
        for &n in &at {
            let NodeKind::Terminal(t) = model.nodes[n] else { continue };
            if fixed(n) || model.case.pfr_for_line(model.terminal_line[t]).is_none() {
                continue;
            }
            let lim = model.node_limits[n];
            let mag = if w_i > 0.0 { (a[(n, n)].max(0.0) / w_i).sqrt() } else { 1.0 };
            let ang = match anchor {
                Some((m, th)) => clamp(th + w(n, m).arg(), lim.angle),
                None => {
                    let th = clamp(0.0, lim.angle);
                    anchor = Some((n, th));
                    th
                }
            };
            out.insert(t, Complex64::from_polar(clamp(mag, lim.mag), ang));
        }
    }
    out
}

fn solve_once(model: &SdpModel, settings: &AdmmSettings) -> Result<(DispatchSolution, DVector<f64>)> {
    let sol = solve_admm(&model.program, settings);
    match sol.status.state {
        SolverState::Infeasible => {
            return Err(Error::Infeasible(format!(
                "certificate found after {} iterations",
                sol.status.iterations
            )))
        }
        SolverState::Unbounded => {
            return Err(Error::Unbounded(format!(
                "certificate found after {} iterations",
                sol.status.iterations
            )))
        }
        _ => {}
    }
    let case = &model.case;
    let base = case.base_mva;
    let ng = case.n_gen();
    let p_g_mw: Vec<f64> = (0..ng).map(|i| sol.x[model.pg_start + i] * base).collect();
    let q_g_mvar: Vec<f64> = (0..ng).map(|i| sol.x[model.qg_start + i] * base).collect();
    let rec = recover_rank1(model, &sol.x)?;

    let penalty = match model.options.penalty {
        ExactnessPenalty::None => 0.0,
        ExactnessPenalty::Loss(w) => w * (p_g_mw.iter().sum::<f64>() + q_g_mvar.iter().sum::<f64>()) / base,
        ExactnessPenalty::ReactiveGeneration(w) => w * q_g_mvar.iter().sum::<f64>() / base,
    };
    let recourse = model.objective_constant - case.generators.iter().map(|g| g.cost.c0).sum::<f64>();
    let objective = fuel_cost(case, &p_g_mw) + recourse;

    let balance_residual = balance_residual(model, &rec, &p_g_mw, &q_g_mvar)?;
    let out = DispatchSolution {
        p_g_mw,
        q_g_mvar,
        rho: model.rho.clone(),
        pfr: rec.pfr.clone(),
        bus_voltages: rec.bus_voltages.clone(),
        objective,
        penalty,
        exactness_ratio: rec.ratio,
        exact: rec.exact,
        rank1_residual: rec.residual,
        balance_residual,
        status: sol.status,
        relaxation_objective: objective,
        relaxation_ratio: rec.ratio,
        pfr_pinned: false,
    };
    Ok((out, sol.x))
}

/// Max per-bus mismatch `|S_i(V) - (S_G + S_W - S_L)_i|` in p.u.
fn balance_residual(model: &SdpModel, rec: &Rank1Recovery, p_mw: &[f64], q_mvar: &[f64]) -> Result<f64> {
    let case = &model.case;
    let base = case.base_mva;
    let y = build_admittance_with(case, &rec.pfr_settings())?;
    let s = y.injections(&rec.bus_voltages);
    let wind = case.wind_injection_pu(&case.wind_forecast());
    let mut net: Vec<Complex64> = case
        .buses
        .iter()
        .zip(&wind)
        .map(|(b, w)| Complex64::new(w - b.pd / base, -b.qd / base))
        .collect();
    for (g, bus) in case.gen_bus_indices()?.into_iter().enumerate() {
        net[bus] += Complex64::new(p_mw[g], q_mvar[g]) / base;
    }
    Ok(s.iter().zip(&net).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::grid::parse_case;
    use crate::opf::{build_model, equal_participation, ModelOptions, TerminalMode};
    use crate::scenario::{Horizon, PredictionInterval, ScenarioSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk_model(mode: TerminalMode) -> SdpModel {
        let case = parse_case(cases::DESK9).unwrap();
        let iv = PredictionInterval::from_case(&case, Horizon::DayAhead);
        let set = ScenarioSet::single(case.wind_forecast(), iv);
        let opts = ModelOptions {
            terminal_mode: mode,
            ..Default::default()
        };
        build_model(&case, &set, &[], &equal_participation(3), &opts).unwrap()
    }

    /// Solution vector whose `W` is `sum_k w_k v_k v_k*`.
    fn embed(model: &SdpModel, parts: &[(f64, Vec<Complex64>)], bus_sq: &[f64]) -> DVector<f64> {
        let k = model.n_nodes();
        let mut x = DVector::zeros(model.program.n);
        for i in 0..k {
            for j in 0..=i {
                let w: Complex64 = parts.iter().map(|(s, v)| v[i] * v[j].conj() * *s).sum();
                x[model.x_var(i, j)] = w.re;
                x[model.x_var(k + i, k + j)] = w.re;
                x[model.x_var(k + i, j)] = w.im;
                x[model.x_var(k + j, i)] = -w.im;
            }
        }
        for (b, sq) in model.bus_square.iter().enumerate() {
            if let BusSquare::Var(v) = sq {
                x[*v] = bus_sq[b];
            }
        }
        x
    }

    /// Random bus voltages (reference at angle 0), PFR ratios within limits
    /// and the node voltages they imply.
    fn random_state(model: &SdpModel, rng: &mut ChaCha8Rng) -> (Vec<Complex64>, BTreeMap<usize, Complex64>, Vec<Complex64>) {
        let case = &model.case;
        let r = case.ref_bus().unwrap();
        let buses: Vec<Complex64> = (0..case.n_bus())
            .map(|i| Complex64::from_polar(rng.gen_range(0.95..1.05), if i == r { 0.0 } else { rng.gen_range(-0.3..0.3) }))
            .collect();
        let mut ratios = BTreeMap::new();
        let nodes = (0..model.n_nodes())
            .map(|n| match model.nodes[n] {
                NodeKind::Bus(b) => buses[b],
                NodeKind::Terminal(t) => {
                    let lim = model.node_limits[n];
                    let g = Complex64::from_polar(rng.gen_range(lim.mag.0..=lim.mag.1), rng.gen_range(lim.angle.0..=lim.angle.1));
                    if lim.mag.0 != lim.mag.1 {
                        ratios.insert(t, g);
                    }
                    g * buses[model.node_bus[n]]
                }
            })
            .collect();
        (buses, ratios, nodes)
    }

    #[test]
    fn rank_one_matrix_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mode in [TerminalMode::Aggregated, TerminalMode::PerTerminal] {
            let model = desk_model(mode);
            for _ in 0..5 {
                let (buses, ratios, nodes) = random_state(&model, &mut rng);
                let sq: Vec<f64> = buses.iter().map(|v| v.norm_sqr()).collect();
                let x = embed(&model, &[(1.0, nodes)], &sq);
                let rec = recover_rank1(&model, &x).unwrap();
                assert!(rec.exact, "ratio {}", rec.ratio);
                assert!(rec.residual < 1e-10);
                for (a, b) in rec.bus_voltages.iter().zip(&buses) {
                    assert!((a - b).norm() < 1e-9, "{a} vs {b}");
                }
                for p in &rec.pfr {
                    let want = ratios[&p.terminal];
                    assert!((Complex64::from_polar(p.magnitude, p.angle_rad) - want).norm() < 1e-9);
                }
                let bounded = bounded_pfr_ratios(&model, &x);
                for (t, g) in &ratios {
                    assert!((bounded[t] - g).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rank_two_matrix_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = desk_model(TerminalMode::Aggregated);
        let (b1, _, n1) = random_state(&model, &mut rng);
        let (_, _, n2) = random_state(&model, &mut rng);
        let sq: Vec<f64> = b1.iter().map(|v| v.norm_sqr()).collect();
        let x = embed(&model, &[(1.0, n1), (0.3, n2)], &sq);
        let rec = recover_rank1(&model, &x).unwrap();
        assert!(!rec.exact);
        assert!(rec.ratio > 1.0 && rec.ratio < 100.0, "{}", rec.ratio);
        assert!(rec.residual > 0.1);
    }

    #[test]
    fn bounded_ratios_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = desk_model(TerminalMode::Aggregated);
        for _ in 0..20 {
            let parts: Vec<(f64, Vec<Complex64>)> = (0..3).map(|_| (rng.gen::<f64>(), random_state(&model, &mut rng).2)).collect();
            let sq: Vec<f64> = (0..model.case.n_bus()).map(|_| rng.gen_range(0.9..1.1)).collect();
            let x = embed(&model, &parts, &sq);
            let out = bounded_pfr_ratios(&model, &x);
            assert_eq!(out.len(), 4);
            for (t, g) in out {
                let n = model.terminal_node[t];
                let lim = model.node_limits[n];
                assert!(g.norm() >= lim.mag.0 - 1e-12 && g.norm() <= lim.mag.1 + 1e-12);
                assert!(g.arg() >= lim.angle.0 - 1e-12 && g.arg() <= lim.angle.1 + 1e-12);
            }
        }
    }
}
