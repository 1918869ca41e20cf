use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{build_admittance_with, AdmittanceMatrix, NetworkCase};
use crate::scenario::Scenario;

use super::network::ReducedNetwork;
use super::powerflow::{solve_power_flow, PowerFlowSolution};
use super::{count_tds, FaultEvent, MachineState, ModelOrder, OperatingPoint, SimConfig, Trajectory};

/// Wind converters cap their current at this multiple of the pre-fault
/// value.
pub const WIND_CURRENT_LIMIT: f64 = 1.2;

const WIND_ITER: usize = 200;
const WIND_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TwoAxis {
    xd: f64,
    xq: f64,
    xd_prime: f64,
    td0: f64,
    tq0: f64,
    e_fd: f64,
}

/// Steady state of machines and network at the compensated dispatch.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub power_flow: PowerFlowSolution,
    pub machine_bus: Vec<usize>,
    /// Internal EMF behind `x'_d` per machine at `t0-`.
    pub e_internal: Vec<Complex64>,
    /// Mechanical power per machine, p.u.
    pub p_m: Vec<f64>,
    pub states: Vec<MachineState>,
    /// Constant-impedance load admittance per bus, p.u.
    pub load_y: Vec<Complex64>,
    /// Active wind injection per bus, p.u.
    pub wind_p: Vec<f64>,
    /// Wind current magnitude limit per bus, p.u.
    pub wind_i_max: Vec<f64>,
    pub(crate) two_axis: Vec<Option<TwoAxis>>,
    pub(crate) admittance: AdmittanceMatrix,
}

/// Solves the power flow at the dispatch compensated for `scenario` and
/// places every machine in equilibrium.
pub fn initialize_equilibrium(case: &NetworkCase, op: &OperatingPoint, scenario: &Scenario, order: ModelOrder) -> Result<Equilibrium> {
    let base = case.base_mva;
    let mut comp = op.clone();
    comp.p_g_mw = op.compensated(case, scenario);
    let pf = solve_power_flow(case, &comp, &scenario.p_w)?;
    let machine_bus = case.gen_bus_indices()?;
    let nb = case.n_bus();

    let mut e_internal = Vec::new();
    let mut p_m = Vec::new();
    let mut states = Vec::new();
    let mut two_axis = Vec::new();
    for (g, gen) in case.generators.iter().enumerate() {
        let v = pf.v[machine_bus[g]];
        let s = Complex64::new(pf.p_g_mw[g], pf.q_g_mvar[g]) / base;
        let i = (s / v).conj();
        let j = Complex64::new(0.0, 1.0);
        let fourth = match (order, gen.fourth_order) {
            (ModelOrder::Fourth, Some(d)) => {
                if (d.xq_prime - gen.xd_prime).abs() > 1e-9 {
                    return Err(Error::Unsupported(format!(
                        "machine {g}: two-axis model needs x'q = x'd (got {} and {})",
                        d.xq_prime, gen.xd_prime
                    )));
                }
                Some(d)
            }
            _ => None,
        };
        match fourth {
            None => {
                let e = v + j * gen.xd_prime * i;
                e_internal.push(e);
                p_m.push((e * i.conj()).re);
                states.push(MachineState {
                    delta: e.arg(),
                    omega: 0.0,
                    e_q: None,
                    e_d: None,
                });
                two_axis.push(None);
            }
            Some(d) => {
                let eq_axis = v + j * d.xq * i;
                let delta = eq_axis.arg();
                let rot = Complex64::from_polar(1.0, -(delta - FRAC_PI_2));
                let (idq, vdq) = (i * rot, v * rot);
                let e_d = vdq.re - d.xq_prime * idq.im;
                let e_q = vdq.im + gen.xd_prime * idq.re;
                let e = Complex64::new(e_d, e_q) / rot;
                e_internal.push(e);
                p_m.push((e * i.conj()).re);
                states.push(MachineState {
                    delta,
                    omega: 0.0,
                    e_q: Some(e_q),
                    e_d: Some(e_d),
                });
                two_axis.push(Some(TwoAxis {
                    xd: d.xd,
                    xq: d.xq,
                    xd_prime: gen.xd_prime,
                    td0: d.td0_prime,
                    tq0: d.tq0_prime,
                    e_fd: e_q + (d.xd - gen.xd_prime) * idq.re,
                }));
            }
        }
    }

    let load_y = (0..nb)
        .map(|i| {
            let b = &case.buses[i];
            Complex64::new(b.pd, -b.qd) / base / pf.v[i].norm_sqr()
        })
        .collect();
    let wind_p = case.wind_injection_pu(&scenario.p_w);
    let wind_i_max = (0..nb).map(|i| WIND_CURRENT_LIMIT * wind_p[i].abs() / pf.v[i].norm()).collect();
    let admittance = build_admittance_with(case, &op.pfr)?;
    Ok(Equilibrium {
        power_flow: pf,
        machine_bus,
        e_internal,
        p_m,
        states,
        load_y,
        wind_p,
        wind_i_max,
        two_axis,
        admittance,
    })
}

struct Stage {
    net: ReducedNetwork,
    wind_p: Vec<f64>,
    wind_i_max: Vec<f64>,
}

struct Machines<'a> {
    eq: &'a Equilibrium,
    inertia: Vec<f64>,
    damping: Vec<f64>,
    omega_s: f64,
}

const NX: usize = 4;

impl Machines<'_> {
    fn emf(&self, x: &[f64], g: usize) -> Complex64 {
        let delta = x[NX * g];
        match self.eq.two_axis[g] {
            None => Complex64::from_polar(self.eq.e_internal[g].norm(), delta),
            Some(_) => Complex64::new(x[NX * g + 3], x[NX * g + 2]) * Complex64::from_polar(1.0, delta - FRAC_PI_2),
        }
    }

    /// Machine currents for internal EMFs `e`, solving the wind buses by
    /// fixed-point iteration from the warm start in `vw`.
    fn currents(&self, stage: &Stage, e: &[Complex64], vw: &mut [Complex64]) -> Vec<Complex64> {
        let ng = e.len();
        let nw = stage.net.wind_buses.len();
        let y = &stage.net.y;
        if nw > 0 {
            let rhs0: Vec<Complex64> = (0..nw).map(|w| (0..ng).map(|g| y[(ng + w, g)] * e[g]).sum()).collect();
            for _ in 0..WIND_ITER {
                let iw: Vec<Complex64> = (0..nw)
                    .map(|w| {
                        let p = stage.wind_p[w];
                        let v = vw[w];
                        if p == 0.0 {
                            return Complex64::new(0.0, 0.0);
                        }
                        let i = if v.norm() > 0.0 { (Complex64::new(p, 0.0) / v).conj() } else { Complex64::new(0.0, 0.0) };
                        if i.norm() > stage.wind_i_max[w] {
                            Complex64::from_polar(stage.wind_i_max[w], v.arg())
                        } else {
                            i
                        }
                    })
                    .collect();
                let mut change: f64 = 0.0;
                for w in 0..nw {
                    let next: Complex64 = (0..nw).map(|k| stage.net.y_ww_inv[(w, k)] * (iw[k] - rhs0[k])).sum();
                    change = change.max((next - vw[w]).norm());
                    vw[w] = next;
                }
                if change < WIND_TOL {
                    break;
                }
            }
        }
        (0..ng)
            .map(|g| {
                let a: Complex64 = (0..ng).map(|k| y[(g, k)] * e[k]).sum();
                let b: Complex64 = (0..nw).map(|w| y[(g, ng + w)] * vw[w]).sum();
                a + b
            })
            .collect()
    }

    /// State derivative and electrical powers.
    fn rhs(&self, stage: &Stage, x: &[f64], vw: &mut [Complex64], dx: &mut [f64]) -> Vec<f64> {
        let ng = self.inertia.len();
        let e: Vec<Complex64> = (0..ng).map(|g| self.emf(x, g)).collect();
        let cur = self.currents(stage, &e, vw);
        let mut pe = vec![0.0; ng];
        for g in 0..ng {
            pe[g] = (e[g] * cur[g].conj()).re;
            let omega = x[NX * g + 1];
            dx[NX * g] = self.omega_s * omega;
            dx[NX * g + 1] = (self.eq.p_m[g] - pe[g] - self.damping[g] * omega) / self.inertia[g];
            match self.eq.two_axis[g] {
                None => {
                    dx[NX * g + 2] = 0.0;
                    dx[NX * g + 3] = 0.0;
                }
                Some(t) => {
                    let idq = cur[g] * Complex64::from_polar(1.0, -(x[NX * g] - FRAC_PI_2));
                    dx[NX * g + 2] = (t.e_fd - x[NX * g + 2] - (t.xd - t.xd_prime) * idq.re) / t.td0;
                    dx[NX * g + 3] = (-x[NX * g + 3] + (t.xq - t.xd_prime) * idq.im) / t.tq0;
                }
            }
        }
        pe
    }
}

fn stage(eq: &Equilibrium, adm: &AdmittanceMatrix, xd: &[f64]) -> Result<Stage> {
    let wind_buses: Vec<usize> = (0..eq.wind_p.len()).filter(|&i| eq.wind_p[i] != 0.0).collect();
    let net = ReducedNetwork::build(adm, &eq.load_y, &eq.machine_bus, xd, &wind_buses)?;
    let wind_p = net.wind_buses.iter().map(|&b| eq.wind_p[b]).collect();
    let wind_i_max = net.wind_buses.iter().map(|&b| eq.wind_i_max[b]).collect();
    Ok(Stage { net, wind_p, wind_i_max })
}

/// Integrates the machines from equilibrium through `fault` with fixed-step
/// RK4. Event times snap to the nearest grid point; a clearing time at or
/// before the fault start means the fault never appears. A run whose
/// angle spread passes the divergence guard stops early and is flagged.
pub fn run_tds(
    case: &NetworkCase,
    op: &OperatingPoint,
    scenario: &Scenario,
    fault: &FaultEvent,
    config: &SimConfig,
) -> Result<Trajectory> {
    if !(config.dt > 0.0) {
        return Err(Error::Domain("time step must be positive".into()));
    }
    if fault.t_cl < fault.t0 {
        return Err(Error::Domain("clearing before fault start".into()));
    }
    if config.horizon <= fault.t_cl {
        return Err(Error::Domain("horizon ends before clearing".into()));
    }
    let eq = initialize_equilibrium(case, op, scenario, config.model_order)?;
    count_tds();
    simulate(case, &eq, fault, config)
}

pub(crate) fn simulate(case: &NetworkCase, eq: &Equilibrium, fault: &FaultEvent, config: &SimConfig) -> Result<Trajectory> {
    let fault_bus = case.bus_idx(fault.fault_bus)?;
    let xd: Vec<f64> = case.generators.iter().map(|g| g.xd_prime).collect();
    let pre_adm = eq.admittance.clone();
    let post_adm = match fault.trip_line {
        Some(id) => pre_adm.apply_line_trip(case.line_idx(id)?)?,
        None => pre_adm.clone(),
    };
    let k0 = (fault.t0 / config.dt).round() as usize;
    let kcl = (fault.t_cl / config.dt).round() as usize;
    let mut stages = vec![stage(eq, &pre_adm, &xd)?];
    let on = if kcl > k0 {
        stages.push(stage(eq, &pre_adm.apply_fault(fault_bus)?, &xd)?);
        stages.len() - 1
    } else {
        0
    };
    let post = if fault.trip_line.is_some() {
        stages.push(stage(eq, &post_adm, &xd)?);
        stages.len() - 1
    } else {
        0
    };
    let pick = |k: usize| if k < k0 { 0 } else if k < kcl { on } else { post };

    let ng = case.n_gen();
    let m = Machines {
        eq,
        inertia: case.generators.iter().map(|g| 2.0 * g.h).collect(),
        damping: case.generators.iter().map(|g| g.d).collect(),
        omega_s: 2.0 * PI * case.freq_hz,
    };
    let mut x = vec![0.0; NX * ng];
    for (g, s) in eq.states.iter().enumerate() {
        x[NX * g] = s.delta;
        x[NX * g + 1] = s.omega;
        x[NX * g + 2] = s.e_q.unwrap_or(0.0);
        x[NX * g + 3] = s.e_d.unwrap_or(0.0);
    }
    let mut vw: Vec<Complex64> = stages[0].net.wind_buses.iter().map(|&b| eq.power_flow.v[b]).collect();
    let mut active = 0;

    let n_steps = (config.horizon / config.dt).round() as usize;
    let mut time = Vec::with_capacity(n_steps + 1);
    let mut states: Vec<Vec<MachineState>> = vec![Vec::with_capacity(n_steps + 1); ng];
    let mut p_e: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps + 1); ng];
    let mut diverged = false;
    let h = config.dt;
    let mut k1 = vec![0.0; NX * ng];
    let mut k2 = vec![0.0; NX * ng];
    let mut k3 = vec![0.0; NX * ng];
    let mut k4 = vec![0.0; NX * ng];
    let mut tmp = vec![0.0; NX * ng];
    for k in 0..=n_steps {
        let idx = pick(k);
        if idx != active {
            // carry wind voltages across; a newly grounded bus drops out
            let prev = &stages[active].net.wind_buses;
            vw = stages[idx]
                .net
                .wind_buses
                .iter()
                .map(|b| prev.iter().position(|x| x == b).map(|i| vw[i]).unwrap_or(eq.power_flow.v[*b]))
                .collect();
            active = idx;
        }
        let st = &stages[idx];
        let pe = m.rhs(st, &x, &mut vw, &mut k1);
        time.push(k as f64 * h);
        for g in 0..ng {
            let two = eq.two_axis[g].is_some();
            states[g].push(MachineState {
                delta: x[NX * g],
                omega: x[NX * g + 1],
                e_q: two.then_some(x[NX * g + 2]),
                e_d: two.then_some(x[NX * g + 3]),
            });
            p_e[g].push(pe[g]);
        }
        let (lo, hi) = (0..ng).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(x[NX * g]), hi.max(x[NX * g])));
        if hi - lo > config.divergence_guard || !x.iter().all(|v| v.is_finite()) {
            diverged = true;
            break;
        }
        if k == n_steps {
            break;
        }
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        m.rhs(st, &tmp, &mut vw, &mut k2);
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        m.rhs(st, &tmp, &mut vw, &mut k3);
        for i in 0..x.len() {
            tmp[i] = x[i] + h * k3[i];
        }
        m.rhs(st, &tmp, &mut vw, &mut k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(Trajectory {
        dt: h,
        time,
        states,
        p_e,
        p_m: eq.p_m.clone(),
        inertia: m.inertia.clone(),
        omega_s: m.omega_s,
        t_fault: k0 as f64 * h,
        t_clear: kcl.max(k0) as f64 * h,
        diverged,
    })
}
