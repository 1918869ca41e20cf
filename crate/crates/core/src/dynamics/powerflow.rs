use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{build_admittance_with, BusKind, NetworkCase};

use super::OperatingPoint;

const PF_TOL: f64 = 1e-11;
const PF_MAX_ITER: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub v: Vec<Complex64>,
    /// Generator active output after slack pickup, MW.
    pub p_g_mw: Vec<f64>,
    /// Generator reactive output, MVAr. Voltage-controlled buses split their
    /// reactive injection equally between their machines.
    pub q_g_mvar: Vec<f64>,
    /// Total slack picked up by the generators, MW.
    pub slack_mw: f64,
    pub iterations: usize,
}

/// Newton power flow with the slack shared by participation factors.
///
/// Ref and PV buses hold the magnitudes in `op.v_set`; generators at PQ
/// buses inject their scheduled reactive power. Wind farms are constant
/// active-power injections at `wind_mw`. If every participation factor is
/// zero, the machines at the reference bus take the slack.
pub fn solve_power_flow(case: &NetworkCase, op: &OperatingPoint, wind_mw: &[f64]) -> Result<PowerFlowSolution> {
    let nb = case.n_bus();
    let ng = case.n_gen();
    if op.p_g_mw.len() != ng || op.rho.len() != ng || op.v_set.len() != nb {
        return Err(Error::Dimension("operating point does not match case".into()));
    }
    if wind_mw.len() != case.wind_farms.len() {
        return Err(Error::Dimension("wind outputs do not match farms".into()));
    }
    let base = case.base_mva;
    let y = build_admittance_with(case, &op.pfr)?;
    let y = y.matrix();
    let gen_bus = case.gen_bus_indices()?;
    let r = case.ref_bus()?;

    let mut share = op.rho.clone();
    if share.iter().all(|&s| s == 0.0) {
        for (g, &b) in gen_bus.iter().enumerate() {
            if b == r {
                share[g] = 1.0;
            }
        }
        if share.iter().all(|&s| s == 0.0) {
            return Err(Error::Domain("no machine can take the slack".into()));
        }
    }
    let mut bus_share = vec![0.0; nb];
    let mut p_sched = case.wind_injection_pu(wind_mw);
    let mut q_sched = vec![0.0; nb];
    for (i, b) in case.buses.iter().enumerate() {
        p_sched[i] -= b.pd / base;
        q_sched[i] -= b.qd / base;
    }
    for (g, &b) in gen_bus.iter().enumerate() {
        p_sched[b] += op.p_g_mw[g] / base;
        q_sched[b] += op.q_g_mvar.get(g).copied().unwrap_or(0.0) / base;
        bus_share[b] += share[g];
    }

    let pq: Vec<usize> = (0..nb).filter(|&i| case.buses[i].kind == BusKind::Pq).collect();
    let ang: Vec<usize> = (0..nb).filter(|&i| i != r).collect();
    let mut vm: Vec<f64> = op.v_set.clone();
    let mut va: Vec<f64> = op.v_angle.clone().unwrap_or_else(|| vec![0.0; nb]);
    va[r] = 0.0;
    let mut lambda = 0.0;
    let n_unk = ang.len() + pq.len() + 1;
    let n_eq = nb + pq.len();
    debug_assert_eq!(n_unk, n_eq);

    let mut mismatch = f64::INFINITY;
    for it in 0..=PF_MAX_ITER {
        let v: Vec<Complex64> = (0..nb).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
        let vv = DVector::from_vec(v.clone());
        let ibus = y * &vv;
        let mut f = DVector::zeros(n_eq);
        for i in 0..nb {
            let s = v[i] * ibus[i].conj();
            f[i] = s.re - p_sched[i] - bus_share[i] * lambda;
        }
        for (k, &i) in pq.iter().enumerate() {
            let s = v[i] * ibus[i].conj();
            f[nb + k] = s.im - q_sched[i];
        }
        mismatch = f.amax();
        if mismatch < PF_TOL {
            let s: Vec<Complex64> = (0..nb).map(|i| v[i] * ibus[i].conj()).collect();
            let mut p_g_mw = op.p_g_mw.clone();
            let mut q_g_mvar = vec![0.0; ng];
            for (g, &b) in gen_bus.iter().enumerate() {
                p_g_mw[g] += share[g] * lambda * base;
                if case.buses[b].kind == BusKind::Pq {
                    q_g_mvar[g] = op.q_g_mvar.get(g).copied().unwrap_or(0.0);
                } else {
                    let at = gen_bus.iter().filter(|&&x| x == b).count() as f64;
                    q_g_mvar[g] = (s[b].im * base + case.buses[b].qd) / at;
                }
            }
            return Ok(PowerFlowSolution {
                v,
                p_g_mw,
                q_g_mvar,
                slack_mw: lambda * base * share.iter().sum::<f64>(),
                iterations: it,
            });
        }
        if it == PF_MAX_ITER {
            break;
        }
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)),
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let mut ds_da = DMatrix::from_element(nb, nb, Complex64::new(0.0, 0.0));
        let mut ds_dm = DMatrix::from_element(nb, nb, Complex64::new(0.0, 0.0));
        for i in 0..nb {
            for j in 0..nb {
                let mut a = -y[(i, j)] * v[j];
                if i == j {
                    a += ibus[i];
                }
                ds_da[(i, j)] = Complex64::new(0.0, 1.0) * v[i] * a.conj();
                let vn = v[j] / vm[j];
                let mut m = v[i] * (y[(i, j)] * vn).conj();
                if i == j {
                    m += ibus[i].conj() * vn;
                }
                ds_dm[(i, j)] = m;
            }
        }
        let mut jac = DMatrix::zeros(n_eq, n_unk);
        let rows: Vec<(usize, usize, bool)> = (0..nb)
            .map(|i| (i, i, false))
            .chain(pq.iter().enumerate().map(|(k, &i)| (nb + k, i, true)))
            .collect();
        for &(row, bus, reactive) in &rows {
            let pick = |c: Complex64| if reactive { c.im } else { c.re };
            for (col, &j) in ang.iter().enumerate() {
                jac[(row, col)] = pick(ds_da[(bus, j)]);
            }
            for (k, &j) in pq.iter().enumerate() {
                jac[(row, ang.len() + k)] = pick(ds_dm[(bus, j)]);
            }
            if !reactive {
                jac[(row, n_unk - 1)] = -bus_share[bus];
            }
        }
        let dx = jac.lu().solve(&(-f)).ok_or(Error::PowerFlowDiverged { iterations: it, mismatch })?;
        for (col, &j) in ang.iter().enumerate() {
            va[j] += dx[col];
        }
        for (k, &j) in pq.iter().enumerate() {
            vm[j] += dx[ang.len() + k];
        }
        lambda += dx[n_unk - 1];
        if !dx.iter().all(|x| x.is_finite()) {
            break;
        }
    }
    Err(Error::PowerFlowDiverged {
        iterations: PF_MAX_ITER,
        mismatch,
    })
}
