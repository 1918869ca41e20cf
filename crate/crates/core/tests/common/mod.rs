//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rtsc_core::grid::{build_admittance, Bus, BusKind, CostCurve, Generator, Line, NetworkCase};

fn bus(id: u32, kind: BusKind, pd: f64, qd: f64) -> Bus {
    Bus {
        id,
        kind,
        pd,
        qd,
        gs: 0.0,
        bs: 0.0,
        v_min: 0.9,
        v_max: 1.1,
    }
}

pub fn generator(bus: u32, c2: f64, c1: f64, p_min: f64, p_max: f64) -> Generator {
    Generator {
        bus,
        cost: CostCurve { c2, c1, c0: 0.0 },
        p_min,
        p_max,
        q_min: -200.0,
        q_max: 200.0,
        h: 5.0,
        d: 1.0,
        xd_prime: 0.2,
        fourth_order: None,
    }
}

/// Two buses joined by a lossless line, a generator at each end and all
/// the load at bus 2.
pub fn two_bus(load_mw: f64, gens: [(f64, f64, f64, f64); 2]) -> NetworkCase {
    let (a, b) = (gens[0], gens[1]);
    NetworkCase {
        name: "two-bus".into(),
        base_mva: 100.0,
        freq_hz: 60.0,
        buses: vec![bus(1, BusKind::Ref, 0.0, 0.0), bus(2, BusKind::Pv, load_mw, 0.0)],
        lines: vec![Line::from_rxb(1, 1, 2, 0.0, 0.05, 0.0).unwrap()],
        generators: vec![generator(1, a.0, a.1, a.2, a.3), generator(2, b.0, b.1, b.2, b.3)],
        wind_farms: Vec::new(),
        pfrs: Vec::new(),
    }
}

/// Random connected case with 2..=5 buses and a generator at every bus, so
/// any voltage profile defines generator outputs.
pub fn toy_case(rng: &mut ChaCha8Rng) -> NetworkCase {
    let n = rng.gen_range(2..=5u32);
    let buses: Vec<Bus> = (1..=n)
        .map(|i| {
            let kind = if i == 1 { BusKind::Ref } else { BusKind::Pv };
            bus(i, kind, rng.gen_range(0.0..80.0), rng.gen_range(0.0..30.0))
        })
        .collect();
    let mut edges: Vec<(u32, u32)> = (2..=n).map(|i| (rng.gen_range(1..i), i)).collect();
    if n > 2 && rng.gen_bool(0.5) {
        let (a, b) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let lines = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            Line::from_rxb(k as u32 + 1, a, b, rng.gen_range(0.005..0.03), rng.gen_range(0.05..0.2), rng.gen_range(0.0..0.05)).unwrap()
        })
        .collect();
    let generators = (1..=n)
        .map(|i| generator(i, rng.gen_range(0.01..0.1), rng.gen_range(5.0..30.0), 0.0, rng.gen_range(100.0..250.0)))
        .collect();
    NetworkCase {
        name: "toy".into(),
        base_mva: 100.0,
        freq_hz: 60.0,
        buses,
        lines,
        generators,
        wind_farms: Vec::new(),
        pfrs: Vec::new(),
    }
}

/// Fuel cost of a random voltage profile if the generator outputs it
/// implies respect every limit, `None` otherwise. Needs one generator per
/// bus in bus order.
pub fn sampled_point_cost(case: &NetworkCase, rng: &mut ChaCha8Rng) -> Option<f64> {
    let y = build_admittance(case).unwrap();
    let v: Vec<Complex64> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let ang = if i == 0 { 0.0 } else { rng.gen_range(-0.15..0.15) };
            Complex64::from_polar(rng.gen_range(b.v_min..=b.v_max), ang)
        })
        .collect();
    let s = y.injections(&v);
    let base = case.base_mva;
    let mut cost = 0.0;
    for (i, g) in case.generators.iter().enumerate() {
        let p = s[i].re * base + case.buses[i].pd;
        let q = s[i].im * base + case.buses[i].qd;
        if p < g.p_min || p > g.p_max || q < g.q_min || q > g.q_max {
            return None;
        }
        cost += g.cost.eval(p);
    }
    Some(cost)
}
