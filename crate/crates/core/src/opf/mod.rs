//! Scenario-based semidefinite relaxation of the stability-constrained OPF
//! with power flow routers: model assembly, solve, rank-one recovery and
//! dispatch evaluation.

mod model;
mod recover;

pub use model::{build_model, build_model_pinned, write_model_dump, ConstraintTag, ExactnessPenalty, ModelOptions, NodeKind, SdpModel, TerminalMode};
pub use recover::{bounded_pfr_ratios, recover_rank1, solve, DispatchSolution, PfrSetting, Rank1Recovery, EXACTNESS_THRESHOLD};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::grid::NetworkCase;
use crate::scenario::{PredictionInterval, Scenario};

/// Expected cost of the affine recourse: `c'_2i = (sum_jk Λ_jk) c_2i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseCost {
    /// Covariance of the farm prediction errors, MW².
    pub covariance: DMatrix<f64>,
    /// Per-generator coefficient multiplying `rho_i^2`, $/h.
    pub coeff: Vec<f64>,
}

impl RecourseCost {
    pub fn value(&self, rho: &[f64]) -> f64 {
        self.coeff.iter().zip(rho).map(|(c, r)| c * r * r).sum()
    }
}

/// Recourse coefficients for independent farms with errors uniform on the
/// interval, i.e. variance `h^2 / 3` for half-width `h`.
pub fn expected_cost_coeff(case: &NetworkCase, interval: &PredictionInterval) -> RecourseCost {
    let k = interval.dim();
    let mut cov = DMatrix::zeros(k, k);
    for j in 0..k {
        let h = 0.5 * (interval.upper[j] - interval.lower[j]);
        cov[(j, j)] = h * h / 3.0;
    }
    let total = cov.sum();
    RecourseCost {
        coeff: case.generators.iter().map(|g| total * g.cost.c2).collect(),
        covariance: cov,
    }
}

/// Equal participation of every synchronous generator.
pub fn equal_participation(n_gen: usize) -> Vec<f64> {
    vec![1.0 / n_gen as f64; n_gen]
}

/// Fuel cost plus expected recourse cost, $/h.
pub fn objective_value(case: &NetworkCase, p_g_mw: &[f64], rho: &[f64], recourse: &RecourseCost) -> f64 {
    let fuel: f64 = case
        .generators
        .iter()
        .zip(p_g_mw)
        .map(|(g, &p)| g.cost.eval(p))
        .sum();
    fuel + recourse.value(rho)
}

/// Fuel cost alone, $/h.
pub fn fuel_cost(case: &NetworkCase, p_g_mw: &[f64]) -> f64 {
    case.generators.iter().zip(p_g_mw).map(|(g, &p)| g.cost.eval(p)).sum()
}

/// Total wind shortfall against the forecast, MW. Generators cover it in
/// proportion to their participation factors.
pub fn wind_shortfall(forecast_mw: &[f64], outputs_mw: &[f64]) -> f64 {
    forecast_mw.iter().zip(outputs_mw).map(|(f, p)| f - p).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub generator: usize,
    pub value_mw: f64,
    pub limit_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatedDispatch {
    pub p_mw: Vec<f64>,
    pub violations: Vec<LimitViolation>,
}

/// `P'_Gi = P_Gi + rho_i * shortfall`, with limit violations reported.
pub fn evaluate_dispatch(case: &NetworkCase, p_g_mw: &[f64], rho: &[f64], scenario: &Scenario) -> CompensatedDispatch {
    let shortfall = wind_shortfall(&case.wind_forecast(), &scenario.p_w);
    let p_mw: Vec<f64> = p_g_mw.iter().zip(rho).map(|(p, r)| p + r * shortfall).collect();
    let mut violations = Vec::new();
    for (i, (g, &p)) in case.generators.iter().zip(&p_mw).enumerate() {
        let tol = 1e-6 * (1.0 + g.p_max.abs());
        if p > g.p_max + tol {
            violations.push(LimitViolation {
                generator: i,
                value_mw: p,
                limit_mw: g.p_max,
            });
        } else if p < g.p_min - tol {
            violations.push(LimitViolation {
                generator: i,
                value_mw: p,
                limit_mw: g.p_min,
            });
        }
    }
    CompensatedDispatch { p_mw, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::grid::parse_case;
    use crate::scenario::Horizon;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recourse_single_farm() {
        let mut case = parse_case(cases::DESK9).unwrap();
        case.wind_farms.truncate(1);
        case.wind_farms[0].forecast_mw = 100.0;
        let iv = PredictionInterval::around(&[100.0], &[0.1], Horizon::DayAhead);
        let r = expected_cost_coeff(&case, &iv);
        assert!((r.covariance[(0, 0)] - 100.0 / 3.0).abs() < 1e-12);
        for (c, g) in r.coeff.iter().zip(&case.generators) {
            assert!((c - 100.0 / 3.0 * g.cost.c2).abs() < 1e-12);
        }
        let two = PredictionInterval::around(&[100.0, 100.0], &[0.1, 0.1], Horizon::DayAhead);
        let r2 = expected_cost_coeff(&case, &two);
        assert!((r2.covariance.sum() - 2.0 * r.covariance.sum()).abs() < 1e-12);
        let zero = PredictionInterval::around(&[100.0], &[0.0], Horizon::DayAhead);
        assert!(expected_cost_coeff(&case, &zero).coeff.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn objective_matches_expanded_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut case = parse_case(cases::DESK9).unwrap();
        for _ in 0..20 {
            for g in &mut case.generators {
                g.cost.c2 = rng.gen();
                g.cost.c1 = rng.gen::<f64>() * 10.0;
                g.cost.c0 = rng.gen::<f64>() * 100.0;
            }
            let p: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 200.0).collect();
            let rho = equal_participation(3);
            let iv = PredictionInterval::from_case(&case, Horizon::DayAhead);
            let rc = expected_cost_coeff(&case, &iv);
            let want: f64 = (0..3)
                .map(|i| {
                    let c = &case.generators[i].cost;
                    c.c2 * p[i] * p[i] + c.c1 * p[i] + c.c0 + rc.covariance.sum() * c.c2 * rho[i] * rho[i]
                })
                .sum();
            let got = objective_value(&case, &p, &rho, &rc);
            assert!((got - want).abs() < 1e-9 * want.abs());
        }
        for g in &mut case.generators {
            g.cost.c2 = 0.0;
            g.cost.c1 = 0.0;
        }
        let rc = expected_cost_coeff(&case, &PredictionInterval::from_case(&case, Horizon::DayAhead));
        let c0: f64 = case.generators.iter().map(|g| g.cost.c0).sum();
        assert_eq!(objective_value(&case, &[10.0, 20.0, 30.0], &equal_participation(3), &rc), c0);
        assert_eq!(rc.value(&[0.0; 3]), 0.0);
    }

    #[test]
    fn compensation_covers_shortfall() {
        let case = parse_case(cases::DESK9).unwrap();
        let p = vec![100.0, 80.0, 60.0];
        let rho = equal_participation(3);
        let fc = case.wind_forecast();
        let same = evaluate_dispatch(&case, &p, &rho, &Scenario { p_w: fc.clone(), probability: 1.0 });
        assert_eq!(same.p_mw, p);
        let low: Vec<f64> = fc.iter().map(|x| x * 0.9).collect();
        let out = evaluate_dispatch(&case, &p, &rho, &Scenario { p_w: low.clone(), probability: 1.0 });
        let extra: f64 = out.p_mw.iter().sum::<f64>() - p.iter().sum::<f64>();
        let lost: f64 = fc.iter().sum::<f64>() - low.iter().sum::<f64>();
        assert!((extra - lost).abs() < 1e-9);
        let huge = evaluate_dispatch(&case, &[case.generators[0].p_max, 80.0, 60.0], &rho, &Scenario { p_w: low, probability: 1.0 });
        assert_eq!(huge.violations.len(), 1);
        assert_eq!(huge.violations[0].generator, 0);
    }
}
