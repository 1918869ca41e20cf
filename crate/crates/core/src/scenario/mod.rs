//! Renewable-output scenarios: sampling from prediction intervals,
//! sample-complexity bound of the scenario approach, fast-forward
//! reduction under the Kantorovich distance and online box selection.

mod io;
mod kantorovich;
mod reduction;

pub use io::{parse_scenarios, write_scenarios, SCENARIO_HEADER};
pub use kantorovich::{euclidean, kantorovich_distance, reduction_distance};
pub use reduction::{fast_forward_reduce, fast_forward_reduce_with, select_nearest, select_online};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::NetworkCase;

/// Tolerance on the unit-mass invariant of reduced and selected sets.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    DayAhead,
    ShortTerm,
}

/// Per-farm output box, MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub horizon: Horizon,
}

impl PredictionInterval {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, horizon: Horizon) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("interval bounds differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Domain("interval with lower > upper".into()));
        }
        Ok(Self {
            lower,
            upper,
            horizon,
        })
    }

    /// `[(1 - alpha) P, (1 + alpha) P]` around each farm forecast, with
    /// alpha taken from the case for the requested horizon.
    pub fn from_case(case: &NetworkCase, horizon: Horizon) -> Self {
        let alphas: Vec<f64> = case
            .wind_farms
            .iter()
            .map(|w| match horizon {
                Horizon::DayAhead => w.day_ahead_alpha,
                Horizon::ShortTerm => w.short_term_alpha,
            })
            .collect();
        Self::around(&case.wind_forecast(), &alphas, horizon)
    }

    pub fn around(forecast: &[f64], alphas: &[f64], horizon: Horizon) -> Self {
        let lower = forecast.iter().zip(alphas).map(|(p, a)| (1.0 - a) * p).collect();
        let upper = forecast.iter().zip(alphas).map(|(p, a)| (1.0 + a) * p).collect();
        Self {
            lower,
            upper,
            horizon,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| l <= x && x <= u)
    }

    /// Whether `inner` lies inside this box.
    pub fn contains(&self, inner: &PredictionInterval) -> bool {
        inner.dim() == self.dim()
            && self.contains_point(&inner.lower)
            && self.contains_point(&inner.upper)
    }

    /// Extremes of the total deviation from `forecast` over the box.
    pub fn total_deviation_range(&self, forecast: &[f64]) -> (f64, f64) {
        let lo = self.lower.iter().zip(forecast).map(|(l, f)| l - f).sum();
        let hi = self.upper.iter().zip(forecast).map(|(u, f)| u - f).sum();
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Output per wind farm, MW.
    pub p_w: Vec<f64>,
    pub probability: f64,
}

impl Scenario {
    /// Total deviation from `forecast`, MW.
    pub fn total_deviation(&self, forecast: &[f64]) -> f64 {
        self.p_w.iter().zip(forecast).map(|(p, f)| p - f).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sampled,
    Reduced,
    Selected,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Sampled => "sampled",
            Provenance::Reduced => "reduced",
            Provenance::Selected => "selected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub provenance: Provenance,
    pub seed: u64,
    /// Box the scenarios were drawn from (or selected with).
    pub interval: PredictionInterval,
    /// Position of each scenario in the set it was derived from. Identity
    /// for sampled sets.
    pub parent_indices: Vec<usize>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.scenarios.iter().map(|s| s.probability).sum()
    }

    /// A one-atom set at the given outputs.
    pub fn single(p_w: Vec<f64>, interval: PredictionInterval) -> Self {
        Self {
            scenarios: vec![Scenario {
                p_w,
                probability: 1.0,
            }],
            provenance: Provenance::Selected,
            seed: 0,
            interval,
            parent_indices: vec![0],
        }
    }
}

/// Smallest `N` with `N >= e / (eps (e - 1)) * (ln(1/delta) + n - 1)`.
pub fn sample_complexity(epsilon: f64, delta: f64, n: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta = {delta}")));
    }
    if n == 0 {
        return Err(Error::Domain("decision dimension 0".into()));
    }
    let e = std::f64::consts::E;
    let bound = e / (epsilon * (e - 1.0)) * (-delta.ln() + n as f64 - 1.0);
    let mut count = bound.ceil() as usize;
    // guard against ceil landing one off after rounding in `bound`
    while count > 0 && (count - 1) as f64 >= bound {
        count -= 1;
    }
    Ok(count)
}

/// `count` iid scenarios, each coordinate uniform on its farm interval.
/// The generator is ChaCha8 seeded from `seed`.
pub fn sample_uniform(interval: &PredictionInterval, count: usize, seed: u64) -> Result<ScenarioSet> {
    if count == 0 {
        return Err(Error::Domain("sample count 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass = 1.0 / count as f64;
    let scenarios = (0..count)
        .map(|_| {
            let p_w = interval
                .lower
                .iter()
                .zip(&interval.upper)
                .map(|(&l, &u)| {
                    let x: f64 = rng.gen();
                    l + (u - l) * x
                })
                .collect();
            Scenario {
                p_w,
                probability: mass,
            }
        })
        .collect();
    Ok(ScenarioSet {
        scenarios,
        provenance: Provenance::Sampled,
        seed,
        interval: interval.clone(),
        parent_indices: (0..count).collect(),
    })
}
