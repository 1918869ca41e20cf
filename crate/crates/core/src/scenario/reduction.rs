use rayon::prelude::*;

use super::{euclidean, PredictionInterval, Provenance, Scenario, ScenarioSet};
use crate::error::{Error, Result};

/// Fast-forward selection of `keep` atoms under the Euclidean cost.
///
/// Each step adds the atom that minimizes the reduction distance of the
/// current selection plus that atom; ties go to the lowest index. Dropped
/// atoms hand their mass to the nearest kept atom (again lowest index on
/// ties). Kept atoms are returned in original index order.
pub fn fast_forward_reduce(set: &ScenarioSet, keep: usize) -> Result<ScenarioSet> {
    fast_forward_reduce_with(set, keep, &euclidean)
}

pub fn fast_forward_reduce_with<F>(set: &ScenarioSet, keep: usize, cost: &F) -> Result<ScenarioSet>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let n = set.len();
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    if keep == 0 || keep > n {
        return Err(Error::Domain(format!("cannot keep {keep} of {n} scenarios")));
    }
    let pts: Vec<&[f64]> = set.scenarios.iter().map(|s| s.p_w.as_slice()).collect();
    let mass: Vec<f64> = set.scenarios.iter().map(|s| s.probability).collect();
    // distance from each atom to the nearest selected atom
    let mut near = vec![f64::INFINITY; n];
    let mut selected = vec![false; n];
    let mut order = Vec::with_capacity(keep);

    for _ in 0..keep {
        let scores: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .filter(|&u| !selected[u])
            .map(|u| {
                let mut z = 0.0;
                for k in 0..n {
                    if k != u && !selected[k] {
                        z += mass[k] * cost(pts[k], pts[u]).min(near[k]);
                    }
                }
                (u, z)
            })
            .collect();
        let mut best = scores[0];
        for &(u, z) in &scores[1..] {
            if z < best.1 {
                best = (u, z);
            }
        }
        let u = best.0;
        selected[u] = true;
        order.push(u);
        near.par_iter_mut().enumerate().for_each(|(k, d)| {
            *d = d.min(cost(pts[k], pts[u]));
        });
    }

    let mut kept = order;
    kept.sort_unstable();
    let mut new_mass: Vec<f64> = kept.iter().map(|&k| mass[k]).collect();
    for k in 0..n {
        if selected[k] {
            continue;
        }
        let mut best = 0;
        let mut best_c = f64::INFINITY;
        for (slot, &s) in kept.iter().enumerate() {
            let c = cost(pts[k], pts[s]);
            if c < best_c {
                best_c = c;
                best = slot;
            }
        }
        new_mass[best] += mass[k];
    }
    Ok(ScenarioSet {
        scenarios: kept
            .iter()
            .zip(new_mass)
            .map(|(&k, probability)| Scenario {
                p_w: set.scenarios[k].p_w.clone(),
                probability,
            })
            .collect(),
        provenance: Provenance::Reduced,
        seed: set.seed,
        interval: set.interval.clone(),
        parent_indices: kept,
    })
}

/// Keeps the reduced scenarios that fall in the short-term box and
/// renormalizes their mass.
pub fn select_online(reduced: &ScenarioSet, short_term: &PredictionInterval) -> Result<ScenarioSet> {
    if short_term.dim() != reduced.interval.dim() {
        return Err(Error::Dimension("short-term interval has wrong farm count".into()));
    }
    let idx: Vec<usize> = (0..reduced.len())
        .filter(|&i| short_term.contains_point(&reduced.scenarios[i].p_w))
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(subset(reduced, idx, short_term))
}

/// The `k` reduced scenarios closest to the short-term box (Euclidean
/// distance to the box, lowest index on ties), renormalized. Used when the
/// box itself holds no scenario.
pub fn select_nearest(reduced: &ScenarioSet, short_term: &PredictionInterval, k: usize) -> Result<ScenarioSet> {
    if reduced.is_empty() {
        return Err(Error::EmptySupport);
    }
    if k == 0 {
        return Err(Error::Domain("fallback count 0".into()));
    }
    let mut dist: Vec<(usize, f64)> = reduced
        .scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d2: f64 = s
                .p_w
                .iter()
                .zip(short_term.lower.iter().zip(&short_term.upper))
                .map(|(&x, (&l, &u))| {
                    let e = if x < l { l - x } else if x > u { x - u } else { 0.0 };
                    e * e
                })
                .sum();
            (i, d2.sqrt())
        })
        .collect();
    dist.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut idx: Vec<usize> = dist.iter().take(k).map(|x| x.0).collect();
    idx.sort_unstable();
    Ok(subset(reduced, idx, short_term))
}

fn subset(reduced: &ScenarioSet, idx: Vec<usize>, interval: &PredictionInterval) -> ScenarioSet {
    let total: f64 = idx.iter().map(|&i| reduced.scenarios[i].probability).sum();
    ScenarioSet {
        scenarios: idx
            .iter()
            .map(|&i| Scenario {
                p_w: reduced.scenarios[i].p_w.clone(),
                probability: reduced.scenarios[i].probability / total,
            })
            .collect(),
        provenance: Provenance::Selected,
        seed: reduced.seed,
        interval: interval.clone(),
        parent_indices: idx,
    }
}
