use super::ScenarioSet;
use crate::error::{Error, Result};

/// Euclidean distance between two output vectors.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Reduction distance of keeping `kept` atoms of a weighted set: each
/// dropped atom pays its mass times the cost to the nearest kept atom.
pub fn reduction_distance(
    points: &[Vec<f64>],
    mass: &[f64],
    kept: &[usize],
    cost: &dyn Fn(&[f64], &[f64]) -> f64,
) -> f64 {
    let mut is_kept = vec![false; points.len()];
    for &k in kept {
        is_kept[k] = true;
    }
    (0..points.len())
        .filter(|&i| !is_kept[i])
        .map(|i| {
            let near = kept
                .iter()
                .map(|&k| cost(&points[i], &points[k]))
                .fold(f64::INFINITY, f64::min);
            mass[i] * near
        })
        .sum()
}

/// Kantorovich distance between two discrete measures.
///
/// When every atom of `b` is also an atom of `a` (the reduction case) this
/// is the optimal-redistribution distance: every atom of `a` outside `b`'s
/// support moves its mass to the nearest atom of `b`. Otherwise the exact
/// transport problem is solved.
pub fn kantorovich_distance(
    a: &ScenarioSet,
    b: &ScenarioSet,
    cost: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySupport);
    }
    let pa: Vec<Vec<f64>> = a.scenarios.iter().map(|s| s.p_w.clone()).collect();
    let ma: Vec<f64> = a.scenarios.iter().map(|s| s.probability).collect();
    let mut kept = Vec::with_capacity(b.len());
    for s in &b.scenarios {
        match pa.iter().position(|p| *p == s.p_w) {
            Some(i) => kept.push(i),
            None => {
                kept.clear();
                break;
            }
        }
    }
    if kept.len() == b.len() {
        kept.sort_unstable();
        kept.dedup();
        return Ok(reduction_distance(&pa, &ma, &kept, cost));
    }
    let mb: Vec<f64> = b.scenarios.iter().map(|s| s.probability).collect();
    let c: Vec<Vec<f64>> = pa
        .iter()
        .map(|x| b.scenarios.iter().map(|y| cost(x, &y.p_w)).collect())
        .collect();
    Ok(transport_cost(&ma, &mb, &c))
}

/// Minimum-cost transport between supplies `p` and demands `q` by
/// successive shortest augmenting paths (Bellman-Ford on the residual graph).
fn transport_cost(p: &[f64], q: &[f64], c: &[Vec<f64>]) -> f64 {
    const EPS: f64 = 1e-15;
    let (n, m) = (p.len(), q.len());
    // flow[i][j] on a_i -> b_j; residual supplies/demands tracked directly
    let mut flow = vec![vec![0.0; m]; n];
    let mut supply = p.to_vec();
    let mut demand = q.to_vec();
    let total = p.iter().sum::<f64>().min(q.iter().sum::<f64>());
    let mut shipped = 0.0;
    // node ids: a_i = i, b_j = n + j
    let nodes = n + m;
    while shipped < total - 1e-14 {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<usize>> = vec![None; nodes];
        for i in 0..n {
            if supply[i] > EPS {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_finite() {
                    for j in 0..m {
                        let d = dist[i] + c[i][j];
                        if d < dist[n + j] - 1e-15 {
                            dist[n + j] = d;
                            prev[n + j] = Some(i);
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..m {
                if dist[n + j].is_finite() {
                    for i in 0..n {
                        if flow[i][j] > EPS {
                            let d = dist[n + j] - c[i][j];
                            if d < dist[i] - 1e-15 {
                                dist[i] = d;
                                prev[i] = Some(n + j);
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let sink = (0..m)
            .filter(|&j| demand[j] > EPS && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]));
        let Some(j_end) = sink else { break };
        // walk back to a source, collect path and bottleneck
        let mut path = vec![n + j_end];
        let mut node = n + j_end;
        while let Some(pr) = prev[node] {
            path.push(pr);
            node = pr;
            if node < n && supply[node] > EPS && prev[node].is_none() {
                break;
            }
            if path.len() > 2 * nodes {
                break;
            }
        }
        let source = *path.last().unwrap();
        let mut amount = supply[source].min(demand[j_end]);
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from >= n && to < n {
                amount = amount.min(flow[to][from - n]);
            }
        }
        if amount <= EPS {
            break;
        }
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from < n {
                flow[from][to - n] += amount;
            } else {
                flow[to][from - n] -= amount;
            }
        }
        supply[source] -= amount;
        demand[j_end] -= amount;
        shipped += amount;
    }
    let mut total_cost = 0.0;
    for i in 0..n {
        for j in 0..m {
            total_cost += flow[i][j] * c[i][j];
        }
    }
    total_cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Horizon, PredictionInterval, Provenance, Scenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(points: Vec<(Vec<f64>, f64)>) -> ScenarioSet {
        let d = points[0].0.len();
        let n = points.len();
        ScenarioSet {
            scenarios: points
                .into_iter()
                .map(|(p_w, probability)| Scenario { p_w, probability })
                .collect(),
            provenance: Provenance::Reduced,
            seed: 0,
            interval: PredictionInterval::new(vec![0.0; d], vec![1e9; d], Horizon::DayAhead).unwrap(),
            parent_indices: (0..n).collect(),
        }
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let a = set(vec![(vec![1.0, 2.0], 0.5), (vec![3.0, 1.0], 0.5)]);
        assert_eq!(kantorovich_distance(&a, &a, &euclidean).unwrap(), 0.0);
    }

    #[test]
    fn single_atoms() {
        let a = set(vec![(vec![0.0, 0.0], 1.0)]);
        let b = set(vec![(vec![3.0, 4.0], 1.0)]);
        assert!((kantorovich_distance(&a, &b, &euclidean).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_support_is_an_error() {
        let a = set(vec![(vec![0.0], 1.0)]);
        let mut b = a.clone();
        b.scenarios.clear();
        assert!(matches!(kantorovich_distance(&a, &b, &euclidean), Err(Error::EmptySupport)));
    }

    #[test]
    fn subset_matches_exhaustive_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pts: Vec<(Vec<f64>, f64)> =
                (0..10).map(|_| (vec![rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0], 0.1)).collect();
            let a = set(pts.clone());
            let idx = [1usize, 4, 8];
            // brute force: every assignment of the 7 dropped atoms to the 3 kept ones
            let dropped: Vec<usize> = (0..10).filter(|i| !idx.contains(i)).collect();
            let mut best = f64::INFINITY;
            for code in 0..3usize.pow(dropped.len() as u32) {
                let mut c = code;
                let mut tot = 0.0;
                for &d in &dropped {
                    tot += 0.1 * euclidean(&pts[d].0, &pts[idx[c % 3]].0);
                    c /= 3;
                }
                best = best.min(tot);
            }
            let b = set(idx.iter().map(|&i| (pts[i].0.clone(), 1.0 / 3.0)).collect());
            let dk = kantorovich_distance(&a, &b, &euclidean).unwrap();
            assert!((dk - best).abs() < 1e-12);
        }
    }

    #[test]
    fn general_transport_matches_small_lp() {
        // two atoms each side; optimal plan computed by hand
        let a = set(vec![(vec![0.0], 0.5), (vec![10.0], 0.5)]);
        let b = set(vec![(vec![1.0], 0.3), (vec![9.0], 0.7)]);
        // 0.3 from 0 -> 1 (0.3), 0.2 from 0 -> 9 (1.8), 0.5 from 10 -> 9 (0.5)
        let d = kantorovich_distance(&a, &b, &euclidean).unwrap();
        assert!((d - 2.6).abs() < 1e-12, "{d}");
    }
}
