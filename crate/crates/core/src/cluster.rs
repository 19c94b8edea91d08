//! Lloyd's k-means over standardized (A, D, T) vectors with k-means++
//! seeding and seeded restarts.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, Rng};
use crate::stats::StandardizedFeatures;

pub const MAX_ITERATIONS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_K: usize = 3;

type Point = [f64; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Point>,
    pub countries: Vec<String>,
    /// Cluster index per country, aligned with `countries`.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations_run: usize,
    /// Objective after every assignment step of the winning run.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Names like `high-autonomy/low-digital/high-teacher` from centroid signs.
    pub fn typology_labels(&self) -> Vec<String> {
        self.centroids
            .iter()
            .map(|c| {
                ["autonomy", "digital", "teacher"]
                    .iter()
                    .zip(c)
                    .map(|(name, v)| format!("{}-{name}", if *v >= 0.0 { "high" } else { "low" }))
                    .collect::<Vec<_>>()
                    .join("/")
            })
            .collect()
    }
}

pub fn squared_distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Nearest centroid; ties resolve to the lowest index.
fn nearest(p: &Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, squared_distance(p, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Within-cluster sum of squared distances.
pub fn inertia(points: &[Point], centroids: &[Point], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum()
}

fn kmeans_pp_init(points: &[Point], k: usize, rng: &mut Rng) -> Vec<Point> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &points[first]))
        .collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target == total; take the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).unwrap())
        } else {
            (0..n).find(|i| !chosen[*i]).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.push(points[pick]);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, &points[pick]));
        }
    }
    centroids
}

struct LloydRun {
    centroids: Vec<Point>,
    assignments: Vec<usize>,
    inertia: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn lloyd(points: &[Point], mut centroids: Vec<Point>) -> LloydRun {
    let k = centroids.len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        let changed = next != assignments;
        assignments = next;
        history.push(inertia(points, &centroids, &assignments));
        if !changed {
            break;
        }

        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for j in 0..3 {
                sums[a][j] += p[j];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].map(|s| s / counts[c] as f64);
            }
        }
        // empty cluster: move its centroid onto the point farthest from its own centroid
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far: Option<(usize, f64)> = None;
            for (i, p) in points.iter().enumerate() {
                if taken[i] {
                    continue;
                }
                let d = squared_distance(p, &centroids[assignments[i]]);
                if far.is_none_or(|(_, best)| d > best) {
                    far = Some((i, d));
                }
            }
            if let Some((i, _)) = far {
                taken[i] = true;
                centroids[c] = points[i];
            }
        }
    }

    LloydRun {
        inertia: inertia(points, &centroids, &assignments),
        centroids,
        assignments,
        iterations,
        history,
    }
}

fn check_feasible(features: &StandardizedFeatures, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Contract("k must be at least 1".into()));
    }
    if features.len() < k {
        return Err(Error::Infeasible {
            n: features.len(),
            k,
        });
    }
    Ok(())
}

fn to_model(features: &StandardizedFeatures, k: usize, seed: u64, run: LloydRun) -> ClusterModel {
    ClusterModel {
        k,
        centroids: run.centroids,
        countries: features.countries.clone(),
        assignments: run.assignments,
        inertia: run.inertia,
        seed,
        iterations_run: run.iterations,
        inertia_history: run.history,
    }
}

/// Best of `restarts` seeded k-means++ / Lloyd runs, ordered by
/// (inertia, restart index).
pub fn kmeans_fit_with_restarts(
    features: &StandardizedFeatures,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel> {
    check_feasible(features, k)?;
    let best = best_run(&features.z, k, seed, restarts.max(1), None);
    Ok(to_model(features, k, seed, best))
}

pub fn kmeans_fit(features: &StandardizedFeatures, k: usize, seed: u64) -> Result<ClusterModel> {
    kmeans_fit_with_restarts(features, k, seed, DEFAULT_RESTARTS)
}

fn best_run(
    points: &[Point],
    k: usize,
    seed: u64,
    restarts: usize,
    warm: Option<Vec<Point>>,
) -> LloydRun {
    let mut best: Option<LloydRun> = None;
    let inits = (0..restarts)
        .map(|r| {
            let mut rng = seeded(derive_seed(seed, r as u64));
            kmeans_pp_init(points, k, &mut rng)
        })
        .chain(warm);
    for init in inits {
        let run = lloyd(points, init);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.unwrap()
}

/// Fits k = 1..=k_max. Each k > 1 also tries a warm start from the
/// previous solution plus the worst-fit point, so the curve never rises.
pub fn inertia_curve(
    features: &StandardizedFeatures,
    k_max: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    check_feasible(features, k_max)?;
    let points = &features.z;
    let mut curve = Vec::with_capacity(k_max);
    let mut prev: Option<LloydRun> = None;
    for k in 1..=k_max {
        let warm = prev.as_ref().map(|p| {
            let far = (0..points.len())
                .max_by(|&a, &b| {
                    let da = squared_distance(&points[a], &p.centroids[p.assignments[a]]);
                    let db = squared_distance(&points[b], &p.centroids[p.assignments[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap();
            let mut c = p.centroids.clone();
            c.push(points[far]);
            c
        });
        let run = best_run(points, k, seed, DEFAULT_RESTARTS, warm);
        curve.push((k, run.inertia));
        prev = Some(run);
    }
    Ok(curve)
}
