//! Deterministic Lloyd's k-means used by the pressure module.
//!
//! No random restarts: callers supply explicit seed centroids, so results
//! are reproducible and safe to recompute across threads.

/// Outcome of one Lloyd's run.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster id per input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    pub iterations: usize,
}

pub const MAX_ITERS: usize = 100;
pub const TOLERANCE: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties resolved to the lower centroid index.
fn assign(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Lloyd's iterations from explicit seeds. Empty clusters keep their
/// previous centroid; convergence is measured by maximum centroid
/// displacement.
pub fn lloyd(points: &[Vec<f64>], seeds: &[Vec<f64>]) -> KMeansResult {
    assert!(!points.is_empty(), "k-means needs points");
    assert!(!seeds.is_empty(), "k-means needs seeds");
    let dim = points[0].len();
    let k = seeds.len();
    let mut centroids: Vec<Vec<f64>> = seeds.to_vec();
    let mut assignments = vec![0usize; points.len()];
    let mut iterations = 0;

    for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        for (i, p) in points.iter().enumerate() {
            assignments[i] = assign(p, &centroids).0;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            let c = assignments[i];
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut max_shift = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster: centroid stays put
            }
            let mut shift = 0.0;
            for d in 0..dim {
                let next = sums[c][d] / counts[c] as f64;
                shift += (next - centroids[c][d]).powi(2);
                centroids[c][d] = next;
            }
            max_shift = max_shift.max(shift.sqrt());
        }
        if max_shift < TOLERANCE {
            break;
        }
    }

    // Final assignment against the converged centroids.
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = assign(p, &centroids);
        assignments[i] = c;
        inertia += d;
    }
    KMeansResult { assignments, centroids, inertia, iterations }
}

/// Farthest-first seeds: start from `first_idx`, then repeatedly take the
/// point maximizing its minimum distance to the chosen seeds (ties to the
/// lower index). Used when the preferred seeds coincide.
pub fn farthest_first_seeds(points: &[Vec<f64>], first_idx: usize, k: usize) -> Vec<Vec<f64>> {
    let mut chosen = vec![first_idx];
    while chosen.len() < k {
        let mut best_idx = 0;
        let mut best_d = -1.0f64;
        for (i, p) in points.iter().enumerate() {
            let d = chosen
                .iter()
                .map(|&c| sq_dist(p, &points[c]))
                .fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best_idx = i;
            }
        }
        chosen.push(best_idx);
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}
