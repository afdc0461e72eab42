//! Semantic-path metrics over a sequence of window embeddings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mvee::mvee;
use super::FeatureError;

/// Largest point count solved exactly; beyond it a heuristic is used.
pub const EXACT_LIMIT: usize = 12;
/// Upper bound on the projected dimension for the volume.
pub const MAX_VOLUME_DIMS: usize = 5;

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sum of consecutive distances, left to right.
pub fn path_length(points: &[Vec<f64>]) -> f64 {
    points.windows(2).map(|w| distance(&w[0], &w[1])).sum()
}

/// Mean distance between consecutive points.
pub fn speed(points: &[Vec<f64>]) -> Result<f64, FeatureError> {
    if points.len() < 2 {
        return Err(FeatureError::PathUndefined(points.len()));
    }
    Ok(path_length(points) / (points.len() - 1) as f64)
}

/// Shortest open path from the first to the last point through all others,
/// by Held-Karp dynamic programming.
pub fn shortest_path_exact(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return distance(&points[0], &points[1]);
    }
    let last = n - 1;
    // Interior points 1..last are bits 0..m.
    let m = n - 2;
    let full = (1usize << m) - 1;
    let mut dp = vec![f64::INFINITY; (1 << m) * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = distance(&points[0], &points[j + 1]);
    }
    for mask in 1..=full {
        for j in 0..m {
            let cur = dp[mask * m + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + distance(&points[j + 1], &points[k + 1]);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                }
            }
        }
    }
    (0..m)
        .map(|j| dp[full * m + j] + distance(&points[j + 1], &points[last]))
        .fold(f64::INFINITY, f64::min)
}

/// Nearest-neighbour tour from the first point with the last point fixed at
/// the end, improved by 2-opt segment reversals until no move helps.
pub fn shortest_path_heuristic(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n < 3 {
        return path_length(points);
    }
    let d = |a: usize, b: usize| distance(&points[a], &points[b]);
    let mut order = Vec::with_capacity(n);
    order.push(0);
    let mut left: Vec<usize> = (1..n - 1).collect();
    while !left.is_empty() {
        let cur = *order.last().expect("nonempty");
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| d(cur, *a.1).total_cmp(&d(cur, *b.1)))
            .expect("nonempty");
        order.push(left.remove(pos));
    }
    order.push(n - 1);

    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..n - 2 {
            for j in i + 1..n - 1 {
                let (a, b, c, e) = (order[i - 1], order[i], order[j], order[j + 1]);
                let delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                if delta < -1e-12 {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
    }
    order.windows(2).map(|w| d(w[0], w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circuitousness {
    pub ratio: f64,
    pub exact: bool,
    /// The heuristic found a path longer than the one travelled and the ratio
    /// was raised to 1.
    pub clamped: bool,
}

/// Travelled length over the shortest first-to-last path through all points.
pub fn circuitousness(points: &[Vec<f64>]) -> Result<Circuitousness, FeatureError> {
    let n = points.len();
    if n < 2 {
        return Err(FeatureError::PathUndefined(n));
    }
    let exact = n <= EXACT_LIMIT;
    let travelled = path_length(points);
    let shortest = if exact {
        shortest_path_exact(points)
    } else {
        shortest_path_heuristic(points)
    };
    if n == 2 || shortest <= 0.0 {
        return Ok(Circuitousness { ratio: 1.0, exact, clamped: false });
    }
    let ratio = travelled / shortest;
    if !exact && ratio < 1.0 {
        return Ok(Circuitousness { ratio: 1.0, exact, clamped: true });
    }
    Ok(Circuitousness { ratio, exact, clamped: false })
}

/// Principal-component scores of the centered points, keeping at most
/// `max_dims` components with non-negligible variance.
pub fn pca_scores(points: &[Vec<f64>], max_dims: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    if n == 0 || max_dims == 0 {
        return vec![Vec::new(); n];
    }
    let d = points[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, k| points[i][k] - mean[k]);
    let gram = &x * x.transpose();
    let eig = gram.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let top = eig.eigenvalues[idx[0]].max(0.0);
    let keep: Vec<usize> = idx
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > top * 1e-10 && eig.eigenvalues[i] > 0.0)
        .take(max_dims)
        .collect();
    (0..n)
        .map(|i| {
            keep.iter()
                .map(|&c| eig.eigenvectors[(i, c)] * eig.eigenvalues[c].sqrt())
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub volume: f64,
    pub dims: usize,
    pub degenerate: bool,
}

/// Enclosing-ellipsoid volume after projecting the `T` points onto their
/// first `min(T - 2, 5)` principal components (fewer if the points span
/// fewer dimensions).
pub fn path_volume(points: &[Vec<f64>], tolerance: f64) -> Result<Volume, FeatureError> {
    let n = points.len();
    if n < 2 {
        return Err(FeatureError::PathUndefined(n));
    }
    let r = n.saturating_sub(2).min(MAX_VOLUME_DIMS);
    if r == 0 {
        return Ok(Volume { volume: 0.0, dims: 0, degenerate: true });
    }
    let scores = pca_scores(points, r);
    let dims = scores[0].len();
    if dims == 0 {
        return Ok(Volume { volume: 0.0, dims: 0, degenerate: true });
    }
    let e = mvee(&scores, tolerance)?;
    Ok(Volume {
        volume: e.volume,
        dims,
        degenerate: e.degenerate,
    })
}
