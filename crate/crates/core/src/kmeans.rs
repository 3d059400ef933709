//! Exact weighted 1-D k-means via dynamic programming.
//!
//! Optimal 1-D clusters are contiguous in sorted order, so the exact optimum
//! is a dynamic program over split positions; no initialization sensitivity,
//! deterministic output.

/// Clusters `points` (with positive `weights`) into `k` groups minimizing the
/// weighted within-cluster sum of squares; returns the `k` weighted centers
/// in ascending order.
///
/// Panics if `k` is zero, exceeds the point count, or the lengths differ.
pub fn weighted_kmeans_1d(points: &[f64], weights: &[f64], k: usize) -> Vec<f64> {
    assert_eq!(points.len(), weights.len());
    let n = points.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n, got k={k} n={n}");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let xs: Vec<f64> = order.iter().map(|&i| points[i]).collect();
    let ws: Vec<f64> = order.iter().map(|&i| weights[i]).collect();

    // Prefix sums of w, w*x, w*x^2 give O(1) segment costs.
    let mut pw = vec![0.0f64; n + 1];
    let mut pwx = vec![0.0f64; n + 1];
    let mut pwx2 = vec![0.0f64; n + 1];
    for i in 0..n {
        pw[i + 1] = pw[i] + ws[i];
        pwx[i + 1] = pwx[i] + ws[i] * xs[i];
        pwx2[i + 1] = pwx2[i] + ws[i] * xs[i] * xs[i];
    }
    let seg_cost = |i: usize, j: usize| -> f64 {
        // cost of clustering sorted points i..=j around their weighted mean
        let w = pw[j + 1] - pw[i];
        if w <= 0.0 {
            return 0.0;
        }
        let sx = pwx[j + 1] - pwx[i];
        let sx2 = pwx2[j + 1] - pwx2[i];
        (sx2 - sx * sx / w).max(0.0)
    };

    // cost[c][j]: best cost of grouping 0..=j into c+1 clusters; split[c][j]
    // records the first index of the last cluster.
    let mut cost = vec![vec![f64::INFINITY; n]; k];
    let mut split = vec![vec![0usize; n]; k];
    for j in 0..n {
        cost[0][j] = seg_cost(0, j);
    }
    for c in 1..k {
        for j in c..n {
            for s in c..=j {
                let candidate = cost[c - 1][s - 1] + seg_cost(s, j);
                if candidate < cost[c][j] {
                    cost[c][j] = candidate;
                    split[c][j] = s;
                }
            }
        }
    }

    let mut centers = vec![0.0f64; k];
    let mut j = n - 1;
    for c in (0..k).rev() {
        let start = if c == 0 { 0 } else { split[c][j] };
        let w = pw[j + 1] - pw[start];
        centers[c] = (pwx[j + 1] - pwx[start]) / w;
        if c > 0 {
            j = start - 1;
        }
    }
    centers
}
