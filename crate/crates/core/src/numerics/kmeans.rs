use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITERS: usize = 100;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// d×K, column k is the mean of cluster k.
    pub centers: Array2<f64>,
}

/// Lloyd's algorithm with k-means++ seeding. `x` is d×N.
pub fn kmeans(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    let (d, n) = x.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(x, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];

    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let xi = x.column(i);
            let (best, bd) = nearest(xi, centers.view());
            dist[i] = bd;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut counts = recompute_centers(x, &assignments, &mut centers);
        // empty clusters take the point farthest from its current center
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("K <= N leaves a cluster with two members");
            counts[assignments[far]] -= 1;
            assignments[far] = c;
            counts[c] = 1;
            dist[far] = 0.0;
            recompute_centers(x, &assignments, &mut centers);
        }
    }
    recompute_centers(x, &assignments, &mut centers);
    debug_assert_eq!(centers.nrows(), d);
    Ok(KMeansResult {
        assignments,
        centers,
    })
}

fn seed_centers(x: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (d, n) = x.dim();
    let mut centers = Array2::zeros((d, k));
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    centers.column_mut(0).assign(&x.column(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.column(i), x.column(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    idx = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            idx.expect("positive total")
        } else {
            // all remaining points coincide with a center
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        centers.column_mut(c).assign(&x.column(pick));
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_dist(x.column(i), x.column(pick)));
        }
    }
    centers
}

fn recompute_centers(x: ArrayView2<'_, f64>, assignments: &[usize], centers: &mut Array2<f64>) -> Vec<usize> {
    let k = centers.ncols();
    let mut counts = vec![0usize; k];
    let mut sums = Array2::<f64>::zeros(centers.dim());
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        let mut col = sums.column_mut(a);
        col += &x.column(i);
    }
    for c in 0..k {
        if counts[c] > 0 {
            let mean = &sums.column(c) / counts[c] as f64;
            centers.column_mut(c).assign(&mean);
        }
    }
    counts
}

fn nearest(p: ArrayView1<'_, f64>, centers: ArrayView2<'_, f64>) -> (usize, f64) {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (c, col) in centers.columns().into_iter().enumerate() {
        let dd = sq_dist(p, col);
        if dd < bd {
            bd = dd;
            best = c;
        }
    }
    (best, bd)
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}
